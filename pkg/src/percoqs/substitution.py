"""Boundary-death substitution on surviving words.

A surviving word of level n is flagged when none of its boundary-cell
children survived to level n+1.  The substitution rewrites a word by
inserting the configured word eta immediately before every letter whose
parent prefix is flagged; rewriting happens in one pass over the source
word and is never re-applied inside inserted blocks.  Mapping rewritten
words through their corner points yields a map of surviving corners that
shrinks flagged branches by an extra factor M^-K.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, PreconditionError
from .lattice import (
    Box,
    ExactPoint,
    Word,
    dist_max,
    pi_finite,
    validate_word,
    word_meet,
)
from .percolation import PercTree


@dataclass(frozen=True)
class TildeWord:
    """A rewritten word plus the 1-based source positions that triggered
    an insertion."""

    labels: Word
    insertions: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class FlaggedTree:
    """A sampled tree with per-node flags and rewritten-word lengths.

    flags[k][i] is defined for levels k < depth only: the flag reads the
    children at level k+1, and the deepest sampled level has unknown
    children.  tilde_lengths[k][i] is the length of the rewritten word of
    node i at level k: k + K * (flagged proper prefixes).
    """

    tree: PercTree
    flags: tuple[np.ndarray, ...]
    tilde_lengths: tuple[np.ndarray, ...]

    @property
    def params(self):
        return self.tree.params

    @property
    def depth(self) -> int:
        return self.tree.depth


def compute_flags(tree: PercTree) -> FlaggedTree:
    """Flag every node of level < depth whose boundary children all died.

    A childless node is flagged vacuously; no surviving word passes
    through it, so the flag is never consumed by the substitution.
    """
    if tree.depth < 1:
        raise PreconditionError("flags need at least one sampled child level")
    nb = tree.params.n_boundary
    kk = tree.params.k
    flags = []
    tls = [np.zeros(1, dtype=np.int64)]
    for k in range(tree.depth):
        par = tree.parents[k + 1]
        lab = tree.labels[k + 1]
        has_boundary_child = (
            np.bincount(par[lab <= nb], minlength=tree.count(k)) > 0
        )
        fl = ~has_boundary_child
        flags.append(fl)
        tls.append(tls[k][par] + 1 + kk * fl[par].astype(np.int64))
    return FlaggedTree(tree, tuple(flags), tuple(tls))


def _walk_prefix_nodes(ftree: FlaggedTree, word: Word) -> list[int]:
    """Node indices of word prefixes of lengths 0..len(word)-1.

    Raises when a proper prefix died or the word overruns the depth at
    which flags are defined.
    """
    if len(word) > ftree.depth:
        raise PreconditionError(
            f"word of length {len(word)} overruns sampled depth {ftree.depth}; "
            "flags past the deepest level are unknown"
        )
    nodes = [0]
    for n in range(len(word) - 1):
        nxt = ftree.tree.child_index(n, nodes[-1], word[n])
        if nxt is None:
            raise PreconditionError(
                f"prefix {word[: n + 1]} did not survive; substitution undefined"
            )
        nodes.append(nxt)
    return nodes


def tilde(ftree: FlaggedTree, word: Word) -> TildeWord:
    """Rewrite a word, inserting eta before each letter whose parent
    prefix is flagged.

    Defined whenever every proper prefix survived (the final letter may
    be any label).  The empty word rewrites to itself.
    """
    word = tuple(word)
    validate_word(ftree.params, word)
    nodes = _walk_prefix_nodes(ftree, word)
    eta = ftree.params.eta
    out: list[int] = []
    insertions: list[int] = []
    for n, lab in enumerate(word):
        if ftree.flags[n][nodes[n]]:
            out.extend(eta)
            insertions.append(n + 1)
        out.append(lab)
    return TildeWord(tuple(out), tuple(insertions))


def f_point(ftree: FlaggedTree, word: Word) -> ExactPoint:
    """Image of a surviving word's corner: the corner of its rewritten
    word."""
    word = tuple(word)
    tw = tilde(ftree, word)
    if word and ftree.tree.find(word) is None:
        raise PreconditionError(f"word {word} did not survive; corner has no image")
    return pi_finite(ftree.params, tw.labels)


def _tilde_rows(ftree: FlaggedTree, level: int) -> tuple[list[Word], list[Word]]:
    """(source words, rewritten words) for every survivor of a level."""
    if not (0 <= level <= ftree.depth):
        raise DomainError(f"level {level} outside 0..{ftree.depth}")
    words: list[Word] = [()]
    tws: list[Word] = [()]
    eta = ftree.params.eta
    for k in range(level):
        par = ftree.tree.parents[k + 1]
        lab = ftree.tree.labels[k + 1]
        fl = ftree.flags[k]
        words = [words[par[i]] + (int(lab[i]),) for i in range(lab.shape[0])]
        tws = [
            tws[par[i]] + eta + (int(lab[i]),)
            if fl[par[i]]
            else tws[par[i]] + (int(lab[i]),)
            for i in range(lab.shape[0])
        ]
    return words, tws


def image_cover(ftree: FlaggedTree, level: int) -> set[Box]:
    """Image boxes of all survivors of a level.

    Each box sits at level |w| + K * (number of insertions).  Distinct
    survivors always yield distinct boxes; a collision would break the
    substitution's injectivity and raises.
    """
    _, tws = _tilde_rows(ftree, level)
    boxes = {
        Box(pi_finite(ftree.params, tw), len(tw)) for tw in tws
    }
    if len(boxes) != len(tws):
        raise RuntimeError(
            "image boxes collided; the substitution lost injectivity"
        )
    return boxes


def write_cover_csv(path, ftree: FlaggedTree, level: int) -> None:
    """CSV of the level's image cover.

    Columns: source_word, tilde_word (dot-joined labels), level (of the
    image box), then one column per axis with the exact corner numerator
    at that level (coordinate = numerator / M^level).
    """
    words, tws = _tilde_rows(ftree, level)
    d = ftree.params.d
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["source_word", "tilde_word", "level"] + [f"c{i}" for i in range(d)]
        )
        for w, tw in zip(words, tws):
            corner = pi_finite(ftree.params, tw)
            nums = corner.nums_at_level(len(tw))
            writer.writerow(
                [
                    ".".join(str(l) for l in w),
                    ".".join(str(l) for l in tw),
                    len(tw),
                ]
                + [str(n) for n in nums]
            )


def comparability_ratio(ftree: FlaggedTree, i: Word, j: Word) -> Fraction:
    """Distortion of the corner map between two surviving words of equal
    length, rescaled by the meet's rewriting:

        dist(f(i), f(j)) * M^(|tilde(meet)| - |meet|) / dist(corner(i), corner(j))

    Exact rational arithmetic throughout.
    """
    i, j = tuple(i), tuple(j)
    if len(i) != len(j):
        raise DomainError("words must have equal length")
    if i == j:
        raise DomainError("words must differ")
    fi = f_point(ftree, i)
    fj = f_point(ftree, j)
    den = dist_max(pi_finite(ftree.params, i), pi_finite(ftree.params, j))
    if den == 0:
        raise DomainError("coincident corners")
    meet = word_meet(i, j)
    tmeet = tilde(ftree, meet)
    scale = Fraction(ftree.params.m) ** (len(tmeet) - len(meet))
    return dist_max(fi, fj) * scale / den
