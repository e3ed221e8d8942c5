"""Boundary-death rewriting: flags, tilde, corner map, exact invariants."""

import csv
from fractions import Fraction

import pytest

from percoqs.errors import DomainError, PreconditionError
from percoqs.lattice import Params, dist_max, pi_finite
from percoqs.percolation import sample_tree, subtree, tree_from_words
from percoqs.substitution import (
    compute_flags,
    comparability_ratio,
    f_point,
    image_cover,
    tilde,
    write_cover_csv,
)
from percoqs.analysis import partition_sum

P32 = Params(m=3, d=2, p=0.7)
P42 = Params(m=4, d=2, p=0.7)
P_NEAR_ONE = Params(m=3, d=2, p=1.0 - 2.0**-53)


def hand_tree_root_unflagged():
    # root keeps a boundary child (3), node (9,) keeps only the interior
    # child, node (3,) is childless
    t = tree_from_words(P32, 2, [[()], [(9,), (3,)], [(9, 9)]])
    return compute_flags(t)


def hand_tree_root_flagged():
    # root keeps only the interior child; (9,) keeps a boundary child
    t = tree_from_words(P32, 2, [[()], [(9,)], [(9, 3)]])
    return compute_flags(t)


# --- flags -----------------------------------------------------------------


def test_flags_hand_tree():
    ft = hand_tree_root_unflagged()
    t = ft.tree
    assert not ft.flags[0][0]  # root: boundary child 3 alive
    assert bool(ft.flags[1][t.find((9,))])  # only interior child
    assert bool(ft.flags[1][t.find((3,))])  # childless: vacuously flagged


def test_flags_root_flagged_tree():
    ft = hand_tree_root_flagged()
    assert bool(ft.flags[0][0])
    assert not ft.flags[1][ft.tree.find((9,))]


def test_flags_full_tree_all_false():
    ft = compute_flags(sample_tree(P_NEAR_ONE, 3, 0))
    for k in range(3):
        assert not ft.flags[k].any()
        assert (ft.tilde_lengths[k] == k).all()


def test_flags_need_child_level():
    with pytest.raises(PreconditionError):
        compute_flags(sample_tree(P32, 0, 0))


def test_tilde_lengths_match_tilde():
    tree = sample_tree(P32, 5, 3)
    ft = compute_flags(tree)
    for level in (2, 4, 5):
        for i, w in enumerate(tree.words(level)):
            assert ft.tilde_lengths[level][i] == len(tilde(ft, w))


# --- tilde -----------------------------------------------------------------


def test_tilde_examples():
    ft = hand_tree_root_unflagged()
    tw = tilde(ft, (9, 3))
    assert tw.labels == (9, 9, 3) and tw.insertions == (2,)
    assert len(tw) == 3

    ft2 = hand_tree_root_flagged()
    tw2 = tilde(ft2, (9, 3))
    assert tw2.labels == (9, 9, 3) and tw2.insertions == (1,)

    assert tilde(ft, ()).labels == ()
    assert tilde(ft, (9,)).labels == (9,)
    assert tilde(ft2, (9,)).labels == (9, 9)


def test_tilde_single_pass_not_iterated():
    # insertion blocks are never re-scanned: two flagged prefixes insert
    # exactly twice, K letters each
    pr = Params(m=3, d=2, p=0.7, k=2, eta=(9, 9))
    t = tree_from_words(pr, 2, [[()], [(9,)], [(9, 9)]])
    ft = compute_flags(t)
    assert bool(ft.flags[0][0]) and bool(ft.flags[1][0])
    tw = tilde(ft, (9, 9))
    assert tw.labels == (9, 9, 9, 9, 9, 9) and tw.insertions == (1, 2)


def test_tilde_preconditions():
    ft = hand_tree_root_unflagged()
    with pytest.raises(PreconditionError, match="depth"):
        tilde(ft, (9, 9, 9))
    with pytest.raises(PreconditionError, match="survive"):
        tilde(ft, (1, 1))  # prefix (1,) dead
    # the final letter may be dead, only proper prefixes must survive
    assert tilde(ft, (9, 1)).labels == (9, 9, 1)
    with pytest.raises(DomainError):
        tilde(ft, (10,))


# --- f_point ---------------------------------------------------------------


def test_f_point_hand_values():
    # insertion after the first letter: (9,9) -> (9,9,9)
    ft = hand_tree_root_unflagged()
    assert f_point(ft, (9, 9)).as_fractions() == (
        Fraction(13, 27),
        Fraction(13, 27),
    )
    # insertion before the first letter: (9,3) -> (9,9,3)
    ft2 = hand_tree_root_flagged()
    assert f_point(ft2, (9, 3)).as_fractions() == (
        Fraction(12, 27),
        Fraction(14, 27),
    )
    assert f_point(ft, ()) == pi_finite(P32, ())


def test_f_point_identity_without_flags():
    ft = compute_flags(sample_tree(P_NEAR_ONE, 3, 1))
    for w in ft.tree.words(3)[:30]:
        assert f_point(ft, w) == pi_finite(P32, w)


def test_f_point_needs_survival():
    ft = hand_tree_root_unflagged()
    with pytest.raises(PreconditionError):
        f_point(ft, (9, 1))  # tilde fine, corner image undefined


# --- splitting identity -----------------------------------------------------


def test_splitting_identity_on_sampled_tree():
    tree = sample_tree(P32, 5, 13)
    ft = compute_flags(tree)
    checked = 0
    for plen in (1, 2, 3):
        for head in tree.words(plen)[:4]:
            sub = compute_flags(subtree(tree, head))
            t_head = tilde(ft, head).labels
            for klen in range(0, 5 - plen + 1):
                for tail in sub.tree.words(klen)[:6]:
                    whole = tilde(ft, head + tail).labels
                    assert whole == t_head + tilde(sub, tail).labels
                    checked += 1
    assert checked > 100


# --- injectivity and lengths -------------------------------------------------


def test_injectivity_and_length_bounds():
    pr = Params(m=3, d=2, p=0.5)
    for seed in range(5):
        tree, ft = None, None
        tree = sample_tree(pr, 5, seed)
        if tree.count(5) == 0:
            continue
        ft = compute_flags(tree)
        for level in (3, 5):
            seen = set()
            for w in tree.words(level):
                tw = tilde(ft, w).labels
                assert level <= len(tw) <= 2 * level
                seen.add(tw)
            assert len(seen) == tree.count(level)


# --- image cover --------------------------------------------------------------


def test_image_cover_full_grid_near_p_one():
    ft = compute_flags(sample_tree(P_NEAR_ONE, 2, 2))
    cover = image_cover(ft, 2)
    assert len(cover) == 81
    assert all(b.level == 2 for b in cover)


def test_image_cover_levels_and_partition_sum_agree():
    tree = sample_tree(Params(m=3, d=2, p=0.45), 4, 17)
    assert tree.count(4) > 0
    ft = compute_flags(tree)
    cover = image_cover(ft, 4)
    assert len(cover) == tree.count(4)
    for s in (0, 1, 2):
        total = sum((b.side() ** s for b in cover), Fraction(0))
        assert total == partition_sum(ft, s, 4).as_fraction()
    lengths = sorted(b.level for b in cover)
    tl = sorted(int(x) for x in ft.tilde_lengths[4])
    assert lengths == tl


def test_cover_csv_roundtrip(tmp_path):
    ft = hand_tree_root_unflagged()
    path = tmp_path / "cover.csv"
    write_cover_csv(path, ft, 2)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["source_word", "tilde_word", "level", "c0", "c1"]
    assert rows[1] == ["9.9", "9.9.9", "3", "13", "13"]
    assert len(rows) == 2


# --- comparability -----------------------------------------------------------


def test_comparability_identity_without_flags():
    ft = compute_flags(sample_tree(P_NEAR_ONE, 3, 4))
    words = ft.tree.words(3)
    assert comparability_ratio(ft, words[0], words[5]) == 1
    assert comparability_ratio(ft, words[2], words[2][:2] + words[3][2:]) == 1


def test_comparability_flagged_parent_siblings():
    # root flagged; the insertion block belongs to both suffixes, not to
    # the (empty) meet, so the image distance shrinks by exactly M^-K
    t = tree_from_words(P42, 1, [[()], [(13,), (14,)]])
    ft = compute_flags(t)
    assert comparability_ratio(ft, (13,), (14,)) == Fraction(1, 4)

    pr = Params(m=4, d=2, p=0.7, k=2, eta=(16, 16))
    t2 = tree_from_words(pr, 1, [[()], [(13,), (14,)]])
    assert comparability_ratio(compute_flags(t2), (13,), (14,)) == Fraction(1, 16)


def test_comparability_rejects_degenerate_input():
    ft = hand_tree_root_unflagged()
    with pytest.raises(DomainError):
        comparability_ratio(ft, (9,), (9, 9))
    with pytest.raises(DomainError):
        comparability_ratio(ft, (9,), (9,))


def test_comparability_bracket_small_tree():
    pr = Params(m=3, d=2, p=0.5)
    tree = sample_tree(pr, 4, 23)
    ft = compute_flags(tree)
    words = tree.words(4)
    assert len(words) >= 2
    lo, hi = Fraction(3) ** -4, Fraction(3) ** 4
    for i in range(0, len(words) - 1, 2):
        r = comparability_ratio(ft, words[i], words[i + 1])
        assert lo <= r <= hi


# --- well-definedness at shared faces -----------------------------------------


def test_shared_face_bound_unflagged():
    # sibling cells (0,1) and (1,1) share the face x=1/3; tails approach
    # it from both sides through boundary-labelled children
    a, b = 2, 9  # offsets (0,1) and (1,1)
    amax, bmin = 7, 2  # offsets (2,1) and (0,1)
    for n_tail in (1, 2, 3, 4):
        i = (a,) + (amax,) * n_tail
        j = (b,) + (bmin,) * n_tail
        chains = [[()]] + [
            [i[:k], j[:k]] for k in range(1, n_tail + 2)
        ]
        t = tree_from_words(P32, n_tail + 1, chains)
        ft = compute_flags(t)
        d = dist_max(f_point(ft, i), f_point(ft, j))
        assert d == Fraction(1, 3 ** (n_tail + 1))
        assert d <= Fraction(1, 3 ** (n_tail - 1)) * Fraction(3)


def test_shared_face_bound_flagged_meet():
    # meet (16,) sits under a flagged root, so both images carry the same
    # inserted block; the bound rescales by the rewritten meet length
    meet = (16,)
    a, b = 5, 7  # offsets (1,0) and (2,0) sharing the face x=1/2
    amax, bmin = 9, 1  # offsets (3,0) and (0,0)
    for n_tail in (1, 2, 3):
        i = meet + (a,) + (amax,) * n_tail
        j = meet + (b,) + (bmin,) * n_tail
        chains = [[()], [meet]] + [
            [i[:k], j[:k]] for k in range(2, n_tail + 3)
        ]
        t = tree_from_words(P42, n_tail + 2, chains)
        ft = compute_flags(t)
        assert bool(ft.flags[0][0]) and not ft.flags[1][0]
        tmeet = tilde(ft, meet)
        assert tmeet.labels == (16, 16)
        d = dist_max(f_point(ft, i), f_point(ft, j))
        assert d == Fraction(1, 4 ** (n_tail + 3))
        n_shared = n_tail + 1  # letters past the meet
        bound = Fraction(1, 4 ** (n_shared - 1)) * Fraction(1, 4 ** len(tmeet)) * 4
        assert d <= bound
