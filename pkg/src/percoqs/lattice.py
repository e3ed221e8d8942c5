"""Base-M lattice geometry on the unit cube, with exact arithmetic.

The unit cube [0,1]^d is subdivided into M^d closed congruent subcubes.
Each subcube is addressed by a label in {1, ..., M^d}; labels are ordered
so that the cells touching the boundary of the cube come first.  Words
over the label alphabet address nested subcubes, and every finite word
maps to the lower-left corner of its subcube.  All corner arithmetic is
exact: a coordinate is an integer numerator over a power of M.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

from .errors import DomainError

Word = tuple[int, ...]
Offset = tuple[int, ...]


@lru_cache(maxsize=None)
def _label_tables(m: int, d: int) -> tuple[tuple[Offset, ...], dict[Offset, int]]:
    """Label -> offset table (index label-1) and its inverse for a grid.

    Boundary offsets (some coordinate in {0, M-1}) come first in
    lexicographic order, then interior offsets in lexicographic order.
    """
    boundary = []
    interior = []
    for off in product(range(m), repeat=d):
        if any(c == 0 or c == m - 1 for c in off):
            boundary.append(off)
        else:
            interior.append(off)
    offsets = tuple(boundary + interior)
    return offsets, {off: i + 1 for i, off in enumerate(offsets)}


def boundary_label_count(m: int, d: int) -> int:
    """Number of cells touching the cube boundary: M^d - (M-2)^d."""
    return m**d - (m - 2) ** d


def default_eta(m: int, d: int, k: int = 1) -> Word:
    """Default insertion word: the central interior cell, repeated K times."""
    _, inv = _label_tables(m, d)
    center = inv[(m // 2,) * d]
    return (center,) * k


@dataclass(frozen=True)
class Params:
    """Model parameters.

    d, M      grid dimension and subdivision base (M >= 3 so interior
              cells exist)
    p         per-cell survival probability, 0 < p < 1
    K, eta    insertion word of length K whose first label is interior
    """

    m: int
    d: int
    p: float
    k: int = 1
    eta: Word | None = None

    def __post_init__(self) -> None:
        if self.m < 3:
            raise DomainError(f"M must be >= 3, got {self.m}")
        if self.d < 1:
            raise DomainError(f"d must be >= 1, got {self.d}")
        if not (0.0 < self.p < 1.0):
            raise DomainError(f"p must lie strictly in (0, 1), got {self.p}")
        if self.k < 1:
            raise DomainError(f"K must be >= 1, got {self.k}")
        if self.eta is None:
            object.__setattr__(self, "eta", default_eta(self.m, self.d, self.k))
        else:
            object.__setattr__(self, "eta", tuple(self.eta))
        eta = self.eta
        if len(eta) != self.k:
            raise DomainError(f"eta must have length K={self.k}, got {len(eta)}")
        for lab in eta:
            validate_label(self, lab)
        if is_boundary_label(self, eta[0]):
            raise DomainError(
                f"eta[0]={eta[0]} addresses a boundary cell; the insertion "
                "target must start strictly inside the cube"
            )

    @property
    def alphabet_size(self) -> int:
        return self.m**self.d

    @property
    def n_boundary(self) -> int:
        return boundary_label_count(self.m, self.d)


def validate_label(params: Params, label: int) -> None:
    if not (1 <= label <= params.alphabet_size):
        raise DomainError(
            f"label {label} outside 1..{params.alphabet_size} for "
            f"M={params.m}, d={params.d}"
        )


def validate_word(params: Params, word: Word) -> None:
    for lab in word:
        validate_label(params, lab)


def label_to_offset(params: Params, label: int) -> Offset:
    """Grid offset in {0..M-1}^d of a cell label."""
    validate_label(params, label)
    offsets, _ = _label_tables(params.m, params.d)
    return offsets[label - 1]


def offset_to_label(params: Params, offset: Offset) -> int:
    _, inv = _label_tables(params.m, params.d)
    try:
        return inv[tuple(offset)]
    except KeyError:
        raise DomainError(f"offset {offset} outside the M={params.m} grid") from None


def is_boundary_label(params: Params, label: int) -> bool:
    """True iff the cell touches the boundary of the unit cube.

    Equivalent to label <= M^d - (M-2)^d under the label ordering.
    """
    validate_label(params, label)
    return label <= params.n_boundary


def word_meet(i: Word, j: Word) -> Word:
    """Longest common prefix of two words."""
    n = 0
    for a, b in zip(i, j):
        if a != b:
            break
        n += 1
    return tuple(i[:n])


def is_prefix(p: Word, w: Word) -> bool:
    return len(p) <= len(w) and tuple(w[: len(p)]) == tuple(p)


@dataclass(frozen=True)
class ExactPoint:
    """A point of [0,1]^d with coordinates numerator / m^level.

    Stored in canonical form: the common level is reduced until some
    numerator is not divisible by m (or level 0), so value-equal points
    compare and hash equal.
    """

    m: int
    level: int
    nums: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.level < 0:
            raise DomainError(f"level must be >= 0, got {self.level}")
        nums = tuple(int(n) for n in self.nums)
        level = self.level
        side = self.m**level
        for n in nums:
            if not (0 <= n <= side):
                raise DomainError(f"numerator {n} outside [0, {self.m}^{level}]")
        while level > 0 and all(n % self.m == 0 for n in nums):
            nums = tuple(n // self.m for n in nums)
            level -= 1
        object.__setattr__(self, "nums", nums)
        object.__setattr__(self, "level", level)

    @property
    def dim(self) -> int:
        return len(self.nums)

    def nums_at_level(self, level: int) -> tuple[int, ...]:
        """Numerators rescaled to a coarser-grained (larger) level."""
        if level < self.level:
            raise DomainError(f"cannot rescale level {self.level} down to {level}")
        f = self.m ** (level - self.level)
        return tuple(n * f for n in self.nums)

    def as_fractions(self) -> tuple[Fraction, ...]:
        den = self.m**self.level
        return tuple(Fraction(n, den) for n in self.nums)

    def to_floats(self) -> tuple[float, ...]:
        # Fraction -> float rounds correctly even when m^level overflows
        # a double.
        return tuple(float(f) for f in self.as_fractions())

    def to_json_dict(self) -> dict:
        return {"level": self.level, "num": [str(n) for n in self.nums]}

    @classmethod
    def from_json_dict(cls, m: int, obj: dict) -> "ExactPoint":
        return cls(m, int(obj["level"]), tuple(int(s) for s in obj["num"]))

    @classmethod
    def origin(cls, m: int, d: int) -> "ExactPoint":
        return cls(m, 0, (0,) * d)


def pi_finite(params: Params, word: Word) -> ExactPoint:
    """Lower-left corner of the subcube addressed by a finite word.

    Coordinate k is sum over positions n of offset(word[n])[k] * M^-(n+1),
    an exact point at level len(word).
    """
    validate_word(params, word)
    nums = [0] * params.d
    for lab in word:
        off = label_to_offset(params, lab)
        for k in range(params.d):
            nums[k] = nums[k] * params.m + off[k]
    return ExactPoint(params.m, len(word), tuple(nums))


def dist_max(x: ExactPoint, y: ExactPoint) -> Fraction:
    """Chebyshev (max-coordinate) distance, exact."""
    if x.m != y.m or x.dim != y.dim:
        raise DomainError("points live on different lattices")
    level = max(x.level, y.level)
    xs = x.nums_at_level(level)
    ys = y.nums_at_level(level)
    return Fraction(max(abs(a - b) for a, b in zip(xs, ys)), x.m**level)


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned cube: corner + side M^-level."""

    corner: ExactPoint
    level: int

    def __post_init__(self) -> None:
        if self.level < 0:
            raise DomainError(f"box level must be >= 0, got {self.level}")

    @property
    def m(self) -> int:
        return self.corner.m

    def side(self) -> Fraction:
        return Fraction(1, self.m**self.level)

    def to_json_dict(self) -> dict:
        return {"level": self.level, "corner": self.corner.to_json_dict()}


def box_of_word(params: Params, word: Word) -> Box:
    """The subcube addressed by a word."""
    return Box(pi_finite(params, word), len(word))


def box_contains(box: Box, x: ExactPoint) -> bool:
    level = max(x.level, box.corner.level, box.level)
    xs = x.nums_at_level(level)
    cs = box.corner.nums_at_level(level)
    side = box.m ** (level - box.level)
    return all(c <= a <= c + side for a, c in zip(xs, cs))


def h_box(box: Box, x: ExactPoint) -> ExactPoint:
    """Canonical homothety [0,1]^d -> box applied to x: corner + side * x."""
    if x.m != box.m:
        raise DomainError("point and box use different bases")
    level = max(box.corner.level, box.level + x.level)
    cs = box.corner.nums_at_level(level)
    xs = tuple(n * box.m ** (level - box.level - x.level) for n in x.nums)
    return ExactPoint(box.m, level, tuple(c + a for c, a in zip(cs, xs)))


def h_box_inv(box: Box, x: ExactPoint) -> ExactPoint:
    """Inverse homothety box -> [0,1]^d; x must lie in the box."""
    if x.m != box.m:
        raise DomainError("point and box use different bases")
    if not box_contains(box, x):
        raise DomainError("point lies outside the box")
    level = max(x.level, box.corner.level, box.level)
    xs = x.nums_at_level(level)
    cs = box.corner.nums_at_level(level)
    return ExactPoint(box.m, level - box.level, tuple(a - c for a, c in zip(xs, cs)))
