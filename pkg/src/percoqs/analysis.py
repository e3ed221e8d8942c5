"""Numerical analysis of the rewritten-tree geometry.

Closed forms
------------
Per generation, a surviving cell keeps side M^-1 unless its parent was
flagged, in which case the insertion stretches its address by K letters
(side M^-(K+1)).  Averaging M^(-s * extra length) over one generation of
children gives the contraction factor

    kappa(s, K) = 1 - ((M-2)^d / M^d) (1 - M^(-sK)) (1-p)^(M^d-(M-2)^d)

and its K -> infinity limit kappa_prime.  The s-indexed partition sums
Y_n^s = sum over level-n survivors of M^(-s |rewritten word|) then
satisfy E Y_{n+1}^s = p M^(d-s) kappa(s, K) E Y_n^s, so the exponent
t solving p M^(d-t) kappa(t, K) = 1 is the zero-growth (dimension-
upper-bound) exponent, sitting just below the untouched-tree exponent
s = d + log p / log M.

Everything statistical here consumes frozen sampled trees and reports
means, standard errors and z-scores against these closed forms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import CapacityError, DomainError
from .lattice import Params, label_to_offset
from .percolation import derive_seed, sample_nonextinct
from .substitution import FlaggedTree, comparability_ratio, compute_flags

BISECT_ITERATIONS = 200

EPSILON_TABLE_CASES = ((3, 2), (4, 2), (5, 2), (3, 3), (4, 3))


def log_base(m: int, x: float) -> float:
    return math.log(x) / math.log(m)


def kappa(params: Params, s: float, k: int | None = None) -> float:
    """Mean per-generation contraction factor of Y^s, relative to the
    untouched-tree factor p M^(d-s)."""
    if k is None:
        k = params.k
    if k < 1:
        raise DomainError(f"K must be >= 1, got {k}")
    m, d, p = params.m, params.d, params.p
    interior_frac = (m - 2) ** d / m**d
    return 1.0 - interior_frac * (1.0 - m ** (-s * k)) * (1.0 - p) ** params.n_boundary


def kappa_prime(params: Params) -> float:
    """Limit of kappa as K -> infinity (worst-case insertion length)."""
    m, d, p = params.m, params.d, params.p
    interior_frac = (m - 2) ** d / m**d
    return 1.0 - interior_frac * (1.0 - p) ** params.n_boundary


@dataclass(frozen=True)
class DimReport:
    """Dimension exponents for one parameter set."""

    s_hausdorff: float
    t_upper: float
    kappa_at_t: float
    gap: float
    k: int
    residual: float
    warning: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "s_hausdorff": self.s_hausdorff,
            "t_upper": self.t_upper,
            "kappa_at_t": self.kappa_at_t,
            "gap": self.gap,
            "K": self.k,
            "residual": self.residual,
            "warning": self.warning,
        }


def solve_t(params: Params, k: int | None = None) -> DimReport:
    """Bisection for the zero-growth exponent t in [0, d] solving
    p M^(d-t) kappa(t, K) = 1.

    For p <= M^-d the population dies almost surely and the equation has
    no root in [0, d]; the report then carries a warning instead of
    failing silently.
    """
    if k is None:
        k = params.k
    m, d, p = params.m, params.d, params.p
    s_h = d + log_base(m, p)
    if p <= m ** (-d):
        return DimReport(
            s_hausdorff=s_h,
            t_upper=math.nan,
            kappa_at_t=math.nan,
            gap=math.nan,
            k=k,
            residual=math.nan,
            warning=(
                f"p={p} <= M^-d={m ** (-d):.6g}: almost-sure extinction, "
                "no zero-growth exponent in [0, d]"
            ),
        )

    def phi(t: float) -> float:
        return p * m ** (d - t) * kappa(params, t, k) - 1.0

    lo, hi = 0.0, float(d)  # phi(lo) > 0 > phi(hi) in this regime
    for _ in range(BISECT_ITERATIONS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if phi(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    residual = abs(phi(t))
    if t > s_h + 1e-9:
        raise RuntimeError(f"zero-growth exponent {t} not below {s_h}")
    warning = None
    if not t < s_h:
        # (1-p)^n_boundary underflowed: kappa rounds to 1 and the gap,
        # while strictly positive, sits below float resolution
        warning = (
            "insertion correction underflows in float at these parameters; "
            "t_upper coincides with s_hausdorff"
        )
    return DimReport(
        s_hausdorff=s_h,
        t_upper=t,
        kappa_at_t=kappa(params, t, k),
        gap=max(0.0, s_h - t),
        k=k,
        residual=residual,
        warning=warning,
    )


@dataclass(frozen=True)
class EpsilonReport:
    """Near-critical threshold: at p_star the dimension upper bound
    d + log_M p + log_M kappa_prime equals 1, and epsilon is how far the
    plain dimension d + log_M p_star sits above 1."""

    m: int
    d: int
    p_star: float
    epsilon: float
    residual: float

    def to_json_dict(self) -> dict:
        return {
            "M": self.m,
            "d": self.d,
            "p_star": self.p_star,
            "epsilon": self.epsilon,
            "residual": self.residual,
        }


def solve_epsilon(m: int, d: int) -> EpsilonReport:
    """Bisection in p for d + log_M(p kappa_prime(p)) = 1 (needs d >= 2)."""
    if m < 3:
        raise DomainError(f"M must be >= 3, got {m}")
    if d < 2:
        raise DomainError(f"the threshold needs d >= 2, got {d}")
    interior_frac = (m - 2) ** d / m**d
    nb = m**d - (m - 2) ** d

    def big_g(p: float) -> float:
        kp = 1.0 - interior_frac * (1.0 - p) ** nb
        return d - 1.0 + log_base(m, p * kp)

    lo, hi = m ** (-d) + 1e-9, 1.0 - 1e-9  # big_g(lo) < 0 < big_g(hi)
    for _ in range(BISECT_ITERATIONS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if big_g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    p_star = 0.5 * (lo + hi)
    return EpsilonReport(
        m=m,
        d=d,
        p_star=p_star,
        epsilon=d - 1.0 + log_base(m, p_star),
        residual=abs(big_g(p_star)),
    )


def epsilon_table(cases=EPSILON_TABLE_CASES) -> list[EpsilonReport]:
    return [solve_epsilon(m, d) for m, d in cases]


@dataclass(frozen=True)
class PartitionSum:
    """Y^s_n in exact form: the histogram of rewritten-word lengths at a
    level is a sufficient statistic for every s."""

    m: int
    s: float
    n: int
    length_counts: tuple[tuple[int, int], ...]

    @property
    def survivor_count(self) -> int:
        return sum(c for _, c in self.length_counts)

    @property
    def value(self) -> float:
        return math.fsum(
            c * self.m ** (-self.s * length) for length, c in self.length_counts
        )

    def as_fraction(self) -> Fraction:
        """Exact value; defined when s is a nonnegative integer."""
        s = int(self.s)
        if s != self.s or s < 0:
            raise DomainError(f"exact value needs integer s >= 0, got {self.s}")
        return sum(
            (Fraction(c, self.m ** (s * length)) for length, c in self.length_counts),
            Fraction(0),
        )

    def to_json_dict(self) -> dict:
        return {
            "s": self.s,
            "n": self.n,
            "value": self.value,
            "survivors": self.survivor_count,
            "length_counts": [[length, c] for length, c in self.length_counts],
        }


def partition_sum(ftree: FlaggedTree, s: float, n: int) -> PartitionSum:
    """Sum of M^(-s |rewritten word|) over the survivors of level n."""
    if s < 0:
        raise DomainError(f"s must be >= 0, got {s}")
    if not (0 <= n <= ftree.depth):
        raise DomainError(f"level {n} outside 0..{ftree.depth}")
    counts = np.bincount(ftree.tilde_lengths[n])
    pairs = tuple(
        (int(length), int(c)) for length, c in enumerate(counts) if c > 0
    )
    return PartitionSum(ftree.params.m, s, n, pairs)


def partition_series(
    ftree: FlaggedTree, s_values, n_values
) -> list[PartitionSum]:
    return [partition_sum(ftree, s, n) for s in s_values for n in n_values]


@lru_cache(maxsize=4)
def _config_counts(m: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Per survival configuration of one generation (bitmask over M^d
    cells): total alive count and alive boundary-cell count."""
    a = m**d
    if a > 25:
        raise CapacityError(
            f"exact one-generation enumeration needs M^d <= 25, got {a}"
        )
    nb = m**d - (m - 2) ** d
    masks = np.arange(1 << a, dtype=np.uint64)
    alive = np.bitwise_count(masks).astype(np.int64)
    boundary_mask = np.uint64((1 << nb) - 1)  # labels 1..nb are bits 0..nb-1
    alive_boundary = np.bitwise_count(masks & boundary_mask).astype(np.int64)
    return alive, alive_boundary


def level1_oracle(params: Params, s: float, k: int | None = None) -> float:
    """E Y^s_1 by brute-force enumeration of all 2^(M^d) one-generation
    survival configurations; an independent cross-check of
    p M^(d-s) kappa(s, K).
    """
    if k is None:
        k = params.k
    if s < 0:
        raise DomainError(f"s must be >= 0, got {s}")
    m, d, p = params.m, params.d, params.p
    alive, alive_boundary = _config_counts(m, d)
    alive_interior = alive - alive_boundary
    a = m**d
    prob = p**alive * (1.0 - p) ** (a - alive)
    short = float(m) ** (-s)
    long = float(m) ** (-s * (k + 1))
    per_config = prob * (
        alive_boundary * short
        + alive_interior * np.where(alive_boundary == 0, long, short)
    )
    # fsum in chunks keeps the total exactly rounded enough for 1e-12
    # comparisons even at 2^25 terms
    chunk = 1 << 20
    partials = [
        math.fsum(per_config[i : i + chunk].tolist())
        for i in range(0, per_config.shape[0], chunk)
    ]
    return math.fsum(partials)


@dataclass(frozen=True)
class MartingaleReport:
    """One-step conditional-mean check by resampling a frozen level."""

    s: float
    n: int
    trials: int
    seed: int
    level_count: int
    frozen_value: float
    step_factor: float
    expected_mean: float
    mean: float
    stderr: float
    ratio: float
    zscore: float

    def to_json_dict(self) -> dict:
        return {
            "s": self.s,
            "n": self.n,
            "trials": self.trials,
            "seed": self.seed,
            "level_count": self.level_count,
            "frozen_value": self.frozen_value,
            "step_factor": self.step_factor,
            "expected_mean": self.expected_mean,
            "mean": self.mean,
            "stderr": self.stderr,
            "ratio": self.ratio,
            "zscore": self.zscore,
        }


def martingale_check(
    ftree: FlaggedTree, s: float, n: int, trials: int, seed: int
) -> MartingaleReport:
    """Resample generation n+1 of a frozen tree and compare the mean of
    Y^s_{n+1} against p M^(d-s) kappa(s, K) Y^s_n.

    A child generation enters Y only through its alive-boundary /
    alive-interior counts: if any boundary child lives, every alive child
    contributes M^-s; if none does, the alive (interior) children each
    contribute M^(-s(K+1)).  Sampling those binomial counts is therefore
    distribution-exact.
    """
    if trials < 100:
        raise DomainError(
            f"need at least 100 trials for meaningful statistics, got {trials}"
        )
    if s < 0:
        raise DomainError(f"s must be >= 0, got {s}")
    if not (0 <= n <= ftree.depth):
        raise DomainError(f"level {n} outside 0..{ftree.depth}")
    pr = ftree.params
    w = ftree.tilde_lengths[n]
    if w.shape[0] == 0:
        raise DomainError(f"no survivors at level {n}; nothing to resample")
    weights = float(pr.m) ** (-s * w.astype(np.float64))
    nb = pr.n_boundary
    ni = pr.alphabet_size - nb
    short = float(pr.m) ** (-s)
    long = float(pr.m) ** (-s * (pr.k + 1))
    rng = np.random.default_rng(seed)
    width = weights.shape[0]
    chunk = max(1, min(trials, 8_000_000 // max(width, 1)))
    sums = np.empty(trials, dtype=np.float64)
    done = 0
    while done < trials:
        c = min(chunk, trials - done)
        b_alive = rng.binomial(nb, pr.p, size=(c, width))
        i_alive = rng.binomial(ni, pr.p, size=(c, width))
        x = np.where(
            b_alive > 0, (b_alive + i_alive) * short, i_alive * long
        )
        sums[done : done + c] = x @ weights
        done += c
    frozen = float(weights.sum())
    factor = pr.p * pr.m ** (pr.d - s) * kappa(pr, s)
    expected = factor * frozen
    mean = float(sums.mean())
    stderr = float(sums.std(ddof=1) / math.sqrt(trials))
    if stderr == 0.0:
        zscore = 0.0 if mean == expected else math.inf
    else:
        zscore = (mean - expected) / stderr
    return MartingaleReport(
        s=s,
        n=n,
        trials=trials,
        seed=seed,
        level_count=width,
        frozen_value=frozen,
        step_factor=factor,
        expected_mean=expected,
        mean=mean,
        stderr=stderr,
        ratio=mean / expected if expected != 0 else math.nan,
        zscore=zscore,
    )


def _ols_slope(xs: np.ndarray, ys: np.ndarray) -> float:
    xm = xs.mean()
    ym = ys.mean()
    return float(((xs - xm) * (ys - ym)).sum() / ((xs - xm) ** 2).sum())


def zero_slope(s_grid: np.ndarray, slopes: np.ndarray) -> float | None:
    """First zero crossing of a decreasing slope curve over the s grid,
    by linear interpolation; None when the grid does not bracket it."""
    for i in range(len(s_grid) - 1):
        a, b = slopes[i], slopes[i + 1]
        if a >= 0.0 > b:
            return float(s_grid[i] + a * (s_grid[i + 1] - s_grid[i]) / (a - b))
    return None


@dataclass(frozen=True)
class DimFit:
    """Monte Carlo growth-rate fits over non-extinct trees."""

    s_hat: float
    s_ci: tuple[float, float]
    t_hat: float | None
    t_ci: tuple[float, float] | None
    s_hausdorff: float
    t_upper: float
    trials: int
    depth: int
    n_range: tuple[int, ...]
    s_grid: tuple[float, ...]
    seed: int
    rejections: int
    widened: bool
    converged: bool

    def to_json_dict(self) -> dict:
        return {
            "s_hat": self.s_hat,
            "s_ci": list(self.s_ci),
            "t_hat": self.t_hat,
            "t_ci": list(self.t_ci) if self.t_ci is not None else None,
            "s_hausdorff": self.s_hausdorff,
            "t_upper": self.t_upper,
            "trials": self.trials,
            "depth": self.depth,
            "n_range": list(self.n_range),
            "s_grid": list(self.s_grid),
            "seed": self.seed,
            "rejections": self.rejections,
            "widened": self.widened,
            "converged": self.converged,
        }


def _hist_tensor(hists: list[list[np.ndarray]]) -> np.ndarray:
    """Stack ragged per-tree, per-level rewritten-length histograms into
    one zero-padded (trees, levels, max length) tensor."""
    width = max(h.shape[0] for tree_h in hists for h in tree_h)
    out = np.zeros((len(hists), len(hists[0]), width), dtype=np.float64)
    for i, tree_h in enumerate(hists):
        for n, h in enumerate(tree_h):
            out[i, n, : h.shape[0]] = h
    return out


def _grid_slopes(
    tensor: np.ndarray, tree_idx: np.ndarray, n_range: np.ndarray, s_grid: np.ndarray, m: int
) -> np.ndarray:
    """Regression slope of log_M(mean over trees of Y^s_n) against n,
    for every s in the grid."""
    lengths = np.arange(tensor.shape[2], dtype=np.float64)
    weights = float(m) ** (-np.outer(np.asarray(s_grid, dtype=np.float64), lengths))
    mean_h = tensor[tree_idx].mean(axis=0)  # (levels, length)
    y = mean_h[n_range] @ weights.T  # (levels in range, s)
    logy = np.log(y) / math.log(m)
    x = n_range.astype(np.float64)
    xc = x - x.mean()
    return (xc[:, None] * (logy - logy.mean(axis=0))).sum(axis=0) / (xc**2).sum()


def estimate_dims(
    params: Params,
    trials: int,
    depth: int,
    s_grid,
    n_range=None,
    seed: int = 0,
    bootstrap: int = 200,
    max_attempts: int = 10**4,
    node_budget: int = 10**8,
    workers: int = 1,
) -> DimFit:
    """Estimate the survivor-count growth exponent and the zero-growth
    exponent of the rewritten partition sums from fresh non-extinct
    trees.

    s_hat regresses log_M of the mean survivor count on the level;
    t_hat is the s at which the same regression for Y^s crosses zero
    slope (linear interpolation on the s grid, one automatic grid
    widening).  Confidence intervals are bootstrap percentiles over
    trees.  Trees are conditioned on reaching the target depth, so both
    fits see the same realized branches and their difference isolates
    the insertion effect.
    """
    if trials < 30:
        raise DomainError(f"need at least 30 trees for a fit, got {trials}")
    s_grid = np.asarray(sorted(float(s) for s in s_grid))
    if s_grid.shape[0] < 2:
        raise DomainError("s grid needs at least two points")
    if n_range is None:
        n_range = range(1, depth + 1)
    n_range = np.asarray(sorted(int(n) for n in n_range))
    if n_range.shape[0] < 3:
        raise DomainError("need at least three levels to regress on")
    if n_range[0] < 0 or n_range[-1] > depth:
        raise DomainError(f"n range outside 0..{depth}")

    hists: list[list[np.ndarray]] = []
    rejections = 0
    for i in range(trials):
        tree, rej = sample_nonextinct(
            params,
            depth,
            derive_seed(seed, "dims", i),
            max_attempts=max_attempts,
            node_budget=node_budget,
            workers=workers,
        )
        rejections += rej
        ftree = compute_flags(tree)
        hists.append(
            [np.bincount(ftree.tilde_lengths[n]) for n in range(depth + 1)]
        )

    tensor = _hist_tensor(hists)
    all_idx = np.arange(trials)
    counts = tensor.sum(axis=2)  # (trees, levels) survivor counts
    log_m = math.log(params.m)
    s_logmeans = np.log(counts[:, n_range].mean(axis=0)) / log_m
    s_hat = _ols_slope(n_range.astype(np.float64), s_logmeans)

    slopes = _grid_slopes(tensor, all_idx, n_range, s_grid, params.m)
    t_hat = zero_slope(s_grid, slopes)
    widened = False
    grid = s_grid
    if t_hat is None:
        span = s_grid[-1] - s_grid[0]
        grid = np.concatenate(
            [
                np.linspace(max(0.0, s_grid[0] - span), s_grid[0], 5, endpoint=False),
                s_grid,
                np.linspace(s_grid[-1], s_grid[-1] + span, 6)[1:],
            ]
        )
        slopes = _grid_slopes(tensor, all_idx, n_range, grid, params.m)
        t_hat = zero_slope(grid, slopes)
        widened = True

    rng = np.random.default_rng(derive_seed(seed, "dims", "bootstrap"))
    s_boot = []
    t_boot = []
    for _ in range(bootstrap):
        idx = rng.integers(0, trials, size=trials)
        lm = np.log(counts[idx][:, n_range].mean(axis=0)) / log_m
        s_boot.append(_ols_slope(n_range.astype(np.float64), lm))
        tb = zero_slope(grid, _grid_slopes(tensor, idx, n_range, grid, params.m))
        if tb is not None:
            t_boot.append(tb)
    s_ci = (float(np.percentile(s_boot, 2.5)), float(np.percentile(s_boot, 97.5)))
    t_ci = None
    if t_hat is not None and t_boot:
        t_ci = (float(np.percentile(t_boot, 2.5)), float(np.percentile(t_boot, 97.5)))

    theory = solve_t(params)
    return DimFit(
        s_hat=s_hat,
        s_ci=s_ci,
        t_hat=t_hat,
        t_ci=t_ci,
        s_hausdorff=theory.s_hausdorff,
        t_upper=theory.t_upper,
        trials=trials,
        depth=depth,
        n_range=tuple(int(n) for n in n_range),
        s_grid=tuple(float(s) for s in grid),
        seed=seed,
        rejections=rejections,
        widened=widened,
        converged=t_hat is not None,
    )


@dataclass(frozen=True)
class QsScan:
    """Empirical three-point distortion scan of the corner map."""

    level: int
    triples: int
    degenerate: int
    coincident: int
    c_emp: float
    bracket_bound: float
    pair_ratio_min: float
    pair_ratio_max: float
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "level": self.level,
            "triples": self.triples,
            "degenerate": self.degenerate,
            "coincident": self.coincident,
            "c_emp": self.c_emp,
            "bracket_bound": self.bracket_bound,
            "pair_ratio_min": self.pair_ratio_min,
            "pair_ratio_max": self.pair_ratio_max,
            "seed": self.seed,
        }


def _corner_batch(ftree: FlaggedTree, level: int, nodes: np.ndarray):
    """Float corners of the source boxes and their rewritten images for
    a batch of level-`level` survivor indices, walked level by level so
    the cost is O(level * batch) regardless of tree size."""
    tree = ftree.tree
    pr = ftree.params
    m = pr.m
    invm = 1.0 / m
    offs = np.array(
        [label_to_offset(pr, l) for l in range(1, pr.alphabet_size + 1)],
        dtype=np.float64,
    )
    eta_vec = np.zeros(pr.d)
    for j, e in enumerate(pr.eta):
        eta_vec += offs[e - 1] * m ** (-(j + 1))
    chain = [None] * (level + 1)
    chain[level] = nodes
    for n in range(level, 0, -1):
        chain[n - 1] = tree.parents[n][chain[n]]
    src = np.zeros((nodes.shape[0], pr.d))
    img = np.zeros((nodes.shape[0], pr.d))
    # per-node scale m^{-(rewritten length so far)}; insertions shrink it by m^{-K}
    iscale = np.ones(nodes.shape[0])
    sscale = 1.0
    for n in range(level):
        flagged = ftree.flags[n][chain[n]]
        if flagged.any():
            img[flagged] += iscale[flagged, None] * eta_vec
            iscale[flagged] *= float(m) ** (-pr.k)
        o = offs[tree.labels[n + 1][chain[n + 1]] - 1]
        sscale *= invm
        src += o * sscale
        iscale *= invm
        img += o * iscale[:, None]
    return src, img


def qs_ratio_scan(
    ftree: FlaggedTree, level: int, triples: int, seed: int, exact_pairs: int = 512
) -> QsScan:
    """Sample triples (x, y, z) of level-n survivor corners and compare
    the image ratio dist(fx, fy)/dist(fx, fz) against the source ratio r
    through the control shape max(r, r^(K+1)).

    c_emp is the largest image ratio divided by the control shape;
    triples with x = z carry no ratio and are skipped (counted), pairs
    with y = x contribute zero distances and are excluded from c_emp.
    Also tracks the exact two-point distortion range over the first
    `exact_pairs` usable (x, y) pairs.
    """
    tree = ftree.tree
    count = tree.count(level)
    if count < 3:
        raise DomainError(f"need at least 3 survivors at level {level}, got {count}")
    if triples < 1:
        raise DomainError(f"need at least one triple, got {triples}")
    pr = ftree.params
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, count, size=(triples, 3))
    deg_mask = picks[:, 0] == picks[:, 2]
    coin_mask = ~deg_mask & (picks[:, 0] == picks[:, 1])
    use = ~(deg_mask | coin_mask)
    degenerate = int(deg_mask.sum())
    coincident = int(coin_mask.sum())

    c_emp = 0.0
    rmin, rmax = math.inf, -math.inf
    kept = picks[use]
    if kept.shape[0]:
        nodes = np.unique(kept)
        src, img = _corner_batch(ftree, level, nodes)
        rows = np.searchsorted(nodes, kept)
        xs, ys, zs = rows[:, 0], rows[:, 1], rows[:, 2]
        # distinct survivors have distinct corners and (tilde is injective)
        # distinct images, so every kept distance is positive
        d_in_xy = np.abs(src[xs] - src[ys]).max(axis=1)
        d_in_xz = np.abs(src[xs] - src[zs]).max(axis=1)
        d_out_xy = np.abs(img[xs] - img[ys]).max(axis=1)
        d_out_xz = np.abs(img[xs] - img[zs]).max(axis=1)
        r_in = d_in_xy / d_in_xz
        r_out = d_out_xy / d_out_xz
        control = np.maximum(r_in, r_in ** (pr.k + 1))
        c_emp = float((r_out / control).max())
        for xi, yi in kept[:exact_pairs, :2]:
            rr = float(
                comparability_ratio(
                    ftree, tree.word_of(level, int(xi)), tree.word_of(level, int(yi))
                )
            )
            rmin = min(rmin, rr)
            rmax = max(rmax, rr)
    return QsScan(
        level=level,
        triples=triples,
        degenerate=degenerate,
        coincident=coincident,
        c_emp=c_emp,
        bracket_bound=float(pr.m ** (pr.k + 3)),
        pair_ratio_min=rmin,
        pair_ratio_max=rmax,
        seed=seed,
    )


def report_json_bytes(command: str, config: dict, results: dict, passed=None) -> bytes:
    """Canonical percoqs-report/1 bytes; every report embeds its full
    resolved configuration (seeds included, execution details like
    worker counts excluded so identical runs stay byte-identical)."""
    obj = {
        "format": "percoqs-report/1",
        "command": command,
        "config": config,
        "results": results,
    }
    if passed is not None:
        obj["pass"] = bool(passed)
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("ascii")


def write_series_csv(path, rows) -> None:
    """Tabular series: rows of (quantity, s, n, value, stderr, seed_count)."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "s", "n", "value", "stderr", "seed_count"])
        for row in rows:
            writer.writerow(list(row))
