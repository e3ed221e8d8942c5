"""Command line front end.

Subcommands: sample (tree files), render (SVG panels), solve
(closed-form exponents), check (self-verification against the closed
forms and map invariants).  All outputs are deterministic functions of
the printed configuration; worker counts only change wall time, never
bytes.

Exit codes: 0 ok, 1 usage or bad parameter, 2 resource budget exhausted,
3 I/O failure, 4 a requested check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import analysis, globalmap, percolation, substitution
from .errors import CapacityError, DomainError, PreconditionError
from .lattice import Params, pi_finite
from .percolation import DEFAULT_NODE_BUDGET, derive_seed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CAPACITY = 2
EXIT_IO = 3
EXIT_CHECK_FAILED = 4


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the file contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--M", type=int, default=3, help="subdivision base (>= 3)")
    p.add_argument("--d", type=int, default=2, help="dimension")
    p.add_argument("--p", type=float, default=0.7, help="survival probability")
    p.add_argument("--K", type=int, default=1, help="insertion word length")
    p.add_argument(
        "--eta",
        type=str,
        default=None,
        help="insertion word as comma-separated labels (default: central cell)",
    )
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--depth", type=int, default=5, help="sampling depth")
    p.add_argument("--trials", type=int, default=None, help="Monte Carlo trials")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", "-o", type=str, default=None, help="output file")
    p.add_argument(
        "--node-budget",
        type=int,
        default=None,
        help=f"candidate-evaluation cap (default {DEFAULT_NODE_BUDGET}; "
        "the PERCOQS_NODE_BUDGET environment variable wins)",
    )


def _params(args) -> Params:
    eta = None
    if args.eta:
        eta = tuple(int(x) for x in args.eta.split(","))
    return Params(m=args.M, d=args.d, p=args.p, k=args.K, eta=eta)


def _node_budget(args) -> int:
    env = os.environ.get("PERCOQS_NODE_BUDGET")
    if env is not None:
        return int(env)
    if args.node_budget is not None:
        return args.node_budget
    return DEFAULT_NODE_BUDGET


def _config_dict(params: Params, args, **extra) -> dict:
    cfg = {
        "M": params.m,
        "d": params.d,
        "p": params.p,
        "K": params.k,
        "eta": list(params.eta),
        "seed": args.seed,
    }
    cfg.update(extra)
    return cfg


def _write_bytes(path: str | None, data: bytes) -> None:
    if path is None:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def _emit_report(args, command: str, config: dict, results: dict, passed=None):
    if args.out is not None:
        _write_bytes(args.out, analysis.report_json_bytes(command, config, results, passed))


# --- sample -----------------------------------------------------------------


def cmd_sample(args) -> int:
    params = _params(args)
    budget = _node_budget(args)
    if args.nonextinct:
        tree, rejections = percolation.sample_nonextinct(
            params,
            args.depth,
            args.seed,
            node_budget=budget,
            workers=args.workers,
        )
        print(f"non-extinct after {rejections} rejections", file=sys.stderr)
    else:
        tree = percolation.sample_tree(
            params, args.depth, args.seed, node_budget=budget, workers=args.workers
        )
    for level in range(tree.depth + 1):
        print(f"level {level}: {tree.count(level)} survivors", file=sys.stderr)
    _write_bytes(args.out, tree.to_canonical_bytes())
    return EXIT_OK


# --- render ------------------------------------------------------------------

_SVG_FILL = "#30506d"
_SVG_IMAGE_FILL = "#7d3c68"


def render_svg(tree, levels, image=False, px=220, gap=14) -> str:
    """One square panel per requested level; survivors (or their image
    boxes) drawn as filled squares.  2-d trees only."""
    params = tree.params
    if params.d != 2:
        raise DomainError(f"rendering is 2-d only, got d={params.d}")
    ftree = substitution.compute_flags(tree) if image else None
    parts = []
    width = len(levels) * (px + gap) + gap
    height = px + 2 * gap
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    for i, level in enumerate(levels):
        x0 = gap + i * (px + gap)
        y0 = gap
        parts.append(
            f'<rect x="{x0}" y="{y0}" width="{px}" height="{px}" '
            f'fill="none" stroke="#222" stroke-width="1"/>'
        )
        if image:
            boxes = substitution.image_cover(ftree, level)
            rects = [
                (box.corner.to_floats(), float(box.side())) for box in boxes
            ]
            rects.sort()
            fill = _SVG_IMAGE_FILL
        else:
            rects = [
                (pi_finite(params, w).to_floats(), params.m ** (-level))
                for w in tree.words(level)
            ]
            fill = _SVG_FILL
        for (cx, cy), side in rects:
            # SVG's y axis points down; flip so the origin is bottom-left
            parts.append(
                f'<rect x="{x0 + cx * px:.4f}" y="{y0 + (1.0 - cy - side) * px:.4f}" '
                f'width="{side * px:.4f}" height="{side * px:.4f}" fill="{fill}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_render(args) -> int:
    with open(args.tree, "rb") as fh:
        tree = percolation.tree_from_json_dict(json.load(fh))
    levels = [int(x) for x in args.levels.split(",")]
    for level in levels:
        if not (0 <= level <= tree.depth):
            raise DomainError(f"level {level} outside 0..{tree.depth}")
    svg = render_svg(tree, levels, image=args.image, px=args.px)
    _write_bytes(args.out, svg.encode("ascii"))
    return EXIT_OK


# --- solve -------------------------------------------------------------------


def cmd_solve_t(args) -> int:
    params = _params(args)
    report = analysis.solve_t(params)
    print(
        f"s_hausdorff={report.s_hausdorff:.9f} t_upper={report.t_upper:.9f} "
        f"gap={report.gap:.3e} residual={report.residual:.3e}"
    )
    if report.warning:
        print(f"warning: {report.warning}", file=sys.stderr)
    _emit_report(args, "solve t", _config_dict(params, args), report.to_json_dict())
    return EXIT_OK


def cmd_solve_epsilon_table(args) -> int:
    reports = analysis.epsilon_table()
    for r in reports:
        print(
            f"M={r.m} d={r.d} p_star={r.p_star:.9f} epsilon={r.epsilon:.6f} "
            f"residual={r.residual:.3e}"
        )
    if args.out:
        _write_bytes(
            args.out,
            analysis.report_json_bytes(
                "solve epsilon-table",
                {"cases": [[m, d] for m, d in analysis.EPSILON_TABLE_CASES]},
                {"rows": [r.to_json_dict() for r in reports]},
            ),
        )
    return EXIT_OK


def cmd_solve_kappa(args) -> int:
    params = _params(args)
    k_val = analysis.kappa(params, args.s)
    kp_val = analysis.kappa_prime(params)
    print(f"kappa(s={args.s}, K={params.k})={k_val!r} kappa_prime={kp_val!r}")
    _emit_report(
        args,
        "solve kappa",
        _config_dict(params, args, s=args.s),
        {"kappa": k_val, "kappa_prime": kp_val},
    )
    return EXIT_OK


# --- check -------------------------------------------------------------------


def _finish_check(args, command, config, results, passed, lines) -> int:
    for line in lines:
        print(line)
    _emit_report(args, command, config, results, passed)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_check_oracle(args) -> int:
    params = _params(args)
    tol = 1e-12
    rows = []
    worst = 0.0
    for p in (0.3, 0.5, 0.7):
        pr = Params(m=params.m, d=params.d, p=p, k=params.k, eta=params.eta)
        for k in (1, 2):
            for s in (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0):
                lhs = analysis.level1_oracle(pr, s, k)
                rhs = p * pr.m ** (pr.d - s) * analysis.kappa(pr, s, k)
                err = abs(lhs - rhs)
                worst = max(worst, err)
                rows.append({"p": p, "K": k, "s": s, "oracle": lhs, "closed_form": rhs})
    passed = worst <= tol
    return _finish_check(
        args,
        "check oracle",
        _config_dict(params, args, tolerance=tol),
        {"worst_error": worst, "rows": rows},
        passed,
        [f"one-generation enumeration vs closed form: max |diff|={worst:.3e} "
         f"{'PASS' if passed else 'FAIL'}"],
    )


def cmd_check_martingale(args) -> int:
    params = _params(args)
    trials = args.trials or 10_000
    tree, _ = percolation.sample_nonextinct(
        params, args.depth, args.seed, node_budget=_node_budget(args),
        workers=args.workers,
    )
    ftree = substitution.compute_flags(tree)
    s = args.s if args.s is not None else analysis.solve_t(params).t_upper
    n = args.level if args.level is not None else args.depth - 1
    report = analysis.martingale_check(
        ftree, s, n, trials, derive_seed(args.seed, "martingale")
    )
    passed = abs(report.zscore) <= 3.0
    return _finish_check(
        args,
        "check martingale",
        _config_dict(params, args, depth=args.depth, s=s, n=n, trials=trials),
        report.to_json_dict(),
        passed,
        [f"one-step mean ratio={report.ratio:.6f} z={report.zscore:+.2f} "
         f"{'PASS' if passed else 'FAIL'}"],
    )


def cmd_check_qs(args) -> int:
    params = _params(args)
    trees = args.trees
    triples = args.trials or 2000
    budget = _node_budget(args)
    c_emp = 0.0
    rmin, rmax = math.inf, -math.inf
    per_tree = []
    for i in range(trees):
        tree, _ = percolation.sample_nonextinct(
            params, args.depth, derive_seed(args.seed, "qs", i),
            node_budget=budget, workers=args.workers,
        )
        ftree = substitution.compute_flags(tree)
        scan = analysis.qs_ratio_scan(
            ftree, args.depth, triples, derive_seed(args.seed, "qs-scan", i)
        )
        per_tree.append(scan.to_json_dict())
        c_emp = max(c_emp, scan.c_emp)
        rmin = min(rmin, scan.pair_ratio_min)
        rmax = max(rmax, scan.pair_ratio_max)
    bound = float(params.m ** (params.k + 3))
    passed = c_emp <= bound
    return _finish_check(
        args,
        "check qs",
        _config_dict(params, args, depth=args.depth, trees=trees, triples=triples),
        {"c_emp": c_emp, "bound": bound, "pair_ratio_min": rmin,
         "pair_ratio_max": rmax, "per_tree": per_tree},
        passed,
        [f"three-point control constant C_emp={c_emp:.4f} "
         f"(bound {bound:.0f}) {'PASS' if passed else 'FAIL'}"],
    )


def cmd_check_dims(args) -> int:
    params = _params(args)
    trials = args.trials or 200
    grid = np.round(np.arange(args.grid_lo, args.grid_hi + 1e-9, args.grid_step), 12)
    fit = analysis.estimate_dims(
        params,
        trials,
        args.depth,
        grid,
        seed=args.seed,
        node_budget=_node_budget(args),
        workers=args.workers,
    )
    passed = fit.converged and fit.t_hat < fit.s_hat
    lines = [
        f"s_hat={fit.s_hat:.6f} (CI {fit.s_ci[0]:.6f}..{fit.s_ci[1]:.6f}), "
        f"theory {fit.s_hausdorff:.6f}",
        f"t_hat={fit.t_hat if fit.t_hat is None else round(fit.t_hat, 6)}, "
        f"theory {fit.t_upper:.6f}",
        f"t_hat < s_hat: {'PASS' if passed else 'FAIL'}",
    ]
    return _finish_check(
        args,
        "check dims",
        _config_dict(params, args, depth=args.depth, trials=trials),
        fit.to_json_dict(),
        passed,
        lines,
    )


def cmd_check_global(args) -> int:
    params = _params(args)
    cfg = globalmap.GeomConfig(params)
    rng = np.random.default_rng(derive_seed(args.seed, "global"))
    results = {}
    ok = True

    # branch agreement on the core boundary
    shell = cfg.inner_half
    pts = rng.random((2000, params.d))
    face = rng.integers(0, params.d, size=2000)
    sign = rng.integers(0, 2, size=2000) * 2 - 1
    core_pts = 0.5 + (pts - 0.5) * cfg.core_ratio
    core_pts[np.arange(2000), face] = 0.5 + sign * shell
    inner_vals = cfg.eta_corner + cfg.eta_scale * core_pts
    outer = np.array([globalmap.g(cfg, u) for u in core_pts])
    branch_err = float(np.max(np.abs(outer - inner_vals)))
    results["branch_agreement_max"] = branch_err
    ok &= branch_err <= 1e-12

    # boundary identity, exact
    bpts = rng.random((2000, params.d))
    bface = rng.integers(0, params.d, size=2000)
    bpts[np.arange(2000), bface] = np.where(rng.random(2000) < 0.5, 0.0, 1.0)
    bide = float(np.max(np.abs(globalmap.g_batch(cfg, bpts) - bpts)))
    results["boundary_identity_max"] = bide
    ok &= bide == 0.0

    # two-point distortion bracket
    pairs = rng.random((args.trials or 100_000, 2, params.d))
    gx = globalmap.g_batch(cfg, pairs[:, 0])
    gy = globalmap.g_batch(cfg, pairs[:, 1])
    din = np.max(np.abs(pairs[:, 0] - pairs[:, 1]), axis=1)
    dout = np.max(np.abs(gx - gy), axis=1)
    keep = din > 0
    ratios = dout[keep] / din[keep]
    bracket = float(ratios.max() / ratios.min())
    bound = float(params.m ** (params.k + 2))
    results["bilipschitz_bracket"] = bracket
    results["bilipschitz_bound"] = bound
    ok &= bracket <= bound

    # extension agrees with the corner map on surviving corners
    tree, _ = percolation.sample_nonextinct(
        params, args.depth, args.seed, node_budget=_node_budget(args),
        workers=args.workers,
    )
    ftree = substitution.compute_flags(tree)
    worst = 0.0
    for level in range(1, args.depth + 1):
        count = tree.count(level)
        for i in rng.integers(0, count, size=min(50, count)):
            w = tree.word_of(level, int(i))
            u = np.array(pi_finite(params, w).to_floats())
            fu = globalmap.f_global(ftree, u, level)
            fw = np.array(substitution.f_point(ftree, w).to_floats())
            worst = max(worst, float(np.max(np.abs(fu - fw))))
    results["corner_agreement_max"] = worst
    ok &= worst <= 1e-9

    lines = [
        f"core-boundary branch agreement: {branch_err:.3e} "
        f"{'PASS' if branch_err <= 1e-12 else 'FAIL'}",
        f"cube-boundary identity: {bide:.3e} {'PASS' if bide == 0.0 else 'FAIL'}",
        f"distortion bracket: {bracket:.3f} (bound {bound:.0f}) "
        f"{'PASS' if bracket <= bound else 'FAIL'}",
        f"corner-map agreement: {worst:.3e} {'PASS' if worst <= 1e-9 else 'FAIL'}",
    ]
    return _finish_check(
        args,
        "check global",
        _config_dict(params, args, depth=args.depth),
        results,
        bool(ok),
        lines,
    )


# --- wiring ------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="percoqs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sample = sub.add_parser("sample", help="sample a tree to JSON")
    _add_param_flags(p_sample)
    p_sample.add_argument(
        "--nonextinct", action="store_true", help="rejection-sample until non-extinct"
    )
    p_sample.set_defaults(func=cmd_sample)

    p_render = sub.add_parser("render", help="render tree levels to SVG")
    p_render.add_argument("--tree", required=True, help="tree JSON file")
    p_render.add_argument("--levels", default="1,2,3")
    p_render.add_argument(
        "--image", action="store_true", help="draw image boxes instead of survivors"
    )
    p_render.add_argument("--px", type=int, default=220)
    p_render.add_argument("--out", "-o", default=None)
    p_render.set_defaults(func=cmd_render)

    p_solve = sub.add_parser("solve", help="closed-form exponents")
    solve_sub = p_solve.add_subparsers(dest="what", required=True)
    p_t = solve_sub.add_parser("t", help="zero-growth exponent and gap")
    _add_param_flags(p_t)
    p_t.set_defaults(func=cmd_solve_t)
    p_eps = solve_sub.add_parser("epsilon-table", help="near-critical thresholds")
    p_eps.add_argument("--out", "-o", default=None)
    p_eps.set_defaults(func=cmd_solve_epsilon_table)
    p_kappa = solve_sub.add_parser("kappa", help="contraction factors")
    _add_param_flags(p_kappa)
    p_kappa.add_argument("--s", type=float, required=True)
    p_kappa.set_defaults(func=cmd_solve_kappa)

    p_check = sub.add_parser("check", help="self-verification")
    check_sub = p_check.add_subparsers(dest="what", required=True)
    for name, fn in (
        ("oracle", cmd_check_oracle),
        ("martingale", cmd_check_martingale),
        ("qs", cmd_check_qs),
        ("dims", cmd_check_dims),
        ("global", cmd_check_global),
    ):
        pc = check_sub.add_parser(name)
        _add_param_flags(pc)
        if name == "martingale":
            pc.add_argument("--s", type=float, default=None)
            pc.add_argument("--level", type=int, default=None)
        if name == "qs":
            pc.add_argument("--trees", type=int, default=5)
        if name == "dims":
            pc.add_argument("--grid-lo", type=float, default=1.3)
            pc.add_argument("--grid-hi", type=float, default=1.9)
            pc.add_argument("--grid-step", type=float, default=0.05)
        pc.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DomainError, PreconditionError) as exc:
        print(f"percoqs: parameter error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"percoqs: capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except OSError as exc:
        print(f"percoqs: io: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
