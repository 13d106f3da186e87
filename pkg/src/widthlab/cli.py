"""widthlab command line.

Exit codes: 0 success or inconclusive, 1 configuration error, 2 numerical
non-convergence, 3 a hypothesis of the product-of-octahedra bound fails or a
check flags a violation.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import io as wio
from .approximation import (SearchConfig, brute_force_width, kashin_lower_formula,
                            norm_certificate, octahedra_product_bound, upper_search)
from .config import as_float, load_config
from .distance import ConvergenceError
from .norms import (BlockPartition, InputError, MixedNorm, OctahedronProduct, load_problem,
                    nu_ratios, weight_vector)
from .parallel import THREADS_ENV, resolve_threads
from .probabilistic import (FAIL, INCONCLUSIVE, PASS, RegularityWindow, SamplingPlan,
                            block_deviation_bounds, check_conditions, conditional_expectation_check,
                            correlation_check, k_chain_check, regularity_probability)
from .subspaces import Subspace

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CONDITION = 0, 1, 2, 3


def _search_config(opts) -> SearchConfig:
    return SearchConfig(random_starts=opts.random_starts, refine=opts.refine,
                        refine_maxiter=opts.refine_maxiter, stages=tuple(opts.stages),
                        refine_vertex_limit=opts.refine_vertex_limit, coordinate=opts.coordinate,
                        block_budget=opts.block_budget)


# --------------------------------------------------------------------------
# commands


def cmd_estimate_width(cfg, seed: int, out: Path, threads: int) -> int:
    body, norm, _ = load_problem(cfg.problem.model_dump(exclude_none=True))
    t0 = time.perf_counter()
    if cfg.method == "brute_force":
        est = brute_force_width(body, norm, cfg.n, starts=cfg.brute_force_starts, seed=seed, tol=cfg.tol)
    else:
        est = upper_search(body, norm, cfg.n, _search_config(cfg.search), seed=seed, tol=cfg.tol,
                           threads=threads)
    doc = est.to_json()
    doc["wall_time_s"] = time.perf_counter() - t0 if cfg.timings else None
    wio.write_json(out / "width_estimate.json", doc)
    print(f"n={est.n} lower={est.lower:.6g} upper={est.upper:.6g}")
    return EXIT_OK


def product_checks(cfg, seed: int, threads: int = 1) -> tuple[dict, int]:
    """All probabilistic checks on one configuration; returns (report, exit code)."""
    part = BlockPartition.from_sizes(cfg.block_sizes)
    N = part.n
    w = weight_vector(cfg.weights if cfg.weights is not None else np.ones(N), N)
    cond = check_conditions(w, part, cfg.n, cfg.C)
    report: dict = {"seed": seed, "config": cfg.model_dump(), "conditions": cond}
    if not (cond.condition1 and cond.condition2):
        report["status"] = "condition failure"
        return report, EXIT_CONDITION
    t0 = time.perf_counter()
    nu = nu_ratios(w, part)
    plan = SamplingPlan.from_weights(w, cfg.n)
    window = RegularityWindow.standard(cfg.n, nu, cfg.A)
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(4)]
    flags: dict = {}

    reg = regularity_probability(plan, window, part, cfg.trials, seeds[0])
    bern = block_deviation_bounds(plan, part)
    flags["regularity_at_least_half"] = PASS if reg.hi >= 0.5 else FAIL
    report["regularity"] = {"estimate": reg, "bernstein_block_bounds": bern,
                            "bernstein_union_bound_on_irregular": float(min(1.0, bern.sum()))}

    corr = correlation_check(plan, part, window, cfg.trials, seeds[1])
    flags["correlation"] = corr.flag
    flags["correlation_per_block"] = (FAIL if any(b.flag == FAIL for b in corr.per_block) else
                                      INCONCLUSIVE if any(b.flag == INCONCLUSIVE for b in corr.per_block)
                                      else PASS)
    report["correlation"] = corr

    cexp = conditional_expectation_check(plan, cfg.delta, cfg.trials, seeds[2])
    flags["conditional_expectation"] = cexp.flag
    flags["empty_subset_bound"] = PASS if cexp.empty_bound_holds else FAIL
    report["conditional_expectation"] = cexp

    body = OctahedronProduct(part)
    norm = MixedNorm.with_sup(cfg.q, w / w.sum(), cfg.h)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    if cfg.subspace.kind == "full":
        sub = Subspace.full(N)
    elif cfg.subspace.kind == "zero":
        sub = Subspace.block_diagonal(N, [(b, np.zeros((b.size, 0))) for b in part.blocks])
    else:
        sub = Subspace.block_diagonal(N, [(b, rng.standard_normal((b.size, min(cfg.subspace.per_block,
                                                                              b.size))))
                                          for b in part.blocks])
    kc = k_chain_check(body, sub, norm, plan, window, cfg.q, cfg.k_trials, seeds[3],
                       lower_samples=cfg.lower_samples, threads=threads)
    flags["k_identity"] = kc.identity_flag
    flags["k_upper_chain"] = kc.upper_chain.get("flag", INCONCLUSIVE)
    flags["k_lower_chain"] = kc.lower_chain.get("flag", INCONCLUSIVE)
    report["k_chain"] = kc
    report["reference_bound"] = {
        "c_q": cfg.c_q,
        "value": octahedra_product_bound(w, part, cfg.n, cfg.q, cfg.h, cfg.c_q, cfg.C),
        "note": "reference curve with a caller-supplied constant, not a certificate"}
    report["flags"] = flags
    report["wall_time_s"] = time.perf_counter() - t0 if cfg.timings else None
    violated = [k for k, v in flags.items() if v == FAIL]
    report["violations"] = violated
    report["status"] = "violations" if violated else "ok"
    return report, (EXIT_CONDITION if violated else EXIT_OK)


def cmd_verify_product(cfg, seed: int, out: Path, threads: int) -> int:
    report, code = product_checks(cfg, seed, threads)
    wio.write_json(out / "product_report.json", report)
    if "flags" in report:
        for k, v in report["flags"].items():
            print(f"{k}: {v}")
    print(f"status: {report['status']}")
    return code


def besov_check(cfg, seed: int) -> dict:
    from . import wavelets as wv

    t0 = time.perf_counter()
    ws = wv.build_wavelet(cfg.r0, cfg.J)
    grid = wv.DyadicGrid.for_system(ws)
    res = wv.filter_residuals(ws.h)
    t = np.arange(ws.psi.size) / 2**ws.J
    moments = [abs(float(np.sum(ws.psi * t**j)) / 2**ws.J) for j in range(ws.r0)]
    G = wv.gram_matrix(ws, wv.SequenceIndex(cfg.gram_levels), grid)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 6]))
    idx = wv.SequenceIndex(cfg.roundtrip_levels)
    x = wv.SequenceVector(idx, rng.standard_normal(idx.size))
    rt = float(np.abs(wv.analyze(wv.synthesize(x, ws, grid), ws, idx, grid).values - x.values).max())
    bands = [wv.discretization_band(ws, cfg.discretization_levels, cfg.p, cfg.samples, seed + k, grid)
             for k in range(2)]
    spread = {}
    for name in ("left_over_mid", "mid_over_right"):
        a, b = getattr(bands[0], name), getattr(bands[1], name)
        spread[name] = max(abs(a[i] - b[i]) / max(abs(a[i]), abs(b[i])) for i in range(2))
    f = wv.synthesize(x, ws, grid)
    norms = {"l2": wv.lp_norm(f, grid, 2, normalized=True), "lq": wv.lp_norm(f, grid, cfg.p, normalized=True)}
    checks = {
        "filter_orthonormality": res["orthonormality"] <= 1e-12,
        "filter_sum": res["sum"] <= 1e-12,
        "phi_integral": abs(float(ws.phi.sum()) / 2**ws.J - 1.0) <= 1e-6,
        "vanishing_moments": max(moments) <= 1e-6,
        "gram_identity": float(np.abs(G - np.eye(G.shape[0])).max()) <= 1e-3,
        "round_trip": rt <= 1e-4,
        "band_stable": max(spread.values()) <= 0.10,
        "lq_dominates_l2": norms["lq"] >= norms["l2"] * (1 - 1e-12),
    }
    return {"seed": seed, "r0": ws.r0, "J": ws.J, "filter": ws.h, "filter_residuals": res,
            "psi_moments": moments, "gram_max_error": float(np.abs(G - np.eye(G.shape[0])).max()),
            "round_trip_error": rt, "bands": bands, "band_relative_spread": spread,
            "normalized_norms": norms, "checks": checks,
            "wall_time_s": time.perf_counter() - t0 if cfg.timings else None,
            "_function": (f, grid)}


def cmd_besov_check(cfg, seed: int, out: Path, threads: int) -> int:
    from .wavelets import function_csv_rows

    rep = besov_check(cfg, seed)
    f, grid = rep.pop("_function")
    wio.write_json(out / "besov_check.json", rep)
    if cfg.function_csv:
        wio.write_csv(out / "sample_function.csv", ("t", "f"), function_csv_rows(f, grid))
    for k, v in rep["checks"].items():
        print(f"{k}: {'pass' if v else 'fail'}")
    return EXIT_OK


def run_sweep(cfg, seed: int, threads: int):
    from .scaling import default_levels, summarize, sweep

    rule = default_levels if cfg.m is None else (lambda n, m=cfg.m: m)
    res = sweep([as_float(t) for t in cfg.thetas], cfg.q, cfg.ns, rule, seed, cfg.tol, threads,
                cfg.timings, cfg.random_draws)
    return res, summarize(res)


def cmd_scaling_sweep(cfg, seed: int, out: Path, threads: int) -> int:
    from .scaling import SWEEP_COLUMNS

    res, summary = run_sweep(cfg, seed, threads)
    summary["seed"] = seed
    summary["errors"] = [{"theta": r.theta, "n": r.n, "error": r.error} for r in res.rows if r.error]
    wio.write_csv(out / "sweep.csv", SWEEP_COLUMNS, [r.cells() for r in res.rows])
    wio.write_json(out / "sweep_summary.json", summary)
    for r in res.rows:
        print(f"theta={r.theta:g} n={r.n} m={r.m} lower={r.lower} upper={r.upper} {r.error}")
    if res.rows and all(r.upper is None for r in res.rows):
        return EXIT_SOLVER
    return EXIT_OK


KASHIN_COLUMNS = ("N", "q", "n", "lower_formula", "certificate", "upper", "ratio", "candidate",
                  "seed", "wall_time_s")


def kashin_table(cfg, seed: int, threads: int) -> list[dict]:
    body = OctahedronProduct.single(cfg.N)
    norm = MixedNorm.lq(cfg.q, cfg.N)
    rows = []
    for n in cfg.ns:
        t0 = time.perf_counter()
        est = upper_search(body, norm, n, _search_config(cfg.search), seed=seed, tol=cfg.tol,
                           threads=threads)
        low = kashin_lower_formula(cfg.N, n, cfg.q)
        rows.append({"N": cfg.N, "q": cfg.q, "n": n, "lower_formula": low,
                     "certificate": norm_certificate(body, norm, n), "upper": est.upper,
                     "ratio": est.upper / low, "candidate": est.upper_candidate, "seed": seed,
                     "wall_time_s": time.perf_counter() - t0 if cfg.timings else None})
    return rows


def cmd_kashin_table(cfg, seed: int, out: Path, threads: int) -> int:
    rows = kashin_table(cfg, seed, threads)
    wio.write_csv(out / "kashin_table.csv", KASHIN_COLUMNS, [[r[c] for c in KASHIN_COLUMNS] for r in rows])
    wio.write_json(out / "kashin_table.json", {"seed": seed, "rows": rows})
    for r in rows:
        print(f"n={r['n']} lower={r['lower_formula']:.6g} upper={r['upper']:.6g} ratio={r['ratio']:.3g}")
    return EXIT_OK


COMMANDS = {
    "estimate-width": cmd_estimate_width,
    "verify-theorem2": cmd_verify_product,
    "besov-check": cmd_besov_check,
    "scaling-sweep": cmd_scaling_sweep,
    "kashin-table": cmd_kashin_table,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="widthlab", description="Kolmogorov width laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="JSON config (defaults if omitted)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, default=Path("."))
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: ${THREADS_ENV} or 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = resolve_threads(args.threads)
        cfg = load_config(args.command, args.config)
    except (OSError, json.JSONDecodeError, ValidationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args.seed, args.out, threads)
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc} (best={exc.best:.6g}, gap={exc.gap:.3g})", file=sys.stderr)
        return EXIT_SOLVER
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
