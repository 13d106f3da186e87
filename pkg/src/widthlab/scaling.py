"""Discretized Besov width problems on T_m and n-sweeps over them.

Coordinates are the level-flattened x_{k,j}; the target norm is
max(l_{q,w}, l_{2,w}) with w_{k,j} = 2^-k, and the body is the unit ball of
l^0_{1,theta}(T_m): one octahedron for theta = 1, the product of the level
octahedra for theta = inf. For block-aligned subspaces the per-level error
table gives the worst error over the ball for every theta at once.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .approximation import (block_budget_subspace, block_residuals, combine_block_errors,
                            error_table, norm_certificate)
from .distance import DEFAULT_TOL, ConvergenceError
from .norms import BlockPartition, InputError, MixedNorm, NormComponent, OctahedronProduct
from .parallel import pmap
from .subspaces import Subspace
from .wavelets import SequenceIndex

MAX_LEVELS = 14


@dataclass(frozen=True)
class DiscretizedProblem:
    theta: float
    q: float
    m: int
    index: SequenceIndex
    weights: np.ndarray
    levels: BlockPartition
    norm: MixedNorm
    body: OctahedronProduct | None

    @property
    def dim(self) -> int:
        return self.index.size

    @property
    def level_body(self) -> OctahedronProduct:
        return OctahedronProduct(self.levels)


def default_levels(n: int) -> int:
    """m = ceil(log2 n) + 2, capped at the desk-scale limit."""
    if n < 1:
        raise InputError("n must be >= 1")
    return min(math.ceil(math.log2(n)) + 2, MAX_LEVELS)


def level_range(n: int, q: float) -> tuple[int, int]:
    """Smallest and largest k with 4n < 2^k < n^(qt/2), qt = 1 + q/2."""
    qt = 1.0 + q / 2.0
    k0 = math.floor(math.log2(4 * n)) + 1
    k1 = math.ceil(qt / 2.0 * math.log2(n)) - 1
    return k0, k1


def build_problem(theta: float, q: float, m: int) -> DiscretizedProblem:
    if not theta >= 1:
        raise InputError("theta must lie in [1, inf]")
    if not 2 < q < math.inf:
        raise InputError("q must lie in (2, inf)")
    if not 1 <= m <= MAX_LEVELS:
        raise InputError(f"m must lie in [1, {MAX_LEVELS}] ({2**MAX_LEVELS - 1} coordinates)")
    index = SequenceIndex(m)
    w = 2.0 ** -index.level_of.astype(float)
    levels = BlockPartition.from_sizes([2**k for k in range(m)])
    norm = MixedNorm((NormComponent(q, w), NormComponent(2.0, w)))
    if theta == 1:
        body = OctahedronProduct.single(index.size)
    elif math.isinf(theta):
        body = OctahedronProduct(levels)
    else:
        body = None
    w.setflags(write=False)
    return DiscretizedProblem(float(theta), float(q), m, index, w, levels, norm, body)


def block_budget_construction(problem: DiscretizedProblem, n: int, seed: int) -> Subspace:
    """Small levels whole (2^k < n/4, total <= n/2), floor(n/(2m)) random dims elsewhere."""
    if n < 2:
        raise InputError("n must be >= 2")
    if n >= problem.dim:
        return Subspace.block_diagonal(problem.dim, [(b, np.eye(b.size)) for b in problem.levels.blocks])
    per = n // (2 * problem.m)
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, problem.m]))
    sub = block_budget_subspace(problem.levels, n, rng, per_block=per)
    short = [b.size for (b, loc) in sub.blocks if loc.shape[1] < b.size]
    if per == 0 and short:
        raise InputError(f"budget infeasible: n={n} leaves no dimensions for {len(short)} levels")
    assert sub.dim <= n
    return sub


def tail_truncation_bound(theta: float, q: float, m: int, n: int) -> float:
    """2^(-m/q): the norm contribution of levels k >= m."""
    return 2.0 ** (-m / q)


def level_table(problem: DiscretizedProblem, subspace: Subspace, tol: float = DEFAULT_TOL,
                threads: int | None = None) -> np.ndarray:
    """Per-level worst error of each norm component (block-aligned subspaces)."""
    body = problem.level_body
    return error_table(body, problem.norm, block_residuals(body, subspace, problem.norm, tol, threads))


def ball_deviation_bound(problem: DiscretizedProblem, table: np.ndarray) -> float:
    """Worst error over b^0_{1,theta}(T_m); exact for theta = 1."""
    return combine_block_errors(table, [c.q for c in problem.norm.components], problem.theta)


def lower_certificate(problem: DiscretizedProblem, n: int) -> float:
    """Second-moment certificate, plus the embedding route for theta in (1, inf).

    b^0_{1,1} lies in b^0_{1,theta}, and b^0_{1,inf} lies in m^(1/theta) b^0_{1,theta}.
    """
    if problem.body is not None:
        return norm_certificate(problem.body, problem.norm, n)
    one = norm_certificate(OctahedronProduct.single(problem.dim), problem.norm, n)
    inf = norm_certificate(problem.level_body, problem.norm, n)
    return max(one, problem.m ** (-1.0 / problem.theta) * inf)


# --------------------------------------------------------------------------
# sweeps


SWEEP_COLUMNS = ("theta", "q", "m", "n", "lower", "upper", "lower_provenance",
                 "upper_provenance", "seed", "wall_time_s")


@dataclass
class SweepRow:
    theta: float
    q: float
    m: int
    n: int
    lower: float | None
    upper: float | None
    lower_provenance: str
    upper_provenance: str
    seed: int
    wall_time_s: float | None = None
    candidate: str = ""
    error: str = ""

    def cells(self) -> tuple:
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def series(self, theta: float) -> tuple[np.ndarray, np.ndarray]:
        ok = [r for r in self.rows if r.theta == theta and r.upper is not None]
        return np.array([r.n for r in ok], dtype=float), np.array([r.upper for r in ok])

    def ratio(self, num: float = math.inf, den: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
        a = {r.n: r.upper for r in self.rows if r.theta == num and r.upper is not None}
        b = {r.n: r.upper for r in self.rows if r.theta == den and r.upper is not None}
        ns = sorted(set(a) & set(b))
        return np.array(ns, dtype=float), np.array([a[n] / b[n] for n in ns])


def coordinate_construction(problem: DiscretizedProblem, n: int) -> Subspace:
    """The n coordinates with the largest weights: whole low levels, then a prefix."""
    parts, left = [], n
    for b in problem.levels.blocks:
        k = min(left, b.size)
        parts.append((b, np.eye(b.size)[:, :k]))
        left -= k
    return Subspace.block_diagonal(problem.dim, parts)


def level_candidates(problem: DiscretizedProblem, n: int, seed: int,
                     random_draws: int = 4) -> list[tuple[str, Subspace]]:
    """Level-aligned candidates: the floor(n/(2m)) construction, equal-share
    block budgets with fresh random parts, and the coordinate subspace."""
    out = [("coordinate", coordinate_construction(problem, n))]
    try:
        out.append(("block_budget", block_budget_construction(problem, n, seed)))
    except InputError:
        pass
    root = np.random.SeedSequence([seed, n, problem.m, 1])
    for k, ss in enumerate(root.spawn(random_draws)):
        out.append((f"equal_share_{k}", block_budget_subspace(problem.levels, n, np.random.default_rng(ss))))
    return out


def _evaluate_n(thetas, q, n, m, seed, tol, timings, random_draws) -> list[SweepRow]:
    t0 = time.perf_counter()
    try:
        base = build_problem(math.inf, q, m)
        if n >= base.dim:
            tables = []
        else:
            tables = [(name, level_table(base, sub, tol))
                      for name, sub in level_candidates(base, n, seed, random_draws)]
    except (InputError, ConvergenceError) as exc:
        return [SweepRow(th, q, m, n, None, None, "lemma2", "constructed_subspace", seed,
                         error=f"{type(exc).__name__}: {exc}") for th in thetas]
    shared = time.perf_counter() - t0
    out = []
    for th in thetas:
        t1 = time.perf_counter()
        try:
            prob = build_problem(th, q, m)
            lower = lower_certificate(prob, n)
            if n >= prob.dim:
                upper, name = 0.0, "full"
            else:
                upper, name = min((ball_deviation_bound(prob, t), nm) for nm, t in tables)
            row = SweepRow(float(th), float(q), m, n, lower, upper, "lemma2", "constructed_subspace",
                           seed, candidate=name)
        except (InputError, ConvergenceError) as exc:
            row = SweepRow(float(th), float(q), m, n, None, None, "lemma2", "constructed_subspace",
                           seed, error=f"{type(exc).__name__}: {exc}")
        if timings:
            row.wall_time_s = (time.perf_counter() - t1) + shared / len(thetas)
        out.append(row)
    return out


def sweep(thetas, q: float, ns, m_rule=default_levels, seed: int = 0, tol: float = DEFAULT_TOL,
          threads: int | None = None, timings: bool = False, random_draws: int = 4) -> SweepResult:
    """Rows ordered by (theta, n). Every theta at a given n sees the same candidates."""
    thetas = [float(t) for t in thetas]
    ns = sorted(int(n) for n in ns)
    per_n = pmap(lambda n: _evaluate_n(thetas, q, n, m_rule(n), seed, tol, timings, random_draws), ns, threads)
    rows = [per_n[i][k] for k in range(len(thetas)) for i in range(len(ns))]
    return SweepResult(rows)


@dataclass(frozen=True)
class LogFit:
    c: float
    alpha: float
    residual: float
    power: float


def fit_log_exponent(ns, values, power: float = 0.5) -> LogFit:
    """Least squares for d(n) = c n^-power (log n)^alpha on log-log-log axes."""
    ns = np.asarray(ns, dtype=float)
    d = np.asarray(values, dtype=float)
    if ns.size != d.size or ns.size < 4:
        raise InputError("need at least 4 rows")
    if np.any(ns <= 1) or np.any(d <= 0):
        raise InputError("need n > 1 and positive values")
    if math.log2(ns.max() / ns.min()) < 3:
        raise InputError("n values must span at least 3 octaves")
    x = np.log(np.log(ns))
    y = np.log(d) + power * np.log(ns)
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return LogFit(float(math.exp(coef[0])), float(coef[1]), resid, power)


def summarize(result: SweepResult) -> dict:
    """Fitted exponents: theta = 1 and theta = inf uppers, and their ratio."""
    out: dict = {"fits": {}, "rows": len(result.rows),
                 "failed_rows": sum(1 for r in result.rows if r.upper is None)}
    for th in sorted({r.theta for r in result.rows}):
        ns, up = result.series(th)
        try:
            f = fit_log_exponent(ns, up, 0.5)
            out["fits"][f"theta={th:g}"] = {"c": f.c, "alpha": f.alpha, "residual": f.residual}
        except InputError as exc:
            out["fits"][f"theta={th:g}"] = {"error": str(exc)}
    ns, ratio = result.ratio()
    if ns.size:
        out["ratio_inf_over_1"] = {"n": ns.tolist(), "ratio": ratio.tolist(),
                                   "nondecreasing": bool(np.all(np.diff(ratio) >= -1e-12))}
        try:
            f = fit_log_exponent(ns, ratio, 0.0)
            out["ratio_inf_over_1"].update({"c": f.c, "alpha": f.alpha, "residual": f.residual})
        except InputError as exc:
            out["ratio_inf_over_1"]["error"] = str(exc)
    return out
