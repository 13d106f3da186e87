"""Monte-Carlo checks of the random-subset argument for products of octahedra.

A random subset Omega contains each coordinate i independently with
probability p_i = 2n w_i (weights normalized to sum 1), so E|Omega| = 2n and
E sum_{i in Omega} |x_i|^q = 2n ||x||_{q,w}^q. Omega is regular when every
block count |Omega_s| lies in a window around n nu_s. The checks below
estimate the probabilities and expectations that the lower-bound argument
relies on, with 95% Wilson intervals for proportions and normal intervals
for means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm as _gauss

from .approximation import (ContractError, block_residuals, combine_block_errors, error_table,
                            support_exact_approximation)
from .distance import DEFAULT_TOL
from .norms import (BlockPartition, InputError, MixedNorm, OctahedronProduct, nu_ratios,
                    sample_vertex_arrays, weight_vector)
from .subspaces import Subspace

Z95 = float(_gauss.ppf(0.975))
PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


# --------------------------------------------------------------------------
# intervals


@dataclass(frozen=True)
class Proportion:
    value: float
    lo: float
    hi: float
    successes: int
    trials: int


def wilson(successes: int, trials: int, z: float = Z95) -> Proportion:
    if trials <= 0:
        return Proportion(math.nan, 0.0, 1.0, successes, trials)
    p = successes / trials
    den = 1 + z * z / trials
    mid = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return Proportion(p, max(0.0, mid - half), min(1.0, mid + half), int(successes), int(trials))


@dataclass(frozen=True)
class MeanEstimate:
    value: float
    se: float
    lo: float
    hi: float
    count: int


def mean_estimate(x: np.ndarray) -> MeanEstimate:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        v = float(x.mean()) if x.size else math.nan
        return MeanEstimate(v, math.inf, -math.inf, math.inf, int(x.size))
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(x.size))
    return MeanEstimate(m, se, m - Z95 * se, m + Z95 * se, int(x.size))


@dataclass(frozen=True)
class Interval:
    value: float
    lo: float
    hi: float


def _product(parts) -> Interval:
    """Product of nonnegative interval estimates, endpoint by endpoint."""
    v, lo, hi = 1.0, 1.0, 1.0
    for p in parts:
        v, lo, hi = v * p.value, lo * p.lo, hi * p.hi
    return Interval(v, lo, hi)


# --------------------------------------------------------------------------
# conditions and plans


@dataclass(frozen=True)
class ConditionReport:
    n: int
    m: int
    C: float
    max_weight: float
    weight_bound: float
    condition1: bool
    condition1_margin: float
    nu: tuple[float, ...]
    nu_bound: float
    condition2: bool
    condition2_margin: float
    few_blocks: bool
    caveat: str = ("the block-ratio constant C of the bound is an unspecified large absolute "
                   "constant; the value used here is for exploration only")


def check_conditions(weights, partition: BlockPartition, n: int, C: float = 1.0) -> ConditionReport:
    """Smallness of weights, block ratios, and the implied bound m C log(2m) <= n."""
    w = weight_vector(weights, partition.n)
    if n < 1:
        raise InputError("n must be >= 1")
    total = w.sum()
    bound1 = total / (4 * n)
    nu = nu_ratios(w, partition)
    bound2 = C * math.log(2 * partition.m) / n
    return ConditionReport(
        n=n, m=partition.m, C=C, max_weight=float(w.max()), weight_bound=float(bound1),
        condition1=bool(w.max() <= bound1), condition1_margin=float(bound1 - w.max()),
        nu=tuple(float(v) for v in nu), nu_bound=float(bound2),
        condition2=bool(nu.min() >= bound2), condition2_margin=float(nu.min() - bound2),
        few_blocks=bool(partition.m * C * math.log(2 * partition.m) <= n))


@dataclass(frozen=True)
class SamplingPlan:
    """Inclusion probabilities p_i = 2n w_i for normalized weights."""

    p: np.ndarray
    n: int

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise InputError("inclusion probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_weights(cls, weights, n: int) -> "SamplingPlan":
        w = weight_vector(weights)
        p = 2 * n * w / w.sum()
        if np.any(p > 1):
            raise InputError("2n w_i exceeds 1 for some i; the weights are not small enough")
        return cls(p, n)

    @property
    def omega(self) -> float:
        return float(self.p.sum())

    @property
    def normalized_weights(self) -> np.ndarray:
        return self.p / (2 * self.n)


@dataclass(frozen=True)
class RegularityWindow:
    """Per-block count bounds [lower_s, upper_s]."""

    lower: np.ndarray
    upper: np.ndarray
    A: float | None = None

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise InputError("window needs lower < upper in every block")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def standard(cls, n: int, nu, A: float = 4.0) -> "RegularityWindow":
        """[(3/2) n nu_s, A n nu_s]."""
        if not A > 1.5:
            raise InputError("A must exceed 3/2")
        nu = np.asarray(nu, dtype=float)
        return cls(1.5 * n * nu, A * n * nu, A)

    @classmethod
    def unbounded(cls, m: int) -> "RegularityWindow":
        return cls(np.zeros(m), np.full(m, math.inf))

    def contains(self, counts: np.ndarray) -> np.ndarray:
        counts = np.asarray(counts)
        return np.all((counts >= self.lower) & (counts <= self.upper), axis=-1)

    def block_contains(self, s: int, counts: np.ndarray) -> np.ndarray:
        return (counts >= self.lower[s]) & (counts <= self.upper[s])


@dataclass(frozen=True)
class SubsetSample:
    omega: np.ndarray
    counts: np.ndarray | None


def _masks(p: np.ndarray, trials: int, rng: np.random.Generator, chunk: int = 2048):
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        yield rng.random((k, p.size)) < p
        done += k


def _block_counts(mask: np.ndarray, partition: BlockPartition) -> np.ndarray:
    return np.stack([mask[:, b].sum(axis=1) for b in partition.blocks], axis=1)


def sample_subset(plan: SamplingPlan, seed: int, partition: BlockPartition | None = None) -> SubsetSample:
    mask = next(_masks(plan.p, 1, np.random.default_rng(seed)))
    counts = _block_counts(mask, partition)[0] if partition is not None else None
    return SubsetSample(np.flatnonzero(mask[0]), counts)


def regularity_probability(plan: SamplingPlan, window: RegularityWindow, partition: BlockPartition,
                           trials: int, seed: int) -> Proportion:
    """P(every block count lies in the window)."""
    if trials < 100:
        raise InputError("trials must be >= 100")
    rng = np.random.default_rng(seed)
    hits = 0
    for mask in _masks(plan.p, trials, rng):
        hits += int(window.contains(_block_counts(mask, partition)).sum())
    return wilson(hits, trials)


def bernstein_tail(t: float, sigma2: float, M: float) -> float:
    """min(1, 2 exp(-t^2 / (2 (sigma^2 + M t / 3))))."""
    if not t > 0 or sigma2 < 0 or M < 0:
        raise InputError("need t > 0, sigma2 >= 0, M >= 0")
    if math.isinf(t):
        return 0.0
    return min(1.0, 2.0 * math.exp(-t * t / (2.0 * (sigma2 + M * t / 3.0))))


def block_deviation_bounds(plan: SamplingPlan, partition: BlockPartition) -> np.ndarray:
    """Bernstein bound on P(||Omega_s| - 2n nu_s| > n nu_s / 2) for every block."""
    out = []
    for b in partition.blocks:
        mean = float(plan.p[b].sum())
        var = float(np.sum(plan.p[b] * (1 - plan.p[b])))
        out.append(bernstein_tail(mean / 4, var, 1.0) if mean > 0 else 1.0)
    return np.array(out)


# --------------------------------------------------------------------------
# correlation inequality


@dataclass
class BlockCorrelation:
    block: int
    index: int | None
    conditional: Proportion
    unconditional: Proportion
    flag: str


@dataclass
class CorrelationReport:
    method: str
    support: list[int]
    p_support_exact: float
    lhs: Interval
    rhs: Interval
    flag: str
    per_block: list[BlockCorrelation] = field(default_factory=list)
    trials: int = 0
    seed: int = 0


def _compare(lhs_lo, lhs_hi, rhs_lo, rhs_hi, degenerate) -> str:
    if degenerate:
        return INCONCLUSIVE
    return FAIL if lhs_hi < rhs_lo else PASS


def correlation_check(plan: SamplingPlan, partition: BlockPartition, window: RegularityWindow,
                      trials: int, seed: int, support=None,
                      rejection_threshold: float = 1e-3) -> CorrelationReport:
    """P(supp u in Omega, Omega regular) >= P(supp u in Omega) P(Omega regular).

    support holds at most one index per block (default: a random vertex's
    support). With P(supp u in Omega) >= rejection_threshold the joint event is
    estimated by plain sampling; otherwise by the product over blocks, which
    is exact by independence. The per-block inequality
    P(block regular | i in Omega) >= P(block regular) is always reported.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    root = np.random.SeedSequence([seed, 1])
    rng_u, rng_joint, rng_block = (np.random.default_rng(s) for s in root.spawn(3))
    block_of = partition.block_of()
    if support is None:
        body = OctahedronProduct(partition)
        support = sample_vertex_arrays(body, 1, rng_u)[0][0]
    support = [int(i) for i in np.atleast_1d(support)]
    if len({int(block_of[i]) for i in support}) != len(support):
        raise InputError("support may hold at most one index per block")
    p_u = float(np.prod(plan.p[support])) if support else 1.0
    by_block = {int(block_of[i]): i for i in support}

    per_block = []
    for s, b in enumerate(partition.blocks):
        ps = plan.p[b]
        i = by_block.get(s)
        hits_c = hits_u = 0
        seeds = np.random.SeedSequence([seed, 2, s]).spawn(2)
        for mask in _masks(ps, trials, np.random.default_rng(seeds[0])):
            hits_u += int(window.block_contains(s, mask.sum(axis=1)).sum())
        uncond = wilson(hits_u, trials)
        if i is None:
            cond = uncond
            flag = PASS
        else:
            local = int(np.flatnonzero(b == i)[0])
            for mask in _masks(ps, trials, np.random.default_rng(seeds[1])):
                mask[:, local] = True
                hits_c += int(window.block_contains(s, mask.sum(axis=1)).sum())
            cond = wilson(hits_c, trials)
            flag = _compare(cond.lo, cond.hi, uncond.lo, uncond.hi,
                            plan.p[i] == 0 or hits_u == 0)
        per_block.append(BlockCorrelation(s, i, cond, uncond, flag))

    if p_u >= rejection_threshold:
        both = only_u = only_r = 0
        for mask in _masks(plan.p, trials, rng_joint):
            in_u = mask[:, support].all(axis=1) if support else np.ones(mask.shape[0], bool)
            reg = window.contains(_block_counts(mask, partition))
            both += int((in_u & reg).sum())
            only_u += int(in_u.sum())
            only_r += int(reg.sum())
        pj, pu, pr = wilson(both, trials), wilson(only_u, trials), wilson(only_r, trials)
        lhs = Interval(pj.value, pj.lo, pj.hi)
        rhs = _product([pu, pr])
        flag = _compare(lhs.lo, lhs.hi, rhs.lo, rhs.hi, min(both, only_u, only_r) == 0)
        method = "rejection"
    else:
        lhs_parts, rhs_parts = [], []
        for bc in per_block:
            pi = float(plan.p[bc.index]) if bc.index is not None else 1.0
            lhs_parts.append(Interval(pi * bc.conditional.value, pi * bc.conditional.lo,
                                      pi * bc.conditional.hi))
            rhs_parts.append(Interval(pi * bc.unconditional.value, pi * bc.unconditional.lo,
                                      pi * bc.unconditional.hi))
        lhs, rhs = _product(lhs_parts), _product(rhs_parts)
        degenerate = p_u == 0 or any(bc.unconditional.successes == 0 for bc in per_block)
        flag = _compare(lhs.lo, lhs.hi, rhs.lo, rhs.hi, degenerate)
        method = "factorized"
    return CorrelationReport(method, support, p_u, lhs, rhs, flag, per_block, trials, seed)


# --------------------------------------------------------------------------
# conditional expectation of the subset size


@dataclass
class ConditionalExpectationReport:
    omega: float
    delta: float
    window: tuple[float, float]
    conditional_mean: float
    mean: float
    margin: float
    margin_se: float
    margin_ci: tuple[float, float]
    p_window: Proportion
    p_concentration: Proportion
    log_p_empty: float
    log_four_pow_minus_omega: float
    empty_bound_holds: bool
    flag: str
    trials: int
    seed: int


def _subset_sizes(p: np.ndarray, trials: int, rng: np.random.Generator) -> np.ndarray:
    if np.all(p == p[0]):
        return rng.binomial(p.size, p[0], size=trials).astype(float)
    return np.concatenate([m.sum(axis=1) for m in _masks(p, trials, rng)]).astype(float)


def conditional_expectation_check(plan: SamplingPlan, delta: float = 1 / 3, trials: int = 10_000,
                                  seed: int = 0, upper_factor: float = 5.0,
                                  window: tuple[float, float] | None = None) -> ConditionalExpectationReport:
    """E(#Omega | R) >= E #Omega for R = {(1 - delta) omega <= #Omega <= 5 omega}.

    The margin E(#|R) - E# is estimated on one sample, so the common noise
    cancels; its interval comes from the influence function of the ratio.
    A negative margin is only called a failure when the concentration the
    argument needs for large omega (P(# within (1 +- delta/3) omega) > 9/10)
    is also observed; otherwise it is inconclusive.
    """
    if not 0 < delta < 1:
        raise InputError("delta must lie in (0, 1)")
    if trials < 2:
        raise InputError("trials must be >= 2")
    p = plan.p
    if np.any(p > 0.5):
        raise InputError("the empty-subset bound 4^-omega needs p_i <= 1/2")
    omega = float(p.sum())
    lo, hi = window if window is not None else ((1 - delta) * omega, upper_factor * omega)
    x = _subset_sizes(p, trials, np.random.default_rng(np.random.SeedSequence([seed, 3])))
    in_r = (x >= lo) & (x <= hi)
    conc = (x >= (1 - delta / 3) * omega) & (x <= (1 + delta / 3) * omega)
    mean = float(x.mean())
    p_r = float(in_r.mean())
    log_empty = float(np.sum(np.log1p(-p)))
    log_bound = -omega * math.log(4.0)
    base = dict(omega=omega, delta=delta, window=(float(lo), float(hi)), mean=mean,
                p_window=wilson(int(in_r.sum()), trials), p_concentration=wilson(int(conc.sum()), trials),
                log_p_empty=log_empty, log_four_pow_minus_omega=log_bound,
                empty_bound_holds=bool(log_empty >= log_bound - 1e-12), trials=trials, seed=seed)
    if in_r.sum() < 2:
        return ConditionalExpectationReport(conditional_mean=math.nan, margin=math.nan,
                                            margin_se=math.inf, margin_ci=(-math.inf, math.inf),
                                            flag=INCONCLUSIVE, **base)
    cmean = float(x[in_r].mean())
    margin = cmean - mean
    psi = in_r * (x - cmean) / p_r - (x - mean)
    se = float(psi.std(ddof=1) / math.sqrt(trials))
    ci = (margin - Z95 * se, margin + Z95 * se)
    if ci[1] >= 0:
        flag = PASS
    else:
        flag = FAIL if base["p_concentration"].lo > 0.9 else INCONCLUSIVE
    return ConditionalExpectationReport(conditional_mean=cmean, margin=margin, margin_se=se,
                                        margin_ci=ci, flag=flag, **base)


# --------------------------------------------------------------------------
# the two-sided chain for K


@dataclass
class KChainReport:
    path: str
    q: float
    K_mc: MeanEstimate | None
    K_direct: float | None
    K_exact: float | None
    identity_z: float | None
    identity_flag: str
    deviation_bound: float | None
    precondition: str
    max_error_qw: float | None
    max_error_norm: float | None
    upper_chain: dict
    lower_chain: dict
    trials: int
    seed: int


def _support_exact_residuals(residuals):
    """Rescale e_i - y_i to the residual of y_i / (y_i)_i, which matches e_i at i."""
    out = []
    for r in residuals:
        eye = np.eye(r.shape[0])
        y = eye - r
        y_ii = np.diag(y)
        if np.any(np.abs(y_ii) < 1e-12):
            raise ContractError("a best approximant vanishes at its own coordinate")
        scaled = eye - y / y_ii[:, None]
        np.fill_diagonal(scaled, 0.0)
        out.append(scaled)
    return out


def k_chain_check(body: OctahedronProduct, subspace: Subspace, norm: MixedNorm, plan: SamplingPlan,
                  window: RegularityWindow, q: float, trials: int, seed: int,
                  d: float | None = None, lower_samples: int = 200, inner_vertices: int = 256,
                  vertex_samples: int = 200, tol: float = DEFAULT_TOL,
                  threads: int | None = None) -> KChainReport:
    """Estimate K = E xi / P(supp u in Omega) two ways and walk both chains.

    xi = sum_{i in Omega} |u_i - v_i|^q 1{supp u in Omega} with v = v(u) in L
    equal to u on supp u. The identity K = 2n E_pi ||u - v||_{q,w}^q (pi the
    conditional law of u given supp u in Omega) is checked by sampling u and
    Omega given supp u in Omega, paired with the direct average.

    For a block-aligned subspace v is assembled from per-block best
    approximants of unit vectors, and K also has a closed form. Otherwise v
    comes from support_exact_approximation on sampled vertices.
    """
    if not 2 <= q < math.inf:
        raise InputError("q must lie in [2, inf)")
    if trials < 2:
        raise InputError("trials must be >= 2")
    if body.radius != 1.0:
        raise InputError("the K statistic is defined for the unit product of octahedra")
    part = body.partition
    p, n = plan.p, plan.n
    w = plan.normalized_weights
    root = np.random.SeedSequence([seed, 4])
    rng_u, rng_omega, rng_lower = (np.random.default_rng(s) for s in root.spawn(3))
    h = norm.sup_scale
    upper_chain: dict = {}
    lower_chain: dict = {}

    if subspace.aligned_with(part.blocks) or subspace.dim in (0, body.dim):
        path = "block"
        if subspace.dim == body.dim:
            residuals = [np.zeros((b.size, b.size)) for b in part.blocks]
            dev = 0.0
        else:
            sub = subspace if subspace.aligned_with(part.blocks) else Subspace.block_diagonal(
                body.dim, [(b, np.zeros((b.size, 0))) for b in part.blocks])
            base = block_residuals(body, sub, norm, tol, threads)
            dev = combine_block_errors(error_table(body, norm, base),
                                       [c.q for c in norm.components], math.inf)
            # the closed form needs only (y_i)_i != 0, so the identity is
            # checked even when d >= h/2; the upper chain is then inconclusive
            residuals = _support_exact_residuals(base)
        aq = [np.abs(r) ** q for r in residuals]
        # e_s(i) = ||residual_i||_{q,w}^q inside block s
        e = [a @ w[b] for a, b in zip(aq, part.blocks)]
        k_exact = float(2 * n * sum(np.dot(p[b], es) / p[b].sum() for b, es in zip(part.blocks, e)))
        idx, signs = sample_vertex_arrays(body, trials, rng_u)
        y = np.zeros(trials)
        direct = np.zeros(trials)
        pi = np.ones(trials)
        local_pos = [np.searchsorted(b, idx[:, s]) for s, b in enumerate(part.blocks)]
        for s, b in enumerate(part.blocks):
            rows = aq[s][local_pos[s]]
            mask = rng_omega.random((trials, b.size)) < p[b]
            mask[np.arange(trials), local_pos[s]] = True
            y += (rows * mask).sum(axis=1)
            direct += rows @ p[b]
            pi *= p[idx[:, s]]
        max_qw = float(sum(es.max() for es in e) ** (1 / q))
        comp_max = []
        for c in norm.components:
            if math.isinf(c.q):
                comp_max.append(c.scale * max(float(np.abs(r).max()) for r in residuals))
            else:
                tot = sum(float((np.abs(r) ** c.q @ c.weights[b]).max())
                          for r, b in zip(residuals, part.blocks))
                comp_max.append(c.scale * tot ** (1 / c.q))
        max_norm = float(max(comp_max))
    else:
        path = "general"
        k_exact = None
        dev = d
        if dev is None:
            raise InputError("the general path needs the deviation d (or an upper bound on it)")
        if h is None or not dev < h / 2:
            return KChainReport(path, q, None, None, None, None, INCONCLUSIVE, dev,
                                "inconclusive (precondition)", None, None,
                                {"flag": INCONCLUSIVE}, {"flag": INCONCLUSIVE}, trials, seed)
        count = min(vertex_samples, trials)
        idx, signs = sample_vertex_arrays(body, count, rng_u)
        resid = []
        for k in range(count):
            u = np.zeros(body.dim)
            u[idx[k]] = signs[k]
            resid.append(u - support_exact_approximation(u, subspace, norm, dev, tol=1e-12))
        resid = np.array(resid)
        for k in range(count):
            resid[k, idx[k]] = 0.0
        aq_rows = np.abs(resid) ** q
        mask = rng_omega.random((count, body.dim)) < p
        y = (aq_rows * mask).sum(axis=1)
        direct = aq_rows @ p
        pi = np.prod(p[idx], axis=1)
        max_qw = float(np.max((aq_rows @ w) ** (1 / q)))
        max_norm = float(np.max(norm(resid)))

    # identity: self-normalized estimates with the same weights, paired
    wt = pi / pi.mean() if pi.mean() > 0 else np.ones_like(pi)
    k_mc = mean_estimate(wt * y)
    k_direct = float(np.mean(wt * direct))
    diff = mean_estimate(wt * (y - direct))
    z = diff.value / diff.se if diff.se > 0 else (0.0 if diff.value == 0 else math.inf)
    identity_flag = PASS if abs(z) <= 2 else FAIL

    # upper chain
    if h is None or dev is None:
        precondition = "inconclusive (precondition)"
    elif dev < h / 2:
        precondition = "holds"
    else:
        precondition = "inconclusive (precondition)"
    bound1 = 2 * n * max_qw**q
    upper_chain = {"K_le_2n_max_error": bool(k_mc.lo <= bound1 * (1 + 1e-12)),
                   "two_n_max_error_qw_pow_q": bound1}
    if precondition == "holds":
        upper_chain["error_le_2d"] = bool(max_norm <= 2 * dev * (1 + 1e-9) + 1e-12)
        upper_chain["two_n_2d_pow_q"] = 2 * n * (2 * dev) ** q
        upper_chain["ratio_K_over_2n_d_pow_q"] = k_mc.value / (2 * n * dev**q) if dev > 0 else 0.0
        upper_chain["flag"] = PASS if upper_chain["K_le_2n_max_error"] and upper_chain["error_le_2d"] else FAIL
    else:
        upper_chain["flag"] = INCONCLUSIVE
        if dev:
            upper_chain["ratio_K_over_2n_d_pow_q"] = k_mc.value / (2 * n * dev**q)

    # lower chain on regular Omega (block path: per-block residual tables)
    if path == "block":
        lower_chain = _lower_chain(part, residuals, plan, window, q, lower_samples, inner_vertices,
                                   rng_lower, subspace.dim)
    else:
        lower_chain = {"flag": INCONCLUSIVE, "note": "needs a block-aligned subspace"}

    return KChainReport(path, q, k_mc, k_direct, k_exact, float(z), identity_flag, dev, precondition,
                        max_qw, max_norm, upper_chain, lower_chain, trials, seed)


def _lower_chain(part, residuals, plan, window, q, samples, inner, rng, dim) -> dict:
    """Walk the lower chain on regular subsets; the l_2 tail starts after dim L."""
    n = plan.n
    nu = np.array([plan.p[b].sum() for b in part.blocks]) / (2 * n)
    nu_max = float(nu.max())
    regular = 0
    jensen_ok = holder_ok = tail_ok = True
    stats, tail_vals, ref_ratio = [], [], []
    for _ in range(samples):
        masks = [rng.random(b.size) < plan.p[b] for b in part.blocks]
        counts = np.array([m.sum() for m in masks])
        if not window.contains(counts):
            continue
        regular += 1
        sel = [np.flatnonzero(m) for m in masks]
        eq = e2 = 0.0
        a_q, a_2 = [], []
        for r, o in zip(residuals, sel):
            sub = r[np.ix_(o, o)]
            rq = (np.abs(sub) ** q).sum(axis=1)
            r2 = (sub * sub).sum(axis=1)
            eq += rq.mean()
            e2 += r2.mean()
            a_q.append(rq)
            a_2.append(r2)
        picks = [rng.integers(0, len(o), size=inner) for o in sel]
        sq = sum(a[pk] for a, pk in zip(a_q, picks))
        s2 = sum(a[pk] for a, pk in zip(a_2, picks))
        size = int(counts.sum())
        # q-mean >= 2-mean on the empirical measure
        jensen_ok &= bool(np.mean(sq) ** (1 / q) >= np.mean(sq ** (2 / q)) ** 0.5 * (1 - 1e-12))
        # ||r||_q >= |Omega|^(1/q - 1/2) ||r||_2 on R^Omega
        holder_ok &= bool(np.all(sq ** (1 / q) >= size ** (1 / q - 0.5) * np.sqrt(s2) * (1 - 1e-12) - 1e-15))
        sig2 = np.concatenate([np.full(c, 1.0 / c) for c in counts if c > 0])
        sig2 = np.sort(sig2)[::-1]
        tail = float(sig2[dim:].sum())
        tail_ok &= bool(e2 >= tail * (1 - 1e-9) - 1e-12)
        tail_vals.append(float(sig2[n:(3 * n) // 2].sum()) * nu_max)
        stats.append(eq)
        ref_ratio.append(eq / (n ** (1 - q / 2) * nu_max ** (-q / 2)))
    if regular == 0:
        return {"flag": INCONCLUSIVE, "regular_samples": 0, "samples": samples}
    ok = jensen_ok and holder_ok and tail_ok
    return {
        "flag": PASS if ok and min(stats) > 0 else (FAIL if not ok else INCONCLUSIVE),
        "regular_samples": regular, "samples": samples,
        "jensen_step": jensen_ok, "holder_step": holder_ok, "l2_tail_step": tail_ok,
        "mean_error_mass": float(np.mean(stats)), "min_error_mass": float(np.min(stats)),
        "error_mass_over_reference": float(np.mean(ref_ratio)),
        "tail_n_to_3n_over_2_times_nu": float(np.mean(tail_vals)),
    }
