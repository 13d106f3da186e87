"""Deviation of products of octahedra from subspaces, and width estimates.

The deviation sup_{x in B} dist(x, L) is attained at a vertex because the
distance is convex, so exact mode is a finite maximum. Lower bounds come from
the second-moment certificate: for any n-dimensional L and a random vertex u,
E dist(u, L)^2 in a weighted l_2 norm is at least the tail sum of the sorted
coordinate variances, and max >= mean.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .distance import DEFAULT_TOL, ConvergenceError, distance_to_subspace
from .norms import (DEFAULT_ENUMERATION_CAP, BlockPartition, EnumerationCapError, InputError, MixedNorm,
                    NormComponent, OctahedronProduct, Vertex, nu_ratios, sample_vertex_arrays,
                    vertex_matrix, weight_vector)
from .parallel import pmap
from .subspaces import Subspace

LOWER_PROVENANCES = ("lemma2", "formula", "brute_force")
UPPER_PROVENANCES = ("constructed_subspace", "exhaustive")


class ContractError(InputError):
    """A documented precondition of a construction does not hold."""


# --------------------------------------------------------------------------
# distances and deviation


def vertex_distances(points: np.ndarray, subspace: Subspace, norm: MixedNorm,
                     tol: float = DEFAULT_TOL, threads: int | None = None) -> np.ndarray:
    """dist(x, L) for every row x of points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if subspace.dim == 0:
        return np.asarray(norm(points), dtype=float).reshape(-1)
    if subspace.dim == subspace.ambient:
        return np.zeros(points.shape[0])
    if norm.is_weighted_l2:
        comp = norm.components[0]
        sw = np.sqrt(comp.weights)
        qb = np.linalg.qr(subspace.basis * sw[:, None])[0]
        y = points * sw
        r = y - (y @ qb) @ qb.T
        return comp.scale * np.linalg.norm(r, axis=1)
    return np.array(pmap(lambda x: distance_to_subspace(x, subspace, norm, tol).distance,
                         points, threads))


@dataclass(frozen=True)
class _Reduced:
    """The problem restricted to blocks not wholly inside a block-aligned L."""

    coords: np.ndarray
    body: OctahedronProduct | None
    subspace: Subspace | None
    norm: MixedNorm | None


def _reduce(body: OctahedronProduct, subspace: Subspace, norm: MixedNorm) -> _Reduced:
    blocks = body.partition.blocks
    if not subspace.aligned_with(blocks):
        return _Reduced(np.arange(body.dim), body, subspace, norm)
    # Zeroing the residual on a contained block is optimal for these monotone norms.
    keep = [(b, loc) for (b, loc), _ in zip(subspace.blocks, blocks) if loc.shape[1] < b.size]
    if not keep:
        return _Reduced(np.zeros(0, dtype=np.intp), None, None, None)
    coords = np.concatenate([b for b, _ in keep])
    pos = {int(c): k for k, c in enumerate(coords)}
    local_blocks = [np.array([pos[int(c)] for c in b]) for b, _ in keep]
    red_body = OctahedronProduct(BlockPartition(tuple(local_blocks)), body.radius)
    red_l = Subspace.block_diagonal(coords.size, [(lb, loc) for lb, (_, loc) in zip(local_blocks, keep)])
    comps = []
    for c in norm.components:
        w = c.weights[coords]
        if np.any(w > 0):
            comps.append(NormComponent(c.q, w, c.scale))
    red_norm = MixedNorm(tuple(comps)) if comps else None
    return _Reduced(coords, red_body, red_l, red_norm)


def _half_vertices(body: OctahedronProduct, cap: int) -> np.ndarray:
    """One vertex of every +-pair (dist(-x) = dist(x))."""
    verts = vertex_matrix(body, cap)
    first = body.partition.blocks[0]
    keep = (verts[:, first] > 0).any(axis=1)
    return verts[keep]


def deviation(body: OctahedronProduct, subspace: Subspace, norm: MixedNorm, mode: str = "exact",
              count: int = 1000, seed: int = 0, tol: float = DEFAULT_TOL,
              cap: int = DEFAULT_ENUMERATION_CAP, ascent_rounds: int = 5,
              threads: int | None = None) -> float:
    """sup over the body of the distance to the subspace.

    mode="exact" maximizes over all vertices. mode="sampled" returns a lower
    estimate: the best of `count` random vertices, improved by coordinate
    swaps inside single blocks.
    """
    if subspace.ambient != body.dim or norm.dim != body.dim:
        raise InputError("body, subspace and norm live in different dimensions")
    red = _reduce(body, subspace, norm)
    if red.body is None or red.norm is None:
        return 0.0
    if mode == "exact":
        pts = _half_vertices(red.body, cap)
        return float(np.max(vertex_distances(pts, red.subspace, red.norm, tol, threads)))
    if mode != "sampled":
        raise InputError(f"unknown deviation mode {mode!r}")
    if count < 1:
        raise InputError("count must be >= 1")
    return _sampled_deviation(red, count, seed, tol, ascent_rounds, threads)


def _sampled_deviation(red: _Reduced, count, seed, tol, ascent_rounds, threads) -> float:
    rng = np.random.default_rng(seed)
    idx, signs = sample_vertex_arrays(red.body, count, rng)
    n = red.body.dim
    pts = np.zeros((count, n))
    np.put_along_axis(pts, idx, signs * red.body.radius, axis=1)
    vals = vertex_distances(pts, red.subspace, red.norm, tol, threads)
    best = float(vals.max())
    for start in np.argsort(-vals, kind="stable")[:3]:
        cur_idx, cur_sg, cur = idx[start].copy(), signs[start].copy(), float(vals[start])
        for _ in range(ascent_rounds):
            improved = False
            for s, blk in enumerate(red.body.partition.blocks):
                alts = [(int(i), sg) for i in blk for sg in (1, -1)
                        if not (i == cur_idx[s] and sg == cur_sg[s])]
                cand = np.zeros((len(alts), n))
                for r, (i, sg) in enumerate(alts):
                    cand[r, cur_idx] = cur_sg * red.body.radius
                    cand[r, cur_idx[s]] = 0.0
                    cand[r, i] = sg * red.body.radius
                cv = vertex_distances(cand, red.subspace, red.norm, tol, threads)
                k = int(np.argmax(cv))
                if cv[k] > cur * (1 + 1e-12):
                    cur_idx[s], cur_sg[s] = alts[k]
                    cur, improved = float(cv[k]), True
            if not improved:
                break
        best = max(best, cur)
    return best


# --------------------------------------------------------------------------
# block-separable bounds


def block_residuals(body: OctahedronProduct, subspace: Subspace, norm: MixedNorm,
                    tol: float = DEFAULT_TOL, threads: int | None = None) -> list[np.ndarray]:
    """Per block s, the matrix whose row i is e_i - y_i in local coordinates.

    y_i is the best approximant of e_i from the block's local subspace in the
    mixed norm restricted to the block. Blocks wholly inside the subspace get
    a zero matrix. Needs a block-aligned subspace.
    """
    blocks = body.partition.blocks
    if not subspace.aligned_with(blocks):
        raise InputError("block tables need a subspace aligned with the partition")
    out = []
    for idx, loc in subspace.blocks:
        if loc.shape[1] >= idx.size:
            out.append(np.zeros((idx.size, idx.size)))
            continue
        eye = np.eye(idx.size)
        if loc.shape[1] == 0:
            out.append(eye)
            continue
        comps = [NormComponent(c.q, c.weights[idx], c.scale) for c in norm.components
                 if np.any(c.weights[idx] > 0)]
        local_norm = MixedNorm(tuple(comps))
        local_l = Subspace(loc, orthonormal=True)
        rows = pmap(lambda i: eye[i] - distance_to_subspace(eye[i], local_l, local_norm, tol).minimizer,
                    range(idx.size), threads)
        out.append(np.array(rows))
    return out


def error_table(body: OctahedronProduct, norm: MixedNorm, residuals: Sequence[np.ndarray]) -> np.ndarray:
    """a[j, s] = max over rows of block s's residual matrix of component j."""
    table = np.zeros((len(norm.components), body.partition.m))
    for s, (idx, res) in enumerate(zip(body.partition.blocks, residuals)):
        for j, c in enumerate(norm.components):
            w = c.weights[idx]
            if np.any(w > 0):
                table[j, s] = float(np.max(NormComponent(c.q, w, c.scale)(res)))
    return body.radius * table


def block_error_table(body: OctahedronProduct, subspace: Subspace, norm: MixedNorm,
                      tol: float = DEFAULT_TOL, threads: int | None = None) -> np.ndarray:
    """a[j, s] = max over +-e_i in block s of component j of e_i - y_i."""
    return error_table(body, norm, block_residuals(body, subspace, norm, tol, threads))


def combine_block_errors(table: np.ndarray, exponents: Sequence[float], theta: float = math.inf) -> float:
    """Worst error over the ball {x : (sum_s ||x_s||_1^theta)^(1/theta) <= 1}.

    For component j with exponent q the error of a linear blockwise
    approximant is at most ||(t_s a_js)_s||_q with t in the unit theta-ball;
    the sup over t is max_s a_js when theta <= q and the l_{q theta/(theta-q)}
    norm of a_j otherwise (l_q for theta = inf).
    """
    out = 0.0
    for row, q in zip(np.asarray(table, dtype=float), exponents):
        if theta <= q:
            val = float(row.max())
        elif math.isinf(theta):
            val = float(np.sum(row**q) ** (1.0 / q))
        else:
            r = q * theta / (theta - q)
            val = float(np.sum(row**r) ** (1.0 / r))
        out = max(out, val)
    return out


def separable_deviation_bound(body: OctahedronProduct, subspace: Subspace, norm: MixedNorm,
                              tol: float = DEFAULT_TOL, threads: int | None = None) -> float:
    """Rigorous upper bound on the deviation for block-aligned subspaces."""
    table = block_error_table(body, subspace, norm, tol, threads)
    return combine_block_errors(table, [c.q for c in norm.components], math.inf)


def rigorous_deviation(body, subspace, norm, tol=DEFAULT_TOL, cap=DEFAULT_ENUMERATION_CAP,
                       threads=None) -> float | None:
    """Exact deviation when enumerable, else the separable bound, else None."""
    try:
        return deviation(body, subspace, norm, "exact", tol=tol, cap=cap, threads=threads)
    except EnumerationCapError:
        if subspace.aligned_with(body.partition.blocks):
            return separable_deviation_bound(body, subspace, norm, tol, threads)
        return None


# --------------------------------------------------------------------------
# lower bounds


@dataclass(frozen=True)
class SpectralProfile:
    sigma: np.ndarray
    sigma_star: np.ndarray
    order: np.ndarray


def spectral_profile(body: OctahedronProduct, l2_weights) -> SpectralProfile:
    """sigma_i = sqrt(w'_i E u_i^2) for u uniform on the vertices.

    sigma* sorts descending by value, ties broken by index.
    """
    w = weight_vector(l2_weights, body.dim)
    var = np.empty(body.dim)
    for b in body.partition.blocks:
        var[b] = body.radius**2 / b.size
    sigma = np.sqrt(w * var)
    order = np.lexsort((np.arange(sigma.size), -sigma))
    return SpectralProfile(sigma, sigma[order], order)


def second_moment_certificate(body: OctahedronProduct, l2_weights, n: int,
                              norm: MixedNorm | None = None, check_samples: int = 1000,
                              seed: int = 0) -> float:
    """sqrt(sum_{k>n} sigma*_k^2): a lower bound on d_n(B, l_{2,w'}).

    When a norm is passed, its domination of l_{2,w'} is spot-checked on
    random vectors.
    """
    if n < 0:
        raise InputError("n must be >= 0")
    w = weight_vector(l2_weights, body.dim)
    if norm is not None:
        x = np.random.default_rng(seed).standard_normal((check_samples, body.dim))
        l2 = np.sqrt((x * x * w).sum(axis=1))
        if np.any(l2 > norm(x) * (1 + 1e-12)):
            raise InputError("the norm does not dominate the given weighted l_2 norm")
    if n >= body.dim:
        return 0.0
    prof = spectral_profile(body, w)
    return float(math.sqrt(np.sum(prof.sigma_star[n:] ** 2)))


@dataclass(frozen=True)
class SecondMomentEstimate:
    mean: float
    se: float
    tail: float
    samples: int


def distance_second_moment(body: OctahedronProduct, subspace: Subspace, l2_weights, samples: int,
                           seed: int) -> SecondMomentEstimate:
    """Monte-Carlo E rho(u, L)^2 in l_{2,w'} for a uniform vertex u, next to the tail sum."""
    w = weight_vector(l2_weights, body.dim)
    sw = np.sqrt(w)
    idx, signs = sample_vertex_arrays(body, samples, np.random.default_rng(seed))
    U = np.zeros((samples, body.dim))
    np.put_along_axis(U, idx, body.radius * signs, axis=1)
    # weighted l_2 distance to L = euclidean distance to sqrt(w) L after scaling by sqrt(w)
    Z = U * sw
    if subspace.dim:
        left, sv, _ = np.linalg.svd(sw[:, None] * subspace.basis, full_matrices=False)
        q = left[:, sv > 1e-12 * max(sv.max(), 1e-300)]
        Z = Z - (Z @ q) @ q.T
    rho2 = np.sum(Z * Z, axis=1)
    n = subspace.dim
    prof = spectral_profile(body, w)
    tail = float(np.sum(prof.sigma_star[n:] ** 2))
    return SecondMomentEstimate(float(rho2.mean()), float(rho2.std(ddof=1) / math.sqrt(samples)),
                                tail, samples)


def norm_certificate(body: OctahedronProduct, norm: MixedNorm, n: int) -> float:
    """Best second-moment certificate over the norm's components."""
    best = 0.0
    for c in norm.components:
        w2 = c.dominated_l2_weights()
        if np.any(w2 > 0):
            best = max(best, second_moment_certificate(body, w2, n))
    return best


def kashin_lower_formula(N: int, n: int, q: float) -> float:
    """(1/4) min(N^(1/q) / sqrt(n), 1), valid for n < N/2 and 2 < q < inf."""
    if not (isinstance(n, (int, np.integer)) and 1 <= n and 2 * n < N):
        raise InputError(f"need 1 <= n < N/2, got N={N}, n={n}")
    if not (2 < q < math.inf):
        raise InputError(f"need 2 < q < inf, got q={q}")
    return 0.25 * min(N ** (1.0 / q) / math.sqrt(n), 1.0)


def octahedra_product_bound(weights, partition, n: int, q: float, h: float, c_q: float,
                            C: float = 1.0) -> float:
    """min(c_q (n max nu_s)^(-1/2) (sum w)^(1/q), h/2) for admissible data.

    Raises ContractError naming the failed smallness/balance condition.
    """
    from .probabilistic import check_conditions

    if not 2 <= q < math.inf:
        raise InputError("q must lie in [2, inf)")
    if h < 0 or c_q < 0:
        raise InputError("h and c_q must be nonnegative")
    rep = check_conditions(weights, partition, n, C)
    failed = [name for name, ok in (("condition 1 (small weights)", rep.condition1),
                                    ("condition 2 (block ratios)", rep.condition2)) if not ok]
    if failed:
        raise ContractError("conditions not met: " + ", ".join(failed))
    w = np.asarray(weights, dtype=float)
    nu = nu_ratios(w, partition)
    return float(min(c_q * (n * nu.max()) ** -0.5 * w.sum() ** (1.0 / q), h / 2.0))


# --------------------------------------------------------------------------
# support-exact approximation


def support_exact_approximation(u, subspace: Subspace, norm: MixedNorm, d: float,
                                tol: float = 1e-12, max_rounds: int = 200) -> np.ndarray:
    """v in L with v = u on supp u and ||u - v|| <= d / (1 - d/h) <= 2d.

    Iterates: approximate the current target, keep the off-support error,
    re-approximate the on-support error. With h the sup-norm scale of the norm
    and d the deviation of the body, each on-support error is at most d/h < 1/2
    in every coordinate, so it lies in (d/h) B and the targets shrink
    geometrically.
    """
    h = norm.sup_scale
    if h is None:
        raise ContractError("the norm has no sup-norm component")
    if not d < h / 2:
        raise ContractError(f"support-exact approximation assumes d < h/2, got d={d}, h={h}")
    if isinstance(u, Vertex):
        u = u.dense(norm.dim)
    u = np.asarray(u, dtype=float)
    supp = u != 0
    v = np.zeros_like(u)
    target = u.copy()
    prev = math.inf
    for _ in range(max_rounds):
        size = float(np.abs(target).max())
        if size <= tol:
            return v
        if size > prev * (1 - 1e-3):
            raise ConvergenceError("support-exact iteration stalled", size, size)
        prev = size
        y = distance_to_subspace(target, subspace, norm).minimizer if subspace.dim else np.zeros_like(u)
        v = v + y
        err = target - y
        target = np.where(supp, err, 0.0)
    raise ConvergenceError("support-exact iteration hit the round limit",
                           float(np.abs(target).max()), float(np.abs(target).max()))


# --------------------------------------------------------------------------
# candidate subspaces


def coordinate_candidate(body: OctahedronProduct, norm: MixedNorm, n: int) -> Subspace:
    """Span of the n coordinates with the largest unit-vector norms."""
    unit = norm(np.eye(body.dim))
    order = np.lexsort((np.arange(body.dim), -np.asarray(unit)))
    return Subspace.coordinate(body.dim, np.sort(order[:n]))


def coordinate_deviation(body: OctahedronProduct, norm: MixedNorm, coords) -> float:
    """Exact deviation from a coordinate subspace: the best residual zeroes coords."""
    out = np.ones(body.dim, dtype=bool)
    out[np.asarray(coords, dtype=np.intp)] = False
    best = 0.0
    for c in norm.components:
        per_block = []
        for b in body.partition.blocks:
            free = b[out[b]]
            per_block.append(0.0 if free.size == 0 else
                             (1.0 if math.isinf(c.q) else float(c.weights[free].max())))
        per_block = np.array(per_block)
        if math.isinf(c.q):
            val = c.scale * per_block.max()
        else:
            val = c.scale * per_block.sum() ** (1.0 / c.q)
        best = max(best, val)
    return body.radius * best


def block_budget_subspace(partition, n: int, rng: np.random.Generator,
                          per_block: int | None = None) -> Subspace:
    """Whole blocks for the small ones, random subspaces in the rest.

    Blocks with N_s < n/4 are taken whole, smallest first, while their total
    stays <= n/2. Every other block gets a random subspace of dimension
    per_block (default: an equal share of the remaining budget).
    """
    if n < 0:
        raise InputError("n must be >= 0")
    sizes = partition.sizes
    order = np.lexsort((np.arange(sizes.size), sizes))
    full, used = set(), 0
    for s in order:
        if sizes[s] < n / 4 and used + sizes[s] <= n / 2:
            full.add(int(s))
            used += int(sizes[s])
    rest = [s for s in range(sizes.size) if s not in full]
    dims = {s: int(sizes[s]) for s in full}
    if rest:
        if per_block is None:
            share, extra = divmod(n - used, len(rest))
            by_size = sorted(rest, key=lambda s: (-sizes[s], s))
            for k, s in enumerate(by_size):
                dims[s] = min(int(sizes[s]), share + (1 if k < extra else 0))
        else:
            for s in rest:
                dims[s] = min(int(sizes[s]), per_block)
    total = sum(dims.values())
    if total > n:
        raise InputError(f"budget infeasible: {total} dimensions requested for n={n}")
    parts = []
    for s, b in enumerate(partition.blocks):
        k = dims[s]
        local = np.eye(b.size) if k == b.size else rng.standard_normal((b.size, k))
        parts.append((b, local))
    return Subspace.block_diagonal(partition.n, parts)


# --------------------------------------------------------------------------
# smoothed-max refinement over (basis, coefficients)


def _component_values_grads(R: np.ndarray, norm: MixedNorm, p_sup: float):
    """Values (..., V, J) and gradients wrt R (..., V, J, N) of each component."""
    vals, grads = [], []
    for c in norm.components:
        a = np.abs(R)
        sg = np.sign(R)
        if math.isinf(c.q):
            m = np.maximum(a.max(axis=-1, keepdims=True), 1e-300)
            z = a / m
            t = np.sum(z**p_sup, axis=-1, keepdims=True)
            f = c.scale * m * t ** (1 / p_sup)
            g = c.scale * z ** (p_sup - 1) * sg * t ** (1 / p_sup - 1)
        elif c.q == 1:
            eps = 1e-9
            s = np.sqrt(R * R + eps * eps)
            f = c.scale * np.sum(c.weights * s, axis=-1, keepdims=True)
            g = c.scale * c.weights * R / s
        else:
            t = np.maximum(np.sum(c.weights * a**c.q, axis=-1, keepdims=True), 1e-300)
            f = c.scale * t ** (1 / c.q)
            g = c.scale * t ** (1 / c.q - 1) * c.weights * a ** (c.q - 1) * sg
        vals.append(f[..., 0])
        grads.append(g)
    return np.stack(vals, axis=-1), np.stack(grads, axis=-2)


def _lse_objective(B, C, U, norm, beta, p_sup):
    """Sum over batch of (1/beta) log sum exp(beta f_vj); gradients in B and C."""
    R = U[None] - C @ np.swapaxes(B, 1, 2)
    f, g = _component_values_grads(R, norm, p_sup)
    S = f.shape[0]
    flat = f.reshape(S, -1)
    top = flat.max(axis=1, keepdims=True)
    e = np.exp(beta[:, None] * (flat - top))
    z = e.sum(axis=1, keepdims=True)
    obj = top[:, 0] + np.log(z[:, 0]) / beta
    P = (e / z).reshape(f.shape)
    gR = np.einsum("svj,svjn->svn", P, g)
    gC = -gR @ B
    gB = -np.swapaxes(gR, 1, 2) @ C
    return obj, gB, gC


def refine_subspaces(U: np.ndarray, norm: MixedNorm, bases: np.ndarray, stages=(10.0, 100.0, 1000.0),
                     maxiter: int = 200, p_sup: float = 64.0) -> tuple[np.ndarray, np.ndarray]:
    """Minimize a smoothed max of vertex errors over basis and coefficients.

    bases has shape (S, N, n); the S problems are independent and solved
    jointly. sup-norm components are replaced by l_p with p = p_sup. Returns
    orthonormalized bases and the matching coefficients (S, V, n).
    """
    U = np.asarray(U, dtype=float)
    B = np.array(bases, dtype=float)
    S, N, n = B.shape
    if n == 0:
        return B, np.zeros((S, U.shape[0], 0))
    for s in range(S):
        B[s] = np.linalg.qr(B[s])[0]
    C = U[None] @ B
    for kappa in stages:
        f0, _ = _component_values_grads(U[None] - C @ np.swapaxes(B, 1, 2), norm, p_sup)
        beta = kappa / np.maximum(f0.reshape(S, -1).max(axis=1), 1e-300)
        nb = B.size

        def fun(z):
            Bz = z[:nb].reshape(B.shape)
            Cz = z[nb:].reshape(C.shape)
            obj, gB, gC = _lse_objective(Bz, Cz, U, norm, beta, p_sup)
            return float(obj.sum()), np.concatenate([gB.ravel(), gC.ravel()])

        res = minimize(fun, np.concatenate([B.ravel(), C.ravel()]), jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "gtol": 1e-12, "ftol": 1e-15})
        B = res.x[:nb].reshape(B.shape)
        C = res.x[nb:].reshape(C.shape)
        for s in range(S):
            q, r = np.linalg.qr(B[s])
            if np.linalg.matrix_rank(r) < n:
                q = np.linalg.qr(B[s] + 1e-8 * np.random.default_rng(s).standard_normal(B[s].shape))[0]
                r = q.T @ B[s]
            B[s] = q
            C[s] = C[s] @ r.T
    return B, C


# --------------------------------------------------------------------------
# width estimates


@dataclass
class WidthEstimate:
    n: int
    lower: float
    upper: float
    lower_provenance: str
    upper_provenance: str
    witness: Subspace | None = None
    seed: int | None = None
    solver_tol: float = DEFAULT_TOL
    wall_time_s: float | None = None
    upper_candidate: str = ""

    def __post_init__(self):
        if self.lower_provenance not in LOWER_PROVENANCES:
            raise InputError(f"unknown lower provenance {self.lower_provenance!r}")
        if self.upper_provenance not in UPPER_PROVENANCES:
            raise InputError(f"unknown upper provenance {self.upper_provenance!r}")

    def to_json(self) -> dict:
        return {"n": int(self.n), "lower": float(self.lower), "upper": float(self.upper),
                "lower_provenance": self.lower_provenance,
                "upper_provenance": self.upper_provenance,
                "seed": self.seed, "solver_tol": self.solver_tol,
                "wall_time_s": self.wall_time_s}


@dataclass(frozen=True)
class SearchConfig:
    random_starts: int = 4
    refine: bool = True
    refine_maxiter: int = 150
    stages: tuple[float, ...] = (10.0, 100.0, 1000.0)
    refine_vertex_limit: int = 4096
    coordinate: bool = True
    block_budget: bool = True
    cap: int = DEFAULT_ENUMERATION_CAP


def _extend(sub: Subspace, n: int, rng) -> Subspace:
    """Add random directions to reach dimension n (deviation cannot grow)."""
    q = sub.orthobasis()
    if q.shape[1] >= n:
        return sub
    extra = rng.standard_normal((sub.ambient, n - q.shape[1]))
    extra -= q @ (q.T @ extra)
    return Subspace.orthonormalized(np.hstack([q, extra]))


def upper_search(body: OctahedronProduct, norm: MixedNorm, n: int,
                 config: SearchConfig = SearchConfig(), seed: int = 0,
                 warm_start: Subspace | None = None, tol: float = DEFAULT_TOL,
                 threads: int | None = None) -> WidthEstimate:
    """Smallest rigorous deviation over a family of candidate n-dim subspaces.

    Candidates: the coordinate subspace of the largest unit vectors, the
    block-budget subspace, random Gaussian subspaces, a warm start extended
    to dimension n, and smoothed-max refinements of the best of these. Every
    reported value is an exact deviation or a separable upper bound.
    """
    t0 = time.perf_counter()
    N = body.dim
    if n < 0:
        raise InputError("n must be >= 0")
    lower = norm_certificate(body, norm, n)
    if n >= N:
        return WidthEstimate(n, 0.0, 0.0, "lemma2", "constructed_subspace", Subspace.full(N), seed,
                             tol, time.perf_counter() - t0, "full")
    if n == 0:
        val = float(np.max(norm(_half_vertices(body, config.cap)))) if body.vertex_count <= config.cap \
            else coordinate_deviation(body, norm, [])
        return WidthEstimate(0, lower, val, "lemma2", "constructed_subspace", Subspace.zero(N), seed,
                             tol, time.perf_counter() - t0, "zero")

    root = np.random.SeedSequence([seed, n])
    streams = [np.random.default_rng(s) for s in root.spawn(config.random_starts + 3)]
    cands: list[tuple[str, Subspace, float]] = []

    def consider(name, sub):
        val = rigorous_deviation(body, sub, norm, tol, config.cap, threads)
        if val is not None:
            cands.append((name, sub, val))

    if config.coordinate:
        sub = coordinate_candidate(body, norm, n)
        cands.append(("coordinate", sub, coordinate_deviation(body, norm, np.flatnonzero(
            np.abs(sub.basis).sum(axis=1) > 0))))
    if config.block_budget and body.partition.m > 1:
        consider("block_budget", block_budget_subspace(body.partition, n, streams[0]))
    if warm_start is not None:
        consider("warm_start", _extend(warm_start, n, streams[1]))
    for k in range(config.random_starts):
        consider(f"random_{k}", Subspace.random(N, n, streams[3 + k]))

    enumerable = body.vertex_count <= min(config.cap, 2 * config.refine_vertex_limit)
    if config.refine and enumerable and cands:
        U = _half_vertices(body, config.cap)
        ranked = sorted(cands, key=lambda c: c[2])[:2]
        starts = np.stack([c[1].orthobasis() for c in ranked])
        refined, _ = refine_subspaces(U, norm, starts, config.stages, config.refine_maxiter)
        for k, b in enumerate(refined):
            consider(f"refined_{ranked[k][0]}", Subspace(b, orthonormal=True))

    name, sub, val = min(cands, key=lambda c: c[2])
    return WidthEstimate(n, lower, val, "lemma2", "constructed_subspace", sub, seed, tol,
                         time.perf_counter() - t0, name)


def estimate_width(body, norm, n, config: SearchConfig = SearchConfig(), seed: int = 0,
                   tol: float = DEFAULT_TOL, threads: int | None = None) -> WidthEstimate:
    return upper_search(body, norm, n, config, seed, tol=tol, threads=threads)


def brute_force_width(body: OctahedronProduct, norm: MixedNorm, n: int, starts: int = 1000,
                      seed: int = 0, short_iter: int = 25, keep: int = 8,
                      tol: float = DEFAULT_TOL) -> WidthEstimate:
    """Global random multistart over n-dim subspaces, for N <= 6 and <= 64 vertices.

    All starts take a short smoothed-max descent together; the best few are
    refined fully and scored by exact deviation.
    """
    t0 = time.perf_counter()
    N = body.dim
    if N > 6 or body.vertex_count > 64:
        raise InputError("brute force is limited to N <= 6 and at most 64 vertices")
    if starts < 1:
        raise InputError("starts must be >= 1")
    lower = norm_certificate(body, norm, n)
    if n >= N:
        return WidthEstimate(n, 0.0, 0.0, "lemma2", "exhaustive", Subspace.full(N), seed, tol,
                             time.perf_counter() - t0, "full")
    U = _half_vertices(body, 64)
    if n == 0:
        return WidthEstimate(0, lower, float(np.max(norm(U))), "lemma2", "exhaustive",
                             Subspace.zero(N), seed, tol, time.perf_counter() - t0, "zero")
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, N]))
    bases = rng.standard_normal((starts, N, n))
    short, coef = refine_subspaces(U, norm, bases, stages=(30.0,), maxiter=short_iter)
    # the hard max at the current coefficients bounds each start's deviation
    score = np.max(np.asarray(norm(U[None] - coef @ np.swapaxes(short, 1, 2))), axis=1)
    best_idx = np.argsort(score, kind="stable")[:keep]
    full, _ = refine_subspaces(U, norm, short[best_idx], stages=(10.0, 100.0, 1000.0, 10000.0),
                               maxiter=400)
    best_val, best_sub = math.inf, None
    for b in full:
        sub = Subspace(b, orthonormal=True)
        val = deviation(body, sub, norm, "exact", tol=tol)
        if val < best_val:
            best_val, best_sub = val, sub
    return WidthEstimate(n, lower, best_val, "lemma2", "exhaustive", best_sub, seed, tol,
                         time.perf_counter() - t0, "multistart")
