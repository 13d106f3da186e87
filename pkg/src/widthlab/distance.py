"""Distance from a point to a subspace in a mixed norm.

The infimum of c -> ||x - Bc|| is a convex program. It is solved in epigraph
form (min t subject to t >= each norm component) with SLSQP, polished by a
Newton step on the KKT system of the active pieces, and certified by a dual
feasible point: for z orthogonal to the subspace, <z, x> / ||z||_* is a lower
bound on the distance.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog, minimize, nnls

from .norms import InputError, MixedNorm, NormComponent
from .subspaces import Subspace

DEFAULT_TOL = 1e-9


class DistanceResult(NamedTuple):
    distance: float
    minimizer: np.ndarray
    gap: float


class ConvergenceError(RuntimeError):
    """The solver did not certify the requested tolerance."""

    def __init__(self, message: str, best: float, gap: float):
        super().__init__(f"{message} (best value {best:.17g}, gap bound {gap:.3g})")
        self.best = best
        self.gap = gap


def _component_grad(comp: NormComponent, r: np.ndarray) -> np.ndarray:
    """A subgradient g of comp at r with <g, r> = comp(r)."""
    a = np.abs(r)
    if math.isinf(comp.q):
        g = np.zeros_like(r)
        i = int(np.argmax(a))
        g[i] = comp.scale * np.sign(r[i])
        return g
    if comp.q == 1:
        return comp.scale * comp.weights * np.sign(r)
    total = np.sum(comp.weights * a**comp.q)
    if total == 0:
        return np.zeros_like(r)
    return comp.scale * total ** (1.0 / comp.q - 1.0) * comp.weights * a ** (comp.q - 1) * np.sign(r)


def _pieces(norm: MixedNorm, r: np.ndarray, rel: float):
    """Smooth or linear pieces attaining the max within rel * value."""
    vals = [c(r) for c in norm.components]
    top = max(vals)
    cut = top - rel * max(top, 1e-300)
    out = []
    for comp, v in zip(norm.components, vals):
        if v < cut:
            continue
        if math.isinf(comp.q):
            for i in np.flatnonzero(comp.scale * np.abs(r) >= cut):
                out.append(("lin", int(i), comp.scale * float(np.sign(r[i])), comp))
        else:
            out.append(("q", comp))
    return out


def _piece_column(piece, r: np.ndarray) -> np.ndarray:
    if piece[0] == "lin":
        _, i, a, _ = piece
        g = np.zeros_like(r)
        g[i] = a
        return g
    comp = piece[1]
    g = _component_grad(comp, r)
    dn = comp.dual(g)
    return g / dn if dn > 0 and math.isfinite(dn) else g


def dual_lower_bound(x: np.ndarray, q: np.ndarray, norm: MixedNorm, r: np.ndarray) -> float:
    """Certified lower bound on dist(x, span q) from the residual r = x - q c.

    q must have orthonormal columns.
    """
    best = 0.0
    for rel in (1e-3, 1e-5, 1e-7, 1e-9, 1e-11, 1e-13):
        pcs = _pieces(norm, r, rel)
        cols = np.array([_piece_column(p, r) for p in pcs]).T
        k = cols.shape[1]
        if q.shape[1]:
            a = q.T @ cols
            big = 1e3
            lam, _ = nnls(np.vstack([a, big * np.ones((1, k))]), np.append(np.zeros(a.shape[0]), big))
        else:
            lam = np.ones(k)
        if lam.sum() <= 0:
            continue
        lam = lam / lam.sum()
        zg = cols @ lam
        delta = q @ (q.T @ zg) if q.shape[1] else np.zeros_like(zg)
        z = zg - delta
        # ||z||_* <= sum lam_j ||g_j||_* + ||delta||_*, and the dual of a max
        # of norms is below the dual of any single component.
        dual_g = sum(l * (1.0 if p[0] == "lin" else min(1.0, p[1].dual(c)))
                     for l, p, c in zip(lam, pcs, cols.T))
        dual_delta = min(c.dual(delta) for c in norm.components)
        denom = dual_g + dual_delta
        if not math.isfinite(denom) or denom <= 0:
            continue
        best = max(best, float(z @ r) / denom)
    return best


def _newton_polish(x, q, norm, c, iters=25):
    """Newton iterations on the KKT system of the active pieces."""
    r = x - q @ c
    pcs = _pieces(norm, r, 1e-6)
    if any(p[0] == "q" and p[1].q < 2 for p in pcs):
        return c
    n, k = q.shape[1], len(pcs)
    if k > n + 1 or k == 0:
        return c

    def evaluate(cv):
        rv = x - q @ cv
        f, grads, hs = [], [], []
        for p in pcs:
            if p[0] == "lin":
                _, i, a, _ = p
                f.append(a * rv[i])
                grads.append(-a * q[i])
                hs.append(None)
            else:
                comp = p[1]
                w, s, qq = comp.weights, comp.scale, comp.q
                ab = np.abs(rv)
                tot = np.sum(w * ab**qq)
                if tot <= 0:
                    raise FloatingPointError
                av = w * ab ** (qq - 1) * np.sign(rv)
                g = s * tot ** (1 / qq - 1) * av
                f.append(s * tot ** (1 / qq))
                grads.append(-q.T @ g)
                d = w * ab ** (qq - 2)
                h = s * (qq - 1) * (tot ** (1 / qq - 1) * (q.T * d) @ q
                                    - tot ** (1 / qq - 2) * np.outer(q.T @ av, q.T @ av))
                hs.append(h)
        return np.array(f), np.array(grads).T, hs

    try:
        f, g, hs = evaluate(c)
        big = 1e3
        lam, _ = nnls(np.vstack([g, big * np.ones((1, k))]), np.append(np.zeros(n), big))
        lam = lam / max(lam.sum(), 1e-300)
        t = f.max()
        for _ in range(iters):
            f, g, hs = evaluate(c)
            h = sum(l * hh for l, hh in zip(lam, hs) if hh is not None) if any(
                hh is not None for hh in hs) else np.zeros((n, n))
            res = np.concatenate([g @ lam, f - t, [lam.sum() - 1.0]])
            jac = np.zeros((n + k + 1, n + 1 + k))
            jac[:n, :n] = h
            jac[:n, n + 1:] = g
            jac[n:n + k, :n] = g.T
            jac[n:n + k, n] = -1.0
            jac[n + k, n + 1:] = 1.0
            step = np.linalg.lstsq(jac, -res, rcond=None)[0]
            c = c + step[:n]
            t += step[n]
            lam = lam + step[n + 1:]
            if np.linalg.norm(step) < 1e-15 * (1 + np.linalg.norm(c)):
                break
    except (FloatingPointError, np.linalg.LinAlgError):
        pass
    return c


def _slsqp(x, q, norm, c0, max_iter):
    n = q.shape[1]
    ones_col = np.ones((q.shape[0], 1))
    cons = []
    aux = [comp for comp in norm.components if comp.q == 1]
    n_aux = x.size if aux else 0

    def split(z):
        return z[:n], z[n:n + n_aux], z[-1]

    for comp in norm.components:
        if math.isinf(comp.q):
            s = comp.scale
            jac = np.hstack([np.vstack([s * q, -s * q]), np.zeros((2 * x.size, n_aux)),
                             np.vstack([ones_col, ones_col])])
            cons.append({"type": "ineq",
                         "fun": lambda z, s=s: np.concatenate([z[-1] - s * (x - q @ z[:n]),
                                                               z[-1] + s * (x - q @ z[:n])]),
                         "jac": lambda z, jac=jac: jac})
        elif comp.q == 1:
            s, w = comp.scale, comp.weights
            eye = np.eye(x.size)
            jac = np.hstack([np.vstack([-q, q]), np.vstack([eye, eye]), np.zeros((2 * x.size, 1))])
            cons.append({"type": "ineq",
                         "fun": lambda z: np.concatenate([z[n:n + n_aux] - (x - q @ z[:n]),
                                                          z[n:n + n_aux] + (x - q @ z[:n])]),
                         "jac": lambda z, jac=jac: jac})
            row = np.concatenate([np.zeros(n), -s * w, [1.0]])
            cons.append({"type": "ineq", "fun": lambda z, row=row: row @ z,
                         "jac": lambda z, row=row: row})
        else:
            def fun(z, comp=comp):
                return z[-1] - comp(x - q @ z[:n])

            def jac(z, comp=comp):
                g = _component_grad(comp, x - q @ z[:n])
                return np.concatenate([q.T @ g, np.zeros(n_aux), [1.0]])

            cons.append({"type": "ineq", "fun": fun, "jac": jac})
    r0 = x - q @ c0
    z0 = np.concatenate([c0, np.abs(r0)[:n_aux] if n_aux else [], [norm(r0) * (1 + 1e-9)]])
    obj_grad = np.zeros(z0.size)
    obj_grad[-1] = 1.0
    res = minimize(lambda z: z[-1], z0, jac=lambda z: obj_grad, constraints=cons,
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": max_iter})
    return split(res.x)[0]


def _polyhedral(x, q, norm):
    """Exact LP when every component is l_1 or l_inf; gap from the LP dual."""
    big_n, n = q.shape
    has_l1 = any(c.q == 1 for c in norm.components)
    n_aux = big_n if has_l1 else 0
    nv = n + n_aux + 1
    rows, rhs = [], []
    for comp in norm.components:
        s = comp.scale
        if math.isinf(comp.q):
            # +-s (x - q c) - t <= 0
            rows.append(np.hstack([-s * q, np.zeros((big_n, n_aux)), -np.ones((big_n, 1))]))
            rhs.append(-s * x)
            rows.append(np.hstack([s * q, np.zeros((big_n, n_aux)), -np.ones((big_n, 1))]))
            rhs.append(s * x)
        else:
            rows.append(np.concatenate([np.zeros(n), s * comp.weights, [-1.0]])[None, :])
            rhs.append(np.zeros(1))
    if n_aux:
        eye = np.eye(big_n)
        rows.append(np.hstack([-q, -eye, np.zeros((big_n, 1))]))
        rhs.append(-x)
        rows.append(np.hstack([q, -eye, np.zeros((big_n, 1))]))
        rhs.append(x)
    a_ub, b_ub = np.vstack(rows), np.concatenate(rhs)
    cost = np.zeros(nv)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * nv, method="highs")
    if res.status != 0:
        raise ConvergenceError(f"LP solver failed: {res.message}", math.nan, math.inf)
    c = res.x[:n]
    val = norm(x - q @ c)
    dual_obj = float(b_ub @ res.ineqlin.marginals)
    return c, val, max(val - dual_obj, 0.0)


def distance_to_subspace(x, subspace: Subspace, norm: MixedNorm, tol: float = DEFAULT_TOL,
                         max_iter: int = 500) -> DistanceResult:
    """inf over y in the subspace of ||x - y||, with its minimizer.

    Raises ConvergenceError when the certified gap stays above tol.
    """
    if not tol > 0:
        raise InputError("tol must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (norm.dim,) or subspace.ambient != norm.dim:
        raise InputError("dimension mismatch between point, subspace and norm")
    q = subspace.orthobasis()
    if q.shape[1] == 0:
        return DistanceResult(norm(x), np.zeros_like(x), 0.0)

    if norm.is_weighted_l2:
        comp = norm.components[0]
        sw = np.sqrt(comp.weights)
        c = np.linalg.lstsq(q * sw[:, None], x * sw, rcond=None)[0]
        y = q @ c
        val = norm(x - y)
        gap = val - dual_lower_bound(x, q, norm, x - y)
        return DistanceResult(val, y, max(gap, 0.0))

    if all(c.q == 1 or math.isinf(c.q) for c in norm.components):
        c, val, gap = _polyhedral(x, q, norm)
        if gap > tol:
            raise ConvergenceError("LP duality gap above tolerance", val, gap)
        return DistanceResult(val, q @ c, gap)

    # starting point: least squares in the first finite component's weights
    finite = [c for c in norm.components if not math.isinf(c.q)]
    sw = np.sqrt(finite[0].weights) if finite else np.ones_like(x)
    c_ls = np.linalg.lstsq(q * sw[:, None], x * sw, rcond=None)[0]
    scale = max(norm(x), 1e-300)
    if norm(x - q @ c_ls) <= 1e-14 * scale:
        y = q @ c_ls
        return DistanceResult(norm(x - y), y, norm(x - y))

    best_c, best_val, best_gap = c_ls, norm(x - q @ c_ls), math.inf
    start = c_ls
    for _ in range(3):
        c = _slsqp(x, q, norm, start, max_iter)
        c_pol = _newton_polish(x, q, norm, c)
        for cand in (c, c_pol):
            if not np.all(np.isfinite(cand)):
                continue
            val = norm(x - q @ cand)
            if val <= best_val + 1e-15 * scale or val < best_val:
                lb = dual_lower_bound(x, q, norm, x - q @ cand)
                gap = max(val - lb, 0.0)
                if val < best_val - 1e-15 * scale or gap < best_gap:
                    best_c, best_val, best_gap = cand, val, gap
        if best_gap <= tol:
            break
        start = best_c + 1e-6 * np.random.default_rng(len(x)).standard_normal(best_c.size)
    if best_gap > tol:
        raise ConvergenceError("distance solver did not reach tolerance", best_val, best_gap)
    y = q @ best_c
    return DistanceResult(best_val, y, best_gap)
