"""Daubechies wavelets on dyadic grids, sequence norms, and Besov-ball samplers.

Wavelets are indexed by T_m = {(k, j): 0 <= k < m, 1 <= j <= 2^k} and the
coefficients used throughout are x_{k,j} = 2^{k/2} <f, psi_{k,j}>, so that
f = sum x_{k,j} 2^{-k/2} psi_{k,j}. Inner products and L_p norms are grid
sums over a dyadic grid of step 2^-G.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import comb

from .norms import InputError

MAX_R0 = 10


class CascadeError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# filters and tables


def daubechies_filter(r0: int) -> np.ndarray:
    """Minimum-phase low-pass filter with r0 vanishing moments; sums to sqrt 2.

    Spectral factorization of |H|^2 = cos^(2 r0)(w/2) P(sin^2(w/2)) with
    P(y) = sum_k C(r0-1+k, k) y^k; roots inside the unit circle are kept.
    """
    if not 1 <= r0 <= MAX_R0:
        raise InputError(f"r0 must lie in [1, {MAX_R0}]")
    poly = np.array([1.0])
    for _ in range(r0):
        poly = np.convolve(poly, [0.5, 0.5])
    if r0 > 1:
        p_coef = [comb(r0 - 1 + k, k, exact=True) for k in range(r0)]
        for y in np.roots(p_coef[::-1]):
            # (2 - z - 1/z)/4 = y  <=>  z^2 - (2 - 4y) z + 1 = 0
            zs = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
            z = zs[np.argmin(np.abs(zs))]
            poly = np.convolve(poly, [1.0, -z])
    h = np.real(poly)
    return math.sqrt(2.0) * h / h.sum()


def highpass(h: np.ndarray) -> np.ndarray:
    """g_k = (-1)^k h_{L-k}."""
    L = h.size - 1
    return np.array([(-1) ** k * h[L - k] for k in range(h.size)])


def _phi_at_integers(h: np.ndarray) -> np.ndarray:
    """phi(0..L) from the eigenvector of M_ij = sqrt2 h_{2i-j} for eigenvalue 1."""
    L = h.size - 1
    M = np.zeros((L + 1, L + 1))
    for i in range(L + 1):
        for j in range(L + 1):
            if 0 <= 2 * i - j <= L:
                M[i, j] = math.sqrt(2.0) * h[2 * i - j]
    vals, vecs = np.linalg.eig(M)
    k = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[k] - 1.0) > 1e-8:
        raise CascadeError("refinement matrix has no eigenvalue 1")
    v = np.real(vecs[:, k])
    if abs(v.sum()) < 1e-12:
        raise CascadeError("integer samples of phi cannot be normalized")
    return v / v.sum()


def cascade(h: np.ndarray, J: int) -> np.ndarray:
    """phi at t = i 2^-J on [0, L], refining exact integer values level by level."""
    L = h.size - 1
    if L == 1:
        phi = np.zeros(2**J + 1)
        phi[:-1] = 1.0
        return phi
    phi = _phi_at_integers(h)
    s2 = math.sqrt(2.0)
    for lev in range(1, J + 1):
        new = np.zeros(L * 2**lev + 1)
        new[::2] = phi
        # odd points: phi(t) = sqrt2 sum_k h_k phi(2t - k), 2t - k on the old grid
        odd = np.arange(1, new.size, 2)
        for k, hk in enumerate(h):
            pos = odd - k * 2 ** (lev - 1)  # 2t - k in units of 2^-(lev-1)
            ok = (pos >= 0) & (pos < phi.size)
            new[odd[ok]] += s2 * hk * phi[pos[ok]]
        if not np.all(np.isfinite(new)):
            raise CascadeError("cascade produced non-finite values")
        phi = new
    return phi


@dataclass(frozen=True)
class WaveletSystem:
    """phi and psi sampled at step 2^-J on their common support [0, 2 r0 - 1]."""

    r0: int
    J: int
    h: np.ndarray
    g: np.ndarray
    phi: np.ndarray
    psi: np.ndarray

    @property
    def support_length(self) -> int:
        return self.h.size - 1

    def table(self, which: str) -> np.ndarray:
        return self.phi if which == "phi" else self.psi


def build_wavelet(r0: int = 4, J: int = 12) -> WaveletSystem:
    if not 8 <= J <= 16:
        raise InputError("J must lie in [8, 16]")
    h = daubechies_filter(r0)
    g = highpass(h)
    phi = cascade(h, J)
    L = h.size - 1
    psi = np.zeros_like(phi)
    idx = np.arange(phi.size)
    for k, gk in enumerate(g):
        pos = 2 * idx - k * 2**J
        ok = (pos >= 0) & (pos < phi.size)
        psi[ok] += math.sqrt(2.0) * gk * phi[pos[ok]]
    for arr in (h, g, phi, psi):
        arr.setflags(write=False)
    ws = WaveletSystem(r0, J, h, g, phi, psi)
    assert psi.size == L * 2**J + 1
    return ws


def filter_residuals(h: np.ndarray) -> dict:
    """Deviations from orthonormality, normalization and vanishing moments."""
    L = h.size - 1
    shifts = [abs(float(np.dot(h[2 * m:], h[:h.size - 2 * m])) - (1.0 if m == 0 else 0.0))
              for m in range((L + 1) // 2)]
    g = highpass(h)
    k = np.arange(h.size, dtype=float)
    r0 = h.size // 2
    moments = [abs(float(np.sum(g * k**j))) / max(1.0, float(np.sum(np.abs(g) * k**j)))
               for j in range(r0)]
    return {"orthonormality": max(shifts), "sum": abs(float(h.sum()) - math.sqrt(2.0)),
            "moments": max(moments)}


# --------------------------------------------------------------------------
# grids and indices


@dataclass(frozen=True)
class DyadicGrid:
    """Points start + i 2^-level on [start, stop]."""

    level: int
    start: int
    stop: int

    @cached_property
    def t(self) -> np.ndarray:
        return self.start + np.arange((self.stop - self.start) * 2**self.level + 1) / 2**self.level

    @property
    def step(self) -> float:
        return 2.0 ** -self.level

    @classmethod
    def for_system(cls, ws: WaveletSystem, level: int | None = None) -> "DyadicGrid":
        """[0, L + 1]: holds phi_{0,0} and every psi_{k,j} with (k, j) in T."""
        return cls(ws.J if level is None else level, 0, ws.support_length + 1)


@dataclass(frozen=True)
class SequenceIndex:
    """T_m: levels 0..m-1 with 2^k positions each, flattened level by level."""

    m: int

    def __post_init__(self):
        if self.m < 0:
            raise InputError("m must be >= 0")

    @property
    def size(self) -> int:
        return 2**self.m - 1

    def offset(self, k: int) -> int:
        return 2**k - 1

    def level_slice(self, k: int) -> slice:
        return slice(2**k - 1, 2**(k + 1) - 1)

    @property
    def level_of(self) -> np.ndarray:
        return np.concatenate([np.full(2**k, k) for k in range(self.m)]) if self.m else np.zeros(0, int)

    def pairs(self) -> list[tuple[int, int]]:
        return [(k, j) for k in range(self.m) for j in range(1, 2**k + 1)]

    def flat(self, k: int, j: int) -> int:
        if not (0 <= k < self.m and 1 <= j <= 2**k):
            raise InputError(f"({k}, {j}) is not in T_{self.m}")
        return 2**k - 1 + (j - 1)


@dataclass(frozen=True)
class SequenceVector:
    index: SequenceIndex
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.index.size:
            raise InputError(f"expected {self.index.size} values, got {v.size}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def level(self, k: int) -> np.ndarray:
        return self.values[self.index.level_slice(k)]

    def to_json(self) -> dict:
        return {"m": self.index.m, "levels": [self.level(k).tolist() for k in range(self.index.m)]}

    @classmethod
    def from_json(cls, doc: dict) -> "SequenceVector":
        m = int(doc["m"])
        levels = doc["levels"]
        if len(levels) != m or any(len(lv) != 2**k for k, lv in enumerate(levels)):
            raise InputError("levels must have sizes 1, 2, 4, ...")
        return cls(SequenceIndex(m), np.concatenate([np.asarray(lv, float) for lv in levels]) if m else [])


# --------------------------------------------------------------------------
# evaluation on grids


def _check_resolution(ws: WaveletSystem, grid: DyadicGrid, k_max: int):
    if grid.level < k_max + 4:
        raise InputError(f"grid level {grid.level} is too coarse for wavelet level {k_max} "
                         f"(needs >= {k_max + 4})")
    if grid.level > ws.J:
        raise InputError(f"grid level {grid.level} is finer than the cascade depth {ws.J}")


def _sample(table: np.ndarray, J: int, arg_units: np.ndarray, units_level: int) -> np.ndarray:
    """table value at arg = arg_units 2^-units_level (units_level <= J), zero off support."""
    pos = arg_units * 2 ** (J - units_level)
    out = np.zeros(pos.shape)
    ok = (pos >= 0) & (pos < table.size)
    out[ok] = table[pos[ok]]
    return out


def wavelet_samples(ws: WaveletSystem, grid: DyadicGrid, k: int, j: int) -> np.ndarray:
    """psi_{k,j}(t) = 2^{k/2} psi(2^k t - j) on the grid."""
    _check_resolution(ws, grid, k)
    i = np.arange(grid.t.size, dtype=np.int64)
    # 2^k t - j in units of 2^-(G-k)
    units = grid.start * 2**grid.level + i - j * 2 ** (grid.level - k)
    return 2 ** (k / 2) * _sample(ws.psi, ws.J, units, grid.level - k)


def scaling_samples(ws: WaveletSystem, grid: DyadicGrid, j: int) -> np.ndarray:
    """phi_{0,j}(t) = phi(t - j) on the grid."""
    _check_resolution(ws, grid, 0)
    i = np.arange(grid.t.size, dtype=np.int64)
    units = (grid.start - j) * 2**grid.level + i
    return _sample(ws.phi, ws.J, units, grid.level)


def synthesis_matrix(ws: WaveletSystem, index: SequenceIndex, grid: DyadicGrid) -> np.ndarray:
    """Column (k, j) holds psi_{k,j} on the grid."""
    _check_resolution(ws, grid, index.m - 1)
    cols = [wavelet_samples(ws, grid, k, j) for k, j in index.pairs()]
    return np.stack(cols, axis=1) if cols else np.zeros((grid.t.size, 0))


def scaling_range(ws: WaveletSystem, grid: DyadicGrid) -> range:
    """Shifts j whose phi_{0,j} support meets the grid interval."""
    return range(grid.start - ws.support_length + 1, grid.stop)


def inner(f: np.ndarray, g: np.ndarray, grid: DyadicGrid) -> np.ndarray:
    """Grid rule <f, g> = 2^-G sum f(t_i) g(t_i)."""
    return grid.step * (np.asarray(g).T @ np.asarray(f))


def lp_norm(f: np.ndarray, grid: DyadicGrid, p: float, normalized: bool = False) -> float:
    """L_p norm by the grid rule; normalized divides the measure by the interval length."""
    f = np.asarray(f, dtype=float)
    scale = grid.step / ((grid.stop - grid.start) if normalized else 1.0)
    if math.isinf(p):
        return float(np.abs(f).max()) if f.size else 0.0
    return float((scale * np.sum(np.abs(f) ** p)) ** (1.0 / p))


def analyze(f, ws: WaveletSystem, index: SequenceIndex, grid: DyadicGrid | None = None) -> SequenceVector:
    """x_{k,j} = 2^{k/2} <f, psi_{k,j}> by the grid rule.

    f is a callable or an array of samples on grid.
    """
    grid = grid or DyadicGrid.for_system(ws)
    vals = f(grid.t) if callable(f) else np.asarray(f, dtype=float)
    if vals.shape != grid.t.shape:
        raise InputError("samples do not match the grid")
    S = synthesis_matrix(ws, index, grid)
    coef = inner(vals, S, grid)
    return SequenceVector(index, 2 ** (index.level_of / 2) * coef)


def synthesize(x: SequenceVector, ws: WaveletSystem, grid: DyadicGrid | None = None) -> np.ndarray:
    """f = sum x_{k,j} 2^{-k/2} psi_{k,j} sampled on the grid."""
    grid = grid or DyadicGrid.for_system(ws)
    S = synthesis_matrix(ws, x.index, grid)
    return S @ (x.values * 2 ** (-x.index.level_of / 2))


def gram_matrix(ws: WaveletSystem, index: SequenceIndex, grid: DyadicGrid | None = None) -> np.ndarray:
    grid = grid or DyadicGrid.for_system(ws)
    S = synthesis_matrix(ws, index, grid)
    return grid.step * (S.T @ S)


def function_csv_rows(f: np.ndarray, grid: DyadicGrid):
    return list(zip(grid.t.tolist(), np.asarray(f, dtype=float).tolist()))


# --------------------------------------------------------------------------
# sequence norms


def sequence_norm(x: SequenceVector, sigma: float, p: float, theta: float) -> float:
    """(sum_k 2^{k sigma theta} ||x[k]||_p^theta)^(1/theta); sup over k for theta = inf."""
    if p < 1 or theta < 1:
        raise InputError("p and theta must be >= 1")
    m = x.index.m
    if m == 0:
        return 0.0
    lv = np.array([np.linalg.norm(x.level(k), ord=p) if x.level(k).size else 0.0 for k in range(m)])
    terms = 2.0 ** (np.arange(m) * sigma) * lv
    if math.isinf(theta):
        return float(terms.max())
    return float(np.sum(terms**theta) ** (1.0 / theta))


def discrete_besov_norm(f, ws: WaveletSystem, r: float, p: float, theta: float,
                        index: SequenceIndex, grid: DyadicGrid | None = None) -> float:
    """||(<f, phi_{0,j}>)_j||_p + ||(<f, psi_{k,j}>)||_{l^sigma_{p,theta}}, sigma = r + 1/2 - 1/p."""
    if not 0 < r < ws.r0:
        raise InputError(f"need 0 < r < r0 = {ws.r0}")
    grid = grid or DyadicGrid.for_system(ws)
    vals = f(grid.t) if callable(f) else np.asarray(f, dtype=float)
    phis = np.stack([scaling_samples(ws, grid, j) for j in scaling_range(ws, grid)], axis=1)
    a = inner(vals, phis, grid)
    x = analyze(vals, ws, index, grid)
    raw = SequenceVector(index, x.values * 2 ** (-index.level_of / 2))
    sigma = r + 0.5 - 1.0 / p
    return float(np.linalg.norm(a, ord=p) + sequence_norm(raw, sigma, p, theta))


@dataclass
class DiscretizationReport:
    p: float
    left: float
    mid: float
    right: float
    left_over_mid: float
    mid_over_right: float


def lp_discretization_check(x: SequenceVector, ws: WaveletSystem, p: float,
                            grid: DyadicGrid | None = None) -> DiscretizationReport:
    """left = ||x||_{l^{-1/p}_{p,p}}, mid = ||f||_p, right = ||x||_{l^{-1/p}_{p,2}}."""
    if not 2 <= p < math.inf:
        raise InputError("p must lie in [2, inf)")
    grid = grid or DyadicGrid.for_system(ws)
    f = synthesize(x, ws, grid)
    mid = lp_norm(f, grid, p)
    left = sequence_norm(x, -1.0 / p, p, p)
    right = sequence_norm(x, -1.0 / p, p, 2.0)
    return DiscretizationReport(p, left, mid, right, left / mid if mid > 0 else math.nan,
                                mid / right if right > 0 else math.nan)


@dataclass
class DiscretizationBand:
    p: float
    samples: int
    seed: int
    left_over_mid: tuple[float, float]
    mid_over_right: tuple[float, float]


def discretization_band(ws: WaveletSystem, m: int, p: float, samples: int, seed: int,
                        grid: DyadicGrid | None = None) -> DiscretizationBand:
    """Min and max of both ratios over Gaussian coefficient vectors on T_m."""
    index = SequenceIndex(m)
    grid = grid or DyadicGrid.for_system(ws)
    rng = np.random.default_rng(seed)
    a, b = [], []
    for _ in range(samples):
        rep = lp_discretization_check(SequenceVector(index, rng.standard_normal(index.size)), ws, p, grid)
        a.append(rep.left_over_mid)
        b.append(rep.mid_over_right)
    return DiscretizationBand(p, samples, seed, (min(a), max(a)), (min(b), max(b)))


# --------------------------------------------------------------------------
# balls b^sigma_{p,theta}(T_m)


@dataclass(frozen=True)
class BesovBallSpec:
    sigma: float
    p: float
    theta: float
    index: SequenceIndex


def sample_ball(spec: BesovBallSpec, count: int, seed: int, kind: str = "boundary") -> list[SequenceVector]:
    """Random points of the unit ball of l^sigma_{p,theta}(T_m).

    boundary: Laplace draws rescaled to norm 1. interior: boundary points
    times U^(1/size). extreme (sigma = 0, p = 1 only): one signed unit per
    level for theta = inf, a single signed unit for theta = 1.
    """
    if count < 1:
        raise InputError("count must be >= 1")
    idx = spec.index
    rng = np.random.default_rng(seed)
    out = []
    if kind == "extreme":
        if spec.sigma != 0 or spec.p != 1 or spec.theta not in (1, math.inf):
            raise InputError("extreme points are generated for b^0_{1,1} and b^0_{1,inf}")
        for _ in range(count):
            x = np.zeros(idx.size)
            signs = rng.choice([-1.0, 1.0], size=idx.m)
            if math.isinf(spec.theta):
                for k in range(idx.m):
                    x[idx.offset(k) + rng.integers(0, 2**k)] = signs[k]
            else:
                x[rng.integers(0, idx.size)] = signs[0]
            out.append(SequenceVector(idx, x))
        return out
    if kind not in ("boundary", "interior"):
        raise InputError(f"unknown kind {kind!r}")
    for _ in range(count):
        x = rng.laplace(size=idx.size)
        v = SequenceVector(idx, x)
        x = x / sequence_norm(v, spec.sigma, spec.p, spec.theta)
        if kind == "interior":
            x = x * rng.random() ** (1.0 / max(idx.size, 1))
        out.append(SequenceVector(idx, x))
    return out
