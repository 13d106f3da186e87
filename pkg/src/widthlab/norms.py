"""Weighted and mixed norms, block partitions and products of octahedra.

A product of octahedra is the set of x in R^N with sum_{i in block s} |x_i| <= 1
for every block s. Its extreme points put a single +-1 in every block.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

DEFAULT_ENUMERATION_CAP = 10**6


class InputError(ValueError):
    """Malformed problem data (dimensions, weights, partitions)."""


class EnumerationCapError(InputError):
    """Vertex count exceeds the enumeration cap; use sample_vertices instead."""


def weight_vector(w, n: int | None = None) -> np.ndarray:
    w = np.array(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InputError("weights must be a nonempty 1-d sequence")
    if n is not None and w.size != n:
        raise InputError(f"expected {n} weights, got {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InputError("weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise InputError("at least one weight must be positive")
    w.setflags(write=False)
    return w


@dataclass(frozen=True)
class NormComponent:
    """scale * (sum_i w_i |x_i|^q)^(1/q); for q = inf, scale * max_i |x_i|."""

    q: float
    weights: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        q = float(self.q)
        if not (q >= 1):
            raise InputError(f"exponent q must lie in [1, inf], got {self.q}")
        object.__setattr__(self, "q", q)
        w = weight_vector(self.weights)
        if math.isinf(q) and not np.all(w == 1.0):
            raise InputError("q=inf components take unit weights")
        object.__setattr__(self, "weights", w)
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise InputError("scale must be finite and >= 0")
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def dim(self) -> int:
        return self.weights.size

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate along the last axis."""
        a = np.abs(np.asarray(x, dtype=float))
        if math.isinf(self.q):
            return self.scale * a.max(axis=-1)
        if self.q == 1:
            return self.scale * (a * self.weights).sum(axis=-1)
        if self.q == 2:
            return self.scale * np.sqrt((a * a * self.weights).sum(axis=-1))
        return self.scale * ((a**self.q) * self.weights).sum(axis=-1) ** (1.0 / self.q)

    def dual(self, z: np.ndarray) -> float:
        """Dual norm of a single vector; inf where z charges a zero weight."""
        z = np.abs(np.asarray(z, dtype=float))
        if self.scale == 0:
            return math.inf if np.any(z > 0) else 0.0
        if math.isinf(self.q):
            return float(z.sum() / self.scale)
        nz = z > 0
        if np.any(nz & (self.weights == 0)):
            return math.inf
        w, z = self.weights[nz], z[nz]
        if z.size == 0:
            return 0.0
        if self.q == 1:
            return float(np.max(z / w) / self.scale)
        qq = self.q / (self.q - 1.0)
        return float((np.sum(w ** (-qq / self.q) * z**qq)) ** (1.0 / qq) / self.scale)

    def dominated_l2_weights(self) -> np.ndarray:
        """Weights w' with ||x||_{2,w'} <= this component for every x.

        q >= 2 uses the power-mean inequality under the normalized weights,
        q < 2 uses ||y||_q >= ||y||_2 with y_i = w_i^(1/q) x_i.
        """
        s2 = self.scale**2
        if math.isinf(self.q):
            return np.full(self.dim, s2 / self.dim)
        if self.q >= 2:
            total = self.weights.sum()
            return s2 * total ** (2.0 / self.q - 1.0) * self.weights
        return s2 * self.weights ** (2.0 / self.q)


@dataclass(frozen=True)
class MixedNorm:
    """Maximum of finitely many weighted l_q components sharing one dimension."""

    components: tuple[NormComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InputError("a mixed norm needs at least one component")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise InputError(f"components disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def weighted(cls, q: float, weights, scale: float = 1.0) -> "MixedNorm":
        return cls((NormComponent(q, weights, scale),))

    @classmethod
    def lq(cls, q: float, n: int) -> "MixedNorm":
        return cls.weighted(q, np.ones(n))

    @classmethod
    def with_sup(cls, q: float, weights, h: float) -> "MixedNorm":
        """max(||x||_{q,w}, h ||x||_inf)."""
        weights = weight_vector(weights)
        return cls((NormComponent(q, weights), NormComponent(math.inf, np.ones(weights.size), h)))

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def is_weighted_l2(self) -> bool:
        return len(self.components) == 1 and self.components[0].q == 2

    @property
    def sup_scale(self) -> float | None:
        """Largest scale h among q=inf components, None if there is none."""
        hs = [c.scale for c in self.components if math.isinf(c.q)]
        return max(hs) if hs else None

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise InputError(f"vector of length {x.shape[-1]} for a norm on R^{self.dim}")
        vals = np.max([c(x) for c in self.components], axis=0)
        return float(vals) if np.ndim(vals) == 0 else vals

    def restrict(self, idx) -> "MixedNorm":
        """The same norm applied to the coordinates idx only."""
        idx = np.asarray(idx)
        comps = []
        for c in self.components:
            w = c.weights[idx]
            if not np.any(w > 0):
                continue
            comps.append(NormComponent(c.q, w, c.scale))
        if not comps:
            raise InputError("restriction leaves no positive weights")
        return MixedNorm(tuple(comps))

    def scaled(self, factor: float) -> "MixedNorm":
        return MixedNorm(tuple(NormComponent(c.q, c.weights, c.scale * factor) for c in self.components))


def eval_norm(x, norm: MixedNorm) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError("eval_norm takes a single vector")
    return norm(x)


@dataclass(frozen=True)
class BlockPartition:
    blocks: tuple[np.ndarray, ...]
    n: int = field(init=False)

    def __post_init__(self):
        blocks = tuple(np.array(b, dtype=np.intp) for b in self.blocks)
        if not blocks or any(b.ndim != 1 or b.size == 0 for b in blocks):
            raise InputError("every block must be a nonempty index list")
        flat = np.concatenate(blocks)
        n = flat.size
        if np.any(np.sort(flat) != np.arange(n)):
            raise InputError("blocks must be disjoint and cover 0..N-1")
        for b in blocks:
            b.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "BlockPartition":
        edges = np.cumsum([0, *sizes])
        return cls(tuple(np.arange(a, b) for a, b in zip(edges[:-1], edges[1:])))

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b.size for b in self.blocks])

    def block_of(self) -> np.ndarray:
        """block index of every coordinate"""
        out = np.empty(self.n, dtype=np.intp)
        for s, b in enumerate(self.blocks):
            out[b] = s
        return out


@dataclass(frozen=True)
class Vertex:
    """One (index, sign) pair per block."""

    indices: tuple[int, ...]
    signs: tuple[int, ...]

    def dense(self, n: int) -> np.ndarray:
        x = np.zeros(n)
        x[list(self.indices)] = self.signs
        return x

    def support(self) -> np.ndarray:
        return np.array(self.indices, dtype=np.intp)


@dataclass(frozen=True)
class OctahedronProduct:
    partition: BlockPartition
    radius: float = 1.0

    @classmethod
    def single(cls, n: int) -> "OctahedronProduct":
        return cls(BlockPartition.from_sizes([n]))

    @classmethod
    def from_sizes(cls, sizes) -> "OctahedronProduct":
        return cls(BlockPartition.from_sizes(sizes))

    @property
    def dim(self) -> int:
        return self.partition.n

    @property
    def vertex_count(self) -> int:
        return math.prod(2 * int(s) for s in self.partition.sizes)

    def contains(self, x, atol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return all(np.abs(x[b]).sum() <= self.radius + atol for b in self.partition.blocks)

    def scaled(self, c: float) -> "OctahedronProduct":
        return OctahedronProduct(self.partition, self.radius * c)


def nu_ratios(weights, partition: BlockPartition) -> np.ndarray:
    """Share of the total weight carried by each block."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise InputError("total weight must be positive")
    return np.array([w[b].sum() / total for b in partition.blocks])


def enumerate_vertices(body: OctahedronProduct, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[Vertex]:
    count = body.vertex_count
    if count > cap:
        raise EnumerationCapError(
            f"{count} vertices exceed the enumeration cap {cap}; use sample_vertices")
    per_block = [[(int(i), sg) for i in b for sg in (1, -1)] for b in body.partition.blocks]
    for choice in itertools.product(*per_block):
        yield Vertex(tuple(i for i, _ in choice), tuple(sg for _, sg in choice))


def vertex_matrix(body: OctahedronProduct, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """All vertices as rows, scaled by the body's radius."""
    count = body.vertex_count
    if count > cap:
        raise EnumerationCapError(
            f"{count} vertices exceed the enumeration cap {cap}; use sample_vertices")
    out = np.zeros((count, body.dim))
    for r, v in enumerate(enumerate_vertices(body, cap)):
        out[r, list(v.indices)] = v.signs
    return body.radius * out


def sample_vertex_arrays(body: OctahedronProduct, count: int, rng: np.random.Generator):
    """Vectorized sampler: (indices, signs) arrays of shape (count, m)."""
    sizes = body.partition.sizes
    pos = np.floor(rng.random((count, sizes.size)) * sizes).astype(np.intp)
    idx = np.empty_like(pos)
    for s, b in enumerate(body.partition.blocks):
        idx[:, s] = b[pos[:, s]]
    signs = np.where(rng.random((count, sizes.size)) < 0.5, 1, -1)
    return idx, signs


def sample_vertices(body: OctahedronProduct, count: int, seed: int) -> list[Vertex]:
    if count < 1:
        raise InputError("count must be >= 1")
    idx, signs = sample_vertex_arrays(body, count, np.random.default_rng(seed))
    return [Vertex(tuple(map(int, i)), tuple(map(int, s))) for i, s in zip(idx, signs)]


def load_problem(doc: dict) -> tuple[OctahedronProduct, MixedNorm, np.ndarray]:
    """Parse the JSON problem document.

    {"N": 4, "blocks": [[0, 1], [2, 3]], "weights": [...],
     "norm": {"components": [{"q": 2, "scale": 1, "weights": "shared"}]}}

    Block indices are 0-based. Omitted "blocks" means one block; omitted
    "weights" means unit weights.
    """
    try:
        n = int(doc["N"])
        blocks = doc.get("blocks") or [list(range(n))]
        weights = weight_vector(doc.get("weights", np.ones(n)), n)
        partition = BlockPartition(tuple(blocks))
        if partition.n != n:
            raise InputError(f"blocks cover {partition.n} coordinates, N={n}")
        comps = []
        for c in doc["norm"]["components"]:
            q = c["q"]
            q = math.inf if q in ("inf", "infinity", None) else float(q)
            cw = c.get("weights", "shared")
            if math.isinf(q):
                cw = np.ones(n) if cw == "shared" else cw
            elif cw == "shared":
                cw = weights
            comps.append(NormComponent(q, weight_vector(cw, n), float(c.get("scale", 1.0))))
        return OctahedronProduct(partition), MixedNorm(tuple(comps)), weights
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed problem document: {exc!r}") from exc
