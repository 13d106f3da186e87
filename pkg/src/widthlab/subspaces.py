"""Linear subspaces of R^N used as approximating spaces."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .norms import InputError


@dataclass(frozen=True)
class Subspace:
    """Column span of an (N, n) basis.

    ``blocks`` is set for block-diagonal subspaces: a tuple of
    (coordinate indices, local basis) pairs whose direct sum is the subspace.
    Several routines use it to split work coordinate-block by block.
    """

    basis: np.ndarray
    orthonormal: bool = False
    blocks: tuple[tuple[np.ndarray, np.ndarray], ...] | None = None

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        if b.ndim != 2:
            raise InputError("basis must be an (N, n) matrix")
        n = b.shape[1]
        if n and np.linalg.matrix_rank(b) < n:
            raise InputError("basis vectors are linearly dependent")
        if self.orthonormal and n and not np.allclose(b.T @ b, np.eye(n), atol=1e-10):
            raise InputError("basis flagged orthonormal but Gram matrix is not the identity")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def span(cls, vectors: Sequence[Sequence[float]], n_ambient: int | None = None) -> "Subspace":
        """Subspace spanned by a list of vectors (rows), stored orthonormalized."""
        v = np.asarray(vectors, dtype=float)
        if v.size == 0:
            if n_ambient is None:
                raise InputError("empty span needs the ambient dimension")
            return cls.zero(n_ambient)
        return cls.orthonormalized(v.T)

    @classmethod
    def orthonormalized(cls, basis: np.ndarray) -> "Subspace":
        basis = np.asarray(basis, dtype=float)
        if basis.shape[1] == 0:
            return cls(basis, orthonormal=True)
        if np.linalg.matrix_rank(basis) < basis.shape[1]:
            raise InputError("basis vectors are linearly dependent")
        q, _ = np.linalg.qr(basis)
        return cls(q, orthonormal=True)

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)), orthonormal=True)

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n), orthonormal=True)

    @classmethod
    def coordinate(cls, n: int, idx) -> "Subspace":
        idx = np.asarray(idx, dtype=np.intp)
        return cls(np.eye(n)[:, idx], orthonormal=True)

    @classmethod
    def random(cls, n: int, dim: int, rng: np.random.Generator) -> "Subspace":
        """Span of dim i.i.d. Gaussian vectors."""
        if not 0 <= dim <= n:
            raise InputError(f"cannot draw a {dim}-dimensional subspace of R^{n}")
        return cls.orthonormalized(rng.standard_normal((n, dim)))

    @classmethod
    def block_diagonal(cls, n: int, parts: Sequence[tuple[Sequence[int], np.ndarray]]) -> "Subspace":
        """Direct sum of local subspaces living on disjoint coordinate sets."""
        cols, kept = [], []
        for idx, local in parts:
            idx = np.array(idx, dtype=np.intp)
            local = np.asarray(local, dtype=float).reshape(idx.size, -1)
            if local.shape[1]:
                local = np.linalg.qr(local)[0]
            big = np.zeros((n, local.shape[1]))
            big[idx] = local
            cols.append(big)
            idx.setflags(write=False)
            local.setflags(write=False)
            kept.append((idx, local))
        basis = np.hstack(cols) if cols else np.zeros((n, 0))
        return cls(basis, orthonormal=True, blocks=tuple(kept))

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def orthobasis(self) -> np.ndarray:
        if self.orthonormal or self.dim == 0:
            return self.basis
        return np.linalg.qr(self.basis)[0]

    def projector(self) -> np.ndarray:
        q = self.orthobasis()
        return q @ q.T

    def contains(self, x, atol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        q = self.orthobasis()
        return bool(np.linalg.norm(x - q @ (q.T @ x)) <= atol * max(1.0, np.linalg.norm(x)))

    def aligned_with(self, blocks: Sequence[np.ndarray]) -> bool:
        """True when the block structure matches the given coordinate blocks."""
        if self.blocks is None or len(self.blocks) != len(blocks):
            return False
        return all(np.array_equal(np.sort(a), np.sort(b)) for (a, _), b in zip(self.blocks, blocks))
