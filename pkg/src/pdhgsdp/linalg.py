"""Dense symmetric-matrix primitives.

Canonical symmetric storage, the Frobenius pairing, full symmetric
eigendecomposition, and a Lanczos routine for the algebraically largest
eigenpairs of a matrix-free symmetric operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class EigenError(RuntimeError):
    """Eigensolver failure. ``partial`` carries whatever state was computed."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


# Per-dimension caches: (rows, cols) of the upper triangle and the weight
# vector used by packed Frobenius sums (2 for off-diagonal slots, 1 on the
# diagonal).
_TRIU_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_WEIGHT_CACHE: dict[int, np.ndarray] = {}


def _triu_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    idx = _TRIU_CACHE.get(n)
    if idx is None:
        idx = np.triu_indices(n)
        _TRIU_CACHE[n] = idx
    return idx


def _packed_weights(n: int) -> np.ndarray:
    w = _WEIGHT_CACHE.get(n)
    if w is None:
        rows, cols = _triu_indices(n)
        w = np.where(rows == cols, 1.0, 2.0)
        _WEIGHT_CACHE[n] = w
    return w


@dataclass(frozen=True)
class SymMat:
    """Real symmetric n-by-n matrix with one stored value per unordered pair.

    Entries live in the packed upper triangle (row-major), so ``access(i, j)``
    and ``access(j, i)`` read the same slot and agree bit-for-bit.
    """

    n: int
    packed: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        expected = self.n * (self.n + 1) // 2
        if self.packed.shape != (expected,):
            raise ValueError(
                f"packed storage for n={self.n} must have shape ({expected},), "
                f"got {self.packed.shape}"
            )

    @classmethod
    def from_dense(cls, mat: np.ndarray) -> "SymMat":
        """Pack a square array, symmetrizing it as (M + M^T)/2 first."""
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        n = mat.shape[0]
        sym = 0.5 * (mat + mat.T)
        return cls(n, sym[_triu_indices(n)].copy())

    @classmethod
    def zeros(cls, n: int) -> "SymMat":
        return cls(n, np.zeros(n * (n + 1) // 2))

    @classmethod
    def identity(cls, n: int) -> "SymMat":
        packed = np.zeros(n * (n + 1) // 2)
        rows, cols = _triu_indices(n)
        packed[rows == cols] = 1.0
        return cls(n, packed)

    @classmethod
    def diag(cls, values) -> "SymMat":
        values = np.asarray(values, dtype=float)
        return cls.from_dense(np.diag(values))

    def to_dense(self) -> np.ndarray:
        """Unpack to a full array; both triangles are filled from the same
        storage slots, so the result is bitwise symmetric."""
        out = np.empty((self.n, self.n))
        idx = _triu_indices(self.n)
        out[idx] = self.packed
        out.T[idx] = self.packed
        return out

    def access(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        # offset of row i's diagonal slot in row-major packed upper triangle
        base = i * self.n - i * (i - 1) // 2
        return float(self.packed[base + (j - i)])

    def norm(self) -> float:
        """Frobenius norm."""
        w = _packed_weights(self.n)
        return math.sqrt(float(np.dot(w, self.packed * self.packed)))

    def __add__(self, other: "SymMat") -> "SymMat":
        self._check_dim(other)
        return SymMat(self.n, self.packed + other.packed)

    def __sub__(self, other: "SymMat") -> "SymMat":
        self._check_dim(other)
        return SymMat(self.n, self.packed - other.packed)

    def __mul__(self, scalar: float) -> "SymMat":
        return SymMat(self.n, self.packed * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SymMat":
        return SymMat(self.n, -self.packed)

    def _check_dim(self, other: "SymMat") -> None:
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenpairs sorted by non-increasing eigenvalue.

    ``eigvecs`` holds the unit eigenvectors as columns, ordered to match
    ``eigvals``. ``rank_computed`` is the number of returned pairs.
    """

    eigvals: np.ndarray
    eigvecs: np.ndarray
    rank_computed: int


def frobenius_inner(a: SymMat, b: SymMat) -> float:
    """<A, B> = sum_ij A_ij B_ij."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    w = _packed_weights(a.n)
    return float(np.dot(w, a.packed * b.packed))


def frobenius_inner_dense(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.einsum("ij,ij->", a, b))


def sym_eig(m: SymMat) -> SpectralDecomp:
    """Full eigendecomposition with eigenvalues in descending order."""
    dense = m.to_dense()
    if not np.all(np.isfinite(dense)):
        raise ValueError("matrix has non-finite entries")
    try:
        vals, vecs = np.linalg.eigh(dense)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"symmetric eigendecomposition failed: {exc}") from exc
    # eigh returns ascending order; flip to descending (stable reversal)
    return SpectralDecomp(vals[::-1].copy(), vecs[:, ::-1].copy(), m.n)


def _tridiag_eig(alphas: list[float], betas: list[float]):
    k = len(alphas)
    t = np.diag(np.asarray(alphas))
    if k > 1:
        off = np.asarray(betas[: k - 1])
        t += np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigh(t)


def lanczos_top_r(
    matvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    r: int,
    tol: float = 1e-9,
    max_restarts: int | None = None,
    seed: int = 0,
) -> SpectralDecomp:
    """Top-r eigenpairs of a symmetric operator given via matrix-vector
    products.

    Lanczos with full reorthogonalization. Ritz pairs are accepted once the
    residual bound |beta_k * s_k| falls below ``tol * max(1, |ritz_1|)`` for
    each of the r largest pairs; a breakdown (vanishing Lanczos vector, i.e.
    an exhausted invariant subspace) is handled by continuing with a fresh
    random vector orthogonalized against the basis.
    """
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    if max_restarts is None:
        max_restarts = max(5, n)
    rng = np.random.default_rng(seed)

    basis = np.empty((n, n))
    alphas: list[float] = []
    betas: list[float] = []
    restarts = 0

    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    basis[:, 0] = q

    j = 0
    while True:
        w = np.asarray(matvec(basis[:, j]), dtype=float)
        alphas.append(float(basis[:, j] @ w))
        w = w - alphas[j] * basis[:, j]
        if j > 0:
            w = w - betas[j - 1] * basis[:, j - 1]
        # full reorthogonalization, two passes
        for _ in range(2):
            w -= basis[:, : j + 1] @ (basis[:, : j + 1].T @ w)
        bnorm = float(np.linalg.norm(w))
        k = j + 1

        if k >= r:
            vals, vecs = _tridiag_eig(alphas, betas)
            top_resid = np.abs(bnorm * vecs[-1, k - r :])
            scale = max(1.0, abs(float(vals[-1])))
            if k == n or np.all(top_resid <= tol * scale):
                break

        if bnorm <= 1e-13 * max(1.0, abs(alphas[j])):
            # invariant subspace exhausted: continue from a fresh direction
            while True:
                restarts += 1
                if restarts > max_restarts:
                    partial = _ritz_pairs(basis, alphas, betas, min(r, k))
                    raise EigenError(
                        f"Lanczos exceeded {max_restarts} restarts", partial=partial
                    )
                w = rng.standard_normal(n)
                w -= basis[:, :k] @ (basis[:, :k].T @ w)
                bnorm = float(np.linalg.norm(w))
                if bnorm > 1e-8:
                    break
            betas.append(0.0)
        else:
            betas.append(bnorm)
        basis[:, k] = w / bnorm
        j = k

    return _ritz_pairs(basis, alphas, betas, r)


def _ritz_pairs(basis, alphas, betas, r) -> SpectralDecomp:
    k = len(alphas)
    vals, vecs = _tridiag_eig(alphas, betas)
    order = np.argsort(vals, kind="stable")[::-1][:r]
    ritz_vals = vals[order].copy()
    ritz_vecs = basis[:, :k] @ vecs[:, order]
    ritz_vecs /= np.linalg.norm(ritz_vecs, axis=0)
    return SpectralDecomp(ritz_vals, ritz_vecs, r)
