"""The constraint map A, its adjoint, the Gram matrix AA^T, the spectral
bound lambda_max(A^T A), and the lifting operator T with T T^T = (1/R) I - AA^T.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .linalg import SymMat

# Dense eigendecomposition of the m-by-m Gram is used up to this many
# constraints; beyond it the spectral bound falls back to power iteration.
_GRAM_EIG_LIMIT = 2000
_POWER_RTOL = 1e-8
_POWER_INFLATION = 1.0 + 1e-6


@dataclass(frozen=True)
class ConstraintMap:
    """Ordered constraint matrices A_1..A_m realizing X -> (<A_i, X>)_i."""

    mats: tuple[SymMat, ...]

    def __post_init__(self):
        if len(self.mats) < 1:
            raise ValueError("a constraint map needs at least one matrix")
        n = self.mats[0].n
        for i, mat in enumerate(self.mats):
            if mat.n != n:
                raise ValueError(
                    f"constraint matrix {i} has dimension {mat.n}, expected {n}"
                )

    @property
    def m(self) -> int:
        return len(self.mats)

    @property
    def n(self) -> int:
        return self.mats[0].n

    @cached_property
    def stack(self) -> np.ndarray:
        """(m, n, n) dense stack of the constraint matrices."""
        return np.stack([mat.to_dense() for mat in self.mats])

    @cached_property
    def stack_flat(self) -> np.ndarray:
        """(m, n*n) row-vectorized view of ``stack``."""
        return self.stack.reshape(self.m, -1)


def apply_A(cmap: ConstraintMap, x: SymMat) -> np.ndarray:
    """A(X) = (<A_1, X>, ..., <A_m, X>)."""
    if x.n != cmap.n:
        raise ValueError(f"dimension mismatch: X has n={x.n}, map has n={cmap.n}")
    return apply_A_dense(cmap, x.to_dense())


def apply_A_dense(cmap: ConstraintMap, x: np.ndarray) -> np.ndarray:
    return cmap.stack_flat @ x.ravel()


def apply_At(cmap: ConstraintMap, y: np.ndarray) -> SymMat:
    """Adjoint A^T(y) = sum_i y_i A_i."""
    y = np.asarray(y, dtype=float)
    if y.shape != (cmap.m,):
        raise ValueError(f"length mismatch: y has shape {y.shape}, map has m={cmap.m}")
    packed = np.zeros_like(cmap.mats[0].packed)
    for yi, mat in zip(y, cmap.mats):
        packed += yi * mat.packed
    return SymMat(cmap.n, packed)


def apply_At_dense(cmap: ConstraintMap, y: np.ndarray) -> np.ndarray:
    return np.tensordot(y, cmap.stack, axes=1)


def gram(cmap: ConstraintMap) -> np.ndarray:
    """m-by-m Gram matrix G_ij = <A_i, A_j>; symmetric PSD."""
    g = cmap.stack_flat @ cmap.stack_flat.T
    return 0.5 * (g + g.T)


def lambda_max_AAt(cmap: ConstraintMap) -> float:
    """Largest eigenvalue of AA^T (equals lambda_max(A^T A)); nonnegative.

    Computed exactly from the Gram matrix for m <= 2000; larger maps use
    power iteration whose estimate is inflated by a small safety factor so
    the value stays an upper bound when used in stepsize limits.
    """
    g = gram(cmap)
    if cmap.m <= _GRAM_EIG_LIMIT:
        return max(0.0, float(np.linalg.eigvalsh(g)[-1]))
    return _power_iteration(g, _POWER_RTOL) * _POWER_INFLATION


def _power_iteration(g: np.ndarray, rtol: float, max_iters: int = 10000) -> float:
    rng = np.random.default_rng(0)
    v = rng.standard_normal(g.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iters):
        w = g @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        lam_new = float(v @ (g @ v))
        if abs(lam_new - lam) <= rtol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


@dataclass(frozen=True)
class LiftedOperator:
    """Matrix representation T of the lifting operator, with T T^T = S where
    S = (1/R) I - AA^T.

    T has m rows of length n^2 acting on plainly vectorized matrices; only
    the first m columns are nonzero.
    """

    T: np.ndarray
    R: float
    S: np.ndarray

    @property
    def m(self) -> int:
        return self.T.shape[0]

    @property
    def width(self) -> int:
        return self.T.shape[1]

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """T(v) for v in R^(n^2)."""
        return self.T @ vec

    def apply_t(self, w: np.ndarray) -> np.ndarray:
        """T^T(w) in R^(n^2)."""
        return self.T.T @ w


def build_T(cmap: ConstraintMap, R: float) -> LiftedOperator:
    """Construct T with T T^T = (1/R) I - AA^T.

    Requires R < 1/lambda_max(AA^T) strictly so S is positive definite; the
    rows are assembled from the eigendecomposition S = V diag(lam) V^T as
    T = [V diag(sqrt(lam)) | 0], zero-padded to width n^2.
    """
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    lam_max = lambda_max_AAt(cmap)
    if R * lam_max >= 1.0:
        raise ValueError(
            "stepsize product violates Lemma-style positivity: "
            f"R={R} is not strictly below 1/lambda_max={1.0 / lam_max}"
        )
    m, n = cmap.m, cmap.n
    if m > n * n:
        raise ValueError(f"need m <= n^2 to embed T, got m={m}, n^2={n * n}")
    s = (1.0 / R) * np.eye(m) - gram(cmap)
    vals, vecs = np.linalg.eigh(s)
    if vals[0] < -1e-12:
        raise ValueError(
            f"computed S has eigenvalue {vals[0]} below -1e-12; "
            "stepsize product violates positivity beyond roundoff"
        )
    vals = np.maximum(vals, 0.0)
    t = np.zeros((m, n * n))
    t[:, :m] = vecs * np.sqrt(vals)
    return LiftedOperator(T=t, R=float(R), S=s)
