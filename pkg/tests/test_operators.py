import numpy as np
import pytest

from pdhgsdp.linalg import SymMat, frobenius_inner
from pdhgsdp.operators import (
    ConstraintMap,
    apply_A,
    apply_At,
    apply_At_dense,
    build_T,
    gram,
    lambda_max_AAt,
)


def random_map(rng, m, n) -> ConstraintMap:
    return ConstraintMap(tuple(
        SymMat.from_dense(rng.standard_normal((n, n))) for _ in range(m)
    ))


def maxcut_map(n) -> ConstraintMap:
    mats = []
    for i in range(n):
        e = np.zeros((n, n))
        e[i, i] = 1.0
        mats.append(SymMat.from_dense(e))
    return ConstraintMap(tuple(mats))


class TestApplyA:
    def test_identity_pairing(self):
        cmap = ConstraintMap((SymMat.identity(2),))
        np.testing.assert_allclose(apply_A(cmap, SymMat.identity(2)), [2.0])

    def test_zero_input(self):
        rng = np.random.default_rng(0)
        cmap = random_map(rng, 3, 4)
        np.testing.assert_array_equal(apply_A(cmap, SymMat.zeros(4)), np.zeros(3))

    def test_maxcut_extracts_diagonal(self):
        rng = np.random.default_rng(1)
        x = SymMat.from_dense(rng.standard_normal((5, 5)))
        np.testing.assert_allclose(apply_A(maxcut_map(5), x), np.diag(x.to_dense()))

    def test_dimension_mismatch(self):
        cmap = ConstraintMap((SymMat.identity(3),))
        with pytest.raises(ValueError):
            apply_A(cmap, SymMat.identity(2))


class TestApplyAt:
    def test_unit_vector_selects_matrix(self):
        rng = np.random.default_rng(2)
        cmap = random_map(rng, 3, 4)
        out = apply_At(cmap, np.array([1.0, 0.0, 0.0]))
        np.testing.assert_array_equal(out.to_dense(), cmap.mats[0].to_dense())

    def test_zero_vector(self):
        rng = np.random.default_rng(3)
        cmap = random_map(rng, 2, 3)
        assert apply_At(cmap, np.zeros(2)).norm() == 0.0

    def test_length_mismatch(self):
        cmap = ConstraintMap((SymMat.identity(2),))
        with pytest.raises(ValueError):
            apply_At(cmap, np.zeros(2))

    def test_adjoint_identity(self):
        # <A(X), y> and <X, A^T(y)> computed through independent routes
        rng = np.random.default_rng(4)
        cmap = random_map(rng, 4, 5)
        for _ in range(50):
            x = SymMat.from_dense(rng.standard_normal((5, 5)))
            y = rng.standard_normal(4)
            lhs = float(apply_A(cmap, x) @ y)
            rhs = frobenius_inner(x, apply_At(cmap, y))
            tol = 1e-10 * (1.0 + x.norm() * np.linalg.norm(y))
            assert abs(lhs - rhs) <= tol


class TestGram:
    def test_single_identity(self):
        cmap = ConstraintMap((SymMat.identity(4),))
        np.testing.assert_allclose(gram(cmap), [[4.0]])

    def test_orthonormal_family(self):
        # E_11, E_22 and the normalized symmetric off-diagonal unit
        e1 = np.zeros((2, 2)); e1[0, 0] = 1.0
        e2 = np.zeros((2, 2)); e2[1, 1] = 1.0
        off = np.array([[0.0, 1.0], [1.0, 0.0]]) / np.sqrt(2.0)
        cmap = ConstraintMap(tuple(SymMat.from_dense(a) for a in (e1, e2, off)))
        np.testing.assert_allclose(gram(cmap), np.eye(3), atol=1e-15)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(5)
        cmap = random_map(rng, 4, 3)
        oracle = np.empty((4, 4))
        for i in range(4):
            for j in range(4):
                oracle[i, j] = frobenius_inner(cmap.mats[i], cmap.mats[j])
        np.testing.assert_allclose(gram(cmap), oracle, rtol=1e-12)

    def test_gram_psd(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            cmap = random_map(rng, 5, 4)
            assert np.linalg.eigvalsh(gram(cmap))[0] >= -1e-10


class TestLambdaMax:
    def test_single_identity(self):
        cmap = ConstraintMap((SymMat.identity(6),))
        assert lambda_max_AAt(cmap) == pytest.approx(6.0, rel=1e-12)

    def test_maxcut_is_one(self):
        assert lambda_max_AAt(maxcut_map(7)) == pytest.approx(1.0, rel=1e-13)

    def test_matches_lifted_power_iteration_oracle(self):
        # power iteration on X -> A^T(A(X)) over symmetric matrices
        rng = np.random.default_rng(7)
        cmap = random_map(rng, 5, 4)
        x = rng.standard_normal((4, 4))
        x = x + x.T
        lam = 0.0
        for _ in range(5000):
            ax = cmap.stack_flat @ x.ravel()
            x_next = apply_At_dense(cmap, ax)
            nrm = np.linalg.norm(x_next)
            x = x_next / nrm
            lam_new = float((cmap.stack_flat @ x.ravel()) @ (cmap.stack_flat @ x.ravel()))
            if abs(lam_new - lam) < 1e-12 * max(1.0, lam_new):
                lam = lam_new
                break
            lam = lam_new
        assert lambda_max_AAt(cmap) == pytest.approx(lam, rel=1e-8)


class TestBuildT:
    def test_single_constraint_unit_norm(self):
        a1 = SymMat.from_dense(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert frobenius_inner(a1, a1) == 1.0
        lifted = build_T(ConstraintMap((a1,)), R=0.5)
        np.testing.assert_allclose(lifted.S, [[1.0]])
        assert np.linalg.norm(lifted.T[0]) == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(lifted.T @ lifted.T.T, [[1.0]], rtol=1e-12)

    def test_boundary_R_rejected(self):
        cmap = ConstraintMap((SymMat.identity(3),))
        lam = lambda_max_AAt(cmap)
        with pytest.raises(ValueError):
            build_T(cmap, R=1.0 / lam)
        with pytest.raises(ValueError):
            build_T(cmap, R=-0.1)

    def test_certificates_random(self):
        rng = np.random.default_rng(8)
        cmap = random_map(rng, 6, 5)
        r = 0.9 / lambda_max_AAt(cmap)
        lifted = build_T(cmap, r)
        g = gram(cmap)
        s = (1.0 / r) * np.eye(6) - g
        tt = lifted.T @ lifted.T.T
        assert np.linalg.norm(tt - s) < 1e-10 * max(1.0, np.linalg.norm(s))
        assert np.linalg.norm(g + tt - (1.0 / r) * np.eye(6)) < 1e-9
        # S itself is positive semidefinite
        assert np.linalg.eigvalsh(s)[0] >= -1e-10

    def test_apply_matches_matrix(self):
        rng = np.random.default_rng(9)
        cmap = random_map(rng, 3, 3)
        lifted = build_T(cmap, 0.9 / lambda_max_AAt(cmap))
        v = rng.standard_normal(9)
        w = rng.standard_normal(3)
        np.testing.assert_allclose(lifted.apply(v), lifted.T @ v)
        np.testing.assert_allclose(lifted.apply_t(w), lifted.T.T @ w)


def test_constraint_map_validation():
    with pytest.raises(ValueError):
        ConstraintMap(())
    with pytest.raises(ValueError):
        ConstraintMap((SymMat.identity(2), SymMat.identity(3)))
