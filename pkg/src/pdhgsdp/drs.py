"""Non-stationary Douglas-Rachford splitting on the lifted inclusion, used as
an independent oracle for the PDHG engine.

The lifted variable is (Z, Z_hat) with Z symmetric n-by-n and Z_hat a plain
vector in R^(n^2) (the lifting operator T acts on vectorized matrices). One
splitting step with stepsizes (alpha_prev, alpha_k) and ratio
theta = alpha_k/alpha_prev is

    (F, F_hat) = J_f(Z, Z_hat; alpha_prev)          # PSD prox of <C, .>
    (V, V_hat) = (F, F_hat) + theta ((F, F_hat) - (Z, Z_hat))
    (G, G_hat) = J_g(V, V_hat)                      # affine projection
    (Z, Z_hat) <- (G, G_hat) + theta ((Z, Z_hat) - (F, F_hat))

The engine's trajectory must satisfy F^k = X^k and the correspondence
Z^{k+1} = X^k - alpha_k A^T(y^k), Z_hat^{k+1} = -alpha_k T^T(y^k), which is
what :func:`check_equivalence` measures. This oracle materializes n^2-wide
vectors and exists for verification at small n, not for production solving.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .linalg import SymMat
from .operators import (
    LiftedOperator,
    apply_A_dense,
    apply_At_dense,
    build_T,
    lambda_max_AAt,
)
from .problems import SdpProblem
from .projections import proj_psd_dense
from .solver import SchedulePolicy, SolveConfig, default_stepsize_product, solve


@dataclass
class LiftedState:
    """Iterate of the lifted splitting: Z symmetric, Z_hat vectorized."""

    Z: np.ndarray
    Z_hat: np.ndarray
    k: int


def resolvent_f(
    z: np.ndarray, z_hat: np.ndarray, alpha: float, problem: SdpProblem
) -> tuple[np.ndarray, np.ndarray]:
    """Resolvent of the linear-plus-PSD-indicator block:
    (Proj_PSD(Z - alpha C), 0)."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return proj_psd_dense(z - alpha * problem.C.to_dense()), np.zeros_like(z_hat)


def resolvent_g(
    v: np.ndarray,
    v_hat: np.ndarray,
    alpha: float,
    problem: SdpProblem,
    lifted: LiftedOperator,
) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean projection onto {A(X) + T(X_hat) = b}.

    The multiplier solves (AA^T + TT^T) w = A(V) + T(V_hat) - b, and since
    AA^T + TT^T = (1/R) I by construction, w = R (A(V) + T(V_hat) - b)
    exactly; the resolvent parameter ``alpha`` does not enter (an indicator's
    resolvent is stepsize-free).
    """
    cmap = problem.constraints
    resid = apply_A_dense(cmap, v) + lifted.apply(v_hat) - problem.b
    w = lifted.R * resid
    return v - apply_At_dense(cmap, w), v_hat - lifted.apply_t(w)


def drs_step(
    problem: SdpProblem,
    lifted: LiftedOperator,
    state: LiftedState,
    alpha_k: float,
    alpha_prev: float,
) -> LiftedState:
    """One non-stationary splitting step with ratio alpha_k/alpha_prev."""
    if alpha_k <= 0 or alpha_prev <= 0:
        raise ValueError("stepsizes must be positive")
    theta = alpha_k / alpha_prev
    f, f_hat = resolvent_f(state.Z, state.Z_hat, alpha_prev, problem)
    v = f + theta * (f - state.Z)
    v_hat = f_hat + theta * (f_hat - state.Z_hat)
    g, g_hat = resolvent_g(v, v_hat, alpha_k, problem, lifted)
    z_new = g + theta * (state.Z - f)
    z_hat_new = g_hat + theta * (state.Z_hat - f_hat)
    return LiftedState(Z=z_new, Z_hat=z_hat_new, k=state.k + 1)


@dataclass(frozen=True)
class EquivalenceReport:
    max_x_defect: float
    max_z_defect: float
    iters: int
    passed: bool

    def as_dict(self) -> dict:
        return {
            "max_x_defect": self.max_x_defect,
            "max_z_defect": self.max_z_defect,
            "iters": self.iters,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def check_equivalence(
    problem: SdpProblem,
    alphas: Sequence[float] | Callable[[int], float],
    iters: int,
    tol: float = 1e-8,
    break_product: bool = False,
    X0: SymMat | None = None,
    y0: np.ndarray | None = None,
) -> EquivalenceReport:
    """Run the PDHG engine and the splitting oracle side by side.

    ``alphas`` prescribes the primal stepsizes (callable on k, or a sequence
    of length >= iters+1); the dual parameters are derived so the product and
    ratio conditions hold, unless ``break_product`` deliberately corrupts the
    product as a negative control. Reports the largest primal-iterate defect
    ||X_pdhg - X_drs||_F and the largest correspondence defect on (Z, Z_hat);
    the check passes iff both stay below ``tol``.
    """
    if iters < 1:
        raise ValueError(f"need iters >= 1, got {iters}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not callable(alphas) and len(alphas) < iters + 1:
        raise ValueError(
            f"schedule must provide iters+1 = {iters + 1} values, got {len(alphas)}"
        )

    r = default_stepsize_product(lambda_max_AAt(problem.constraints))
    lifted = build_T(problem.constraints, r)
    factor = 1.25 if break_product else 1.0
    policy = SchedulePolicy(alphas, R=r, product_factor=factor)

    x_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []

    def record(_k: int, x_new: np.ndarray, y_new: np.ndarray) -> None:
        x_hist.append(x_new.copy())
        y_hist.append(y_new.copy())

    config = SolveConfig(max_iters=iters, tol=1e-300, X0=X0, y0=y0,
                         callback=record)
    solve(problem, policy, config)

    x0_dense = np.zeros((problem.n, problem.n)) if X0 is None else X0.to_dense()
    y0_vec = np.zeros(problem.m) if y0 is None else np.asarray(y0, dtype=float)
    x_hist.insert(0, x0_dense)
    y_hist.insert(0, y0_vec)

    a = policy.alpha_at
    state = LiftedState(
        Z=x0_dense - a(0) * apply_At_dense(problem.constraints, y0_vec),
        Z_hat=-a(0) * lifted.apply_t(y0_vec),
        k=1,
    )

    max_x = 0.0
    max_z = 0.0
    for k in range(1, iters + 1):
        f, _ = resolvent_f(state.Z, state.Z_hat, a(k - 1), problem)
        max_x = max(max_x, float(np.linalg.norm(f - x_hist[k])))
        state = drs_step(problem, lifted, state, a(k), a(k - 1))
        z_ref = x_hist[k] - a(k) * apply_At_dense(problem.constraints, y_hist[k])
        z_hat_ref = -a(k) * lifted.apply_t(y_hist[k])
        max_z = max(
            max_z,
            float(np.linalg.norm(state.Z - z_ref)),
            float(np.linalg.norm(state.Z_hat - z_hat_ref)),
        )

    return EquivalenceReport(
        max_x_defect=max_x,
        max_z_defect=max_z,
        iters=iters,
        passed=(max_x < tol and max_z < tol),
    )


def constant_schedule(value: float = 1.0) -> Callable[[int], float]:
    return lambda _k: value


def geometric_schedule() -> Callable[[int], float]:
    """alpha_k = 1 + 2^(-k): non-stationary with summable variation."""
    return lambda k: 1.0 + 2.0 ** (-k)
