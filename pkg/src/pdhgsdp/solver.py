"""Adaptive primal-dual hybrid gradient engine for SDP.

One engine loop serves every stepsize policy:

    X_{k+1} = Proj_PSD(X_k - alpha (A^T(y_k) + C))
    y_{k+1} = y_k + beta (A(X_{k+1} + theta (X_{k+1} - X_k)) - b)

Policies hook in at three points: ``adjust_mid`` runs between the primal and
dual updates (used by rules that pick the next primal stepsize there, with
the dual update applying theta = alpha_next/alpha_current), ``dual_update``
may take over the dual step entirely (backtracking linesearch), and
``adjust_post`` runs after the residuals are known (residual balancing and
gradient-alignment rules, whose new stepsizes take effect next iteration).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .linalg import SymMat, frobenius_inner_dense
from .operators import apply_A_dense, apply_At_dense, lambda_max_AAt
from .problems import SdpProblem
from .projections import ProjectionConfig, projector

DEFAULT_TOL = 1e-6

CSV_HEADER = "iter,p_norm,d_norm,combined,objective,alpha,beta,theta,wall_ms"


class LinesearchStalled(RuntimeError):
    """Backtracking shrank past its cap without acceptance."""


class SolveError(RuntimeError):
    """A policy failed mid-run; ``trace`` holds the iterations completed."""

    def __init__(self, message: str, trace: "RunTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class StepsizeState:
    """Current stepsize triple plus the preserved product target R.

    ``extra`` holds policy-local scalars (the decaying epsilon of the
    balancing rules, degenerate-event counters, ...).
    """

    alpha: float
    beta: float
    theta: float
    R: float
    extra: dict = field(default_factory=dict)


@dataclass
class IterateState:
    """Engine iterates entering iteration k: X_cur = X^k, X_prev = X^{k-1},
    y = y^k. Arrays are dense and symmetric by construction."""

    X_cur: np.ndarray
    X_prev: np.ndarray
    y: np.ndarray
    k: int


@dataclass(frozen=True)
class ResidualReport:
    p_norm: float
    d_norm: float
    combined: float


@dataclass(frozen=True)
class TraceRow:
    k: int
    p_norm: float
    d_norm: float
    combined: float
    objective: float
    alpha: float
    beta: float
    theta: float
    wall_ms: float


@dataclass
class RunTrace:
    """Per-iteration record of a solve plus the terminal iterates."""

    rows: list[TraceRow]
    status: str  # "converged" | "iteration_cap" | "error"
    X_final: SymMat | None = None
    y_final: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.rows)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.k},{r.p_norm!r},{r.d_norm!r},{r.combined!r},{r.objective!r},"
                f"{r.alpha!r},{r.beta!r},{r.theta!r},{r.wall_ms!r}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 10000
    tol: float = DEFAULT_TOL
    proj: ProjectionConfig = ProjectionConfig()
    X0: SymMat | np.ndarray | None = None
    y0: np.ndarray | None = None
    # observation hook, called as callback(k, X_new, y_new) after each
    # iteration; must not mutate its arguments
    callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


# --- residuals and stopping -------------------------------------------------


def residual_terms(
    problem: SdpProblem,
    x_old: np.ndarray,
    x_new: np.ndarray,
    y_old: np.ndarray,
    y_new: np.ndarray,
    alpha: float,
    beta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Primal residual matrix (X^k - X^{k+1})/alpha - A^T(y^k - y^{k+1}) and
    dual residual vector (y^k - y^{k+1})/beta - A(X^k - X^{k+1})."""
    cmap = problem.constraints
    dx = x_old - x_new
    dy = y_old - y_new
    p_mat = dx / alpha - apply_At_dense(cmap, dy)
    d_vec = dy / beta - apply_A_dense(cmap, dx)
    return p_mat, d_vec


def residuals(
    problem: SdpProblem,
    x_old: np.ndarray,
    x_new: np.ndarray,
    y_old: np.ndarray,
    y_new: np.ndarray,
    alpha: float,
    beta: float,
) -> ResidualReport:
    if alpha <= 0 or beta <= 0:
        raise ValueError(f"stepsizes must be positive, got alpha={alpha}, beta={beta}")
    p_mat, d_vec = residual_terms(problem, x_old, x_new, y_old, y_new, alpha, beta)
    p = float(np.linalg.norm(p_mat))
    d = float(np.linalg.norm(d_vec))
    return ResidualReport(p_norm=p, d_norm=d, combined=p * p + d * d)


def stop_check(report: ResidualReport, tol: float = DEFAULT_TOL) -> bool:
    """True iff ||p||^2 + ||d||^2 < tol (strict)."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    return report.combined < tol


# --- single updates (library surface; the engine inlines the same math) ----


def x_update(
    problem: SdpProblem,
    x: np.ndarray,
    y: np.ndarray,
    alpha: float,
    proj: ProjectionConfig = ProjectionConfig(),
) -> np.ndarray:
    """Projected primal step Proj_PSD(X - alpha (A^T(y) + C))."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    grad = apply_At_dense(problem.constraints, y) + problem.C.to_dense()
    return projector(proj, problem.n)(x - alpha * grad)


def y_update(
    problem: SdpProblem,
    y: np.ndarray,
    x_new: np.ndarray,
    x_cur: np.ndarray,
    beta: float,
    theta: float,
) -> np.ndarray:
    """Dual ascent y + beta (A(X_new + theta (X_new - X_cur)) - b)."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    xbar = x_new + theta * (x_new - x_cur)
    return y + beta * (apply_A_dense(problem.constraints, xbar) - problem.b)


# --- stepsize policies -------------------------------------------------------


def default_stepsize_product(lam_max: float) -> float:
    """Default preserved product 0.9/lambda_max, strictly inside the
    admissible range."""
    return 0.9 / lam_max


class StepsizePolicy:
    """Base policy: no adjustment hooks."""

    name = "base"
    product_preserving = True

    def initial_state(self, problem: SdpProblem) -> StepsizeState:
        raise NotImplementedError

    def adjust_mid(self, problem, it: IterateState, x_new, ss: StepsizeState) -> None:
        pass

    def dual_update(self, problem, it: IterateState, x_new, ss: StepsizeState):
        return None

    def adjust_post(
        self, problem, it: IterateState, x_new, y_new, alpha_x, beta_y,
        report: ResidualReport, ss: StepsizeState,
    ) -> None:
        pass


class FixedPolicy(StepsizePolicy):
    """Constant stepsizes with theta = 1.

    Defaults to alpha = beta = sqrt(0.9 / lambda_max(A^T A)); explicit values
    must keep alpha*beta strictly below 1/lambda_max.
    """

    name = "fixed"

    def __init__(self, alpha: float | None = None, beta: float | None = None):
        if (alpha is None) != (beta is None):
            raise ValueError("give both alpha and beta or neither")
        if alpha is not None and (alpha <= 0 or beta <= 0):
            raise ValueError("stepsizes must be positive")
        self.alpha = alpha
        self.beta = beta

    def initial_state(self, problem: SdpProblem) -> StepsizeState:
        lam = lambda_max_AAt(problem.constraints)
        if self.alpha is None:
            root = math.sqrt(default_stepsize_product(lam))
            return StepsizeState(alpha=root, beta=root, theta=1.0, R=root * root)
        r = self.alpha * self.beta
        if r * lam >= 1.0:
            raise ValueError(
                f"alpha*beta = {r} is not strictly below 1/lambda_max = {1.0 / lam}"
            )
        return StepsizeState(alpha=self.alpha, beta=self.beta, theta=1.0, R=r)


class _BalancingBase(StepsizePolicy):
    """Shared three-branch update: grow alpha by 1/(1-eps_k), hold, or shrink
    by (1-eps_k); beta follows so alpha*beta stays R; theta reports the factor;
    eps decays geometrically each iteration."""

    def __init__(self, eps0: float = 0.5, eta: float = 0.95,
                 alpha: float | None = None, beta: float | None = None):
        if not 0 < eps0 < 1:
            raise ValueError(f"eps0 must lie in (0,1), got {eps0}")
        if not 0 < eta < 1:
            raise ValueError(f"eta must lie in (0,1), got {eta}")
        self.eps0 = eps0
        self.eta = eta
        self._fixed = FixedPolicy(alpha, beta)

    def initial_state(self, problem: SdpProblem) -> StepsizeState:
        ss = self._fixed.initial_state(problem)
        ss.extra["eps"] = self.eps0
        return ss

    # returns +1 (grow alpha), 0 (hold), -1 (shrink alpha)
    def _branch(self, problem, it, x_new, y_new, alpha_x, report, ss) -> int:
        raise NotImplementedError

    def adjust_post(self, problem, it, x_new, y_new, alpha_x, beta_y, report, ss):
        eps = ss.extra["eps"]
        branch = self._branch(problem, it, x_new, y_new, alpha_x, report, ss)
        if branch > 0:
            factor = 1.0 / (1.0 - eps)
        elif branch < 0:
            factor = 1.0 - eps
        else:
            factor = 1.0
        if factor != 1.0:
            ss.alpha *= factor
            ss.beta = ss.R / ss.alpha
        ss.theta = factor
        ss.extra["eps"] = eps * self.eta


class BalancedResidualPolicy(_BalancingBase):
    """Keep primal and dual residual norms comparable: grow alpha when
    p > 2 d Delta, hold while d/2 <= p <= 2 d, shrink otherwise."""

    name = "bpdr"

    def __init__(self, eps0: float = 0.5, eta: float = 0.95, delta: float = 1.0,
                 alpha: float | None = None, beta: float | None = None):
        super().__init__(eps0, eta, alpha, beta)
        if delta <= 0:
            raise ValueError(f"delta must be positive, got {delta}")
        self.delta = delta

    def _branch(self, problem, it, x_new, y_new, alpha_x, report, ss) -> int:
        p, d = report.p_norm, report.d_norm
        if p > 2.0 * d * self.delta:
            return 1
        if 0.5 * d <= p <= 2.0 * d:
            return 0
        return -1


class GradientAlignmentPolicy(_BalancingBase):
    """Branch on the cosine between the primal step and the primal residual
    matrix: grow alpha when they align (w > 0.99), hold for 0 <= w <= 0.99,
    shrink when they anti-align (w < 0).

    ``variant`` picks the residual form: "delta_y" uses A^T(y^k - y^{k+1}),
    "absolute_y" uses A^T(y^k). Vanishing norms fall back to the hold branch
    and bump the ``degenerate_cosine`` counter.
    """

    name = "alv"

    def __init__(self, eps0: float = 0.5, eta: float = 0.95,
                 cosine_threshold: float = 0.99, variant: str = "delta_y",
                 alpha: float | None = None, beta: float | None = None):
        super().__init__(eps0, eta, alpha, beta)
        if variant not in ("delta_y", "absolute_y"):
            raise ValueError(f"unknown residual variant {variant!r}")
        self.cosine_threshold = cosine_threshold
        self.variant = variant

    def _branch(self, problem, it, x_new, y_new, alpha_x, report, ss) -> int:
        cmap = problem.constraints
        dx = it.X_cur - x_new
        if self.variant == "delta_y":
            p_mat = dx / alpha_x - apply_At_dense(cmap, it.y - y_new)
        else:
            p_mat = dx / alpha_x - apply_At_dense(cmap, it.y)
        ndx = float(np.linalg.norm(dx))
        npm = float(np.linalg.norm(p_mat))
        if ndx == 0.0 or npm == 0.0:
            ss.extra["degenerate_cosine"] = ss.extra.get("degenerate_cosine", 0) + 1
            return 0
        w = frobenius_inner_dense(dx, p_mat) / (ndx * npm)
        if w > self.cosine_threshold:
            return 1
        if w >= 0.0:
            return 0
        return -1


class LinesearchPolicy(StepsizePolicy):
    """Backtracking linesearch on the dual step.

    After the primal update with alpha_{k-1}, try
    alpha_k = alpha_{k-1} sqrt(1 + theta_{k-1}) (the top of the admissible
    interval) with beta_k = s alpha_k and theta_k = alpha_k/alpha_{k-1};
    while ||A^T(y_trial - y)||_F > ||y_trial - y|| / (sqrt(s) alpha_k), shrink
    alpha_k by mu and retry. The accepted alpha_k is also the next primal
    stepsize.
    """

    name = "ls"
    product_preserving = False

    def __init__(self, s: float = 1.0, mu: float = 0.7, max_backtracks: int = 60,
                 alpha0: float | None = None):
        if s <= 0:
            raise ValueError(f"s must be positive, got {s}")
        if not 0 < mu < 1:
            raise ValueError(f"mu must lie in (0,1), got {mu}")
        self.s = s
        self.mu = mu
        self.max_backtracks = max_backtracks
        self.alpha0 = alpha0

    def initial_state(self, problem: SdpProblem) -> StepsizeState:
        if self.alpha0 is not None:
            a0 = self.alpha0
        else:
            lam = lambda_max_AAt(problem.constraints)
            # largest alpha passing the acceptance test for the worst dual step
            a0 = 0.9 / math.sqrt(self.s * lam) if lam > 0 else 1.0
        return StepsizeState(alpha=a0, beta=self.s * a0, theta=1.0, R=self.s * a0 * a0)

    def dual_update(self, problem, it, x_new, ss):
        cmap, b = problem.constraints, problem.b
        alpha_prev = ss.alpha
        a_xn = apply_A_dense(cmap, x_new)
        a_xc = apply_A_dense(cmap, it.X_cur)
        a = alpha_prev * math.sqrt(1.0 + ss.theta)
        sqrt_s = math.sqrt(self.s)
        for _ in range(self.max_backtracks + 1):
            beta = self.s * a
            theta = a / alpha_prev
            y_trial = it.y + beta * ((1.0 + theta) * a_xn - theta * a_xc - b)
            dy = y_trial - it.y
            lhs = float(np.linalg.norm(apply_At_dense(cmap, dy)))
            rhs = float(np.linalg.norm(dy)) / (sqrt_s * a)
            if lhs <= rhs:
                ss.alpha, ss.beta, ss.theta = a, beta, theta
                return y_trial
            a *= self.mu
        raise LinesearchStalled(
            f"linesearch stalled: no acceptance after {self.max_backtracks} shrinks"
        )


class TuningFreePolicy(StepsizePolicy):
    """Tuning-free stepsizes driven by iterate norms and a spectral bound.

    Between the updates of iteration k (1-based here):

        t_k     = clamp(||X^k|| / ||X^k - X^{k-1} + alpha_{k-1} A^T(y^k)||)
        alpha_k = (1 - w_k + w_k t_k) alpha_{k-1},  w_k = 2^(-k/100)
        beta_k  = 1 / (eps alpha_k)

    alpha_k is the next primal stepsize, so alpha_k beta_k = 1/eps is
    preserved. The dual extrapolation theta_k defaults to the realized ratio
    alpha_k/alpha_{k-1} = 1 - w_k + w_k t_k ("ratio"), which keeps the
    iteration inside the convergence theory (theta equals the stepsize ratio
    and tends to 1 as w_k vanishes). ``y_extrapolation="clamped"`` instead
    feeds the raw clamped t_k to the dual update; once w_k has decayed this
    detaches theta from the stepsize ratio and can stall far from a solution,
    so it exists for comparison only. A vanishing clamp denominator maps to
    theta_max and bumps the ``tf_zero_denominator`` counter.
    """

    name = "tf"

    theta_min = 1e-5
    theta_max = 1e5
    alpha_init = 1.0
    _EPS_MARGIN = 1.0 + 1e-6

    def __init__(self, eps: float | None = None, y_extrapolation: str = "ratio"):
        if y_extrapolation not in ("ratio", "clamped"):
            raise ValueError(f"unknown y_extrapolation {y_extrapolation!r}")
        self.eps = eps
        self.y_extrapolation = y_extrapolation

    def initial_state(self, problem: SdpProblem) -> StepsizeState:
        lam = lambda_max_AAt(problem.constraints)
        floor = lam * self._EPS_MARGIN
        eps = floor if self.eps is None else self.eps
        if eps < floor:
            raise ValueError(
                f"eps = {eps} must be at least lambda_max*(1+1e-6) = {floor} "
                "so the preserved product stays strictly admissible"
            )
        a0 = self.alpha_init
        return StepsizeState(
            alpha=a0, beta=1.0 / (eps * a0), theta=1.0, R=1.0 / eps,
            extra={"eps": eps},
        )

    def adjust_mid(self, problem, it, x_new, ss):
        eps = ss.extra["eps"]
        k_one_based = it.k + 1
        omega = 2.0 ** (-k_one_based / 100.0)
        ref = x_new - it.X_cur + ss.alpha * apply_At_dense(problem.constraints, it.y)
        den = float(np.linalg.norm(ref))
        if den == 0.0:
            clamped = self.theta_max
            ss.extra["tf_zero_denominator"] = ss.extra.get("tf_zero_denominator", 0) + 1
        else:
            ratio = float(np.linalg.norm(x_new)) / den
            clamped = min(max(ratio, self.theta_min), self.theta_max)
        factor = 1.0 - omega + omega * clamped
        ss.alpha = factor * ss.alpha
        ss.beta = 1.0 / (eps * ss.alpha)
        ss.theta = factor if self.y_extrapolation == "ratio" else clamped


class SchedulePolicy(StepsizePolicy):
    """Prescribed primal stepsize sequence, paired the way the splitting
    derivation demands: iteration k's primal step uses alphas[k], and its dual
    step uses theta = alphas[k+1]/alphas[k], beta = R/alphas[k+1].

    ``product_factor`` != 1 deliberately breaks alpha*beta = R (negative
    control for the equivalence check).
    """

    name = "schedule"

    def __init__(self, alphas: Sequence[float] | Callable[[int], float],
                 R: float | None = None, product_factor: float = 1.0):
        self._alphas = alphas
        self.R = R
        self.product_factor = product_factor

    def alpha_at(self, k: int) -> float:
        a = self._alphas(k) if callable(self._alphas) else self._alphas[k]
        if a <= 0:
            raise ValueError(f"schedule produced non-positive alpha at k={k}: {a}")
        return float(a)

    def initial_state(self, problem: SdpProblem) -> StepsizeState:
        r = self.R
        if r is None:
            r = default_stepsize_product(lambda_max_AAt(problem.constraints))
        a0 = self.alpha_at(0)
        return StepsizeState(alpha=a0, beta=r / a0, theta=1.0, R=r)

    def adjust_mid(self, problem, it, x_new, ss):
        a_next = self.alpha_at(it.k + 1)
        ss.theta = a_next / ss.alpha
        ss.beta = self.product_factor * ss.R / a_next
        ss.alpha = a_next


# --- the engine --------------------------------------------------------------


def _dense_initial(problem: SdpProblem, config: SolveConfig) -> tuple[np.ndarray, np.ndarray]:
    n, m = problem.n, problem.m
    x0 = config.X0
    if x0 is None:
        x = np.zeros((n, n))
    elif isinstance(x0, SymMat):
        x = x0.to_dense()
    else:
        x = SymMat.from_dense(np.asarray(x0, dtype=float)).to_dense()
    if x.shape != (n, n):
        raise ValueError(f"X0 has shape {x.shape}, expected ({n}, {n})")
    y = np.zeros(m) if config.y0 is None else np.asarray(config.y0, dtype=float).copy()
    if y.shape != (m,):
        raise ValueError(f"y0 has shape {y.shape}, expected ({m},)")
    return x, y


def solve(problem: SdpProblem, policy: StepsizePolicy,
          config: SolveConfig = SolveConfig()) -> RunTrace:
    """Run the engine until the stopping rule fires or the budget runs out.

    The trace records every iteration; ``status`` is "converged" only if the
    residual rule fired. Policy failures raise :class:`SolveError` carrying
    the trace accumulated so far.
    """
    cmap, b = problem.constraints, problem.b
    c_dense = problem.C.to_dense()
    proj = projector(config.proj, problem.n)
    x_cur, y = _dense_initial(problem, config)
    x_prev = x_cur.copy()

    ss = policy.initial_state(problem)
    rows: list[TraceRow] = []
    status = "iteration_cap"

    def _fail(exc: Exception):
        trace = RunTrace(rows, "error", SymMat.from_dense(x_cur), y.copy(),
                         flags=dict(ss.extra))
        raise SolveError(str(exc), trace) from exc

    for k in range(config.max_iters):
        tic = time.perf_counter()
        alpha_x = ss.alpha
        x_new = proj(x_cur - alpha_x * (apply_At_dense(cmap, y) + c_dense))
        it = IterateState(X_cur=x_cur, X_prev=x_prev, y=y, k=k)

        try:
            y_new = policy.dual_update(problem, it, x_new, ss)
            if y_new is None:
                policy.adjust_mid(problem, it, x_new, ss)
                y_new = y_update(problem, y, x_new, x_cur, ss.beta, ss.theta)
        except Exception as exc:  # policy failure: surface with partial trace
            _fail(exc)

        beta_y = ss.beta
        report = residuals(problem, x_cur, x_new, y, y_new, alpha_x, beta_y)
        objective = frobenius_inner_dense(c_dense, x_new)
        wall_ms = (time.perf_counter() - tic) * 1e3
        rows.append(TraceRow(k, report.p_norm, report.d_norm, report.combined,
                             objective, ss.alpha, ss.beta, ss.theta, wall_ms))

        converged = stop_check(report, config.tol)
        if not converged:
            try:
                policy.adjust_post(problem, it, x_new, y_new, alpha_x, beta_y,
                                   report, ss)
            except Exception as exc:
                _fail(exc)

        x_prev, x_cur, y = x_cur, x_new, y_new
        if config.callback is not None:
            config.callback(k, x_new, y_new)
        if converged:
            status = "converged"
            break

    flag_keys = ("tf_zero_denominator", "degenerate_cosine")
    flags = {key: ss.extra[key] for key in flag_keys if key in ss.extra}
    return RunTrace(rows, status, SymMat.from_dense(x_cur), y.copy(), flags=flags)


POLICY_NAMES = ("fixed", "bpdr", "alv", "ls", "tf")


def make_policy(name: str, **kwargs) -> StepsizePolicy:
    """Construct a policy by short name; kwargs go to the constructor."""
    table = {
        "fixed": FixedPolicy,
        "bpdr": BalancedResidualPolicy,
        "alv": GradientAlignmentPolicy,
        "ls": LinesearchPolicy,
        "tf": TuningFreePolicy,
    }
    if name not in table:
        raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
    return table[name](**kwargs)
