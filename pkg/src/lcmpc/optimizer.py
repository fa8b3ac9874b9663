"""BFGS with a backtracking Armijo line search."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class Termination(enum.Enum):
    GRADIENT_TOL = "GradientTol"
    STEP_TOL = "StepTol"
    MAX_ITERS = "MaxIters"
    FAILED = "Failed"


def default_fd_step(p: np.ndarray) -> float:
    return max(1e-6, 1e-8 * float(np.max(np.abs(p), initial=0.0)))


@dataclass(frozen=True)
class OptimizerSettings:
    optimality_tol: float = 1e-6
    step_tol: float = 1e-6
    max_iters: int = 500
    fd_step: Callable[[np.ndarray], float] = default_fd_step
    c1: float = 1e-4
    backtrack: float = 0.5
    curvature_eps: float = 1e-12
    keep_history: bool = False

    def __post_init__(self):
        if not (self.optimality_tol > 0 and self.step_tol > 0 and self.max_iters > 0):
            raise ValueError("tolerances and max_iters must be positive")
        if not (0 < self.c1 < 1 and 0 < self.backtrack < 1):
            raise ValueError("need 0 < c1 < 1 and 0 < backtrack < 1")


@dataclass(frozen=True)
class StepRecord:
    f_before: float
    f_after: float
    step_length: float
    slope: float  # g'd at the start of the step, always negative
    bfgs_updated: bool


@dataclass(frozen=True, eq=False)
class OptimizerResult:
    p_star: np.ndarray
    f_star: float
    iterations: int
    converged: Termination
    f_evals: int
    g_evals: int
    grad_norm: float
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.converged is not Termination.FAILED


def fd_gradient(fun: Callable[[np.ndarray], float], p: np.ndarray,
                step: Callable[[np.ndarray], float] = default_fd_step) -> np.ndarray:
    h = step(p)
    g = np.empty_like(p)
    e = p.copy()
    for i in range(p.size):
        e[i] = p[i] + h
        fp = fun(e)
        e[i] = p[i] - h
        fm = fun(e)
        e[i] = p[i]
        g[i] = (fp - fm) / (2.0 * h)
    return g


def _interpolated_step(fk: float, slope: float, alpha: float, f_alpha: float) -> float:
    # minimiser of the parabola through f(0), f'(0) and f(alpha)
    curv = f_alpha - fk - slope * alpha
    if curv <= 0:
        return np.inf
    return -slope * alpha * alpha / (2.0 * curv)


def _line_search(f, p, fk, d, slope, s_: OptimizerSettings):
    """Backtracking Armijo search with parabolic refinement.

    Trial steps shrink by at least ``s_.backtrack`` and at most a factor 10,
    using the parabola minimiser where it falls in that bracket. When the
    unit step is already acceptable the parabola minimiser is tried once as
    well and kept if it is lower; on a quadratic objective this makes the
    search exact.
    """
    alpha = 1.0
    any_finite = False
    dmax = float(np.max(np.abs(d)))
    while True:
        f_new = f(p + alpha * d)
        if np.isfinite(f_new):
            any_finite = True
            if f_new <= fk + s_.c1 * alpha * slope:
                break
            a_q = _interpolated_step(fk, slope, alpha, f_new)
            alpha = min(max(a_q, 0.1 * alpha), s_.backtrack * alpha)
        else:
            alpha *= s_.backtrack
        if alpha * dmax < s_.step_tol:
            return False, alpha, f_new, any_finite

    if alpha == 1.0:
        a_q = _interpolated_step(fk, slope, alpha, f_new)
        if np.isfinite(a_q) and abs(a_q - 1.0) > 1e-3:
            f_q = f(p + a_q * d)
            if np.isfinite(f_q) and f_q < f_new and f_q <= fk + s_.c1 * a_q * slope:
                return True, a_q, f_q, any_finite
    return True, alpha, f_new, any_finite


def minimize(objective: Callable[[np.ndarray], float], p0,
             gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             settings: OptimizerSettings = OptimizerSettings()) -> OptimizerResult:
    """Minimise ``objective`` from ``p0``.

    The inverse Hessian starts at the identity and is rescaled by
    ``y's / y'y`` before the first update. Updates are skipped when
    ``y's <= curvature_eps * |y| |s|``. Without ``gradient`` central finite
    differences with ``settings.fd_step`` are used.
    """
    s_ = settings
    p = np.array(p0, dtype=float).ravel()
    n = p.size
    counts = {"f": 0, "g": 0}

    def f(x):
        counts["f"] += 1
        return float(objective(x))

    def grad(x):
        counts["g"] += 1
        if gradient is None:
            return fd_gradient(f, x, s_.fd_step)
        return np.asarray(gradient(x), dtype=float).ravel()

    fk = f(p)
    if not np.isfinite(fk):
        raise ValueError("objective is not finite at the starting point")
    gk = grad(p)
    H = np.eye(n)
    scaled = False
    history = []

    def result(status, msg=""):
        return OptimizerResult(p_star=p.copy(), f_star=fk, iterations=it, converged=status,
                               f_evals=counts["f"], g_evals=counts["g"],
                               grad_norm=float(np.max(np.abs(gk), initial=0.0)),
                               message=msg, history=history)

    it = 0
    while True:
        if np.max(np.abs(gk), initial=0.0) < s_.optimality_tol:
            return result(Termination.GRADIENT_TOL)
        if it >= s_.max_iters:
            return result(Termination.MAX_ITERS)

        d = -H @ gk
        slope = float(gk @ d)
        if not slope < 0:
            H = np.eye(n)
            d = -gk
            slope = float(gk @ d)

        ok, alpha, f_new, any_finite = _line_search(f, p, fk, d, slope, s_)
        if not ok:
            if not np.array_equal(H, np.eye(n)):
                # stale curvature; retry once along steepest descent
                H = np.eye(n)
                scaled = False
                continue
            if not any_finite:
                return result(Termination.FAILED, "objective non-finite along every trial step")
            return result(Termination.STEP_TOL, "line search could not decrease the objective")

        step = alpha * d
        trial = p + step
        g_new = grad(trial)
        y = g_new - gk
        ys = float(y @ step)
        updated = bool(ys > s_.curvature_eps * np.linalg.norm(y) * np.linalg.norm(step))
        if updated:
            if not scaled:
                H = (ys / float(y @ y)) * np.eye(n)
                scaled = True
            rho = 1.0 / ys
            Hy = H @ y
            H = (H - rho * (np.outer(step, Hy) + np.outer(Hy, step))
                 + (rho * rho * float(y @ Hy) + rho) * np.outer(step, step))
        else:
            # no usable curvature along this step: restart from the identity
            H = np.eye(n)
            scaled = False
        if s_.keep_history:
            history.append(StepRecord(fk, f_new, alpha, slope, updated))

        p, fk, gk = trial, f_new, g_new
        it += 1
        if np.max(np.abs(step)) < s_.step_tol:
            if np.max(np.abs(gk)) < s_.optimality_tol:
                return result(Termination.GRADIENT_TOL)
            return result(Termination.STEP_TOL)
