"""Limit cycle MPC with a periodic receding horizon.

Once per fundamental period the controller minimises the kernel cost of the
parameterised prediction over the Fourier coefficients ``P`` and applies the
first period of the resulting input open loop.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernel_cost as kc
from .fourier_param import (
    FourierBasis,
    build_fourier_basis,
    expand_inputs,
    input_matrix,
    predict_states_param,
)
from .linear_plant import DiscreteStateSpace, PredictionOperator, build_prediction_operator
from .normal_forms import LimitCycleParams
from .optimizer import OptimizerResult, OptimizerSettings, Termination, minimize


@dataclass(frozen=True, eq=False)
class LcmpcConfig:
    lc: LimitCycleParams
    Hp: int
    h: int
    plant: DiscreteStateSpace
    samples_per_period: int
    optimizer: OptimizerSettings = OptimizerSettings()
    analytic_gradient: bool = True

    def __post_init__(self):
        spp = self.samples_per_period
        if spp < 1 or self.Hp % spp:
            raise ValueError(f"Hp={self.Hp} is not a multiple of samples_per_period={spp}")
        if abs(spp * self.plant.tau * self.lc.omega - 2.0 * math.pi) > 1e-9:
            raise ValueError("samples_per_period * tau * omega must equal 2 pi")
        if abs(self.plant.tau - self.lc.tau) > 1e-15:
            raise ValueError("plant and limit cycle use different sampling times")
        if self.plant.n != 2:
            raise ValueError("the limit-cycle kernel needs a second-order plant")


@dataclass(frozen=True, eq=False)
class ControlPlan:
    U_star: np.ndarray
    P_star: np.ndarray
    cost_trace: OptimizerResult | None
    objective: float
    fallback: bool = False
    wall_ms: float = 0.0


@dataclass(eq=False)
class LcmpcController:
    """Precomputed horizon matrices for one configuration."""

    cfg: LcmpcConfig
    op: PredictionOperator = field(init=False)
    basis: FourierBasis = field(init=False)
    matrices: kc.KernelCostMatrices = field(init=False)
    G: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = self.cfg
        self.op = build_prediction_operator(c.plant, c.Hp)
        self.basis = build_fourier_basis(c.lc.omega, c.plant.tau, c.Hp, c.h)
        self.matrices = kc.build_cost_matrices(c.lc, c.Hp)
        self.G = input_matrix(self.op, self.basis)

    @property
    def n_coeffs(self) -> int:
        return 2 * self.cfg.plant.m * self.cfg.h

    def free_response(self, x_k, V) -> np.ndarray:
        return self.op.Psi @ np.asarray(x_k, float) + self.op.Gamma @ np.asarray(V, float).ravel()

    def objective(self, P, x_k, V) -> float:
        return lcmpc_objective(P, x_k, V, self.op, self.basis, self.cfg.lc)

    def solve_period(self, x_k, V, warm_start=None) -> ControlPlan:
        return solve_period(self, x_k, V, warm_start)


def lcmpc_objective(P, x_k, V, op: PredictionOperator, basis: FourierBasis,
                    lc: LimitCycleParams, matrices: kc.KernelCostMatrices | None = None) -> float:
    """Kernel cost of ``X(P) = Psi x_k + Theta (M kron I) P + Gamma V``.

    With ``matrices`` the literal matrix form is evaluated, otherwise the pair sum.
    """
    X = predict_states_param(op, basis, x_k, P, V)
    if matrices is not None:
        return kc.cost_vectorized(X, matrices, lc).total
    return kc.cost_value(X, lc)


def solve_period(ctrl: LcmpcController, x_k, V, warm_start=None) -> ControlPlan:
    cfg = ctrl.cfg
    t0 = time.perf_counter()
    X0 = ctrl.free_response(x_k, V)
    G = ctrl.G
    lc = cfg.lc
    p0 = np.zeros(ctrl.n_coeffs) if warm_start is None else np.asarray(warm_start, float).copy()

    def fun(P):
        return kc.cost_value(X0 + G @ P, lc)

    def grad(P):
        return G.T @ kc.cost_value_and_gradient(X0 + G @ P, lc)[1]

    res = minimize(fun, p0, grad if cfg.analytic_gradient else None, cfg.optimizer)
    fallback = res.converged is Termination.FAILED or not np.isfinite(res.f_star)
    P = p0 if fallback else res.p_star
    f_star = fun(P)
    U = expand_inputs(ctrl.basis, P, cfg.plant.m)
    spp = cfg.samples_per_period
    return ControlPlan(U_star=U[: spp * cfg.plant.m].copy(), P_star=P.copy(), cost_trace=res,
                       objective=f_star, fallback=fallback,
                       wall_ms=1e3 * (time.perf_counter() - t0))


def predict_disturbance(previous_period, Hp: int, samples_per_period: int,
                        nominal=None) -> np.ndarray:
    """Repeat the last measured period over the horizon.

    ``previous_period`` is ``(samples_per_period, d)``. If it is missing or
    incomplete, ``nominal`` (an ``(Hp, d)`` or flat ``d*Hp`` array) is returned.
    """
    if Hp % samples_per_period:
        raise ValueError("Hp must be a multiple of samples_per_period")
    prev = None if previous_period is None else np.asarray(previous_period, dtype=float)
    if prev is not None and prev.ndim == 1:
        prev = prev[:, None]
    if prev is None or prev.shape[0] != samples_per_period:
        if nominal is None:
            raise ValueError("no complete previous period and no nominal disturbance")
        V = np.asarray(nominal, dtype=float).ravel()
        return V
    return np.tile(prev, (Hp // samples_per_period, 1)).ravel()
