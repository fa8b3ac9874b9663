"""Closed-loop simulation of the grid circuit under LCMPC."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .analysis import samples_per_period
from .controller import LcmpcConfig, LcmpcController, predict_disturbance
from .grid_model import (
    GridCircuitParams,
    build_grid_state_space,
    compute_normal_form_scaling,
    reference_disturbance,
    synthesize_disturbance,
    transform_to_normal_form,
)
from .linear_plant import (
    ContinuousStateSpace,
    DiscreteStateSpace,
    periodic_steady_state,
    rk4_zoh,
    zoh_discretize,
)
from .normal_forms import LimitCycleParams
from .optimizer import OptimizerSettings


class Mode(enum.Enum):
    COMPENSATED = "compensated"
    UNCOMPENSATED = "uncompensated"


class Bootstrap(enum.Enum):
    ORACLE = "oracle"
    ZERO = "zero"


class InitialState(enum.Enum):
    STEADY_STATE = "steady_state"
    ZERO = "zero"


@dataclass(frozen=True)
class SimulationConfig:
    grid: GridCircuitParams = GridCircuitParams()
    disturbance: tuple = tuple(reference_disturbance())
    mu: float = 1e-2
    alpha: float = -1e-2
    Hp: int = 200
    h: int = 5
    tau: float = 2e-4
    total_time: float = 0.1
    mode: Mode = Mode.COMPENSATED
    bootstrap: Bootstrap = Bootstrap.ORACLE
    initial_state: InitialState = InitialState.STEADY_STATE
    optimality_tol: float = 1e-6
    step_tol: float = 1e-6
    max_iters: int = 500
    analytic_gradient: bool = True

    def __post_init__(self):
        object.__setattr__(self, "disturbance", tuple(self.disturbance))
        n = self.total_time / self.tau
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"total_time / tau = {n!r} is not an integer")
        spp = samples_per_period(self.grid.f, self.tau)
        if round(n) < 2 * spp:
            raise ValueError("total_time must cover at least two fundamental periods")

    @property
    def n_samples(self) -> int:
        return round(self.total_time / self.tau)

    @property
    def samples_per_period(self) -> int:
        return samples_per_period(self.grid.f, self.tau)

    @property
    def lc(self) -> LimitCycleParams:
        return LimitCycleParams.from_frequency(self.mu, self.alpha, self.grid.omega, self.tau)

    def optimizer_settings(self) -> OptimizerSettings:
        return OptimizerSettings(optimality_tol=self.optimality_tol, step_tol=self.step_tol,
                                 max_iters=self.max_iters)


@dataclass(frozen=True)
class PeriodRecord:
    period: int
    objective: float
    iterations: int
    wall_ms: float
    termination: str
    fallback: bool


@dataclass(eq=False)
class SimulationLog:
    k: np.ndarray
    t: np.ndarray
    v_c: np.ndarray
    i_l: np.ndarray
    i_c: np.ndarray
    i_d: np.ndarray
    v_s: np.ndarray
    xt1: np.ndarray
    xt2: np.ndarray
    periods: list = field(default_factory=list)
    plans: list = field(default_factory=list, repr=False)

    COLUMNS = ("k", "t", "v_c", "i_l", "i_c", "i_d", "v_s", "xt1", "xt2")

    def __len__(self) -> int:
        return len(self.k)

    def final_period(self, spp: int) -> slice:
        """Sample slice of the last complete fundamental period."""
        end = len(self.k) - 1
        return slice(end - spp, end)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        cols = [getattr(self, c) for c in self.COLUMNS]
        for i in range(len(self.k)):
            row = [int(cols[0][i])] + [f"{float(c[i]):.17g}" for c in cols[1:]]
            w.writerow(row)
        return buf.getvalue()

    def periods_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period", "objective", "iterations", "wall_ms"])
        for p in self.periods:
            w.writerow([p.period, f"{p.objective:.17g}", p.iterations, f"{p.wall_ms:.3f}"])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class PlantModel:
    scaling: object
    continuous: ContinuousStateSpace  # normal-form coordinates
    discrete: DiscreteStateSpace


def build_plant(cfg: SimulationConfig) -> PlantModel:
    css = build_grid_state_space(cfg.grid)
    scaling = compute_normal_form_scaling(cfg.grid)
    css_nf = transform_to_normal_form(css, scaling)
    return PlantModel(scaling, css_nf, zoh_discretize(css_nf, cfg.tau))


def build_controller(cfg: SimulationConfig, plant: PlantModel | None = None) -> LcmpcController:
    plant = plant or build_plant(cfg)
    lcfg = LcmpcConfig(lc=cfg.lc, Hp=cfg.Hp, h=cfg.h, plant=plant.discrete,
                       samples_per_period=cfg.samples_per_period,
                       optimizer=cfg.optimizer_settings(),
                       analytic_gradient=cfg.analytic_gradient)
    return LcmpcController(lcfg)


def undisturbed_initial_state(cfg: SimulationConfig, plant: PlantModel) -> np.ndarray:
    """Normal-form state at t = 0 of the undisturbed periodic steady state.

    Taken from the discretised plant rather than the continuous phasor: the
    held supply voltage lags the sampled sine by half a sample, and starting
    from the continuous phasor state would excite the slow circuit mode.
    """
    spp = cfg.samples_per_period
    _, v_s = synthesize_disturbance((), cfg.grid.vs_amplitude, cfg.grid.f, np.arange(spp), cfg.tau)
    V = np.column_stack([np.zeros(spp), v_s])
    return periodic_steady_state(plant.discrete, np.zeros((spp, plant.discrete.m)), V)


def _run(cfg: SimulationConfig, stepper: Callable, plant: PlantModel,
         output_disturbance: Optional[Callable[[int], np.ndarray]] = None,
         controller: LcmpcController | None = None) -> SimulationLog:
    N = cfg.n_samples
    spp = cfg.samples_per_period
    dss = plant.discrete
    ks = np.arange(N + 1)
    # one extra horizon of the true waveform for the oracle bootstrap
    i_d_all, v_s_all = synthesize_disturbance(cfg.disturbance, cfg.grid.vs_amplitude, cfg.grid.f,
                                              np.arange(N + 1 + cfg.Hp), cfg.tau)
    v_all = np.column_stack([i_d_all, v_s_all])

    if cfg.initial_state is InitialState.STEADY_STATE:
        x = undisturbed_initial_state(cfg, plant)
    else:
        x = np.zeros(2)

    X = np.empty((N + 1, 2))
    u_log = np.zeros(N + 1)
    compensated = cfg.mode is Mode.COMPENSATED
    if compensated and controller is None:
        controller = build_controller(cfg, plant)

    log_periods, plans = [], []
    plan_u, plan_start, warm = None, 0, None
    for k in range(N + 1):
        X[k] = x
        if compensated and k % spp == 0 and k < N:
            period = k // spp
            if period == 0:
                if cfg.bootstrap is Bootstrap.ORACLE:
                    V = v_all[k:k + cfg.Hp].ravel()
                else:
                    V = np.zeros(cfg.Hp * dss.d)
            else:
                V = predict_disturbance(v_all[k - spp:k], cfg.Hp, spp)
            plan = controller.solve_period(x, V, warm)
            if not plan.fallback:
                warm = plan.P_star
            plan_u, plan_start = plan.U_star, k
            plans.append(plan)
            tr = plan.cost_trace
            log_periods.append(PeriodRecord(period + 1, plan.objective,
                                            tr.iterations if tr else 0, plan.wall_ms,
                                            tr.converged.value if tr else "none", plan.fallback))
        if plan_u is not None:
            u_log[k] = plan_u[(k - plan_start) % spp]
        if k < N:
            x = stepper(x, u_log[k], v_all[k])

    Y = X @ dss.C.T
    if output_disturbance is not None:
        Y = Y + np.array([output_disturbance(int(k)) for k in ks])
    return SimulationLog(k=ks, t=ks * cfg.tau, v_c=Y[:, 0], i_l=Y[:, 1], i_c=u_log,
                         i_d=i_d_all[:N + 1], v_s=v_s_all[:N + 1], xt1=X[:, 0], xt2=X[:, 1],
                         periods=log_periods, plans=plans)


def run_closed_loop(cfg: SimulationConfig,
                    output_disturbance: Optional[Callable[[int], np.ndarray]] = None) -> SimulationLog:
    """Step the discretised normal-form plant, re-planning every period.

    ``output_disturbance(k)`` adds a measurement offset to the logged
    ``(v_c, i_l)``; state feedback always uses the true states.
    """
    plant = build_plant(cfg)
    dss = plant.discrete
    return _run(cfg, lambda x, u, v: dss.step(x, u, v), plant, output_disturbance)


def run_reference_integration(cfg: SimulationConfig, substeps: int = 100) -> SimulationLog:
    """Same protocol, but the plant is the continuous model integrated by RK4
    with ``substeps`` steps per sample and inputs held over each sample."""
    if substeps < 10:
        raise ValueError("substeps must be >= 10")
    plant = build_plant(cfg)
    css = plant.continuous

    def step(x, u, v):
        return rk4_zoh(css, x, [u], v, cfg.tau, substeps)[0]

    return _run(cfg, step, plant)


def final_period_signals(log: SimulationLog, spp: int) -> dict:
    sl = log.final_period(spp)
    return {"v_c": log.v_c[sl], "i_l": log.i_l[sl], "i_c": log.i_c[sl],
            "xt1": log.xt1[sl], "xt2": log.xt2[sl]}
