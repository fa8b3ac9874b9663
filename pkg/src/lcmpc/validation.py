"""Oracle and property suites behind ``lcmpc validate``.

Every suite takes a seeded generator and returns a list of :class:`Check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernel_cost as kc
from .analysis import harmonic_spectrum, thd
from .grid_model import (
    build_grid_state_space,
    compute_normal_form_scaling,
    predicted_thd,
)
from .linear_plant import (
    ContinuousStateSpace,
    build_prediction_operator,
    predict_states,
    rk4_zoh,
    simulate_recursion,
    zoh_discretize,
)
from .normal_forms import LimitCycleParams, ns_map_step
from .optimizer import OptimizerSettings, Termination, minimize
from .simulator import Mode, SimulationConfig, final_period_signals, run_closed_loop

DEFAULT_SEED = 20240601
KERNEL_HP_GRID = (2, 3, 5, 17, 200)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def random_lc(rng: np.random.Generator) -> LimitCycleParams:
    mu = rng.uniform(1e-3, 0.2)
    alpha = -rng.uniform(1e-3, 0.2)
    omega = 2 * math.pi * rng.uniform(10, 200)
    tau = rng.uniform(1e-5, 1e-3)
    return LimitCycleParams.from_frequency(mu, alpha, omega, tau)


# --- kernel -----------------------------------------------------------------

def kernel_oracle_worst(rng, Hp: int, n_samples: int = 100) -> float:
    """Worst relative gap between the matrix form and the pair sum."""
    worst = 0.0
    for _ in range(n_samples):
        p = random_lc(rng)
        M = kc.build_cost_matrices(p, Hp)
        X = rng.normal(scale=rng.uniform(0.1, 3.0), size=2 * Hp)
        a, b = kc.cost_vectorized(X, M, p).total, kc.cost_direct(X, p).total
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return worst


def on_cycle_trajectory(p: LimitCycleParams, Hp: int, angle: float = 0.0) -> np.ndarray:
    rho = math.sqrt(-p.mu / p.alpha)
    x = rho * np.array([math.cos(angle), math.sin(angle)])
    out = [x]
    for _ in range(Hp - 1):
        x = ns_map_step(x, p)
        out.append(x)
    return np.concatenate(out)


def zero_cost_worst(rng, Hps=(2, 5, 20, 200), n_samples: int = 20):
    """Return ``(max cost / Hp on the cycle, min cost after a 1e-3 nudge)``."""
    worst_on, best_off = 0.0, math.inf
    for Hp in Hps:
        for _ in range(n_samples):
            p = random_lc(rng)
            X = on_cycle_trajectory(p, Hp, rng.uniform(0, 2 * math.pi))
            worst_on = max(worst_on, kc.cost_value(X, p) / Hp)
            Y = X.copy()
            Y[rng.integers(X.size)] += 1e-3
            best_off = min(best_off, kc.cost_value(Y, p))
    return worst_on, best_off


def gradient_worst(rng, Hp: int, n_samples: int = 100) -> float:
    worst = 0.0
    for _ in range(n_samples):
        p = random_lc(rng)
        M = kc.build_cost_matrices(p, Hp)
        X = rng.normal(size=2 * Hp)
        ga = kc.cost_gradient(X, M, p, kc.GradientMode.ANALYTIC)
        gf = kc.cost_gradient(X, M, p, kc.GradientMode.FINITE_DIFFERENCE)
        worst = max(worst, float(np.max(np.abs(ga - gf)) / max(np.max(np.abs(ga)), 1e-300)))
    return worst


def kernel_suite(rng) -> list[Check]:
    checks = []
    for Hp in KERNEL_HP_GRID:
        w = kernel_oracle_worst(rng, Hp)
        checks.append(Check(f"kernel oracle Hp={Hp}", w <= 1e-10, f"max rel diff {w:.2e}"))
    on, off = zero_cost_worst(rng)
    checks.append(Check("zero-cost certificate", on < 1e-18 and off > 0,
                        f"max cost/Hp on cycle {on:.2e}, min perturbed cost {off:.2e}"))
    for Hp in (4, 20):
        w = gradient_worst(rng, Hp)
        checks.append(Check(f"gradient vs central differences Hp={Hp}", w <= 1e-5,
                            f"max rel inf-norm diff {w:.2e}"))
    return checks


# --- plant ------------------------------------------------------------------

def random_stable_css(rng, n: int = 2, m: int = 1, d: int = 2) -> ContinuousStateSpace:
    lam = -rng.uniform(0.5, 50.0, size=n)
    Q = rng.normal(size=(n, n)) + n * np.eye(n)
    Ac = Q @ np.diag(lam) @ np.linalg.inv(Q)
    return ContinuousStateSpace(Ac, rng.normal(size=(n, m)), rng.normal(size=(n, d)), np.eye(n))


def zoh_eigen_worst(rng, n_samples: int = 50) -> float:
    worst = 0.0
    for _ in range(n_samples):
        css = random_stable_css(rng, n=int(rng.integers(1, 5)))
        tau = rng.uniform(1e-4, 1e-1)
        A = zoh_discretize(css, tau).A
        want = np.sort_complex(np.exp(np.linalg.eigvals(css.Ac) * tau))
        got = np.sort_complex(np.linalg.eigvals(A))
        worst = max(worst, float(np.max(np.abs(got - want) / np.abs(want))))
    return worst


def lifted_worst(rng, n_samples: int = 200) -> float:
    worst = 0.0
    for _ in range(n_samples):
        n, m, d = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 3))
        Hp = int(rng.integers(1, 40))
        dss = zoh_discretize(random_stable_css(rng, n, m, d), rng.uniform(1e-3, 5e-2))
        op = build_prediction_operator(dss, Hp)
        x0 = rng.normal(size=n)
        U, V = rng.normal(size=(Hp, m)), rng.normal(size=(Hp, d))
        lifted = predict_states(op, x0, U.ravel(), V.ravel())
        rec = simulate_recursion(dss, x0, U, V).ravel()
        worst = max(worst, _rel(lifted, rec))
    return worst


def grid_rk4_gap(n_samples: int = 500, substeps: int = 100) -> float:
    """Relative gap between ZOH recursion and RK4 at tau/substeps on the grid plant."""
    css = build_grid_state_space(SimulationConfig().grid)
    tau = 2e-4
    dss = zoh_discretize(css, tau)
    k = np.arange(n_samples)
    V = np.column_stack([2 * np.sin(3 * 2 * math.pi * 50 * k * tau),
                         400 * np.sin(2 * math.pi * 50 * k * tau)])
    U = 0.5 * np.cos(2 * math.pi * 50 * k * tau)[:, None]
    x0 = np.array([1.0, -2.0])
    return _rel(rk4_zoh(css, x0, U, V, tau, substeps), simulate_recursion(dss, x0, U, V))


def plant_suite(rng) -> list[Check]:
    w = zoh_eigen_worst(rng)
    out = [Check("ZOH eigenvalue mapping", w <= 1e-10, f"max rel diff {w:.2e}")]
    w = lifted_worst(rng)
    out.append(Check("lifted prediction vs recursion", w <= 1e-12, f"max rel diff {w:.2e}"))
    w = grid_rk4_gap()
    out.append(Check("ZOH vs RK4 at tau/100", w <= 1e-6, f"max rel diff {w:.2e}"))
    return out


# --- optimizer --------------------------------------------------------------

def rosenbrock(p):
    return (1 - p[0]) ** 2 + 100 * (p[1] - p[0] ** 2) ** 2


def rosenbrock_grad(p):
    return np.array([-2 * (1 - p[0]) - 400 * p[0] * (p[1] - p[0] ** 2),
                     200 * (p[1] - p[0] ** 2)])


def random_quadratic(rng, n: int):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eig = 10.0 ** rng.uniform(0.0, 3.0, size=n)
    eig[0], eig[-1] = 1.0, 1e3  # condition number exactly 1e3
    A = Q @ np.diag(eig) @ Q.T
    c = rng.normal(size=n)
    return (lambda p: 0.5 * (p - c) @ A @ (p - c)), (lambda p: A @ (p - c)), c


QUADRATIC_SETTINGS = OptimizerSettings(optimality_tol=1e-9, step_tol=1e-14, max_iters=200)


def quadratic_trial(rng, n: int):
    f, g, c = random_quadratic(rng, n)
    res = minimize(f, rng.normal(size=n), g, QUADRATIC_SETTINGS)
    return res, float(np.linalg.norm(g(res.p_star)))


def optimizer_suite(rng) -> list[Check]:
    res = minimize(rosenbrock, np.array([-1.2, 1.0]), rosenbrock_grad,
                   OptimizerSettings(optimality_tol=1e-8, step_tol=1e-12, max_iters=200))
    err = float(np.max(np.abs(res.p_star - 1.0)))
    out = [Check("Rosenbrock from (-1.2, 1)", err < 1e-4 and res.iterations <= 200,
                 f"error {err:.1e} after {res.iterations} iterations")]
    worst_ratio, worst_g = 0.0, 0.0
    for _ in range(20):
        n = int(rng.integers(2, 11))
        r, gn = quadratic_trial(rng, n)
        worst_ratio = max(worst_ratio, r.iterations / n)
        worst_g = max(worst_g, gn)
    out.append(Check("convex quadratics, n in 2..10", worst_g < 1e-8 and worst_ratio <= 3,
                     f"max gradient norm {worst_g:.1e}, max iterations/n {worst_ratio:.2f}"))
    p0 = np.array([3.0, -4.0])
    res = minimize(lambda p: 1.0 if np.array_equal(p, p0) else math.nan, p0,
                   lambda p: np.ones(2))
    out.append(Check("persistent non-finite objective reported as failure",
                     res.converged is Termination.FAILED and np.array_equal(res.p_star, p0),
                     res.converged.value))
    return out


# --- oracle THD -------------------------------------------------------------

def oracle_thd_suite(rng=None) -> list[Check]:
    cfg = SimulationConfig(mode=Mode.UNCOMPENSATED)
    sc = compute_normal_form_scaling(cfg.grid)
    out = [Check("normal-form scaling", 1.10 <= sc.rho_v <= 1.12 and 3.48 <= sc.rho_i <= 3.50,
                 f"rho_v={sc.rho_v:.4f}, rho_i={sc.rho_i:.4f}")]
    pred = predicted_thd(cfg.grid, cfg.disturbance)
    log = run_closed_loop(cfg)
    sig = final_period_signals(log, cfg.samples_per_period)
    for name in ("v_c", "i_l"):
        sim = thd(harmonic_spectrum(sig[name], cfg.grid.f, cfg.tau))
        gap = abs(sim - pred[name])
        out.append(Check(f"uncompensated THD({name}) vs phasor oracle", gap <= 1.0,
                         f"simulated {sim:.3f}%, oracle {pred[name]:.3f}%"))
    return out


SUITES: dict[str, Callable] = {
    "kernel": kernel_suite,
    "plant": plant_suite,
    "optimizer": optimizer_suite,
    "oracle-thd": oracle_thd_suite,
}


def run_suite(name: str, seed: int = DEFAULT_SEED) -> list[Check]:
    names = list(SUITES) if name == "all" else [name]
    checks = []
    for n in names:
        checks += SUITES[n](np.random.default_rng(seed))
    return checks
