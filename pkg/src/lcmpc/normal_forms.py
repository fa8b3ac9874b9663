"""Hopf and Neimark-Sacker normal forms.

The continuous Hopf field

    dx1/dt = a*mu_c*x1 - w*x2 - a*x1*(x1^2 + x2^2)
    dx2/dt = w*x1 + a*mu_c*x2 - a*x2*(x1^2 + x2^2)

has a stable circular orbit of radius sqrt(mu_c). Its discrete counterpart is
the truncated Neimark-Sacker map

    x_{k+1} = (1 + mu + alpha * x_k.x_k) R(phi) x_k,

which for mu > 0, alpha < 0 has a stable circle of radius sqrt(-mu/alpha).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp


class OverflowDetected(ArithmeticError):
    """Raised when an iterated trajectory leaves the configured norm bound."""

    def __init__(self, step: int, norm: float, trajectory: np.ndarray):
        super().__init__(f"trajectory norm {norm:.3e} exceeded bound at step {step}")
        self.step = step
        self.norm = norm
        self.trajectory = trajectory


@dataclass(frozen=True)
class HopfParams:
    alpha_c: float
    mu_c: float
    omega: float

    def __post_init__(self):
        if not (self.alpha_c > 0 and self.mu_c > 0 and self.omega > 0):
            raise ValueError(
                "supercritical Hopf form needs alpha_c, mu_c, omega > 0, got "
                f"{self.alpha_c}, {self.mu_c}, {self.omega}"
            )


@dataclass(frozen=True)
class LimitCycleParams:
    """Shape class of the target circular limit cycle.

    Attributes:
        mu: Linear radius gain of the map.
        alpha: Cubic radius coefficient.
        phi: Rotation per sample in rad, must equal ``omega * tau``.
        omega: Angular frequency in rad/s.
        tau: Sampling time in s.
    """

    mu: float
    alpha: float
    phi: float
    omega: float
    tau: float

    def __post_init__(self):
        if not (self.mu > 0 and self.alpha < 0):
            raise ValueError(
                f"supercritical Neimark-Sacker form needs mu > 0 and alpha < 0, "
                f"got mu={self.mu}, alpha={self.alpha}"
            )
        if self.phi != self.omega * self.tau:
            raise ValueError(
                f"phi={self.phi!r} does not equal omega*tau={self.omega * self.tau!r}"
            )

    @classmethod
    def from_frequency(cls, mu: float, alpha: float, omega: float, tau: float) -> "LimitCycleParams":
        return cls(mu=mu, alpha=alpha, phi=omega * tau, omega=omega, tau=tau)

    @property
    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.phi)


class RadiusClassification(enum.Enum):
    FIXED_AT_ORIGIN = "FixedAtOrigin"
    CONVERGES_TO_LIMIT_CYCLE = "ConvergesToLimitCycle"
    MAPS_TO_ORIGIN = "MapsToOrigin"
    DIVERGENT = "Divergent"


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def hopf_vector_field(x, p: HopfParams) -> np.ndarray:
    x1, x2 = float(x[0]), float(x[1])
    r2 = x1 * x1 + x2 * x2
    return np.array([
        p.alpha_c * p.mu_c * x1 - p.omega * x2 - p.alpha_c * x1 * r2,
        p.omega * x1 + p.alpha_c * p.mu_c * x2 - p.alpha_c * x2 * r2,
    ])


def hopf_trajectory(x0, p: HopfParams, t_final: float, n_samples: int = 500) -> np.ndarray:
    """Integrate the Hopf field from ``x0`` and sample it on a uniform grid.

    Returns an array of shape ``(n_samples, 2)``.
    """
    t_eval = np.linspace(0.0, t_final, n_samples)
    sol = solve_ivp(lambda t, x: hopf_vector_field(x, p), (0.0, t_final), np.asarray(x0, float),
                    t_eval=t_eval, rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y.T


def ns_radius_step(r: float, p: LimitCycleParams) -> float:
    if r < 0:
        raise ValueError("radius must be non-negative")
    return r + p.mu * r + p.alpha * r ** 3


def ns_map_step(x, p: LimitCycleParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    gain = 1.0 + p.mu + p.alpha * float(x @ x)
    return gain * (p.rotation @ x)


def limit_cycle_radius(p: LimitCycleParams) -> float:
    if p.mu <= 0 or p.alpha >= 0:
        raise ValueError("limit cycle radius needs mu > 0 and alpha < 0")
    return math.sqrt(-p.mu / p.alpha)


def critical_radii(p: LimitCycleParams) -> tuple[float, float]:
    """Return ``(rho0, rho_inf)``.

    Starting at ``rho0`` the map lands on the origin in one step; beyond
    ``rho_inf`` the radius grows without bound.
    """
    if p.mu <= 0 or p.alpha >= 0:
        raise ValueError("critical radii need mu > 0 and alpha < 0")
    rho0 = math.sqrt(-(1.0 + p.mu) / p.alpha)
    rho_inf = math.sqrt(-(2.0 + p.mu) / p.alpha)
    return rho0, rho_inf


def classify_initial_radius(r: float, p: LimitCycleParams) -> RadiusClassification:
    if r < 0:
        raise ValueError("radius must be non-negative")
    rho0, rho_inf = critical_radii(p)
    if r == 0:
        return RadiusClassification.FIXED_AT_ORIGIN
    # measure-zero set, exact equality on purpose
    if r == rho0:
        return RadiusClassification.MAPS_TO_ORIGIN
    if r > rho_inf:
        return RadiusClassification.DIVERGENT
    return RadiusClassification.CONVERGES_TO_LIMIT_CYCLE


def iterate_trajectory(x0, p: LimitCycleParams, n_steps: int, bound: float = 1e12) -> np.ndarray:
    """Apply the map ``n_steps`` times.

    Returns an ``(n_steps + 1, 2)`` array starting with ``x0``. Raises
    :class:`OverflowDetected` (carrying the partial trajectory) when a norm
    exceeds ``bound`` or becomes non-finite.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    traj = np.empty((n_steps + 1, 2))
    traj[0] = np.asarray(x0, dtype=float)
    R = p.rotation
    for k in range(n_steps):
        x = traj[k]
        traj[k + 1] = (1.0 + p.mu + p.alpha * float(x @ x)) * (R @ x)
        norm = float(np.hypot(*traj[k + 1]))
        if not norm <= bound:
            raise OverflowDetected(k + 1, norm, traj[: k + 2].copy())
    return traj


def portrait_seeds(p: LimitCycleParams, n_angles: int = 16) -> list[np.ndarray]:
    """Initial points for phase portraits: ``n_angles`` angles times radii
    {0.1, rho/2, rho, 2*rho}."""
    rho = limit_cycle_radius(p)
    seeds = []
    for r in (0.1, 0.5 * rho, rho, 2.0 * rho):
        for i in range(n_angles):
            a = 2.0 * math.pi * i / n_angles
            seeds.append(np.array([r * math.cos(a), r * math.sin(a)]))
    return seeds
