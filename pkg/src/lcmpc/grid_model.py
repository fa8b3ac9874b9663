"""Minimal distribution-grid circuit with an active power filter.

An ideal supply ``v_s`` feeds the point of common coupling through ``R1``.
Two ideal current sources inject the compensation current ``i_c`` and the
harmonic disturbance ``i_d`` at that node, and a series R2-L2-C2 load draws
``i_l``. States are ``(q_l, i_l)``, the input is ``i_c``, measured
disturbances are ``(i_d, v_s)`` and outputs are ``(v_c, i_l)``.

Amplitudes are peak values. Phasors are sine-referenced:
``a * sin(w t + theta)`` corresponds to ``a * exp(j theta)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .linear_plant import ContinuousStateSpace


class Source(enum.Enum):
    SUPPLY = "Supply"
    DISTURBANCE_CURRENT = "DisturbanceCurrent"


@dataclass(frozen=True)
class GridCircuitParams:
    R1: float = 100.0
    R2: float = 10.0
    L2: float = 0.1
    C2: float = 0.01
    f: float = 50.0
    vs_amplitude: float = 400.0

    def __post_init__(self):
        for name in ("R1", "R2", "L2", "C2", "f", "vs_amplitude"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.f


@dataclass(frozen=True)
class HarmonicComponent:
    order: int
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"harmonic order must be a positive integer, got {self.order}")
        if self.amplitude < 0:
            raise ValueError("harmonic amplitude must be non-negative")


def reference_disturbance() -> list[HarmonicComponent]:
    """3rd and 5th harmonic currents of 2 A and 3 A used in the reference scenario."""
    return [
        HarmonicComponent(3, 2.0, math.atan(4.0 / 3.0)),
        HarmonicComponent(5, 3.0, math.atan(3.0 / 4.0) + math.pi / 2.0),
    ]


@dataclass(frozen=True, eq=False)
class NormalFormScaling:
    """``x = M x_tilde`` with ``M = [[0, rho_v C2], [rho_i, 0]]``.

    Hence ``x_tilde_1 = i_l / rho_i`` and ``x_tilde_2 = v_c / rho_v``.
    """

    rho_v: float
    rho_i: float
    M: np.ndarray

    @property
    def M_inv(self) -> np.ndarray:
        return np.linalg.inv(self.M)


def build_grid_state_space(p: GridCircuitParams) -> ContinuousStateSpace:
    Ac = [[0.0, 1.0], [-1.0 / (p.C2 * p.L2), -(p.R2 + p.R1) / p.L2]]
    bc = [[0.0], [p.R1 / p.L2]]
    Fc = [[0.0, 0.0], [p.R1 / p.L2, 1.0 / p.L2]]
    Cc = [[1.0 / p.C2, 0.0], [0.0, 1.0]]
    return ContinuousStateSpace(Ac, bc, Fc, Cc)


def load_impedance_loop(p: GridCircuitParams, n: int) -> complex:
    w = n * p.omega
    return p.R1 + p.R2 + 1j * w * p.L2 + 1.0 / (1j * w * p.C2)


def steady_state_phasor(p: GridCircuitParams, n: int, source: Source,
                        amplitude: float | None = None, phase: float = 0.0) -> tuple[complex, complex]:
    """Steady-state ``(I_l, V_c)`` phasors for a single sinusoidal source.

    ``amplitude`` defaults to ``vs_amplitude`` for the supply and 1 A for the
    disturbance current. The other source is switched off (voltage source
    shorted, current source opened).
    """
    if n < 1:
        raise ValueError("harmonic order must be >= 1")
    z = load_impedance_loop(p, n)
    if source is Source.SUPPLY:
        a = p.vs_amplitude if amplitude is None else amplitude
        I_l = a * np.exp(1j * phase) / z
    else:
        a = 1.0 if amplitude is None else amplitude
        I_l = a * np.exp(1j * phase) * p.R1 / z
    V_c = I_l / (1j * n * p.omega * p.C2)
    return complex(I_l), complex(V_c)


def compute_normal_form_scaling(p: GridCircuitParams) -> NormalFormScaling:
    I_l, V_c = steady_state_phasor(p, 1, Source.SUPPLY)
    rho_i, rho_v = abs(I_l), abs(V_c)
    M = np.array([[0.0, rho_v * p.C2], [rho_i, 0.0]])
    return NormalFormScaling(rho_v=rho_v, rho_i=rho_i, M=M)


def transform_to_normal_form(css: ContinuousStateSpace, s: NormalFormScaling) -> ContinuousStateSpace:
    M = np.asarray(s.M, dtype=float)
    if abs(np.linalg.det(M)) < 1e-300 or np.linalg.cond(M) > 1e14:
        raise np.linalg.LinAlgError("normal-form transformation matrix is singular")
    Minv = np.linalg.inv(M)
    return ContinuousStateSpace(Minv @ css.Ac @ M, Minv @ css.Bc, Minv @ css.Fc, css.Cc @ M)


def synthesize_disturbance(spec: Iterable[HarmonicComponent], vs_amplitude: float, f: float,
                           k, tau: float):
    """Sampled ``(i_d, v_s)`` at sample index (or index array) ``k``."""
    t = np.asarray(k, dtype=float) * tau
    w = 2.0 * math.pi * f
    i_d = np.zeros_like(t)
    for c in spec:
        i_d = i_d + c.amplitude * np.sin(c.order * w * t + c.phase)
    v_s = vs_amplitude * np.sin(w * t)
    if np.ndim(k) == 0:
        return float(i_d), float(v_s)
    return i_d, v_s


def steady_state_initial_state(p: GridCircuitParams) -> np.ndarray:
    """Physical state ``(q_l, i_l)`` of the undisturbed steady state at ``t = 0``."""
    I_l, _ = steady_state_phasor(p, 1, Source.SUPPLY)
    Q = I_l / (1j * p.omega)
    return np.array([Q.imag, I_l.imag])


def predicted_harmonics(p: GridCircuitParams, spec: Iterable[HarmonicComponent]) -> dict:
    """Phasor prediction of the uncompensated load current and capacitor voltage.

    Returns ``{"i_l": {n: amplitude}, "v_c": {n: amplitude}}`` with the supply
    at order 1 and every disturbance component superposed at its order.
    """
    I1, V1 = steady_state_phasor(p, 1, Source.SUPPLY)
    cur = {1: I1}
    vol = {1: V1}
    for c in spec:
        I, V = steady_state_phasor(p, c.order, Source.DISTURBANCE_CURRENT, c.amplitude, c.phase)
        cur[c.order] = cur.get(c.order, 0j) + I
        vol[c.order] = vol.get(c.order, 0j) + V
    return {"i_l": {n: abs(z) for n, z in cur.items()},
            "v_c": {n: abs(z) for n, z in vol.items()}}


def predicted_thd(p: GridCircuitParams, spec: Iterable[HarmonicComponent]) -> dict:
    """Phasor-oracle THD in percent for ``i_l`` and ``v_c``."""
    amps = predicted_harmonics(p, list(spec))
    out = {}
    for sig, a in amps.items():
        rest = math.sqrt(sum(v * v for n, v in a.items() if n >= 2))
        out[sig] = 100.0 * rest / a[1]
    return out
