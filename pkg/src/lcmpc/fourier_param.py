"""Truncated Fourier parameterisation of the future input sequence.

The input over the horizon is restricted to

    u_i = sum_{n=1..h} f_n sin(n w tau i) + g_n cos(n w tau i),   i = 0 .. Hp-1,

i.e. ``U = (M kron I_m) P`` with ``P = (f_1 .. f_h | g_1 .. g_h)``. The sample
index is relative to the optimisation instant, so row 0 of ``M`` is
``[0 .. 0 | 1 .. 1]``. There is no constant term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linear_plant import PredictionOperator, predict_states


@dataclass(frozen=True, eq=False)
class FourierBasis:
    M: np.ndarray
    h: int
    omega: float
    tau: float
    Hp: int


def build_fourier_basis(omega: float, tau: float, Hp: int, h: int) -> FourierBasis:
    if h < 1 or Hp < 1:
        raise ValueError("need h >= 1 and Hp >= 1")
    if not omega * tau * h < math.pi:
        raise ValueError(
            f"harmonic {h} at omega*tau={omega * tau:.6g} violates the Nyquist bound"
        )
    i = np.arange(Hp)[:, None]
    n = np.arange(1, h + 1)[None, :]
    ang = n * (omega * tau) * i
    M = np.hstack([np.sin(ang), np.cos(ang)])
    return FourierBasis(M=M, h=h, omega=omega, tau=tau, Hp=Hp)


def n_coeffs(basis: FourierBasis, m: int) -> int:
    return 2 * m * basis.h


def expand_inputs(basis: FourierBasis, P, m: int = 1) -> np.ndarray:
    """Return ``U = (M kron I_m) P`` as a flat vector of length ``m * Hp``."""
    P = np.asarray(P, dtype=float).ravel()
    if P.size != 2 * m * basis.h:
        raise ValueError(f"expected {2 * m * basis.h} coefficients, got {P.size}")
    # (M kron I_m) P == vec of M @ P.reshape(2h, m) in row-major order
    return (basis.M @ P.reshape(2 * basis.h, m)).ravel()


def input_matrix(op: PredictionOperator, basis: FourierBasis) -> np.ndarray:
    """``Theta (M kron I_m)``: maps coefficients straight to stacked states."""
    if op.Hp != basis.Hp:
        raise ValueError(f"horizon mismatch: operator {op.Hp}, basis {basis.Hp}")
    return op.Theta @ np.kron(basis.M, np.eye(op.m))


def predict_states_param(op: PredictionOperator, basis: FourierBasis, x_k, P, V) -> np.ndarray:
    if op.Hp != basis.Hp:
        raise ValueError(f"horizon mismatch: operator {op.Hp}, basis {basis.Hp}")
    return predict_states(op, x_k, expand_inputs(basis, P, op.m), V)
