"""Linear state-space plants, ZOH discretisation and lifted predictions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm


def _as2d(a, name: str) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2:
        raise ValueError(f"{name} must be a matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _check_dims(A, B, F, C):
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"system matrix must be square, got {A.shape}")
    if B.shape[0] != n or F.shape[0] != n or C.shape[1] != n:
        raise ValueError(
            f"inconsistent dimensions: A {A.shape}, B {B.shape}, F {F.shape}, C {C.shape}"
        )


@dataclass(frozen=True, eq=False)
class ContinuousStateSpace:
    """``dx/dt = Ac x + Bc u + Fc v``, ``y = Cc x``."""

    Ac: np.ndarray
    Bc: np.ndarray
    Fc: np.ndarray
    Cc: np.ndarray

    def __post_init__(self):
        for name in ("Ac", "Bc", "Fc", "Cc"):
            object.__setattr__(self, name, _as2d(getattr(self, name), name))
        _check_dims(self.Ac, self.Bc, self.Fc, self.Cc)

    @property
    def n(self) -> int:
        return self.Ac.shape[0]

    @property
    def m(self) -> int:
        return self.Bc.shape[1]

    @property
    def d(self) -> int:
        return self.Fc.shape[1]

    @property
    def r(self) -> int:
        return self.Cc.shape[0]

    def derivative(self, x, u, v) -> np.ndarray:
        return self.Ac @ x + self.Bc @ np.atleast_1d(u) + self.Fc @ np.atleast_1d(v)


@dataclass(frozen=True, eq=False)
class DiscreteStateSpace:
    """``x[k+1] = A x[k] + B u[k] + F v[k]``, ``y[k] = C x[k] + w[k]``."""

    A: np.ndarray
    B: np.ndarray
    F: np.ndarray
    C: np.ndarray
    tau: float

    def __post_init__(self):
        for name in ("A", "B", "F", "C"):
            object.__setattr__(self, name, _as2d(getattr(self, name), name))
        _check_dims(self.A, self.B, self.F, self.C)
        if not self.tau > 0:
            raise ValueError("sampling time must be positive")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def d(self) -> int:
        return self.F.shape[1]

    def step(self, x, u, v) -> np.ndarray:
        return self.A @ x + self.B @ np.atleast_1d(u) + self.F @ np.atleast_1d(v)

    def output(self, x, w=None) -> np.ndarray:
        y = self.C @ x
        return y if w is None else y + w


def zoh_discretize(css: ContinuousStateSpace, tau: float) -> DiscreteStateSpace:
    """Zero-order-hold discretisation via one augmented matrix exponential.

    ``expm([[Ac, Bc Fc], [0, 0]] * tau)`` holds ``exp(Ac tau)`` in its top-left
    block and ``int_0^tau exp(Ac s) ds [Bc Fc]`` in its top-right block.
    """
    if not tau > 0:
        raise ValueError("sampling time must be positive")
    n, m, d = css.n, css.m, css.d
    aug = np.zeros((n + m + d, n + m + d))
    aug[:n, :n] = css.Ac
    aug[:n, n:n + m] = css.Bc
    aug[:n, n + m:] = css.Fc
    with np.errstate(over="ignore", invalid="ignore"):
        E = expm(aug * tau)
    if not np.all(np.isfinite(E)):
        raise FloatingPointError("matrix exponential overflowed; check Ac*tau scaling")
    return DiscreteStateSpace(
        A=E[:n, :n], B=E[:n, n:n + m], F=E[:n, n + m:], C=css.Cc.copy(), tau=tau
    )


def _toeplitz_blocks(powers: list[np.ndarray], G: np.ndarray, Hp: int) -> np.ndarray:
    n, k = G.shape
    blocks = [P @ G for P in powers[:Hp]]  # A^0 G ... A^{Hp-1} G
    out = np.zeros((n * Hp, k * Hp))
    for i in range(Hp):
        for j in range(i + 1):
            out[i * n:(i + 1) * n, j * k:(j + 1) * k] = blocks[i - j]
    return out


@dataclass(frozen=True, eq=False)
class PredictionOperator:
    """Lifted horizon matrices: ``X = Psi x_k + Theta U + Gamma V``."""

    Psi: np.ndarray
    Theta: np.ndarray
    Gamma: np.ndarray
    Hp: int
    n: int
    m: int
    d: int
    powers: tuple = field(repr=False, default=())


def build_prediction_operator(dss: DiscreteStateSpace, Hp: int) -> PredictionOperator:
    if Hp < 1:
        raise ValueError("horizon must be >= 1")
    n = dss.n
    powers = [np.eye(n)]
    for _ in range(Hp):
        powers.append(powers[-1] @ dss.A)
    Psi = np.vstack(powers[1:Hp + 1])
    Theta = _toeplitz_blocks(powers, dss.B, Hp)
    Gamma = _toeplitz_blocks(powers, dss.F, Hp)
    return PredictionOperator(Psi=Psi, Theta=Theta, Gamma=Gamma, Hp=Hp, n=n,
                              m=dss.m, d=dss.d, powers=tuple(powers))


def predict_states(op: PredictionOperator, x_k, U, V) -> np.ndarray:
    x_k = np.asarray(x_k, dtype=float).ravel()
    U = np.asarray(U, dtype=float).ravel()
    V = np.asarray(V, dtype=float).ravel()
    if x_k.size != op.n or U.size != op.m * op.Hp or V.size != op.d * op.Hp:
        raise ValueError(
            f"expected x_k ({op.n}), U ({op.m * op.Hp}), V ({op.d * op.Hp}); "
            f"got {x_k.size}, {U.size}, {V.size}"
        )
    return op.Psi @ x_k + op.Theta @ U + op.Gamma @ V


def simulate_recursion(dss: DiscreteStateSpace, x0, U, V) -> np.ndarray:
    """Step the difference equation sample by sample.

    ``U`` and ``V`` are ``(N, m)`` and ``(N, d)``; returns ``(N, n)`` states
    ``x_1 ... x_N``.
    """
    U = np.asarray(U, dtype=float).reshape(-1, dss.m)
    V = np.asarray(V, dtype=float).reshape(-1, dss.d)
    x = np.asarray(x0, dtype=float).ravel()
    out = np.empty((len(U), dss.n))
    for k in range(len(U)):
        x = dss.A @ x + dss.B @ U[k] + dss.F @ V[k]
        out[k] = x
    return out


def rk4_zoh(css: ContinuousStateSpace, x0, U, V, tau: float, substeps: int) -> np.ndarray:
    """Classical RK4 on the continuous model with inputs held over each sample.

    Returns states at the sample instants ``tau, 2 tau, ...`` as ``(N, n)``.
    """
    U = np.asarray(U, dtype=float).reshape(-1, css.m)
    V = np.asarray(V, dtype=float).reshape(-1, css.d)
    h = tau / substeps
    A = css.Ac
    x = np.asarray(x0, dtype=float).ravel().copy()
    out = np.empty((len(U), css.n))
    for k in range(len(U)):
        c = css.Bc @ U[k] + css.Fc @ V[k]
        for _ in range(substeps):
            k1 = A @ x + c
            k2 = A @ (x + 0.5 * h * k1) + c
            k3 = A @ (x + 0.5 * h * k2) + c
            k4 = A @ (x + h * k3) + c
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k] = x
    return out


def periodic_steady_state(dss: DiscreteStateSpace, U_period, V_period) -> np.ndarray:
    """State at the start of a period that repeats itself under periodic inputs.

    Solves ``(I - A^N) x = sum_j A^{N-1-j} (B u_j + F v_j)`` for one period of
    ``N`` samples.
    """
    U = np.asarray(U_period, dtype=float).reshape(-1, dss.m)
    V = np.asarray(V_period, dtype=float).reshape(-1, dss.d)
    if len(U) != len(V):
        raise ValueError("input and disturbance periods differ in length")
    forced = simulate_recursion(dss, np.zeros(dss.n), U, V)[-1]
    AN = np.linalg.matrix_power(dss.A, len(U))
    return np.linalg.solve(np.eye(dss.n) - AN, forced)
