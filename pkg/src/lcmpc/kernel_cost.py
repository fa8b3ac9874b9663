"""Limit-cycle residual kernel and its quartic horizon cost.

For consecutive predicted states the kernel residual is

    r_j = x_{j+1} - (1 + mu) R x_j - alpha R x_j (x_j.x_j),

and the cost is the sum of ``|r_j|^2`` over the pairs inside the stacked
vector ``X = (x_{k+1}, ..., x_{k+Hp})``. The measured state ``x_k`` does not
enter a residual. Expanding the squares gives the matrix form

    J(X) = X'Q2 X + 2 alpha X'(L o (X X' Q4)) X
           + alpha^2 X'(L o (X X' (L o (X X')))) X

with ``o`` the Hadamard product. :func:`cost_vectorized` evaluates that
expression literally; :func:`cost_direct` sums residuals pair by pair and is
the reference it is checked against. The controller uses the vectorised
pair sum in :func:`cost_value` and :func:`cost_value_and_gradient`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .normal_forms import LimitCycleParams


class GradientMode(enum.Enum):
    FINITE_DIFFERENCE = "FiniteDifference"
    ANALYTIC = "Analytic"


@dataclass(frozen=True)
class CostBreakdown:
    """The three summands of the quartic cost.

    ``total`` is the sum of the terms for the matrix form. For the pair-sum
    form it is the accumulated squared residual norm, which equals the sum of
    the terms up to roundoff and is never negative.
    """

    quadratic_term: float
    cubic_term: float
    quartic_term: float
    total: float


@dataclass(frozen=True, eq=False)
class KernelCostMatrices:
    """Block-banded ``Q2``, ``L`` and ``Q4`` for one horizon (sparse CSR)."""

    Q2: sp.csr_matrix
    L: sp.csr_matrix
    Q4: sp.csr_matrix
    Hp: int

    def dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.Q2.toarray(), self.L.toarray(), self.Q4.toarray()


def _blocks(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 1 or X.size % 2 or X.size < 4:
        raise ValueError(f"stacked state vector must have even length >= 4, got shape {X.shape}")
    return X.reshape(-1, 2)


def kernel_residual(x_next, x, p: LimitCycleParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    Rx = p.rotation @ x
    return np.asarray(x_next, dtype=float) - (1.0 + p.mu) * Rx - p.alpha * Rx * float(x @ x)


def build_cost_matrices(p: LimitCycleParams, Hp: int) -> KernelCostMatrices:
    if Hp < 2:
        raise ValueError(f"horizon must be >= 2, got {Hp}")
    R = p.rotation
    I2 = np.eye(2)
    ones = np.ones((2, 2))
    g = 1.0 + p.mu

    n = 2 * Hp
    q2, lb, q4 = np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n))

    def put(M, i, j, block):
        M[2 * i:2 * i + 2, 2 * j:2 * j + 2] = block

    for j in range(Hp):
        if j == 0:
            put(q2, j, j, g * g * I2)
        elif j == Hp - 1:
            put(q2, j, j, I2)
        else:
            put(q2, j, j, (1.0 + g * g) * I2)
        if j < Hp - 1:
            put(q2, j + 1, j, -g * R)
            put(q2, j, j + 1, -g * R.T)
            put(lb, j, j, ones)
            put(q4, j, j, g * I2)
            put(q4, j + 1, j, -R)
    # last diagonal blocks of L and Q4 stay zero
    as_csr = sp.csr_matrix
    return KernelCostMatrices(Q2=as_csr(q2), L=as_csr(lb), Q4=as_csr(q4), Hp=Hp)


def cost_direct(X, p: LimitCycleParams) -> CostBreakdown:
    """Reference pair-by-pair accumulation of squared kernel residuals."""
    blocks = _blocks(X)
    R = p.rotation
    g = 1.0 + p.mu
    quad = cubic = quart = total = 0.0
    for j in range(len(blocks) - 1):
        x, x_next = blocks[j], blocks[j + 1]
        s = float(x @ x)
        a = x_next - g * (R @ x)
        b = p.alpha * s * (R @ x)
        r = kernel_residual(x_next, x, p)
        quad += float(a @ a)
        cubic -= 2.0 * float(a @ b)
        quart += float(b @ b)
        total += float(r @ r)
    return CostBreakdown(quad, cubic, quart, total)


def cost_vectorized(X, M: KernelCostMatrices, p: LimitCycleParams) -> CostBreakdown:
    """Evaluate the matrix form term by term, materialising ``X X'``."""
    X = np.asarray(X, dtype=float)
    n = 2 * M.Hp
    if X.shape != (n,):
        raise ValueError(f"X has shape {X.shape}, matrices expect ({n},)")
    L = M.L.toarray()
    XX = np.outer(X, X)
    quad = float(X @ (M.Q2 @ X))
    # (X X') Q4 == ((Q4' (X X')')' ; sparse on the left keeps it cheap
    XXQ4 = (M.Q4.T @ XX.T).T
    cubic = 2.0 * p.alpha * float(X @ ((L * XXQ4) @ X))
    inner = XX @ (L * XX)
    quart = p.alpha ** 2 * float(X @ ((L * inner) @ X))
    return CostBreakdown(quad, cubic, quart, quad + cubic + quart)


def residuals(X, p: LimitCycleParams) -> np.ndarray:
    """All ``Hp - 1`` kernel residuals as an ``(Hp - 1, 2)`` array."""
    blocks = _blocks(X)
    x, x_next = blocks[:-1], blocks[1:]
    Rx = x @ p.rotation.T
    s = np.einsum("ij,ij->i", x, x)[:, None]
    return x_next - (1.0 + p.mu + p.alpha * s) * Rx


def cost_value(X, p: LimitCycleParams) -> float:
    r = residuals(X, p)
    return float(np.einsum("ij,ij->", r, r))


def _analytic_gradient(blocks: np.ndarray, r: np.ndarray, p: LimitCycleParams) -> np.ndarray:
    # d r_j / d x_{j+1} = I
    # d r_j / d x_j = -[(1 + mu + alpha s) R + 2 alpha R x x']
    x = blocks[:-1]
    s = np.einsum("ij,ij->i", x, x)
    Rt_r = r @ p.rotation  # rows hold R' r_j
    xr = np.einsum("ij,ij->i", x, Rt_r)  # x_j' R' r_j
    grad = np.zeros_like(blocks)
    grad[1:] += 2.0 * r
    grad[:-1] -= 2.0 * ((1.0 + p.mu + p.alpha * s)[:, None] * Rt_r + 2.0 * p.alpha * xr[:, None] * x)
    return grad.ravel()


def cost_value_and_gradient(X, p: LimitCycleParams) -> tuple[float, np.ndarray]:
    blocks = _blocks(X)
    r = residuals(X, p)
    return float(np.einsum("ij,ij->", r, r)), _analytic_gradient(blocks, r, p)


def fd_step(X) -> float:
    return max(1e-6, 1e-8 * float(np.max(np.abs(X), initial=0.0)))


def cost_gradient(X, M: KernelCostMatrices, p: LimitCycleParams,
                  mode: GradientMode = GradientMode.ANALYTIC) -> np.ndarray:
    """Gradient of the horizon cost with respect to the stacked states.

    ``ANALYTIC`` differentiates the pair sum in closed form. ``FINITE_DIFFERENCE``
    takes central differences of :func:`cost_vectorized` with step
    ``max(1e-6, 1e-8 * |X|_inf)``.
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (2 * M.Hp,):
        raise ValueError(f"X has shape {X.shape}, matrices expect ({2 * M.Hp},)")
    if mode is GradientMode.ANALYTIC:
        return cost_value_and_gradient(X, p)[1]
    h = fd_step(X)
    grad = np.empty_like(X)
    e = X.copy()
    for i in range(X.size):
        e[i] = X[i] + h
        fp = cost_vectorized(e, M, p).total
        e[i] = X[i] - h
        fm = cost_vectorized(e, M, p).total
        e[i] = X[i]
        grad[i] = (fp - fm) / (2.0 * h)
    return grad
