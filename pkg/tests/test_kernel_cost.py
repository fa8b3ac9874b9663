import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lcmpc import kernel_cost as kc
from lcmpc.normal_forms import LimitCycleParams, ns_map_step, rotation_matrix

SIM = LimitCycleParams.from_frequency(0.01, -0.01, 2 * math.pi * 50, 2e-4)


def cycle_traj(p, Hp, rho=1.0, angle=0.3):
    x = rho * np.array([math.cos(angle), math.sin(angle)])
    out = [x]
    for _ in range(Hp - 1):
        x = ns_map_step(x, p)
        out.append(x)
    return np.concatenate(out)


def test_residual_zero_cases():
    np.testing.assert_array_equal(kc.kernel_residual([0, 0], [0, 0], SIM), [0, 0])
    x = np.array([0.6, -0.8])
    np.testing.assert_allclose(kc.kernel_residual(SIM.rotation @ x, x, SIM), [0, 0], atol=1e-16)


def test_residual_direct_value():
    # -(1 + mu + alpha) R_phi (1, 0) = -(cos(pi/50), sin(pi/50)), values from 30-digit arithmetic
    r = kc.kernel_residual([0, 0], [1, 0], SIM)
    np.testing.assert_allclose(r, [-0.998026728428271562, -0.0627905195293133761], rtol=1e-15)


def test_build_rejects_short_horizon():
    with pytest.raises(ValueError):
        kc.build_cost_matrices(SIM, 1)


def test_q2_degenerate_mu_zero():
    R = rotation_matrix(0.3)
    p = SimpleNamespace(mu=0.0, alpha=-1.0, rotation=R)
    Q2 = kc.build_cost_matrices(p, 2).Q2.toarray()
    np.testing.assert_array_equal(Q2, np.block([[np.eye(2), -R.T], [-R, np.eye(2)]]))


@pytest.mark.parametrize("Hp", [2, 3, 6, 200])
def test_block_structure(Hp):
    Q2, L, Q4 = kc.build_cost_matrices(SIM, Hp).dense()
    g, R, I = 1 + SIM.mu, SIM.rotation, np.eye(2)
    blk = lambda M, i, j: M[2 * i:2 * i + 2, 2 * j:2 * j + 2]
    np.testing.assert_array_equal(Q2, Q2.T)
    for i in range(Hp):
        for j in range(Hp):
            q2, l, q4 = blk(Q2, i, j), blk(L, i, j), blk(Q4, i, j)
            if i == j:
                want = g * g * I if i == 0 else (I if i == Hp - 1 else (1 + g * g) * I)
                np.testing.assert_array_equal(q2, want)
                np.testing.assert_array_equal(l, np.zeros((2, 2)) if i == Hp - 1 else np.ones((2, 2)))
                np.testing.assert_array_equal(q4, np.zeros((2, 2)) if i == Hp - 1 else g * I)
            elif i == j + 1:
                np.testing.assert_array_equal(q2, -g * R)
                np.testing.assert_array_equal(q4, -R)
                assert not l.any()
            elif j == i + 1:
                np.testing.assert_array_equal(q2, -g * R.T)
                assert not q4.any() and not l.any()
            else:
                assert not q2.any() and not q4.any() and not l.any()


def test_l_hp3_has_two_ones_blocks():
    L = kc.build_cost_matrices(SIM, 3).L.toarray()
    assert L.sum() == 8 and not L[4:, 4:].any()


def test_cycle_trajectory_has_zero_cost():
    for Hp in (2, 10, 200):
        X = cycle_traj(SIM, Hp)
        assert kc.cost_direct(X, SIM).total < 1e-20
        M = kc.build_cost_matrices(SIM, Hp)
        assert abs(kc.cost_vectorized(X, M, SIM).total) < 1e-12 * Hp
        assert np.linalg.norm(kc.cost_gradient(X, M, SIM)) < 1e-8


def test_zero_vector():
    X = np.zeros(10)
    M = kc.build_cost_matrices(SIM, 5)
    assert kc.cost_direct(X, SIM).total == 0
    assert kc.cost_vectorized(X, M, SIM).total == 0
    np.testing.assert_array_equal(kc.cost_gradient(X, M, SIM), np.zeros(10))
    np.testing.assert_array_equal(kc.cost_gradient(X, M, SIM, kc.GradientMode.FINITE_DIFFERENCE),
                                  np.zeros(10))


def test_wrong_amplitude_is_penalised():
    X = 2 * cycle_traj(SIM, 20)
    assert kc.cost_direct(X, SIM).total > 0
    M = kc.build_cost_matrices(SIM, 20)
    assert kc.cost_vectorized(X, M, SIM).total > 0


@pytest.mark.parametrize("Hp", [2, 3, 5, 17])
def test_oracle_equivalence_small_horizons(Hp, rng):
    M = kc.build_cost_matrices(SIM, Hp)
    for _ in range(1000):
        X = rng.uniform(-2, 2, size=2 * Hp)
        d, v = kc.cost_direct(X, SIM), kc.cost_vectorized(X, M, SIM)
        assert abs(v.total - d.total) <= 1e-10 * (1 + abs(d.total))
        # the three terms agree individually as well
        np.testing.assert_allclose([v.quadratic_term, v.cubic_term, v.quartic_term],
                                   [d.quadratic_term, d.cubic_term, d.quartic_term],
                                   rtol=1e-10, atol=1e-10)


def test_breakdown_total_is_sum_of_terms(rng):
    M = kc.build_cost_matrices(SIM, 7)
    c = kc.cost_vectorized(rng.normal(size=14), M, SIM)
    assert c.total == c.quadratic_term + c.cubic_term + c.quartic_term


def test_fast_path_matches_direct(rng):
    for Hp in (2, 9, 200):
        X = rng.normal(size=2 * Hp)
        assert kc.cost_value(X, SIM) == pytest.approx(kc.cost_direct(X, SIM).total, rel=1e-13)


def test_dimension_mismatch():
    M = kc.build_cost_matrices(SIM, 4)
    with pytest.raises(ValueError):
        kc.cost_vectorized(np.zeros(10), M, SIM)
    with pytest.raises(ValueError):
        kc.cost_gradient(np.zeros(6), M, SIM)


@settings(max_examples=100, deadline=None)
@given(arrays(float, 12, elements=st.floats(-5, 5)))
def test_nonnegative(X):
    M = kc.build_cost_matrices(SIM, 6)
    d = kc.cost_direct(X, SIM).total
    assert d >= 0
    v = kc.cost_vectorized(X, M, SIM).total
    assert v >= -1e-10 * (1 + abs(v))


@settings(max_examples=100, deadline=None)
@given(arrays(float, 16, elements=st.floats(-3, 3)), st.floats(0, 2 * math.pi))
def test_rotation_equivariance(X, psi):
    Rp = rotation_matrix(psi)
    Y = (X.reshape(-1, 2) @ Rp.T).ravel()
    a, b = kc.cost_direct(X, SIM).total, kc.cost_direct(Y, SIM).total
    assert abs(a - b) <= 1e-12 * max(a, 1e-300) + 1e-24


def test_single_block_perturbation_positive(rng):
    for Hp in (2, 5, 50):
        X = cycle_traj(SIM, Hp)
        for i in range(2 * Hp):
            Y = X.copy()
            Y[i] += 1e-3
            assert kc.cost_value(Y, SIM) > 0


@pytest.mark.parametrize("Hp", [4, 20])
def test_gradient_against_central_differences(Hp, rng):
    M = kc.build_cost_matrices(SIM, Hp)
    for _ in range(100):
        X = rng.uniform(-2, 2, size=2 * Hp)
        ga = kc.cost_gradient(X, M, SIM, kc.GradientMode.ANALYTIC)
        gf = kc.cost_gradient(X, M, SIM, kc.GradientMode.FINITE_DIFFERENCE)
        assert np.max(np.abs(ga - gf)) <= 1e-5 * np.max(np.abs(ga))


def test_fd_step_rule():
    assert kc.fd_step(np.zeros(4)) == 1e-6
    assert kc.fd_step(np.array([0.0, -1e4])) == pytest.approx(1e-4)
