import dataclasses
import math

import numpy as np
import pytest

import lcmpc.controller as ctl
from lcmpc.controller import (
    LcmpcConfig,
    LcmpcController,
    lcmpc_objective,
    predict_disturbance,
    solve_period,
)
from lcmpc.fourier_param import expand_inputs, predict_states_param
from lcmpc.linear_plant import DiscreteStateSpace
from lcmpc.normal_forms import LimitCycleParams
from lcmpc.optimizer import OptimizerResult, Termination
from lcmpc.grid_model import reference_disturbance, synthesize_disturbance
from lcmpc.simulator import (
    SimulationConfig,
    build_controller,
    build_plant,
    undisturbed_initial_state,
)

TAU, W = 2e-4, 2 * math.pi * 50
LC = LimitCycleParams.from_frequency(0.01, -0.01, W, TAU)


def rotation_plant():
    # x+ = R_phi x + B u: free response already on the unit cycle
    return DiscreteStateSpace(LC.rotation, [[1.0], [0.0]], np.zeros((2, 1)), np.eye(2), TAU)


def test_config_validation():
    with pytest.raises(ValueError):
        LcmpcConfig(LC, 150, 5, rotation_plant(), 100)
    with pytest.raises(ValueError):
        LcmpcConfig(LC, 200, 5, rotation_plant(), 50)
    other = DiscreteStateSpace(LC.rotation, [[1.0], [0.0]], np.zeros((2, 1)), np.eye(2), 1e-4)
    with pytest.raises(ValueError):
        LcmpcConfig(LC, 200, 5, other, 100)
    three = DiscreteStateSpace(np.eye(3), np.ones((3, 1)), np.zeros((3, 1)), np.eye(3), TAU)
    with pytest.raises(ValueError):
        LcmpcConfig(LC, 200, 5, three, 100)


def test_on_cycle_zero_cost_and_zero_plan():
    c = LcmpcController(LcmpcConfig(LC, 200, 5, rotation_plant(), 100))
    x = np.array([0.0, 1.0])
    V = np.zeros(200)
    assert c.objective(np.zeros(10), x, V) < 1e-20
    plan = c.solve_period(x, V)
    np.testing.assert_allclose(plan.P_star, 0, atol=1e-12)
    np.testing.assert_allclose(plan.U_star, 0, atol=1e-12)
    assert plan.cost_trace.iterations == 0


@pytest.fixture(scope="module")
def paper_ctrl():
    cfg = SimulationConfig()
    plant = build_plant(cfg)
    x0 = undisturbed_initial_state(cfg, plant)
    i_d, v_s = synthesize_disturbance(cfg.disturbance, 400, 50, np.arange(200), TAU)
    V = np.column_stack([i_d, v_s]).ravel()
    return build_controller(cfg, plant), x0, V


def test_objective_nonnegative(paper_ctrl, rng):
    c, x0, V = paper_ctrl
    for _ in range(20):
        assert c.objective(rng.normal(scale=5, size=10), x0, V) >= -1e-10


def test_objective_matrix_form_agrees(paper_ctrl, rng):
    c, x0, V = paper_ctrl
    P = rng.normal(size=10)
    a = lcmpc_objective(P, x0, V, c.op, c.basis, c.cfg.lc)
    b = lcmpc_objective(P, x0, V, c.op, c.basis, c.cfg.lc, c.matrices)
    assert a == pytest.approx(b, rel=1e-10)


def test_optimum_beats_zero(paper_ctrl):
    c, x0, V = paper_ctrl
    plan = c.solve_period(x0, V)
    assert plan.objective < c.objective(np.zeros(10), x0, V)
    assert plan.cost_trace.converged is Termination.GRADIENT_TOL
    assert plan.objective == pytest.approx(c.objective(plan.P_star, x0, V), rel=1e-12)


def test_plan_is_first_period(paper_ctrl):
    c, x0, V = paper_ctrl
    plan = c.solve_period(x0, V)
    U = expand_inputs(c.basis, plan.P_star, 1)
    assert plan.U_star.shape == (100,)
    np.testing.assert_array_equal(plan.U_star, U[:100])
    np.testing.assert_allclose(U[100:], U[:100], atol=1e-12)


def test_warm_start_at_optimum(paper_ctrl):
    c, x0, V = paper_ctrl
    first = c.solve_period(x0, V)
    again = c.solve_period(x0, V, first.P_star)
    assert again.cost_trace.iterations <= 2
    assert again.cost_trace.converged is Termination.GRADIENT_TOL


def test_fd_gradient_mode_reaches_same_optimum(paper_ctrl):
    c, x0, V = paper_ctrl
    cfg = dataclasses.replace(c.cfg, analytic_gradient=False)
    fd = LcmpcController(cfg).solve_period(x0, V)
    ref = c.solve_period(x0, V)
    assert fd.objective == pytest.approx(ref.objective, rel=1e-6)


def test_fallback_to_warm_start(paper_ctrl, monkeypatch):
    c, x0, V = paper_ctrl
    warm = np.full(10, 0.01)

    def failing(f, p0, g=None, s=None):
        return OptimizerResult(p_star=np.full(10, np.nan), f_star=math.nan, iterations=1,
                               converged=Termination.FAILED, f_evals=1, g_evals=1,
                               grad_norm=math.nan, message="forced")

    monkeypatch.setattr(ctl, "minimize", failing)
    plan = solve_period(c, x0, V, warm)
    assert plan.fallback
    np.testing.assert_array_equal(plan.P_star, warm)
    np.testing.assert_array_equal(plan.U_star, expand_inputs(c.basis, warm)[:100])


def test_predicted_states_match_open_loop_application(paper_ctrl):
    c, x0, V = paper_ctrl
    plan = c.solve_period(x0, V)
    X = predict_states_param(c.op, c.basis, x0, plan.P_star, V).reshape(-1, 2)
    dss = c.cfg.plant
    Vm = V.reshape(-1, 2)
    x = x0
    for k in range(100):
        x = dss.step(x, plan.U_star[k], Vm[k])
        np.testing.assert_allclose(x, X[k], atol=1e-9)


# --- disturbance prediction ---

def test_predict_constant():
    V = predict_disturbance(np.full((100, 2), 3.0), 200, 100)
    np.testing.assert_array_equal(V, 3.0)
    assert V.shape == (400,)


def test_predict_periodic_matches_truth():
    k = np.arange(300)
    i_d, v_s = synthesize_disturbance(reference_disturbance(), 400, 50, k, TAU)
    v = np.column_stack([i_d, v_s])
    V = predict_disturbance(v[:100], 200, 100)
    np.testing.assert_allclose(V, v[100:300].ravel(), atol=1e-10)
    np.testing.assert_allclose(predict_disturbance(np.sin(2 * np.pi * k[:100] / 100), 200, 100),
                               np.sin(2 * np.pi * k[100:300] / 100), atol=1e-12)


def test_predict_missing_history():
    nominal = np.arange(400.0)
    np.testing.assert_array_equal(predict_disturbance(np.zeros((30, 2)), 200, 100, nominal), nominal)
    np.testing.assert_array_equal(predict_disturbance(None, 200, 100, nominal), nominal)
    with pytest.raises(ValueError):
        predict_disturbance(None, 200, 100)
    with pytest.raises(ValueError):
        predict_disturbance(np.zeros((100, 2)), 150, 100)
