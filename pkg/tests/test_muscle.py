import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from hdys.rbd import (
    InfeasibleActivation,
    MuscleError,
    MuscleSet,
    muscle_to_torque,
    solve_activations,
    synth_emg,
)


def antagonist_pair():
    return MuscleSet(
        ("ag", "an"), np.array([[0.05], [-0.05]]), np.array([400.0, 400.0])
    )


def redundant_three():
    return MuscleSet(
        ("a", "b", "c"), np.array([[0.04], [0.03], [0.05]]), np.array([500.0, 400.0, 600.0])
    )


def test_zero_activation_zero_torque():
    ms = redundant_three()
    assert np.array_equal(muscle_to_torque(ms, np.zeros(3)), np.zeros(1))


def test_single_muscle_definition():
    ms = MuscleSet(("m",), np.array([[0.07]]), np.array([300.0]))
    tau = muscle_to_torque(ms, np.array([1.0]))
    assert abs(tau[0] - 0.07 * 300.0) < 1e-12


def test_antagonists_cancel():
    ms = antagonist_pair()
    tau = muscle_to_torque(ms, np.array([0.6, 0.6]))
    assert abs(tau[0]) < 1e-12


def test_activation_bounds_enforced():
    ms = antagonist_pair()
    with pytest.raises(MuscleError):
        muscle_to_torque(ms, np.array([1.2, 0.0]))
    with pytest.raises(MuscleError):
        muscle_to_torque(ms, np.array([-0.1, 0.0]))


def test_solve_zero_target_is_zero():
    ms = redundant_three()
    assert np.array_equal(solve_activations(ms, np.zeros(1)), np.zeros(3))


def test_solve_scalar_single_muscle_per_dof():
    ms = MuscleSet(("m",), np.array([[0.07]]), np.array([300.0]))
    a = solve_activations(ms, np.array([10.5]))
    assert abs(a[0] - 10.5 / (0.07 * 300.0)) < 1e-12


def test_solve_matches_grid_oracle():
    ms = redundant_three()
    b = ms.torque_map  # [20, 12, 30]
    grid = np.arange(0.0, 1.0 + 1e-12, 1e-3)
    a1, a2 = np.meshgrid(grid, grid, indexing="ij")
    for tau in (7.0, 30.0, 55.0):
        a = solve_activations(ms, np.array([tau]))
        assert np.abs(muscle_to_torque(ms, a) - tau).max() < 1e-6 * max(1.0, tau)
        a0 = (tau - b[0, 1] * a1 - b[0, 2] * a2) / b[0, 0]
        valid = (a0 >= 0) & (a0 <= 1)
        norms = np.where(valid, a0**2 + a1**2 + a2**2, np.inf)
        i, j = np.unravel_index(np.argmin(norms), norms.shape)
        best = np.array([a0[i, j], a1[i, j], a2[i, j]])
        assert np.abs(a - best).max() < 2e-3


def test_solve_infeasible_not_clipped():
    ms = redundant_three()
    # max torque = 20 + 12 + 30 = 62
    with pytest.raises(InfeasibleActivation):
        solve_activations(ms, np.array([80.0]))
    with pytest.raises(InfeasibleActivation):
        solve_activations(ms, np.array([-5.0]))  # all arms positive


def test_solve_requires_enough_muscles():
    ms = MuscleSet(("m",), np.array([[0.05, 0.0]]), np.array([100.0]))
    with pytest.raises(MuscleError):
        solve_activations(ms, np.zeros(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_roundtrip_property_random_feasible_targets(seed):
    rng = np.random.default_rng(seed)
    n_dof = int(rng.integers(1, 5))
    n_mus = int(rng.integers(n_dof + 1, n_dof + 6))
    arms = rng.uniform(-0.08, 0.08, (n_mus, n_dof))
    while np.linalg.matrix_rank(arms.T) < n_dof:
        arms = rng.uniform(-0.08, 0.08, (n_mus, n_dof))
    ms = MuscleSet(tuple(f"m{i}" for i in range(n_mus)), arms, rng.uniform(100, 900, n_mus))
    a_true = rng.uniform(0.05, 0.95, n_mus)
    tau = muscle_to_torque(ms, a_true)  # feasible by construction
    a = solve_activations(ms, tau)
    assert (a >= -1e-12).all() and (a <= 1 + 1e-12).all()
    assert np.abs(muscle_to_torque(ms, a) - tau).max() <= 1e-6 * max(1.0, np.abs(tau).max())
    assert float(a @ a) <= float(a_true @ a_true) + 1e-9  # never worse than a witness


# -- surface EMG -------------------------------------------------------------------


def test_emg_zero_input_zero_output():
    y = synth_emg(np.zeros((30, 3)), fps=100, noise_seed=None)
    assert np.array_equal(y, np.zeros((30, 3)))


def test_emg_step_response_time_constant():
    a = np.zeros((20, 1))
    a[5:] = 1.0
    y = synth_emg(a, fps=100, noise_seed=None)
    # 40 ms after the step at fps 100 = 4 frames: exactly 1 - e^-1
    assert abs(y[9, 0] - (1.0 - np.exp(-1.0))) < 1e-12
    assert y[4, 0] == 0.0


def test_emg_deterministic_and_nonnegative():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 1, (50, 4))
    y1 = synth_emg(a, 90.0, noise_seed=123)
    y2 = synth_emg(a, 90.0, noise_seed=123)
    y3 = synth_emg(a, 90.0, noise_seed=124)
    assert np.array_equal(y1, y2)
    assert not np.array_equal(y1, y3)
    assert (y1 >= 0).all()


def test_emg_rejects_bad_activations():
    with pytest.raises(MuscleError):
        synth_emg(np.full((5, 2), 1.4), fps=90)
