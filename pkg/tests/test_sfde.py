"""Euler scheme: causality, determinism, splitting, probes, exactness."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathcalc import (
    BlowUpError,
    DomainError,
    NoisePlan,
    SfdeModel,
    StoppedPath,
    TimeGrid,
    check_bounded,
    check_lipschitz,
    euler_solve,
    get_model,
    mc_expectation,
    model_ids,
    random_bounded_model,
    simulate_ensemble,
)

GRID = TimeGrid(1.0, 64)
START = StoppedPath.constant(GRID, 0.3, stop_index=16)


def test_registry_contents():
    assert set(model_ids()) == {"zero", "drift1", "bm", "linear-pd", "tanh-pd"}
    assert get_model("zero").noise_free
    assert get_model("drift1").noise_free
    assert not get_model("bm").noise_free


def test_drift_one_is_solved_exactly():
    # constant drift, no noise: Euler reproduces the straight line bitwise-ish
    sol = euler_solve(get_model("drift1"), START, NoisePlan(1))
    times = GRID.nodes[16:]
    expected = 0.3 + (times - 0.25)
    assert sol.stop_index == 64
    assert np.allclose(sol.samples[16:, 0], expected, rtol=0, atol=1e-14)


def test_zero_model_stays_put():
    sol = euler_solve(get_model("zero"), START, NoisePlan(1))
    assert np.all(sol.samples[:, 0] == 0.3)


def test_bm_is_partial_sums_of_increments():
    plan = NoisePlan(42)
    inc = plan.increments(0, 48, GRID.dt)
    sol = euler_solve(get_model("bm"), START, plan)
    expected = 0.3 + np.concatenate([[0.0], np.cumsum(inc[:, 0])])
    assert np.allclose(sol.samples[16:, 0], expected, rtol=0, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 31), cut=st.integers(min_value=1, max_value=47))
def test_causality_of_random_models(seed, cut):
    # changing increments after a node must not change the solution before it
    rng = np.random.default_rng(seed)
    model = random_bounded_model(seed)
    inc_a = rng.normal(0, np.sqrt(GRID.dt), size=(48, 1))
    inc_b = inc_a.copy()
    inc_b[cut:] = rng.normal(0, np.sqrt(GRID.dt), size=(48 - cut, 1))
    sol_a = euler_solve(model, START, increments=inc_a)
    sol_b = euler_solve(model, START, increments=inc_b)
    assert np.array_equal(sol_a.samples[: 16 + cut + 1], sol_b.samples[: 16 + cut + 1])


def test_same_seed_is_bitwise_reproducible():
    a = simulate_ensemble(get_model("tanh-pd"), START, 8, NoisePlan(9))
    b = simulate_ensemble(get_model("tanh-pd"), START, 8, NoisePlan(9))
    assert np.array_equal(a, b)


def test_ensemble_rows_are_independent_of_splitting():
    model = get_model("linear-pd")
    plan = NoisePlan(5)
    whole = simulate_ensemble(model, START, 6, plan)
    head = simulate_ensemble(model, START, 3, plan, first_path=0)
    tail = simulate_ensemble(model, START, 3, plan, first_path=3)
    assert np.array_equal(whole, np.concatenate([head, tail], axis=0))


def test_ensemble_row_matches_single_path_solver():
    model = get_model("tanh-pd")
    plan = NoisePlan(21)
    rows = simulate_ensemble(model, START, 4, plan)
    for r in range(4):
        single = euler_solve(model, START, plan, path_index=r)
        assert np.allclose(rows[r, :, 0], single.samples[16:, 0], rtol=1e-10, atol=1e-12)


def test_partial_segment_and_bounds():
    model = get_model("bm")
    sol = simulate_ensemble(model, START, 2, NoisePlan(3), t_end=0.75)
    assert sol.shape == (2, 33, 1)  # nodes 16..48 inclusive
    # a zero-length segment is legal and returns just the shared start row
    flat = simulate_ensemble(model, START, 2, NoisePlan(3), t_end=0.25)
    assert flat.shape == (2, 1, 1)
    with pytest.raises(DomainError):
        simulate_ensemble(model, START, 2, NoisePlan(3), t_end=0.125)


def test_mc_expectation_reports_stderr():
    from pathcalc import get_functional

    est = mc_expectation(
        get_functional("endpoint:linear"),
        get_model("bm"),
        START,
        400,
        NoisePlan(14),
    )
    assert est.n_paths == 400
    # terminal of Brownian motion from 0.3 over 0.75 units of time
    assert est.mean == pytest.approx(0.3, abs=4 * np.sqrt(0.75) / 20)
    assert est.stderr == pytest.approx(np.sqrt(0.75) / 20, rel=0.15)


def test_blow_up_is_diagnosed():
    exploding = SfdeModel(
        name="exploding",
        dim=1,
        noise_dim=1,
        drift=lambda t, p: np.array([float(p.endpoint()[0]) ** 3 * 1e6 + 1e6]),
        diffusion=lambda t, p: np.zeros((1, 1)),
        noise_free=True,
    )
    with pytest.raises(BlowUpError):
        euler_solve(exploding, START, NoisePlan(1))


def test_declared_bounds_are_spot_checked():
    report = check_bounded(get_model("tanh-pd"), GRID, seed=2)
    assert report.passed
    assert report.worst <= report.threshold
    # an undersized declaration must fail the same sweep
    bad = check_bounded(get_model("tanh-pd"), GRID, bound=1e-3, seed=2)
    assert not bad.passed


def test_declared_lipschitz_is_spot_checked():
    report = check_lipschitz(get_model("linear-pd"), GRID, seed=4)
    assert report.passed
    bad = check_lipschitz(get_model("linear-pd"), GRID, constant=1e-4, seed=4)
    assert not bad.passed


def test_checkers_require_a_constant_to_test():
    anonymous = SfdeModel(
        name="anonymous",
        dim=1,
        noise_dim=1,
        drift=lambda t, p: np.zeros(1),
        diffusion=lambda t, p: np.zeros((1, 1)),
        noise_free=True,
    )
    with pytest.raises(DomainError):
        check_bounded(anonymous, GRID)
    with pytest.raises(DomainError):
        check_lipschitz(anonymous, GRID)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 31))
def test_random_models_pass_their_own_declarations(seed):
    model = random_bounded_model(seed)
    assert check_bounded(model, GRID, seed=seed, n_probes=8).passed
    assert check_lipschitz(model, GRID, seed=seed, n_probes=8).passed


def test_dimension_mismatch_is_rejected():
    two_dim = StoppedPath.constant(GRID, np.array([0.0, 0.0]), stop_index=16)
    with pytest.raises(DomainError):
        euler_solve(get_model("bm"), two_dim, NoisePlan(1))
