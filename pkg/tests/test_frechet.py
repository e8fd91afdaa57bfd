"""First-variation machinery: directional quotients, measure recovery, atoms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathcalc import (
    DomainError,
    Functional,
    NonConvergenceError,
    RampFamily,
    StoppedPath,
    TimeGrid,
    apply_extended_derivative,
    atom_at_t,
    bilinear_atom_at_t,
    directional_derivative,
    estimate_riesz_measure,
    get_functional,
    hat_direction,
    horizontal_derivative,
    ramp_direction,
    second_directional_derivative,
    time_derivative,
)

GRID = TimeGrid(1.0, 256)
CONST = StoppedPath.constant(GRID, 0.3, stop_index=128)


def _random_path(seed, grid=GRID, k=128):
    rng = np.random.default_rng(seed)
    vals = 0.2 + np.cumsum(rng.normal(0.0, np.sqrt(grid.dt), size=grid.node_count + 1))
    return StoppedPath.from_values(grid, vals, stop_index=k)


def test_directional_derivative_closed_forms():
    # a hat below the stop contributes dt to the running integral, nothing to
    # the endpoint; the stop-node hat is the other way around
    f_int = get_functional("integral:identity")
    f_end = get_functional("endpoint:square")
    below = hat_direction(GRID, 100)
    at_stop = hat_direction(GRID, 128)
    assert directional_derivative(f_int, CONST, below) == pytest.approx(GRID.dt, abs=1e-12)
    assert directional_derivative(f_int, CONST, at_stop) == pytest.approx(0.0, abs=1e-12)
    assert directional_derivative(f_end, CONST, below) == pytest.approx(0.0, abs=1e-12)
    assert directional_derivative(f_end, CONST, at_stop) == pytest.approx(0.6, abs=1e-9)


def test_second_directional_derivative_is_symmetric():
    f = get_functional("product")
    p = _random_path(7)
    u = hat_direction(GRID, 64)
    v = hat_direction(GRID, 128)
    suv = second_directional_derivative(f, p, u, v)
    svu = second_directional_derivative(f, p, v, u)
    assert suv == pytest.approx(svu, abs=1e-8)
    # product of endpoint and integral: cross term is one hat in each factor
    assert suv == pytest.approx(GRID.dt, rel=1e-4)


def test_time_derivative_matches_horizontal_quotient():
    # both are the same flat-extension quotient; agreement is exact
    for fid in ("integral:identity", "quadratic-integral", "endpoint-time:square"):
        f = get_functional(fid)
        assert time_derivative(f, CONST) == horizontal_derivative(f, CONST)


def test_atom_of_endpoint_functional():
    atom = atom_at_t(get_functional("endpoint:square"), CONST)
    assert atom[0] == pytest.approx(0.6, abs=1e-9)


def test_atom_of_integral_functional_vanishes():
    atom = atom_at_t(get_functional("integral:identity"), CONST)
    assert atom[0] == pytest.approx(0.0, abs=1e-9)


def test_bilinear_atom_of_endpoint_square():
    lam = bilinear_atom_at_t(get_functional("endpoint:square"), CONST)
    assert lam.shape == (1, 1)
    assert lam[0, 0] == pytest.approx(2.0, abs=1e-6)


def test_ramp_direction_shape():
    eta = ramp_direction(GRID, 128, 8, np.array([1.0]))
    vals = eta.node_values()[:, 0]
    m = GRID.step_count(1.0 / 8)
    assert vals[128] == 1.0
    assert vals[128 - m] == 0.0
    assert np.all(vals[: 128 - m] == 0.0)
    # linear rise over the support
    assert vals[128 - m // 2] == pytest.approx(0.5)


def test_ramp_family_validation():
    from pathcalc import GridAlignmentError

    with pytest.raises(DomainError):
        RampFamily((8,))
    with pytest.raises(DomainError):
        RampFamily((8, 8, 16))
    with pytest.raises(DomainError):
        RampFamily((0, 8))
    with pytest.raises(GridAlignmentError):
        RampFamily((3, 6)).widths(GRID, 128)  # 1/3 is not on the grid
    with pytest.raises(DomainError):
        RampFamily((2, 4)).widths(GRID, 64)  # support longer than the stop time


# the weighted entry's ramp response has a genuine quadratic term in the
# ramp width, so its extrapolated (zero) atom keeps a small step-squared
# remainder; the other entries respond linearly and extrapolate exactly
@pytest.mark.parametrize(
    "fid,atom_tol",
    [
        ("endpoint:square", 1e-6),
        ("integral:identity", 1e-6),
        ("weighted:linear", 1e-4),
        ("product", 1e-6),
    ],
)
def test_recovered_measure_matches_closed_form(fid, atom_tol):
    f = get_functional(fid)
    ref = f.analytic_frechet_representation(CONST)
    rep = estimate_riesz_measure(f, CONST)
    assert np.max(np.abs(rep.weights - ref.weights)) < 1e-4
    assert np.max(np.abs(rep.atom - ref.atom)) < atom_tol


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_representation_predicts_directional_quotients(seed):
    # the recovered measure must reproduce the quotient along a fresh direction
    f = get_functional("product")
    p = _random_path(seed)
    rep = estimate_riesz_measure(f, p)
    eta = StoppedPath.from_function(GRID, lambda s: np.sin(3 * s), stop_index=128)
    predicted = rep.apply(eta)
    direct = directional_derivative(f, p, eta)
    assert predicted == pytest.approx(direct, rel=1e-3, abs=1e-6)


def test_nonconvergent_ramp_sequence_is_flagged():
    # response with a strong quadratic component in the ramp width: the two
    # admissible extrapolants disagree and the probe must say so
    def amplified(q):
        k = q.stop_index
        if k == 0:
            return 0.0
        nodes = q.grid.nodes[:k]
        return 10.0 * float(np.sum(nodes * q.samples[:k, 0]) * q.grid.dt)

    f = Functional("amplified-weighted", amplified)
    with pytest.raises(NonConvergenceError) as err:
        atom_at_t(f, CONST)
    assert len(err.value.trace) == 4


def test_apply_extended_derivative_splits_density_and_atom():
    f = get_functional("product")
    rep = f.analytic_frechet_representation(CONST)
    phi = StoppedPath.constant(GRID, 1.0, stop_index=128)
    # density mass: E * dt per node below the stop; atom acts on phi(t) + upsilon
    base = apply_extended_derivative(rep, phi, np.array([0.0]))
    shifted = apply_extended_derivative(rep, phi, np.array([2.0]))
    assert base == pytest.approx(0.3 * 0.5 + 0.15, abs=1e-12)
    assert shifted - base == pytest.approx(2.0 * 0.15, abs=1e-12)
    with pytest.raises(DomainError):
        apply_extended_derivative(rep, phi, np.array([1.0, 2.0]))
