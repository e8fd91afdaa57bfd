"""Harness checks against hand-worked limits.

The deterministic quotient case is solved in closed form: under unit drift
and zero noise, extending a constant path c by a lag eps moves the running
integral by c*eps + eps^2*(1 - 1/steps)/2 when the tail is built with
left-point Euler sub-steps, so every quotient mean is exactly linear in eps
and the polynomial intercept must return c up to round-off.  The stochastic
case uses the square of a driftless unit-noise endpoint, whose quotient has
mean exactly 1 at every lag.
"""

import numpy as np
import pytest

from pathcalc import (
    ConvergenceReport,
    DomainError,
    FdConfig,
    NoisePlan,
    SfdeModel,
    StoppedPath,
    TimeGrid,
    coherence_report,
    generator_lhs,
    generator_rhs_dupire,
    generator_rhs_frechet,
    get_functional,
    get_model,
    ito_convergence_study,
    ito_residual,
    ito_residuals,
    simulate_ensemble,
    strong_convergence_study,
    vertical_bump,
)

GRID = TimeGrid(1.0, 256)


def _bm_values(n_paths: int, seed: int, grid: TimeGrid = GRID) -> np.ndarray:
    init = StoppedPath.constant(grid, np.array([0.0]), stop_index=0)
    ens = simulate_ensemble(get_model("bm"), init, n_paths, NoisePlan(seed))
    return ens[:, :, 0]


# -- pathwise residuals -------------------------------------------------------


def test_residual_telescopes_for_endpoint_square():
    # f(x) = x(t)^2 with realized squared increments: the second-order term
    # reproduces each (dx)^2 and the discrete sum telescopes to zero.  A wide
    # fixed step keeps the quadratic's differences exact instead of dividing
    # round-off by a tiny h^2.
    vals = _bm_values(20, seed=23)
    res = ito_residuals(
        get_functional("endpoint:square"), vals, GRID, cfg=FdConfig(h_vertical=0.5)
    )
    assert np.max(np.abs(res)) <= 1e-10


def test_residual_vanishes_for_endpoint_identity():
    vals = _bm_values(10, seed=29)
    res = ito_residuals(get_functional("endpoint:linear"), vals, GRID)
    assert np.max(np.abs(res)) <= 1e-12


def test_single_path_residual_matches_batch():
    row = _bm_values(1, seed=31)[0]
    p = StoppedPath.from_values(GRID, row, stop_index=GRID.node_count)
    f = get_functional("product")
    single = ito_residual(f, p, qv_mode="realized")
    batch = ito_residuals(f, row[None, :], GRID)
    assert abs(single - float(batch[0])) <= 1e-10


def test_residual_input_validation():
    f = get_functional("endpoint:square")
    p = StoppedPath.constant(GRID, np.array([0.2]), stop_index=8)
    with pytest.raises(DomainError):
        ito_residual(f, vertical_bump(p, np.array([0.1])))
    with pytest.raises(DomainError):
        ito_residual(f, StoppedPath.constant(GRID, np.array([0.2]), stop_index=0))
    with pytest.raises(DomainError):
        ito_residuals(f, np.zeros((4, GRID.node_count)), GRID)  # one column short
    with pytest.raises(DomainError):
        ito_residuals(f, np.zeros((4, GRID.node_count + 1)), GRID, qv_mode="typo")
    with pytest.raises(DomainError):
        ito_residuals(f, np.zeros((4, GRID.node_count + 1)), GRID, qv_mode="dt")


def test_residual_study_rms_falls_with_resolution():
    # Integral functionals telescope exactly, so the order probe needs an
    # endpoint nonlinearity: with sigma^2 dt replacing realized squares the
    # residual keeps the compensator gap, which shrinks like sqrt(dt).
    report = ito_convergence_study(
        get_functional("endpoint:quartic"),
        get_model("bm"),
        [32, 128],
        NoisePlan(37),
        n_paths=300,
        qv_mode="dt",
        initial_value=0.3,
    )
    assert isinstance(report, ConvergenceReport)
    levels = [row[0] for row in report.levels]
    errs = [row[3] for row in report.levels]
    assert levels == [32.0, 128.0]
    assert errs[0] > errs[1] > 0.0
    assert report.intercept == 0.0
    assert 0.2 < report.fitted_order < 0.9


def test_residual_study_validation():
    f = get_functional("endpoint:square")
    bm = get_model("bm")
    with pytest.raises(DomainError):
        ito_convergence_study(f, bm, [64], NoisePlan(1), n_paths=4)
    with pytest.raises(DomainError):
        # 128 / 48 is not an integer, never mind a power of two
        ito_convergence_study(f, bm, [48, 128], NoisePlan(1), n_paths=4)
    with pytest.raises(DomainError):
        ito_convergence_study(f, bm, [32, 128], NoisePlan(1), n_paths=1)


# -- short-time quotients -----------------------------------------------------

EPS = [2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7]
CONST = StoppedPath.constant(GRID, np.array([0.3]), stop_index=128)


def test_deterministic_quotient_matches_hand_expansion():
    steps = 16
    report = generator_lhs(
        get_functional("integral:identity"),
        get_model("drift1"),
        CONST,
        EPS,
        NoisePlan(0),
        steps_per_eps=steps,
    )
    expected = [0.3 + e * (1.0 - 1.0 / steps) / 2.0 for e in EPS]
    for row, e, want in zip(report.levels, EPS, expected):
        assert row[0] == e
        assert row[1] == pytest.approx(want, abs=1e-12)
        assert row[4] == 0.0  # noise-free: no sampling error
    assert report.intercept == pytest.approx(0.3, abs=1e-10)
    assert report.intercept_stderr == 0.0
    assert report.fitted_order == pytest.approx(1.0, abs=1e-6)


def test_quotient_reference_column():
    report = generator_lhs(
        get_functional("integral:identity"),
        get_model("drift1"),
        CONST,
        EPS,
        NoisePlan(0),
        reference=0.3,
    )
    for row, e in zip(report.levels, EPS):
        assert row[2] == 0.3
        assert row[3] == pytest.approx(e * (15.0 / 32.0), abs=1e-12)


def test_stochastic_quotient_centers_on_unit_rate():
    # E[(x0 + W_eps)^2] - x0^2 = eps exactly, so every quotient mean is 1.
    report = generator_lhs(
        get_functional("endpoint:square"),
        get_model("bm"),
        CONST,
        EPS,
        NoisePlan(41),
        n_paths=2000,
    )
    for row in report.levels:
        assert abs(row[1] - 1.0) <= 5.0 * row[4]
        assert row[4] > 0.0
    assert abs(report.intercept - 1.0) <= 4.0 * report.intercept_stderr


def test_quotient_validation_errors():
    f = get_functional("integral:identity")
    drift1 = get_model("drift1")
    with pytest.raises(DomainError):
        generator_lhs(f, drift1, CONST, [0.01, 0.02], NoisePlan(0))  # increasing
    with pytest.raises(DomainError):
        generator_lhs(f, drift1, CONST, [2.0**-4, 3 * 2.0**-7], NoisePlan(0))
    with pytest.raises(DomainError):
        generator_lhs(f, drift1, CONST, [0.75, 0.375], NoisePlan(0))  # past horizon
    with pytest.raises(DomainError):
        generator_lhs(f, drift1, CONST, [2.0**-4], NoisePlan(0))  # single lag
    with pytest.raises(DomainError):
        generator_lhs(f, get_model("bm"), CONST, EPS, NoisePlan(0), n_paths=1)
    plain = SfdeModel(
        "plain",
        1,
        1,
        lambda t, p: np.zeros(1),
        lambda t, p: np.ones((1, 1)),
    )
    with pytest.raises(DomainError):
        generator_lhs(f, plain, CONST, EPS, NoisePlan(0))  # no scalar kernels


# -- generator assemblies and coherence ---------------------------------------


def test_assemblies_match_closed_values():
    # Driftless unit noise at a flat zero path: only the curvature term
    # survives, 0.5 * 2 * 1 = 1.
    zero = StoppedPath.constant(GRID, np.array([0.0]), stop_index=128)
    sq = get_functional("endpoint:square")
    bm = get_model("bm")
    assert generator_rhs_dupire(sq, bm, zero) == pytest.approx(1.0, abs=1e-6)
    assert generator_rhs_frechet(sq, bm, zero) == pytest.approx(1.0, abs=1e-4)

    # Unit drift, zero noise on the running integral: the time term carries
    # the endpoint and the bump-invisible first variation kills the rest.
    integral = get_functional("integral:identity")
    drift1 = get_model("drift1")
    assert generator_rhs_dupire(integral, drift1, CONST) == pytest.approx(
        0.3, abs=1e-10
    )
    assert generator_rhs_frechet(integral, drift1, CONST) == pytest.approx(
        0.3, abs=1e-6
    )


def test_assembly_rejects_bumped_path():
    bumped = vertical_bump(CONST, np.array([0.1]))
    with pytest.raises(DomainError):
        generator_rhs_dupire(get_functional("endpoint:square"), get_model("bm"), bumped)


@pytest.mark.parametrize("fid", ["endpoint:square", "product"])
def test_coherence_report_gaps(fid):
    values = 0.3 + 0.2 * np.sin(1.5 * GRID.nodes)
    p = StoppedPath.from_values(GRID, values, stop_index=160)
    rep = coherence_report(get_functional(fid), p)
    assert rep.functional == fid
    # both time derivatives run through the same flat-extension quotient
    assert abs(rep.dt_frechet - rep.dt_dupire) <= 1e-12
    assert rep.max_abs_gap <= 1e-3
    parts = [
        abs(rep.dt_frechet - rep.dt_dupire),
        float(np.max(np.abs(rep.atom_mu - rep.dx_dupire))),
        float(np.max(np.abs(rep.atom_lambda - rep.dxx_dupire))),
    ]
    assert rep.max_abs_gap == pytest.approx(max(parts), rel=1e-12)


# -- strong error study -------------------------------------------------------


def test_strong_study_validation():
    bm = get_model("bm")
    with pytest.raises(DomainError):
        strong_convergence_study(
            bm, [64], NoisePlan(1), reference_resolution=256, n_paths=4
        )
    with pytest.raises(DomainError):
        strong_convergence_study(
            bm, [64, 128], NoisePlan(1), reference_resolution=128, n_paths=4
        )
    with pytest.raises(DomainError):
        # 384 / 32 = 12 is not a power of two
        strong_convergence_study(
            bm, [32, 96], NoisePlan(1), reference_resolution=384, n_paths=4
        )
    with pytest.raises(DomainError):
        strong_convergence_study(
            bm, [32, 64], NoisePlan(1), reference_resolution=256, n_paths=1
        )


def test_strong_study_exact_for_additive_noise():
    # With b = 0 and sigma = 1 the Euler terminal value is the increment sum,
    # so coarse block sums reproduce the reference path to round-off and no
    # order is identifiable.
    report = strong_convergence_study(
        get_model("bm"),
        [32, 64],
        NoisePlan(43),
        reference_resolution=256,
        n_paths=50,
    )
    for row in report.levels:
        assert row[3] < 1e-13
    assert np.isnan(report.fitted_order)


def test_strong_study_worker_count_is_invisible():
    kwargs = dict(reference_resolution=128, n_paths=100, initial_value=0.3)
    a = strong_convergence_study(
        get_model("linear-pd"), [32, 64], NoisePlan(47), workers=1, **kwargs
    )
    b = strong_convergence_study(
        get_model("linear-pd"), [32, 64], NoisePlan(47), workers=3, **kwargs
    )
    assert a.levels == b.levels
    assert a.levels[0][3] > 0.0
    assert np.array_equal([a.fitted_order], [b.fitted_order], equal_nan=True)
