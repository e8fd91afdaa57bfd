"""Grid and stopped-path container behavior: stopping, bumps, the metric."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathcalc import (
    DomainError,
    GridAlignmentError,
    StoppedPath,
    TimeGrid,
    d_infinity,
    horizontal_extend,
    load_path_csv,
    save_path_csv,
    stop_at,
    sup_norm,
    vertical_bump,
)


def test_grid_nodes_and_dt():
    grid = TimeGrid(2.0, 8)
    assert grid.dt == 0.25
    assert grid.nodes.shape == (9,)
    assert grid.nodes[0] == 0.0
    assert grid.nodes[-1] == 2.0
    assert grid.time_of(3) == 0.75
    assert grid.index_of(0.75) == 3
    assert grid.step_count(0.5) == 2


def test_grid_rejects_bad_parameters():
    with pytest.raises(DomainError):
        TimeGrid(0.0, 8)
    with pytest.raises(DomainError):
        TimeGrid(1.0, 0)
    with pytest.raises(DomainError):
        TimeGrid(1.0, 8).time_of(9)


def test_grid_alignment_errors():
    grid = TimeGrid(1.0, 8)
    with pytest.raises(GridAlignmentError):
        grid.index_of(0.3)
    with pytest.raises(GridAlignmentError):
        grid.step_count(0.3)
    with pytest.raises(DomainError):
        grid.index_of(1.5)


def test_refined_grid_keeps_nodes():
    grid = TimeGrid(1.0, 4)
    fine = grid.refined(4)
    assert fine.node_count == 16
    # every coarse node is a fine node
    for i in range(5):
        assert fine.index_of(grid.time_of(i)) == 4 * i


def test_from_values_flattens_past_stop():
    grid = TimeGrid(1.0, 4)
    p = StoppedPath.from_values(grid, [1.0, 2.0, 3.0, 4.0, 5.0], stop_index=2)
    assert p.samples[:, 0].tolist() == [1.0, 2.0, 3.0, 3.0, 3.0]
    assert p.stop_time == 0.5
    assert p.endpoint()[0] == 3.0


def test_from_values_rejects_nonfinite():
    grid = TimeGrid(1.0, 2)
    with pytest.raises(DomainError):
        StoppedPath.from_values(grid, [0.0, np.nan, 0.0])
    with pytest.raises(DomainError):
        StoppedPath.from_values(grid, [0.0, np.inf, 0.0])


def test_restop_is_idempotent_bitwise():
    grid = TimeGrid(1.0, 16)
    rng = np.random.default_rng(3)
    p = StoppedPath.from_values(grid, rng.normal(size=17))
    q = stop_at(p, 0.5)
    r = stop_at(q, 0.5)
    assert np.array_equal(q.samples, r.samples)
    assert q.stop_index == r.stop_index


def test_stop_at_earlier_time_freezes_tail():
    grid = TimeGrid(1.0, 8)
    p = StoppedPath.from_values(grid, np.arange(9.0))
    q = stop_at(p, 0.25)
    assert q.samples[2:, 0].tolist() == [2.0] * 7
    # re-stopping later keeps the frozen value, history is not resurrected
    r = stop_at(q, 0.75)
    assert r.samples[6, 0] == 2.0


def test_vertical_bump_leaves_samples_untouched():
    grid = TimeGrid(1.0, 8)
    p = StoppedPath.from_values(grid, np.linspace(0, 1, 9), stop_index=4)
    q = vertical_bump(p, np.array([0.25]))
    assert q.samples is p.samples
    assert q.endpoint()[0] == pytest.approx(p.endpoint()[0] + 0.25)
    # bumps accumulate
    r = vertical_bump(q, np.array([-0.1]))
    assert r.bump[0] == pytest.approx(0.15)


def test_horizontal_extend_folds_bump_and_goes_flat():
    grid = TimeGrid(1.0, 8)
    p = StoppedPath.from_values(grid, np.linspace(0, 1, 9), stop_index=4)
    q = horizontal_extend(vertical_bump(p, np.array([0.5])), 0.75)
    assert q.stop_index == 6
    assert not q.bump.any()
    assert q.samples[4:, 0].tolist() == [1.0, 1.0, 1.0, 1.0, 1.0]
    with pytest.raises(DomainError):
        horizontal_extend(q, 0.25)


def test_sup_norm_includes_bump():
    grid = TimeGrid(1.0, 4)
    p = StoppedPath.constant(grid, 0.5, stop_index=2)
    assert sup_norm(p) == 0.5
    assert sup_norm(vertical_bump(p, np.array([0.7]))) == pytest.approx(1.2)


@st.composite
def _paths_on_shared_grid(draw):
    n = draw(st.integers(min_value=2, max_value=12))
    grid = TimeGrid(1.0, n)
    vals = st.lists(
        st.floats(min_value=-5, max_value=5, allow_nan=False),
        min_size=n + 1,
        max_size=n + 1,
    )
    ks = st.integers(min_value=0, max_value=n)
    return (
        StoppedPath.from_values(grid, draw(vals), stop_index=draw(ks)),
        StoppedPath.from_values(grid, draw(vals), stop_index=draw(ks)),
        StoppedPath.from_values(grid, draw(vals), stop_index=draw(ks)),
    )


@settings(max_examples=80, deadline=None)
@given(_paths_on_shared_grid())
def test_metric_axioms(triple):
    p, q, r = triple
    dpq = d_infinity(p, q)
    assert dpq >= 0.0
    assert d_infinity(p, p) == 0.0
    assert d_infinity(q, p) == pytest.approx(dpq)
    assert dpq <= d_infinity(p, r) + d_infinity(r, q) + 1e-12


def test_metric_separates_stop_times():
    grid = TimeGrid(1.0, 8)
    p = StoppedPath.constant(grid, 0.3, stop_index=2)
    q = StoppedPath.constant(grid, 0.3, stop_index=6)
    assert d_infinity(p, q) == pytest.approx(0.5)


def test_metric_rejects_grid_mismatch():
    p = StoppedPath.constant(TimeGrid(1.0, 8), 0.0)
    q = StoppedPath.constant(TimeGrid(1.0, 16), 0.0)
    with pytest.raises(DomainError):
        d_infinity(p, q)


def test_csv_roundtrip_is_exact(tmp_path):
    grid = TimeGrid(1.0, 32)
    rng = np.random.default_rng(11)
    p = StoppedPath.from_values(
        grid, rng.normal(size=33), stop_index=20, bump=np.array([1.0 / 3.0])
    )
    file = tmp_path / "path.csv"
    save_path_csv(p, file)
    q = load_path_csv(file)
    assert np.array_equal(p.samples, q.samples)
    assert q.stop_index == 20
    assert np.array_equal(p.bump, q.bump)


def test_csv_without_sidecar_means_unstopped(tmp_path):
    grid = TimeGrid(1.0, 4)
    p = StoppedPath.from_values(grid, [0.0, 1.0, 2.0, 3.0, 4.0])
    file = tmp_path / "plain.csv"
    save_path_csv(p, file)
    (tmp_path / "plain.csv.json").unlink()
    q = load_path_csv(file)
    assert q.stop_index == 4
    assert not q.bump.any()


def test_csv_rejects_nonuniform_nodes(tmp_path):
    file = tmp_path / "bad.csv"
    file.write_text("t,x_1\n0,0\n0.3,1\n1,2\n")
    with pytest.raises(GridAlignmentError):
        load_path_csv(file)
