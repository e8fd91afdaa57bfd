"""Manifest-driven acceptance gate.

Eight numbered criteria cover the jet accuracy of the difference quotients,
their convergence orders, coherence of the two derivative calculi, the two
generator assemblies against the Monte Carlo quotient limit, a closed-form
generator anchor, the change-of-variable residuals, strong convergence and
determinism of the solver, and recovery of the representing measure.

Every seed, tolerance, id, and resolution comes from the manifest (the
packaged ``default.toml`` unless a caller supplies another file), so a run is
a pure function of that file. Each criterion returns pass/fail plus a one
line summary of the worst observed quantities; ``run_acceptance`` times the
criteria and applies the per-criterion runtime budgets from the manifest.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .dupire import FdConfig, horizontal_derivative, numerical_dupire_jet, vertical_derivative
from .errors import DomainError
from .frechet import RampFamily, estimate_riesz_measure
from .functionals import CATALOG_IDS, get_functional
from .models import get_model
from .paths import StoppedPath, TimeGrid
from .reports import convergence_csv, json_text, report_json_payload
from .rng import NoisePlan
from .sfde import simulate_ensemble
from .verify import (
    coherence_report,
    generator_lhs,
    generator_rhs_dupire,
    generator_rhs_frechet,
    ito_convergence_study,
    ito_residuals,
    strong_convergence_study,
)

__all__ = [
    "CriterionResult",
    "load_manifest",
    "run_acceptance",
    "format_result",
    "CRITERION_NAMES",
]


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str
    elapsed: float


def load_manifest(path: str | Path | None = None) -> dict:
    """Parse a TOML manifest; None loads the packaged default."""
    if path is None:
        data = resources.files(__package__).joinpath("default.toml").read_bytes()
    else:
        data = Path(path).read_bytes()
    return tomllib.loads(data.decode("utf-8"))


def _base_grid(man: dict) -> tuple[TimeGrid, int]:
    g = man["grid"]
    grid = TimeGrid(float(g["horizon"]), int(g["node_count"]))
    return grid, grid.index_of(float(g["stop_time"]))


def _random_paths(grid: TimeGrid, stop_index: int, count: int, seed: int, amplitude: float):
    """Random-walk paths at the diffusive scaling, with a random start level."""
    rng = np.random.default_rng(seed)
    sd = amplitude * np.sqrt(grid.dt)
    paths = []
    for _ in range(count):
        vals = np.empty(grid.node_count + 1)
        vals[0] = rng.uniform(-amplitude, amplitude)
        vals[1:] = rng.normal(0.0, sd, size=grid.node_count)
        np.cumsum(vals, out=vals)
        paths.append(StoppedPath.from_values(grid, vals, stop_index=stop_index))
    return paths


def _family(man: dict):
    grid, k = _base_grid(man)
    p = man["paths"]
    return grid, k, _random_paths(grid, k, int(p["count"]), int(p["seed"]), float(p["amplitude"]))


# -- criterion 1: catalog jet accuracy ----------------------------------------


def criterion_jet_accuracy(man: dict) -> tuple[bool, str]:
    sec = man["jets"]
    _, _, paths = _family(man)
    dt_exact = set(sec["dt_exact"])
    unknown = dt_exact - set(CATALOG_IDS)
    if unknown:
        raise DomainError(f"dt_exact lists non-catalog ids: {sorted(unknown)}")
    worst_dx = worst_dt = worst_dxx = 0.0
    for fid in CATALOG_IDS:
        f = get_functional(fid)
        for p in paths:
            num = numerical_dupire_jet(f, p)
            ana = f.analytic_dupire_jet(p)
            worst_dx = max(worst_dx, float(np.max(np.abs(num.dx - ana.dx))))
            worst_dxx = max(worst_dxx, float(np.max(np.abs(num.dxx - ana.dxx))))
            if fid in dt_exact:
                worst_dt = max(worst_dt, abs(num.dt - ana.dt))
    ok = (
        worst_dx <= float(sec["dx_tol"])
        and worst_dt <= float(sec["dt_tol"])
        and worst_dxx <= float(sec["dxx_tol"])
    )
    detail = (
        f"{len(CATALOG_IDS) * len(paths)} jets; worst gaps: dx {worst_dx:.2e}, "
        f"dt {worst_dt:.2e} over {len(dt_exact)} extension-exact entries, "
        f"dxx {worst_dxx:.2e}"
    )
    return ok, detail


# -- criterion 2: difference-quotient orders -----------------------------------


def criterion_fd_orders(man: dict) -> tuple[bool, str]:
    sec = man["fd_order"]
    grid, k = _base_grid(man)
    p = StoppedPath.constant(grid, float(sec["probe_value"]), stop_index=k)

    f_v = get_functional(sec["vertical_functional"])
    dx_ref = f_v.analytic_dupire_jet(p).dx[0]
    h = float(sec["vertical_h"])
    e_coarse = abs(vertical_derivative(f_v, p, FdConfig(h_vertical=h))[0] - dx_ref)
    e_fine = abs(vertical_derivative(f_v, p, FdConfig(h_vertical=h / 2.0))[0] - dx_ref)
    v_ratio = e_coarse / e_fine if e_fine > 0.0 else float("inf")
    v_lo, v_hi = (float(x) for x in sec["vertical_ratio"])

    f_h = get_functional(sec["horizontal_order_functional"])
    dt_ref = f_h.analytic_dupire_jet(p).dt
    m = int(sec["horizontal_steps"])
    if m < 2 or m % 2:
        raise DomainError("horizontal_steps must be an even count of grid steps")
    q_coarse = horizontal_derivative(f_h, p, FdConfig(eps_horizontal=m * grid.dt))
    q_fine = horizontal_derivative(f_h, p, FdConfig(eps_horizontal=(m // 2) * grid.dt))
    e2 = abs(q_fine - dt_ref)
    h_ratio = abs(q_coarse - dt_ref) / e2 if e2 > 0.0 else float("inf")
    h_lo, h_hi = (float(x) for x in sec["horizontal_ratio"])

    # The endpoint-times-time entry is affine in the stop time, so its forward
    # quotient has no order to measure: it must reproduce the time derivative
    # to round-off at any span.
    f_e = get_functional(sec["horizontal_exact_functional"])
    dt_e = f_e.analytic_dupire_jet(p).dt
    exact_gap = max(
        abs(horizontal_derivative(f_e, p, FdConfig(eps_horizontal=m * grid.dt)) - dt_e),
        abs(horizontal_derivative(f_e, p) - dt_e),
    )

    ok = (
        v_lo <= v_ratio <= v_hi
        and h_lo <= h_ratio <= h_hi
        and exact_gap <= float(sec["horizontal_exact_tol"])
    )
    detail = (
        f"vertical halving ratio {v_ratio:.3f}, horizontal halving ratio "
        f"{h_ratio:.3f}, affine-in-time quotient gap {exact_gap:.1e}"
    )
    return ok, detail


# -- criterion 3: coherence of the two calculi ---------------------------------


def criterion_derivative_coherence(man: dict) -> tuple[bool, str]:
    sec = man["coherence"]
    _, _, paths = _family(man)
    ramps = RampFamily(tuple(int(k) for k in sec["ramps"]))
    worst_gap = 0.0
    worst_cross = 0.0
    for fid in CATALOG_IDS:
        f = get_functional(fid)
        for p in paths:
            rep = coherence_report(f, p, ramps=ramps)
            worst_gap = max(worst_gap, rep.max_abs_gap)
            worst_cross = max(worst_cross, abs(rep.dt_frechet - rep.dt_dupire))
    ok = worst_gap <= float(sec["gap_tol"]) and worst_cross <= float(sec["dt_cross_tol"])
    detail = (
        f"{len(CATALOG_IDS) * len(paths)} reports; worst atom gap {worst_gap:.2e}, "
        f"worst time-derivative cross-check {worst_cross:.1e}"
    )
    return ok, detail


# -- criteria 4 and 5: generator identity and anchor ---------------------------


def _generator_initials(man: dict) -> tuple[StoppedPath, StoppedPath]:
    sec = man["generator"]
    grid, k = _base_grid(man)
    det = StoppedPath.constant(grid, float(sec["deterministic_initial"]), stop_index=k)
    a, b = (float(x) for x in sec["stochastic_initial"])
    sto = StoppedPath.from_function(grid, lambda s: a + b * s, stop_index=k)
    return det, sto


def criterion_generator_identity(man: dict) -> tuple[bool, str]:
    sec = man["generator"]
    det_init, sto_init = _generator_initials(man)
    epsilons = [float(e) for e in sec["epsilons"]]
    worst_rel = 0.0
    worst_det = 0.0
    worst_units = 0.0
    cell = 0
    for model_id in sec["models"]:
        model = get_model(model_id)
        init = det_init if model.noise_free else sto_init
        for fid in sec["functionals"]:
            f = get_functional(fid)
            rhs_d = generator_rhs_dupire(f, model, init)
            rhs_f = generator_rhs_frechet(f, model, init)
            worst_rel = max(worst_rel, abs(rhs_d - rhs_f) / (1.0 + abs(rhs_d)))
            plan = NoisePlan(int(sec["seed"]) + 1000 * cell)
            rep = generator_lhs(
                f,
                model,
                init,
                epsilons,
                plan,
                n_paths=int(sec["n_paths"]),
                steps_per_eps=int(sec["steps_per_eps"]),
                reference=rhs_d,
            )
            gap = abs(rep.intercept - rhs_d)
            if model.noise_free:
                worst_det = max(worst_det, gap)
            else:
                worst_units = max(worst_units, gap / max(rep.intercept_stderr, 1e-300))
            cell += 1
    ok = (
        worst_rel <= float(sec["identity_rel_tol"])
        and worst_det <= float(sec["deterministic_tol"])
        and worst_units <= float(sec["stderr_multiple"])
    )
    detail = (
        f"{cell} cells; worst two-sided gap {worst_rel:.2e} relative, "
        f"deterministic intercept gap {worst_det:.1e}, stochastic intercept "
        f"off by {worst_units:.2f} stderr"
    )
    return ok, detail


def criterion_generator_anchor(man: dict) -> tuple[bool, str]:
    sec = man["anchor"]
    grid, k = _base_grid(man)
    f = get_functional(sec["functional"])
    model = get_model(sec["model"])
    init = StoppedPath.constant(grid, 0.0, stop_index=k)
    rhs_d = generator_rhs_dupire(f, model, init)
    rhs_f = generator_rhs_frechet(f, model, init)
    rhs_gap = max(abs(rhs_d - 1.0), abs(rhs_f - 1.0))
    epsilons = [float(e) for e in man["generator"]["epsilons"]]
    rep = generator_lhs(
        f,
        model,
        init,
        epsilons,
        NoisePlan(int(sec["seed"])),
        n_paths=int(sec["n_paths"]),
        steps_per_eps=int(man["generator"]["steps_per_eps"]),
        reference=1.0,
    )
    worst_units = 0.0
    for _, _, _, error, stderr in rep.levels:
        units = error / stderr if stderr > 0.0 else (0.0 if error <= 1e-12 else float("inf"))
        worst_units = max(worst_units, units)
    ok = rhs_gap <= float(sec["rhs_tol"]) and worst_units <= float(sec["stderr_multiple"])
    detail = (
        f"both assemblies within {rhs_gap:.1e} of 1; worst quotient mean off "
        f"by {worst_units:.2f} stderr across {len(rep.levels)} lags"
    )
    return ok, detail


# -- criterion 6: change-of-variable residuals ---------------------------------


def criterion_change_of_variable(man: dict) -> tuple[bool, str]:
    sec = man["ito"]
    horizon = float(man["grid"]["horizon"])

    grid_t = TimeGrid(horizon, int(sec["telescope_resolution"]))
    f_t = get_functional(sec["telescope_functional"])
    model_t = get_model(sec["telescope_model"])
    plan_t = NoisePlan(int(sec["telescope_seed"]))
    cfg = FdConfig(h_vertical=float(sec["telescope_h"]))
    init = StoppedPath.constant(grid_t, 0.0, stop_index=0)
    n_t = int(sec["telescope_paths"])
    worst = 0.0
    chunk = 250
    for start in range(0, n_t, chunk):
        count = min(chunk, n_t - start)
        incr = plan_t.increment_block(start, count, grid_t.node_count, grid_t.dt)
        vals = simulate_ensemble(model_t, init, count, increments=incr)
        res = ito_residuals(f_t, vals[:, :, 0], grid_t, cfg=cfg, qv_mode="realized")
        worst = max(worst, float(np.max(np.abs(res))))
    t_ok = worst <= float(sec["telescope_tol"])

    rep = ito_convergence_study(
        get_functional(sec["order_functional"]),
        get_model(sec["order_model"]),
        [int(r) for r in sec["order_resolutions"]],
        NoisePlan(int(sec["order_seed"])),
        n_paths=int(sec["order_paths"]),
        horizon=horizon,
        qv_mode="dt",
    )
    o_lo, o_hi = (float(x) for x in sec["order_range"])
    o_ok = o_lo <= rep.fitted_order <= o_hi

    detail = (
        f"worst telescoping residual {worst:.1e} over {n_t} paths; "
        f"fitted residual order {rep.fitted_order:.3f}"
    )
    return t_ok and o_ok, detail


# -- criterion 7: solver strong convergence and determinism --------------------


def criterion_solver_convergence(man: dict) -> tuple[bool, str]:
    sec = man["sfde"]
    model = get_model(sec["model"])
    plan = NoisePlan(int(sec["seed"]))
    resolutions = [int(r) for r in sec["resolutions"]]
    kwargs = dict(
        reference_resolution=int(sec["reference_resolution"]),
        n_paths=int(sec["n_paths"]),
        horizon=float(man["grid"]["horizon"]),
        initial_value=float(sec["initial_value"]),
    )
    w_a, w_b = (int(w) for w in sec["worker_counts"])
    rep_a = strong_convergence_study(model, resolutions, plan, workers=w_a, **kwargs)
    rep_b = strong_convergence_study(model, resolutions, plan, workers=w_b, **kwargs)
    identical = convergence_csv(rep_a) == convergence_csv(rep_b) and json_text(
        report_json_payload(rep_a)
    ) == json_text(report_json_payload(rep_b))
    s_lo, s_hi = (float(x) for x in sec["slope_range"])
    slope_ok = s_lo <= rep_a.fitted_order <= s_hi
    detail = (
        f"strong-error slope {rep_a.fitted_order:.3f}; reports with "
        f"{w_a} and {w_b} workers {'byte-identical' if identical else 'DIFFER'}"
    )
    return slope_ok and identical, detail


# -- criterion 8: measure recovery ---------------------------------------------


def criterion_measure_recovery(man: dict) -> tuple[bool, str]:
    sec = man["riesz"]
    horizon = float(man["grid"]["horizon"])
    stop_time = float(man["grid"]["stop_time"])
    probe = float(sec["probe_value"])

    f_w = get_functional(sec["weight_functional"])
    if sec["weight_functional"] != "weighted:linear":
        raise DomainError(
            "measure recovery compares against the continuum masses of the "
            "linear-weight integral; other entries have no reference here"
        )
    rels = []
    for n in (int(x) for x in sec["node_counts"]):
        grid = TimeGrid(horizon, n)
        k = grid.index_of(stop_time)
        p = StoppedPath.constant(grid, probe, stop_index=k)
        rep = estimate_riesz_measure(f_w, p)
        nodes = grid.nodes
        # Continuum masses of w(s) = s over the left-point cells [t_i, t_{i+1});
        # the stop node owns only the atom, which is zero for a pure integral.
        cell_mass = 0.5 * (nodes[1 : k + 1] ** 2 - nodes[:k] ** 2)
        num = rep.weights[:, 0]
        l1 = float(np.sum(np.abs(num[:k] - cell_mass))) + abs(num[k]) + abs(rep.atom[0])
        rels.append(l1 / (0.5 * stop_time**2))
    l1_ok = rels[0] <= float(sec["l1_rel_tol"])
    ratio = rels[1] / rels[0] if rels[0] > 0.0 else float("inf")
    h_lo, h_hi = (float(x) for x in sec["halving_range"])
    halving_ok = h_lo <= ratio <= h_hi

    f_a = get_functional(sec["atom_functional"])
    grid0 = TimeGrid(horizon, int(sec["node_counts"][0]))
    p0 = StoppedPath.constant(grid0, probe, stop_index=grid0.index_of(stop_time))
    atom_gap = float(
        np.max(
            np.abs(
                estimate_riesz_measure(f_a, p0).atom
                - f_a.analytic_frechet_representation(p0).atom
            )
        )
    )
    atom_ok = atom_gap <= float(sec["atom_tol"])

    detail = (
        f"relative L1 weight error {rels[0]:.4f} at N={sec['node_counts'][0]}, "
        f"refinement ratio {ratio:.3f}; endpoint atom gap {atom_gap:.1e}"
    )
    return l1_ok and halving_ok and atom_ok, detail


# -- runner --------------------------------------------------------------------

_CRITERIA = (
    ("catalog jet accuracy", criterion_jet_accuracy, ("jets",)),
    ("difference-quotient orders", criterion_fd_orders, ("fd_order",)),
    ("derivative coherence", criterion_derivative_coherence, ("coherence",)),
    ("generator two-sided identity", criterion_generator_identity, ()),
    ("generator closed-form anchor", criterion_generator_anchor, ()),
    ("change-of-variable residuals", criterion_change_of_variable, ("ito",)),
    ("solver strong convergence", criterion_solver_convergence, ("sfde",)),
    ("measure recovery", criterion_measure_recovery, ("riesz",)),
)

CRITERION_NAMES = tuple(name for name, _, _ in _CRITERIA)


def run_criterion(index: int, man: dict) -> CriterionResult:
    """Run one criterion (1-based index) with its runtime budget applied."""
    if not 1 <= index <= len(_CRITERIA):
        raise DomainError(f"criterion index must be 1..{len(_CRITERIA)}, got {index}")
    name, fn, budget_key = _CRITERIA[index - 1]
    start = time.perf_counter()
    passed, detail = fn(man)
    elapsed = time.perf_counter() - start
    if budget_key:
        budget = float(man[budget_key[0]]["runtime_budget"])
        if elapsed > budget:
            passed = False
            detail += f"; exceeded the {budget:.0f} s budget"
    return CriterionResult(index, name, passed, detail, elapsed)


def run_acceptance(man: dict | None = None) -> list[CriterionResult]:
    if man is None:
        man = load_manifest()
    return [run_criterion(i, man) for i in range(1, len(_CRITERIA) + 1)]


def format_result(result: CriterionResult) -> str:
    status = "pass" if result.passed else "FAIL"
    return (
        f"criterion {result.index} ({result.name}): {status} "
        f"[{result.detail}] ({result.elapsed:.1f} s)"
    )
