"""Verification engines for the pathwise-calculus identities.

Three claims are exercised numerically:

* the pathwise change-of-variable formula: a functional of a simulated path
  equals its initial value plus time, first-order, and second-order sums,
  with the quadratic-variation weight taken either from realized squared
  increments or from the model's sigma**2 * dt;
* the two generator assemblies: time derivative plus first variation of the
  drift plus half the second variation of the diffusion, built once from the
  measure atoms and once from the endpoint jet, which must agree, and both
  must match the Monte Carlo short-time quotient extrapolated to zero;
* coherence of the two derivative calculi: the measure atoms recovered from
  ramp probes must equal the endpoint derivatives.

Monte Carlo quotients refine the time step together with the horizon: the
quotient at lag eps simulates steps of eps / steps_per_eps, so discretization
bias shrinks with eps itself and the extrapolated intercept converges to the
continuous-time limit rather than to a grid artifact.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .dupire import (
    FdConfig,
    horizontal_derivative,
    numerical_dupire_jet,
    vertical_derivative,
    vertical_hessian,
)
from .errors import BlowUpError, DomainError
from .frechet import RampFamily, atom_at_t, bilinear_atom_at_t, time_derivative
from .functionals import Functional
from .models import SfdeModel
from .parallel import run_tasks
from .paths import StoppedPath, TimeGrid
from .rng import NoisePlan, coarsen_increments
from .sfde import simulate_ensemble

__all__ = [
    "ConvergenceReport",
    "CoherenceReport",
    "ito_residual",
    "ito_residuals",
    "ito_convergence_study",
    "strong_convergence_study",
    "generator_lhs",
    "generator_rhs_dupire",
    "generator_rhs_frechet",
    "coherence_report",
]


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-level observations of a limit, with a fitted order and intercept.

    levels : tuple of (level, value, reference, error, stderr) rows, where
        level is a resolution or a lag depending on the study.
    fitted_order : least-squares slope on log-log pairs (nan when the data
        sit at round-off and no order is identifiable).
    intercept : the extrapolated limit (for residual studies, the known
        limiting value 0).
    intercept_stderr : standard error of the intercept under the sample
        covariance of the per-path observations; 0 for deterministic runs.
    """

    levels: tuple[tuple[float, float, float, float, float], ...]
    fitted_order: float
    intercept: float
    intercept_stderr: float = 0.0

    def __post_init__(self) -> None:
        for row in self.levels:
            if len(row) != 5:
                raise DomainError("each level row needs exactly 5 entries")
            if np.isfinite(row[3]) and row[3] < 0:
                raise DomainError("level errors must be non-negative")


@dataclass(frozen=True)
class CoherenceReport:
    """Both sides of the three derivative equalities at one path.

    The *_frechet / atom_* entries come from ramp and hat probes of the first
    and second variations; the *_dupire entries come from endpoint and
    flat-extension differences. max_abs_gap is the largest componentwise
    disagreement across the three pairs.
    """

    functional: str
    dt_frechet: float
    dt_dupire: float
    atom_mu: np.ndarray
    dx_dupire: np.ndarray
    atom_lambda: np.ndarray
    dxx_dupire: np.ndarray
    max_abs_gap: float


# -- pathwise change-of-variable residuals -----------------------------------


def _prefix_steps(cfg: FdConfig | None, values: np.ndarray) -> np.ndarray:
    # One bump size per (path, node): fixed when the config pins it, else
    # scaled to the endpoint magnitude like the single-path default.
    if cfg is not None and cfg.h_vertical is not None:
        return np.full_like(values, cfg.h_vertical)
    return 1e-4 * (1.0 + np.abs(values))


def _residuals_batch(
    f: Functional,
    values: np.ndarray,
    grid: TimeGrid,
    cfg: FdConfig | None,
    qv_mode: str,
    sigmas: np.ndarray | None,
    stop_index: int | None = None,
) -> np.ndarray:
    """Residual of the change-of-variable formula, one entry per path row.

    values : (n_paths, N + 1) scalar node values of full simulated paths,
        all sharing the value at node 0.
    sigmas : (n_paths, N) diffusion per step, required when qv_mode="dt".
    """
    if values.ndim != 2 or values.shape[1] != grid.node_count + 1:
        raise DomainError(f"values shape {values.shape} does not match the grid")
    if qv_mode not in ("realized", "dt"):
        raise DomainError(f"qv_mode must be 'realized' or 'dt', got {qv_mode!r}")
    end = grid.node_count if stop_index is None else stop_index
    if not 1 <= end <= grid.node_count:
        raise DomainError(f"stop index {end} outside 1..{grid.node_count}")
    x0 = values[0, 0]
    if not np.all(values[:, 0] == x0):
        raise DomainError("batched residuals need a common starting value")

    nodes = grid.nodes
    dt = grid.dt
    h = _prefix_steps(cfg, values[:, :-1])
    base, up, down, ext = f.prefix_tables(values, nodes, dt, h)
    base = base[:, :end]
    up = up[:, :end]
    down = down[:, :end]
    ext = ext[:, :end]
    h = h[:, :end]

    dx_steps = np.diff(values[:, : end + 1], axis=1)
    if qv_mode == "realized":
        qv = dx_steps * dx_steps
    else:
        if sigmas is None:
            raise DomainError("qv_mode='dt' needs per-step diffusion values")
        if sigmas.shape[:2] != (values.shape[0], grid.node_count) and sigmas.shape[
            :2
        ] != (values.shape[0], end):
            raise DomainError(f"sigmas shape {sigmas.shape} does not fit the ensemble")
        sig = sigmas.reshape(sigmas.shape[0], sigmas.shape[1])[:, :end]
        qv = sig * sig * dt

    ds_term = np.sum(ext - base, axis=1)
    dx_term = np.sum((up - down) / (2.0 * h) * dx_steps, axis=1)
    qv_term = 0.5 * np.sum((up - 2.0 * base + down) / (h * h) * qv, axis=1)

    prefix0 = StoppedPath.constant(grid, np.array([x0]), stop_index=0)
    lhs = f.eval_tail_batch(prefix0, values[:, : end + 1]) - base[:, 0]
    return lhs - (ds_term + dx_term + qv_term)


def ito_residual(
    f: Functional,
    x: StoppedPath,
    cfg: FdConfig | None = None,
    qv_mode: str = "realized",
    model: SfdeModel | None = None,
) -> float:
    """Change-of-variable residual along one simulated path.

    The time sum uses the one-step flat-extension quotient at each prefix,
    the first-order sum uses central endpoint differences against the path
    increments, and the second-order sum weights the second difference with
    realized squared increments (qv_mode="realized") or with the model's
    sigma**2 * dt (qv_mode="dt", which needs ``model``).
    """
    if x.dim != 1:
        raise DomainError("residuals are defined for scalar paths")
    if x.bump.any():
        raise DomainError("residuals need a bump-free path")
    if x.stop_index < 1:
        raise DomainError("the path must contain at least one step")
    values = x.node_values()[None, :, 0]
    sigmas = None
    if qv_mode == "dt":
        if model is None:
            raise DomainError("qv_mode='dt' needs the model that produced the path")
        stepper = model.batch_stepper(1, x.grid)
        sig = np.empty((1, x.stop_index))
        for i in range(x.stop_index):
            _, s = stepper.step(i, values[:, : i + 1, None])
            sig[:, i] = s[0, 0, 0]
        sigmas = sig
    return float(
        _residuals_batch(f, values, x.grid, cfg, qv_mode, sigmas, x.stop_index)[0]
    )


def ito_residuals(
    f: Functional,
    values: np.ndarray,
    grid: TimeGrid,
    *,
    cfg: FdConfig | None = None,
    qv_mode: str = "realized",
    sigmas: np.ndarray | None = None,
) -> np.ndarray:
    """Change-of-variable residuals for a whole ensemble at once.

    ``values[p, i]`` is path p at node i over the full grid; all paths must
    share the initial value. Returns one residual per path.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 2 or vals.shape[1] != grid.node_count + 1:
        raise DomainError(
            f"values must be (paths, {grid.node_count + 1}), got {vals.shape}"
        )
    return _residuals_batch(f, vals, grid, cfg, qv_mode, sigmas)


def _rms_and_stderr(residuals: np.ndarray) -> tuple[float, float]:
    sq = residuals * residuals
    mean_sq = float(np.sum(sq) / sq.size)
    rms = sqrt(mean_sq)
    if sq.size < 2 or rms == 0.0:
        return rms, 0.0
    se_mean_sq = float(np.std(sq, ddof=1) / sqrt(sq.size))
    return rms, se_mean_sq / (2.0 * rms)


def ito_convergence_study(
    f: Functional,
    model: SfdeModel,
    resolutions: list[int],
    plan: NoisePlan,
    *,
    n_paths: int = 1000,
    horizon: float = 1.0,
    initial_value: float = 0.0,
    qv_mode: str = "dt",
    cfg: FdConfig | None = None,
    chunk: int = 256,
) -> ConvergenceReport:
    """RMS change-of-variable residual versus grid resolution, common noise.

    Every resolution must divide the finest by a power of two; each path's
    coarse increments are block sums of its fine ones, so levels see the same
    Brownian path and the fitted order is not drowned by independent noise.
    """
    if model.dim != 1 or model.noise_dim != 1:
        raise DomainError("the residual study runs scalar models")
    res = sorted(int(r) for r in resolutions)
    if len(res) < 2:
        raise DomainError("need at least two resolutions")
    finest = res[-1]
    for r in res:
        if r < 1 or finest % r or (finest // r) & (finest // r - 1):
            raise DomainError(
                f"resolutions must be nested by powers of two, got {resolutions}"
            )
    if n_paths < 2:
        raise DomainError("need at least 2 paths")

    dt_fine = horizon / finest
    grids = [TimeGrid(horizon, r) for r in res]
    initials = [
        StoppedPath.constant(g, np.array([initial_value]), stop_index=0) for g in grids
    ]
    residuals = [np.empty(n_paths) for _ in res]
    want_sigma = qv_mode == "dt"

    def make_task(start: int, count: int):
        def task() -> None:
            fine = plan.increment_block(start, count, finest, dt_fine)
            for li, (r, grid_l, init_l) in enumerate(zip(res, grids, initials)):
                incr = coarsen_increments(fine, finest // r)
                out = simulate_ensemble(
                    model, init_l, count, increments=incr, return_sigma=want_sigma
                )
                if want_sigma:
                    vals, sig = out
                    sig = sig[:, :, 0, 0]
                else:
                    vals, sig = out, None
                residuals[li][start : start + count] = _residuals_batch(
                    f, vals[:, :, 0], grid_l, cfg, qv_mode, sig
                )

        return task

    tasks = [
        make_task(start, min(chunk, n_paths - start))
        for start in range(0, n_paths, chunk)
    ]
    run_tasks(tasks)

    rows = []
    log_pairs = []
    identifiable = True
    for r, res_arr in zip(res, residuals):
        rms, se = _rms_and_stderr(res_arr)
        rows.append((float(r), rms, 0.0, rms, se))
        if rms < 1e-13:
            identifiable = False
        else:
            log_pairs.append((np.log(horizon / r), np.log(rms)))
    if identifiable and len(log_pairs) >= 2:
        xs = np.array([p[0] for p in log_pairs])
        ys = np.array([p[1] for p in log_pairs])
        fitted = float(np.polyfit(xs, ys, 1)[0])
    else:
        fitted = float("nan")
    return ConvergenceReport(tuple(rows), fitted, 0.0)


def strong_convergence_study(
    model: SfdeModel,
    resolutions: list[int],
    plan: NoisePlan,
    *,
    reference_resolution: int,
    n_paths: int = 1000,
    horizon: float = 1.0,
    initial_value: float = 0.0,
    chunk: int = 256,
    workers: int | None = None,
) -> ConvergenceReport:
    """Mean terminal error of coarse solves against a fine self-reference.

    Each path is driven by one fine Brownian draw; coarse levels consume block
    sums of the same increments, so the per-path terminal gap isolates the
    discretization error. ``workers`` overrides the scheduling width without
    changing any output byte: tasks write disjoint path slices and the
    reduction is a fixed-order sum.
    """
    if model.dim != 1 or model.noise_dim != 1:
        raise DomainError("the strong-error study runs scalar models")
    res = sorted(int(r) for r in resolutions)
    ref = int(reference_resolution)
    if len(res) < 2:
        raise DomainError("need at least two resolutions")
    if ref <= res[-1]:
        raise DomainError("reference resolution must exceed every study level")
    for r in res:
        if r < 1 or ref % r or (ref // r) & (ref // r - 1):
            raise DomainError(
                f"levels must divide the reference by powers of two, got {resolutions}"
            )
    if n_paths < 2:
        raise DomainError("need at least 2 paths")

    dt_ref = horizon / ref
    ref_grid = TimeGrid(horizon, ref)
    ref_init = StoppedPath.constant(ref_grid, np.array([initial_value]), stop_index=0)
    grids = [TimeGrid(horizon, r) for r in res]
    initials = [
        StoppedPath.constant(g, np.array([initial_value]), stop_index=0) for g in grids
    ]
    gaps = [np.empty(n_paths) for _ in res]

    def make_task(start: int, count: int):
        def task() -> None:
            fine = plan.increment_block(start, count, ref, dt_ref)
            terminal_ref = simulate_ensemble(
                model, ref_init, count, increments=fine
            )[:, -1, 0]
            for li, (r, init_l) in enumerate(zip(res, initials)):
                incr = coarsen_increments(fine, ref // r)
                terminal = simulate_ensemble(model, init_l, count, increments=incr)[
                    :, -1, 0
                ]
                gaps[li][start : start + count] = np.abs(terminal - terminal_ref)

        return task

    tasks = [
        make_task(start, min(chunk, n_paths - start))
        for start in range(0, n_paths, chunk)
    ]
    run_tasks(tasks, workers=workers)

    rows = []
    log_pairs = []
    identifiable = True
    for r, gap in zip(res, gaps):
        err = float(np.sum(gap) / n_paths)
        se = float(np.std(gap, ddof=1) / sqrt(n_paths))
        rows.append((float(r), err, 0.0, err, se))
        if err < 1e-13:
            identifiable = False
        else:
            log_pairs.append((np.log(horizon / r), np.log(err)))
    if identifiable and len(log_pairs) >= 2:
        xs = np.array([p[0] for p in log_pairs])
        ys = np.array([p[1] for p in log_pairs])
        fitted = float(np.polyfit(xs, ys, 1)[0])
    else:
        fitted = float("nan")
    return ConvergenceReport(tuple(rows), fitted, 0.0)


# -- generator: Monte Carlo limit and the two assemblies ----------------------


def _left_integral(p: StoppedPath) -> float:
    k = p.stop_index
    if k == 0:
        return 0.0
    return float(np.sum(p.samples[:k, 0]) * p.grid.dt)


def _kernel_tails(
    model: SfdeModel,
    count: int,
    x0: float,
    integral0: float,
    t0: float,
    dt_sub: float,
    steps: int,
    dw: np.ndarray,
) -> np.ndarray:
    b_kernel, s_kernel = model.kernels
    x = np.full(count, x0)
    integral = np.full(count, integral0)
    tails = np.empty((count, steps + 1))
    tails[:, 0] = x0
    for step in range(steps):
        t = t0 + step * dt_sub
        b = b_kernel(t, x, integral)
        s = s_kernel(t, x, integral)
        integral = integral + dt_sub * x
        x = x + b * dt_sub + s * dw[:, step, 0]
        tails[:, step + 1] = x
    if not np.all(np.isfinite(tails[:, -1])):
        raise BlowUpError("non-finite state in a short-time quotient ensemble")
    return tails


def generator_lhs(
    f: Functional,
    model: SfdeModel,
    initial: StoppedPath,
    epsilons: list[float],
    plan: NoisePlan,
    *,
    n_paths: int = 10_000,
    steps_per_eps: int = 16,
    reference: float | None = None,
    chunk: int = 16_384,
) -> ConvergenceReport:
    """Short-time difference quotients of E[f] and their limit at lag zero.

    Per lag eps the ensemble evolves on a sub-grid of eps / steps_per_eps, so
    the Euler bias scales with eps and dies in the extrapolation. All lags of
    one path reuse a single fine Brownian draw through block sums (common
    random numbers). Noise-free models skip the ensemble: one deterministic
    path per lag is fitted exactly by a full-degree polynomial, stochastic
    runs by a covariance-weighted linear intercept.
    """
    if initial.dim != 1:
        raise DomainError("the quotient study runs scalar models")
    if initial.bump.any():
        raise DomainError("the initial path must be bump-free")
    if model.kernels is None:
        raise DomainError(
            "refined quotients need a model exposing scalar kernels"
        )
    eps = [float(e) for e in epsilons]
    if len(eps) < 2 or any(e <= 0 for e in eps) or any(
        a <= b for a, b in zip(eps, eps[1:])
    ):
        raise DomainError("epsilons must be positive and strictly decreasing")
    grid = initial.grid
    eps_min = eps[-1]
    for e in eps:
        grid.step_count(e)  # alignment with the base grid
        ratio = e / eps_min
        if abs(ratio - round(ratio)) > 1e-9:
            raise DomainError("epsilons must be integer multiples of the smallest")
    if initial.stop_index + grid.step_count(eps[0]) > grid.node_count:
        raise DomainError("largest lag leaves the horizon")

    t0 = initial.stop_time
    x0 = float(initial.endpoint()[0])
    integral0 = _left_integral(initial)
    phi0 = f.evaluate(initial)
    dt_fine = eps_min / steps_per_eps
    fine_steps = int(round(eps[0] / dt_fine))
    n_eff = 1 if model.noise_free else n_paths
    if not model.noise_free and n_paths < 2:
        raise DomainError("need at least 2 paths for a stochastic quotient")

    quotients = np.empty((n_eff, len(eps)))

    def make_task(start: int, count: int):
        def task() -> None:
            if model.noise_free:
                fine = np.zeros((count, fine_steps, 1))
            else:
                fine = plan.increment_block(start, count, fine_steps, dt_fine)
            for j, e in enumerate(eps):
                s_j = int(round(e / dt_fine))
                dw = coarsen_increments(fine[:, :s_j], s_j // steps_per_eps)
                dt_sub = e / steps_per_eps
                tails = _kernel_tails(
                    model, count, x0, integral0, t0, dt_sub, steps_per_eps, dw
                )
                phi = f.eval_tail_batch(initial, tails, tail_dt=dt_sub)
                quotients[start : start + count, j] = (phi - phi0) / e

        return task

    run_tasks(
        [
            make_task(start, min(chunk, n_eff - start))
            for start in range(0, n_eff, chunk)
        ]
    )

    means = np.array([float(np.sum(quotients[:, j]) / n_eff) for j in range(len(eps))])
    if model.noise_free:
        stderrs = np.zeros(len(eps))
        coeffs = np.polyfit(np.array(eps), means, len(eps) - 1)
        intercept = float(np.polyval(coeffs, 0.0))
        intercept_se = 0.0
    else:
        stderrs = np.std(quotients, axis=0, ddof=1) / sqrt(n_eff)
        design = np.column_stack([np.ones(len(eps)), np.array(eps)])
        projector = np.linalg.solve(design.T @ design, design.T)
        intercept = float(projector[0] @ means)
        cov = np.cov(quotients, rowvar=False, ddof=1)
        intercept_se = float(np.sqrt(projector[0] @ cov @ projector[0] / n_eff))

    ref = intercept if reference is None else float(reference)
    rows = tuple(
        (e, float(means[j]), ref, abs(float(means[j]) - ref), float(stderrs[j]))
        for j, e in enumerate(eps)
    )
    gaps = np.abs(means - intercept)
    if np.all(gaps > 1e-14):
        fitted = float(np.polyfit(np.log(np.array(eps)), np.log(gaps), 1)[0])
    else:
        fitted = float("nan")
    return ConvergenceReport(rows, fitted, intercept, intercept_se)


def _require_plain(p: StoppedPath) -> None:
    if p.bump.any():
        raise DomainError("generator assembly needs a bump-free path")


def generator_rhs_dupire(
    f: Functional,
    model: SfdeModel,
    p: StoppedPath,
    cfg: FdConfig | None = None,
) -> float:
    """Generator from the endpoint jet: dt + <dx, b> + 0.5 <dxx sigma, sigma>."""
    _require_plain(p)
    jet = numerical_dupire_jet(f, p, cfg)
    t = p.stop_time
    b = np.asarray(model.drift(t, p), dtype=float).reshape(model.dim)
    sigma = np.asarray(model.diffusion(t, p), dtype=float).reshape(
        model.dim, model.noise_dim
    )
    quad = 0.5 * float(np.sum(sigma * (jet.dxx @ sigma)))
    return jet.dt + float(jet.dx @ b) + quad


def generator_rhs_frechet(
    f: Functional,
    model: SfdeModel,
    p: StoppedPath,
    ramps: RampFamily | None = None,
    h: float | None = None,
    cfg: FdConfig | None = None,
) -> float:
    """Generator from the variation atoms: time derivative, the first
    variation's point mass against the drift, and half the second variation's
    atom block against the diffusion columns."""
    _require_plain(p)
    t = p.stop_time
    b = np.asarray(model.drift(t, p), dtype=float).reshape(model.dim)
    sigma = np.asarray(model.diffusion(t, p), dtype=float).reshape(
        model.dim, model.noise_dim
    )
    dt_term = time_derivative(f, p, cfg)
    mu = atom_at_t(f, p, ramps=ramps, h=h)
    lam = bilinear_atom_at_t(f, p, ramps=ramps, h=h)
    quad = 0.5 * float(np.sum(sigma * (lam @ sigma)))
    return dt_term + float(mu @ b) + quad


def coherence_report(
    f: Functional,
    p: StoppedPath,
    cfg: FdConfig | None = None,
    ramps: RampFamily | None = None,
    h: float | None = None,
) -> CoherenceReport:
    """Both sides of the three derivative equalities, with their largest gap."""
    _require_plain(p)
    dt_frechet = time_derivative(f, p, cfg)
    dt_dupire = horizontal_derivative(f, p, cfg)
    atom_mu = atom_at_t(f, p, ramps=ramps, h=h)
    dx_dupire = vertical_derivative(f, p, cfg)
    atom_lambda = bilinear_atom_at_t(f, p, ramps=ramps, h=h)
    dxx_dupire = vertical_hessian(f, p, cfg)
    gap = max(
        abs(dt_frechet - dt_dupire),
        float(np.max(np.abs(atom_mu - dx_dupire))),
        float(np.max(np.abs(atom_lambda - dxx_dupire))),
    )
    return CoherenceReport(
        functional=f.name,
        dt_frechet=dt_frechet,
        dt_dupire=dt_dupire,
        atom_mu=atom_mu,
        dx_dupire=dx_dupire,
        atom_lambda=atom_lambda,
        dxx_dupire=dxx_dupire,
        max_abs_gap=gap,
    )
