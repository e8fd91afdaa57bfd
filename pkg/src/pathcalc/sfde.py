"""Euler scheme for path-dependent SDEs, per path and as vectorized ensembles.

Causality is structural, not a convention the coefficients are trusted to
follow: at node i every coefficient call sees a snapshot stopped at i, whose
rows past i hold the frozen current value (per path) or simply do not exist
(ensembles pass a history view ending at i). Feeding an initial path whose
stored tail was tampered with therefore cannot change the output, because the
driver rebuilds its state from the effective values up to the stop only.

``euler_solve`` is the readable per-path reference; ``simulate_ensemble`` is
the array implementation used by the Monte Carlo harnesses. They agree to
rounding (summation order differs in running integrals), which is checked in
the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .errors import BlowUpError, DomainError
from .functionals import Functional
from .models import SfdeModel
from .paths import StoppedPath, _unchecked
from .rng import NoisePlan

__all__ = [
    "BLOW_UP_LIMIT",
    "McEstimate",
    "euler_solve",
    "simulate_ensemble",
    "mc_expectation",
    "ProbeReport",
    "check_bounded",
    "check_lipschitz",
]

BLOW_UP_LIMIT = 1.0e8


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its standard error."""

    mean: float
    stderr: float
    n_paths: int


def _segment_bounds(initial: StoppedPath, t_end: float | None) -> tuple[int, int]:
    grid = initial.grid
    k0 = initial.stop_index
    end = grid.node_count if t_end is None else grid.index_of(t_end)
    if end < k0:
        raise DomainError("t_end precedes the initial path's stop time")
    return k0, end


def _check_alive(row: np.ndarray, node_index: int) -> None:
    if not np.all(np.isfinite(row)):
        raise BlowUpError(
            f"non-finite state at node {node_index}", node_index=node_index
        )
    peak = float(np.max(np.abs(row)))
    if peak > BLOW_UP_LIMIT:
        raise BlowUpError(
            f"state magnitude {peak:.3e} exceeds {BLOW_UP_LIMIT:.1e} at node {node_index}",
            node_index=node_index,
        )


def euler_solve(
    model: SfdeModel,
    initial: StoppedPath,
    plan: NoisePlan | None = None,
    *,
    path_index: int = 0,
    t_end: float | None = None,
    increments: np.ndarray | None = None,
) -> StoppedPath:
    """Advance one path from its stop time to t_end (default: the horizon).

    Noise comes either from ``plan`` (the substream for ``path_index``) or
    from an explicit ``increments`` array of shape (steps, noise_dim).
    """
    if initial.dim != model.dim:
        raise DomainError(
            f"path dimension {initial.dim} does not match model dimension {model.dim}"
        )
    grid = initial.grid
    k0, end = _segment_bounds(initial, t_end)
    m = end - k0
    if increments is None:
        if plan is None:
            raise DomainError("either a noise plan or explicit increments is required")
        increments = plan.increments(path_index, m, grid.dt) if m else np.zeros(
            (0, model.noise_dim)
        )
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (m, model.noise_dim):
        raise DomainError(
            f"increments shape {increments.shape} != {(m, model.noise_dim)}"
        )

    dt = grid.dt
    samples = initial.node_values().copy()
    for i in range(k0, end):
        snapshot_samples = samples.copy()
        snapshot_samples[i:] = samples[i]
        snapshot = _unchecked(grid, snapshot_samples, i, np.zeros(model.dim))
        t = grid.time_of(i)
        b = np.asarray(model.drift(t, snapshot), dtype=float).reshape(model.dim)
        s = np.asarray(model.diffusion(t, snapshot), dtype=float).reshape(
            model.dim, model.noise_dim
        )
        samples[i + 1] = samples[i] + b * dt + s @ increments[i - k0]
        _check_alive(samples[i + 1], i + 1)
    samples[end:] = samples[end]
    return StoppedPath.from_values(grid, samples, end)


def simulate_ensemble(
    model: SfdeModel,
    initial: StoppedPath,
    n_paths: int,
    plan: NoisePlan | None = None,
    *,
    t_end: float | None = None,
    increments: np.ndarray | None = None,
    first_path: int = 0,
    return_sigma: bool = False,
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """Simulate n_paths continuations of one initial path.

    Returns (n_paths, m + 1, d) where row j of a path holds its value at node
    ``initial.stop_index + j``. Row 0 is the shared initial endpoint. Path r
    uses substream ``first_path + r`` of the plan, so results are independent
    of how the ensemble is split into calls.

    With return_sigma=True also returns the diffusion coefficients seen at
    each step, shape (n_paths, m, d, noise_dim); the quadratic-variation
    accounting of the pathwise-formula harness needs them.
    """
    if initial.dim != model.dim:
        raise DomainError(
            f"path dimension {initial.dim} does not match model dimension {model.dim}"
        )
    if n_paths < 1:
        raise DomainError("n_paths must be at least 1")
    grid = initial.grid
    k0, end = _segment_bounds(initial, t_end)
    m = end - k0
    if increments is None:
        if plan is None:
            raise DomainError("either a noise plan or explicit increments is required")
        increments = plan.increment_block(first_path, n_paths, m, grid.dt) if m else (
            np.zeros((n_paths, 0, model.noise_dim))
        )
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (n_paths, m, model.noise_dim):
        raise DomainError(
            f"increments shape {increments.shape} != {(n_paths, m, model.noise_dim)}"
        )

    dt = grid.dt
    vals0 = initial.node_values()
    full = np.empty((n_paths, end + 1, model.dim))
    full[:, : k0 + 1] = vals0[: k0 + 1]

    stepper = model.batch_stepper(n_paths, grid)
    for i in range(k0):
        stepper.step(i, full[:, : i + 1])
    sigmas = (
        np.empty((n_paths, m, model.dim, model.noise_dim)) if return_sigma else None
    )
    for i in range(k0, end):
        b, s = stepper.step(i, full[:, : i + 1])
        if sigmas is not None:
            sigmas[:, i - k0] = s
        drive = (s @ increments[:, i - k0, :, None])[..., 0]
        full[:, i + 1] = full[:, i] + b * dt + drive
        _check_alive(full[:, i + 1], i + 1)
    values = full[:, k0:].copy()
    if sigmas is not None:
        return values, sigmas
    return values


def mc_expectation(
    f: Functional,
    model: SfdeModel,
    initial: StoppedPath,
    n_paths: int,
    plan: NoisePlan,
    *,
    t_end: float | None = None,
    chunk: int = 4096,
) -> McEstimate:
    """Monte Carlo estimate of E[f(path at t_end)] over simulated continuations.

    Per-path values are assembled into one array indexed by path and reduced
    once, so the estimate is bitwise independent of the chunk size.
    """
    if n_paths < 2:
        raise DomainError("need at least 2 paths for a standard error")
    values = np.empty(n_paths)
    for start in range(0, n_paths, chunk):
        count = min(chunk, n_paths - start)
        tails = simulate_ensemble(
            model,
            initial,
            count,
            plan,
            t_end=t_end,
            first_path=start,
        )
        values[start : start + count] = f.eval_tail_batch(initial, tails[:, :, 0])
    mean = float(np.sum(values) / n_paths)
    stderr = float(np.std(values, ddof=1) / sqrt(n_paths))
    return McEstimate(mean, stderr, n_paths)


# -- coefficient probes ------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    """Outcome of a randomized coefficient probe."""

    model: str
    check: str
    passed: bool
    worst: float
    threshold: float
    n_probes: int


def _random_stopped_path(rng: np.random.Generator, grid, dim: int, amplitude: float, stop_index: int) -> StoppedPath:
    steps = rng.normal(size=(grid.node_count + 1, dim)) * (
        amplitude / sqrt(max(grid.node_count, 1))
    )
    steps[0] = rng.uniform(-amplitude, amplitude, size=dim)
    values = np.cumsum(steps, axis=0)
    return StoppedPath.from_values(grid, values, stop_index)


def _coefficient_norm(model: SfdeModel, t: float, path: StoppedPath) -> float:
    b = np.asarray(model.drift(t, path), dtype=float)
    s = np.asarray(model.diffusion(t, path), dtype=float)
    return float(np.max(np.abs(b)) + np.max(np.abs(s)))


def _declared(model: SfdeModel, override: float | None, field: str) -> float:
    if override is not None:
        return float(override)
    value = getattr(model, field)
    if value is None:
        raise DomainError(
            f"model {model.name!r} declares no {field}; pass the constant explicitly"
        )
    return float(value)


def check_bounded(
    model: SfdeModel,
    grid,
    bound: float | None = None,
    *,
    seed: int = 0,
    n_probes: int = 64,
    amplitude: float = 2.0,
) -> ProbeReport:
    """Probe |b| + |sigma| on random paths against a claimed bound.

    ``bound`` defaults to the model's declared ``bound_k``.
    """
    bound = _declared(model, bound, "bound_k")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        k = int(rng.integers(0, grid.node_count + 1))
        p = _random_stopped_path(rng, grid, model.dim, amplitude, k)
        worst = max(worst, _coefficient_norm(model, p.stop_time, p))
    passed = worst <= bound * (1.0 + 1e-9)
    return ProbeReport(model.name, "bounded", passed, worst, bound, n_probes)


def check_lipschitz(
    model: SfdeModel,
    grid,
    constant: float | None = None,
    *,
    seed: int = 0,
    n_probes: int = 64,
    amplitude: float = 2.0,
) -> ProbeReport:
    """Probe the coefficient difference quotient against a claimed constant.

    Pairs share a stop time, so the path distance reduces to the sup distance
    of the stopped values. ``constant`` defaults to the model's declared
    ``lipschitz_c``.
    """
    from .paths import d_infinity

    constant = _declared(model, constant, "lipschitz_c")

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        k = int(rng.integers(0, grid.node_count + 1))
        p = _random_stopped_path(rng, grid, model.dim, amplitude, k)
        q = _random_stopped_path(rng, grid, model.dim, amplitude, k)
        dist = d_infinity(p, q)
        if dist < 1e-12:
            continue
        t = p.stop_time
        gap = 0.0
        bp = np.asarray(model.drift(t, p), dtype=float)
        bq = np.asarray(model.drift(t, q), dtype=float)
        sp = np.asarray(model.diffusion(t, p), dtype=float)
        sq = np.asarray(model.diffusion(t, q), dtype=float)
        gap = float(np.max(np.abs(bp - bq)) + np.max(np.abs(sp - sq)))
        worst = max(worst, gap / dist)
    passed = worst <= constant * (1.0 + 1e-9)
    return ProbeReport(
        model.name, "lipschitz", passed, worst, constant, n_probes
    )
