"""Directional derivatives and discrete Riesz representations.

The first variation of a smooth non-anticipative functional along directions
supported on [0, t] is represented by a finite signed measure: nodal weights on
the grid plus a point mass (atom) at the stop time. Nodal weights are read off
with hat directions (on the grid a nodal hat is the unit vector at that node);
the atom is separated from any density by probing with a family of ramps that
rise linearly from 0 to the target vector over a shrinking window [t - 1/k, t].

Against a density the left-point sum of a ramp is (1/k - dt)/2 times the local
density value, so the linear-in-1/k extrapolant is evaluated at 1/k = dt, the
finest grid-representable ramp, where that contribution vanishes identically.
Evaluating at 0 instead would leave a spurious -dt/2 density shadow on the atom
that only decays with the grid, not with k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dupire import FdConfig, horizontal_derivative
from .errors import DomainError, NonConvergenceError
from .paths import StoppedPath, TimeGrid, _unchecked, sup_norm

__all__ = [
    "RieszRepresentation",
    "RampFamily",
    "DEFAULT_RAMP_KS",
    "directional_derivative",
    "second_directional_derivative",
    "time_derivative",
    "hat_direction",
    "estimate_riesz_measure",
    "atom_at_t",
    "bilinear_atom_at_t",
    "apply_extended_derivative",
]

DEFAULT_RAMP_KS = (8, 16, 32, 64)

# Relative budget for agreement between the two admissible ramp extrapolants.
_RAMP_BUDGET = 1e-3


def default_direction_step(eta: StoppedPath) -> float:
    return 1e-4 / (1.0 + sup_norm(eta))


@dataclass(frozen=True)
class RieszRepresentation:
    """Discrete measure representing a first variation on [0, t].

    ``weights[i]`` is the nodal mass at t_i for i = 0..t_index (one row per
    coordinate of the path), and ``atom`` is the point mass at the stop time.
    Applying the representation to a direction eta yields
    ``sum_i <weights[i], eta(t_i)> + <atom, eta(t)>``.
    """

    grid: TimeGrid
    t_index: int
    weights: np.ndarray
    atom: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 2 or self.weights.shape[0] != self.t_index + 1:
            raise DomainError(
                f"weights must have shape ({self.t_index + 1}, dim), got {self.weights.shape}"
            )
        if self.atom.shape != (self.weights.shape[1],):
            raise DomainError("atom dimension does not match weights")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def apply(self, eta: StoppedPath) -> float:
        vals = eta.node_values()[: self.t_index + 1]
        if vals.shape[1] != self.dim:
            raise DomainError("direction dimension mismatch")
        density = float(np.sum(self.weights * vals))
        return density + float(self.atom @ vals[self.t_index])


@dataclass(frozen=True)
class RampFamily:
    """Ramp resolutions for atom extraction; each 1/k must be a grid multiple."""

    k_values: tuple[int, ...] = DEFAULT_RAMP_KS

    def __post_init__(self):
        ks = tuple(sorted(int(k) for k in self.k_values))
        if len(ks) < 2:
            raise DomainError("need at least two ramp resolutions")
        if len(set(ks)) != len(ks):
            raise DomainError(f"duplicate ramp resolutions in {self.k_values}")
        if ks[0] <= 0:
            raise DomainError("ramp resolutions must be positive")
        object.__setattr__(self, "k_values", ks)

    def widths(self, grid: TimeGrid, t_index: int) -> list[int]:
        """Support widths in grid steps, one per k; validates alignment and fit."""
        out = []
        for k in self.k_values:
            m = grid.step_count(1.0 / k)
            if m > t_index:
                raise DomainError(
                    f"ramp support 1/{k} exceeds the stop time t={grid.time_of(t_index)}"
                )
            out.append(m)
        return out


def _perturbed(path: StoppedPath, eta_vals: np.ndarray, h: float) -> StoppedPath:
    # path + h*eta on [0, t], re-frozen after the stop; bump carried unchanged.
    k = path.stop_index
    samples = path.samples.copy()
    samples[: k + 1] += h * eta_vals[: k + 1]
    samples[k:] = samples[k]
    return _unchecked(path.grid, samples, k, path.bump.copy())


def directional_derivative(f, path: StoppedPath, eta: StoppedPath, h: float | None = None) -> float:
    """Central difference (f(p + h*eta) - f(p - h*eta)) / (2h).

    Only eta's values on [0, t] enter the perturbation, so directions are
    truncated exactly: eta and eta * 1_[0,t] give bitwise-equal results.
    """
    if eta.dim != path.dim:
        raise DomainError(f"direction dim {eta.dim} does not match path dim {path.dim}")
    if eta.grid != path.grid:
        raise DomainError("direction must live on the path's grid")
    if h is None:
        h = default_direction_step(eta)
    if h <= 0:
        raise DomainError(f"step h must be positive, got {h}")
    vals = eta.node_values()
    up = f.evaluate(_perturbed(path, vals, h))
    down = f.evaluate(_perturbed(path, vals, -h))
    return (up - down) / (2.0 * h)


def second_directional_derivative(
    f, path: StoppedPath, eta: StoppedPath, zeta: StoppedPath, h: float | None = None
) -> float:
    """Mixed second difference along (eta, zeta); symmetric by construction."""
    for direction in (eta, zeta):
        if direction.dim != path.dim:
            raise DomainError("direction dimension mismatch")
        if direction.grid != path.grid:
            raise DomainError("direction must live on the path's grid")
    if h is None:
        h = min(default_direction_step(eta), default_direction_step(zeta))
    if h <= 0:
        raise DomainError(f"step h must be positive, got {h}")
    ev = eta.node_values()
    zv = zeta.node_values()
    pp = f.evaluate(_perturbed(path, ev + zv, h))
    pm = f.evaluate(_perturbed(path, ev - zv, h))
    mp = f.evaluate(_perturbed(path, zv - ev, h))
    mm = f.evaluate(_perturbed(path, -(ev + zv), h))
    return (pp - pm - mp + mm) / (4.0 * h * h)


def time_derivative(f, path: StoppedPath, cfg: FdConfig | None = None) -> float:
    """Forward flat-extension quotient in the time slot.

    Shares its implementation with the horizontal derivative: for
    non-anticipative functionals the two definitions discretize to the same
    difference quotient, and the shared code makes that an identity.
    """
    return horizontal_derivative(f, path, cfg)


def hat_direction(grid: TimeGrid, node: int, coord: int = 0, dim: int = 1) -> StoppedPath:
    """Nodal hat: the continuous tent at t_node sampled on the grid (a unit vector)."""
    vals = np.zeros((grid.node_count + 1, dim))
    vals[node, coord] = 1.0
    return StoppedPath.from_values(grid, vals)


def _ramp_values(grid: TimeGrid, t_index: int, width: int, upsilon: np.ndarray) -> np.ndarray:
    vals = np.zeros((grid.node_count + 1, upsilon.shape[0]))
    ramp = np.linspace(0.0, 1.0, width + 1)
    vals[t_index - width : t_index + 1] = ramp[:, None] * upsilon[None, :]
    vals[t_index:] = upsilon
    return vals


def ramp_direction(grid: TimeGrid, t_index: int, k: int, upsilon: np.ndarray) -> StoppedPath:
    """Ramp rising linearly from 0 at t - 1/k to upsilon at t, zero before."""
    width = grid.step_count(1.0 / k)
    if width > t_index:
        raise DomainError(f"ramp support 1/{k} exceeds the stop time")
    u = np.atleast_1d(np.asarray(upsilon, dtype=float))
    return StoppedPath.from_values(grid, _ramp_values(grid, t_index, width, u), stop_index=t_index)


def _extrapolate_to_grid_limit(ks: tuple[int, ...], values: list[float], dt: float) -> tuple[float, float]:
    """Linear-in-1/k extrapolants at 1/k = dt from the two admissible pairs."""
    z = [1.0 / k for k in ks]

    def line(i: int, j: int) -> float:
        if z[i] == z[j]:
            raise DomainError("ramp resolutions must be distinct")
        slope = (values[j] - values[i]) / (z[j] - z[i])
        return values[i] + slope * (dt - z[i])

    primary = line(len(ks) - 1, len(ks) - 2)
    probe = line(len(ks) - 2, len(ks) - 3) if len(ks) >= 3 else primary
    return primary, probe


def atom_at_t(
    f,
    path: StoppedPath,
    ramps: RampFamily | None = None,
    h: float | None = None,
) -> np.ndarray:
    """Point mass of the first variation at the stop time, one entry per coordinate.

    Probes with the ramp family and extrapolates linearly in 1/k to the finest
    grid ramp. When the two available extrapolant pairs disagree beyond the
    budget the sequence is not converging to an atom; the diagnostic carries
    the raw ramp values.
    """
    ramps = ramps or RampFamily()
    widths = ramps.widths(path.grid, path.stop_index)
    dt = path.grid.dt
    out = np.empty(path.dim)
    for coord in range(path.dim):
        upsilon = np.zeros(path.dim)
        upsilon[coord] = 1.0
        trace = []
        for k, width in zip(ramps.k_values, widths):
            vals = _ramp_values(path.grid, path.stop_index, width, upsilon)
            eta = _unchecked(path.grid, vals, path.stop_index, np.zeros(path.dim))
            trace.append(directional_derivative(f, path, eta, h=h))
        primary, probe = _extrapolate_to_grid_limit(ramps.k_values, trace, dt)
        if abs(primary - probe) > _RAMP_BUDGET * (1.0 + abs(primary)):
            raise NonConvergenceError(
                f"ramp sequence for coordinate {coord} does not converge to an atom: "
                f"extrapolants {primary:.6g} vs {probe:.6g}, ramp values {trace}",
                trace=trace,
            )
        out[coord] = primary
    return out


def bilinear_atom_at_t(
    f,
    path: StoppedPath,
    ramps: RampFamily | None = None,
    h: float | None = None,
) -> np.ndarray:
    """Atom-atom block of the second variation, as a symmetric (dim, dim) matrix."""
    ramps = ramps or RampFamily()
    widths = ramps.widths(path.grid, path.stop_index)
    dt = path.grid.dt
    d = path.dim
    out = np.empty((d, d))
    for a in range(d):
        for b in range(a, d):
            ua = np.zeros(d)
            ua[a] = 1.0
            ub = np.zeros(d)
            ub[b] = 1.0
            trace = []
            for k, width in zip(ramps.k_values, widths):
                ea = _unchecked(
                    path.grid, _ramp_values(path.grid, path.stop_index, width, ua),
                    path.stop_index, np.zeros(d),
                )
                eb = _unchecked(
                    path.grid, _ramp_values(path.grid, path.stop_index, width, ub),
                    path.stop_index, np.zeros(d),
                )
                trace.append(second_directional_derivative(f, path, ea, eb, h=h))
            primary, probe = _extrapolate_to_grid_limit(ramps.k_values, trace, dt)
            if abs(primary - probe) > _RAMP_BUDGET * (1.0 + abs(primary)):
                raise NonConvergenceError(
                    f"paired ramp sequence for ({a},{b}) does not converge: "
                    f"extrapolants {primary:.6g} vs {probe:.6g}, ramp values {trace}",
                    trace=trace,
                )
            out[a, b] = primary
            out[b, a] = primary
    return out


def estimate_riesz_measure(
    f,
    path: StoppedPath,
    h: float | None = None,
    ramps: RampFamily | None = None,
) -> RieszRepresentation:
    """Recover the nodal-weights-plus-atom representation of the first variation.

    Hat directions give the nodal masses below the stop directly; at the stop
    node the hat sees density mass and atom together, so the ramp limit is
    subtracted there.
    """
    k = path.stop_index
    d = path.dim
    weights = np.zeros((k + 1, d))
    for node in range(k + 1):
        for coord in range(d):
            eta = hat_direction(path.grid, node, coord, d)
            weights[node, coord] = directional_derivative(f, path, eta, h=h)
    atom = atom_at_t(f, path, ramps=ramps, h=h)
    weights[k] -= atom
    return RieszRepresentation(path.grid, k, weights, atom)


def apply_extended_derivative(rep: RieszRepresentation, phi: StoppedPath, upsilon) -> float:
    """Apply the weakly extended derivative to phi + upsilon * 1_{t}.

    The density weights act on phi over [0, t]; the atom acts on
    phi(t) + upsilon.
    """
    u = np.atleast_1d(np.asarray(upsilon, dtype=float))
    if u.shape != (rep.dim,):
        raise DomainError(f"upsilon shape {u.shape} does not match dim {rep.dim}")
    vals = phi.node_values()
    if vals.shape[1] != rep.dim:
        raise DomainError("phi dimension mismatch")
    if phi.grid != rep.grid:
        raise DomainError("phi must live on the representation's grid")
    density = float(np.sum(rep.weights * vals[: rep.t_index + 1]))
    return density + float(rep.atom @ (vals[rep.t_index] + u))
