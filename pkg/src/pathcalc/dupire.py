"""Finite-difference estimators for pathwise (endpoint and time-slot) derivatives.

Vertical derivatives displace the endpoint overlay only, so the history the
functional integrates over never moves. The horizontal derivative is strictly
one-sided: it extends the path flat forward in time and never looks left,
which is the only direction the definition admits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryError, DomainError
from .paths import StoppedPath, horizontal_extend, vertical_bump

__all__ = [
    "FdConfig",
    "DupireJet",
    "default_vertical_step",
    "vertical_derivative",
    "vertical_hessian",
    "horizontal_derivative",
    "numerical_dupire_jet",
]


@dataclass(frozen=True)
class FdConfig:
    """Step policy for the difference quotients.

    h_vertical : endpoint bump size; None selects 1e-4 * (1 + |endpoint|).
    eps_horizontal : forward extension span, a positive node multiple;
        None selects one grid step.
    richardson_levels : 1 disables extrapolation; 2 or 3 add halved-step
        levels (the horizontal step only halves while it stays on the grid).
    """

    h_vertical: float | None = None
    eps_horizontal: float | None = None
    richardson_levels: int = 1

    def __post_init__(self):
        if self.h_vertical is not None and not self.h_vertical > 0:
            raise DomainError(f"h_vertical must be positive, got {self.h_vertical}")
        if self.eps_horizontal is not None and not self.eps_horizontal > 0:
            raise DomainError(f"eps_horizontal must be positive, got {self.eps_horizontal}")
        if not 1 <= self.richardson_levels <= 3:
            raise DomainError(
                f"richardson_levels must be 1..3, got {self.richardson_levels}"
            )


@dataclass(frozen=True)
class DupireJet:
    """Time derivative, endpoint gradient, and endpoint Hessian at one path."""

    dt: float
    dx: np.ndarray
    dxx: np.ndarray

    def __post_init__(self):
        d = self.dx.shape[0]
        if self.dx.ndim != 1 or self.dxx.shape != (d, d):
            raise DomainError(
                f"jet shapes inconsistent: dx {self.dx.shape}, dxx {self.dxx.shape}"
            )


def default_vertical_step(path: StoppedPath) -> float:
    return 1e-4 * (1.0 + float(np.linalg.norm(path.endpoint())))


def _richardson(values: list[float], order: int, step: int) -> float:
    # values[i] was computed with the step halved i times; error series starts
    # at the given order and increases by `step` per term.
    table = list(values)
    p = order
    while len(table) > 1:
        w = 2.0 ** p
        table = [(w * table[i + 1] - table[i]) / (w - 1.0) for i in range(len(table) - 1)]
        p += step
    return table[0]


def _basis_bump(dim: int, coord: int, h: float) -> np.ndarray:
    e = np.zeros(dim)
    e[coord] = h
    return e


def vertical_derivative(f, path: StoppedPath, cfg: FdConfig | None = None) -> np.ndarray:
    """Central-difference endpoint gradient, Richardson-extrapolated in h."""
    cfg = cfg or FdConfig()
    h0 = cfg.h_vertical if cfg.h_vertical is not None else default_vertical_step(path)
    out = np.empty(path.dim)
    for coord in range(path.dim):
        levels = []
        for level in range(cfg.richardson_levels):
            h = h0 / 2.0 ** level
            up = f.evaluate(vertical_bump(path, _basis_bump(path.dim, coord, h)))
            down = f.evaluate(vertical_bump(path, _basis_bump(path.dim, coord, -h)))
            levels.append((up - down) / (2.0 * h))
        out[coord] = _richardson(levels, order=2, step=2)
    return out


def vertical_hessian(f, path: StoppedPath, cfg: FdConfig | None = None) -> np.ndarray:
    """Second central differences at the endpoint; exactly symmetric output.

    Diagonal entries use the three-point stencil, off-diagonal entries the
    four-point mixed stencil, which is invariant under swapping the two
    coordinates, so each pair is computed once and mirrored.
    """
    cfg = cfg or FdConfig()
    h0 = cfg.h_vertical if cfg.h_vertical is not None else default_vertical_step(path)
    d = path.dim
    base = f.evaluate(path)
    out = np.empty((d, d))
    for i in range(d):
        levels = []
        for level in range(cfg.richardson_levels):
            h = h0 / 2.0 ** level
            up = f.evaluate(vertical_bump(path, _basis_bump(d, i, h)))
            down = f.evaluate(vertical_bump(path, _basis_bump(d, i, -h)))
            levels.append((up - 2.0 * base + down) / (h * h))
        out[i, i] = _richardson(levels, order=2, step=2)
        for j in range(i + 1, d):
            levels = []
            for level in range(cfg.richardson_levels):
                h = h0 / 2.0 ** level
                ei = _basis_bump(d, i, h)
                ej = _basis_bump(d, j, h)
                pp = f.evaluate(vertical_bump(path, ei + ej))
                pm = f.evaluate(vertical_bump(path, ei - ej))
                mp = f.evaluate(vertical_bump(path, ej - ei))
                mm = f.evaluate(vertical_bump(path, -(ei + ej)))
                levels.append((pp - pm - mp + mm) / (4.0 * h * h))
            val = _richardson(levels, order=2, step=2)
            out[i, j] = val
            out[j, i] = val
    return out


def horizontal_derivative(f, path: StoppedPath, cfg: FdConfig | None = None) -> float:
    """Forward flat-extension quotient (f(extend(p, t + eps)) - f(p)) / eps.

    Richardson levels halve eps while the halved span stays a whole number of
    grid steps; requested levels beyond that are dropped silently.
    """
    cfg = cfg or FdConfig()
    grid = path.grid
    eps0 = cfg.eps_horizontal if cfg.eps_horizontal is not None else grid.dt
    m0 = grid.step_count(eps0)
    if path.stop_index + m0 > grid.node_count:
        raise BoundaryError(
            f"horizontal step of {m0} nodes leaves the horizon from index {path.stop_index}"
        )
    levels_feasible = 1
    while levels_feasible < cfg.richardson_levels and m0 % (2 ** levels_feasible) == 0:
        levels_feasible += 1
    base = f.evaluate(path)
    quotients = []
    for level in range(levels_feasible):
        m = m0 // (2 ** level)
        target = grid.time_of(path.stop_index + m)
        extended = f.evaluate(horizontal_extend(path, target))
        quotients.append((extended - base) / (m * grid.dt))
    return _richardson(quotients, order=1, step=1)


def numerical_dupire_jet(f, path: StoppedPath, cfg: FdConfig | None = None) -> DupireJet:
    """Bundle the three finite-difference derivatives at one path."""
    cfg = cfg or FdConfig()
    return DupireJet(
        dt=horizontal_derivative(f, path, cfg),
        dx=vertical_derivative(f, path, cfg),
        dxx=vertical_hessian(f, path, cfg),
    )
