"""Stopped paths on a uniform time grid.

A stopped path holds node samples of a function on [0, T] together with a stop
index k and a vertical bump vector. Nodes past the stop index repeat the node-k
sample (the path is flat after it stops), and the bump is an overlay on the
endpoint only: the value at the stop time is ``samples[k] + bump`` while every
earlier node is untouched. Keeping the bump out of the sample array is what
makes left-point integral functionals exactly blind to it.

All values are immutable; every operation returns a new path.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, GridAlignmentError

__all__ = [
    "TimeGrid",
    "StoppedPath",
    "stop_at",
    "vertical_bump",
    "horizontal_extend",
    "sup_norm",
    "d_infinity",
    "save_path_csv",
    "load_path_csv",
]

_ALIGN_RTOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = i * horizon / node_count, i = 0..node_count."""

    horizon: float
    node_count: int

    def __post_init__(self):
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise DomainError(f"horizon must be finite and positive, got {self.horizon}")
        if self.node_count < 1:
            raise DomainError(f"node_count must be >= 1, got {self.node_count}")

    @property
    def dt(self) -> float:
        return self.horizon / self.node_count

    @property
    def nodes(self) -> np.ndarray:
        out = np.linspace(0.0, self.horizon, self.node_count + 1)
        out.setflags(write=False)
        return out

    def time_of(self, index: int) -> float:
        if not 0 <= index <= self.node_count:
            raise DomainError(f"node index {index} outside 0..{self.node_count}")
        return index * self.horizon / self.node_count

    def index_of(self, t: float) -> int:
        """Node index of t; raises GridAlignmentError when t is off-grid."""
        if not (0.0 <= t <= self.horizon * (1 + _ALIGN_RTOL)):
            raise DomainError(f"time {t} outside [0, {self.horizon}]")
        ratio = t / self.dt
        idx = int(round(ratio))
        if abs(ratio - idx) > _ALIGN_RTOL * max(1.0, abs(ratio)):
            raise GridAlignmentError(f"time {t} is not a node of the grid (dt={self.dt})")
        return min(idx, self.node_count)

    def step_count(self, span: float) -> int:
        """Number of grid steps covering a span; raises when off-grid."""
        ratio = span / self.dt
        m = int(round(ratio))
        if m <= 0 or abs(ratio - m) > _ALIGN_RTOL * max(1.0, abs(ratio)):
            raise GridAlignmentError(f"span {span} is not a positive multiple of dt={self.dt}")
        return m

    def refined(self, factor: int) -> "TimeGrid":
        if factor < 1:
            raise DomainError(f"refinement factor must be >= 1, got {factor}")
        return TimeGrid(self.horizon, self.node_count * factor)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StoppedPath:
    """Immutable path sample on a TimeGrid, stopped at ``stop_index``.

    Attributes
    ----------
    grid : TimeGrid
    samples : ndarray, shape (node_count + 1, dim)
        Node values; rows past ``stop_index`` equal row ``stop_index``.
    stop_index : int
    bump : ndarray, shape (dim,)
        Endpoint displacement. The value at the stop time is
        ``samples[stop_index] + bump``; samples themselves never contain it.
    """

    grid: TimeGrid
    samples: np.ndarray
    stop_index: int
    bump: np.ndarray

    def __post_init__(self):
        n = self.grid.node_count
        if self.samples.ndim != 2 or self.samples.shape[0] != n + 1:
            raise DomainError(
                f"samples must have shape ({n + 1}, dim), got {self.samples.shape}"
            )
        if not 0 <= self.stop_index <= n:
            raise DomainError(f"stop_index {self.stop_index} outside 0..{n}")
        if self.bump.shape != (self.samples.shape[1],):
            raise DomainError(
                f"bump shape {self.bump.shape} does not match dim {self.samples.shape[1]}"
            )
        tail = self.samples[self.stop_index :]
        if tail.size and not np.array_equal(tail, np.broadcast_to(tail[0], tail.shape)):
            raise DomainError("samples past the stop index must repeat the stop-index row")

    # -- construction ------------------------------------------------------

    @staticmethod
    def from_values(
        grid: TimeGrid,
        values: np.ndarray,
        stop_index: int | None = None,
        bump: np.ndarray | None = None,
    ) -> "StoppedPath":
        """Build a path from raw node values, freezing everything past the stop."""
        arr = np.array(values, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] != grid.node_count + 1:
            raise DomainError(
                f"values must have {grid.node_count + 1} rows, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise DomainError("values must be finite")
        k = grid.node_count if stop_index is None else int(stop_index)
        if not 0 <= k <= grid.node_count:
            raise DomainError(f"stop_index {k} outside 0..{grid.node_count}")
        arr[k:] = arr[k]
        b = np.zeros(arr.shape[1]) if bump is None else np.array(bump, dtype=float, copy=True)
        return StoppedPath(grid, _freeze(arr), k, _freeze(b))

    @staticmethod
    def from_function(grid: TimeGrid, fn, stop_index: int | None = None) -> "StoppedPath":
        vals = np.asarray([fn(t) for t in grid.nodes], dtype=float)
        return StoppedPath.from_values(grid, vals, stop_index=stop_index)

    @staticmethod
    def constant(grid: TimeGrid, value, stop_index: int | None = None) -> "StoppedPath":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        vals = np.tile(v, (grid.node_count + 1, 1))
        return StoppedPath.from_values(grid, vals, stop_index=stop_index)

    # -- accessors ---------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def stop_time(self) -> float:
        return self.grid.time_of(self.stop_index)

    def endpoint(self) -> np.ndarray:
        """Value at the stop time, bump included."""
        return self.samples[self.stop_index] + self.bump

    def node_values(self) -> np.ndarray:
        """Effective node values gamma(s ^ t): bump applied from the stop on."""
        if not self.bump.any():
            return self.samples
        out = self.samples.copy()
        out[self.stop_index :] += self.bump
        return _freeze(out)


def _unchecked(grid: TimeGrid, samples: np.ndarray, stop_index: int, bump: np.ndarray) -> StoppedPath:
    # Internal fast constructor: caller guarantees the frozen-tail invariant.
    p = object.__new__(StoppedPath)
    object.__setattr__(p, "grid", grid)
    object.__setattr__(p, "samples", _freeze(samples))
    object.__setattr__(p, "stop_index", stop_index)
    object.__setattr__(p, "bump", _freeze(bump))
    return p


# -- operations ------------------------------------------------------------


def stop_at(path: StoppedPath, t: float) -> StoppedPath:
    """Stop (or flat-restop) the path at grid time t. Requires a zero bump."""
    if path.bump.any():
        raise DomainError("stop_at requires a bump-free path; fold it with horizontal_extend")
    k = path.grid.index_of(t)
    samples = path.samples.copy()
    samples[k:] = samples[min(k, path.stop_index)]
    return _unchecked(path.grid, samples, k, path.bump.copy())


def vertical_bump(path: StoppedPath, x: np.ndarray) -> StoppedPath:
    """Displace the endpoint by x. Samples are untouched; bumps accumulate."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (path.dim,):
        raise DomainError(f"bump shape {x.shape} does not match path dim {path.dim}")
    return _unchecked(path.grid, path.samples, path.stop_index, path.bump + x)


def horizontal_extend(path: StoppedPath, s: float) -> StoppedPath:
    """Extend the path flat to time s >= stop time, folding the bump first.

    The bumped endpoint becomes a regular sample at the old stop node and is
    carried flat to index(s); the returned path has a zero bump.
    """
    m = path.grid.index_of(s)
    if m < path.stop_index:
        raise DomainError(
            f"extension target index {m} precedes stop index {path.stop_index}"
        )
    samples = path.samples.copy()
    samples[path.stop_index :] = path.samples[path.stop_index] + path.bump
    return _unchecked(path.grid, samples, m, np.zeros(path.dim))


def sup_norm(path: StoppedPath) -> float:
    """Max Euclidean node norm over [0, stop]; the endpoint includes the bump."""
    k = path.stop_index
    norms = np.linalg.norm(path.samples[:k], axis=1)
    end = float(np.linalg.norm(path.samples[k] + path.bump))
    return float(max(norms.max(), end)) if norms.size else end


def d_infinity(p: StoppedPath, q: StoppedPath) -> float:
    """Clamped-time sup distance plus stop-time gap.

    sup over shared nodes of |p(s ^ t_p) - q(s ^ t_q)| plus |t_p - t_q|.
    Both paths must share dimension and an identical grid.
    """
    if p.dim != q.dim:
        raise DomainError(f"dimension mismatch: {p.dim} vs {q.dim}")
    if p.grid != q.grid:
        raise DomainError("d_infinity requires paths on the same grid")
    hi = max(p.stop_index, q.stop_index)
    pv = p.node_values()[: hi + 1]
    qv = q.node_values()[: hi + 1]
    gap = float(np.linalg.norm(pv - qv, axis=1).max())
    return gap + abs(p.stop_time - q.stop_time)


# -- serialization -----------------------------------------------------------


def save_path_csv(path: StoppedPath, file: str | Path) -> None:
    """Write node rows ``t,x_1,...,x_d`` plus a ``<file>.json`` sidecar.

    The sidecar records the stop index and the bump, which the CSV cannot hold.
    """
    file = Path(file)
    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x_{j + 1}" for j in range(path.dim)])
        for t, row in zip(path.grid.nodes, path.samples):
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
    sidecar = {"stop_index": path.stop_index, "bump": [float(v) for v in path.bump]}
    Path(str(file) + ".json").write_text(json.dumps(sidecar) + "\n")


def load_path_csv(file: str | Path) -> StoppedPath:
    """Read a path written by save_path_csv; a missing sidecar means no stop, no bump."""
    file = Path(file)
    with open(file, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "t" or len(header) < 2:
            raise DomainError(f"malformed path CSV header: {header!r}")
        times, rows = [], []
        for rec in reader:
            if not rec:
                continue
            times.append(float(rec[0]))
            rows.append([float(v) for v in rec[1:]])
    times = np.asarray(times)
    values = np.asarray(rows)
    if len(times) < 2:
        raise DomainError("path CSV must contain at least two nodes")
    horizon = float(times[-1])
    grid = TimeGrid(horizon, len(times) - 1)
    if not np.allclose(times, grid.nodes, rtol=0, atol=_ALIGN_RTOL * max(1.0, horizon)):
        raise GridAlignmentError("path CSV nodes are not a uniform grid from 0")
    stop_index, bump = None, None
    sidecar = Path(str(file) + ".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        stop_index = int(meta["stop_index"])
        bump = np.asarray(meta.get("bump", [0.0] * values.shape[1]), dtype=float)
    return StoppedPath.from_values(grid, values, stop_index=stop_index, bump=bump)
