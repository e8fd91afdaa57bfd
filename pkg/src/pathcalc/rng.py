"""Deterministic noise streams keyed by (seed, path index).

Every simulated path draws from its own counter-based substream, so an
ensemble is bitwise reproducible no matter how it is chunked or which worker
handles which slice: the noise for path p is a pure function of (seed, p).

Increments for nested grids come from one fine draw per path, coarsened by
block sums. That keeps refinement studies on common noise: the coarse path
sees exactly the sums of the fine Brownian increments over its steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["NoisePlan", "substream", "coarsen_increments"]


def substream(seed: int, path_index: int) -> np.random.Generator:
    """Independent generator for one path, a pure function of its arguments."""
    key = np.array([seed, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def coarsen_increments(fine: np.ndarray, factor: int) -> np.ndarray:
    """Block-sum increments along the step axis: (..., m*factor, d) -> (..., m, d)."""
    if factor < 1:
        raise DomainError("coarsening factor must be a positive integer")
    steps = fine.shape[-2]
    if steps % factor:
        raise DomainError(f"cannot coarsen {steps} steps by a factor of {factor}")
    shape = fine.shape[:-2] + (steps // factor, factor, fine.shape[-1])
    return fine.reshape(shape).sum(axis=-2)


@dataclass(frozen=True)
class NoisePlan:
    """Reproducible Brownian increment source for ensembles.

    seed : ensemble-level seed; two plans with the same seed and noise_dim
        produce identical draws path by path.
    noise_dim : number of independent Brownian coordinates per path.
    """

    seed: int
    noise_dim: int = 1

    def __post_init__(self) -> None:
        if self.noise_dim < 1:
            raise DomainError("noise_dim must be at least 1")
        if not 0 <= int(self.seed) < 2 ** 63:
            raise DomainError("seed must fit in a non-negative 63-bit integer")

    def standard_normals(self, path_index: int, count: int) -> np.ndarray:
        """(count, noise_dim) unit normals for one path."""
        return substream(self.seed, path_index).standard_normal(
            size=(count, self.noise_dim)
        )

    def increments(self, path_index: int, step_count: int, dt: float) -> np.ndarray:
        """(step_count, noise_dim) Brownian increments over steps of length dt."""
        if dt <= 0:
            raise DomainError("dt must be positive")
        return self.standard_normals(path_index, step_count) * np.sqrt(dt)

    def increment_block(
        self, first_path: int, n_paths: int, step_count: int, dt: float
    ) -> np.ndarray:
        """(n_paths, step_count, noise_dim) increments for a contiguous index range.

        Row r belongs to path ``first_path + r`` and is bitwise identical to
        ``increments(first_path + r, step_count, dt)``.
        """
        if n_paths < 1:
            raise DomainError("n_paths must be at least 1")
        if dt <= 0:
            raise DomainError("dt must be positive")
        out = np.empty((n_paths, step_count, self.noise_dim))
        for r in range(n_paths):
            out[r] = substream(self.seed, first_path + r).standard_normal(
                size=(step_count, self.noise_dim)
            )
        out *= np.sqrt(dt)
        return out
