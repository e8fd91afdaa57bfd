"""Coefficient models for path-dependent SDEs.

A model supplies drift ``b(t, path) -> (d,)`` and diffusion
``sigma(t, path) -> (d, m)`` read off a stopped path, so a coefficient can
see the whole history up to t but nothing after it. Built-in models depend on
the path only through the current value and the running left-sum integral,
which lets the ensemble driver use an incremental stepper instead of
rebuilding path objects at every node.

Batch steppers are stateful and MUST be stepped once per node in node order;
that contract is owned by the simulation driver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .errors import DomainError, UnknownIdError
from .paths import StoppedPath, TimeGrid, _unchecked

__all__ = [
    "SfdeModel",
    "BatchStepper",
    "get_model",
    "model_ids",
    "register_model",
    "random_bounded_model",
]


class BatchStepper(Protocol):
    """Vectorized coefficient source for an ensemble on a fixed grid."""

    def step(self, node_index: int, history: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients at one node for every path.

        history : (n_paths, node_index + 1, d) values up to and including the
            current node; ``history[:, -1]`` is the current value.
        Returns (b, sigma) with shapes (n_paths, d) and (n_paths, d, m).
        Must be called exactly once per node, for node_index = 0, 1, 2, ...
        """
        ...


@dataclass(frozen=True)
class SfdeModel:
    """Drift/diffusion pair with an optional vectorized stepper factory.

    ``kernels``, when present, holds the scalar (b, sigma) kernels of
    signature (t, x, integral) -> array that the model was built from; the
    refined-quotient generator harness needs them to evolve tails on grids
    finer than the base grid. ``noise_free`` marks models with sigma
    identically zero, which verification treats as deterministic.

    ``lipschitz_c`` and ``bound_k`` are the declared coefficient regularity
    constants: |b(t,p)-b(t,q)| + |sigma(t,p)-sigma(t,q)| <= c d(p,q) and
    |b| + |sigma| <= K. They are claims, spot-checked by the samplers in
    ``sfde``, never proven.
    """

    name: str
    dim: int
    noise_dim: int
    drift: Callable[[float, StoppedPath], np.ndarray]
    diffusion: Callable[[float, StoppedPath], np.ndarray]
    stepper_factory: Callable[[int, TimeGrid], BatchStepper] | None = None
    kernels: tuple[Kernel, Kernel] | None = None
    noise_free: bool = False
    lipschitz_c: float | None = None
    bound_k: float | None = None

    def __post_init__(self) -> None:
        if self.dim < 1 or self.noise_dim < 1:
            raise DomainError("model dimensions must be positive")
        for label, value in (("lipschitz_c", self.lipschitz_c), ("bound_k", self.bound_k)):
            if value is not None and not value > 0.0:
                raise DomainError(f"declared {label} must be positive")

    def batch_stepper(self, n_paths: int, grid: TimeGrid) -> BatchStepper:
        if self.stepper_factory is not None:
            return self.stepper_factory(n_paths, grid)
        return _PerPathStepper(self, grid)


class _PerPathStepper:
    """Correctness fallback: calls the per-path coefficients row by row."""

    def __init__(self, model: SfdeModel, grid: TimeGrid):
        self._model = model
        self._grid = grid

    def step(self, node_index: int, history: np.ndarray):
        model = self._model
        grid = self._grid
        t = grid.time_of(node_index)
        n_paths = history.shape[0]
        b = np.empty((n_paths, model.dim))
        s = np.empty((n_paths, model.dim, model.noise_dim))
        n = grid.node_count
        for r in range(n_paths):
            samples = np.empty((n + 1, model.dim))
            samples[: node_index + 1] = history[r]
            samples[node_index:] = history[r, -1]
            p = _unchecked(grid, samples, node_index, np.zeros(model.dim))
            b[r] = model.drift(t, p)
            s[r] = model.diffusion(t, p)
        return b, s


# -- scalar kernel models ----------------------------------------------------
#
# Kernels map (t, x, integral) -> scalar, vectorized over x/integral, where
# integral is the left sum dt * sum_{i<k} x_i. Both the per-path coefficient
# functions and the incremental batch stepper are generated from one pair of
# kernels, so the two interfaces cannot drift apart.

Kernel = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


def _left_integral_scalar(path: StoppedPath) -> float:
    k = path.stop_index
    if k == 0:
        return 0.0
    return float(np.sum(path.samples[:k, 0]) * path.grid.dt)


class _KernelStepper:
    def __init__(self, b_kernel: Kernel, s_kernel: Kernel, n_paths: int, grid: TimeGrid):
        self._b = b_kernel
        self._s = s_kernel
        self._dt = grid.dt
        self._grid = grid
        self._integral = np.zeros(n_paths)
        self._next_node = 0

    def step(self, node_index: int, history: np.ndarray):
        if node_index != self._next_node:
            raise DomainError(
                f"stepper expected node {self._next_node}, got {node_index}"
            )
        self._next_node += 1
        t = self._grid.time_of(node_index)
        x = history[:, -1, 0]
        integral = self._integral
        b = np.asarray(self._b(t, x, integral))
        s = np.asarray(self._s(t, x, integral))
        self._integral = integral + self._dt * x
        return b[:, None], s[:, None, None]


def _kernel_model(
    name: str,
    b_kernel: Kernel,
    s_kernel: Kernel,
    noise_free: bool = False,
    lipschitz_c: float | None = None,
    bound_k: float | None = None,
) -> SfdeModel:
    def drift(t: float, path: StoppedPath) -> np.ndarray:
        x = path.samples[path.stop_index, 0] + path.bump[0]
        return np.array([float(b_kernel(t, x, _left_integral_scalar(path)))])

    def diffusion(t: float, path: StoppedPath) -> np.ndarray:
        x = path.samples[path.stop_index, 0] + path.bump[0]
        return np.array([[float(s_kernel(t, x, _left_integral_scalar(path)))]])

    def factory(n_paths: int, grid: TimeGrid) -> BatchStepper:
        return _KernelStepper(b_kernel, s_kernel, n_paths, grid)

    return SfdeModel(
        name,
        1,
        1,
        drift,
        diffusion,
        factory,
        kernels=(b_kernel, s_kernel),
        noise_free=noise_free,
        lipschitz_c=lipschitz_c,
        bound_k=bound_k,
    )


_CLIP = 8.0


def _clip(v: np.ndarray) -> np.ndarray:
    return np.clip(v, -_CLIP, _CLIP)


def _zeros(t, x, integral):
    return np.zeros_like(x)


def _ones(t, x, integral):
    return np.ones_like(x)


_BUILTIN_MODELS: dict[str, SfdeModel] = {}


def register_model(model: SfdeModel) -> SfdeModel:
    if model.name in _BUILTIN_MODELS:
        raise DomainError(f"model {model.name!r} is already registered")
    _BUILTIN_MODELS[model.name] = model
    return model


def get_model(name: str) -> SfdeModel:
    try:
        return _BUILTIN_MODELS[name]
    except KeyError:
        raise UnknownIdError("model", name, list(_BUILTIN_MODELS)) from None


def model_ids() -> list[str]:
    return sorted(_BUILTIN_MODELS)


# Declared Lipschitz constants are calibrated for horizons up to 1: the
# running-integral term contributes a factor of the stop time to the
# coefficient difference, so longer horizons would need larger declarations.
register_model(
    _kernel_model("zero", _zeros, _zeros, noise_free=True, lipschitz_c=1.0, bound_k=1.0)
)
register_model(
    _kernel_model("drift1", _ones, _zeros, noise_free=True, lipschitz_c=1.0, bound_k=1.0)
)
register_model(_kernel_model("bm", _zeros, _ones, lipschitz_c=1.0, bound_k=1.0))
register_model(
    _kernel_model(
        "linear-pd",
        lambda t, x, integral: _clip(integral),
        lambda t, x, integral: _clip(x),
        lipschitz_c=2.0,
        bound_k=2.0 * _CLIP,
    )
)
register_model(
    _kernel_model(
        "tanh-pd",
        lambda t, x, integral: np.tanh(x) + 0.5 * np.tanh(integral),
        lambda t, x, integral: 0.6 + 0.4 * np.tanh(integral),
        lipschitz_c=2.0,
        bound_k=2.5,
    )
)


def random_bounded_model(seed: int, name: str | None = None) -> SfdeModel:
    """Scalar model with bounded, history-dependent coefficients.

    Coefficients are random tanh mixtures of the current value, the running
    integral, and time, so they are globally bounded and Lipschitz whatever
    the draw. Intended for randomized causality and robustness checks; not
    added to the registry.
    """
    rng = np.random.default_rng(seed)
    amp = rng.uniform(0.2, 1.5, size=4)
    slope = rng.uniform(-1.5, 1.5, size=(4, 3))
    shift = rng.uniform(-1.0, 1.0, size=4)

    def mix(i: int, j: int):
        def kernel(t, x, integral):
            a = slope[i]
            b = slope[j]
            return amp[i] * np.tanh(a[0] * x + a[1] * integral + a[2] * t + shift[i]) + (
                amp[j] * np.tanh(b[0] * x + b[1] * integral + b[2] * t + shift[j])
            )

        return kernel

    # Conservative declarations from the mixture coefficients (horizon <= 1):
    # each tanh term has amplitude amp[i] and slope amp[i] * (|x slope| +
    # |integral slope|) in the path argument.
    pair_k = amp[0] + amp[1] + amp[2] + amp[3]
    pair_c = float(np.sum(amp * (np.abs(slope[:, 0]) + np.abs(slope[:, 1]))))
    label = name if name is not None else f"random-bounded-{seed}"
    return _kernel_model(
        label,
        mix(0, 1),
        mix(2, 3),
        lipschitz_c=max(pair_c, 1e-6),
        bound_k=float(pair_k),
    )
