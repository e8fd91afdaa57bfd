"""Path functionals: evaluation, closed-form derivative providers, registry.

Every integral in the catalog is a left-point node sum over [0, t): node k
(the stop) never enters an integrand. That convention is load-bearing twice
over: the endpoint bump is exactly invisible to integral terms (their vertical
derivatives are bitwise zero), and a flat extension by one node adds exactly
``g(endpoint) * dt``, so the forward time quotient of a running integral is
exact at a one-step extension.

Catalog entries are scalar-path (dim 1) functionals. The optional vectorized
hooks (``tail_fn`` for ensembles, ``tables_fn`` for all-prefix difference
tables) are used by the Monte Carlo and pathwise-calculus harnesses; both have
generic fallbacks, so user functionals only need ``fn``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .dupire import DupireJet
from .errors import (
    DomainError,
    EvaluationError,
    MissingProviderError,
    UnknownIdError,
)
from .frechet import RieszRepresentation
from .paths import StoppedPath, _unchecked

__all__ = [
    "Functional",
    "DupireJet",
    "check_non_anticipative",
    "register",
    "get_functional",
    "functional_ids",
    "CATALOG_IDS",
]

# The canonical catalog used by tolerance-gated verification.
CATALOG_IDS = (
    "endpoint:square",
    "integral:identity",
    "weighted:linear",
    "product",
    "quadratic-integral",
    "endpoint-time:square",
)


@dataclass(frozen=True)
class Functional:
    """A non-anticipative scalar functional of a stopped path.

    Parameters
    ----------
    name : registry identifier.
    fn : evaluator, StoppedPath -> float.
    smoothness : "C12" when the two endpoint derivatives and the time
        derivative exist and are continuous (catalog entries); "unknown"
        otherwise. Unknown functionals are excluded from tolerance-gated
        acceptance paths.
    jet_fn, riesz_fn : optional closed-form providers.
    tail_fn : optional vectorized evaluator over simulated tails:
        (prefix, tails, tail_dt) -> values, where ``tails[p, j]`` is path p's
        value at time ``prefix.stop_time + j * step`` with step = tail_dt (or
        the base grid step when tail_dt is None), and the result is the
        functional at the tail's last node. A non-None tail_dt lets ensembles
        run on a sub-grid finer than the base grid. Scalar paths only.
    tables_fn : optional all-prefix difference tables:
        (samples, nodes, dt, h) -> (base, up, down, ext), each table indexed by
        prefix node 0..N-1, with the endpoint displaced by +h/-h for up/down
        and the path extended flat one node for ext. Scalar paths only.
    """

    name: str
    fn: Callable[[StoppedPath], float]
    smoothness: Literal["C12", "unknown"] = "unknown"
    jet_fn: Callable[[StoppedPath], DupireJet] | None = None
    riesz_fn: Callable[[StoppedPath], RieszRepresentation] | None = None
    tail_fn: Callable[[StoppedPath, np.ndarray], np.ndarray] | None = field(
        default=None, repr=False
    )
    tables_fn: Callable | None = field(default=None, repr=False)

    def evaluate(self, path: StoppedPath) -> float:
        value = self.fn(path)
        out = float(value)
        if not np.isfinite(out):
            raise EvaluationError(f"functional {self.name!r} produced {out!r}")
        return out

    @property
    def has_analytic_jet(self) -> bool:
        return self.jet_fn is not None

    @property
    def has_analytic_riesz(self) -> bool:
        return self.riesz_fn is not None

    def analytic_dupire_jet(self, path: StoppedPath) -> DupireJet:
        if self.jet_fn is None:
            raise MissingProviderError(f"functional {self.name!r} declares no analytic jet")
        return self.jet_fn(path)

    def analytic_frechet_representation(self, path: StoppedPath) -> RieszRepresentation:
        if self.riesz_fn is None:
            raise MissingProviderError(
                f"functional {self.name!r} declares no analytic representation"
            )
        return self.riesz_fn(path)

    def eval_tail_batch(
        self, prefix: StoppedPath, tails: np.ndarray, tail_dt: float | None = None
    ) -> np.ndarray:
        """Functional value per ensemble row; falls back to a per-path loop."""
        if self.tail_fn is not None:
            return self.tail_fn(prefix, tails, tail_dt)
        return _tail_batch_fallback(self, prefix, tails, tail_dt)

    def prefix_tables(self, samples: np.ndarray, nodes: np.ndarray, dt: float, h: np.ndarray):
        """(base, up, down, ext) tables over every prefix; generic loop fallback."""
        if self.tables_fn is not None:
            return self.tables_fn(samples, nodes, dt, h)
        return _tables_fallback(self, samples, nodes, dt, h)


def check_non_anticipative(f: Functional, path: StoppedPath, seed: int = 0) -> bool:
    """True iff f is bitwise blind to samples past the stop index.

    Rebuilds the path with the frozen tail replaced by noise (deliberately
    violating the flat-tail invariant, which is the point of the probe) and
    compares evaluations exactly.
    """
    reference = f.evaluate(path)
    k = path.stop_index
    n = path.grid.node_count
    if k == n:
        return f.evaluate(path) == reference
    rng = np.random.default_rng(seed)
    tampered = path.samples.copy()
    tampered[k + 1 :] = rng.normal(size=(n - k, path.dim)) * (
        1.0 + np.abs(path.samples[k])
    )
    probe = _unchecked(path.grid, tampered, k, path.bump.copy())
    return f.evaluate(probe) == reference


# -- generic fallbacks -------------------------------------------------------


def _tail_batch_fallback(
    f: Functional, prefix: StoppedPath, tails: np.ndarray, tail_dt: float | None
) -> np.ndarray:
    if prefix.dim != 1:
        raise DomainError("batch tail evaluation is defined for scalar paths")
    if tail_dt is not None and abs(tail_dt - prefix.grid.dt) > 1e-12 * prefix.grid.dt:
        raise DomainError(
            "generic tail evaluation needs the base grid step; "
            f"functional {f.name!r} has no sub-grid evaluator"
        )
    grid = prefix.grid
    k = prefix.stop_index
    m = tails.shape[1] - 1
    if k + m > grid.node_count:
        raise DomainError("tail extends past the horizon")
    out = np.empty(tails.shape[0])
    for row in range(tails.shape[0]):
        samples = prefix.samples.copy()
        samples[k : k + m + 1, 0] = tails[row]
        samples[k + m :] = samples[k + m]
        out[row] = f.evaluate(_unchecked(grid, samples, k + m, np.zeros(prefix.dim)))
    return out


def _tables_fallback(f: Functional, samples: np.ndarray, nodes: np.ndarray, dt: float, h: np.ndarray):
    # Reference implementation: one stopped path per prefix, plain operations.
    from .paths import TimeGrid, horizontal_extend, vertical_bump

    squeeze = samples.ndim == 1
    samples2 = samples[None, :] if squeeze else samples
    h2 = h[None, :] if squeeze else h
    n = samples2.shape[1] - 1
    grid = TimeGrid(float(nodes[-1]), n)
    shape = (samples2.shape[0], n)
    base = np.empty(shape)
    up = np.empty(shape)
    down = np.empty(shape)
    ext = np.empty(shape)
    for row in range(samples2.shape[0]):
        vals = samples2[row][:, None]
        for i in range(n):
            arr = vals.copy()
            arr[i:] = arr[i]
            p = _unchecked(grid, arr, i, np.zeros(1))
            base[row, i] = f.evaluate(p)
            step = h2[row, i]
            up[row, i] = f.evaluate(vertical_bump(p, np.array([step])))
            down[row, i] = f.evaluate(vertical_bump(p, np.array([-step])))
            ext[row, i] = f.evaluate(horizontal_extend(p, grid.time_of(i + 1)))
    if squeeze:
        return base[0], up[0], down[0], ext[0]
    return base, up, down, ext


# -- catalog construction ----------------------------------------------------

# name -> (f, f', f'') on scalars, vectorized.
_SCALAR_FAMILY: dict[str, tuple] = {
    "square": (lambda x: x * x, lambda x: 2.0 * x, lambda x: 2.0 * np.ones_like(x)),
    "linear": (lambda x: x, lambda x: np.ones_like(x), lambda x: np.zeros_like(x)),
    "quartic": (
        lambda x: x ** 4,
        lambda x: 4.0 * x ** 3,
        lambda x: 12.0 * x * x,
    ),
    "sin": (np.sin, np.cos, lambda x: -np.sin(x)),
    "exp": (np.exp, np.exp, np.exp),
}

# name -> time weight w(s), vectorized.
_WEIGHT_FAMILY: dict[str, Callable] = {
    "linear": lambda s: np.asarray(s, dtype=float),
    "one": lambda s: np.ones_like(np.asarray(s, dtype=float)),
}


def _require_scalar(path: StoppedPath) -> None:
    if path.dim != 1:
        raise DomainError("catalog functionals are defined on scalar paths")


def _endpoint_of(path: StoppedPath) -> float:
    return float(path.samples[path.stop_index, 0] + path.bump[0])


def _left_sum(path: StoppedPath, g: Callable) -> float:
    # sum_{i < k} g(x_i) * dt; empty at k = 0.
    k = path.stop_index
    if k == 0:
        return 0.0
    return float(np.sum(g(path.samples[:k, 0])) * path.grid.dt)


def _weighted_left_sum(path: StoppedPath, w: Callable) -> float:
    k = path.stop_index
    if k == 0:
        return 0.0
    nodes = path.grid.nodes[:k]
    return float(np.sum(w(nodes) * path.samples[:k, 0]) * path.grid.dt)


def _zero_weights(k: int) -> np.ndarray:
    return np.zeros((k + 1, 1))


def _cum_left(values: np.ndarray, dt: float) -> np.ndarray:
    # out[..., i] = dt * sum_{j < i} values[..., j], i = 0..N-1 for N inputs.
    out = np.zeros(values.shape)
    np.cumsum(values[..., :-1] * dt, axis=-1, out=out[..., 1:])
    return out


def _endpoint_functional(fname: str) -> Functional:
    g, g1, g2 = _SCALAR_FAMILY[fname]

    def fn(p: StoppedPath) -> float:
        _require_scalar(p)
        return float(g(_endpoint_of(p)))

    def jet(p: StoppedPath) -> DupireJet:
        _require_scalar(p)
        x = _endpoint_of(p)
        return DupireJet(0.0, np.array([float(g1(x))]), np.array([[float(g2(x))]]))

    def riesz(p: StoppedPath) -> RieszRepresentation:
        _require_scalar(p)
        x = _endpoint_of(p)
        return RieszRepresentation(
            p.grid, p.stop_index, _zero_weights(p.stop_index), np.array([float(g1(x))])
        )

    def tail(prefix: StoppedPath, tails: np.ndarray, tail_dt: float | None) -> np.ndarray:
        return g(tails[:, -1])

    def tables(samples, nodes, dt, h):
        e = samples[..., :-1]
        base = g(e)
        return base, g(e + h), g(e - h), base

    return Functional(
        f"endpoint:{fname}", fn, "C12", jet, riesz, tail_fn=tail, tables_fn=tables
    )


def _integral_functional(gname: str) -> Functional:
    g, g1, _ = _SCALAR_FAMILY[gname]

    def fn(p: StoppedPath) -> float:
        _require_scalar(p)
        return _left_sum(p, g)

    def jet(p: StoppedPath) -> DupireJet:
        _require_scalar(p)
        return DupireJet(float(g(_endpoint_of(p))), np.zeros(1), np.zeros((1, 1)))

    def riesz(p: StoppedPath) -> RieszRepresentation:
        _require_scalar(p)
        k = p.stop_index
        w = _zero_weights(k)
        w[:k, 0] = g1(p.samples[:k, 0]) * p.grid.dt
        return RieszRepresentation(p.grid, k, w, np.zeros(1))

    def tail(prefix: StoppedPath, tails: np.ndarray, tail_dt: float | None) -> np.ndarray:
        head = _left_sum(prefix, g)
        step = prefix.grid.dt if tail_dt is None else tail_dt
        return head + np.sum(g(tails[:, :-1]), axis=-1) * step

    def tables(samples, nodes, dt, h):
        ga = g(samples[..., :-1])
        base = _cum_left(ga, dt)
        return base, base, base, base + dt * ga

    return Functional(
        f"integral:{gname}", fn, "C12", jet, riesz, tail_fn=tail, tables_fn=tables
    )


def _weighted_functional(wname: str) -> Functional:
    w = _WEIGHT_FAMILY[wname]

    def fn(p: StoppedPath) -> float:
        _require_scalar(p)
        return _weighted_left_sum(p, w)

    def jet(p: StoppedPath) -> DupireJet:
        _require_scalar(p)
        val = float(w(p.stop_time)) * _endpoint_of(p)
        return DupireJet(val, np.zeros(1), np.zeros((1, 1)))

    def riesz(p: StoppedPath) -> RieszRepresentation:
        _require_scalar(p)
        k = p.stop_index
        wt = _zero_weights(k)
        wt[:k, 0] = w(p.grid.nodes[:k]) * p.grid.dt
        return RieszRepresentation(p.grid, k, wt, np.zeros(1))

    def tail(prefix: StoppedPath, tails: np.ndarray, tail_dt: float | None) -> np.ndarray:
        head = _weighted_left_sum(prefix, w)
        k = prefix.stop_index
        m = tails.shape[1] - 1
        if tail_dt is None:
            step = prefix.grid.dt
            times = prefix.grid.nodes[k : k + m]
        else:
            step = tail_dt
            times = prefix.stop_time + np.arange(m) * tail_dt
        return head + np.sum(w(times)[None, :] * tails[:, :-1], axis=-1) * step

    def tables(samples, nodes, dt, h):
        wa = w(nodes[:-1]) * samples[..., :-1]
        base = _cum_left(wa, dt)
        return base, base, base, base + dt * wa

    return Functional(
        f"weighted:{wname}", fn, "C12", jet, riesz, tail_fn=tail, tables_fn=tables
    )


def _product_functional() -> Functional:
    def fn(p: StoppedPath) -> float:
        _require_scalar(p)
        return _endpoint_of(p) * _left_sum(p, lambda x: x)

    def jet(p: StoppedPath) -> DupireJet:
        _require_scalar(p)
        e = _endpoint_of(p)
        integral = _left_sum(p, lambda x: x)
        return DupireJet(e * e, np.array([integral]), np.zeros((1, 1)))

    def riesz(p: StoppedPath) -> RieszRepresentation:
        _require_scalar(p)
        k = p.stop_index
        wt = _zero_weights(k)
        wt[:k, 0] = _endpoint_of(p) * p.grid.dt
        return RieszRepresentation(
            p.grid, k, wt, np.array([_left_sum(p, lambda x: x)])
        )

    def tail(prefix: StoppedPath, tails: np.ndarray, tail_dt: float | None) -> np.ndarray:
        head = _left_sum(prefix, lambda x: x)
        step = prefix.grid.dt if tail_dt is None else tail_dt
        integral = head + np.sum(tails[:, :-1], axis=-1) * step
        return tails[:, -1] * integral

    def tables(samples, nodes, dt, h):
        e = samples[..., :-1]
        cum = _cum_left(e, dt)
        base = e * cum
        return base, (e + h) * cum, (e - h) * cum, e * (cum + dt * e)

    return Functional("product", fn, "C12", jet, riesz, tail_fn=tail, tables_fn=tables)


def _quadratic_integral_functional(wname: str, name: str) -> Functional:
    w = _WEIGHT_FAMILY[wname]

    def fn(p: StoppedPath) -> float:
        _require_scalar(p)
        v = _weighted_left_sum(p, w)
        return v * v

    def jet(p: StoppedPath) -> DupireJet:
        _require_scalar(p)
        v = _weighted_left_sum(p, w)
        dt_val = 2.0 * float(w(p.stop_time)) * _endpoint_of(p) * v
        return DupireJet(dt_val, np.zeros(1), np.zeros((1, 1)))

    def riesz(p: StoppedPath) -> RieszRepresentation:
        _require_scalar(p)
        k = p.stop_index
        v = _weighted_left_sum(p, w)
        wt = _zero_weights(k)
        wt[:k, 0] = 2.0 * v * w(p.grid.nodes[:k]) * p.grid.dt
        return RieszRepresentation(p.grid, k, wt, np.zeros(1))

    def tail(prefix: StoppedPath, tails: np.ndarray, tail_dt: float | None) -> np.ndarray:
        head = _weighted_left_sum(prefix, w)
        k = prefix.stop_index
        m = tails.shape[1] - 1
        if tail_dt is None:
            step = prefix.grid.dt
            times = prefix.grid.nodes[k : k + m]
        else:
            step = tail_dt
            times = prefix.stop_time + np.arange(m) * tail_dt
        v = head + np.sum(w(times)[None, :] * tails[:, :-1], axis=-1) * step
        return v * v

    def tables(samples, nodes, dt, h):
        wa = w(nodes[:-1]) * samples[..., :-1]
        cum = _cum_left(wa, dt)
        base = cum * cum
        ext = cum + dt * wa
        return base, base, base, ext * ext

    return Functional(name, fn, "C12", jet, riesz, tail_fn=tail, tables_fn=tables)


def _endpoint_time_functional(fname: str) -> Functional:
    g, g1, g2 = _SCALAR_FAMILY[fname]

    def fn(p: StoppedPath) -> float:
        _require_scalar(p)
        return p.stop_time * float(g(_endpoint_of(p)))

    def jet(p: StoppedPath) -> DupireJet:
        _require_scalar(p)
        x = _endpoint_of(p)
        t = p.stop_time
        return DupireJet(
            float(g(x)), np.array([t * float(g1(x))]), np.array([[t * float(g2(x))]])
        )

    def riesz(p: StoppedPath) -> RieszRepresentation:
        _require_scalar(p)
        x = _endpoint_of(p)
        return RieszRepresentation(
            p.grid,
            p.stop_index,
            _zero_weights(p.stop_index),
            np.array([p.stop_time * float(g1(x))]),
        )

    def tail(prefix: StoppedPath, tails: np.ndarray, tail_dt: float | None) -> np.ndarray:
        m = tails.shape[1] - 1
        if tail_dt is None:
            t_end = prefix.grid.time_of(prefix.stop_index + m)
        else:
            t_end = prefix.stop_time + m * tail_dt
        return t_end * g(tails[:, -1])

    def tables(samples, nodes, dt, h):
        e = samples[..., :-1]
        t_now = nodes[:-1]
        t_next = nodes[1:]
        base_g = g(e)
        return t_now * base_g, t_now * g(e + h), t_now * g(e - h), t_next * base_g

    return Functional(
        f"endpoint-time:{fname}", fn, "C12", jet, riesz, tail_fn=tail, tables_fn=tables
    )


def _cubed_integral_functional() -> Functional:
    def fn(p: StoppedPath) -> float:
        _require_scalar(p)
        return _left_sum(p, lambda x: x) ** 3

    def jet(p: StoppedPath) -> DupireJet:
        _require_scalar(p)
        v = _left_sum(p, lambda x: x)
        return DupireJet(3.0 * v * v * _endpoint_of(p), np.zeros(1), np.zeros((1, 1)))

    def riesz(p: StoppedPath) -> RieszRepresentation:
        _require_scalar(p)
        k = p.stop_index
        v = _left_sum(p, lambda x: x)
        wt = _zero_weights(k)
        wt[:k, 0] = 3.0 * v * v * p.grid.dt
        return RieszRepresentation(p.grid, k, wt, np.zeros(1))

    def tail(prefix: StoppedPath, tails: np.ndarray, tail_dt: float | None) -> np.ndarray:
        head = _left_sum(prefix, lambda x: x)
        step = prefix.grid.dt if tail_dt is None else tail_dt
        v = head + np.sum(tails[:, :-1], axis=-1) * step
        return v ** 3

    def tables(samples, nodes, dt, h):
        e = samples[..., :-1]
        cum = _cum_left(e, dt)
        base = cum ** 3
        return base, base, base, (cum + dt * e) ** 3

    return Functional("cubed-integral", fn, "C12", jet, riesz, tail_fn=tail, tables_fn=tables)


_REGISTRY: dict[str, Functional] = {}


def register(functional: Functional) -> Functional:
    if functional.name in _REGISTRY:
        raise DomainError(f"functional {functional.name!r} is already registered")
    _REGISTRY[functional.name] = functional
    return functional


def get_functional(name: str) -> Functional:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownIdError("functional", name, list(_REGISTRY)) from None


def functional_ids() -> list[str]:
    return sorted(_REGISTRY)


def _register_catalog() -> None:
    for fname in ("square", "linear", "quartic", "sin", "exp"):
        register(_endpoint_functional(fname))
    # "identity" aliases "linear" as an integrand name.
    _SCALAR_FAMILY["identity"] = _SCALAR_FAMILY["linear"]
    register(_integral_functional("identity"))
    register(_integral_functional("square"))
    register(_weighted_functional("linear"))
    register(_weighted_functional("one"))
    register(_product_functional())
    register(_quadratic_integral_functional("one", "quadratic-integral"))
    register(_quadratic_integral_functional("linear", "quadratic-integral:linear"))
    register(_endpoint_time_functional("square"))
    register(_cubed_integral_functional())


_register_catalog()
