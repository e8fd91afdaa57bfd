"""Command line interface.

Subcommands: ``derive`` (endpoint jet of a functional on a stored path),
``frechet`` (nodal weights and atom of the first variation), ``sfde-sim``
(ensemble simulation to CSV), ``verify-ito`` / ``verify-generator`` /
``coherence`` (the three check harnesses, each writing a CSV table and a JSON
summary with a pass flag), and ``accept`` (the manifest-driven gate).

Exit codes: 0 when the command and its pass condition succeed, 1 when a
check fails its tolerance or a computation diverges, 2 on usage errors such
as unknown ids, bad flags, or unreadable inputs.

Every option may also come from a flat ``key=value`` config file given with
``--config``; explicit flags override config values. Keys match the long
option names with either dashes or underscores. Commands that consume
randomness require an explicit ``--seed``; there is no wall-clock default.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acceptance import format_result, load_manifest, run_acceptance
from .dupire import FdConfig, numerical_dupire_jet
from .errors import (
    CausalityError,
    DomainError,
    EvaluationError,
    NonConvergenceError,
    PathcalcError,
    UnknownIdError,
)
from .frechet import RampFamily, directional_derivative, estimate_riesz_measure, ramp_direction
from .functionals import get_functional
from .models import get_model
from .paths import StoppedPath, TimeGrid, load_path_csv, stop_at
from .reports import emit_report, format_float, json_text, report_json_payload
from .rng import NoisePlan
from .sfde import simulate_ensemble
from .verify import (
    coherence_report,
    generator_lhs,
    generator_rhs_dupire,
    ito_convergence_study,
)

__all__ = ["main", "run"]


# -- option plumbing -----------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _qv_mode(text: str) -> str:
    if text not in ("realized", "dt"):
        raise DomainError(f"qv-mode must be 'realized' or 'dt', got {text!r}")
    return text


@dataclass(frozen=True)
class _Opt:
    name: str
    conv: type | object
    required: bool = False
    default: object = None
    help: str = ""

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


def _read_config(path: str, known: set[str]) -> dict[str, str]:
    values: dict[str, str] = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        key, sep, val = s.partition("=")
        if not sep:
            raise DomainError(f"{path}:{ln}: expected key=value, got {s!r}")
        key = key.strip().replace("-", "_")
        if key not in known:
            raise DomainError(f"{path}:{ln}: unknown config key {key!r}")
        values[key] = val.strip()
    return values


def _merge(table: tuple[_Opt, ...], args: argparse.Namespace) -> dict:
    config = {}
    if getattr(args, "config", None):
        config = _read_config(args.config, {o.name for o in table})
    merged = {}
    for opt in table:
        raw = getattr(args, opt.name)
        if raw is None:
            raw = config.get(opt.name)
        if raw is None:
            if opt.required:
                raise DomainError(
                    f"missing required option {opt.flag} (or config key {opt.name})"
                )
            merged[opt.name] = opt.default
        else:
            merged[opt.name] = opt.conv(raw)
    return merged


def _load_stopped(path_file: str, t: float | None) -> StoppedPath:
    p = load_path_csv(path_file)
    if t is not None:
        p = stop_at(p, t)
    return p


def _out_dir(merged: dict) -> Path:
    out = Path(merged.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_summary(out: Path, stem: str, report, extra: dict) -> None:
    emit_report(report, "csv", out / f"{stem}.csv")
    (out / f"{stem}.json").write_text(
        json_text(report_json_payload(report, extra)), encoding="utf-8"
    )


# -- subcommands ---------------------------------------------------------------

_DERIVE_OPTS = (
    _Opt("functional", str, required=True, help="catalog or registered functional id"),
    _Opt("path", str, required=True, help="CSV file with time,value rows"),
    _Opt("t", float, help="re-stop the path at this time before differentiating"),
    _Opt("h", float, help="endpoint bump size (default scales with the path)"),
    _Opt("eps", float, help="forward extension span (default one grid step)"),
    _Opt("richardson", int, default=1, help="extrapolation levels, 1..3"),
    _Opt("out", str, help="directory for derive.json (also printed)"),
)


def _cmd_derive(args: argparse.Namespace) -> int:
    o = _merge(_DERIVE_OPTS, args)
    f = get_functional(o["functional"])
    p = _load_stopped(o["path"], o["t"])
    cfg = FdConfig(
        h_vertical=o["h"], eps_horizontal=o["eps"], richardson_levels=o["richardson"]
    )
    jet = numerical_dupire_jet(f, p, cfg)
    text = json_text({"dt": jet.dt, "dx": jet.dx, "dxx": jet.dxx})
    sys.stdout.write(text)
    if o["out"]:
        (_out_dir(o) / "derive.json").write_text(text, encoding="utf-8")
    return 0


_FRECHET_OPTS = (
    _Opt("functional", str, required=True),
    _Opt("path", str, required=True),
    _Opt("t", float),
    _Opt("h", float, help="directional difference step"),
    _Opt("ramps", _int_list, help="ramp resolutions, e.g. 8,16,32,64"),
    _Opt("out", str),
)


def _cmd_frechet(args: argparse.Namespace) -> int:
    o = _merge(_FRECHET_OPTS, args)
    f = get_functional(o["functional"])
    p = _load_stopped(o["path"], o["t"])
    ramps = RampFamily(tuple(o["ramps"])) if o["ramps"] else RampFamily()
    rep = estimate_riesz_measure(f, p, h=o["h"], ramps=ramps)
    traces = []
    for coord in range(p.dim):
        upsilon = np.zeros(p.dim)
        upsilon[coord] = 1.0
        traces.append(
            [
                directional_derivative(
                    f, p, ramp_direction(p.grid, p.stop_index, k, upsilon), h=o["h"]
                )
                for k in ramps.k_values
            ]
        )
    scalar = p.dim == 1
    payload = {
        "weights": rep.weights[:, 0] if scalar else rep.weights,
        "atom": rep.atom,
        "ramp_trace": traces[0] if scalar else traces,
    }
    text = json_text(payload)
    sys.stdout.write(text)
    if o["out"]:
        (_out_dir(o) / "frechet.json").write_text(text, encoding="utf-8")
    return 0


_SIM_OPTS = (
    _Opt("model", str, required=True),
    _Opt("t0", float, default=0.0, help="start time of the simulated segment"),
    _Opt("until", float, required=True, help="terminal time (also the grid horizon)"),
    _Opt("n", int, required=True, help="grid steps over [0, until]"),
    _Opt("paths", int, required=True),
    _Opt("seed", int, required=True),
    _Opt("x0", float, default=0.0, help="constant initial segment value"),
    _Opt("out", str, required=True, help="destination CSV file"),
)


def _cmd_sfde_sim(args: argparse.Namespace) -> int:
    o = _merge(_SIM_OPTS, args)
    model = get_model(o["model"])
    grid = TimeGrid(o["until"], o["n"])
    k0 = grid.index_of(o["t0"])
    init = StoppedPath.constant(grid, np.full(model.dim, o["x0"]), stop_index=k0)
    vals = simulate_ensemble(model, init, o["paths"], NoisePlan(o["seed"]))
    times = grid.nodes[k0:]
    header = ["time"]
    for pi in range(o["paths"]):
        if model.dim == 1:
            header.append(f"path{pi}")
        else:
            header.extend(f"path{pi}_c{c}" for c in range(model.dim))
    lines = [",".join(header)]
    flat = vals.reshape(vals.shape[0], vals.shape[1], -1)
    for row, t in enumerate(times):
        cells = [format_float(float(t))]
        for pi in range(o["paths"]):
            cells.extend(format_float(float(x)) for x in flat[pi, row])
        lines.append(",".join(cells))
    dest = Path(o["out"])
    if dest.parent != Path(""):
        dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


_VERIFY_ITO_OPTS = (
    _Opt("functional", str, required=True),
    _Opt("model", str, required=True),
    _Opt("resolutions", _int_list, required=True, help="e.g. 256,1024,4096"),
    _Opt("paths", int, default=1000),
    _Opt("seed", int, required=True),
    _Opt("horizon", float, default=1.0),
    _Opt("x0", float, default=0.0),
    _Opt("qv_mode", _qv_mode, default="dt"),
    _Opt("order_range", _float_list, default=[0.4, 0.6]),
    _Opt("out", str),
)


def _cmd_verify_ito(args: argparse.Namespace) -> int:
    o = _merge(_VERIFY_ITO_OPTS, args)
    rep = ito_convergence_study(
        get_functional(o["functional"]),
        get_model(o["model"]),
        o["resolutions"],
        NoisePlan(o["seed"]),
        n_paths=o["paths"],
        horizon=o["horizon"],
        initial_value=o["x0"],
        qv_mode=o["qv_mode"],
    )
    lo, hi = o["order_range"]
    passed = bool(lo <= rep.fitted_order <= hi)
    _write_summary(_out_dir(o), "verify-ito", rep, {"pass": passed})
    print(f"fitted order {rep.fitted_order:.4f}, target [{lo}, {hi}]: "
          f"{'pass' if passed else 'FAIL'}")
    return 0 if passed else 1


_VERIFY_GEN_OPTS = (
    _Opt("functional", str, required=True),
    _Opt("model", str, required=True),
    _Opt("n", int, default=256, help="base grid steps"),
    _Opt("horizon", float, default=1.0),
    _Opt("t", float, default=0.5, help="stop time of the initial segment"),
    _Opt("x0", float, default=0.3, help="constant initial segment value"),
    _Opt("epsilons", _float_list, default=[0.0625, 0.03125, 0.015625, 0.0078125]),
    _Opt("steps_per_eps", int, default=16),
    _Opt("paths", int, default=100_000),
    _Opt("seed", int, required=True),
    _Opt("det_tol", float, default=1e-6, help="intercept gap bound, noise-free models"),
    _Opt("stderr_multiple", float, default=3.0),
    _Opt("out", str),
)


def _cmd_verify_generator(args: argparse.Namespace) -> int:
    o = _merge(_VERIFY_GEN_OPTS, args)
    f = get_functional(o["functional"])
    model = get_model(o["model"])
    grid = TimeGrid(o["horizon"], o["n"])
    init = StoppedPath.constant(
        grid, np.full(model.dim, o["x0"]), stop_index=grid.index_of(o["t"])
    )
    reference = generator_rhs_dupire(f, model, init)
    rep = generator_lhs(
        f,
        model,
        init,
        o["epsilons"],
        NoisePlan(o["seed"]),
        n_paths=o["paths"],
        steps_per_eps=o["steps_per_eps"],
        reference=reference,
    )
    gap = abs(rep.intercept - reference)
    if model.noise_free:
        passed = gap <= o["det_tol"]
        verdict = f"gap {gap:.2e} against bound {o['det_tol']:.1e}"
    else:
        band = o["stderr_multiple"] * rep.intercept_stderr
        passed = gap <= band
        verdict = f"gap {gap:.2e} against {o['stderr_multiple']:g} stderr = {band:.2e}"
    _write_summary(
        _out_dir(o), "verify-generator", rep, {"reference": reference, "pass": passed}
    )
    print(f"intercept {rep.intercept:.6g}, endpoint-jet assembly {reference:.6g}; "
          f"{verdict}: {'pass' if passed else 'FAIL'}")
    return 0 if passed else 1


_COHERENCE_OPTS = (
    _Opt("functional", str, required=True),
    _Opt("path", str, required=True),
    _Opt("t", float),
    _Opt("ramps", _int_list),
    _Opt("tol", float, default=1e-3),
    _Opt("out", str),
)


def _cmd_coherence(args: argparse.Namespace) -> int:
    o = _merge(_COHERENCE_OPTS, args)
    f = get_functional(o["functional"])
    p = _load_stopped(o["path"], o["t"])
    ramps = RampFamily(tuple(o["ramps"])) if o["ramps"] else None
    rep = coherence_report(f, p, ramps=ramps)
    passed = rep.max_abs_gap <= o["tol"]
    _write_summary(_out_dir(o), "coherence", rep, {"pass": passed})
    print(f"max_abs_gap {rep.max_abs_gap:.2e} against {o['tol']:.1e}: "
          f"{'pass' if passed else 'FAIL'}")
    return 0 if passed else 1


_ACCEPT_OPTS = (
    _Opt("manifest", str, help="TOML manifest (default: the packaged one)"),
    _Opt("out", str),
)


def _cmd_accept(args: argparse.Namespace) -> int:
    o = _merge(_ACCEPT_OPTS, args)
    man = load_manifest(o["manifest"])
    results = run_acceptance(man)
    for r in results:
        print(format_result(r))
    all_pass = all(r.passed for r in results)
    print(f"acceptance: {sum(r.passed for r in results)}/{len(results)} criteria pass")
    if o["out"]:
        payload = {
            "pass": all_pass,
            "criteria": [
                {
                    "index": r.index,
                    "name": r.name,
                    "passed": r.passed,
                    "detail": r.detail,
                    "elapsed": r.elapsed,
                }
                for r in results
            ],
        }
        (_out_dir(o) / "acceptance.json").write_text(json_text(payload), encoding="utf-8")
    return 0 if all_pass else 1


# -- parser and entry point ----------------------------------------------------

_COMMANDS = (
    ("derive", _cmd_derive, _DERIVE_OPTS, "endpoint jet of a functional on a path"),
    ("frechet", _cmd_frechet, _FRECHET_OPTS, "nodal weights and stop-time atom"),
    ("sfde-sim", _cmd_sfde_sim, _SIM_OPTS, "simulate an ensemble to CSV"),
    ("verify-ito", _cmd_verify_ito, _VERIFY_ITO_OPTS, "change-of-variable residual study"),
    ("verify-generator", _cmd_verify_generator, _VERIFY_GEN_OPTS,
     "quotient limit against the endpoint-jet assembly"),
    ("coherence", _cmd_coherence, _COHERENCE_OPTS, "measure atoms against endpoint derivatives"),
    ("accept", _cmd_accept, _ACCEPT_OPTS, "run the acceptance manifest"),
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathcalc", description="path-functional calculus toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, table, blurb in _COMMANDS:
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", default=None, help="flat key=value option file")
        for opt in table:
            p.add_argument(opt.flag, dest=opt.name, default=None, help=opt.help)
        p.set_defaults(run=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except UnknownIdError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except (EvaluationError, NonConvergenceError, CausalityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PathcalcError as exc:
        # Anything else from the package is a usage problem: bad grids,
        # out-of-range times, malformed options.
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
