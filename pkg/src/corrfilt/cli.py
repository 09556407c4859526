"""Command-line front end.

Subcommands:

``run``     execute an experiment config, writing curves.csv, summary.json
            and manifest.json into the output directory
``theory``  print the closed-form predictor report for a config as JSON
``sweep``   run one ensemble per grid value of theta or lambda, writing
            sweep.csv and sweep_summary.json

Exit codes: 0 success, 2 configuration error, 3 numerical fault.  Config
files are JSON with sections system / input / noise / algorithms / run and
the optional theory_overlay flag and theory block.  Re-running the config
embedded in a manifest reproduces the numeric columns byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import noise as _noise
from . import simlab as _simlab
from . import theory as _theory
from .filters import NumericalFault

_FLOAT_FMT = ".17g"  # round-trip exact for 64-bit floats


class ConfigError(ValueError):
    """A configuration file is missing or malformed; the message names the
    offending field."""


# ---------------------------------------------------------------------------
# config parsing

def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"{context}.{key}: required field is missing"
                          if context else f"{key}: required section is missing")
    return mapping[key]


def _parse_system(raw: dict) -> _simlab.SystemModel:
    kind = _require(raw, "kind", "system")
    if kind == "static":
        return _simlab.StaticSystem(tuple(_static_weights(raw, "system")))
    if kind == "random_walk":
        var = _require(raw, "increment_variance", "system")
        return _simlab.RandomWalkSystem(tuple(_static_weights(raw, "system")),
                                        float(var))
    if kind == "staged":
        order = int(_require(raw, "order", "system"))
        stages = []
        for i, entry in enumerate(_require(raw, "stages", "system")):
            ctx = f"system.stages[{i}]"
            start = int(_require(entry, "start", ctx))
            if "weights" in entry:
                stages.append(_simlab.Stage(start=start,
                                            weights=tuple(entry["weights"])))
            elif "active_taps" in entry:
                stages.append(_simlab.Stage(start=start,
                                            active_taps=int(entry["active_taps"])))
            else:
                raise ConfigError(f"{ctx}: needs weights or active_taps")
        try:
            return _simlab.StagedSystem(order=order, stages=tuple(stages))
        except ValueError as exc:
            raise ConfigError(f"system.stages: {exc}") from exc
    raise ConfigError(f"system.kind: unknown kind '{kind}'")


def _static_weights(raw: dict, context: str) -> list[float]:
    if "weights" in raw:
        return [float(v) for v in raw["weights"]]
    if "sparse_taps" in raw:
        order = int(_require(raw, "order", context))
        w = [0.0] * order
        for idx, value in raw["sparse_taps"].items():
            i = int(idx)
            if not 0 <= i < order:
                raise ConfigError(f"{context}.sparse_taps: index {i} outside "
                                  f"[0, {order})")
            w[i] = float(value)
        return w
    raise ConfigError(f"{context}.weights: required field is missing")


def _parse_noise(raw: dict) -> _noise.NoiseModel:
    kind = _require(raw, "kind", "noise")
    try:
        if kind == "gaussian":
            return _noise.Gaussian(float(_require(raw, "variance", "noise")))
        if kind == "mixed_gaussian":
            return _noise.MixedGaussian(
                float(_require(raw, "p1", "noise")),
                float(_require(raw, "var1", "noise")),
                float(_require(raw, "p2", "noise")),
                float(_require(raw, "var2", "noise")))
        if kind == "uniform":
            return _noise.Uniform(float(_require(raw, "half_width", "noise")))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"noise: {exc}") from exc
    raise ConfigError(f"noise.kind: unknown kind '{kind}'")


def parse_config(raw: dict) -> _simlab.ExperimentConfig:
    """Validate a raw config mapping into an ExperimentConfig."""
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]  # accept a manifest for exact re-runs
    system = _parse_system(_require(raw, "system", ""))
    input_block = _require(raw, "input", "")
    sigma_x2 = float(_require(input_block, "variance", "input"))
    noise_model = _parse_noise(_require(raw, "noise", ""))
    algo_block = _require(raw, "algorithms", "")
    if not isinstance(algo_block, list) or not algo_block:
        raise ConfigError("algorithms: must be a non-empty list")
    algorithms = []
    for i, entry in enumerate(algo_block):
        ctx = f"algorithms[{i}]"
        name = _require(entry, "name", ctx)
        label = entry.get("label")
        params = {k: v for k, v in entry.items()
                  if k not in ("name", "label")}
        try:
            _simlab.resolve_params(name, params)
        except ValueError as exc:
            raise ConfigError(f"{ctx}: {exc}") from exc
        algorithms.append(_simlab.AlgorithmSpec(name=name, params=params,
                                                label=label))
    run_block = _require(raw, "run", "")
    try:
        return _simlab.ExperimentConfig(
            system=system,
            input_variance=sigma_x2,
            noise=noise_model,
            algorithms=tuple(algorithms),
            iterations=int(_require(run_block, "iterations", "run")),
            trials=int(_require(run_block, "trials", "run")),
            seed=int(_require(run_block, "seed", "run")),
            steady_window_fraction=float(
                run_block.get("steady_window_fraction", 0.1)),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> tuple[_simlab.ExperimentConfig, dict]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config: file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON: {exc}") from exc
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]
    return parse_config(raw), raw


# ---------------------------------------------------------------------------
# theory report helpers

def _finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _db(value: float) -> float:
    return 10.0 * math.log10(max(value, _simlab.DB_FLOOR))


def _theory_entry(config: _simlab.ExperimentConfig, raw: dict,
                  spec: _simlab.AlgorithmSpec) -> dict:
    entry = {"label": spec.effective_label, "algorithm": spec.name}
    if spec.name == "cprmcc":
        return _combined_entry(config, spec, entry)
    try:
        inputs = _simlab.theory_inputs_for(config, spec.name, spec.params)
    except ValueError as exc:
        entry.update(status="unsupported", reason=str(exc))
        return entry
    notes: list[str] = []
    import warnings as _warnings
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always", _theory.TaylorValidityWarning)
        try:
            entry["stability_bound_theta"] = _finite_or_none(
                _theory.stability_bound_theta(inputs))
            stationary = _theory.msd_stationary(inputs)
            entry["msd_stationary"] = stationary.total
            entry["msd_stationary_db"] = _db(stationary.total)
            if inputs.sigma_q2 > 0.0:
                tracking = _theory.msd_tracking(inputs)
                entry["msd_tracking"] = tracking.total
                entry["msd_tracking_db"] = _db(tracking.total)
                opt = _theory.optimal_parameters(inputs)
                entry["theta_opt"] = opt.theta_opt
                entry["lambda_opt"] = opt.lambda_opt
                entry["lambda_opt_in_range"] = opt.lambda_opt_in_range
            target = raw.get("theory", {}).get("target_error")
            if target is not None:
                entry["iterations_to_steady_state"] = \
                    _theory.iterations_to_steady_state(
                        dataclasses.replace(inputs, c=float(target)))
            entry["status"] = "ok"
        except _theory.InvalidRegimeError as exc:
            entry["status"] = "invalid_regime"
            entry["reason"] = str(exc)
        for w in caught:
            if issubclass(w.category, _theory.TaylorValidityWarning):
                notes.append(str(w.message))
    entry["taylor_warnings"] = sorted(set(notes))
    return entry


def _combined_entry(config: _simlab.ExperimentConfig,
                    spec: _simlab.AlgorithmSpec, entry: dict) -> dict:
    p = _simlab.resolve_params(spec.name, spec.params)
    base = {k: v for k, v in p.items()
            if k in ("lambda", "sigma", "theta1", "alpha", "epsilon")}
    base["theta"] = base.pop("theta1")
    try:
        inputs = _simlab.theory_inputs_for(config, "prmcc", base)
    except ValueError as exc:
        entry.update(status="unsupported", reason=str(exc))
        return entry
    entry["theta_12"] = p["theta1"] * p["theta2"] / (p["theta1"] + p["theta2"])
    import warnings as _warnings
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always", _theory.TaylorValidityWarning)
        try:
            res = _theory.combined_msd(inputs, p["theta1"], p["theta2"],
                                       b_plus=p["b_plus"])
            entry.update(status="ok", case=res.case, rho_inf=res.rho_inf,
                         msd=res.msd, msd_db=_db(res.msd),
                         msd_component_1=res.msd1, msd_component_2=res.msd2,
                         msd_cross=res.msd12)
        except _theory.InvalidRegimeError as exc:
            entry.update(status="invalid_regime", reason=str(exc))
        notes = sorted({str(w.message) for w in caught
                        if issubclass(w.category,
                                      _theory.TaylorValidityWarning)})
    entry["taylor_warnings"] = notes
    return entry


def theory_report(config: _simlab.ExperimentConfig, raw: dict) -> dict:
    try:
        moments = config.noise.moments()
        noise_block = {"m2": moments.m2, "m4": moments.m4, "m6": moments.m6}
    except ValueError:
        noise_block = None
    return {
        "version": __version__,
        "noise_moments": noise_block,
        "algorithms": [_theory_entry(config, raw, spec)
                       for spec in config.algorithms],
    }


# ---------------------------------------------------------------------------
# artifact writers

def _fmt(value: float) -> str:
    return format(float(value), _FLOAT_FMT)


def _write_curves(path: Path, curve: _simlab.LearningCurve):
    header = ["iteration"]
    columns = []
    for label in curve.labels:
        header.append(f"{label}_msd_db")
        columns.append(curve.msd_db(label))
        if label in curve.rho:
            header.append(f"{label}_rho")
            columns.append(curve.rho[label])
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(curve.iterations):
            row = [str(i)] + [_fmt(col[i]) for col in columns]
            fh.write(",".join(row) + "\n")


def _summary(curve: _simlab.LearningCurve,
             config: _simlab.ExperimentConfig, raw: dict,
             overlay: bool) -> dict:
    body = {
        "version": __version__,
        "iterations": curve.iterations,
        "trials": config.trials,
        "steady_window": curve.steady_window,
        "algorithms": {
            label: {
                "steady_state_msd": curve.steady_state[label],
                "steady_state_msd_db": curve.steady_state_db(label),
            } for label in curve.labels
        },
        "theory": theory_report(config, raw) if overlay else None,
    }
    return body


def _manifest(config_raw: dict, config: _simlab.ExperimentConfig,
              outputs: dict[str, str]) -> dict:
    canonical = json.dumps(config_raw, sort_keys=True,
                           separators=(",", ":")).encode()
    algorithms = []
    for spec in config.algorithms:
        algorithms.append({
            "name": spec.name,
            "label": spec.effective_label,
            "params": _simlab.resolve_params(spec.name, spec.params),
        })
    return {
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seed": config.seed,
        "config_sha256": hashlib.sha256(canonical).hexdigest(),
        "config": config_raw,
        "algorithms": algorithms,
        "outputs": outputs,
    }


def _apply_seed_override(raw: dict, config: _simlab.ExperimentConfig,
                         seed_override: int | None):
    if seed_override is None:
        return raw, config
    raw = json.loads(json.dumps(raw))
    raw.setdefault("run", {})["seed"] = int(seed_override)
    return raw, dataclasses.replace(config, seed=int(seed_override))


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(args) -> int:
    config, raw = load_config(args.config)
    raw, config = _apply_seed_override(raw, config, args.seed_override)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curve = _simlab.run_ensemble(config, workers=args.workers)
    overlay = bool(raw.get("theory_overlay", False) or args.theory_overlay)
    _write_curves(out / "curves.csv", curve)
    (out / "summary.json").write_text(
        json.dumps(_summary(curve, config, raw, overlay), indent=2) + "\n")
    outputs = {"curves": "curves.csv", "summary": "summary.json",
               "manifest": "manifest.json"}
    (out / "manifest.json").write_text(
        json.dumps(_manifest(raw, config, outputs), indent=2) + "\n")
    print(f"wrote {out / 'curves.csv'}, summary.json, manifest.json")
    return 0


def cmd_theory(args) -> int:
    config, raw = load_config(args.config)
    report = theory_report(config, raw)
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_sweep(args) -> int:
    config, raw = load_config(args.config)
    raw, config = _apply_seed_override(raw, config, args.seed_override)
    try:
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = _simlab.sweep(config, args.param, grid, workers=args.workers)
    except ValueError as exc:
        if isinstance(exc, (_theory.InvalidRegimeError, NumericalFault)):
            raise
        raise ConfigError(str(exc)) from exc
    with (out / "sweep.csv").open("w") as fh:
        fh.write(f"{result.parameter},msd_db,theory_msd_db\n")
        for p in result.points:
            fh.write(f"{_fmt(p.value)},{_fmt(p.msd_db)},"
                     f"{_fmt(p.theory_msd_db)}\n")
    def clean(point):
        body = dataclasses.asdict(point)
        return {k: (None if isinstance(v, float) and not math.isfinite(v)
                    else v) for k, v in body.items()}

    summary = {
        "version": __version__,
        "parameter": result.parameter,
        "empirical_argmin": result.empirical_argmin,
        "theory_optimum": result.theory_optimum,
        "points": [clean(p) for p in result.points],
    }
    (out / "sweep_summary.json").write_text(json.dumps(summary, indent=2)
                                            + "\n")
    print(f"wrote {out / 'sweep.csv'}, sweep_summary.json")
    return 0


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrfilt",
        description="Robust sparse adaptive filtering experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True, help="experiment config "
                       "JSON (or a manifest.json for an exact re-run)")
        if needs_out:
            p.add_argument("--out", required=True,
                           help="output directory for artifacts")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel trial workers (default 1)")
        p.add_argument("--seed-override", type=int, default=None,
                       help="replace the config seed")

    run_p = sub.add_parser("run", help="run an experiment ensemble")
    common(run_p)
    run_p.add_argument("--theory-overlay", action="store_true",
                       help="include closed-form predictions in summary.json")
    run_p.set_defaults(fn=cmd_run)

    theory_p = sub.add_parser("theory", help="print predictor report as JSON")
    theory_p.add_argument("--config", required=True)
    theory_p.set_defaults(fn=cmd_theory)

    sweep_p = sub.add_parser("sweep", help="sweep theta or lambda")
    common(sweep_p)
    sweep_p.add_argument("--param", required=True,
                         choices=list(_simlab.SWEEPABLE))
    sweep_p.add_argument("--grid", required=True,
                         help="comma-separated parameter values")
    sweep_p.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFault as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
