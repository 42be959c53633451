"""Command-line front end: configure runs, execute, emit machine-readable results.

Every invocation writes a results CSV plus a metadata sidecar
(``<out>.csv`` and ``<out>.meta.json``).  The CSV is byte-reproducible for a
fixed config and seed; the only timestamp lives in the metadata file.  Run
configs come from a YAML file (--config) with flags taking precedence.

Exit codes: 0 success, 2 configuration error, 3 overflow/abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .estimators import SensitivityEstimate, estimate_ergodic, estimate_finite_time
from .integrator import PathOverflowError, euler_step, orbit_observable_averages
from .model import ModelValidationError
from .models import MODEL_BUILDERS, build_model, build_observable
from .oracles import FdOracleConfig, fd_derivative_ergodic, fd_derivative_finite_time, top_lyapunov
from .rng import SequentialPathRng
from .schedules import ScheduleError, parse_schedule

CSV_COLUMNS = ("gamma", "phi_avg", "se_phi", "dphi", "se_dphi", "n_samples", "overflow_count")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OVERFLOW = 3


class ConfigError(ValueError):
    """The run configuration is invalid; nothing was computed."""


@dataclasses.dataclass
class RunConfig:
    model: str = "lorenz96"
    param: Optional[str] = None
    dim: Optional[int] = None
    sigma0: Optional[float] = None
    ou_a: Optional[float] = None
    ou_sigma: Optional[float] = None
    observable: str = "mean"
    mode: str = "finite"
    gamma: float = 0.0
    gammas: Optional[list] = None
    dt: Optional[float] = None
    T: Optional[float] = None
    W: Optional[float] = None
    mpre: float = 0.0
    L: Optional[int] = None
    batch_length: Optional[int] = None
    schedule: str = "const:10"
    seed: int = 0
    workers: int = 1
    tolerate_overflow: bool = False
    with_deterministic: bool = False
    h: float = 0.05
    coupling: Optional[str] = None
    replications: int = 8
    renorm_interval: int = 10
    trace: Optional[str] = None
    trace_coords: str = "0,1"
    out: str = "results"

    def require(self, field: str):
        value = getattr(self, field)
        if value is None:
            raise ConfigError(f"mode {self.mode!r} requires {field!r}")
        return value


def _build_model_from(cfg: RunConfig):
    kwargs = {}
    if cfg.dim is not None:
        kwargs["dim"] = int(cfg.dim)
    if cfg.param is not None:
        kwargs["param"] = cfg.param
    if cfg.model == "lorenz96" and cfg.sigma0 is not None:
        kwargs["sigma0"] = float(cfg.sigma0)
    if cfg.model == "ou":
        if cfg.ou_a is not None:
            kwargs["a"] = float(cfg.ou_a)
        if cfg.ou_sigma is not None:
            kwargs["sigma"] = float(cfg.ou_sigma)
    try:
        return build_model(cfg.model, **kwargs)
    except (ModelValidationError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _steps(cfg: RunConfig, horizon: float) -> int:
    n = int(round(horizon / cfg.dt))
    if n < 1:
        raise ConfigError(f"horizon {horizon} shorter than one step of dt={cfg.dt}")
    return n


def _positive(cfg: RunConfig, field: str) -> float:
    value = cfg.require(field)
    if not float(value) > 0:
        raise ConfigError(f"{field} must be positive, got {value}")
    return float(value)


def _schedule_for(cfg: RunConfig, horizon: Optional[float]):
    try:
        return parse_schedule(cfg.schedule, dt=cfg.dt, horizon=horizon)
    except ScheduleError as exc:
        raise ConfigError(str(exc)) from None


def _estimate_row(gamma: float, est: SensitivityEstimate) -> tuple:
    return (
        gamma,
        est.phi_avg,
        est.phi_std_error,
        est.value,
        est.std_error,
        est.n_samples,
        est.overflow_count,
    )


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: str, columns, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_metadata(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _estimate_record(est: SensitivityEstimate) -> dict:
    return {
        "value": est.value,
        "std_error": est.std_error,
        "n_samples": est.n_samples,
        "phi_avg": est.phi_avg,
        "phi_std_error": est.phi_std_error,
        "overflow_count": est.overflow_count,
        "config": est.config,
    }


def _run_finite(cfg: RunConfig, model, observable):
    dt = _positive(cfg, "dt")
    horizon = _positive(cfg, "T")
    n_steps = _steps(cfg, horizon)
    n_paths = int(cfg.require("L"))
    schedule = _schedule_for(cfg, horizon)
    est = estimate_finite_time(
        model, observable, schedule, cfg.gamma, dt, n_steps, n_paths, cfg.seed,
        n_workers=cfg.workers, tolerate_overflow=cfg.tolerate_overflow,
    )
    return [_estimate_row(cfg.gamma, est)], [_estimate_record(est)]


def _run_ergodic(cfg: RunConfig, model, observable, gamma=None):
    dt = _positive(cfg, "dt")
    horizon = _positive(cfg, "T")
    window = _positive(cfg, "W")
    n_steps = _steps(cfg, horizon)
    window_steps = _steps(cfg, window)
    spinup_steps = int(round(float(cfg.mpre) / dt))
    schedule = _schedule_for(cfg, None)
    g = cfg.gamma if gamma is None else gamma
    est = estimate_ergodic(
        model, observable, schedule, g, dt, n_steps, window_steps, spinup_steps, cfg.seed,
        batch_length=cfg.batch_length, tolerate_overflow=cfg.tolerate_overflow,
    )
    return [_estimate_row(g, est)], [_estimate_record(est)]


def _sweep_kind(cfg: RunConfig) -> str:
    return "ergodic" if cfg.W is not None else "finite"


def _deterministic_average(cfg: RunConfig, gamma: float) -> float:
    if cfg.model != "lorenz96":
        raise ConfigError("the deterministic comparison column is only defined for lorenz96")
    det = build_model("lorenz96", dim=int(cfg.dim or 40), sigma0=0.0, param=cfg.param or "gamma0")
    obs = build_observable(cfg.observable, det.dim)
    p = det.param_point(gamma)
    x0 = det.initial_state(p)
    x0[0] += 0.01  # break the uniform invariant manifold of the noiseless system
    dt = cfg.dt
    avg = orbit_observable_averages(
        det, obs, p, dt, _steps(cfg, cfg.require("T")), int(round(float(cfg.mpre) / dt)),
        master_seed=cfg.seed, path_indices=[0], noise=False, initial_state=x0,
    )
    return float(avg[0])


def _run_sweep(cfg: RunConfig, model, observable):
    gammas = cfg.gammas
    if not gammas:
        raise ConfigError("sweep needs a nonempty gamma grid")
    gammas = [float(g) for g in gammas]
    if any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise ConfigError("gamma grid must be strictly increasing")
    kind = _sweep_kind(cfg)
    columns = list(CSV_COLUMNS)
    if cfg.with_deterministic:
        if kind != "ergodic":
            raise ConfigError("the deterministic comparison column needs an ergodic sweep")
        columns.append("phi_avg_det")
    rows, records = [], []
    for g in gammas:
        sub = dataclasses.replace(cfg, gamma=g)
        if kind == "ergodic":
            point_rows, point_records = _run_ergodic(sub, model, observable)
        else:
            point_rows, point_records = _run_finite(sub, model, observable)
        row = point_rows[0]
        if cfg.with_deterministic:
            row = row + (_deterministic_average(cfg, g),)
        rows.append(row)
        records.append(point_records[0])
    return columns, rows, records


def _run_lyapunov(cfg: RunConfig, model):
    dt = _positive(cfg, "dt")
    n_steps = _steps(cfg, _positive(cfg, "T"))
    lam = top_lyapunov(
        model, cfg.gamma, dt, n_steps, cfg.seed,
        renorm_interval=cfg.renorm_interval,
        spinup_steps=int(round(float(cfg.mpre) / dt)),
    )
    rows = list(zip(lam.times, lam.running))
    record = {"value": lam.value, "config": lam.config}
    return ("t", "lambda_running"), rows, record


def _run_oracle(cfg: RunConfig, model, observable):
    dt = _positive(cfg, "dt")
    n_steps = _steps(cfg, _positive(cfg, "T"))
    if cfg.W is not None or cfg.mode == "ergodic":
        oc = FdOracleConfig(h=cfg.h, coupling=cfg.coupling or "independent", replications=cfg.replications)
        est = fd_derivative_ergodic(
            model, observable, cfg.gamma, dt, n_steps, int(round(float(cfg.mpre) / dt)), cfg.seed, oc
        )
    else:
        oc = FdOracleConfig(h=cfg.h, coupling=cfg.coupling or "common-seed", replications=cfg.replications)
        n_paths = int(cfg.require("L"))
        est = fd_derivative_finite_time(model, observable, cfg.gamma, dt, n_steps, n_paths, cfg.seed, oc)
    return [_estimate_row(cfg.gamma, est)], [_estimate_record(est)]


def _write_trace(cfg: RunConfig, model) -> None:
    dt = _positive(cfg, "dt")
    n_steps = _steps(cfg, _positive(cfg, "T"))
    try:
        coords = [int(c) for c in str(cfg.trace_coords).split(",") if c != ""]
    except ValueError:
        raise ConfigError(f"bad trace coordinates {cfg.trace_coords!r}; use e.g. '0,1'") from None
    if not coords or any(c < 0 or c >= model.dim for c in coords):
        raise ConfigError(f"trace coordinates must lie in [0, {model.dim})")
    p = model.param_point(cfg.gamma)
    rng = SequentialPathRng(cfg.seed, 0, model.dim, dt)
    x = np.array(model.initial_state(p), dtype=float)
    rows = [(0.0,) + tuple(x[c] for c in coords)]
    for n in range(n_steps):
        x = euler_step(model, x, p, dt, rng.next_increment())
        rows.append(((n + 1) * dt,) + tuple(x[c] for c in coords))
    write_csv(cfg.trace, ("t",) + tuple(f"x{c}" for c in coords), rows)


def _finalize(cfg: RunConfig, columns, rows, results, kind: str, status: dict | None = None) -> None:
    write_csv(cfg.out + ".csv", columns, rows)
    payload = {
        "tool": {"name": "pathkernel", "version": __version__},
        "kind": kind,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "csv_columns": list(columns),
        "config": dataclasses.asdict(cfg),
        "results": results,
    }
    if status:
        payload["status"] = status
    write_metadata(cfg.out + ".meta.json", payload)


def execute(cfg: RunConfig) -> int:
    if cfg.model not in MODEL_BUILDERS:
        raise ConfigError(f"unknown model {cfg.model!r}; registered: {sorted(MODEL_BUILDERS)}")
    model = _build_model_from(cfg)
    observable = build_observable(cfg.observable, model.dim)
    # reject bad selectors before any compute
    if cfg.mode in ("finite", "ergodic", "sweep"):
        _schedule_for(cfg, 1.0 if cfg.T is None else float(cfg.T))

    if cfg.mode == "lyapunov":
        columns, rows, record = _run_lyapunov(cfg, model)
        _finalize(cfg, columns, rows, record, "lyapunov")
        print(f"lambda_hat = {record['value']:.6g} (written to {cfg.out}.csv)")
        return EXIT_OK

    if cfg.mode == "oracle":
        rows, records = _run_oracle(cfg, model, observable)
        _finalize(cfg, CSV_COLUMNS, rows, records, "oracle")
        print(f"oracle dphi = {records[0]['value']:.6g} +- {records[0]['std_error']:.3g}")
        return EXIT_OK

    if cfg.mode == "sweep":
        columns = list(CSV_COLUMNS)
        rows, records = [], []
        try:
            columns, rows, records = _run_sweep(cfg, model, observable)
        except PathOverflowError as exc:
            # keep what finished: partial CSV plus a nonzero exit
            _finalize(cfg, columns, rows, records, "estimate", status={"error": str(exc), "step": exc.step})
            print(f"sweep aborted: {exc}", file=sys.stderr)
            return EXIT_OVERFLOW
        _finalize(cfg, columns, rows, records, "estimate")
        print(f"sweep of {len(rows)} points written to {cfg.out}.csv")
        return EXIT_OK

    if cfg.mode in ("finite", "ergodic"):
        if cfg.trace:
            _write_trace(cfg, model)
        try:
            if cfg.mode == "finite":
                rows, records = _run_finite(cfg, model, observable)
            else:
                rows, records = _run_ergodic(cfg, model, observable)
        except PathOverflowError as exc:
            _finalize(cfg, CSV_COLUMNS, [], [], "estimate", status={"error": str(exc), "step": exc.step})
            print(f"run aborted: {exc}", file=sys.stderr)
            return EXIT_OVERFLOW
        _finalize(cfg, CSV_COLUMNS, rows, records, "estimate")
        rec = records[0]
        print(f"dphi = {rec['value']:.6g} +- {rec['std_error']:.3g} (phi_avg {rec['phi_avg']:.6g})")
        return EXIT_OK

    raise ConfigError(f"unknown mode {cfg.mode!r}")


def _parse_gamma_grid(text: str) -> list:
    text = text.strip()
    if ":" in text and "," not in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"gamma grid {text!r} must be start:stop:num or a comma list")
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        if num < 1:
            raise ConfigError("gamma grid needs at least one point")
        return [float(g) for g in np.linspace(start, stop, num)]
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad gamma grid {text!r}") from None


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    flat = {}
    model = raw.pop("model", None)
    if isinstance(model, dict):
        flat["model"] = model.get("name", "lorenz96")
        for key in ("param", "dim", "sigma0"):
            if key in model:
                flat[key] = model[key]
        if "a" in model:
            flat["ou_a"] = model["a"]
        if "sigma" in model:
            flat["ou_sigma"] = model["sigma"]
    elif model is not None:
        flat["model"] = model
    gammas = raw.pop("gammas", None)
    if isinstance(gammas, dict):
        flat["gammas"] = [float(g) for g in np.linspace(gammas["start"], gammas["stop"], int(gammas["num"]))]
    elif gammas is not None:
        flat["gammas"] = list(gammas)
    flat.update(raw)
    return flat


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(_load_config_file(args.config))
    for key in (
        "model", "param", "dim", "sigma0", "observable", "gamma", "dt", "T", "W",
        "mpre", "L", "batch_length", "schedule", "seed", "workers", "h", "coupling",
        "replications", "renorm_interval", "trace", "trace_coords", "out",
    ):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "gamma_grid", None) is not None:
        values["gammas"] = _parse_gamma_grid(args.gamma_grid)
    for flag in ("tolerate_overflow", "with_deterministic"):
        if getattr(args, flag, False):
            values[flag] = True
    values["mode"] = args.mode_name if args.mode_name != "run" else values.get("mode", "finite")
    if getattr(args, "mode", None):
        values["mode"] = args.mode
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.mode not in ("finite", "ergodic", "sweep", "lyapunov", "oracle"):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    return cfg


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file; flags override its values")
    parser.add_argument("--model", help="registered model name (lorenz96, ou, gauss)")
    parser.add_argument("--param", help="active parameter of the model")
    parser.add_argument("--dim", type=int, help="state dimension")
    parser.add_argument("--sigma0", type=float, help="base noise level (lorenz96)")
    parser.add_argument("--observable", help="observable name (mean, x, x2)")
    parser.add_argument("--gamma", type=float, help="base parameter value")
    parser.add_argument("--dt", type=float, help="time step")
    parser.add_argument("--T", type=float, help="horizon (finite) or orbit length (ergodic), time units")
    parser.add_argument("--W", type=float, help="decorrelation window, time units (ergodic)")
    parser.add_argument("--mpre", type=float, help="spin-up length, time units (ergodic)")
    parser.add_argument("--L", type=int, help="number of sample paths (finite)")
    parser.add_argument("--batch-length", dest="batch_length", type=int, help="batch size in steps for ergodic error bars")
    parser.add_argument("--schedule", help="schedule selector: const:<a>, zero, kernel, bel")
    parser.add_argument("--seed", type=int, help="master seed recorded in all outputs")
    parser.add_argument("--workers", type=int, help="worker processes for path batches")
    parser.add_argument("--tolerate-overflow", dest="tolerate_overflow", action="store_true",
                        help="count and exclude overflowed paths instead of aborting")
    parser.add_argument("--out", help="output path prefix (writes <out>.csv and <out>.meta.json)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathkernel",
        description="Linear-response (sensitivity) estimation for SDEs by path-kernel Monte Carlo",
    )
    parser.add_argument("--version", action="version", version=f"pathkernel {__version__}")
    sub = parser.add_subparsers(dest="mode_name", required=True)

    run = sub.add_parser("run", help="single estimate at the base parameter value")
    _add_common(run)
    run.add_argument("--mode", choices=("finite", "ergodic"), help="estimator flavor (default finite)")
    run.add_argument("--trace", help="also write a single-path trace CSV to this path")
    run.add_argument("--trace-coords", dest="trace_coords", help="comma-separated coordinates to trace")

    sweep = sub.add_parser("sweep", help="estimate over a grid of parameter values")
    _add_common(sweep)
    sweep.add_argument("--gamma-grid", dest="gamma_grid", help="grid as start:stop:num or comma list")
    sweep.add_argument("--with-deterministic", dest="with_deterministic", action="store_true",
                       help="append the noiseless observable average column (lorenz96 ergodic)")

    lyap = sub.add_parser("lyapunov", help="top Lyapunov exponent of the homogeneous tangent")
    _add_common(lyap)
    lyap.add_argument("--renorm-interval", dest="renorm_interval", type=int,
                      help="steps between tangent renormalizations")

    oracle = sub.add_parser("oracle", help="finite-difference reference derivative")
    _add_common(oracle)
    oracle.add_argument("--h", type=float, help="central-difference step in gamma")
    oracle.add_argument("--coupling", choices=("common-seed", "independent"), help="noise coupling across the two sides")
    oracle.add_argument("--replications", type=int, help="replicate groups for the oracle error bar")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        return execute(cfg)
    except (ConfigError, ModelValidationError, ScheduleError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PathOverflowError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW


if __name__ == "__main__":
    sys.exit(main())
