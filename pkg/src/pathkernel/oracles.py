"""Independent ground truth: finite-difference oracles, analytic references,
and the top Lyapunov exponent used to pick a damping level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .estimators import SensitivityEstimate, summarize
from .integrator import PathOverflowError, _coef, euler_step, orbit_observable_averages, run_paths_observable
from .model import Observable, SdeModel, as_param
from .rng import SequentialPathRng

COUPLINGS = ("common-seed", "independent")


@dataclass(frozen=True)
class FdOracleConfig:
    """Central-difference settings: step in gamma, noise coupling, replications."""

    h: float = 0.05
    coupling: str = "common-seed"
    replications: int = 8

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")
        if self.replications < 2:
            raise ValueError("need at least two replications for an error bar")


def fd_derivative_finite_time(
    model: SdeModel,
    observable: Observable,
    gamma,
    dt: float,
    n_steps: int,
    n_paths: int,
    master_seed: int,
    cfg: Optional[FdOracleConfig] = None,
    *,
    path_start: int = 0,
    chunk_size: Optional[int] = None,
) -> SensitivityEstimate:
    """(E_h[Phi at gamma+h] - E_h[Phi at gamma-h]) / (2h) over sample paths.

    Common-seed coupling (the default) reuses the identical (path, step)
    increment addresses on both sides, collapsing most of the Monte-Carlo
    variance of the difference.  The error bar comes from replicate path
    groups.  Overflow at either offset aborts.
    """
    cfg = cfg or FdOracleConfig()
    p = as_param(model, gamma)
    per = n_paths // cfg.replications
    if per < 1:
        raise ValueError(f"n_paths {n_paths} too small for {cfg.replications} replications")
    n_used = per * cfg.replications

    plus_start = path_start
    minus_start = path_start if cfg.coupling == "common-seed" else path_start + n_used
    phi_plus, dead_p = run_paths_observable(
        model, observable, p.shifted(cfg.h), dt, n_steps,
        master_seed=master_seed, path_start=plus_start, n_paths=n_used, chunk_size=chunk_size,
    )
    phi_minus, dead_m = run_paths_observable(
        model, observable, p.shifted(-cfg.h), dt, n_steps,
        master_seed=master_seed, path_start=minus_start, n_paths=n_used, chunk_size=chunk_size,
    )
    if dead_p.any() or dead_m.any():
        raise PathOverflowError(
            f"paths overflowed at gamma +/- {cfg.h}; the oracle has no estimate here", step=n_steps
        )
    mp = phi_plus.reshape(cfg.replications, per).mean(axis=1)
    mm = phi_minus.reshape(cfg.replications, per).mean(axis=1)
    value, std_error = summarize((mp - mm) / (2.0 * cfg.h))
    phi_avg, phi_se = summarize((mp + mm) / 2.0)
    config = {
        "kind": "oracle",
        "mode": "finite",
        "h": cfg.h,
        "coupling": cfg.coupling,
        "replications": cfg.replications,
        "dt": dt,
        "n_steps": n_steps,
        "horizon": n_steps * dt,
        "n_paths": n_used,
        "master_seed": master_seed,
        "gamma": p.gamma,
        "param_id": p.param_id,
    }
    return SensitivityEstimate(
        value=value, std_error=std_error, n_samples=n_used,
        phi_avg=phi_avg, phi_std_error=phi_se, config=config,
    )


def fd_derivative_ergodic(
    model: SdeModel,
    observable: Observable,
    gamma,
    dt: float,
    n_steps: int,
    spinup_steps: int,
    master_seed: int,
    cfg: Optional[FdOracleConfig] = None,
    *,
    path_start: int = 0,
) -> SensitivityEstimate:
    """Central difference of long-run time averages at gamma +/- h.

    Defaults to independent noise per side: over long horizons in chaotic
    systems common seeds decouple anyway, so they buy nothing.
    """
    cfg = cfg or FdOracleConfig(coupling="independent")
    p = as_param(model, gamma)
    reps = cfg.replications
    plus_idx = [path_start + r for r in range(reps)]
    if cfg.coupling == "common-seed":
        minus_idx = plus_idx
    else:
        minus_idx = [path_start + reps + r for r in range(reps)]
    avg_plus = orbit_observable_averages(
        model, observable, p.shifted(cfg.h), dt, n_steps, spinup_steps,
        master_seed=master_seed, path_indices=plus_idx,
    )
    avg_minus = orbit_observable_averages(
        model, observable, p.shifted(-cfg.h), dt, n_steps, spinup_steps,
        master_seed=master_seed, path_indices=minus_idx,
    )
    value, std_error = summarize((avg_plus - avg_minus) / (2.0 * cfg.h))
    phi_avg, phi_se = summarize((avg_plus + avg_minus) / 2.0)
    config = {
        "kind": "oracle",
        "mode": "ergodic",
        "h": cfg.h,
        "coupling": cfg.coupling,
        "replications": reps,
        "dt": dt,
        "n_steps": n_steps,
        "spinup_steps": spinup_steps,
        "horizon": n_steps * dt,
        "master_seed": master_seed,
        "gamma": p.gamma,
        "param_id": p.param_id,
    }
    return SensitivityEstimate(
        value=value, std_error=std_error, n_samples=reps * n_steps,
        phi_avg=phi_avg, phi_std_error=phi_se, config=config,
    )


@dataclass(frozen=True)
class LyapunovEstimate:
    """Top Lyapunov exponent with its running-average convergence trace."""

    value: float
    times: np.ndarray
    running: np.ndarray
    config: dict


def top_lyapunov(
    model: SdeModel,
    gamma,
    dt: float,
    n_steps: int,
    master_seed: int,
    *,
    renorm_interval: int = 10,
    spinup_steps: int = 0,
    path_index: int = 0,
) -> LyapunovEstimate:
    """Largest Lyapunov exponent via a single renormalized homogeneous tangent.

    Evolves ``du = grad_u F dt + (dsigma . u) dB`` alongside the state,
    renormalizing every ``renorm_interval`` steps and averaging the log
    growth factors.  Only full intervals count; ``n_steps`` is rounded down.
    """
    if renorm_interval < 1:
        raise ValueError("renorm_interval must be >= 1")
    n_intervals = n_steps // renorm_interval
    if n_intervals < 1:
        raise ValueError(f"n_steps {n_steps} shorter than one renormalization interval")
    p = as_param(model, gamma)
    dim = model.dim
    rng = SequentialPathRng(master_seed, path_index, dim, dt)
    x = np.array(model.initial_state(p), dtype=float)
    for _ in range(spinup_steps):
        x = euler_step(model, x, p, dt, rng.next_increment())
    if not np.isfinite(x).all():
        raise PathOverflowError("state overflowed during spin-up", step=spinup_steps)

    u = np.ones(dim) / np.sqrt(dim)
    log_acc = 0.0
    times = np.empty(n_intervals)
    running = np.empty(n_intervals)
    for k in range(n_intervals):
        for _ in range(renorm_interval):
            db = rng.next_increment()
            u_next = u + model.drift_jvp(x, u) * dt + _coef(model.diffusion_grad_dot(x, u), db) * db
            x = euler_step(model, x, p, dt, db)
            u = u_next
        growth = float(np.linalg.norm(u))
        if growth == 0.0 or not np.isfinite(growth) or not np.isfinite(x).all():
            raise PathOverflowError(
                f"tangent collapsed or overflowed (norm {growth}) during interval {k}",
                step=(k + 1) * renorm_interval,
            )
        log_acc += np.log(growth)
        u = u / growth
        elapsed = (k + 1) * renorm_interval * dt
        times[k] = elapsed
        running[k] = log_acc / elapsed
    config = {
        "kind": "lyapunov",
        "dt": dt,
        "n_steps": n_intervals * renorm_interval,
        "renorm_interval": renorm_interval,
        "spinup_steps": spinup_steps,
        "master_seed": master_seed,
        "path_index": path_index,
        "gamma": p.gamma,
        "param_id": p.param_id,
    }
    return LyapunovEstimate(value=float(running[-1]), times=times, running=running, config=config)


def analytic_reference(
    model_name: str,
    observable_name: str,
    param: str,
    mode: str,
    *,
    horizon: Optional[float] = None,
    gamma: float = 0.0,
    a: float = 1.0,
    sigma: float = 1.0,
) -> Optional[float]:
    """Closed-form sensitivity where one exists, else None ("unavailable").

    Known cases: the drift-free Gaussian model at a finite horizon, and the
    OU stationary mean/variance.
    """
    key = (model_name, observable_name, param, mode)
    if key == ("gauss", "x2", "scale", "finite"):
        if horizon is None:
            raise ValueError("the finite-horizon Gaussian reference needs a horizon")
        return 2.0 * (1.0 + gamma) * horizon
    if key == ("gauss", "x", "scale", "finite"):
        return 0.0
    if key == ("ou", "x", "shift", "ergodic"):
        return 1.0 / a
    if key == ("ou", "x2", "scale", "ergodic"):
        return (1.0 + gamma) * sigma * sigma / a
    return None
