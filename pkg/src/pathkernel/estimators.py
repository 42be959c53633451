"""Finite-horizon and ergodic sensitivity estimators with error reporting.

Both estimators centralize the observable with the in-sample mean before
multiplying by the kernel weight; that changes nothing in expectation and
cuts the variance.  Reductions run in fixed path/step order, so a result is
bit-identical for a given (seed, config) no matter how work was chunked or
how many workers ran it.
"""

from __future__ import annotations

import concurrent.futures
import multiprocessing
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .integrator import (
    BatchPaths,
    PathOverflowError,
    _concat_batches,
    _dot,
    _readonly,
    euler_step,
    flag_overflow,
    kernel_increment,
    run_paths,
    tangent_step,
)
from .model import Observable, SdeModel, as_param
from .rng import SequentialPathRng
from .schedules import HistoryView, Schedule, ScheduleError


@dataclass(frozen=True)
class SensitivityEstimate:
    """Point estimate of the parameter derivative of E[Phi], with its error.

    ``n_samples`` counts paths (finite horizon) or accumulated time steps
    (ergodic).  ``phi_avg``/``phi_std_error`` are the companion estimate of
    the observable average itself.  ``config`` echoes how the number was
    produced (schedule, dt, horizon, seed, ...).
    """

    value: float
    std_error: float
    n_samples: int
    phi_avg: float
    phi_std_error: float
    overflow_count: int = 0
    config: dict = field(default_factory=dict)


def summarize(samples):
    """Sample mean and standard error, fixed-order reduction.

    Requires at least two samples.
    """
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size < 2:
        raise ValueError(f"need at least two samples, got {arr.size}")
    mean = float(arr.mean())
    std_error = float(arr.std(ddof=1) / np.sqrt(arr.size))
    return mean, std_error


def _finite_worker(payload):
    (model, observable, schedule, p, dt, n_steps, master_seed, start, count, chunk_size) = payload
    return run_paths(
        model,
        observable,
        schedule,
        p,
        dt,
        n_steps,
        master_seed=master_seed,
        path_start=start,
        n_paths=count,
        chunk_size=chunk_size,
    )


def _run_parallel(model, observable, schedule, p, dt, n_steps, master_seed, path_start, n_paths, n_workers, chunk_size) -> BatchPaths:
    if n_workers <= 1:
        return run_paths(
            model,
            observable,
            schedule,
            p,
            dt,
            n_steps,
            master_seed=master_seed,
            path_start=path_start,
            n_paths=n_paths,
            chunk_size=chunk_size,
        )
    base, rem = divmod(n_paths, n_workers)
    payloads = []
    start = path_start
    for w in range(n_workers):
        count = base + (1 if w < rem else 0)
        if count == 0:
            continue
        payloads.append((model, observable, schedule, p, dt, n_steps, master_seed, start, count, chunk_size))
        start += count
    ctx = multiprocessing.get_context("spawn")
    with concurrent.futures.ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx) as pool:
        parts = list(pool.map(_finite_worker, payloads))
    return _concat_batches(parts)


def estimate_finite_time(
    model: SdeModel,
    observable: Observable,
    schedule: Schedule,
    gamma,
    dt: float,
    n_steps: int,
    n_paths: int,
    master_seed: int,
    *,
    path_start: int = 0,
    n_workers: int = 1,
    chunk_size: Optional[int] = None,
    tolerate_overflow: bool = False,
) -> SensitivityEstimate:
    """Monte-Carlo estimate of d/dgamma E[Phi(X_T)] over independent paths.

    Averages ``S1 + (Phi - Phi_avg) * S2`` over paths, where S1 is the
    terminal gradient term, S2 the kernel weight, and Phi_avg the in-sample
    observable mean.  Overflowed paths abort the run unless
    ``tolerate_overflow``, in which case they are counted and excluded.
    """
    if n_paths < 2:
        raise ValueError(f"n_paths must be >= 2, got {n_paths}")
    p = as_param(model, gamma)
    batch = _run_parallel(
        model, observable, schedule, p, dt, n_steps, master_seed, path_start, n_paths, n_workers, chunk_size
    )
    dead = batch.overflowed
    n_over = int(dead.sum())
    if n_over and not tolerate_overflow:
        raise PathOverflowError(
            f"{n_over} of {n_paths} paths overflowed under schedule {schedule.describe()} "
            f"(first at step {batch.first_overflow_step})",
            step=batch.first_overflow_step or 0,
        )
    if n_paths - n_over < 2:
        raise PathOverflowError(
            f"all paths overflowed under schedule {schedule.describe()} "
            f"(first at step {batch.first_overflow_step})",
            step=batch.first_overflow_step or 0,
        )
    keep = ~dead
    phi = batch.phi[keep]
    terminal = batch.terminal_gradient[keep]
    kernel_sum = batch.kernel_sum[keep]
    phi_avg, phi_se = summarize(phi)
    value, std_error = summarize(terminal + (phi - phi_avg) * kernel_sum)
    config = {
        "mode": "finite",
        "dt": dt,
        "n_steps": n_steps,
        "horizon": n_steps * dt,
        "n_paths": n_paths,
        "schedule": schedule.describe(),
        "master_seed": master_seed,
        "path_start": path_start,
        "gamma": p.gamma,
        "param_id": p.param_id,
        "first_overflow_step": batch.first_overflow_step,
    }
    return SensitivityEstimate(
        value=value,
        std_error=std_error,
        n_samples=n_paths - n_over,
        phi_avg=phi_avg,
        phi_std_error=phi_se,
        overflow_count=n_over,
        config=config,
    )


def estimate_ergodic(
    model: SdeModel,
    observable: Observable,
    schedule: Schedule,
    gamma,
    dt: float,
    n_steps: int,
    window_steps: int,
    spinup_steps: int,
    master_seed: int,
    *,
    path_index: int = 0,
    batch_length: Optional[int] = None,
    tolerate_overflow: bool = False,
) -> SensitivityEstimate:
    """Single-orbit estimate of the stationary-measure sensitivity.

    After ``spinup_steps`` of plain evolution, runs ``window_steps +
    n_steps`` steps keeping a ring of the last ``window_steps`` kernel
    increments; step n >= window pairs its observable with the window sum
    ending at n-1.  Error bars come from non-overlapping batch means (an
    addition of this implementation, flagged in the config echo).
    """
    if window_steps < 1:
        raise ValueError(f"window_steps must be >= 1, got {window_steps}")
    if n_steps < window_steps:
        raise ValueError(f"n_steps ({n_steps}) must be >= window_steps ({window_steps})")
    if spinup_steps < 0:
        raise ValueError("spinup_steps must be >= 0")
    if schedule.finite_horizon_only:
        raise ScheduleError(
            f"schedule {schedule.describe()} is defined on a finite horizon only; "
            "it does not damp uniformly over a long span"
        )
    p = as_param(model, gamma)
    if batch_length is None:
        batch_length = min(10 * window_steps, n_steps)
    if batch_length < 1 or n_steps % batch_length != 0:
        raise ValueError(f"batch_length {batch_length} must divide n_steps {n_steps}")
    n_batches = n_steps // batch_length
    if n_batches < 2:
        raise ValueError(
            f"only {n_batches} batch of length {batch_length}: shrink batch_length or lengthen the run"
        )

    dim = model.dim
    rng = SequentialPathRng(master_seed, path_index, dim, dt)
    value_fn = observable.value
    grad_fn = observable.gradient

    x = np.array(model.initial_state(p), dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(spinup_steps):
            x = euler_step(model, x, p, dt, rng.next_increment())
        if not np.isfinite(x).all():
            raise PathOverflowError("orbit overflowed during spin-up", step=spinup_steps, path_index=path_index)

        v = np.array(model.initial_tangent(), dtype=float)
        ring = np.zeros(window_steps)
        pos = 0
        ring_sum = 0.0
        b_phi = np.zeros(n_batches)
        b_s1 = np.zeros(n_batches)
        b_s2 = np.zeros(n_batches)
        b_phis2 = np.zeros(n_batches)
        max_tangent = 0.0
        steps_done = 0
        overflow_step = None

        for n in range(window_steps + n_steps):
            if n >= window_steps:
                phi_n = float(value_fn(x))
                s1_n = float(_dot(grad_fn(x), v))
                b = (n - window_steps) // batch_length
                b_phi[b] += phi_n
                b_s1[b] += s1_n
                b_s2[b] += ring_sum
                b_phis2[b] += phi_n * ring_sum
                steps_done += 1
            t = n * dt
            view = HistoryView(n, t, dt=dt, n_steps=None, state=_readonly(x))
            alpha = schedule.alpha(n, t, view)
            db = rng.next_increment()
            inc = float(kernel_increment(model, x, v, p, alpha, db))
            x_next = euler_step(model, x, p, dt, db)
            v = tangent_step(model, x, v, p, alpha, dt, db)
            x = x_next
            ring_sum += inc - ring[pos]
            ring[pos] = inc
            pos += 1
            if pos == window_steps:
                pos = 0
            mv = float(np.abs(v).max())
            if mv > max_tangent:
                max_tangent = mv
            if bool(flag_overflow(x, v)):
                overflow_step = n
                break

    used_batches = n_batches
    if overflow_step is not None:
        if not tolerate_overflow:
            raise PathOverflowError(
                f"orbit overflowed at step {overflow_step} under schedule {schedule.describe()}",
                step=overflow_step,
                path_index=path_index,
            )
        used_batches = steps_done // batch_length
        if used_batches < 2:
            raise PathOverflowError(
                f"orbit overflowed at step {overflow_step} before two complete batches",
                step=overflow_step,
                path_index=path_index,
            )

    n_used = used_batches * batch_length
    phi_sum = float(b_phi[:used_batches].sum())
    s1_sum = float(b_s1[:used_batches].sum())
    s2_sum = float(b_s2[:used_batches].sum())
    phis2_sum = float(b_phis2[:used_batches].sum())
    phi_avg = phi_sum / n_used
    value = (s1_sum + phis2_sum - phi_avg * s2_sum) / n_used
    batch_means = (b_s1[:used_batches] + b_phis2[:used_batches] - phi_avg * b_s2[:used_batches]) / batch_length
    std_error = float(batch_means.std(ddof=1) / np.sqrt(used_batches))
    phi_means = b_phi[:used_batches] / batch_length
    phi_se = float(phi_means.std(ddof=1) / np.sqrt(used_batches))

    config = {
        "mode": "ergodic",
        "dt": dt,
        "n_steps": n_steps,
        "window_steps": window_steps,
        "spinup_steps": spinup_steps,
        "horizon": n_steps * dt,
        "window": window_steps * dt,
        "batch_length": batch_length,
        "n_batches": used_batches,
        "error_bars": "batch-means",
        "schedule": schedule.describe(),
        "master_seed": master_seed,
        "path_index": path_index,
        "gamma": p.gamma,
        "param_id": p.param_id,
        "max_tangent_norm": max_tangent,
        "first_overflow_step": overflow_step,
    }
    return SensitivityEstimate(
        value=value,
        std_error=std_error,
        n_samples=n_used,
        phi_avg=phi_avg,
        phi_std_error=phi_se,
        overflow_count=0 if overflow_step is None else 1,
        config=config,
    )
