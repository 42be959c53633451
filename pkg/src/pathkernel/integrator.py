"""Euler-Maruyama state/tangent stepping and whole-path accumulation.

The per-step order is fixed: draw the increment, evaluate the schedule,
compute the kernel-weight increment from the pre-update state and tangent,
then advance the state and the damped tangent with the same increment
(quenched noise).  The damping is applied as ``(1 - alpha*dt) * v`` so that
``alpha*dt == 1`` zeroes the carried tangent exactly, which the pure-kernel
and horizon-matched schedules rely on.

Accumulation is O(dim) per path: paths never store their history.  The
batched runner performs the identical arithmetic on ``(n_paths, dim)``
arrays, so per-path results are bit-identical to :func:`simulate_path` and
independent of chunking or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Observable, ParamPoint, SdeModel
from .rng import RngStream, SequentialPathRng, gaussian_increment, path_increments
from .schedules import HistoryView, Schedule

#: A path is flagged as overflowed when any coordinate is non-finite or the
#: tangent max-abs exceeds this; reproduces the pure-path blowup without
#: crashing the process.
OVERFLOW_THRESHOLD = 1e12


class DegenerateDiffusionError(RuntimeError):
    """sigma(x) <= 0 where the kernel weight divides by sigma."""


class PathOverflowError(RuntimeError):
    """A path exceeded the overflow threshold and the run does not tolerate it."""

    def __init__(self, message: str, *, step: int, path_index: Optional[int] = None):
        super().__init__(message)
        self.step = step
        self.path_index = path_index


def _coef(c, arr: np.ndarray):
    """Broadcast a scalar-field value against the last (coordinate) axis."""
    c = np.asarray(c)
    if c.ndim == 0:
        return c
    return c[..., np.newaxis]


def _dot(a: np.ndarray, b: np.ndarray):
    return (a * b).sum(axis=-1)


def _check_diffusion(sigma) -> None:
    if (np.asarray(sigma) <= 0.0).any():
        raise DegenerateDiffusionError("degenerate diffusion: sigma(x) <= 0")


def euler_step(model: SdeModel, x: np.ndarray, p: ParamPoint, dt: float, db: np.ndarray) -> np.ndarray:
    """x + F(x)*dt + sigma(x)*db."""
    return x + model.drift(x, p) * dt + _coef(model.diffusion(x, p), db) * db


def tangent_step(
    model: SdeModel,
    x: np.ndarray,
    v: np.ndarray,
    p: ParamPoint,
    alpha,
    dt: float,
    db: np.ndarray,
) -> np.ndarray:
    """One step of the damped tangent recursion, from the pre-update state."""
    damp = 1.0 - alpha * dt
    drift_part = (model.drift_jvp(x, v) + model.drift_dgamma(x, p)) * dt
    noise_coef = model.diffusion_grad_dot(x, v) + model.diffusion_dgamma(x, p)
    return _coef(damp, v) * v + drift_part + _coef(noise_coef, db) * db


def kernel_increment(model: SdeModel, x: np.ndarray, v: np.ndarray, p: ParamPoint, alpha, db: np.ndarray):
    """(db . v) * alpha / sigma(x): the per-step kernel-weight increment."""
    sigma = model.diffusion(x, p)
    _check_diffusion(sigma)
    return alpha * _dot(db, v) / sigma


def flag_overflow(x: np.ndarray, v: np.ndarray):
    """Per-path overflow flag: non-finite coordinates or huge tangent."""
    bad_x = ~np.isfinite(x).all(axis=-1)
    bad_v = ~np.isfinite(v).all(axis=-1)
    with np.errstate(invalid="ignore"):
        big_v = np.abs(v).max(axis=-1) > OVERFLOW_THRESHOLD
    return bad_x | bad_v | big_v


@dataclass(frozen=True)
class StepRecord:
    """Everything one integration step produces."""

    x_next: np.ndarray
    v_next: np.ndarray
    kernel_increment: float
    phi: Optional[float] = None


def step_record(
    model: SdeModel,
    x: np.ndarray,
    v: np.ndarray,
    p: ParamPoint,
    alpha,
    dt: float,
    db: np.ndarray,
    observable: Optional[Observable] = None,
) -> StepRecord:
    """Bundle one step: kernel increment first, then both advances."""
    inc = kernel_increment(model, x, v, p, alpha, db)
    x_next = euler_step(model, x, p, dt, db)
    v_next = tangent_step(model, x, v, p, alpha, dt, db)
    phi = observable.value(x) if observable is not None else None
    return StepRecord(x_next=x_next, v_next=v_next, kernel_increment=inc, phi=phi)


@dataclass
class PathAccumulators:
    """Per-path outputs of a finite-horizon run.

    ``phi`` is the endpoint observable, ``terminal_gradient`` is
    dPhi(x_N) . v_N, and ``kernel_sum`` is the accumulated kernel weight.
    """

    phi: float
    terminal_gradient: float
    kernel_sum: float
    overflowed: bool = False
    first_overflow_step: Optional[int] = None


@dataclass
class BatchPaths:
    """Column-wise :class:`PathAccumulators` for a contiguous path range."""

    phi: np.ndarray
    terminal_gradient: np.ndarray
    kernel_sum: np.ndarray
    overflowed: np.ndarray
    first_overflow_step: Optional[int] = None

    @property
    def n_paths(self) -> int:
        return self.phi.shape[0]


def simulate_path(
    model: SdeModel,
    observable: Observable,
    schedule: Schedule,
    p: ParamPoint,
    dt: float,
    n_steps: int,
    stream: RngStream,
) -> PathAccumulators:
    """Run one finite-horizon path and accumulate (phi, dPhi.v_N, sum I_n).

    Increments come from the stream's current position, one address per step.
    An overflow stops the path and flags it; interpreting the flag is the
    estimator's job.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.array(model.initial_state(p), dtype=float)
    v = np.array(model.initial_tangent(), dtype=float)
    kernel_sum = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_steps):
            t = n * dt
            db = gaussian_increment(stream, dt, model.dim)
            view = HistoryView(n, t, dt=dt, n_steps=n_steps, state=_readonly(x))
            alpha = schedule.alpha(n, t, view)
            kernel_sum += kernel_increment(model, x, v, p, alpha, db)
            x_next = euler_step(model, x, p, dt, db)
            v = tangent_step(model, x, v, p, alpha, dt, db)
            x = x_next
            if bool(flag_overflow(x, v)):
                return PathAccumulators(
                    phi=float("nan"),
                    terminal_gradient=float("nan"),
                    kernel_sum=float("nan"),
                    overflowed=True,
                    first_overflow_step=n,
                )
    phi = float(observable.value(x))
    terminal = float(_dot(observable.gradient(x), v))
    return PathAccumulators(phi=phi, terminal_gradient=terminal, kernel_sum=kernel_sum)


def _readonly(x: np.ndarray) -> np.ndarray:
    view = x.view()
    view.flags.writeable = False
    return view


def _auto_chunk(n_steps: int, dim: int, n_paths: int, budget_bytes: int = 1 << 26) -> int:
    per_path = max(1, n_steps * dim * 8)
    return max(64, min(n_paths, budget_bytes // per_path))


def run_paths(
    model: SdeModel,
    observable: Observable,
    schedule: Schedule,
    p: ParamPoint,
    dt: float,
    n_steps: int,
    *,
    master_seed: int,
    path_start: int = 0,
    n_paths: int,
    chunk_size: Optional[int] = None,
) -> BatchPaths:
    """Vectorized equivalent of :func:`simulate_path` over a path range.

    Path i uses the increment stream addressed (master_seed, path_start + i),
    so results do not depend on chunking and two calls with overlapping
    ranges see the same noise.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    chunk = chunk_size or _auto_chunk(n_steps, model.dim, n_paths)
    parts = []
    for start in range(0, n_paths, chunk):
        count = min(chunk, n_paths - start)
        parts.append(
            _run_chunk(model, observable, schedule, p, dt, n_steps, master_seed, path_start + start, count)
        )
    return _concat_batches(parts)


def _concat_batches(parts) -> BatchPaths:
    firsts = [b.first_overflow_step for b in parts if b.first_overflow_step is not None]
    return BatchPaths(
        phi=np.concatenate([b.phi for b in parts]),
        terminal_gradient=np.concatenate([b.terminal_gradient for b in parts]),
        kernel_sum=np.concatenate([b.kernel_sum for b in parts]),
        overflowed=np.concatenate([b.overflowed for b in parts]),
        first_overflow_step=min(firsts) if firsts else None,
    )


def _run_chunk(model, observable, schedule, p, dt, n_steps, master_seed, path_start, count) -> BatchPaths:
    dim = model.dim
    inc = np.empty((count, n_steps, dim))
    for i in range(count):
        inc[i] = path_increments(master_seed, path_start + i, n_steps, dim, dt)

    x = np.array(np.broadcast_to(model.initial_state(p), (count, dim)), dtype=float)
    v = np.array(np.broadcast_to(model.initial_tangent(), (count, dim)), dtype=float)
    kernel_sum = np.zeros(count)
    dead = np.zeros(count, dtype=bool)
    first_overflow = None
    state_free = not schedule.uses_state

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_steps):
            t = n * dt
            db = inc[:, n, :]
            if state_free:
                alpha = schedule.alpha(n, t, HistoryView(n, t, dt=dt, n_steps=n_steps))
            else:
                alpha = np.array(
                    [
                        schedule.alpha(n, t, HistoryView(n, t, dt=dt, n_steps=n_steps, state=_readonly(row)))
                        for row in x
                    ]
                )
            step_inc = kernel_increment(model, x, v, p, alpha, db)
            kernel_sum = kernel_sum + np.where(dead, 0.0, step_inc)
            x_next = euler_step(model, x, p, dt, db)
            v = tangent_step(model, x, v, p, alpha, dt, db)
            x = x_next
            newly = flag_overflow(x, v) & ~dead
            if newly.any():
                if first_overflow is None:
                    first_overflow = n
                dead = dead | newly
        phi = np.asarray(observable.value(x), dtype=float)
        terminal = np.asarray(_dot(observable.gradient(x), v), dtype=float)
    phi = np.where(dead, np.nan, phi)
    terminal = np.where(dead, np.nan, terminal)
    kernel_sum = np.where(dead, np.nan, kernel_sum)
    return BatchPaths(
        phi=phi,
        terminal_gradient=terminal,
        kernel_sum=kernel_sum,
        overflowed=dead,
        first_overflow_step=first_overflow,
    )


def run_paths_observable(
    model: SdeModel,
    observable: Observable,
    p: ParamPoint,
    dt: float,
    n_steps: int,
    *,
    master_seed: int,
    path_start: int = 0,
    n_paths: int,
    chunk_size: Optional[int] = None,
):
    """Endpoint observable values only (no tangent work); for oracles.

    Returns ``(phi, overflowed)`` arrays over the path range.
    """
    chunk = chunk_size or _auto_chunk(n_steps, model.dim, n_paths)
    phis = []
    flags = []
    for start in range(0, n_paths, chunk):
        count = min(chunk, n_paths - start)
        dim = model.dim
        inc = np.empty((count, n_steps, dim))
        for i in range(count):
            inc[i] = path_increments(master_seed, path_start + start + i, n_steps, dim, dt)
        x = np.array(np.broadcast_to(model.initial_state(p), (count, dim)), dtype=float)
        dead = np.zeros(count, dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for n in range(n_steps):
                x = euler_step(model, x, p, dt, inc[:, n, :])
                dead = dead | ~np.isfinite(x).all(axis=-1)
            phi = np.asarray(observable.value(x), dtype=float)
        phis.append(np.where(dead, np.nan, phi))
        flags.append(dead)
    return np.concatenate(phis), np.concatenate(flags)


def orbit_observable_averages(
    model: SdeModel,
    observable: Observable,
    p: ParamPoint,
    dt: float,
    n_steps: int,
    spinup_steps: int,
    *,
    master_seed: int,
    path_indices,
    noise: bool = True,
    time_block: int = 4096,
    initial_state: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Long-run time averages of Phi over replicate orbits, vectorized.

    Orbit r uses the stream addressed (master_seed, path_indices[r]).  With
    ``noise=False`` the increments are zero, which runs the underlying ODE
    (used for the deterministic observable-average comparison); pass a
    symmetry-breaking ``initial_state`` there, since a noiseless orbit from a
    symmetric state can stay on an unstable invariant manifold.  Overflow in
    any orbit is an error: a diverged orbit has no meaningful average.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    path_indices = list(path_indices)
    n_orbits = len(path_indices)
    dim = model.dim
    x0 = model.initial_state(p) if initial_state is None else np.asarray(initial_state, dtype=float)
    x = np.array(np.broadcast_to(x0, (n_orbits, dim)), dtype=float)
    rngs = None
    if noise:
        rngs = [SequentialPathRng(master_seed, idx, dim, dt) for idx in path_indices]

    def blocks(total):
        done = 0
        while done < total:
            k = min(time_block, total - done)
            if noise:
                out = np.empty((n_orbits, k, dim))
                for i, rng in enumerate(rngs):
                    out[i] = rng.next_block(k)
            else:
                out = np.zeros((n_orbits, k, dim))
            yield out
            done += k

    step_global = 0
    for block in blocks(spinup_steps):
        for n in range(block.shape[1]):
            x = euler_step(model, x, p, dt, block[:, n, :])
        step_global += block.shape[1]
        if not np.isfinite(x).all():
            raise PathOverflowError("orbit overflowed during spin-up", step=step_global)

    sums = np.zeros(n_orbits)
    for block in blocks(n_steps):
        for n in range(block.shape[1]):
            sums += np.asarray(observable.value(x), dtype=float)
            x = euler_step(model, x, p, dt, block[:, n, :])
        step_global += block.shape[1]
        if not np.isfinite(x).all():
            raise PathOverflowError("orbit overflowed", step=step_global)
    return sums / n_steps
