"""Schedule policies: how much path perturbation moves into the kernel weight.

A schedule is an adapted scalar process alpha_n evaluated once per step.  It
may read the step index, the time, and the current state through a
:class:`HistoryView`, but never the step's own increment; that boundary keeps
the kernel weight an Ito sum with zero conditional mean.
"""

from __future__ import annotations

import abc
import warnings
from dataclasses import dataclass

import numpy as np


class ScheduleError(ValueError):
    """A schedule produced an invalid value or was used outside its domain."""


class HistoryView:
    """What a schedule may see at step n.

    ``state`` is the current (pre-update) state, read-only; ``n_steps`` is
    the run horizon in steps for finite runs and ``None`` for single-orbit
    runs.  There is deliberately no access to the current increment.
    """

    __slots__ = ("step", "time", "dt", "n_steps", "state")

    def __init__(self, step, time, dt=None, n_steps=None, state=None):
        self.step = step
        self.time = time
        self.dt = dt
        self.n_steps = n_steps
        self.state = state


class Schedule(abc.ABC):
    """Per-step damping policy alpha(n)."""

    #: True if alpha reads the state; constant-family schedules leave this
    #: False so batched runners can evaluate them once per step.
    uses_state = False
    #: True for schedules only defined on a finite horizon (rejected by the
    #: ergodic estimator).
    finite_horizon_only = False

    @abc.abstractmethod
    def alpha(self, step: int, time: float, view: HistoryView) -> float:
        """Schedule value at step n; must be finite and adapted."""

    @abc.abstractmethod
    def describe(self) -> str:
        """Short config string recorded in output metadata."""


@dataclass(frozen=True)
class ConstantSchedule(Schedule):
    value: float
    label: str = ""

    def alpha(self, step, time, view):
        return self.value

    def describe(self):
        return self.label or f"const:{self.value!r}"


def constant_schedule(alpha: float) -> ConstantSchedule:
    """alpha_n = alpha at every step."""
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise ScheduleError(f"schedule value must be finite, got {alpha}")
    if alpha < 0:
        warnings.warn(f"negative schedule value {alpha}: the damping term amplifies instead", stacklevel=2)
    return ConstantSchedule(alpha)


def pure_kernel_schedule(dt: float) -> ConstantSchedule:
    """alpha_n = 1/dt: the entire per-step perturbation hits the kernel.

    With constant, parameter-independent diffusion this reproduces the pure
    likelihood-ratio estimator.
    """
    if not dt > 0:
        raise ScheduleError(f"dt must be positive, got {dt}")
    return ConstantSchedule(1.0 / dt, label=f"kernel:dt={dt!r}")


@dataclass(frozen=True)
class BelSchedule(Schedule):
    """alpha at time t equals 1/(T - t); kills the carried tangent at t = T.

    Defined on steps 0..N-1 as 1/((N - n) * dt), so the final value is
    exactly 1/dt and the damping factor 1 - alpha*dt vanishes exactly.
    Finite-horizon only: over long spans the early steps damp too little.
    """

    horizon: float

    finite_horizon_only = True

    def alpha(self, step, time, view):
        if view.n_steps is None or view.dt is None:
            raise ScheduleError("horizon-matched schedule needs a finite-horizon run (n_steps and dt)")
        if not abs(view.n_steps * view.dt - self.horizon) <= 1e-9 * max(1.0, abs(self.horizon)):
            raise ScheduleError(
                f"run horizon {view.n_steps * view.dt!r} does not match the schedule's T={self.horizon!r}"
            )
        remaining = view.n_steps - step
        if remaining <= 0:
            raise ScheduleError(f"step {step} is outside the horizon of {view.n_steps} steps")
        return 1.0 / (remaining * view.dt)

    def describe(self):
        return f"bel:T={self.horizon!r}"


def bel_schedule(horizon: float) -> BelSchedule:
    """The 1/(T - t) schedule."""
    if not horizon > 0:
        raise ScheduleError(f"horizon must be positive, got {horizon}")
    return BelSchedule(float(horizon))


@dataclass(frozen=True)
class StateDependentSchedule(Schedule):
    """Wraps a user rule ``rule(view) -> float``.

    The rule sees only the history view; non-finite output is a hard error at
    the offending step.
    """

    rule: object
    label: str = "state-dependent"

    uses_state = True

    def alpha(self, step, time, view):
        out = float(self.rule(view))
        if not np.isfinite(out):
            raise ScheduleError(f"schedule rule returned non-finite value {out} at step {step}")
        return out

    def describe(self):
        return self.label


def state_dependent_schedule(rule, label: str = "state-dependent") -> StateDependentSchedule:
    if not callable(rule):
        raise ScheduleError("rule must be callable")
    return StateDependentSchedule(rule, label)


def parse_schedule(text: str, *, dt=None, horizon=None) -> Schedule:
    """Build a schedule from a CLI selector.

    Accepted forms: ``const:<alpha>``, ``zero``, ``kernel``, ``bel``.
    """
    text = text.strip()
    if text == "zero":
        return constant_schedule(0.0)
    if text.startswith("const:"):
        try:
            return constant_schedule(float(text.split(":", 1)[1]))
        except ValueError as exc:
            raise ScheduleError(f"bad constant schedule {text!r}: {exc}") from None
    if text == "kernel":
        if dt is None:
            raise ScheduleError("schedule 'kernel' needs dt")
        return pure_kernel_schedule(dt)
    if text == "bel":
        if horizon is None:
            raise ScheduleError("schedule 'bel' needs a finite horizon T")
        return bel_schedule(horizon)
    raise ScheduleError(f"unknown schedule selector {text!r}; use const:<a>, zero, kernel, or bel")
