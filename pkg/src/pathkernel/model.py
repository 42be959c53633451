"""Core interfaces: SDE models, the active parameter, observables, validation.

A model bundles the dynamics ``dX = F(X, gamma) dt + sigma(X, gamma) dB``
with the derivative capabilities the tangent recursion needs.  The diffusion
is a strictly positive scalar field (times the identity); matrix diffusion is
out of scope.  Exactly one scalar parameter is active per estimator run, and
the initial condition must be affine in it: ``x0(gamma) = x0 + gamma * v0``.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np


class ModelValidationError(ValueError):
    """A model violates a structural requirement (e.g. non-affine x0(gamma))."""


@dataclass(frozen=True)
class ParamPoint:
    """Value of the active scalar parameter plus its identifier."""

    gamma: float = 0.0
    param_id: str = "gamma"

    def shifted(self, h: float) -> "ParamPoint":
        return ParamPoint(self.gamma + h, self.param_id)


class SdeModel(abc.ABC):
    """Dynamics bundle consumed by the integrator and estimators.

    All capabilities are pure functions of their arguments and accept states
    of shape ``(dim,)`` or batched ``(..., dim)``, vectorizing over leading
    axes.  Scalar-valued capabilities (diffusion and its derivatives) return
    a float for a single state and an array of the leading shape for a batch,
    or a plain float when constant.  Directional derivatives are evaluated at
    the run's base parameter value.  Instances are immutable and shareable
    across workers.
    """

    dim: int
    param_id: str

    @abc.abstractmethod
    def drift(self, x: np.ndarray, p: ParamPoint) -> np.ndarray:
        """Drift vector field F(x, gamma)."""

    @abc.abstractmethod
    def diffusion(self, x: np.ndarray, p: ParamPoint):
        """Scalar diffusion sigma(x, gamma) > 0."""

    @abc.abstractmethod
    def drift_jvp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Directional derivative of the drift along v, linear in v."""

    @abc.abstractmethod
    def drift_dgamma(self, x: np.ndarray, p: ParamPoint) -> np.ndarray:
        """Partial derivative of the drift with respect to the parameter."""

    @abc.abstractmethod
    def diffusion_grad_dot(self, x: np.ndarray, v: np.ndarray):
        """Gradient of sigma dotted with v (scalar), linear in v."""

    @abc.abstractmethod
    def diffusion_dgamma(self, x: np.ndarray, p: ParamPoint):
        """Partial derivative of sigma with respect to the parameter."""

    @abc.abstractmethod
    def initial_state(self, p: ParamPoint) -> np.ndarray:
        """Starting point x0 + gamma * v0."""

    @abc.abstractmethod
    def initial_tangent(self) -> np.ndarray:
        """Derivative of the initial state with respect to the parameter."""

    def param_point(self, gamma: float) -> ParamPoint:
        return ParamPoint(float(gamma), self.param_id)


class Observable(abc.ABC):
    """Scalar statistic of the state; gradient must match value's derivative."""

    @abc.abstractmethod
    def value(self, x: np.ndarray):
        """Phi(x); a float for a single state, leading-shape array for a batch."""

    @abc.abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray:
        """dPhi(x), same shape as x."""


def require_param(model: SdeModel, p: ParamPoint) -> ParamPoint:
    """Reject a ParamPoint that names a different parameter than the model's."""
    if p.param_id != model.param_id:
        raise ModelValidationError(
            f"parameter {p.param_id!r} is not the model's active parameter "
            f"{model.param_id!r}; one parameter per run"
        )
    return p


def as_param(model: SdeModel, gamma) -> ParamPoint:
    """Normalize a float or ParamPoint into the model's active parameter."""
    if isinstance(gamma, ParamPoint):
        return require_param(model, gamma)
    return model.param_point(gamma)


def check_affine_initial_condition(model: SdeModel, gammas=(-0.3, 0.2, 1.0), atol: float = 1e-12) -> None:
    """Reject models whose initial condition is not affine in the parameter."""
    base = np.asarray(model.initial_state(model.param_point(0.0)), dtype=float)
    v0 = np.asarray(model.initial_tangent(), dtype=float)
    if base.shape != (model.dim,) or v0.shape != (model.dim,):
        raise ModelValidationError(
            f"initial state/tangent must have shape ({model.dim},), got "
            f"{base.shape} and {v0.shape}"
        )
    for g in gammas:
        shifted = np.asarray(model.initial_state(model.param_point(g)), dtype=float)
        if not np.allclose(shifted - base, g * v0, rtol=0.0, atol=atol):
            raise ModelValidationError(
                "initial condition is not affine in the parameter "
                f"(checked at gamma={g}); only x0 + gamma*v0 is supported"
            )


@dataclass(frozen=True)
class DerivativeCheck:
    probe_index: int
    check: str
    max_rel_error: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    checks: list
    tol: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def max_rel_error(self, check: str) -> float:
        return max(c.max_rel_error for c in self.checks if c.check == check)


def _rel_err(got, expect) -> float:
    got = np.atleast_1d(np.asarray(got, dtype=float))
    expect = np.atleast_1d(np.asarray(expect, dtype=float))
    scale = max(float(np.max(np.abs(expect))), 1.0)
    return float(np.max(np.abs(got - expect))) / scale


def validate_model(
    model: SdeModel,
    probe_states,
    p: ParamPoint,
    *,
    h: float = 1e-5,
    tol: float = 1e-5,
    directions=None,
) -> ValidationReport:
    """Check the user-supplied derivatives against central finite differences.

    Every probe contributes one entry per capability; failing probes are
    recorded rather than raised, so the report shows the full picture.
    """
    probe_states = [np.asarray(x, dtype=float) for x in probe_states]
    if not probe_states:
        raise ValueError("probe_states must be nonempty")
    for x in probe_states:
        if x.shape != (model.dim,):
            raise ValueError(f"probe state has shape {x.shape}, expected ({model.dim},)")
        if not np.all(np.isfinite(x)):
            raise ValueError("probe states must be finite")
    require_param(model, p)
    if directions is None:
        directions = [np.cos(np.arange(model.dim) + 0.7 * i) + 0.1 for i in range(len(probe_states))]

    checks = []
    for i, (x, v) in enumerate(zip(probe_states, directions)):
        v = np.asarray(v, dtype=float)
        fd_jvp = (model.drift(x + h * v, p) - model.drift(x - h * v, p)) / (2.0 * h)
        checks.append(_entry(i, "drift_jvp", model.drift_jvp(x, v), fd_jvp, tol))

        fd_sgrad = (model.diffusion(x + h * v, p) - model.diffusion(x - h * v, p)) / (2.0 * h)
        checks.append(_entry(i, "diffusion_grad_dot", model.diffusion_grad_dot(x, v), fd_sgrad, tol))

        fd_fgamma = (model.drift(x, p.shifted(h)) - model.drift(x, p.shifted(-h))) / (2.0 * h)
        checks.append(_entry(i, "drift_dgamma", model.drift_dgamma(x, p), fd_fgamma, tol))

        fd_sgamma = (model.diffusion(x, p.shifted(h)) - model.diffusion(x, p.shifted(-h))) / (2.0 * h)
        checks.append(_entry(i, "diffusion_dgamma", model.diffusion_dgamma(x, p), fd_sgamma, tol))

    try:
        check_affine_initial_condition(model)
        checks.append(DerivativeCheck(0, "initial_affine", 0.0, True))
    except ModelValidationError:
        checks.append(DerivativeCheck(0, "initial_affine", float("inf"), False))
    return ValidationReport(checks=checks, tol=tol)


def _entry(i: int, name: str, got, expect, tol: float) -> DerivativeCheck:
    err = _rel_err(got, expect)
    return DerivativeCheck(i, name, err, err <= tol)
