import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathkernel import (
    GaussModel,
    Lorenz96Model,
    ModelValidationError,
    OuModel,
    ParamPoint,
    as_param,
    check_affine_initial_condition,
    validate_model,
)
from pathkernel.model import require_param


class _BrokenJvp(Lorenz96Model):
    """Lorenz 96 with the drift JVP deliberately zeroed (injected fault)."""

    def drift_jvp(self, x, v):
        return np.zeros_like(v)


class _NonAffineIc(GaussModel):
    def initial_state(self, p):
        return np.full(self.dim, p.gamma**2)


def test_validate_lorenz96_passes():
    # origin state with the unit direction, plus a generic one
    model = Lorenz96Model()
    p = model.param_point(0.0)
    report = validate_model(
        model,
        [np.zeros(40), 2.0 * np.ones(40)],
        p,
        directions=[np.ones(40), np.cos(np.arange(40))],
    )
    assert report.passed
    assert report.max_rel_error("drift_jvp") < report.tol


def test_validate_flags_broken_jvp_without_raising():
    model = _BrokenJvp()
    report = validate_model(model, [np.ones(40)], model.param_point(0.0))
    assert not report.passed
    assert any(c.check == "drift_jvp" for c in report.failures())
    # the other derivative checks still pass
    assert report.max_rel_error("drift_dgamma") < report.tol


def test_constant_sigma_grad_check_is_exactly_zero():
    model = Lorenz96Model()
    report = validate_model(model, [np.ones(40)], model.param_point(0.0))
    assert report.max_rel_error("diffusion_grad_dot") == 0.0


def test_validate_rejects_bad_probes():
    model = GaussModel()
    with pytest.raises(ValueError):
        validate_model(model, [], model.param_point(0.0))
    with pytest.raises(ValueError):
        validate_model(model, [np.array([np.nan])], model.param_point(0.0))
    with pytest.raises(ValueError):
        validate_model(model, [np.zeros(3)], model.param_point(0.0))


@settings(max_examples=30, deadline=None)
@given(
    a=st.floats(-3, 3, allow_nan=False),
    b=st.floats(-3, 3, allow_nan=False),
    seed=st.integers(0, 1000),
)
def test_drift_jvp_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    model = Lorenz96Model(dim=8)
    x = rng.normal(size=8)
    v = rng.normal(size=8)
    w = rng.normal(size=8)
    lhs = model.drift_jvp(x, a * v + b * w)
    rhs = a * model.drift_jvp(x, v) + b * model.drift_jvp(x, w)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_diffusion_grad_dot_linearity():
    model = OuModel()
    x = np.array([0.3])
    assert model.diffusion_grad_dot(x, np.array([2.0])) == 0.0


@pytest.mark.parametrize("model", [Lorenz96Model(param="gamma2"), OuModel(), GaussModel(param="ic")])
def test_affine_initial_condition_accepted(model):
    check_affine_initial_condition(model)


def test_nonaffine_initial_condition_rejected():
    with pytest.raises(ModelValidationError):
        check_affine_initial_condition(_NonAffineIc(param="ic"))


def test_initial_state_matches_tangent_exactly():
    model = Lorenz96Model(param="gamma2")
    g = 0.7
    shifted = model.initial_state(model.param_point(g))
    base = model.initial_state(model.param_point(0.0))
    assert np.array_equal(shifted - base, g * model.initial_tangent())


def test_require_param_rejects_mismatch():
    model = OuModel(param="shift")
    with pytest.raises(ModelValidationError):
        require_param(model, ParamPoint(0.1, "scale"))
    p = as_param(model, 0.25)
    assert p == ParamPoint(0.25, "shift")


def test_param_point_shift():
    p = ParamPoint(0.1, "shift")
    assert p.shifted(0.05) == ParamPoint(0.15000000000000002, "shift")
    assert p.shifted(0.05).param_id == "shift"
