import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpm import systems
from lpm.errors import MalformedExpression, NonBlockDiagonal, SpecRangeError, ZeroConditionViolated
from lpm.problem import AdmissibleNorm, GridConfig, ProblemSpec, estimate_lipschitz, validate_spec

norms = st.one_of(st.just(AdmissibleNorm("max")), st.floats(1.0, 8.0).map(lambda p: AdmissibleNorm("p", p)))
nonneg = st.floats(0.0, 1e3)


def _spec(**kw):
    base = dict(n=2, k=1, A=(("1", "0"), ("0", "-1")), f=("0", "0.5*tanh(u1)"), L1=0.0, L2=0.5,
                gamma_rate=1.0, rho_rate=-1.0)
    base.update(kw)
    return ProblemSpec(**base)


@given(norms, nonneg, nonneg, nonneg, nonneg)
def test_admissible_norm_axioms(g, a, b, c, d):
    assert g(a, b) >= 0
    assert g(a + c, b + d) <= g(a, b) + g(c, d) + 1e-9 * (1 + g(a, b) + g(c, d))
    assert g(2.5 * a, 2.5 * b) == pytest.approx(2.5 * g(a, b), rel=1e-12, abs=1e-300)
    assert g(max(a, c), max(b, d)) >= g(a, b) - 1e-12 * (1 + g(a, b))
    assert g(a, 0.0) == pytest.approx(a * g(1.0, 0.0), rel=1e-12, abs=1e-300)


def test_admissible_norm_parse():
    assert AdmissibleNorm.parse("max").label == "max"
    assert AdmissibleNorm.parse("sum")(3.0, 4.0) == 7.0
    assert AdmissibleNorm.parse("euclid")(3.0, 4.0) == pytest.approx(5.0)
    assert AdmissibleNorm.parse("3").label == "3.0"
    with pytest.raises(SpecRangeError):
        AdmissibleNorm.parse("0.5")
    with pytest.raises(SpecRangeError):
        AdmissibleNorm.parse("bogus")


def test_spec_validation_errors():
    with pytest.raises(SpecRangeError):
        _spec(L2=0.0)
    with pytest.raises(SpecRangeError):
        _spec(L1=-1.0)
    with pytest.raises(SpecRangeError):
        _spec(k=2)
    with pytest.raises(SpecRangeError):
        _spec(gamma_rate=-2.0)
    with pytest.raises(SpecRangeError):
        _spec(ambient_norm="l7")
    with pytest.raises(MalformedExpression):
        _spec(A=(("u1", "0"), ("0", "-1"))).A_exprs


def test_validate_spec():
    assert validate_spec(_spec()).ok
    with pytest.raises(NonBlockDiagonal) as info:
        validate_spec(_spec(A=(("1", "0.1*sin(t)"), ("0", "-1"))))
    assert not info.value.report.ok
    with pytest.raises(ZeroConditionViolated):
        validate_spec(_spec(f=("0", "cos(u1)")))


def test_eval_shapes_and_jacobian():
    s = systems.rotgap(0.6)
    t = np.linspace(0, 1, 7)
    assert s.eval_A(t).shape == (7, 2, 2)
    u = np.ones((7, 2))
    assert s.eval_f(t, u).shape == (7, 2)
    J = s.jac_f(t, u)
    assert np.allclose(J[3], [[0, -0.6], [0.6, 0]])


def test_rates_declared_and_inferred():
    assert systems.rotgap(0.6).rates() == (1.0, -1.0)
    s = _spec(A=(("2 + sin(t)", "0"), ("0", "-3")), gamma_rate=None, rho_rate=None)
    gamma, rho = s.rates()
    assert rho == pytest.approx(-2.0, abs=0.05)
    assert gamma == pytest.approx(3.0, abs=1e-12)


def test_grid_config_checks():
    with pytest.raises(SpecRangeError):
        GridConfig(h=0.0)
    with pytest.raises(SpecRangeError):
        GridConfig(t_norm=50.0, t_window=40.0)
    assert GridConfig(t_norm=None).norm_window(1.0, -1.0) == 15.0


@pytest.mark.parametrize("eps", [0.3, 0.6])
def test_estimate_lipschitz_is_a_lower_bound(eps):
    L1, L2 = estimate_lipschitz(systems.rotgap(eps), 2000, 2.0)
    assert L1 <= eps * (1 + 1e-9) and L2 <= eps * (1 + 1e-9)
    assert L1 >= 0.8 * eps and L2 >= 0.8 * eps


def test_estimate_lipschitz_tanhline():
    L1, L2 = estimate_lipschitz(systems.tanhline(0.5), 2000, 1.0)
    assert L1 == 0.0
    assert 0.45 <= L2 <= 0.5 + 1e-12
