import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from lpm.errors import GapFails
from lpm.gap import (
    BRACKET_POINTS,
    find_sigma,
    gap_certificate,
    kappa_sigma_residual,
    kappa_theta_residual,
    theta,
)
from lpm.problem import AdmissibleNorm

MAX = AdmissibleNorm("max")
gnorms = st.sampled_from([AdmissibleNorm("max"), AdmissibleNorm("p", 1.0), AdmissibleNorm("p", 2.0)])


@st.composite
def gap_inputs(draw):
    rho = draw(st.floats(-3.0, 1.0))
    width = draw(st.floats(0.5, 4.0))
    L1 = draw(st.one_of(st.just(0.0), st.floats(0.0, 0.45 * width)))
    L2 = draw(st.floats(0.01 * width, 0.45 * width))
    return rho + width, rho, L1, L2, draw(gnorms)


def test_rotgap_closed_forms():
    c = gap_certificate(1.0, -1.0, 0.6, 0.6, MAX)
    assert c.sigma_star == pytest.approx(0.0, abs=1e-6)
    assert c.theta_star == pytest.approx(0.6, abs=1e-10)
    assert c.kappa == pytest.approx(1.0, abs=1e-5)
    assert c.kappa_sigma == pytest.approx(3 / 7, abs=1e-9)
    assert c.kappa_theta == pytest.approx(3 / 7, abs=1e-9)
    assert c.omega == pytest.approx(1 / 7, abs=1e-9)
    assert c.inertial


def test_zero_first_constant():
    c = gap_certificate(1.0, -1.0, 0.0, 0.5, MAX)
    assert c.kappa_infinite and c.as_dict()["kappa"] is None
    assert c.cone_kappa == pytest.approx(0.25, abs=1e-9)
    assert c.kappa_theta == 0.0
    assert c.omega == pytest.approx(0.5, abs=1e-9)


def test_gap_fails_at_the_threshold():
    with pytest.raises(GapFails):
        find_sigma(1.0, -1.0, 1.0, 1.0, MAX)
    with pytest.raises(GapFails):
        gap_certificate(1.0, -1.0, 0.0, 2.5, MAX)
    with pytest.raises(ValueError):
        find_sigma(-1.0, 1.0, 0.5, 0.5, MAX)


@given(gap_inputs())
def test_sigma_minimises_theta(inp):
    gamma, rho, L1, L2, g = inp
    try:
        s, th = find_sigma(gamma, rho, L1, L2, g)
    except GapFails:
        width = gamma - rho
        grid = rho + width * np.arange(1, BRACKET_POINTS + 1) / (BRACKET_POINTS + 1)
        assert np.min(theta(grid, gamma, rho, L1, L2, g)) >= 1 - 1e-12
        return
    assert rho < s < gamma
    assert th == pytest.approx(float(theta(s, gamma, rho, L1, L2, g)), rel=1e-14)
    # compare inside the bracket span (the infimum may sit at rho when L1 = 0)
    width = gamma - rho
    lo, hi = rho + width / (BRACKET_POINTS + 1), gamma - width / (BRACKET_POINTS + 1)
    grid = np.linspace(lo, hi, 1001)
    assert th <= np.min(theta(grid, gamma, rho, L1, L2, g)) + 1e-12


@given(gap_inputs())
def test_certificate_invariants(inp):
    gamma, rho, L1, L2, g = inp
    try:
        c = gap_certificate(gamma, rho, L1, L2, g)
    except GapFails:
        assume(False)
    width = gamma - rho
    assert rho < c.omega < gamma
    assert c.theta_star < 1
    assert kappa_sigma_residual(c.kappa_sigma, gamma, rho, L1, L2, g) == pytest.approx(0, abs=1e-9 * width)
    assert kappa_theta_residual(c.kappa_theta, gamma, rho, L1, L2, g) == pytest.approx(0, abs=1e-9 * width)
    assert c.kappa_sigma > 0
    if L1 == 0:
        assert c.kappa_infinite and c.kappa_theta == 0.0
    else:
        # the refined constants lie below the cone constant at sigma_star
        assert c.kappa_sigma <= c.kappa * (1 + 1e-6)
        assert c.kappa_theta <= (1 / c.kappa) * (1 + 1e-6)


@given(st.floats(0.05, 0.95))
def test_rotgap_theta_is_eps(eps):
    s, th = find_sigma(1.0, -1.0, eps, eps, MAX)
    assert th == pytest.approx(eps, rel=1e-9)
    assert s == pytest.approx(0.0, abs=1e-5)
    c = gap_certificate(1.0, -1.0, eps, eps, MAX)
    k = eps / (2 - eps)
    assert c.kappa_sigma == pytest.approx(k, rel=1e-8)
