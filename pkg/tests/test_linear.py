import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpm import systems
from lpm.errors import NotSplit, OutOfWindow
from lpm.linear import (
    LinearProcess,
    apply_L,
    certify_splitting,
    integrate_fundamental,
    moving_norm,
    n_norm,
    s_norm,
)
from lpm.problem import GridConfig

GRID = GridConfig(h=0.01, t_window=15.0, t_norm=6.0)


@pytest.fixture(scope="module")
def periodic_fb():
    return integrate_fundamental(systems.periodic_diag(0.3), 0.0, GRID)


@pytest.fixture(scope="module")
def diag_fb():
    return integrate_fundamental(systems.constant_diag(), 0.0, GRID)


def _exact_periodic(t, s):
    n = math.exp((t - s) - 0.5 * (math.cos(t) - math.cos(s)))
    m = math.exp(-(t - s) + 0.5 * (math.sin(t) - math.sin(s)))
    return np.diag([n, m])


@pytest.mark.parametrize("t, s", [(3.0, 0.0), (-4.0, 0.0), (2.5, -1.0), (1.234, 5.6789)])
def test_transition_matches_closed_form(periodic_fb, t, s):
    got = periodic_fb.transition(t, s)
    assert np.allclose(got, _exact_periodic(t, s), rtol=1e-9, atol=0)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_cocycle_property(periodic_fb, t, s, r):
    fb = periodic_fb
    lhs = fb.transition(t, s) @ fb.transition(s, r)
    assert np.allclose(lhs, fb.transition(t, r), rtol=1e-9, atol=1e-300)


def test_apply_L_and_out_of_window(periodic_fb):
    x = np.array([1.0, -2.0])
    assert np.allclose(apply_L(periodic_fb, 1.0, 0.0, x), _exact_periodic(1.0, 0.0) @ x, rtol=1e-9)
    with pytest.raises(OutOfWindow):
        apply_L(periodic_fb, 100.0, 0.0, x)
    with pytest.raises(OutOfWindow):
        periodic_fb.index_of(0.005)


def test_constant_blocks_have_unit_bound(diag_fb):
    cert = certify_splitting(diag_fb, 1.0, -1.0)
    assert cert.M == pytest.approx(1.0, abs=1e-9)
    assert cert.window_truncated


def test_periodic_bound_is_e(periodic_solver):
    assert periodic_solver.cert.M == pytest.approx(math.e, rel=1e-3)


def test_wrong_exponents_are_not_split(diag_fb):
    with pytest.raises(NotSplit):
        certify_splitting(diag_fb, 2.0, -1.0)
    with pytest.raises(NotSplit):
        certify_splitting(diag_fb, 1.0, -2.0)
    with pytest.raises(ValueError):
        certify_splitting(diag_fb, -1.0, 1.0)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_constant_norms_are_absolute_values(diag_fb, a, b):
    assert n_norm(diag_fb, 0.0, [a], -1.0)[0] == pytest.approx(abs(a), rel=1e-10, abs=1e-300)
    assert s_norm(diag_fb, 0.0, [b], 1.0)[0] == pytest.approx(abs(b), rel=1e-10, abs=1e-300)


@given(st.floats(-3, 3), st.sampled_from([-2.0, 0.0, 1.5]))
def test_node_norms_match_brute_force(periodic_fb, a, tau):
    fb = periodic_fb
    i = fb.index_of(tau)
    W = fb.window_steps
    tN = fb.t[i - W : i + 1]
    vN = [math.exp(-(t - tau)) * abs(fb.transition(t, tau, "N")[0, 0] * a) for t in tN]
    tS = fb.t[i : i + W + 1]
    vS = [math.exp(t - tau) * abs(fb.transition(t, tau, "S")[0, 0] * a) for t in tS]
    assert n_norm(fb, tau, [a], -1.0, strict=False)[0] == pytest.approx(max(vN), rel=1e-9, abs=1e-300)
    assert s_norm(fb, tau, [a], 1.0, strict=False)[0] == pytest.approx(max(vS), rel=1e-9, abs=1e-300)


def test_moving_norm_combines_parts(periodic_solver):
    s = periodic_solver
    x = np.array([0.7, -0.4])
    a = n_norm(s.fb, 0.0, x[:1], s.rho, strict=False)[0]
    b = s_norm(s.fb, 0.0, x[1:], s.gamma, strict=False)[0]
    assert moving_norm(s.fb, 0.0, x, s.cert, s.gnorm) == pytest.approx(max(a, b))
    # the splitting bound dominates the moving norm by the ambient one
    assert max(a, b) <= s.cert.M * np.max(np.abs(x)) * (1 + 1e-9)
    assert max(a, b) >= np.max(np.abs(x)) * (1 - 1e-12)


def test_linear_process_bundle():
    lp = LinearProcess(systems.constant_diag(), 0.0, GRID)
    assert (lp.gamma, lp.rho) == (1.0, -1.0)
    a, b = lp.component_norms(np.array([[2.0]]), np.array([[-3.0]]), [lp.fb.i_tau])
    assert a[0] == pytest.approx(2.0) and b[0] == pytest.approx(3.0)
