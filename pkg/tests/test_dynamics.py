import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpm import systems
from lpm.dynamics import integrate_process, project_P_sigma, project_P_theta
from lpm.errors import StateOverflow
from lpm.problem import GridConfig, ProblemSpec

vec = st.tuples(st.floats(-2, 2), st.floats(-2, 2)).map(np.array)


def _periodic_linear():
    return ProblemSpec(
        n=2, k=1, A=(("1 + 0.5*sin(t)", "0"), ("0", "-1 + 0.5*cos(t)")), f=("0", "0"), L1=0.0, L2=1e-3,
        gamma_rate=1.0, rho_rate=-1.0,
    )


def test_linear_flow_matches_fundamental_matrix():
    spec = _periodic_linear()
    eta = np.array([0.3, -1.2])
    fs = integrate_process(spec, 0.5, eta, 6.5)
    t = fs.t
    exact = np.stack([
        eta[0] * np.exp((t - 0.5) - 0.5 * (np.cos(t) - math.cos(0.5))),
        eta[1] * np.exp(-(t - 0.5) + 0.5 * (np.sin(t) - math.sin(0.5))),
    ], axis=1)
    assert np.all(np.abs(fs.states - exact) <= 1e-8 * np.abs(exact))


def test_rotgap_eigenline_is_invariant():
    eta = np.array([1.0, 1 / 3])
    fs = integrate_process(systems.rotgap(0.6), 0.0, eta, 5.0)
    ratio = fs.states[:, 1] / fs.states[:, 0]
    assert np.allclose(ratio, 1 / 3, atol=1e-10)
    rate = math.log(fs.states[-1, 0] / fs.states[0, 0]) / 5.0
    assert rate == pytest.approx(0.8, abs=1e-9)


def test_zero_stays_zero():
    fs = integrate_process(systems.tanhline(0.5), 0.0, [0.0, 0.0], 3.0)
    assert np.all(fs.states == 0.0)
    assert fs.duhamel_residual == 0.0


@given(vec, st.sampled_from([0.5, 1.0, 2.3]))
@settings(max_examples=15)
def test_process_property(eta, s):
    spec = systems.tanhline(0.5)
    whole = integrate_process(spec, 0.0, eta, 4.0, duhamel_check=False)
    mid = whole.at(s)
    rest = integrate_process(spec, s, mid, 4.0, duhamel_check=False)
    ref = whole.at(4.0)
    assert np.all(np.abs(rest.at(4.0) - ref) <= 1e-7 * np.maximum(1.0, np.abs(ref)))


@given(vec, vec, st.floats(-2, 2))
@settings(max_examples=10)
def test_linear_superposition(a, b, c):
    spec = systems.rotgap(0.6)
    fa = integrate_process(spec, 0.0, a, 2.0, duhamel_check=False).states
    fb = integrate_process(spec, 0.0, b, 2.0, duhamel_check=False).states
    fc = integrate_process(spec, 0.0, a + c * b, 2.0, duhamel_check=False).states
    assert np.allclose(fc, fa + c * fb, rtol=1e-10, atol=1e-10)


def test_variation_of_constants_agrees():
    fs = integrate_process(systems.periodic_diag(0.3), 0.0, [1.0, -0.5], 4.0)
    assert fs.duhamel_ok
    assert fs.duhamel_residual <= 1e-5 * fs.duhamel_scale


def test_step_doubling_estimate_tracks_the_error():
    fs = integrate_process(systems.constant_diag(), 0.0, [1.0, 0.0], 3.0, GridConfig(h=0.1))
    err = abs(fs.states[-1, 0] - math.exp(3.0))
    assert 0.5 * err <= fs.error_estimate[-1] <= 2.0 * err


def test_overflow_is_reported():
    spec = ProblemSpec(
        n=2, k=1, A=(("40", "0"), ("0", "-1")), f=("0", "0"), L1=0.0, L2=1e-3,
        gamma_rate=1.0, rho_rate=-1.0,
    )
    with pytest.raises(StateOverflow):
        integrate_process(spec, 0.0, [1.0, 0.0], 1.0)


def test_argument_checks():
    spec = systems.rotgap(0.6)
    with pytest.raises(ValueError):
        integrate_process(spec, 1.0, [1.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        integrate_process(spec, 0.0, [1.0], 1.0)
    fs = integrate_process(spec, 0.0, [1.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        fs.at(0.005)


def test_graph_projections(rotgap06):
    assert np.allclose(project_P_sigma(rotgap06, 0.0, [1.0, 5.0]), [1.0, 1 / 3], atol=1e-4)
    assert np.allclose(project_P_theta(rotgap06, 0.0, [5.0, 1.0]), [1 / 3, 1.0], atol=1e-4)
    p = project_P_sigma(rotgap06, 0.0, [2.0, 0.0])
    assert np.allclose(project_P_sigma(rotgap06, 0.0, p), p, atol=1e-9)
