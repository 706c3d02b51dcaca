import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpm import kernels, systems
from lpm.errors import NonContraction, TailTooLarge
from lpm.problem import GridConfig, ProblemSpec
from lpm.solver import LPSolver, sample_chart, solve_unstable

qs = st.floats(-3.0, 3.0)


def test_rotgap_graph_value(rotgap06):
    seg, val = rotgap06.solve_unstable(0.0, [1.0])
    d = seg.diagnostics
    assert val[0] == pytest.approx(1 / 3, abs=1e-4)
    assert abs(val[0] - 1 / 3) <= d.apost_error
    assert d.tail_bound <= rotgap06.grid.tail_tol
    assert d.truncation_suspects == 0
    assert seg.direction == "backward" and seg.t[-1] == 0.0


def test_rotgap_stable_graph_value(rotgap06):
    seg, val = rotgap06.solve_stable(0.0, [0.0, 1.0])
    assert val[0] == pytest.approx(1 / 3, abs=1e-4)
    assert abs(val[0] - 1 / 3) <= seg.diagnostics.apost_error
    assert rotgap06.theta(0.0, 1.0)[0] == pytest.approx(val[0], abs=1e-9)


def test_zero_nonlinearity_gives_zero_graphs(constant_solver):
    seg, val = constant_solver.solve_unstable(0.0, [2.0])
    assert np.all(val == 0.0)
    assert seg.diagnostics.disc_error == 0.0
    _, th = constant_solver.solve_stable(0.0, [0.0, 2.0])
    assert np.all(th == 0.0)


def test_only_first_block_of_eta_matters(rotgap06):
    a = rotgap06.solve_unstable(0.0, [0.7, 5.0])[1]
    b = rotgap06.solve_unstable(0.0, [0.7, -3.0])[1]
    assert np.array_equal(a, b)


@pytest.mark.parametrize("solver", ["rotgap06", "tanh_solver", "periodic_solver"])
def test_zero_is_preserved(request, solver):
    s = request.getfixturevalue(solver)
    seg, val = s.solve_unstable(0.0, [0.0])
    assert np.all(seg.values == 0.0) and np.all(val == 0.0)


@given(qs)
@settings(max_examples=15)
def test_rotgap_graph_is_linear(rotgap06, q):
    val = rotgap06.sigma(0.0, q)[0]
    assert val == pytest.approx(q * rotgap06.sigma(0.0, 1.0)[0], rel=1e-8, abs=1e-9)


@given(qs)
@settings(max_examples=15)
def test_fixed_point_residual_and_ratios(tanh_solver, q):
    s = tanh_solver
    seg, _ = s.solve_unstable(0.0, [q], discretization_check=False)
    fb, idx = s.fb, seg.idx
    bN, fS = fb.bwd_N[idx[0] : idx[-1]], fb.fwd_S[idx[0] : idx[-1]]
    aN = kernels.propagate_backward(bN, np.array([[q]]))[:, :, 0]
    op = s._unstable_op(seg.t, bN, fS, fb.h, aN)
    res = s.weighted_norm(op(seg.values) - seg.values, idx, 0.0, seg.sigma)
    assert res <= 2 * s.grid.tol_fixed_point * max(1.0, abs(q) * s.cert.M)
    th = s.gap.theta_star
    assert all(r <= th + 0.05 for r in seg.diagnostics.ratios[1:])


def test_rotgap_chart(rotgap06):
    pts = np.arange(-2.0, 3.0)[:, None]
    chart = rotgap06.sample_chart(0.0, pts)
    assert len(chart) == 5 and not chart.errors and not chart.invariant_violations
    assert np.allclose(chart.images[:, 0], pts[:, 0] / 3, atol=2e-4)
    empty = rotgap06.sample_chart(0.0, [])
    assert len(empty) == 0 and empty.images.shape == (0, 1)


def test_tanhline_chart_matches_closed_form(tanh_solver):
    pts = np.array([[0.5], [1.0], [2.0]])
    chart = tanh_solver.sample_chart(0.0, pts, workers=2)
    for q, img, d in zip(pts[:, 0], chart.images[:, 0], chart.diagnostics):
        exact = systems.tanhline_sigma(q)
        assert abs(img - exact) <= d.apost_error
        assert abs(img - exact) <= 1e-4


def test_tanhline_stable_graph_is_zero(tanh_solver):
    seg, val = tanh_solver.solve_stable(0.0, [0.0, 1.5])
    assert val[0] == 0.0
    assert seg.diagnostics.tail_bound == 0.0


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0])
def test_derivative_matches_closed_form_and_differences(tanh_solver, q):
    seg, dsig = tanh_solver.solve_derivative(0.0, [q, 0.0])
    assert dsig.shape == (1, 2) and dsig[0, 1] == 0.0
    assert dsig[0, 0] == pytest.approx(systems.tanhline_dsigma(q), abs=1e-4)
    step = 1e-4
    fd = (tanh_solver.sigma(0.0, q + step)[0] - tanh_solver.sigma(0.0, q - step)[0]) / (2 * step)
    assert dsig[0, 0] == pytest.approx(fd, rel=1e-4)
    assert seg.values.shape[1:] == (2, 1)


def test_functional_interface_matches(rotgap06):
    s = rotgap06
    seg, val = solve_unstable(s.spec, s.fb, s.cert, s.gap, 0.0, [1.0], s.grid)
    assert np.array_equal(val, s.solve_unstable(0.0, [1.0])[1])
    chart = sample_chart(s.spec, s.fb, s.cert, s.gap, 0.0, [[1.0]], s.grid)
    assert chart.images[0, 0] == pytest.approx(val[0])


def test_understated_lipschitz_constant_is_detected():
    spec = ProblemSpec(
        n=2, k=1, A=(("1", "0"), ("0", "-1")), f=("eps*(-u2)", "eps*u1"), L1=0.2, L2=0.2,
        gamma_rate=1.0, rho_rate=-1.0, constants=(("eps", 0.97),),
    )
    with pytest.raises(NonContraction):
        LPSolver(spec).solve_unstable(0.0, [1.0])


def test_short_window_tail_is_rejected():
    s = LPSolver(systems.rotgap(0.6), GridConfig(t_window=3.0, t_norm=2.0))
    with pytest.raises(TailTooLarge):
        s.solve_unstable(0.0, [1.0])


def test_projections(rotgap06):
    assert np.allclose(rotgap06.project_sigma(0.0, [1.0, 5.0]), [1.0, 1 / 3], atol=1e-4)
    assert np.allclose(rotgap06.project_theta(0.0, [5.0, 1.0]), [1 / 3, 1.0], atol=1e-4)


def test_diagnostics_serialise(rotgap06):
    seg, _ = rotgap06.solve_unstable(0.0, [1.0])
    d = seg.diagnostics.as_dict()
    assert d["apost_error"] == pytest.approx(d["contraction_term"] + d["tail_bound"] + d["disc_error"])
    assert d["iterations"] == len(seg.diagnostics.increments)
