import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpm import expr as ex
from lpm.errors import (
    EvalDomainError,
    ExprSyntaxError,
    IndexOutOfRange,
    NotDifferentiable,
    UnknownIdentifier,
)

N = 3

leaf = st.one_of(
    st.sampled_from(["t", "u1", "u2", "u3"]),
    st.floats(0.1, 3.0).map(lambda x: f"{x:.3f}"),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda p: f"({p[0]} {p[1]} {p[2]})"),
        st.tuples(st.sampled_from(["sin", "cos", "tanh"]), children).map(lambda p: f"{p[0]}({p[1]})"),
        children.map(lambda c: f"-{c}"),
        st.tuples(children, st.integers(1, 3)).map(lambda p: f"({p[0]})^{p[1]}"),
    )


smooth_exprs = st.recursive(leaf, _extend, max_leaves=8)
points = st.tuples(st.floats(-2, 2), st.lists(st.floats(-1.5, 1.5), min_size=N, max_size=N))


def test_precedence_and_associativity():
    e = ex.parse("-2^2", 1)
    assert ex.evaluate(e, 0.0) == -4.0
    assert ex.evaluate(ex.parse("2^3^2", 1), 0.0) == 2.0 ** 9
    assert ex.evaluate(ex.parse("1 - 2 - 3", 1), 0.0) == -4.0
    assert ex.evaluate(ex.parse("8 / 4 / 2", 1), 0.0) == 1.0
    assert ex.evaluate(ex.parse("2 + 3 * 4", 1), 0.0) == 14.0


def test_constants_and_state():
    e = ex.parse("eps*tanh(u1)", 2, {"eps": 0.5})
    assert ex.evaluate(e, 0.0, np.array([1.0, 0.0])) == pytest.approx(0.5 * math.tanh(1.0), abs=1e-15)
    assert ex.state_indices(e) == {1}
    assert ex.state_indices(ex.parse("t*u2 + u1", 2)) == {1, 2}


def test_errors_carry_positions():
    with pytest.raises(UnknownIdentifier) as info:
        ex.parse("1 + eps", 2)
    assert info.value.position == 4
    with pytest.raises(IndexOutOfRange):
        ex.parse("u3", 2)
    with pytest.raises(IndexOutOfRange):
        ex.parse("u0", 2)
    with pytest.raises(ExprSyntaxError):
        ex.parse("(1 + 2", 1)
    with pytest.raises(ExprSyntaxError):
        ex.parse("1 $ 2", 1)
    with pytest.raises(ExprSyntaxError):
        ex.parse("", 1)


@pytest.mark.parametrize(
    "src, x",
    [("1/u1", 0.0), ("log(u1)", 0.0), ("log(u1)", -1.0), ("sqrt(u1 - 1)", 0.0), ("u1^(-1)", 0.0), ("u1^0.5", -1.0)],
)
def test_domain_errors(src, x):
    with pytest.raises(EvalDomainError):
        ex.evaluate(ex.parse(src, 1), 0.0, np.array([x]))


def test_not_differentiable_points():
    for src in ("abs(u1)", "sqrt(u1)"):
        with pytest.raises(NotDifferentiable):
            ex.differentiate(ex.parse(src, 1), 0.0, np.array([0.0]))


def test_known_derivatives():
    v, g = ex.differentiate(ex.parse("u1*u2", 2), 0.0, np.array([3.0, 4.0]))
    assert v == 12.0 and np.allclose(g.ravel(), [4.0, 3.0])
    _, g = ex.differentiate(ex.parse("tanh(u1)", 1), 0.0, np.array([1.0]))
    assert float(g[0]) == pytest.approx(1 - math.tanh(1.0) ** 2, abs=1e-15)


@given(smooth_exprs)
def test_unparse_round_trip(src):
    e = ex.parse(src, N)
    text = ex.unparse(e)
    e2 = ex.parse(text, N)
    assert ex.unparse(e2) == text
    t, u = 0.3, np.array([0.2, -0.7, 1.1])
    assert ex.evaluate(e2, t, u) == pytest.approx(ex.evaluate(e, t, u), rel=1e-12, abs=1e-12)


@given(smooth_exprs, points)
def test_gradient_matches_central_differences(src, pt):
    e = ex.parse(src, N)
    t, u = pt[0], np.array(pt[1])
    val, grad = ex.differentiate(e, t, u)
    assert val == pytest.approx(ex.evaluate(e, t, u), rel=1e-12, abs=1e-12)
    step = 1e-6
    for i in range(N):
        d = np.zeros(N)
        d[i] = step
        fd = (ex.evaluate(e, t, u + d) - ex.evaluate(e, t, u - d)) / (2 * step)
        assert float(grad[i]) == pytest.approx(fd, rel=1e-5, abs=1e-5 * (1 + abs(val)))


@given(smooth_exprs)
def test_vectorised_matches_pointwise(src):
    e = ex.parse(src, N)
    rng = np.random.default_rng(0)
    t = rng.uniform(-1, 1, 5)
    u = rng.uniform(-1, 1, (5, N))
    vec = ex.evaluate(e, t, u)
    for i in range(5):
        assert vec[i] == pytest.approx(ex.evaluate(e, t[i], u[i]), rel=1e-13, abs=1e-13)
