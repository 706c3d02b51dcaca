import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpm import cli, systems
from lpm.errors import MissingRequired, ParseError, RangeError, UnknownIdentifier, UnknownKey
from lpm.io import dumps_problem, load_problem, loads_problem, read_csv
from lpm.problem import AdmissibleNorm, GridConfig, ProblemSpec

EXAMPLES = Path(__file__).resolve().parent.parent / "examples_problems"

MINIMAL = """[system]
n = 2
k = 1
A11 = "1"
A22 = "-1"
f2 = "0.5*tanh(u1)"
lipschitz_l1 = 0
lipschitz_l2 = 0.5
"""


@pytest.mark.parametrize("path", sorted(EXAMPLES.glob("*.prob")), ids=lambda p: p.stem)
def test_examples_load_and_round_trip(path):
    spec, grid = load_problem(path)
    again = loads_problem(dumps_problem(spec, grid))
    assert again == (spec, grid)


def test_minimal_file_uses_defaults():
    spec, grid = loads_problem(MINIMAL)
    assert spec.A == (("1", "0"), ("0", "-1"))
    assert spec.f == ("0", "0.5*tanh(u1)")
    assert grid == GridConfig()


@pytest.mark.parametrize(
    "text, exc, line",
    [
        (MINIMAL + "bogus = 1\n", UnknownKey, 9),
        (MINIMAL + "[grid]\nh = -1\n", RangeError, None),
        (MINIMAL.replace("k = 1\n", ""), MissingRequired, None),
        (MINIMAL + "n = 3\n", ParseError, 9),
        (MINIMAL + "this line is junk\n", ParseError, 9),
        (MINIMAL.replace('"0.5*tanh(u1)"', '"0.5*tanh(v1)"'), UnknownIdentifier, 6),
        (MINIMAL + "[constants]\nu1 = 2\n", RangeError, 10),
        (MINIMAL + "[norms]\nambient = taxicab\n", RangeError, 10),
    ],
)
def test_errors_carry_line_numbers(text, exc, line):
    with pytest.raises(exc) as info:
        loads_problem(text)
    if line is not None:
        assert info.value.line == line
        assert f"line {line}" in str(info.value)


specs = st.builds(
    lambda eps, L1, L2, name, amb, g, h: (
        ProblemSpec(
            n=2, k=1, A=(("1 + eps*sin(t)", "0"), ("0", "-1")), f=("0", "eps*tanh(u1)"), L1=L1, L2=L2,
            gamma_rate=1.0, rho_rate=-1.0, constants=(("eps", eps),), name=name, ambient_norm=amb, gamma_norm=g,
        ),
        GridConfig(h=h),
    ),
    st.floats(-10, 10),
    st.floats(0, 5),
    st.floats(1e-6, 5),
    st.text("abcxyz_0123", min_size=1, max_size=10),
    st.sampled_from(["max", "sum", "euclid"]),
    st.sampled_from([AdmissibleNorm("max"), AdmissibleNorm("p", 1.0), AdmissibleNorm("p", 2.5)]),
    st.floats(1e-3, 0.1),
)


@given(specs)
def test_dump_load_round_trip(pair):
    spec, grid = pair
    assert loads_problem(dumps_problem(spec, grid)) == (spec, grid)


# -- command line ---------------------------------------------------------------------


def _run(*argv):
    return cli.main([str(a) for a in argv])


def _report(out):
    return json.loads((Path(out) / "report.json").read_text())


def test_check_gap_success_and_failure(tmp_path):
    assert _run("check-gap", EXAMPLES / "rotgap06.prob", "--out", tmp_path / "a") == cli.EXIT_OK
    gap = _report(tmp_path / "a")["canonical"]["gap"]
    assert gap["theta_star"] == pytest.approx(0.6)
    assert _run("check-gap", EXAMPLES / "rotgap10.prob", "--out", tmp_path / "b") == cli.EXIT_MATH
    assert _report(tmp_path / "b")["canonical"]["error"]["type"] == "GapFails"


def test_usage_and_file_errors_exit_one(tmp_path):
    assert _run("check-gap", tmp_path / "missing.prob", "--out", tmp_path / "a") == cli.EXIT_USAGE
    bad = tmp_path / "bad.prob"
    bad.write_text(MINIMAL + "bogus = 1\n")
    assert _run("check-gap", bad, "--out", tmp_path / "b") == cli.EXIT_USAGE
    assert _run("compute-manifold", EXAMPLES / "rotgap06.prob", "--q", "1:0", "--out", tmp_path / "c") == cli.EXIT_USAGE
    assert _run("no-such-command") == cli.EXIT_USAGE


def test_certify_splitting_with_wrong_exponent(tmp_path):
    rc = _run("certify-splitting", EXAMPLES / "constant_diag.prob", "--gamma", "2", "--out", tmp_path)
    assert rc == cli.EXIT_MATH
    assert _report(tmp_path)["canonical"]["error"]["type"] == "NotSplit"


def test_certify_periodic_bound(tmp_path):
    assert _run("certify-splitting", EXAMPLES / "periodic_diag.prob", "--out", tmp_path) == cli.EXIT_OK
    assert _report(tmp_path)["canonical"]["splitting"]["M"] == pytest.approx(np.e, rel=1e-3)


def test_compute_manifold_csv(tmp_path):
    rc = _run("compute-manifold", EXAMPLES / "rotgap06.prob", "--q", "-1:1:0.25", "--out", tmp_path)
    assert rc == cli.EXIT_OK
    cols = read_csv(tmp_path / "manifold.csv")
    q, s, err = (np.array(cols[key]) for key in ("q_1", "sigma_1", "apost_error"))
    assert q.size == 9
    assert np.all(np.abs(s - q / 3) <= err)


def test_compute_stable_and_derivative(tmp_path):
    assert _run("compute-stable", EXAMPLES / "tanhline.prob", "--p", "-1:1:1", "--out", tmp_path / "s") == 0
    cols = read_csv(tmp_path / "s" / "stable.csv")
    assert len(cols["tau"]) == 3
    assert _run("compute-derivative", EXAMPLES / "tanhline.prob", "--eta", "1,0", "--out", tmp_path / "d") == 0
    cols = read_csv(tmp_path / "d" / "derivative.csv")
    assert cols["col_1"][0] == pytest.approx(systems.tanhline_dsigma(1.0), abs=1e-4)


def test_canonical_output_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert _run("compute-manifold", EXAMPLES / "tanhline.prob", "--q", "-1:1:0.5", "--out", tmp_path / d) == 0
    a = (tmp_path / "a" / "canonical.json").read_bytes()
    b = (tmp_path / "b" / "canonical.json").read_bytes()
    assert a == b
    assert (tmp_path / "a" / "manifold.csv").read_bytes() == (tmp_path / "b" / "manifold.csv").read_bytes()


def test_parse_range():
    assert np.allclose(cli.parse_range("-1:1:0.5"), [-1, -0.5, 0, 0.5, 1])
    assert np.allclose(cli.parse_range("2"), [2.0])
