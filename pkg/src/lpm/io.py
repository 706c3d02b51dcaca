"""Problem files, run reports and CSV exports.

Problem file format (line oriented, ``#`` starts a comment)::

    [system]  n = 2  k = 1
    A11 = "1"  A22 = "-1"
    f1 = "eps*(-u2)"  f2 = "eps*u1"
    lipschitz_l1 = 0.6  lipschitz_l2 = 0.6
    [constants] eps = 0.6
    [norms]  ambient = max  gamma = max
    [grid]   h = 0.01  t_window = 40  t_norm = 20

A line holds any number of ``key = value`` pairs and may start with a
section header.  Expressions are quoted; missing ``A`` and ``f`` entries are
``"0"``.  Constants may be defined anywhere in the file.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import expr as ex
from .errors import ExprError, MissingRequired, ParseError, RangeError, SpecRangeError, UnknownKey
from .problem import AMBIENT_NORMS, AdmissibleNorm, GridConfig, ProblemSpec

SECTIONS = ("system", "norms", "grid", "constants")
_HEADER = re.compile(r"\s*\[\s*([A-Za-z_]\w*)\s*\]")
_PAIR = re.compile(r"\s*([A-Za-z_]\w*)\s*=\s*(\"[^\"]*\"|'[^']*'|[^\s\"'=]+)")
_A_KEY = re.compile(r"A(\d)(\d)$|A(\d+)_(\d+)$")
_F_KEY = re.compile(r"f(\d+)$")
_SYSTEM_SCALARS = {"n", "k", "name", "lipschitz_l1", "lipschitz_l2", "gamma_rate", "rho_rate"}
_GRID_KEYS = {f.name for f in fields(GridConfig)}
_RESERVED = set(ex.FUNCTIONS) | {"t"}


def _strip_comment(line):
    out, quote = [], None
    for ch in line:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out)


def _tokenize(text):
    """Yield ``(section, key, raw_value, quoted, line)`` entries."""
    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        pos = 0
        m = _HEADER.match(line)
        if m:
            section = m.group(1).lower()
            if section not in SECTIONS:
                raise UnknownKey(f"unknown section [{m.group(1)}]", ln)
            pos = m.end()
        while pos < len(line):
            if not line[pos:].strip():
                break
            m = _PAIR.match(line, pos)
            if not m:
                raise ParseError(f"cannot parse {line[pos:].strip()!r}; expected key = value", ln)
            if section is None:
                raise ParseError("key outside of any section", ln)
            val = m.group(2)
            quoted = val[0] in "\"'"
            yield section, m.group(1), val[1:-1] if quoted else val, quoted, ln
            pos = m.end()


def _number(val, key, ln, kind=float):
    try:
        x = kind(val)
    except ValueError:
        raise ParseError(f"{key} expects a number, got {val!r}", ln) from None
    if kind is float and not math.isfinite(x):
        raise RangeError(f"{key} must be finite", ln)
    return x


def loads_problem(text: str):
    """Parse problem-file text; see :func:`load_problem`."""
    entries = list(_tokenize(text))
    seen = {}
    for sec, key, _, _, ln in entries:
        if (sec, key) in seen:
            raise ParseError(f"duplicate key {key!r} (first on line {seen[sec, key]})", ln)
        seen[sec, key] = ln

    constants = {}
    for sec, key, val, _, ln in entries:
        if sec != "constants":
            continue
        if re.fullmatch(r"u\d+", key) or key in _RESERVED:
            raise RangeError(f"constant name {key!r} is reserved", ln)
        constants[key] = _number(val, key, ln)

    system, norms, grid = {}, {}, {}
    a_src, f_src = {}, {}
    for sec, key, val, _, ln in entries:
        if sec == "system":
            am, fm = _A_KEY.match(key), _F_KEY.match(key)
            if am:
                i, j = (am.group(1), am.group(2)) if am.group(1) else (am.group(3), am.group(4))
                a_src[int(i), int(j)] = (val, ln)
            elif fm:
                f_src[int(fm.group(1))] = (val, ln)
            elif key in _SYSTEM_SCALARS:
                system[key] = (val, ln)
            else:
                raise UnknownKey(f"unknown key {key!r} in [system]", ln)
        elif sec == "norms":
            if key not in ("ambient", "gamma"):
                raise UnknownKey(f"unknown key {key!r} in [norms]", ln)
            norms[key] = (val, ln)
        elif sec == "grid":
            if key not in _GRID_KEYS:
                raise UnknownKey(f"unknown key {key!r} in [grid]", ln)
            grid[key] = (val, ln)

    for key in ("n", "k", "lipschitz_l1", "lipschitz_l2"):
        if key not in system:
            raise MissingRequired(f"missing required key {key!r} in [system]")
    n = _number(system["n"][0], "n", system["n"][1], int)
    k = _number(system["k"][0], "k", system["k"][1], int)
    if n < 2:
        raise RangeError("n must be >= 2", system["n"][1])
    if not 1 <= k <= n - 1:
        raise RangeError("k must satisfy 1 <= k <= n-1", system["k"][1])
    L1 = _number(system["lipschitz_l1"][0], "lipschitz_l1", system["lipschitz_l1"][1])
    L2 = _number(system["lipschitz_l2"][0], "lipschitz_l2", system["lipschitz_l2"][1])
    if L1 < 0:
        raise RangeError("lipschitz_l1 must be >= 0", system["lipschitz_l1"][1])
    if not L2 > 0:
        raise RangeError("lipschitz_l2 must be > 0", system["lipschitz_l2"][1])

    for (i, j), (_, ln) in a_src.items():
        if not (1 <= i <= n and 1 <= j <= n):
            raise RangeError(f"A{i}{j} outside the {n}x{n} matrix", ln)
    for i, (_, ln) in f_src.items():
        if not 1 <= i <= n:
            raise RangeError(f"f{i} outside 1..{n}", ln)

    def check(src, ln):
        try:
            ex.parse(src, n, constants)
        except ExprError as e:
            err = type(e)(f"line {ln}: {e}")
            err.position = e.position
            err.line = ln
            raise err from None
        return src

    A = tuple(tuple(check(*a_src[i, j]) if (i, j) in a_src else "0" for j in range(1, n + 1)) for i in range(1, n + 1))
    f = tuple(check(*f_src[i]) if i in f_src else "0" for i in range(1, n + 1))

    kw = {}
    for key in ("gamma_rate", "rho_rate"):
        if key in system:
            kw[key] = _number(system[key][0], key, system[key][1])
    if "name" in system:
        kw["name"] = system["name"][0]
    if "ambient" in norms:
        val, ln = norms["ambient"]
        if val.lower() not in AMBIENT_NORMS:
            raise RangeError(f"ambient norm must be one of {AMBIENT_NORMS}", ln)
        kw["ambient_norm"] = val.lower()
    if "gamma" in norms:
        val, ln = norms["gamma"]
        try:
            kw["gamma_norm"] = AdmissibleNorm.parse(val)
        except SpecRangeError as e:
            raise RangeError(str(e), ln) from None
    try:
        spec = ProblemSpec(n=n, k=k, A=A, f=f, L1=L1, L2=L2, constants=tuple(constants.items()), **kw)
    except SpecRangeError as e:
        raise RangeError(str(e)) from None

    gkw = {}
    for key, (val, ln) in grid.items():
        if key == "t_norm" and val.lower() in ("auto", "none"):
            gkw[key] = None
        elif key in ("rk4_substeps", "max_iter"):
            gkw[key] = _number(val, key, ln, int)
        else:
            gkw[key] = _number(val, key, ln)
    try:
        cfg = GridConfig(**gkw)
    except SpecRangeError as e:
        raise RangeError(str(e)) from None
    return spec, cfg


def load_problem(path):
    """Read a problem file.

    Returns
    -------
    spec : ProblemSpec
    grid : GridConfig

    Raises
    ------
    ParseError, UnknownKey, MissingRequired, RangeError
        With 1-based line numbers where applicable.
    UnknownIdentifier, ExprSyntaxError, IndexOutOfRange
        For bad expressions; the message and ``line`` attribute carry the line.
    """
    return loads_problem(Path(path).read_text())


def _q(s):
    return '"' + s + '"'


def dumps_problem(spec: ProblemSpec, grid: GridConfig | None = None) -> str:
    """Serialise so that :func:`loads_problem` restores equal objects."""
    out = ["[system]", f"n = {spec.n}", f"k = {spec.k}", f"name = {_q(spec.name)}"]
    for i, row in enumerate(spec.A, start=1):
        for j, src in enumerate(row, start=1):
            key = f"A{i}{j}" if spec.n <= 9 else f"A{i}_{j}"
            out.append(f"{key} = {_q(src)}")
    for i, src in enumerate(spec.f, start=1):
        out.append(f"f{i} = {_q(src)}")
    out.append(f"lipschitz_l1 = {spec.L1!r}")
    out.append(f"lipschitz_l2 = {spec.L2!r}")
    if spec.gamma_rate is not None:
        out.append(f"gamma_rate = {spec.gamma_rate!r}")
        out.append(f"rho_rate = {spec.rho_rate!r}")
    if spec.constants:
        out.append("[constants]")
        out.extend(f"{name} = {val!r}" for name, val in spec.constants)
    out += ["[norms]", f"ambient = {spec.ambient_norm}", f"gamma = {spec.gamma_norm.label}"]
    if grid is not None:
        out.append("[grid]")
        for key, val in asdict(grid).items():
            out.append(f"{key} = {'auto' if val is None else repr(val)}")
    return "\n".join(out) + "\n"


def save_problem(spec: ProblemSpec, path, grid: GridConfig | None = None):
    Path(path).write_text(dumps_problem(spec, grid))


# -- reports ---------------------------------------------------------------------


def spec_echo(spec: ProblemSpec) -> dict:
    return {
        "name": spec.name,
        "n": spec.n,
        "k": spec.k,
        "A": [list(r) for r in spec.A],
        "f": list(spec.f),
        "L1": spec.L1,
        "L2": spec.L2,
        "ambient_norm": spec.ambient_norm,
        "gamma_norm": spec.gamma_norm.label,
        "gamma_rate": spec.gamma_rate,
        "rho_rate": spec.rho_rate,
        "constants": dict(spec.constants),
    }


def jsonable(obj):
    """Convert numpy types and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


class RunReport:
    """Report of one CLI run.

    ``canonical`` holds everything that depends only on inputs and version;
    wall-clock timings live in ``timings`` and are excluded from
    :meth:`canonical_bytes`.
    """

    def __init__(self, command, spec=None, grid=None):
        self.canonical = {"tool": "lpm", "version": __version__, "command": command, "status": "ok"}
        if spec is not None:
            self.canonical["problem"] = spec_echo(spec)
        if grid is not None:
            self.canonical["grid"] = asdict(grid)
        self.timings = {}

    def __setitem__(self, key, value):
        self.canonical[key] = value

    def __getitem__(self, key):
        return self.canonical[key]

    def fail(self, exc):
        self.canonical["status"] = "error"
        self.canonical["error"] = {"type": type(exc).__name__, "message": str(exc)}

    def canonical_bytes(self) -> bytes:
        return (json.dumps(jsonable(self.canonical), sort_keys=True, indent=2) + "\n").encode()

    def to_bytes(self) -> bytes:
        doc = {"canonical": jsonable(self.canonical), "timings": jsonable(self.timings)}
        return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode()

    def write(self, out_dir):
        """Write ``report.json`` (both sections) and ``canonical.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_bytes(self.to_bytes())
        (out / "canonical.json").write_bytes(self.canonical_bytes())
        return out / "report.json"


# -- CSV -------------------------------------------------------------------------


def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_chart_csv(chart, path, prefix=("q", "sigma")):
    """Chart rows: ``tau, q_1..q_k, sigma_1..sigma_m, iterations, apost_error, tail_bound``."""
    k = chart.base_points.shape[1] if chart.base_points.ndim == 2 else 1
    m = chart.images.shape[1] if chart.images.ndim == 2 else 1
    head = ["tau"] + [f"{prefix[0]}_{i + 1}" for i in range(k)] + [f"{prefix[1]}_{i + 1}" for i in range(m)]
    head += ["iterations", "apost_error", "tail_bound"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(head)
        for q, img, d in zip(chart.base_points, chart.images, chart.diagnostics):
            tail = [d.iterations, _fmt(d.apost_error), _fmt(d.tail_bound)] if d else ["", "nan", "nan"]
            w.writerow([_fmt(chart.tau)] + [_fmt(v) for v in q] + [_fmt(v) for v in img] + tail)
    return Path(path)


def write_matrix_csv(M, path, row_prefix="row"):
    M = np.atleast_2d(M)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([row_prefix] + [f"col_{j + 1}" for j in range(M.shape[1])])
        for i, row in enumerate(M, start=1):
            w.writerow([i] + [_fmt(v) for v in row])
    return Path(path)


def write_flow_csv(flow, path):
    """FlowSample rows: ``t, u_1..u_n, error_estimate``."""
    n = flow.states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"u_{i + 1}" for i in range(n)] + ["error_estimate"])
        for t, x, e in zip(flow.t, flow.states, flow.error_estimate):
            w.writerow([_fmt(t)] + [_fmt(v) for v in x] + [_fmt(e)])
    return Path(path)


def read_csv(path):
    """Read a CSV written by this module into a dict of columns (floats where possible)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {}
    for key in rows[0].keys() if rows else []:
        vals = []
        for r in rows:
            try:
                vals.append(float(r[key]))
            except ValueError:
                vals.append(r[key])
        cols[key] = vals
    return cols
