"""Problem data: the semilinear system, admissible norms and grid settings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import expr as ex
from .errors import (
    MalformedExpression,
    NonBlockDiagonal,
    SpecRangeError,
    ZeroConditionViolated,
)

AMBIENT_NORMS = ("max", "sum", "euclid")


@dataclass(frozen=True)
class AdmissibleNorm:
    """Norm ``Gamma`` on the plane used to combine the two component norms.

    Parameters
    ----------
    kind : {"p", "max"}
    p : float
        Exponent of the p-norm (``p >= 1``); ignored for ``"max"``.
    """

    kind: str = "max"
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("p", "max"):
            raise SpecRangeError(f"unknown admissible norm kind {self.kind!r}")
        if self.kind == "p" and not (self.p >= 1.0 and math.isfinite(self.p)):
            raise SpecRangeError(f"p-norm needs finite p >= 1, got {self.p}")

    @classmethod
    def parse(cls, text) -> "AdmissibleNorm":
        """Build from ``"max"``, ``"sum"``, ``"euclid"`` or a number ``p``."""
        s = str(text).strip().lower()
        if s in ("max", "inf", "maximum"):
            return cls("max")
        if s in ("sum", "1"):
            return cls("p", 1.0)
        if s in ("euclid", "2"):
            return cls("p", 2.0)
        try:
            return cls("p", float(s))
        except ValueError:
            raise SpecRangeError(f"unknown admissible norm {text!r}") from None

    @property
    def label(self) -> str:
        if self.kind == "max":
            return "max"
        if self.p == 1.0:
            return "sum"
        if self.p == 2.0:
            return "euclid"
        return repr(self.p)

    @property
    def c_gamma(self) -> float:
        """Constant with ``|a| + |b| <= c_gamma * Gamma(a, b)``."""
        if self.kind == "max":
            return 2.0
        return 2.0 ** (1.0 - 1.0 / self.p)

    def __call__(self, a, b):
        a = np.abs(a)
        b = np.abs(b)
        if self.kind == "max":
            return np.maximum(a, b)
        if self.p == 1.0:
            return a + b
        if self.p == 2.0:
            return np.hypot(a, b)
        m = np.maximum(a, b)
        safe = np.where(m > 0, m, 1.0)
        return np.where(m > 0, safe * ((a / safe) ** self.p + (b / safe) ** self.p) ** (1.0 / self.p), 0.0)


@dataclass(frozen=True)
class GridConfig:
    """Discretisation settings.

    ``t_norm = None`` means ``30 / (gamma - rho)`` once the exponents are
    known (see :meth:`norm_window`).
    """

    h: float = 0.01
    t_window: float = 40.0
    t_norm: float | None = 20.0
    tol_fixed_point: float = 1e-10
    tail_tol: float = 1e-8
    rk4_substeps: int = 4
    max_iter: int = 2000

    def __post_init__(self):
        if not self.h > 0:
            raise SpecRangeError("h must be positive")
        if not self.t_window > 0:
            raise SpecRangeError("t_window must be positive")
        if self.t_norm is not None and not (0 < self.t_norm <= self.t_window):
            raise SpecRangeError("need 0 < t_norm <= t_window")
        if not (self.tol_fixed_point > 0 and self.tail_tol > 0):
            raise SpecRangeError("tolerances must be positive")
        if self.rk4_substeps < 1 or self.max_iter < 1:
            raise SpecRangeError("rk4_substeps and max_iter must be >= 1")

    def norm_window(self, gamma, rho) -> float:
        if self.t_norm is not None:
            return float(self.t_norm)
        return min(30.0 / (gamma - rho), self.t_window)

    def steps(self, length) -> int:
        return int(round(length / self.h))


@dataclass(frozen=True)
class ProblemSpec:
    """Semilinear system ``u' = A(t) u + f(t, u)`` in adapted coordinates.

    Parameters
    ----------
    n, k : int
        State dimension and dimension of the first (unstable) block.
    A : tuple of tuple of str
        ``n x n`` entries of ``A(t)``; may only depend on ``t``.
    f : tuple of str
        ``n`` components of the nonlinearity.
    L1, L2 : float
        Declared Lipschitz constants of the two components of ``f``.
    ambient_norm : {"max", "sum", "euclid"}
    gamma_norm : AdmissibleNorm
    gamma_rate, rho_rate : float, optional
        Splitting exponents.  When omitted they are estimated from the
        averaged diagonal blocks (see :meth:`rates`).
    constants : tuple of (str, float)
        Named constants substituted into the expressions.
    name : str
        Identifier used in reports.
    """

    n: int
    k: int
    A: tuple
    f: tuple
    L1: float
    L2: float
    ambient_norm: str = "max"
    gamma_norm: AdmissibleNorm = field(default_factory=AdmissibleNorm)
    gamma_rate: float | None = None
    rho_rate: float | None = None
    constants: tuple = ()
    name: str = "system"

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 2):
            raise SpecRangeError("n must be an integer >= 2")
        if not (isinstance(self.k, int) and 1 <= self.k <= self.n - 1):
            raise SpecRangeError("k must satisfy 1 <= k <= n-1")
        if len(self.A) != self.n or any(len(r) != self.n for r in self.A):
            raise SpecRangeError("A must be an n x n table of expressions")
        if len(self.f) != self.n:
            raise SpecRangeError("f must have n components")
        if not (self.L1 >= 0):
            raise SpecRangeError("L1 must be >= 0")
        if not (self.L2 > 0):
            raise SpecRangeError("L2 must be > 0")
        if self.ambient_norm not in AMBIENT_NORMS:
            raise SpecRangeError(f"ambient norm must be one of {AMBIENT_NORMS}")
        if (self.gamma_rate is None) != (self.rho_rate is None):
            raise SpecRangeError("give both gamma_rate and rho_rate or neither")
        if self.gamma_rate is not None and not self.gamma_rate > self.rho_rate:
            raise SpecRangeError("need gamma_rate > rho_rate")

    @property
    def m(self) -> int:
        return self.n - self.k

    @cached_property
    def constant_map(self) -> dict:
        return dict(self.constants)

    @cached_property
    def A_exprs(self):
        out = []
        for i, row in enumerate(self.A):
            prow = []
            for j, src in enumerate(row):
                e = ex.parse(src, self.n, self.constant_map)
                if ex.state_indices(e):
                    raise MalformedExpression(f"A{i + 1}{j + 1} may depend only on t")
                prow.append(e)
            out.append(prow)
        return out

    @cached_property
    def f_exprs(self):
        return [ex.parse(src, self.n, self.constant_map) for src in self.f]

    @cached_property
    def f_is_zero(self) -> bool:
        return all(isinstance(e, ex.Num) and e.value == 0.0 for e in self.f_exprs)

    def eval_A(self, t) -> np.ndarray:
        """``A`` at times ``t``; returns shape ``t.shape + (n, n)``."""
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (self.n, self.n))
        for i, row in enumerate(self.A_exprs):
            for j, e in enumerate(row):
                out[..., i, j] = ex.evaluate(e, t)
        return out

    def eval_f(self, t, u) -> np.ndarray:
        """``f`` at times ``t`` and states ``u`` (last axis ``n``)."""
        u = np.asarray(u, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(t.shape, u.shape[:-1])
        out = np.empty(shape + (self.n,))
        if self.f_is_zero:
            out[...] = 0.0
            return out
        for i, e in enumerate(self.f_exprs):
            out[..., i] = ex.evaluate(e, t, u)
        return out

    def jac_f(self, t, u) -> np.ndarray:
        """Jacobian ``Df``; returns shape ``broadcast + (n, n)``."""
        u = np.asarray(u, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(t.shape, u.shape[:-1])
        out = np.zeros(shape + (self.n, self.n))
        if self.f_is_zero:
            return out
        for i, e in enumerate(self.f_exprs):
            _, g = ex.differentiate(e, t, u, self.n)
            out[..., i, :] = np.moveaxis(g, 0, -1)
        return out

    def rates(self, tau=0.0, span=40.0, samples=4001):
        """Splitting exponents ``(gamma, rho)``.

        Declared values win.  Otherwise they are read off the eigenvalues of
        the blocks of ``A`` averaged over ``[tau - span, tau + span]``.
        The fallback is a heuristic; declare the rates for serious work.
        """
        if self.gamma_rate is not None:
            return float(self.gamma_rate), float(self.rho_rate)
        t = np.linspace(tau - span, tau + span, samples)
        a = self.eval_A(t).mean(axis=0)
        k = self.k
        # e^{rho s} e^{lambda s} must stay bounded for s <= 0 on the first
        # block and e^{gamma s} e^{mu s} for s >= 0 on the second.
        rho = float(-np.min(np.linalg.eigvals(a[:k, :k]).real))
        gamma = float(-np.max(np.linalg.eigvals(a[k:, k:]).real))
        if not gamma > rho:
            raise SpecRangeError("could not infer splitting exponents; declare them")
        return gamma, rho


@dataclass(frozen=True)
class ValidationReport:
    """One entry per structural check: ``(name, passed, detail)``."""

    checks: tuple

    @property
    def ok(self) -> bool:
        return all(p for _, p, _ in self.checks)

    def as_dict(self):
        return {name: {"passed": bool(p), "detail": d} for name, p, d in self.checks}


def _sample_times(grid: GridConfig, tau=0.0, count=401):
    span = grid.t_window
    return np.linspace(tau - span, tau + span, count)


def validate_spec(spec: ProblemSpec, grid: GridConfig | None = None, tau=0.0) -> ValidationReport:
    """Check the structural assumptions on a sample grid.

    Checks block diagonality of ``A``, ``f(t, 0) = 0`` (to 1e-12) and the
    sign constraints on the Lipschitz constants.

    Raises
    ------
    MalformedExpression
        An expression does not parse.
    NonBlockDiagonal, ZeroConditionViolated, SpecRangeError
        The corresponding check failed; the report is attached as
        ``err.report``.
    """
    grid = grid or GridConfig()
    _ = spec.A_exprs, spec.f_exprs  # parse errors surface here
    t = _sample_times(grid, tau)
    checks = []
    k = spec.k
    a = spec.eval_A(t)
    off = max(float(np.max(np.abs(a[:, :k, k:]))), float(np.max(np.abs(a[:, k:, :k]))))
    checks.append(("block_diagonal", off == 0.0, f"max off-block entry {off:.3e}"))
    f0 = spec.eval_f(t, np.zeros((t.size, spec.n)))
    z = float(np.max(np.abs(f0)))
    checks.append(("zero_condition", z <= 1e-12, f"max |f(t,0)| {z:.3e}"))
    signs = spec.L1 >= 0 and spec.L2 > 0
    checks.append(("lipschitz_signs", signs, f"L1={spec.L1!r} L2={spec.L2!r}"))
    report = ValidationReport(tuple(checks))
    if off != 0.0:
        raise NonBlockDiagonal("A(t) couples the two blocks", report)
    if z > 1e-12:
        raise ZeroConditionViolated("f(t, 0) is not zero", report)
    if not signs:
        raise SpecRangeError("Lipschitz constants out of range", report)
    return report


def estimate_lipschitz(spec: ProblemSpec, samples: int, box_radius: float, grid=None, seed=0, tau=0.0):
    """Empirical lower bounds for ``(L1, L2)`` in the moving norms.

    Random pairs ``(u, v)`` in the box ``[-r, r]^n`` at random grid times
    ``t`` near ``tau``; returns the largest ratios

    ``|Q(f(t,u) - f(t,v))|_N(t) / ||u - v||_t`` and the ``S`` analogue.

    Every sampled ratio is a lower bound on the corresponding true constant.
    Pairs with ``u == v`` are never drawn (``v`` is ``u`` plus a nonzero
    perturbation).
    """
    from .linear import LinearProcess

    if samples < 2:
        raise SpecRangeError("need samples >= 2")
    grid = grid or GridConfig()
    gamma, rho = spec.rates(tau)
    proc = LinearProcess(spec, tau, grid)
    fb = proc.fb
    rng = np.random.default_rng(seed)
    lo, hi = fb.index_of(tau - 1.0), fb.index_of(tau + 1.0)
    idx = rng.integers(lo, hi + 1, size=samples)
    t = fb.t[idx]
    u = rng.uniform(-box_radius, box_radius, size=(samples, spec.n))
    # mix large and tiny separations so both global and local slopes show up
    scale = box_radius * 10.0 ** rng.uniform(-6, 0, size=(samples, 1))
    d = rng.uniform(-1, 1, size=(samples, spec.n))
    d[np.all(d == 0, axis=1)] = 1.0
    v = u + scale * d
    df = spec.eval_f(t, u) - spec.eval_f(t, v)
    k = spec.k
    nN, nS = proc.component_norms(df[:, :k], df[:, k:], idx, rho, gamma)
    duN, duS = proc.component_norms((u - v)[:, :k], (u - v)[:, k:], idx, rho, gamma)
    denom = spec.gamma_norm(duN, duS)
    return float(np.max(nN / denom)), float(np.max(nS / denom))
