"""Linear evolution process of the block-diagonal part and its norms.

The two diagonal blocks of ``A(t)`` are integrated separately with RK4 on a
uniform grid.  Every grid step stores a forward and a backward one-step
propagator, each integrated in its own time direction, so that downstream
products only ever run in the direction in which the block is contractive
(backward for the first block, forward for the second).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import IllConditioned, NotSplit, OutOfWindow, TruncationSuspect
from .problem import AdmissibleNorm, GridConfig, ProblemSpec

COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class FundamentalBlocks:
    """Gridded fundamental matrices of the two blocks.

    Attributes
    ----------
    t : ndarray, shape (N,)
        Uniform grid ``t[i] = tau + (i - i_tau) h``.
    fwd_N, bwd_N, fwd_S, bwd_S : ndarray, shape (N - 1, d, d)
        One-step propagators (see :mod:`lpm.kernels` for conventions).
    Phi_N, Phi_S : ndarray, shape (N, d, d)
        ``L(t_i, tau)`` per block; the first block is built from backward
        steps for ``t_i < tau``, the second from forward steps for
        ``t_i > tau``.
    t_norm : float
        Window length of the suprema defining the node norms.
    """

    t: np.ndarray
    h: float
    tau: float
    i_tau: int
    k: int
    m: int
    ambient: str
    t_norm: float
    fwd_N: np.ndarray
    bwd_N: np.ndarray
    fwd_S: np.ndarray
    bwd_S: np.ndarray
    Phi_N: np.ndarray
    Phi_S: np.ndarray
    spec: ProblemSpec | None = None
    substeps: int = 4
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def code(self) -> int:
        return kernels.NORM_CODES[self.ambient]

    @property
    def window_steps(self) -> int:
        return int(round(self.t_norm / self.h))

    @property
    def n(self) -> int:
        return self.k + self.m

    def index_of(self, t) -> int:
        """Node index of time ``t``; raises :class:`OutOfWindow` off grid."""
        x = (float(t) - self.t[0]) / self.h
        i = int(round(x))
        if abs(x - i) > 1e-6 or i < 0 or i >= self.t.size:
            raise OutOfWindow(f"t={t} is not a node of the grid [{self.t[0]}, {self.t[-1]}]")
        return i

    def covers(self, lo, hi) -> bool:
        eps = 1e-9 * self.h
        return self.t[0] <= lo + eps and hi - eps <= self.t[-1]

    # -- transition matrices ---------------------------------------------------

    def _phi_at(self, part, t):
        phi = self.Phi_N if part == "N" else self.Phi_S
        x = (float(t) - self.t[0]) / self.h
        if x < -1e-9 or x > self.t.size - 1 + 1e-9:
            raise OutOfWindow(f"t={t} outside [{self.t[0]}, {self.t[-1]}]")
        i = min(max(int(np.floor(x)), 0), self.t.size - 2)
        w = min(max(x - i, 0.0), 1.0)
        if w < 1e-9:
            return phi[i]
        if w > 1 - 1e-9:
            return phi[i + 1]
        if self.spec is None:
            return (1.0 - w) * phi[i] + w * phi[i + 1]
        # partial RK4 step from the left node keeps the grid accuracy
        sl = slice(0, self.k) if part == "N" else slice(self.k, self.n)
        sub = self.substeps
        dt = w * self.h
        fine = self.t[i] + dt * np.arange(2 * sub + 1) / (2 * sub)
        a = self.spec.eval_A(fine)[:, sl, sl]
        step, _ = kernels.rk4_propagators_numpy(a, dt, sub)
        return step[0] @ phi[i]

    def transition(self, t, s, part="full") -> np.ndarray:
        """``L(t, s)`` of one block (``"N"``, ``"S"``) or of both (``"full"``)."""
        if part == "full":
            out = np.zeros((self.n, self.n))
            out[: self.k, : self.k] = self.transition(t, s, "N")
            out[self.k :, self.k :] = self.transition(t, s, "S")
            return out
        if part not in ("N", "S"):
            raise ValueError(f"unknown part {part!r}")
        if t == s:
            d = self.k if part == "N" else self.m
            return np.eye(d)
        return self._phi_at(part, t) @ np.linalg.inv(self._phi_at(part, s))

    # -- node norms --------------------------------------------------------------

    def _scalar_factors(self, part, rate):
        key = (part, float(rate))
        if key not in self._cache:
            idx = np.arange(self.t.size)
            ones = np.ones((self.t.size, 1))
            if part == "N":
                res = kernels.window_sup(self.bwd_N, ones, idx, rate, self.h, self.window_steps, self.code, False)
            else:
                res = kernels.window_sup(self.fwd_S, ones, idx, rate, self.h, self.window_steps, self.code, True)
            self._cache[key] = res
        return self._cache[key]

    def n_norms(self, x, idx, rho):
        """``|x_q|_N(t_{idx_q})`` for rows of ``x`` (shape ``(P, k)``).

        Returns ``(values, argmax_offsets, suspect)``; offsets are in steps
        into the past.
        """
        x = np.asarray(x, dtype=float).reshape(-1, self.k)
        idx = np.asarray(idx, dtype=np.int64)
        if self.k == 1:
            best, argj, sus = self._scalar_factors("N", -rho)
            return best[idx] * np.abs(x[:, 0]), argj[idx], sus[idx] & (x[:, 0] != 0)
        return kernels.window_sup(self.bwd_N, x, idx, -rho, self.h, self.window_steps, self.code, False)

    def s_norms(self, x, idx, gamma):
        """``|x_q|_S(t_{idx_q})`` for rows of ``x`` (shape ``(P, m)``)."""
        x = np.asarray(x, dtype=float).reshape(-1, self.m)
        idx = np.asarray(idx, dtype=np.int64)
        if self.m == 1:
            best, argj, sus = self._scalar_factors("S", gamma)
            return best[idx] * np.abs(x[:, 0]), argj[idx], sus[idx] & (x[:, 0] != 0)
        return kernels.window_sup(self.fwd_S, x, idx, gamma, self.h, self.window_steps, self.code, True)

    def component_norms(self, xN, xS, idx, rho, gamma):
        """Node norms of both components; suspects are ignored here."""
        return self.n_norms(xN, idx, rho)[0], self.s_norms(xS, idx, gamma)[0]


def _block_steps(a_fine, h, sub):
    return kernels.rk4_propagators(np.ascontiguousarray(a_fine), h, sub)


def _phi_from_steps(fwd, bwd, i_tau):
    """``L(t_i, tau)``: backward steps left of ``tau``, forward steps right."""
    n = fwd.shape[0] + 1
    d = fwd.shape[1]
    eye = np.eye(d)[:, :]
    left = kernels.propagate_backward(bwd[:i_tau], eye) if i_tau > 0 else eye[None]
    right = kernels.propagate_forward(fwd[i_tau:], eye) if i_tau < n - 1 else eye[None]
    return np.concatenate([left[:-1], right], axis=0)


def integrate_fundamental(
    spec: ProblemSpec,
    tau: float,
    grid: GridConfig,
    t_lo: float | None = None,
    t_hi: float | None = None,
    check_window: tuple | None = None,
) -> FundamentalBlocks:
    """Integrate both diagonal blocks of ``A`` on a uniform grid through ``tau``.

    Parameters
    ----------
    spec : ProblemSpec
    tau : float
        Anchor time; always a grid node.
    grid : GridConfig
    t_lo, t_hi : float, optional
        Coverage.  Defaults to ``tau -+ (t_window + t_norm)``.
    check_window : (float, float), optional
        Interval on which block condition numbers are monitored; defaults
        to ``[tau - t_window, tau + t_norm]``.

    Raises
    ------
    IllConditioned
        A block condition number exceeds 1e12 inside the monitored window.
    """
    gamma, rho = spec.rates(tau)
    t_norm = grid.norm_window(gamma, rho)
    h = grid.h
    span = grid.t_window + t_norm
    t_lo = tau - span if t_lo is None else min(t_lo, tau)
    t_hi = tau + span if t_hi is None else max(t_hi, tau)
    n_lo = int(np.ceil((tau - t_lo) / h - 1e-9))
    n_hi = int(np.ceil((t_hi - tau) / h - 1e-9))
    idx = np.arange(-n_lo, n_hi + 1)
    t = tau + h * idx
    sub = grid.rk4_substeps
    fine = tau + h * np.arange(-n_lo * 2 * sub, n_hi * 2 * sub + 1) / (2 * sub)
    a = spec.eval_A(fine)
    k = spec.k
    fN, bN = _block_steps(a[:, :k, :k], h, sub)
    fS, bS = _block_steps(a[:, k:, k:], h, sub)
    phiN = _phi_from_steps(fN, bN, n_lo)
    phiS = _phi_from_steps(fS, bS, n_lo)
    lo, hi = check_window or (tau - grid.t_window, tau + t_norm)
    sel = (t >= lo - 1e-9) & (t <= hi + 1e-9)
    for name, phi in (("N", phiN), ("S", phiS)):
        if phi.shape[1] > 1:
            c = np.linalg.cond(phi[sel])
            if not np.all(np.isfinite(c)) or np.max(c) > COND_LIMIT:
                raise IllConditioned(f"block {name} condition number {np.max(c):.3e} exceeds {COND_LIMIT:.0e}")
        elif np.any(phi[sel, 0, 0] == 0) or not np.all(np.isfinite(phi[sel])):
            raise IllConditioned(f"block {name} is singular inside the window")
    return FundamentalBlocks(
        t=t, h=h, tau=float(tau), i_tau=n_lo, k=k, m=spec.m,
        ambient=spec.ambient_norm, t_norm=t_norm,
        fwd_N=fN, bwd_N=bN, fwd_S=fS, bwd_S=bS, Phi_N=phiN, Phi_S=phiS,
        spec=spec, substeps=sub,
    )


def apply_L(fb: FundamentalBlocks, t, s, x, part="full"):
    """``L(t, s) x``.

    Between grid nodes ``Phi`` is advanced from the left node by a partial
    RK4 step (linear interpolation when the blocks carry no spec).

    Raises
    ------
    OutOfWindow
    """
    x = np.asarray(x, dtype=float)
    return fb.transition(t, s, part) @ x


# -- splitting certificate --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SplittingCertificate:
    """Exponents and measured bound of the exponential splitting.

    ``M`` is a window-truncated estimate (``window_truncated`` is always
    True): suprema are taken over pairs within ``norm_window`` of each
    other inside the integrated grid.
    """

    gamma: float
    rho: float
    M: float
    M_anchor: float
    M_pairs: float
    evidence_t_S: np.ndarray
    evidence_S: np.ndarray
    evidence_t_N: np.ndarray
    evidence_N: np.ndarray
    norm_window: float
    window_truncated: bool = True

    def as_dict(self):
        return {
            "gamma": self.gamma,
            "rho": self.rho,
            "M": self.M,
            "M_anchor": self.M_anchor,
            "M_pairs": self.M_pairs,
            "norm_window": self.norm_window,
            "window_truncated": self.window_truncated,
        }


def _plateau(seq, label):
    seq = np.asarray(seq)
    if seq.size < 8:
        return
    q = (3 * seq.size) // 4
    head, tail = np.max(seq[:q]), np.max(seq[q:])
    if tail > 1.01 * head:
        raise NotSplit(
            f"{label} evidence keeps growing: last-quarter max {tail:.6g} exceeds "
            f"earlier max {head:.6g} by more than 1%"
        )


def _refine_1d(logv, i):
    """Vertex of the parabola through ``logv[i-1:i+2]`` (or ``logv[i]``)."""
    if i <= 0 or i >= logv.size - 1:
        return logv[i]
    a, b, c = logv[i - 1], logv[i], logv[i + 1]
    curv = a - 2 * b + c
    if not curv < 0:
        return b
    off = 0.5 * (a - c) / curv
    if abs(off) > 1.0:
        return b
    return b - 0.25 * (a - c) * off


def _chain(steps, lo, hi, d):
    """Product ``steps[hi-1] @ ... @ steps[lo]`` (identity if empty)."""
    if hi <= lo:
        return np.eye(d)
    if d == 1:
        return np.array([[np.prod(steps[lo:hi, 0, 0])]])
    out = np.eye(d)
    for i in range(lo, hi):
        out = steps[i] @ out
    return out


def _pair_log(fb, part, rate, a, j):
    """``log(e^{rate j h} ||L(anchor +- j, anchor)||)``; NaN if off grid."""
    n = fb.t.size
    if part == "S":
        if a < 0 or j < 0 or a + j >= n:
            return np.nan
        mat = _chain(fb.fwd_S, a, a + j, fb.m)
    else:
        if a >= n or j < 0 or a - j < 0:
            return np.nan
        steps = fb.bwd_N
        mat = np.eye(fb.k)
        if fb.k == 1:
            mat = np.array([[np.prod(steps[a - j:a, 0, 0])]])
        else:
            for s in range(a - 1, a - j - 1, -1):
                mat = steps[s] @ mat
    val = kernels.onorm_stack(mat[None], fb.code)[0]
    return rate * j * fb.h + np.log(val)


def _refine_2d(fb, part, rate, a, j):
    """Quadratic refinement of the log pair function around ``(a, j)``."""
    f = np.empty((3, 3))
    for da in (-1, 0, 1):
        for dj in (-1, 0, 1):
            f[da + 1, dj + 1] = _pair_log(fb, part, rate, a + da, j + dj)
    c = f[1, 1]
    if not np.all(np.isfinite(f)):
        return c
    g = np.array([(f[2, 1] - f[0, 1]) / 2, (f[1, 2] - f[1, 0]) / 2])
    hxx = f[2, 1] - 2 * c + f[0, 1]
    hyy = f[1, 2] - 2 * c + f[1, 0]
    hxy = (f[2, 2] - f[2, 0] - f[0, 2] + f[0, 0]) / 4
    hess = np.array([[hxx, hxy], [hxy, hyy]])
    if not (hxx < 0 and np.linalg.det(hess) > 0):
        return c
    off = -np.linalg.solve(hess, g)
    if np.max(np.abs(off)) > 1.0:
        return c
    return max(c, c + 0.5 * g @ off)


def certify_splitting(fb: FundamentalBlocks, gamma: float, rho: float, window=None) -> SplittingCertificate:
    """Measure the smallest ``M`` with both splitting estimates on the grid.

    Parameters
    ----------
    fb : FundamentalBlocks
    gamma, rho : float
        Requested exponents, ``gamma > rho``.
    window : float, optional
        Half-width of the region of anchor times swept for the pair
        estimate; defaults to the distance from ``tau`` to the nearer grid
        end minus the norm window.

    Raises
    ------
    NotSplit
        Anchored evidence keeps growing across the grid (plateau test).
    """
    if not gamma > rho:
        raise ValueError("need gamma > rho")
    it = fb.i_tau
    code = fb.code
    tS = fb.t[it:] - fb.tau
    evS = np.exp(gamma * tS) * kernels.onorm_stack(fb.Phi_S[it:], code)
    tN = fb.t[: it + 1][::-1] - fb.tau
    evN = np.exp(rho * tN) * kernels.onorm_stack(fb.Phi_N[: it + 1][::-1], code)
    _plateau(evS, "S-block")
    _plateau(evN, "N-block")
    jS = int(np.argmax(evS))
    jN = int(np.argmax(evN))
    m_anchor = max(
        float(np.exp(_refine_1d(np.log(evS), jS))),
        float(np.exp(_refine_1d(np.log(evN), jN))),
    )
    W = fb.window_steps
    n = fb.t.size
    if window is None:
        lo_a, hi_a = W, n - 1 - W
    else:
        r = int(round(window / fb.h))
        lo_a, hi_a = max(it - r, 0), min(it + r, n - 1)
    if hi_a < lo_a:
        lo_a, hi_a = 0, n - 1
    vS, aS, jS2 = kernels.pair_sup(fb.fwd_S, gamma, fb.h, W, code, True, lo_a, hi_a)
    vN, aN, jN2 = kernels.pair_sup(fb.bwd_N, -rho, fb.h, W, code, False, lo_a, hi_a)
    m_pairs = max(
        1.0,
        float(np.exp(_refine_2d(fb, "S", gamma, aS, jS2))) if vS > 0 else 0.0,
        float(np.exp(_refine_2d(fb, "N", -rho, aN, jN2))) if vN > 0 else 0.0,
    )
    M = max(m_anchor, m_pairs, 1.0)
    return SplittingCertificate(
        gamma=float(gamma), rho=float(rho), M=M, M_anchor=m_anchor, M_pairs=m_pairs,
        evidence_t_S=tS, evidence_S=evS, evidence_t_N=tN[::-1].copy(), evidence_N=evN[::-1].copy(),
        norm_window=fb.t_norm,
    )


# -- norms at a single time ---------------------------------------------------------


def _single(fb, tau, x, rate, part, strict):
    i = fb.index_of(tau)
    if part == "N":
        val, argj, sus = fb.n_norms(np.atleast_1d(x)[None, :], [i], rate)
        t_arg = fb.t[i] - argj[0] * fb.h
    else:
        val, argj, sus = fb.s_norms(np.atleast_1d(x)[None, :], [i], rate)
        t_arg = fb.t[i] + argj[0] * fb.h
    if strict and sus[0]:
        raise TruncationSuspect(f"|x|_{part} at tau={tau} attained at the window edge t={t_arg}")
    return float(val[0]), float(t_arg)


def n_norm(fb: FundamentalBlocks, tau, x, rho, strict=True):
    """``|x|_N(tau) = sup_{t <= tau} e^{rho (t - tau)} ||L(t, tau) x||`` on the window.

    Returns ``(value, t_argmax)``.

    Raises
    ------
    TruncationSuspect
        When ``strict`` and the supremum sits at the window edge.
    """
    return _single(fb, tau, x, rho, "N", strict)


def s_norm(fb: FundamentalBlocks, tau, x, gamma, strict=True):
    """``|x|_S(tau) = sup_{t >= tau} e^{gamma (t - tau)} ||L(t, tau) x||`` on the window."""
    return _single(fb, tau, x, gamma, "S", strict)


def moving_norm(fb: FundamentalBlocks, tau, x, cert: SplittingCertificate, gnorm: AdmissibleNorm, strict=False):
    """``||x||_tau = Gamma(|Qx|_N(tau), |(I-Q)x|_S(tau))``."""
    x = np.asarray(x, dtype=float)
    a, _ = n_norm(fb, tau, x[: fb.k], cert.rho, strict)
    b, _ = s_norm(fb, tau, x[fb.k :], cert.gamma, strict)
    return float(gnorm(a, b))


def moving_norms(fb: FundamentalBlocks, X, idx, rho, gamma, gnorm):
    """Vectorised moving norms of rows of ``X`` (shape ``(P, n)``) at nodes ``idx``."""
    X = np.asarray(X, dtype=float)
    a, b = fb.component_norms(X[:, : fb.k], X[:, fb.k :], idx, rho, gamma)
    return gnorm(a, b)


class LinearProcess:
    """Convenience bundle of a spec, its blocks and splitting exponents."""

    def __init__(self, spec: ProblemSpec, tau: float, grid: GridConfig, fb: FundamentalBlocks | None = None):
        self.spec = spec
        self.grid = grid
        self.gamma, self.rho = spec.rates(tau)
        self.fb = fb or integrate_fundamental(spec, tau, grid)

    def component_norms(self, xN, xS, idx, rho=None, gamma=None):
        rho = self.rho if rho is None else rho
        gamma = self.gamma if gamma is None else gamma
        return self.fb.component_norms(xN, xS, idx, rho, gamma)
