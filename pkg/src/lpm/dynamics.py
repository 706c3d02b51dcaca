"""Direct integration of the nonlinear process and the graph projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import StateOverflow
from .linear import integrate_fundamental
from .problem import GridConfig, ProblemSpec

OVERFLOW_LIMIT = 1e12
DUHAMEL_SAMPLES = 5
DUHAMEL_RTOL = 1e-5


@dataclass(frozen=True, eq=False)
class FlowSample:
    """States ``T(t_i, tau) eta`` on the nodes ``t_i = tau + i h``.

    ``error_estimate`` is the step-doubling estimate ``|u_h - u_2h| / 15``
    (max norm) on even nodes; odd nodes take the larger neighbouring value.
    """

    tau: float
    eta: np.ndarray
    t: np.ndarray
    states: np.ndarray
    error_estimate: np.ndarray
    duhamel_residual: float = float("nan")
    duhamel_scale: float = float("nan")

    @property
    def duhamel_ok(self) -> bool:
        return bool(self.duhamel_residual <= DUHAMEL_RTOL * self.duhamel_scale)

    def index_of(self, t) -> int:
        h = self.t[1] - self.t[0] if self.t.size > 1 else 1.0
        x = (t - self.tau) / h
        i = int(round(x))
        if abs(x - i) > 1e-6 or not 0 <= i < self.t.size:
            raise ValueError(f"t={t} is not a node of this flow sample")
        return i

    def at(self, t) -> np.ndarray:
        return self.states[self.index_of(t)]


def _rk4(spec, t0, u0, h, nsteps):
    """Fixed-step RK4 for ``u' = A(t) u + f(t, u)``.

    ``u0`` may hold a batch of initial states (shape ``(..., n)``); returns
    ``(P, ..., n)``.  A negative ``h`` integrates backward.
    """
    t_half = t0 + 0.5 * h * np.arange(2 * nsteps + 1)
    A = spec.eval_A(t_half)
    zero_f = spec.f_is_zero
    u = np.array(u0, dtype=float)
    out = np.empty((nsteps + 1,) + u.shape)
    out[0] = u

    def rhs(j, x):
        v = x @ A[j].T
        if not zero_f:
            v = v + spec.eval_f(t_half[j], x)
        return v

    for i in range(nsteps):
        j = 2 * i
        k1 = rhs(j, u)
        k2 = rhs(j + 1, u + 0.5 * h * k1)
        k3 = rhs(j + 1, u + 0.5 * h * k2)
        k4 = rhs(j + 2, u + h * k3)
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > OVERFLOW_LIMIT:
            raise StateOverflow(f"state norm exceeded {OVERFLOW_LIMIT:.0e} at t={t0 + (i + 1) * h:.6g}")
        out[i + 1] = u
    return out


def _duhamel_residual(spec, tau, t, states, grid):
    fb = integrate_fundamental(spec, tau, grid, t_lo=tau, t_hi=t[-1], check_window=(tau, t[-1]))
    k = spec.k
    g = spec.eval_f(t, states) if not spec.f_is_zero else np.zeros_like(states)
    phis = ((fb.Phi_N, slice(0, k)), (fb.Phi_S, slice(k, spec.n)))
    i_tau = fb.index_of(tau)
    picks = np.unique(np.linspace(0, t.size - 1, DUHAMEL_SAMPLES + 1).round().astype(int)[1:])
    worst = 0.0
    for j in picks:
        if j < 2:
            continue
        pred = np.empty(spec.n)
        for phi, sl in phis:
            P = phi[i_tau : i_tau + j + 1]
            y = np.linalg.solve(P, g[: j + 1, sl, None])[:, :, 0]
            y0 = np.linalg.solve(P[0], states[0, sl])
            quad = integrate.simpson(y, x=t[: j + 1], axis=0)
            pred[sl] = P[-1] @ (y0 + quad)
        worst = max(worst, float(np.max(np.abs(pred - states[j]))))
    return worst


def integrate_process(spec: ProblemSpec, tau, eta, t_end, grid: GridConfig | None = None, duhamel_check=True) -> FlowSample:
    """Integrate ``u' = A(t) u + f(t, u)`` from ``u(tau) = eta`` to ``t_end``.

    Parameters
    ----------
    spec : ProblemSpec
    tau, t_end : float
        ``t_end >= tau``; the span is rounded to a whole number of steps.
    eta : array_like, shape (n,)
    grid : GridConfig, optional
        Step ``h`` is taken from here.
    duhamel_check : bool
        Also compare with the variation of constants formula at 5 times.

    Raises
    ------
    StateOverflow
        If the state norm exceeds 1e12.
    """
    grid = grid or GridConfig()
    if t_end < tau:
        raise ValueError("t_end must be >= tau")
    eta = np.asarray(eta, dtype=float).ravel()
    if eta.size != spec.n:
        raise ValueError(f"eta must have {spec.n} components")
    h = grid.h
    nsteps = int(round((t_end - tau) / h))
    t = tau + h * np.arange(nsteps + 1)
    states = _rk4(spec, tau, eta, h, nsteps)
    est = np.zeros(nsteps + 1)
    if nsteps >= 2:
        half = nsteps // 2
        coarse = _rk4(spec, tau, eta, 2 * h, half)
        d = np.max(np.abs(states[: 2 * half + 1 : 2] - coarse), axis=1) / 15.0
        est[: 2 * half + 1 : 2] = d
        odd = np.arange(1, nsteps + 1, 2)
        est[odd] = np.maximum(d[(odd - 1) // 2], d[np.minimum((odd + 1) // 2, half)])
    res, scale = float("nan"), float("nan")
    if duhamel_check and nsteps >= 2:
        res = _duhamel_residual(spec, tau, t, states, grid)
        scale = max(1.0, float(np.max(np.abs(states))))
    return FlowSample(float(tau), eta, t, states, est, res, scale)


def project_P_sigma(solver, t, x) -> np.ndarray:
    """``Q x + Sigma(t, Q x)`` via a fresh unstable solve at base time ``t``."""
    return solver.project_sigma(t, x)


def project_P_theta(solver, t, x) -> np.ndarray:
    """``Theta(t, (I - Q) x) + (I - Q) x`` via a fresh stable solve."""
    return solver.project_theta(t, x)
