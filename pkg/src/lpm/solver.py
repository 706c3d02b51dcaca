"""Fixed-point engines for the unstable graph, the stable graph and its derivative.

Each engine runs Picard iterations of a Lyapunov-Perron integral operator on
a gridded segment.  Integrals are composite trapezoid sums evaluated by the
directional recurrences of :mod:`lpm.kernels`.  Increments are measured in
the weighted sup-norm ``sup_i e^{sigma (t_i - tau)} ||z(t_i)||_{t_i}`` with
the moving norm at every node.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import LPMError, NoConvergence, NonContraction, TailTooLarge
from .gap import GapCertificate, gap_certificate
from .linear import FundamentalBlocks, SplittingCertificate, certify_splitting, integrate_fundamental
from .problem import GridConfig, ProblemSpec

RATIO_SLACK = 0.05
BAD_RATIO_LIMIT = 3


@dataclass(frozen=True)
class SolveDiagnostics:
    """Convergence record of one fixed-point solve.

    ``apost_error`` is ``contraction_term + tail_bound + disc_error`` where
    ``contraction_term = theta/(1-theta) * last_increment`` and
    ``disc_error`` is the weighted distance between the solutions on the
    grid and on the grid with doubled step (zero when not computed).
    """

    iterations: int
    increments: tuple
    ratios: tuple
    last_increment: float
    contraction_term: float
    tail_bound: float
    disc_error: float
    apost_error: float
    weighted_norm: float
    truncation_suspects: int

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "last_increment": self.last_increment,
            "max_ratio": max(self.ratios) if self.ratios else None,
            "contraction_term": self.contraction_term,
            "tail_bound": self.tail_bound,
            "disc_error": self.disc_error,
            "apost_error": self.apost_error,
            "weighted_norm": self.weighted_norm,
            "truncation_suspects": self.truncation_suspects,
        }


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    """Gridded solution ``t -> z(t)`` with its weighting exponent.

    ``direction`` is ``"backward"`` for ``[tau - T, tau]`` and ``"forward"``
    for ``[tau, tau + T]``; ``idx`` are node indices into the blocks.
    """

    tau: float
    t: np.ndarray
    values: np.ndarray
    sigma: float
    direction: str
    idx: np.ndarray
    diagnostics: SolveDiagnostics | None = None

    @property
    def weighted_norm(self) -> float:
        return self.diagnostics.weighted_norm if self.diagnostics else float("nan")


@dataclass(frozen=True, eq=False)
class OperatorSegment:
    """Gridded operator-valued solution ``Z(t)`` (shape ``(P, n, k)``)."""

    tau: float
    t: np.ndarray
    values: np.ndarray
    sigma: float
    idx: np.ndarray
    diagnostics: SolveDiagnostics | None = None


@dataclass(frozen=True, eq=False)
class ManifoldChart:
    """Sampled graph ``q_i -> Sigma(tau, q_i)`` with per-point diagnostics.

    Points whose solve raised are listed in ``errors`` (index -> message)
    and carry NaN images.
    """

    tau: float
    base_points: np.ndarray
    images: np.ndarray
    diagnostics: tuple
    errors: dict = field(default_factory=dict)
    invariant_violations: tuple = ()

    def __len__(self):
        return self.base_points.shape[0]


def _unit_vertices(k, ambient):
    """Directions whose images bound an operator norm on the unit ball of R^k."""
    if ambient == "max":
        if k > 12:
            raise ValueError("max-norm vertex enumeration limited to k <= 12")
        grid = np.array(np.meshgrid(*([[-1.0, 1.0]] * k), indexing="ij")).reshape(k, -1).T
        return grid[grid[:, 0] > 0] if k > 1 else np.ones((1, 1))
    eye = np.eye(k)
    if ambient == "sum" or k == 1:
        return eye
    rng = np.random.default_rng(12345)
    extra = rng.normal(size=(32, k))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    return np.vstack([eye, extra])


class LPSolver:
    """Solver handle: problem, blocks, splitting and gap certificates.

    Parameters
    ----------
    spec : ProblemSpec
    grid : GridConfig, optional
    tau0 : float
        Anchor of the grid lattice; every base time must be a node
        ``tau0 + j h``.
    fb, cert, gap : optional
        Precomputed blocks and certificates.
    t_lo, t_hi : float, optional
        Initial coverage of the blocks (extended on demand).

    Raises
    ------
    GapFails, NotSplit, IllConditioned
    """

    def __init__(
        self,
        spec: ProblemSpec,
        grid: GridConfig | None = None,
        tau0: float = 0.0,
        fb: FundamentalBlocks | None = None,
        cert: SplittingCertificate | None = None,
        gap: GapCertificate | None = None,
        t_lo: float | None = None,
        t_hi: float | None = None,
    ):
        self.spec = spec
        self.grid = grid or GridConfig()
        self.tau0 = float(tau0)
        self.gamma, self.rho = spec.rates(tau0)
        self.gap = gap or gap_certificate(self.gamma, self.rho, spec.L1, spec.L2, spec.gamma_norm)
        self.fb = fb or integrate_fundamental(spec, tau0, self.grid, t_lo, t_hi)
        self.cert = cert or certify_splitting(self.fb, self.gamma, self.rho)
        self.gnorm = spec.gamma_norm

    # -- grid bookkeeping --------------------------------------------------------

    @property
    def h(self):
        return self.fb.h

    @property
    def window_steps(self):
        n = int(round(self.grid.t_window / self.h))
        return n + (n % 2)

    def ensure(self, lo, hi):
        """Extend the blocks so that ``[lo, hi]`` is covered."""
        if self.fb.covers(lo, hi):
            return
        new_lo = min(lo, self.fb.t[0])
        new_hi = max(hi, self.fb.t[-1])
        self.fb = integrate_fundamental(
            self.spec, self.tau0, self.grid, new_lo, new_hi,
            check_window=(max(new_lo, self.tau0 - self.grid.t_window), min(new_hi, self.tau0 + self.fb.t_norm)),
        )

    def _nodes(self, tau, forward):
        T = self.window_steps * self.h
        tn = self.fb.t_norm
        if forward:
            self.ensure(tau - tn, tau + T + tn)
        else:
            self.ensure(tau - T - tn, tau + tn)
        it = self.fb.index_of(tau)
        NT = self.window_steps
        if forward:
            return np.arange(it, it + NT + 1)
        return np.arange(it - NT, it + 1)

    # -- norms -------------------------------------------------------------------------

    def node_moving_norms(self, X, idx):
        """Moving norms of rows of ``X`` at nodes ``idx``; also suspect count."""
        fb = self.fb
        k = fb.k
        a, _, sa = fb.n_norms(X[:, :k], idx, self.rho)
        b, _, sb = fb.s_norms(X[:, k:], idx, self.gamma)
        return self.gnorm(a, b), int(np.count_nonzero(sa) + np.count_nonzero(sb))

    def _weights(self, idx, tau, sigma):
        return np.exp(sigma * (self.fb.t[idx] - tau))

    def weighted_norm(self, X, idx, tau, sigma):
        nrm, _ = self.node_moving_norms(X, idx)
        return float(np.max(self._weights(idx, tau, sigma) * nrm)) if len(idx) else 0.0

    def weighted_op_norm(self, Z, idx, tau, sigma):
        verts = _unit_vertices(Z.shape[2], self.spec.ambient_norm)
        return max(self.weighted_norm(Z @ w, idx, tau, sigma) for w in verts)

    # -- core iteration -------------------------------------------------------------------

    def _iterate(self, op, z0, measure, scale):
        grid = self.grid
        th = self.gap.theta_star
        tol = grid.tol_fixed_point * max(1.0, scale)
        floor = 1e-12 * max(1.0, scale)
        z = z0
        incs, ratios = [], []
        bad = 0
        for it in range(1, grid.max_iter + 1):
            z_new = op(z)
            inc = measure(z_new - z)
            z = z_new
            if incs and incs[-1] > floor:
                r = inc / incs[-1]
                ratios.append(r)
                bad = bad + 1 if r > th + RATIO_SLACK else 0
                if bad >= BAD_RATIO_LIMIT:
                    raise NonContraction(
                        f"increment ratio {r:.4f} exceeded theta*+{RATIO_SLACK} = {th + RATIO_SLACK:.4f} "
                        f"for {BAD_RATIO_LIMIT} consecutive steps"
                    )
            incs.append(inc)
            if inc <= tol:
                return z, it, tuple(incs), tuple(ratios)
        raise NoConvergence(f"no convergence in {grid.max_iter} iterations (last increment {incs[-1]:.3e})")

    def _finish(self, z, idx, tau, sigma, it, incs, ratios, tail, disc):
        th = self.gap.theta_star
        wn = self.weighted_norm(z, idx, tau, sigma) if z.ndim == 2 else self.weighted_op_norm(z, idx, tau, sigma)
        if tail > self.grid.tail_tol * max(1.0, wn):
            raise TailTooLarge(f"truncation tail bound {tail:.3e} exceeds tail_tol {self.grid.tail_tol:.1e}")
        _, sus = self.node_moving_norms(z if z.ndim == 2 else z[:, :, 0], idx)
        last = incs[-1] if incs else 0.0
        cterm = th / (1.0 - th) * last
        return SolveDiagnostics(
            iterations=it, increments=incs, ratios=ratios, last_increment=last,
            contraction_term=cterm, tail_bound=tail, disc_error=disc,
            apost_error=cterm + tail + disc, weighted_norm=wn, truncation_suspects=sus,
        )

    # -- unstable graph ----------------------------------------------------------------------

    def _unstable_op(self, t, bN, fS, h, aN):
        spec = self.spec
        k = spec.k

        def op(z):
            g = spec.eval_f(t, z)
            iN = kernels.accumulate_backward(bN, g[:, :k, None], h)[:, :, 0]
            iS = kernels.accumulate_forward(fS, g[:, k:, None], h)[:, :, 0]
            return np.concatenate([aN - iN, iS], axis=1)

        return op

    def _unstable_core(self, tau, qeta, idx, stride, z_start=None):
        fb = self.fb
        sigma = self.gap.sigma_star
        i0, i1 = idx[0], idx[-1]
        bN = fb.bwd_N[i0:i1]
        fS = fb.fwd_S[i0:i1]
        if stride == 2:
            bN = bN[0::2] @ bN[1::2]
            fS = fS[1::2] @ fS[0::2]
            idx = idx[::2]
        t = fb.t[idx]
        h = fb.h * stride
        aN = kernels.propagate_backward(bN, qeta[:, None])[:, :, 0]
        z0 = np.concatenate([aN, np.zeros((t.size, self.spec.m))], axis=1)
        scale = self.weighted_norm(z0, idx, tau, sigma)
        op = self._unstable_op(t, bN, fS, h, aN)
        measure = lambda d: self.weighted_norm(d, idx, tau, sigma)  # noqa: E731
        z, it, incs, ratios = self._iterate(op, z0 if z_start is None else z_start, measure, scale)
        return z, idx, it, incs, ratios

    def solve_unstable(self, tau, eta, discretization_check=True):
        """Fixed point on ``[tau - T, tau]`` and ``Sigma(tau, eta)``.

        Parameters
        ----------
        tau : float
            Base time (grid node).
        eta : array_like, shape (n,) or (k,)
            Only the first ``k`` components are used.
        discretization_check : bool
            Also solve with doubled step and report the difference.

        Returns
        -------
        segment : TrajectorySegment
        sigma_value : ndarray, shape (n - k,)

        Raises
        ------
        NonContraction, NoConvergence, TailTooLarge
        """
        spec = self.spec
        k = spec.k
        qeta = np.asarray(eta, dtype=float).ravel()[:k].copy()
        idx = self._nodes(tau, forward=False)
        z, idx, it, incs, ratios = self._unstable_core(tau, qeta, idx, 1)
        sigma = self.gap.sigma_star
        disc = 0.0
        if discretization_check and not spec.f_is_zero:
            zc, idc, *_ = self._unstable_core(tau, qeta, idx, 2, z_start=z[::2])
            disc = self.weighted_norm(z[::2] - zc, idc, tau, sigma)
        wn = self.weighted_norm(z, idx, tau, sigma)
        gs = self.gap
        tail = spec.L2 * float(self.gnorm(1.0, gs.kappa_sigma)) * wn * math.exp(
            -(self.gamma - sigma) * self.window_steps * self.h
        ) / (self.gamma - sigma)
        diag = self._finish(z, idx, tau, sigma, it, incs, ratios, tail, disc)
        seg = TrajectorySegment(float(tau), self.fb.t[idx], z, sigma, "backward", idx, diag)
        return seg, z[-1, k:].copy()

    def sigma(self, tau, q, discretization_check=False):
        """Shortcut for ``Sigma(tau, q)``."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return self.solve_unstable(tau, q, discretization_check)[1]

    # -- stable graph ------------------------------------------------------------------------

    def _stable_core(self, tau, peta, idx, stride, z_start=None):
        fb = self.fb
        spec = self.spec
        k = spec.k
        sigma = self.gap.sigma_star
        i0, i1 = idx[0], idx[-1]
        bN = fb.bwd_N[i0:i1]
        fS = fb.fwd_S[i0:i1]
        if stride == 2:
            bN = bN[0::2] @ bN[1::2]
            fS = fS[1::2] @ fS[0::2]
            idx = idx[::2]
        t = fb.t[idx]
        h = fb.h * stride
        aS = kernels.propagate_forward(fS, peta[:, None])[:, :, 0]
        z0 = np.concatenate([np.zeros((t.size, k)), aS], axis=1)
        scale = self.weighted_norm(z0, idx, tau, sigma)

        def op(z):
            g = spec.eval_f(t, z)
            iN = kernels.accumulate_backward(bN, g[:, :k, None], h)[:, :, 0]
            iS = kernels.accumulate_forward(fS, g[:, k:, None], h)[:, :, 0]
            return np.concatenate([-iN, aS + iS], axis=1)

        measure = lambda d: self.weighted_norm(d, idx, tau, sigma)  # noqa: E731
        z, it, incs, ratios = self._iterate(op, z0 if z_start is None else z_start, measure, scale)
        return z, idx, it, incs, ratios

    def solve_stable(self, tau, eta, discretization_check=True):
        """Fixed point on ``[tau, tau + T]`` and ``Theta(tau, eta)``.

        Only the last ``n - k`` components of ``eta`` are used (a vector of
        length ``n - k`` is accepted as well).
        """
        spec = self.spec
        k = spec.k
        eta = np.asarray(eta, dtype=float).ravel()
        peta = (eta[k:] if eta.size == spec.n else eta).copy()
        idx = self._nodes(tau, forward=True)
        z, idx, it, incs, ratios = self._stable_core(tau, peta, idx, 1)
        sigma = self.gap.sigma_star
        disc = 0.0
        if discretization_check and not spec.f_is_zero:
            zc, idc, *_ = self._stable_core(tau, peta, idx, 2, z_start=z[::2])
            disc = self.weighted_norm(z[::2] - zc, idc, tau, sigma)
        wn = self.weighted_norm(z, idx, tau, sigma)
        gs = self.gap
        tail = spec.L1 * float(self.gnorm(gs.kappa_theta, 1.0)) * wn * math.exp(
            -(sigma - self.rho) * self.window_steps * self.h
        ) / (sigma - self.rho)
        diag = self._finish(z, idx, tau, sigma, it, incs, ratios, tail, disc)
        seg = TrajectorySegment(float(tau), self.fb.t[idx], z, sigma, "forward", idx, diag)
        return seg, z[0, :k].copy()

    def theta(self, tau, p, discretization_check=False):
        """Shortcut for ``Theta(tau, p)`` with ``p`` in the second block."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return self.solve_stable(tau, p, discretization_check)[1]

    # -- derivative of the unstable graph ---------------------------------------------------

    def _derivative_core(self, tau, jac, idx, stride, Z_start=None):
        fb = self.fb
        k = self.spec.k
        sigma = self.gap.sigma_star
        i0, i1 = idx[0], idx[-1]
        bN = fb.bwd_N[i0:i1]
        fS = fb.fwd_S[i0:i1]
        if stride == 2:
            bN = bN[0::2] @ bN[1::2]
            fS = fS[1::2] @ fS[0::2]
            idx = idx[::2]
            jac = jac[::2]
        h = fb.h * stride
        aN = kernels.propagate_backward(bN, np.eye(k))
        Z0 = np.concatenate([aN, np.zeros((idx.size, self.spec.m, k))], axis=1)
        scale = self.weighted_op_norm(Z0, idx, tau, sigma)

        def op(Z):
            G = jac @ Z
            iN = kernels.accumulate_backward(bN, np.ascontiguousarray(G[:, :k]), h)
            iS = kernels.accumulate_forward(fS, np.ascontiguousarray(G[:, k:]), h)
            return np.concatenate([aN - iN, iS], axis=1)

        measure = lambda D: self.weighted_op_norm(D, idx, tau, sigma)  # noqa: E731
        Z, it, incs, ratios = self._iterate(op, Z0 if Z_start is None else Z_start, measure, scale)
        return Z, idx, it, incs, ratios

    def solve_derivative(self, tau, eta, base_segment: TrajectorySegment | None = None, discretization_check=True):
        """Linearised fixed point ``Z`` and ``D_eta Sigma(tau, eta)``.

        Returns
        -------
        segment : OperatorSegment
            ``Z(t)`` with shape ``(P, n, k)`` (columns act on the first block).
        dsigma : ndarray, shape (n - k, n)
            Derivative of ``Sigma(tau, .)``; columns of the second block are
            zero since ``Sigma`` only depends on the first block.
        """
        spec = self.spec
        k = spec.k
        if base_segment is None:
            base_segment, _ = self.solve_unstable(tau, eta, discretization_check=False)
        idx = base_segment.idx
        jac = spec.jac_f(base_segment.t, base_segment.values)
        Z, idx_f, it, incs, ratios = self._derivative_core(tau, jac, idx, 1)
        sigma = self.gap.sigma_star
        disc = 0.0
        if discretization_check and not spec.f_is_zero:
            Zc, idc, *_ = self._derivative_core(tau, jac, idx, 2, Z_start=Z[::2])
            disc = self.weighted_op_norm(Z[::2] - Zc, idc, tau, sigma)
        wn = self.weighted_op_norm(Z, idx_f, tau, sigma)
        tail = spec.L2 * float(self.gnorm(1.0, self.gap.kappa_sigma)) * wn * math.exp(
            -(self.gamma - sigma) * self.window_steps * self.h
        ) / (self.gamma - sigma)
        th = self.gap.theta_star
        last = incs[-1] if incs else 0.0
        cterm = th / (1 - th) * last
        if tail > self.grid.tail_tol * max(1.0, wn):
            raise TailTooLarge(f"truncation tail bound {tail:.3e} exceeds tail_tol")
        diag = SolveDiagnostics(
            iterations=it, increments=incs, ratios=ratios, last_increment=last,
            contraction_term=cterm, tail_bound=tail, disc_error=disc,
            apost_error=cterm + tail + disc, weighted_norm=wn, truncation_suspects=0,
        )
        seg = OperatorSegment(float(tau), self.fb.t[idx_f], Z, sigma, idx_f, diag)
        dsig = np.zeros((spec.m, spec.n))
        dsig[:, :k] = Z[-1, k:, :]
        return seg, dsig

    # -- charts and projections ---------------------------------------------------------------

    def sample_chart(self, tau, base_points, workers=None, discretization_check=True) -> ManifoldChart:
        """Solve at every base point (concurrently); per-point failures are collected."""
        pts = np.asarray(base_points, dtype=float).reshape(-1, self.spec.k) if len(base_points) else np.zeros((0, self.spec.k))
        m = self.spec.m
        # prime coverage once so workers never rebuild the blocks concurrently
        if len(pts):
            self._nodes(tau, forward=False)

        def one(q):
            try:
                seg, s = self.solve_unstable(tau, q, discretization_check)
                return s, seg.diagnostics, None
            except LPMError as e:
                return np.full(m, np.nan), None, f"{type(e).__name__}: {e}"

        workers = workers or min(4, os.cpu_count() or 1)
        if workers > 1 and len(pts) > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(one, pts))
        else:
            results = [one(q) for q in pts]
        images = np.array([r[0] for r in results]).reshape(-1, m)
        diags = tuple(r[1] for r in results)
        errors = {i: r[2] for i, r in enumerate(results) if r[2] is not None}
        viol = self._chart_invariants(tau, pts, images, diags)
        return ManifoldChart(float(tau), pts, images, diags, errors, viol)

    def _chart_invariants(self, tau, pts, images, diags):
        out = []
        if not len(pts):
            return tuple(out)
        fb = self.fb
        i = fb.index_of(tau)
        err = np.array([d.apost_error if d else np.nan for d in diags])
        for a in range(len(pts)):
            if np.all(pts[a] == 0) and np.isfinite(images[a]).all():
                if np.max(np.abs(images[a])) > max(err[a], self.grid.tol_fixed_point):
                    out.append(f"Sigma(tau,0) = {images[a].tolist()} is not zero")
        ks = self.gap.kappa_sigma
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                if not (np.isfinite(images[a]).all() and np.isfinite(images[b]).all()):
                    continue
                dq = fb.n_norms((pts[a] - pts[b])[None], [i], self.rho)[0][0]
                ds = fb.s_norms((images[a] - images[b])[None], [i], self.gamma)[0][0]
                if ds > ks * dq + 2 * (err[a] + err[b]) + 1e-12:
                    out.append(f"Lipschitz bound violated between points {a} and {b}: {ds:.6g} > {ks:.6g}*{dq:.6g}")
        return tuple(out)

    def project_sigma(self, t, x):
        """``P_Sigma(t) x = Q x + Sigma(t, Q x)``."""
        x = np.asarray(x, dtype=float)
        k = self.spec.k
        out = np.empty(self.spec.n)
        out[:k] = x[:k]
        out[k:] = self.sigma(t, x[:k])
        return out

    def project_theta(self, t, x):
        """``P_Theta(t) x = Theta(t, (I-Q) x) + (I-Q) x``."""
        x = np.asarray(x, dtype=float)
        k = self.spec.k
        out = np.empty(self.spec.n)
        out[k:] = x[k:]
        out[:k] = self.theta(t, x[k:])
        return out


# -- functional interface -----------------------------------------------------------------


def _handle(spec, fb, cert, gap, grid):
    return LPSolver(spec, grid, tau0=fb.tau, fb=fb, cert=cert, gap=gap)


def solve_unstable(spec: ProblemSpec, fb, cert, gap, tau, eta, grid: GridConfig):
    """Functional form of :meth:`LPSolver.solve_unstable`."""
    return _handle(spec, fb, cert, gap, grid).solve_unstable(tau, eta)


def solve_stable(spec: ProblemSpec, fb, cert, gap, tau, eta, grid: GridConfig):
    """Functional form of :meth:`LPSolver.solve_stable`."""
    return _handle(spec, fb, cert, gap, grid).solve_stable(tau, eta)


def solve_derivative(spec: ProblemSpec, fb, cert, gap, tau, eta, grid: GridConfig, base_segment=None):
    """Functional form of :meth:`LPSolver.solve_derivative`."""
    return _handle(spec, fb, cert, gap, grid).solve_derivative(tau, eta, base_segment)


def sample_chart(spec: ProblemSpec, fb, cert, gap, tau, base_points, grid: GridConfig, workers=None):
    """Functional form of :meth:`LPSolver.sample_chart`."""
    return _handle(spec, fb, cert, gap, grid).sample_chart(tau, base_points, workers)
