"""Hot loops: block propagators, directional quadrature and window suprema.

Each kernel exists twice: a loop version compiled with numba and a numpy
version that vectorises over the independent axis.  The public functions
dispatch on :data:`lpm._accel.USE_NUMBA` at call time; the ``*_numba`` and
``*_numpy`` variants are exported for tests and benchmarks.

Conventions shared by all kernels
---------------------------------
``steps`` is an array of shape ``(S, d, d)`` holding one-step propagators of
a block on a uniform grid with ``S + 1`` nodes:

* forward steps: ``steps[i] = L(t_{i+1}, t_i)``
* backward steps: ``steps[i] = L(t_i, t_{i+1})``

Norm codes: 0 = max norm, 1 = sum norm, 2 = euclidean norm.  Operator norms
are the induced ones (max row sum, max column sum, spectral norm).
"""

import numpy as np

from . import _accel

NORM_CODES = {"max": 0, "sum": 1, "euclid": 2}
# relative excess of the window tail over the interior that flags truncation;
# above the O(h^2) aliasing of repeated peaks sampled at shifted lattice phases
SUSPECT_MARGIN = 1e-4


# -- small helpers (numba-compatible) ----------------------------------------


def _vnorm_loop(v, code):
    s = 0.0
    if code == 0:
        for a in range(v.shape[0]):
            x = abs(v[a])
            if x > s:
                s = x
    elif code == 1:
        for a in range(v.shape[0]):
            s += abs(v[a])
    else:
        for a in range(v.shape[0]):
            s += v[a] * v[a]
        s = np.sqrt(s)
    return s


def _onorm_loop(m, code):
    d0, d1 = m.shape
    best = 0.0
    if code == 0:
        for a in range(d0):
            s = 0.0
            for b in range(d1):
                s += abs(m[a, b])
            if s > best:
                best = s
    elif code == 1:
        for b in range(d1):
            s = 0.0
            for a in range(d0):
                s += abs(m[a, b])
            if s > best:
                best = s
    else:
        if d0 == 1 and d1 == 1:
            best = abs(m[0, 0])
        else:
            w = np.linalg.eigvalsh(m.T @ m)
            best = np.sqrt(max(w[-1], 0.0))
    return best


# Loop kernels below call these names; they resolve to compiled code.
_vnorm = _accel.njit(_vnorm_loop) or _vnorm_loop
_onorm = _accel.njit(_onorm_loop) or _onorm_loop


def vnorm_rows(x, code):
    """Row-wise vector norm of ``x`` with shape ``(..., d)``."""
    if code == 0:
        return np.max(np.abs(x), axis=-1) if x.shape[-1] else np.zeros(x.shape[:-1])
    if code == 1:
        return np.sum(np.abs(x), axis=-1)
    return np.sqrt(np.sum(x * x, axis=-1))


def onorm_stack(m, code):
    """Induced operator norm of each matrix in a stack ``(..., d0, d1)``."""
    if code == 0:
        return np.max(np.sum(np.abs(m), axis=-1), axis=-1)
    if code == 1:
        return np.max(np.sum(np.abs(m), axis=-2), axis=-1)
    if m.shape[-1] == 1 and m.shape[-2] == 1:
        return np.abs(m[..., 0, 0])
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


# -- RK4 one-step propagators --------------------------------------------------


def _mm_loop(a, b, out):
    d = a.shape[0]
    for r in range(d):
        for c in range(d):
            acc = 0.0
            for e in range(d):
                acc += a[r, e] * b[e, c]
            out[r, c] = acc


_mm = _accel.njit(_mm_loop) or _mm_loop


def _rk4_loop(af, h, sub):
    nsteps = (af.shape[0] - 1) // (2 * sub)
    d = af.shape[1]
    fwd = np.empty((nsteps, d, d))
    bwd = np.empty((nsteps, d, d))
    dt = h / sub
    m = np.empty((d, d))
    y = np.empty((d, d))
    k1 = np.empty((d, d))
    k2 = np.empty((d, d))
    k3 = np.empty((d, d))
    k4 = np.empty((d, d))
    for i in range(nsteps):
        base = 2 * sub * i
        for direction in range(2):
            m[:, :] = 0.0
            for r in range(d):
                m[r, r] = 1.0
            hh = dt if direction == 0 else -dt
            for s in range(sub):
                if direction == 0:
                    j0 = base + 2 * s
                    j1 = j0 + 1
                    j2 = j0 + 2
                else:
                    j0 = base + 2 * sub - 2 * s
                    j1 = j0 - 1
                    j2 = j0 - 2
                _mm(af[j0], m, k1)
                for r in range(d):
                    for c in range(d):
                        y[r, c] = m[r, c] + 0.5 * hh * k1[r, c]
                _mm(af[j1], y, k2)
                for r in range(d):
                    for c in range(d):
                        y[r, c] = m[r, c] + 0.5 * hh * k2[r, c]
                _mm(af[j1], y, k3)
                for r in range(d):
                    for c in range(d):
                        y[r, c] = m[r, c] + hh * k3[r, c]
                _mm(af[j2], y, k4)
                for r in range(d):
                    for c in range(d):
                        m[r, c] += (hh / 6.0) * (k1[r, c] + 2.0 * k2[r, c] + 2.0 * k3[r, c] + k4[r, c])
            if direction == 0:
                fwd[i] = m
            else:
                bwd[i] = m
    return fwd, bwd


def _rk4_scalar_loop(a, h, sub):
    nsteps = (a.shape[0] - 1) // (2 * sub)
    fwd = np.empty(nsteps)
    bwd = np.empty(nsteps)
    dt = h / sub
    for i in range(nsteps):
        base = 2 * sub * i
        m = 1.0
        for s in range(sub):
            j0 = base + 2 * s
            k1 = a[j0] * m
            k2 = a[j0 + 1] * (m + 0.5 * dt * k1)
            k3 = a[j0 + 1] * (m + 0.5 * dt * k2)
            k4 = a[j0 + 2] * (m + dt * k3)
            m = m + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        fwd[i] = m
        m = 1.0
        for s in range(sub):
            j0 = base + 2 * sub - 2 * s
            k1 = a[j0] * m
            k2 = a[j0 - 1] * (m - 0.5 * dt * k1)
            k3 = a[j0 - 1] * (m - 0.5 * dt * k2)
            k4 = a[j0 - 2] * (m - dt * k3)
            m = m - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        bwd[i] = m
    return fwd, bwd


_rk4_nb = _accel.njit(_rk4_loop)
_rk4_scalar_nb = _accel.njit(_rk4_scalar_loop)


def rk4_propagators_numpy(af, h, sub):
    af = np.asarray(af, dtype=float)
    nsteps = (af.shape[0] - 1) // (2 * sub)
    d = af.shape[1]
    dt = h / sub
    base = 2 * sub * np.arange(nsteps)
    out = []
    for sgn in (1.0, -1.0):
        m = np.broadcast_to(np.eye(d), (nsteps, d, d)).copy()
        hh = sgn * dt
        for s in range(sub):
            if sgn > 0:
                j0 = base + 2 * s
                j1, j2 = j0 + 1, j0 + 2
            else:
                j0 = base + 2 * sub - 2 * s
                j1, j2 = j0 - 1, j0 - 2
            a0, a1, a2 = af[j0], af[j1], af[j2]
            k1 = a0 @ m
            k2 = a1 @ (m + 0.5 * hh * k1)
            k3 = a1 @ (m + 0.5 * hh * k2)
            k4 = a2 @ (m + hh * k3)
            m = m + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out.append(m)
    return out[0], out[1]


def rk4_propagators_numba(af, h, sub):
    af = np.ascontiguousarray(af, dtype=float)
    if af.shape[1] == 1:
        f, b = _rk4_scalar_nb(np.ascontiguousarray(af[:, 0, 0]), float(h), int(sub))
        return f[:, None, None], b[:, None, None]
    return _rk4_nb(af, float(h), int(sub))


def rk4_propagators(af, h, sub):
    """One-step RK4 propagators of ``M' = A(t) M`` for one block.

    Parameters
    ----------
    af : ndarray, shape (2*sub*S + 1, d, d)
        ``A`` sampled at spacing ``h / (2*sub)`` (stage points of ``sub``
        RK4 substeps per grid step).
    h : float
        Grid step.
    sub : int
        Number of RK4 substeps per grid step.

    Returns
    -------
    fwd, bwd : ndarray, shape (S, d, d)
        ``fwd[i] = L(t_{i+1}, t_i)`` and ``bwd[i] = L(t_i, t_{i+1})``, each
        integrated in its own direction.
    """
    if _accel.USE_NUMBA:
        return rk4_propagators_numba(af, h, sub)
    return rk4_propagators_numpy(af, h, sub)


# -- propagation and directional trapezoid accumulation -----------------------


def _prop_bwd_loop(steps, x_end):
    n = steps.shape[0] + 1
    d, c = x_end.shape
    out = np.empty((n, d, c))
    out[n - 1] = x_end
    for i in range(n - 2, -1, -1):
        for b in range(c):
            for a in range(d):
                s = 0.0
                for e in range(d):
                    s += steps[i, a, e] * out[i + 1, e, b]
                out[i, a, b] = s
    return out


def _prop_fwd_loop(steps, x0):
    n = steps.shape[0] + 1
    d, c = x0.shape
    out = np.empty((n, d, c))
    out[0] = x0
    for i in range(n - 1):
        for b in range(c):
            for a in range(d):
                s = 0.0
                for e in range(d):
                    s += steps[i, a, e] * out[i, e, b]
                out[i + 1, a, b] = s
    return out


def _acc_bwd_loop(steps, g, h):
    n = g.shape[0]
    d = g.shape[1]
    c = g.shape[2]
    out = np.zeros((n, d, c))
    half = 0.5 * h
    for i in range(n - 2, -1, -1):
        for b in range(c):
            for a in range(d):
                s = 0.0
                for e in range(d):
                    s += steps[i, a, e] * (out[i + 1, e, b] + half * g[i + 1, e, b])
                out[i, a, b] = s + half * g[i, a, b]
    return out


def _acc_fwd_loop(steps, g, h):
    n = g.shape[0]
    d = g.shape[1]
    c = g.shape[2]
    out = np.zeros((n, d, c))
    half = 0.5 * h
    for i in range(n - 1):
        for b in range(c):
            for a in range(d):
                s = 0.0
                for e in range(d):
                    s += steps[i, a, e] * (out[i, e, b] + half * g[i, e, b])
                out[i + 1, a, b] = s + half * g[i + 1, a, b]
    return out


_prop_bwd_nb = _accel.njit(_prop_bwd_loop)
_prop_fwd_nb = _accel.njit(_prop_fwd_loop)
_acc_bwd_nb = _accel.njit(_acc_bwd_loop)
_acc_fwd_nb = _accel.njit(_acc_fwd_loop)


def _scalar_chain(steps, g, h, backward):
    # 1x1 blocks: x_{j+1} = a_j x_j + b_j unrolled with prefix products,
    # restarted every 64 steps so the products stay near 1.
    a = steps[:, 0, 0]
    half = 0.5 * h
    if backward:
        b = a[:, None] * half * g[1:, 0, :] + half * g[:-1, 0, :]
        a = a[::-1]
        b = b[::-1]
    else:
        b = a[:, None] * half * g[:-1, 0, :] + half * g[1:, 0, :]
    n = a.shape[0]
    out = np.zeros((n + 1, g.shape[2]))
    if n and np.all(a > 0):
        blk = 64
        acc = np.zeros(g.shape[2])
        for start in range(0, n, blk):
            aa = a[start:start + blk]
            bb = b[start:start + blk]
            p = np.cumprod(aa)
            contrib = np.cumsum(bb / p[:, None], axis=0) * p[:, None]
            out[start + 1:start + 1 + aa.shape[0]] = acc[None, :] * p[:, None] + contrib
            acc = out[start + aa.shape[0]]
    else:
        acc = np.zeros(g.shape[2])
        for j in range(n):
            acc = a[j] * acc + b[j]
            out[j + 1] = acc
    if backward:
        out = out[::-1]
    return out[:, None, :]


def propagate_backward(steps, x_end):
    """Return ``out[i] = steps[i] @ ... @ steps[S-1] @ x_end``."""
    x_end = np.asarray(x_end, dtype=float)
    if _accel.USE_NUMBA:
        return _prop_bwd_nb(np.ascontiguousarray(steps), np.ascontiguousarray(x_end))
    n = steps.shape[0] + 1
    out = np.empty((n,) + x_end.shape)
    out[n - 1] = x_end
    if steps.shape[1] == 1:
        cp = np.cumprod(steps[::-1, 0, 0])[::-1]
        out[:-1] = cp[:, None, None] * x_end[None]
        return out
    for i in range(n - 2, -1, -1):
        out[i] = steps[i] @ out[i + 1]
    return out


def propagate_forward(steps, x0):
    """Return ``out[i] = steps[i-1] @ ... @ steps[0] @ x0``."""
    x0 = np.asarray(x0, dtype=float)
    if _accel.USE_NUMBA:
        return _prop_fwd_nb(np.ascontiguousarray(steps), np.ascontiguousarray(x0))
    n = steps.shape[0] + 1
    out = np.empty((n,) + x0.shape)
    out[0] = x0
    if steps.shape[1] == 1:
        cp = np.cumprod(steps[:, 0, 0])
        out[1:] = cp[:, None, None] * x0[None]
        return out
    for i in range(n - 1):
        out[i + 1] = steps[i] @ out[i]
    return out


def accumulate_backward_numpy(steps, g, h):
    if steps.shape[1] == 1:
        return _scalar_chain(steps, g, h, backward=True)
    n = g.shape[0]
    out = np.zeros_like(g)
    half = 0.5 * h
    for i in range(n - 2, -1, -1):
        out[i] = steps[i] @ (out[i + 1] + half * g[i + 1]) + half * g[i]
    return out


def accumulate_forward_numpy(steps, g, h):
    if steps.shape[1] == 1:
        return _scalar_chain(steps, g, h, backward=False)
    n = g.shape[0]
    out = np.zeros_like(g)
    half = 0.5 * h
    for i in range(n - 1):
        out[i + 1] = steps[i] @ (out[i] + half * g[i]) + half * g[i + 1]
    return out


def accumulate_backward_numba(steps, g, h):
    return _acc_bwd_nb(np.ascontiguousarray(steps), np.ascontiguousarray(g), float(h))


def accumulate_forward_numba(steps, g, h):
    return _acc_fwd_nb(np.ascontiguousarray(steps), np.ascontiguousarray(g), float(h))


def accumulate_backward(steps, g, h):
    """Trapezoid values of ``I(t_i) = int_{t_i}^{t_last} L(t_i, s) g(s) ds``.

    Parameters
    ----------
    steps : ndarray, shape (S, d, d)
        Backward steps ``L(t_i, t_{i+1})``.
    g : ndarray, shape (S + 1, d, c)
        Integrand samples at the nodes.
    h : float
        Grid step.
    """
    if _accel.USE_NUMBA:
        return accumulate_backward_numba(steps, g, h)
    return accumulate_backward_numpy(steps, g, h)


def accumulate_forward(steps, g, h):
    """Trapezoid values of ``I(t_i) = int_{t_0}^{t_i} L(t_i, s) g(s) ds``.

    ``steps`` are forward steps ``L(t_{i+1}, t_i)``; see
    :func:`accumulate_backward` for shapes.
    """
    if _accel.USE_NUMBA:
        return accumulate_forward_numba(steps, g, h)
    return accumulate_forward_numpy(steps, g, h)


# -- weighted window suprema ---------------------------------------------------


def _window_sup_loop(steps, x, idx, rate, h, w, code, forward):
    p = x.shape[0]
    d = x.shape[1]
    nsteps = steps.shape[0]
    best = np.empty(p)
    argj = np.empty(p, dtype=np.int64)
    suspect = np.zeros(p, dtype=np.bool_)
    v = np.empty(d)
    tmp = np.empty(d)
    for q in range(p):
        i = idx[q]
        for a in range(d):
            v[a] = x[q, a]
        if forward:
            jmax = min(w, nsteps - i)
        else:
            jmax = min(w, i)
        cut = int(np.ceil(0.9 * jmax))
        b_in = _vnorm(v, code)
        j_in = 0
        b_tail = -1.0
        j_tail = 0
        for j in range(1, jmax + 1):
            if forward:
                s = i + j - 1
            else:
                s = i - j
            for a in range(d):
                acc = 0.0
                for e in range(d):
                    acc += steps[s, a, e] * v[e]
                tmp[a] = acc
            for a in range(d):
                v[a] = tmp[a]
            val = np.exp(rate * j * h) * _vnorm(v, code)
            if j < cut:
                if val > b_in:
                    b_in = val
                    j_in = j
            elif val > b_tail:
                b_tail = val
                j_tail = j
        if b_tail > b_in:
            best[q] = b_tail
            argj[q] = j_tail
            if b_tail > b_in * (1.0 + SUSPECT_MARGIN):
                suspect[q] = True
        else:
            best[q] = b_in
            argj[q] = j_in
    return best, argj, suspect


_window_sup_nb = _accel.njit(_window_sup_loop)


def window_sup_numpy(steps, x, idx, rate, h, w, code, forward):
    x = np.asarray(x, dtype=float)
    idx = np.asarray(idx, dtype=np.int64)
    nsteps = steps.shape[0]
    p = x.shape[0]
    jmax = np.minimum(w, nsteps - idx) if forward else np.minimum(w, idx)
    cut = np.ceil(0.9 * jmax).astype(np.int64)
    v = x.copy()
    b_in = vnorm_rows(v, code)
    j_in = np.zeros(p, dtype=np.int64)
    b_tail = np.full(p, -1.0)
    j_tail = np.zeros(p, dtype=np.int64)
    top = int(jmax.max()) if p else 0
    for j in range(1, top + 1):
        act = np.nonzero(jmax >= j)[0]
        if act.size == 0:
            break
        s = idx[act] + j - 1 if forward else idx[act] - j
        v[act] = np.einsum("pab,pb->pa", steps[s], v[act])
        val = np.exp(rate * j * h) * vnorm_rows(v[act], code)
        inner = j < cut[act]
        up = inner & (val > b_in[act])
        b_in[act[up]] = val[up]
        j_in[act[up]] = j
        up = ~inner & (val > b_tail[act])
        b_tail[act[up]] = val[up]
        j_tail[act[up]] = j
    tail_wins = b_tail > b_in
    best = np.where(tail_wins, b_tail, b_in)
    argj = np.where(tail_wins, j_tail, j_in)
    suspect = b_tail > b_in * (1.0 + SUSPECT_MARGIN)
    return best, argj, suspect


def window_sup_numba(steps, x, idx, rate, h, w, code, forward):
    return _window_sup_nb(
        np.ascontiguousarray(steps),
        np.ascontiguousarray(x, dtype=float),
        np.ascontiguousarray(idx, dtype=np.int64),
        float(rate),
        float(h),
        int(w),
        int(code),
        bool(forward),
    )


def window_sup(steps, x, idx, rate, h, w, code, forward):
    """Windowed weighted suprema ``max_j e^{rate j h} ||L_j x||``.

    For each row ``x[q]`` anchored at node ``idx[q]`` the vector is walked
    ``j = 0..w`` steps (forward with ``steps[i+j-1]`` or backward with
    ``steps[i-j]``), stopping early at the grid edge.

    Returns
    -------
    best : ndarray
        The suprema.
    argj : ndarray of int
        Step offsets where they are attained.
    suspect : ndarray of bool
        True where the last tenth of the walked window beats the rest by a
        relative margin of ``SUSPECT_MARGIN`` (supremum possibly cut off by truncation).
    """
    if _accel.USE_NUMBA:
        return window_sup_numba(steps, x, idx, rate, h, w, code, forward)
    return window_sup_numpy(steps, x, idx, rate, h, w, code, forward)


def _pair_sup_loop(steps, rate, h, w, code, forward, lo, hi):
    d = steps.shape[1]
    nsteps = steps.shape[0]
    best = 0.0
    b_anchor = lo
    b_j = 0
    m = np.empty((d, d))
    tmp = np.empty((d, d))
    for i in range(lo, hi + 1):
        m[:, :] = 0.0
        for r in range(d):
            m[r, r] = 1.0
        if forward:
            jmax = min(w, nsteps - i)
        else:
            jmax = min(w, i)
        for j in range(1, jmax + 1):
            if forward:
                _mm(steps[i + j - 1], m, tmp)
            else:
                _mm(steps[i - j], m, tmp)
            m[:, :] = tmp
            val = np.exp(rate * j * h) * _onorm(m, code)
            if val > best:
                best = val
                b_anchor = i
                b_j = j
    return best, b_anchor, b_j


def _pair_sup_scalar_loop(a, rate, h, w, forward, lo, hi):
    nsteps = a.shape[0]
    best = 0.0
    b_anchor = lo
    b_j = 0
    for i in range(lo, hi + 1):
        m = 1.0
        if forward:
            jmax = min(w, nsteps - i)
        else:
            jmax = min(w, i)
        for j in range(1, jmax + 1):
            if forward:
                m = a[i + j - 1] * m
            else:
                m = a[i - j] * m
            val = np.exp(rate * j * h) * abs(m)
            if val > best:
                best = val
                b_anchor = i
                b_j = j
    return best, b_anchor, b_j


_pair_sup_nb = _accel.njit(_pair_sup_loop)
_pair_sup_scalar_nb = _accel.njit(_pair_sup_scalar_loop)


def pair_sup_numpy(steps, rate, h, w, code, forward, lo, hi):
    d = steps.shape[1]
    nsteps = steps.shape[0]
    anchors = np.arange(lo, hi + 1)
    jmax = np.minimum(w, nsteps - anchors) if forward else np.minimum(w, anchors)
    m = np.broadcast_to(np.eye(d), (anchors.size, d, d)).copy()
    best, b_anchor, b_j = 0.0, lo, 0
    for j in range(1, int(jmax.max()) + 1 if anchors.size else 1):
        act = np.nonzero(jmax >= j)[0]
        if act.size == 0:
            break
        s = anchors[act] + j - 1 if forward else anchors[act] - j
        m[act] = steps[s] @ m[act]
        val = np.exp(rate * j * h) * onorm_stack(m[act], code)
        q = int(np.argmax(val))
        if val[q] > best:
            best, b_anchor, b_j = float(val[q]), int(anchors[act[q]]), j
    return best, b_anchor, b_j


def pair_sup_numba(steps, rate, h, w, code, forward, lo, hi):
    steps = np.ascontiguousarray(steps)
    if steps.shape[1] == 1:
        return _pair_sup_scalar_nb(
            np.ascontiguousarray(steps[:, 0, 0]), float(rate), float(h), int(w),
            bool(forward), int(lo), int(hi),
        )
    return _pair_sup_nb(steps, float(rate), float(h), int(w), int(code), bool(forward), int(lo), int(hi))


def pair_sup(steps, rate, h, w, code, forward, lo, hi):
    """Largest ``e^{rate j h} ||L(anchor +- j, anchor)||`` over anchors and offsets.

    Anchors run over node indices ``lo..hi``; offsets over ``1..w`` (clipped
    at the grid edge).  Returns ``(value, anchor, offset)``.
    """
    if _accel.USE_NUMBA:
        return pair_sup_numba(steps, rate, h, w, code, forward, lo, hi)
    return pair_sup_numpy(steps, rate, h, w, code, forward, lo, hi)
