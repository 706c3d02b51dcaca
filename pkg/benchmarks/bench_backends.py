"""Time the numba kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_backends.py [--repeat 3] [--steps 8000] [--json out.json]

Each kernel runs once per backend to warm up (numba compilation, caches)
and is then timed ``--repeat`` times; the best time is reported.  Results of
the two backends are compared before timing.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from lpm import _accel, kernels, systems
from lpm.solver import LPSolver


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _cases(steps, d, rng):
    h = 0.01
    w = min(2000, steps // 4)
    af = -np.eye(d) + 0.1 * rng.normal(size=(8 * steps + 1, d, d))
    fwd, bwd = kernels.rk4_propagators(af, h, 4)
    g = rng.normal(size=(steps + 1, d, 1))
    idx = np.arange(w, steps - w)
    x = rng.normal(size=(idx.size, d))
    return {
        "rk4_propagators": lambda: kernels.rk4_propagators(af, h, 4),
        "accumulate_backward": lambda: kernels.accumulate_backward(bwd, g, h),
        "accumulate_forward": lambda: kernels.accumulate_forward(fwd, g, h),
        "window_sup": lambda: kernels.window_sup(fwd, x, idx, 1.0, h, w, 0, True),
        "pair_sup": lambda: kernels.pair_sup(fwd, 1.0, h, w, 0, True, w, w + 400),
    }


def _end_to_end():
    s = LPSolver(systems.rotgap(0.6))
    s.solve_unstable(0.0, [1.0])


def run(repeat=3, steps=8000, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for d in (1, 2):
        cases = _cases(steps, d, rng)
        for name, fn in cases.items():
            _accel.set_backend("numba")
            ref = fn()
            _accel.set_backend("numpy")
            alt = fn()
            for a, b in zip(np.atleast_1d(ref) if not isinstance(ref, tuple) else ref,
                            np.atleast_1d(alt) if not isinstance(alt, tuple) else alt):
                if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
                    raise AssertionError(f"{name} (d={d}): backends disagree")
            timing = {}
            for backend in ("numba", "numpy"):
                _accel.set_backend(backend)
                timing[backend] = _best(fn, repeat)
            rows.append({"kernel": name, "block": d, **timing, "speedup": timing["numpy"] / timing["numba"]})
    timing = {}
    for backend in ("numba", "numpy"):
        _accel.set_backend(backend)
        timing[backend] = _best(_end_to_end, 1)
    rows.append({"kernel": "rotgap(0.6) setup+solve", "block": 1, **timing,
                 "speedup": timing["numpy"] / timing["numba"]})
    _accel.set_backend("numba")
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--steps", type=int, default=8000)
    p.add_argument("--json", help="write the table as JSON")
    args = p.parse_args(argv)
    rows = run(args.repeat, args.steps)
    print(f"{'kernel':<28}{'block':>6}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for r in rows:
        print(f"{r['kernel']:<28}{r['block']:>6}{r['numba']:>12.4f}{r['numpy']:>12.4f}{r['speedup']:>10.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
