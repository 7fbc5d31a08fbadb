"""Time the compiled and pure-Python kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import json
import sys
import timeit

import numpy as np

from epipolicy import kernels
from epipolicy.optimize import NelderMeadOptions


def _cases(horizon, seed):
    rng = np.random.default_rng(seed)
    n = 1.38e9
    trans = 0.45 * (1 - rng.uniform(30, 97, horizon) / 100)
    nu = np.where(np.arange(horizon) > 260, 1.5e-3, 0.0)
    y = rng.uniform(0, 1e6, horizon)
    f = y + rng.normal(0, 5, horizon)
    win = 15
    path, _ = kernels.get_backend("python").rk4_path(n - 1e5, 1e5, 0.0, n, 0.11, trans[:win], np.full(win, 8e-4))
    o = NelderMeadOptions()
    window_args = (
        n - 1e5, 1e5, 0.0, n, 0.11, trans[:win].copy(), path[:, 0].copy(), path[:, 1].copy(), path[:, 2].copy(),
        np.array([0.0, 2.5e-3, 1.25e-3, 3.75e-3]), 0.05,
        o.reflect, o.expand, o.contract, o.shrink, o.rtol, o.atol, o.xrtol, o.xatol, o.max_iter, o.rel_step,
        o.zero_step,
    )
    return {
        "rk4_path": ("rk4_path", (n - 1e5, 1e5, 0.0, n, 0.11, trans, nu)),
        "huber_sum": ("huber_sum", (y, f, 1.0)),
        "fit_window_nu": ("fit_window_nu", window_args),
    }


def _time(fn, args, repeat, number):
    return min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)) / number


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--horizon", type=int, default=915, help="days per integration (default 915)")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--number", type=int, default=20, help="calls per timing sample")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="print results as JSON")
    args = p.parse_args(argv)

    try:
        compiled = kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
        return 1
    python = kernels.get_backend("python")

    rows = []
    for name, (attr, fargs) in _cases(args.horizon, args.seed).items():
        t_py = _time(getattr(python, attr), fargs, args.repeat, max(1, args.number // 10))
        t_cy = _time(getattr(compiled, attr), fargs, args.repeat, args.number)
        rows.append({"kernel": name, "python_s": t_py, "cython_s": t_cy, "speedup": t_py / t_cy})

    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"{'kernel':<15}{'python':>12}{'cython':>12}{'speedup':>10}")
        for r in rows:
            print(f"{r['kernel']:<15}{r['python_s'] * 1e3:>10.3f}ms{r['cython_s'] * 1e3:>10.3f}ms{r['speedup']:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
