"""Time the numba kernels against their numpy fallbacks on the same inputs.

    python3 benchmarks/bench_kernels.py [--n 4000] [--repeat 5]

Each kernel is called once untimed (this triggers JIT compilation), then
timed as the best of ``--repeat`` calls.  Outputs of both backends are
compared before any timing is reported.
"""
import argparse
import time

import numpy as np

from lambdaflow._accel import HAVE_NUMBA
from lambdaflow.kernels import BACKENDS


def inputs(n, rng):
    t = np.linspace(0.0, 1.0, n)
    u = np.exp(-t)[:, None]
    zt = np.maximum(t - 0.2, 0.0)
    v = np.exp(-zt)[:, None]
    circle = np.column_stack([np.cos(4 * np.pi * t), np.sin(4 * np.pi * t)])
    walk = np.cumsum(rng.normal(size=n)) / np.sqrt(n)
    return {
        "max_rise": (walk,),
        "freeze_index": (v, 1e-9),
        "return_violation": (circle, 1e-6, 2e-6),
        "polyline_distance": (u, v),
        "leftmost_match": (v, u, t, 1e-6),
        "node_match_bounds": (v, u, t, 1e-6),
        "reachable_windows": (v, np.diff(t), u, t, 1e-6, 0.5 / n),
        "cantor_function": (rng.uniform(-0.1, 1.1, 50 * n), 20),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=0, atol=1e-12, equal_nan=True)


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    data = inputs(args.n, np.random.default_rng(args.seed))
    print(f"{'kernel':<20}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}  agree")
    for name, nb in BACKENDS["numba"].items():
        np_fn = BACKENDS["numpy"][name]
        call = data[name]
        agree = same(nb(*call), np_fn(*call))
        t_nb = best_of(nb, call, args.repeat)
        t_np = best_of(np_fn, call, args.repeat)
        print(f"{name:<20}{t_nb:>12.2e}{t_np:>12.2e}{t_np / t_nb:>10.1f}  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
