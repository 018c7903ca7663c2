"""Benchmark: compiled kernels vs the NumPy fallback.

Times the individual pointwise kernels on hot-loop-sized arrays and a short
end-to-end integration with each backend.  Run:

    python benchmarks/bench_kernels.py [n] [steps]

The script imports both backends directly so one process can compare them
(the package-level selection is still controlled by ROSSBYLAB_PURE_PYTHON).
"""

import sys
import time

import numpy as np

from rossbylab import _kernels_np as np_backend

try:
    from rossbylab import _kernels_cy as cy_backend
except ImportError:
    cy_backend = None


def time_call(fn, *args, repeats=200):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_kernels(n):
    rng = np.random.default_rng(0)
    arrays = [np.ascontiguousarray(rng.standard_normal((n, n))) for _ in range(6)]
    out1, out2 = np.empty((n, n)), np.empty((n, n))
    cases = {
        "advect_scalar": lambda k: k.advect_scalar(*arrays[:4], out1),
        "advect_vector": lambda k: k.advect_vector(*arrays[:6], out1, out2),
        "lincomb3": lambda k: k.lincomb3(
            0.75, arrays[0], 0.25, arrays[1], 0.1, arrays[2], out1
        ),
        "perp_force": lambda k: k.perp_force(*arrays[:3], out1, out2),
        "weighted_energy": lambda k: k.weighted_energy(
            arrays[0], 0.1, arrays[1], arrays[2]
        ),
        "max_speed": lambda k: k.max_speed(arrays[0], arrays[1]),
    }
    print(f"\npointwise kernels, {n}x{n} arrays (best of 200):")
    header = f"{'kernel':>16} {'numpy':>12} {'cython':>12} {'speedup':>9}"
    print(header)
    for name, call in cases.items():
        t_np = time_call(call, np_backend)
        if cy_backend is None:
            print(f"{name:>16} {t_np * 1e6:>10.1f}us {'n/a':>12} {'':>9}")
            continue
        t_cy = time_call(call, cy_backend)
        print(
            f"{name:>16} {t_np * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us "
            f"{t_np / t_cy:>8.2f}x"
        )


def bench_integration(n, steps):
    import importlib
    import os

    results = {}
    for label, env in (("cython", None), ("numpy", "1")):
        if label == "cython" and cy_backend is None:
            continue
        if env is None:
            os.environ.pop("ROSSBYLAB_PURE_PYTHON", None)
        else:
            os.environ["ROSSBYLAB_PURE_PYTHON"] = env
        import rossbylab.kernels as kmod

        importlib.reload(kmod)
        import rossbylab.primitive as pmod

        importlib.reload(pmod)
        import rossbylab.qh as qmod

        importlib.reload(qmod)
        from rossbylab.spectral import GridSpec

        state = pmod.make_initial_data(GridSpec(n), delta=0.1, epsilon=0.1, seed=0)
        params = pmod.SolverParams(dt=1e-3)
        start = time.perf_counter()
        cur = state
        for _ in range(steps):
            cur = pmod.step_primitive(cur, params, 1e-3)
        results[label] = time.perf_counter() - start
        print(
            f"{label:>8}: {steps} primitive steps at n={n}: "
            f"{results[label]:.3f}s ({results[label] / steps * 1e3:.2f} ms/step)"
        )
    if len(results) == 2:
        print(f"end-to-end speedup: {results['numpy'] / results['cython']:.2f}x")
    os.environ.pop("ROSSBYLAB_PURE_PYTHON", None)


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 256
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 40
    if cy_backend is None:
        print("compiled backend unavailable; timing the fallback only")
    bench_kernels(n)
    print("\nend-to-end (FFT-dominated, so the gap narrows):")
    bench_integration(min(n, 128), steps)


if __name__ == "__main__":
    main()
