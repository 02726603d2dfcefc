"""Compare the compiled kernels against the plain-array fallback on
full-size frames (1382x512, the usual dashcam resolution).

Run:  python3 benchmarks/bench_kernels.py [--repeats 20]
"""

import argparse
import time

import numpy as np

from vdp import _kernels_numpy as plain
from vdp.imageproc import SsimParams

try:
    from vdp import _kernels_numba as compiled
except ImportError:
    compiled = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--width", type=int, default=1382)
    parser.add_argument("--height", type=int, default=512)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    a = rng.uniform(0, 255, (args.height, args.width))
    b = rng.uniform(0, 255, (args.height, args.width))
    params = SsimParams()

    def vol_with(backend):
        response = backend.laplacian_response(a)
        return response.var()

    def ssim_with(backend):
        return backend.ssim_mean(a, b, params.window_side, params.c1, params.c2)

    rows = []
    for name, fn in (("vol", vol_with), ("ssim", ssim_with)):
        plain_time = timeit(lambda: fn(plain), args.repeats)
        if compiled is not None:
            fn(compiled)  # trigger JIT outside the timed region
            compiled_time = timeit(lambda: fn(compiled), args.repeats)
            rows.append((name, plain_time, compiled_time))
        else:
            rows.append((name, plain_time, None))

    print(f"frame {args.width}x{args.height}, best of {args.repeats}")
    print(f"{'kernel':<8} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, plain_time, compiled_time in rows:
        if compiled_time is None:
            print(f"{name:<8} {plain_time * 1e3:>10.2f}ms {'n/a':>12} {'n/a':>9}")
        else:
            print(
                f"{name:<8} {plain_time * 1e3:>10.2f}ms {compiled_time * 1e3:>10.2f}ms "
                f"{plain_time / compiled_time:>8.1f}x"
            )

    if compiled is not None:
        lap_plain = plain.laplacian_response(a)
        lap_compiled = compiled.laplacian_response(a)
        print(f"laplacian max |diff|: {np.abs(lap_plain - lap_compiled).max():g}")
        print(f"ssim |diff|: {abs(ssim_with(plain) - ssim_with(compiled)):g}")


if __name__ == "__main__":
    main()
