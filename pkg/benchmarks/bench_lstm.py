"""Benchmark the compiled LSTM kernel against the numpy fallback.

Runs forward+backward over same-length sequence groups at several sizes,
checks that both backends agree numerically, and prints a timing table.

    python benchmarks/bench_lstm.py [--repeats 50]
"""

import argparse
import time

import numpy as np

from mifusion.kernels import compiled, pyref
from mifusion.numeric import blas_single_thread, make_rng

CASES = [
    # (batch, length, d_in, d_hidden) - the defaults mirror the three encoders
    (32, 3, 12, 64),
    (32, 1, 8, 32),
    (32, 1, 6, 16),
    (32, 20, 16, 64),
    (128, 10, 32, 64),
]


def run_once(impl, w, b, x3, dh):
    h_out, caches = impl.lstm_group_forward(w, b, x3)
    impl.lstm_group_backward(w, x3, caches, dh)
    return h_out


def bench(impl, w, b, x3, dh, repeats):
    run_once(impl, w, b, x3, dh)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        run_once(impl, w, b, x3, dh)
    return (time.perf_counter() - start) / repeats * 1e3  # ms


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    if compiled is None:
        print("compiled kernel not built; showing the numpy fallback only")

    rng = make_rng(0)
    header = f"{'case (n,l,d,h)':>20} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    with blas_single_thread():
        for n, l, d, h in CASES:
            w = rng.normal(size=(4 * h, d + h)) * 0.2
            b = rng.normal(size=4 * h) * 0.1
            x3 = rng.normal(size=(n, l, d))
            dh = rng.normal(size=(n, h))
            t_py = bench(pyref, w, b, x3, dh, args.repeats)
            if compiled is not None:
                out_py = run_once(pyref, w, b, x3, dh)
                out_c = run_once(compiled, w, b, x3, dh)
                assert np.allclose(out_py, out_c, atol=1e-12), "backend outputs diverge"
                t_c = bench(compiled, w, b, x3, dh, args.repeats)
                print(f"{str((n, l, d, h)):>20} {t_py:>10.3f} {t_c:>12.3f} {t_py / t_c:>7.1f}x")
            else:
                print(f"{str((n, l, d, h)):>20} {t_py:>10.3f} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
