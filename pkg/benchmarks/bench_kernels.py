#!/usr/bin/env python3
"""Compiled vs NumPy jet kernels, plus one full forward/backward pass per backend.

Usage: python benchmarks/bench_kernels.py [--points 2805] [--width 64] [--D 200] [--repeat 20]
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeat):
    fn()
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts) * 1e3


def bench_kernels(args):
    from ifefpinn import _fallback
    try:
        from ifefpinn import _kernels
    except ImportError:
        _kernels = None
        print("compiled extension not built; only the NumPy fallback is timed")
    rng = np.random.default_rng(0)
    n, order, N, p, D = 2, 2, args.points, args.width, args.D
    C = 1 + n * order
    Z = rng.standard_normal((C, N, p))
    T = np.tanh(Z[0])
    Hb = rng.standard_normal((C, N, p))
    Y = rng.standard_normal((C, N, D))
    Pb = rng.standard_normal((C, N, 2 * D))
    s = 1 / np.sqrt(D)
    CS = _fallback.rff_forward(Y, n, order, s)[0].copy()
    cases = {
        "tanh_forward": lambda m: m.tanh_forward(Z, T, n, order),
        "tanh_backward": lambda m: m.tanh_backward(Z, T, Hb, n, order),
        "rff_forward": lambda m: m.rff_forward(Y, n, order, s),
        "rff_backward": lambda m: m.rff_backward(Y, CS, Pb, n, order, s),
    }
    print(f"kernels: N={N} width={p} D={D} C={C}, median of {args.repeat} (ms)")
    print(f"{'kernel':15s} {'numpy':>9s} {'compiled':>9s} {'speedup':>8s}")
    for name, call in cases.items():
        t_py = _time(lambda: call(_fallback), args.repeat)
        if _kernels is None:
            print(f"{name:15s} {t_py:9.2f} {'-':>9s}")
            continue
        t_c = _time(lambda: call(_kernels), args.repeat)
        err = np.abs(call(_kernels) - call(_fallback)).max()
        print(f"{name:15s} {t_py:9.2f} {t_c:9.2f} {t_py / t_c:7.1f}x   max|diff|={err:.1e}")


PASS_SNIPPET = """
import time, numpy as np
from ifefpinn import kernels
from ifefpinn.jets import NetworkParams
from ifefpinn.features import FeatureBasis, sample_rff, feature_jets, feature_backward
N, p, D, r = {N}, {p}, {D}, {r}
params = NetworkParams.init([2] + [p] * 6, 0)
basis = FeatureBasis(params, sample_rff(D, p, 1.0, 1))
X = np.random.default_rng(0).uniform(0, 1, (N, 2))
def step():
    P, c = feature_jets(basis, X, 2, keep=True)
    return feature_backward(basis, c, P)
step()
ts = []
for _ in range(r):
    t0 = time.perf_counter(); step(); ts.append(time.perf_counter() - t0)
print(kernels.BACKEND, sorted(ts)[len(ts) // 2] * 1e3)
"""


def bench_pass(args):
    code = PASS_SNIPPET.format(N=args.points, p=args.width, D=args.D, r=max(3, args.repeat // 4))
    print("\nfull forward+backward through a 6-layer net and the RFF map (ms):")
    for force in ("0", "1"):
        env = dict(os.environ, IFEF_PURE_PYTHON=force)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"  {out[0]:9s} {float(out[1]):9.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=2805)
    ap.add_argument("--width", type=int, default=64)
    ap.add_argument("--D", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    bench_kernels(args)
    bench_pass(args)


if __name__ == "__main__":
    main()
