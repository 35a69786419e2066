"""Compiled versus numpy trajectory kernels.

Times one trajectory (with both phase-shifted siblings) per engine and
backend and checks that the two backends produce the same record.

    python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import math
import time

import numpy as np

from seqmag.kernels import available_backends
from seqmag.protocol import ProtocolParams, run_trajectory

CASES = [
    # engine, M, N, gamma2
    ("pure", 20, 4096, 0.0),
    ("pure", 40, 1024, 0.0),
    ("collective", 10, 1024, 1e-3),
    ("local", 10, 512, 1e-3),
]


def bench(engine, M, N, gamma2, backend, repeat):
    p = ProtocolParams(M=M, beta=0.02 / math.pi, phi=0.7, gamma2=gamma2, N_max=N)
    best, rec = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        rec = run_trajectory(p, 1, engine=engine, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, rec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'engine':<11}{'M':>4}{'N':>7}  " + "".join(f"{b + ' us/step':>18}" for b in backends)
          + f"{'speedup':>10}{'max |dFI|':>12}")
    for engine, M, N, g in CASES:
        res = {b: bench(engine, M, N, g, b, args.repeat) for b in backends}
        per = {b: 1e6 * t / N for b, (t, _) in res.items()}
        line = f"{engine:<11}{M:>4}{N:>7}  " + "".join(f"{per[b]:>18.2f}" for b in backends)
        if len(backends) == 2:
            a, b = res["cython"][1], res["python"][1]
            same = np.array_equal(a.outcomes, b.outcomes)
            dev = float(np.max(np.abs(a.cond_fisher - b.cond_fisher) / np.maximum(b.cond_fisher, 1e-300)))
            line += f"{per['python'] / per['cython']:>9.1f}x{dev:>12.1e}" + ("" if same else "  (records differ)")
        print(line)


if __name__ == "__main__":
    main()
