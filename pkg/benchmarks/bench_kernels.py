"""Compare the numba and numpy kernel backends on the shapes training uses.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from qcgan import _accel, kernels
from qcgan.metrics import sqrtm_psd
from qcgan.model import build_variational_layers


def cases(batch):
    rng = np.random.default_rng(0)
    spec = build_variational_layers(5, 4)
    theta = rng.normal(size=spec.n_params)
    states = rng.normal(size=(batch, 32)) + 1j * rng.normal(size=(batch, 32))
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    upstream = rng.normal(size=(batch, 32))
    cov = rng.normal(size=(64, 64))
    cov = cov @ cov.T

    def forward():
        kernels.run_gates(spec.tables, theta, states.copy())

    def backward():
        kernels.adjoint(spec.tables, theta, states, upstream, spec.n_params)

    def sqrtm():
        sqrtm_psd(cov)

    return {f"circuit forward (batch {batch})": forward, f"adjoint gradient (batch {batch})": backward, "sqrtm 64x64": sqrtm}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--batch", type=int, default=200)
    args = parser.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed")

    timings = {}
    for backend in ("numba", "numpy"):
        _accel.set_jit(backend == "numba")
        for name, fn in cases(args.batch).items():
            fn()  # compile / warm caches
            timings.setdefault(name, {})[backend] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    print(f"{'kernel':<30}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, t in timings.items():
        print(f"{name:<30}{t['numba'] * 1e3:>10.3f}{t['numpy'] * 1e3:>10.3f}{t['numpy'] / t['numba']:>8.1f}x")


if __name__ == "__main__":
    main()
