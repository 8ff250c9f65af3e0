"""Compare the compiled and pure-numpy kernel backends.

    python benchmarks/bench_kernels.py [--mics 64] [--points 400] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from aeromap import kernels
from aeromap.geometry import FocusGrid, MicArray, propagation_matrix
from aeromap.physics import FlowConfig
from aeromap.recon import psf_matrix


def _setup(mics, points):
    side = int(round(np.sqrt(points)))
    grid = FocusGrid.regular((-0.5, -0.5, 0.0), (0.5, 0.5, 0.0), 1.0 / (side - 1))
    G = propagation_matrix(MicArray.spiral(mics, 1.5, 1.0), grid, FlowConfig.default(3))
    rng = np.random.default_rng(0)
    K = rng.standard_normal((mics, mics)) + 1j * rng.standard_normal((mics, mics))
    K = K + K.conj().T
    psi = psf_matrix(G).entries
    b = psi @ rng.uniform(0, 1, grid.size)
    return G.steering, K, psi, b


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mics", type=int, default=64)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--sweeps", type=int, default=50)
    args = p.parse_args(argv)
    S, K, psi, b = _setup(args.mics, args.points)
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    cases = {
        "quad_forms": lambda be: kernels.quad_forms(S, K, backend=be),
        "gram_abs2": lambda be: kernels.gram_abs2(S, backend=be),
        f"gs_solve x{args.sweeps}": lambda be: kernels.gs_solve(psi, b, np.zeros_like(b), args.sweeps, 1e-300,
                                                                backend=be),
    }
    print(f"M={S.shape[0]} N={S.shape[1]} (best of {args.repeat}); active backend: {kernels.BACKEND}")
    print(f"{'kernel':<16}" + "".join(f"{be:>14}" for be in backends) + ("   speedup" if len(backends) > 1 else ""))
    for name, fn in cases.items():
        times = [min(timeit.repeat(lambda: fn(be), number=1, repeat=args.repeat)) for be in backends]
        row = f"{name:<16}" + "".join(f"{t * 1e3:>11.3f} ms" for t in times)
        if len(times) > 1:
            row += f"   {times[0] / times[1]:7.2f}x"
        print(row)


if __name__ == "__main__":
    main()
