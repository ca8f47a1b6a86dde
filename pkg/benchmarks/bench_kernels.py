"""Compare the compiled accumulation kernel with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--samples 200000] [--dim 4] [--repeat 5]

Both kernels receive identical inputs; the script checks that they agree and
prints the best wall time of each together with an end-to-end importance
sampling estimate timed under both backends.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from logtails import _kernels_py
from logtails.monte_carlo import McConfig, estimate_left_is, optimal_drift_left
from logtails.matrix_core import CovMatrix, ModelSpec

try:
    from logtails import _kernels as _compiled
except ImportError:
    _compiled = None


def _model(n: int, rho: float = 0.2, sigma: float = 1.0) -> ModelSpec:
    cov = sigma**2 * ((1 - rho) * np.eye(n) + rho * np.ones((n, n)))
    return ModelSpec(np.zeros(n), CovMatrix(cov), n)


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--dim", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    n = args.dim
    rng = np.random.default_rng(0)
    z = np.ascontiguousarray(rng.standard_normal((args.samples, n)))
    model = _model(n)
    chol = np.ascontiguousarray(np.linalg.cholesky(model.cov.entries))
    center = np.full(n, -1.0)
    signs = np.ones(n)
    alpha = np.full(n, 0.5)
    inputs = (z, chol, center, signs, alpha, 0.0, math.exp(-1.0), False)

    ref = _kernels_py.accumulate_chunk(*inputs)
    t_py = _best(lambda: _kernels_py.accumulate_chunk(*inputs), args.repeat)
    print(f"kernel  numpy   {t_py * 1e3:9.2f} ms  ({args.samples} samples, n={n})")
    if _compiled is None:
        print("kernel  cython  not built")
    else:
        out = _compiled.accumulate_chunk(*inputs)
        assert out[0] == ref[0], "hit counts differ"
        assert all(math.isclose(a, b, rel_tol=1e-10) for a, b in zip(out[1:], ref[1:]))
        t_cy = _best(lambda: _compiled.accumulate_chunk(*inputs), args.repeat)
        print(f"kernel  cython  {t_cy * 1e3:9.2f} ms  speedup {t_py / t_cy:.2f}x")

    x = math.exp(-10.0)
    drift = optimal_drift_left(model)
    cfg = McConfig(n_samples=args.samples, seed=1)
    t0 = time.perf_counter()
    est = estimate_left_is(model, x, cfg, drift)
    t_end = time.perf_counter() - t0
    print(f"estimate_left_is at e^-10: {est.estimate:.5e} +- {est.std_error:.1e} in {t_end * 1e3:.1f} ms")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
