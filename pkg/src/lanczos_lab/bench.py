"""Benchmark the compiled double-double kernels against the pure-numpy
fallback: `python -m lanczos_lab.bench [n]`."""

from __future__ import annotations

import sys
import time

import numpy as np

from . import _kernels_pure


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(n: int = 1200, k: int = 48) -> None:
    try:
        from . import _ddcore
        impls = [("compiled", _ddcore), ("pure", _kernels_pure)]
    except ImportError:
        print("compiled core not built; timing the pure backend only")
        impls = [("pure", _kernels_pure)]

    rng = np.random.default_rng(0)
    A = np.ascontiguousarray(rng.standard_normal((n, n)))
    A = (A + A.T) / (2 * np.sqrt(2 * n))
    xh = rng.standard_normal(n)
    xl = xh * 1e-17
    Qh = np.ascontiguousarray(rng.standard_normal((n, k)))
    Ql = Qh * 1e-17
    ch = rng.standard_normal(k)
    cl = ch * 1e-17
    d_al = np.zeros(k)
    d_be = np.full(k, 0.5)

    cases = {
        "dot (n)": lambda impl: impl.dot_dd(xh, xl, xh, xl),
        "matvec f64xdd (n x n)": lambda impl: impl.matvec_f64_dd(A, xh, xl),
        "gram^T dd (n x k)": lambda impl: impl.gramt_dd(Qh, Ql, xh, xl),
        "matvec ddxdd (n x k)": lambda impl: impl.matvec_dd_dd(Qh, Ql, ch, cl),
    }

    print(f"double-double kernel timings, n={n}, k={k} (best of 3, seconds)")
    header = f"{'kernel':<26}" + "".join(f"{name:>12}" for name, _ in impls)
    if len(impls) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, fn in cases.items():
        times = [_time(lambda impl=impl: fn(impl)) for _, impl in impls]
        line = f"{label:<26}" + "".join(f"{t:>12.5f}" for t in times)
        if len(times) == 2:
            line += f"{times[1] / times[0]:>9.1f}x"
        print(line)

    def ql(impl):
        zh = np.zeros((1, k))
        zh[0, 0] = 1.0
        impl.ql_implicit_dd(d_al.copy(), np.zeros(k), np.append(d_be[:-1], 0.0),
                            np.zeros(k), zh, np.zeros((1, k)), 50)

    times = [_time(lambda impl=impl: ql(impl)) for _, impl in impls]
    line = f"{f'QL eigensolve (k={k})':<26}" + "".join(f"{t:>12.5f}" for t in times)
    if len(times) == 2:
        line += f"{times[1] / times[0]:>9.1f}x"
    print(line)

    # end-to-end: one extended-precision reorthogonalized Lanczos run
    from . import _backend
    from .ensembles import sample_goe
    from .lanczos import LanczosOptions, run_lanczos
    from .scalars import Precision

    problem = sample_goe(n, seed=1)
    opts = LanczosOptions(k=min(k, 24), precision=Precision.EXT128,
                          reorthogonalize=True)
    t = _time(lambda: run_lanczos(problem, opts), repeats=1)
    print(f"\nEXT128 Lanczos run (n={n}, k={opts.k}) with the "
          f"'{_backend.BACKEND}' backend: {t:.3f} s")


if __name__ == "__main__":
    run(*(int(a) for a in sys.argv[1:3]))
