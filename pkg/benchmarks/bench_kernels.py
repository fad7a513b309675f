"""Compare the compiled kernels with the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is timed on
inputs shaped like the ones the engine produces (fourth-order integrands of
a two-level system) and the outputs are checked for agreement.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from redkin import _kernels_py
from redkin.kernels import BACKEND

try:
    from redkin import _kernels as _compiled
except ImportError:
    _compiled = None


def laurent_inputs(n_terms, n_vars, rng, zero_fraction=0.1, with_powers=False):
    coeffs = rng.normal(size=n_terms) + 1j * rng.normal(size=n_terms)
    expos = rng.uniform(0.2, 2.0, (n_terms, n_vars)) + 1j * rng.uniform(-3, 3, (n_terms, n_vars))
    expos[rng.random((n_terms, n_vars)) < zero_fraction] = 0.0
    powers = rng.integers(0, 3, (n_terms, n_vars)) if with_powers else np.zeros((n_terms, n_vars), dtype=np.int64)
    return coeffs, expos, powers.astype(np.int64)


def pair_inputs(n, rng):
    P = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return np.ascontiguousarray(P)


def bench(label, fn, repeat):
    times = timeit.repeat(fn, number=1, repeat=repeat)
    return label, min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"dispatch backend: {BACKEND}")
    if _compiled is None:
        print("compiled extension not built; only the fallback is timed")

    cases = [
        ("orthant_laurent 20k terms x 3 vars", laurent_inputs(20000, 3, rng)),
        ("orthant_laurent 20k terms x 5 vars", laurent_inputs(20000, 5, rng)),
        ("orthant_laurent 5k terms x 3 vars, powers", laurent_inputs(5000, 3, rng, with_powers=True)),
    ]
    rows = []
    for name, (c, e, p) in cases:
        ref = _kernels_py.orthant_laurent(c, e, p, 1e-12)
        _, t_py = bench(name, lambda: _kernels_py.orthant_laurent(c, e, p, 1e-12), args.repeat)
        t_c = dev = float("nan")
        if _compiled is not None:
            got = _compiled.orthant_laurent(c, np.ascontiguousarray(e), p, 1e-12)
            n = max(len(ref), len(got))
            dev = float(np.max(np.abs(np.pad(ref, (0, n - len(ref))) - np.pad(got, (0, n - len(got)))))) / float(np.max(np.abs(ref)))
            _, t_c = bench(name, lambda: _compiled.orthant_laurent(c, np.ascontiguousarray(e), p, 1e-12), args.repeat)
        rows.append((name, t_py, t_c, dev))
    for n in (8, 12, 16):
        P = pair_inputs(n, rng)
        name = f"ordered_pair_sum n={n}"
        ref = _kernels_py.ordered_pair_sum(P)
        _, t_py = bench(name, lambda: _kernels_py.ordered_pair_sum(P), args.repeat)
        t_c = dev = float("nan")
        if _compiled is not None:
            dev = abs(ref - _compiled.ordered_pair_sum(P)) / max(abs(ref), 1e-300)
            _, t_c = bench(name, lambda: _compiled.ordered_pair_sum(P), args.repeat)
        rows.append((name, t_py, t_c, dev))

    print(f"{'kernel':45s} {'python [s]':>12s} {'compiled [s]':>13s} {'speedup':>8s} {'rel. diff':>11s}")
    for name, t_py, t_c, dev in rows:
        speed = t_py / t_c if t_c == t_c else float("nan")
        print(f"{name:45s} {t_py:12.4g} {t_c:13.4g} {speed:8.1f} {dev:11.2e}")


if __name__ == "__main__":
    main()
