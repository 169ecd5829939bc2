"""Compare the compiled kernels with the NumPy fallback.

Times ``expm`` on small dense generators and ``propagate`` on a long
two-mode step list, checks that both backends agree, and prints one row
per case.  Run from the repository root::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--steps 20000]
"""

import argparse
import timeit

import numpy as np
import scipy.linalg

from sphybrid._backend import kernels


def bench(fn, repeat):
    """Best wall time of ``repeat`` runs, in seconds."""
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def expm_cases(rng):
    for n in (2, 4, 8):
        G = rng.normal(size=(n, n))
        for t in (1e-3, 1.0, 50.0):
            yield f"expm n={n} t={t:g}", G, t


def propagate_case(rng, steps, n=4):
    gens = np.stack([rng.normal(size=(n, n)) - 3 * np.eye(n) for _ in range(2)])
    jump_mats = np.stack([np.eye(n)[::-1]])
    modes = np.arange(steps) % 2
    # a handful of distinct step lengths, as in sampled periodic schedules
    dts = rng.choice([0.01, 0.02, 0.005], size=steps)
    jumps = np.where(np.arange(steps) % 10 == 9, 0, -1)
    x0 = rng.normal(size=n)
    return gens, modes, dts, jumps, jump_mats, x0


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    py = kernels("python")
    try:
        cy = kernels("cython")
    except ImportError:
        print("compiled kernels are not built; nothing to compare")
        return 1

    print(f"{'case':28s} {'python [us]':>12s} {'cython [us]':>12s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, G, t in expm_cases(rng):
        ref = scipy.linalg.expm(G * t)
        a, b = py.expm(G, t), cy.expm(G, t)
        diff = max(np.linalg.norm(a - ref), np.linalg.norm(b - ref)) / np.linalg.norm(ref)
        tp = bench(lambda: py.expm(G, t), args.repeat)
        tc = bench(lambda: cy.expm(G, t), args.repeat)
        print(f"{name:28s} {tp * 1e6:12.2f} {tc * 1e6:12.2f} {tp / tc:8.1f} {diff:13.2e}")

    case = propagate_case(rng, args.steps)
    pre_p, post_p, _, _ = py.propagate(*case, 1e300)
    pre_c, post_c, _, _ = cy.propagate(*case, 1e300)
    scale = np.max(np.abs(pre_p)) or 1.0
    diff = max(np.max(np.abs(pre_p - pre_c)), np.max(np.abs(post_p - post_c))) / scale
    tp = bench(lambda: py.propagate(*case, 1e300), args.repeat)
    tc = bench(lambda: cy.propagate(*case, 1e300), args.repeat)
    name = f"propagate n=4 K={args.steps}"
    print(f"{name:28s} {tp * 1e6:12.0f} {tc * 1e6:12.0f} {tp / tc:8.1f} {diff:13.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
