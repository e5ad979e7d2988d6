"""Simulate quantiles of the Johansen trace statistic under the null.

Generates the `johansen_trace` rows of `data/critical_values.txt`. For each
deterministic specification and each dimension m = n - r, draws m-dimensional
Gaussian random walks of length T, computes the trace statistic for rank 0 and
records the upper-tail quantiles.

    python3 trace_quantiles.py --reps 200000 --length 1000 --seed 20211015
"""
import argparse

import numpy as np

LEVELS = [0.50, 0.20, 0.10, 0.05, 0.025, 0.01]


def trace_stats(walks, kind):
    d = np.diff(walks, axis=1)
    lev = walks[:, :-1, :]
    n = d.shape[1]
    if kind == "restricted_constant":
        lev = np.concatenate([lev, np.ones(lev.shape[:2] + (1,))], axis=2)
    elif kind == "unrestricted_constant":
        d = d - d.mean(axis=1, keepdims=True)
        lev = lev - lev.mean(axis=1, keepdims=True)
    else:
        raise ValueError(kind)
    s00 = np.einsum("bti,btj->bij", d, d) / n
    s11 = np.einsum("bti,btj->bij", lev, lev) / n
    s10 = np.einsum("bti,btj->bij", lev, d) / n
    m = np.linalg.solve(s11, s10 @ np.linalg.solve(s00, np.swapaxes(s10, 1, 2)))
    eig = np.sort(np.real(np.linalg.eigvals(m)), axis=1)[:, ::-1]
    eig = eig[:, : d.shape[2]]
    return -n * np.log1p(-eig).sum(axis=1)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=200_000)
    ap.add_argument("--length", type=int, default=1000)
    ap.add_argument("--batch", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20211015)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    for kind in ("restricted_constant", "unrestricted_constant"):
        for dim in (1, 2):
            stats = []
            for _ in range(args.reps // args.batch):
                eps = rng.standard_normal((args.batch, args.length + 1, dim))
                stats.append(trace_stats(np.cumsum(eps, axis=1), kind))
            stats = np.concatenate(stats)
            for level in LEVELS:
                cv = np.quantile(stats, 1.0 - level)
                print(f"johansen_trace\t{kind}\t{dim}\t{level}\t{cv:.4f}")


if __name__ == "__main__":
    main()
