#!/usr/bin/env python3
"""Reproduce the naive-vs-bidirectional inference-count table.

For each (|V|, n_p) pair this ranks a synthetic instance with both algorithms
and prints measured subset evaluations next to the closed forms, mirroring the
runtime ratio reported for the real encoder setting.
"""
import argparse

from lima.division import divide_grid
from lima.oracle import IdentityOracle, make_semantic_target
from lima.search import (SearchConfig, bidirectional_evaluation_estimate,
                         bidirectional_rank, greedy_rank, naive_evaluation_count)
from lima.submodular import SubmodularContext

import numpy as np

from lima.core import RasterImage


def build_ctx(rows, cols, seed=0):
    rng = np.random.default_rng(seed)
    image = RasterImage(rng.uniform(0.05, 1.0, size=(rows * 7, cols * 7, 1)))
    division = divide_grid(image, rows, cols)
    oracle = IdentityOracle(image.height, image.width, 1)
    target = make_semantic_target(oracle, {"from_image": image})
    return SubmodularContext(image, division, oracle, target)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--np-values", default="1,4,8,12,16")
    args = parser.parse_args()

    rows, cols = 7, 7
    m = rows * cols
    ctx = build_ctx(rows, cols)
    _, trace = greedy_rank(ctx)
    naive = trace.evaluations
    print(f"|V| = {m}")
    print(f"naive greedy: {naive} evaluations "
          f"(closed form {naive_evaluation_count(m)})")
    print(f"{'n_p':>4} {'measured':>9} {'formula':>9} {'ratio':>7}")
    for n_p in (int(v) for v in args.np_values.split(",")):
        ctx = build_ctx(rows, cols)
        _, trace = bidirectional_rank(ctx, SearchConfig(n_p=n_p))
        formula = bidirectional_evaluation_estimate(m, n_p)
        print(f"{n_p:>4} {trace.evaluations:>9} {formula:>9.1f} "
              f"{trace.evaluations / naive:>7.3f}")


if __name__ == "__main__":
    main()
