#!/usr/bin/env python3
"""Measure greedy and bidirectional optimality ratios against the exhaustive
optimum on seeded prototype-oracle instances (consistency-only objective)."""
import argparse
import math

import numpy as np

from lima.core import RasterImage
from lima.division import divide_grid
from lima.oracle import LinearPrototypeOracle, make_semantic_target
from lima.search import SearchConfig, bidirectional_rank, greedy_rank, verify_bound
from lima.submodular import SubmodularContext


def trial(seed, k, n_p):
    rng = np.random.default_rng(seed)
    image = RasterImage(rng.uniform(0.05, 1.0, size=(10, 20, 1)))
    division = divide_grid(image, 2, 5)
    protos = [RasterImage(rng.uniform(0, 1, size=(10, 20, 1))) for _ in range(3)]
    oracle = LinearPrototypeOracle(protos)
    target = make_semantic_target(oracle, {"from_image": image})

    ctx = SubmodularContext(image, division, oracle, target, lambdas=(1, 0, 0, 0))
    att, _ = greedy_rank(ctx)
    greedy_ratio = verify_bound(ctx, k, att.order)["ratio"]

    ctx = SubmodularContext(image, division, oracle, target, lambdas=(1, 0, 0, 0))
    att, _ = bidirectional_rank(ctx, SearchConfig(n_p=n_p))
    bi_ratio = verify_bound(ctx, k, att.order)["ratio"]
    return greedy_ratio, bi_ratio


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--np", type=int, default=4, dest="n_p")
    args = parser.parse_args()

    floor = 1 - 1 / math.e
    greedy_ratios, bi_ratios = [], []
    for seed in range(args.trials):
        g, b = trial(seed, args.k, args.n_p)
        greedy_ratios.append(g)
        bi_ratios.append(b)
    greedy_ratios = np.array(greedy_ratios)
    bi_ratios = np.array(bi_ratios)
    print(f"{args.trials} trials, k={args.k}, n_p={args.n_p}, floor 1-1/e={floor:.4f}")
    print(f"greedy        min={greedy_ratios.min():.4f} mean={greedy_ratios.mean():.4f} "
          f"above floor: {(greedy_ratios >= floor - 1e-12).sum()}/{args.trials}")
    print(f"bidirectional min={bi_ratios.min():.4f} mean={bi_ratios.mean():.4f} "
          f"above floor-0.05: {(bi_ratios >= floor - 0.05).sum()}/{args.trials}")


if __name__ == "__main__":
    main()
