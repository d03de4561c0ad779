#!/usr/bin/env python3
"""Verdict and check count for one perturbed pair as epsilon shrinks."""

import argparse

import numpy as np

from nnequiv.equivalence import EquivProperty
from nnequiv.gpe import enumerate_paths
from nnequiv.instances import perturb, random_network, unit_box
from nnequiv.oracle import grid_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=19)
    ap.add_argument("--sigma", type=float, default=0.08)
    ap.add_argument("--strategy", default="F", choices=list("EFAML"))
    ap.add_argument("--eps", type=float, nargs="+", default=[2, 1, 0.5, 0.25, 0.125])
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    R = random_network([2, 4, 3, 2], rng)
    T = perturb(R, rng, args.sigma)
    box = unit_box(2)
    worst = grid_check(R, T, box, EquivProperty.epsilon_equiv(1.0)).worst_deviation
    print(f"# sampled worst deviation {worst:.4f}")
    print("epsilon,verdict,checks_run,paths_total,refinements,seconds")
    for eps in sorted(args.eps, reverse=True):
        verdict, stats = enumerate_paths(R, T, box, EquivProperty.epsilon_equiv(eps), args.strategy)
        print(f"{eps:g},{verdict.kind.value},{stats.checks_run},{stats.paths_total},"
              f"{stats.refinements},{stats.wall_time:.3f}")


if __name__ == "__main__":
    main()
