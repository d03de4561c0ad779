#!/usr/bin/env python3
"""Record success depths of a strategy-F run and print running statistics.

Writes the depth log CSV and then hands it to ``nnequiv stats``.
"""

import argparse
import sys

import numpy as np

from nnequiv.cli import main as cli_main
from nnequiv.equivalence import EquivProperty
from nnequiv.gpe import enumerate_paths
from nnequiv.instances import random_network, rescale_hidden, unit_box
from nnequiv.refinement import write_depth_log


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="depth_log.csv")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--hidden", type=int, nargs="+", default=[8, 6])
    ap.add_argument("--inputs", type=int, default=2)
    ap.add_argument("--window", type=int, default=479)
    ap.add_argument("--strategy", default="F")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    R = random_network([args.inputs, *args.hidden, 2], rng)
    T = rescale_hidden(R, rng)
    verdict, stats = enumerate_paths(R, T, unit_box(args.inputs),
                                     EquivProperty.epsilon_equiv(1e-6), args.strategy)
    print(f"# {verdict.kind.value}: {stats.paths_total} paths, {stats.checks_run} checks",
          file=sys.stderr)
    write_depth_log(args.out, stats.depth_log)
    return cli_main(["stats", args.out, "--window", str(args.window)])


if __name__ == "__main__":
    sys.exit(main())
