#!/usr/bin/env python3
"""Run all six strategies over the tiny suite and tabulate verdicts and costs."""

import argparse
import time

from nnequiv.gpe import enumerate_paths
from nnequiv.instances import tiny_suite
from nnequiv.oracle import grid_check, min_depth_oracle
from nnequiv.refinement import Strategy, StrategyKind


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--equiv", type=int, default=25)
    ap.add_argument("--perturbed", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    totals = {k: [0, 0, 0.0] for k in "EFAMLO"}
    print("case,oracle," + ",".join(f"{k}_verdict,{k}_paths,{k}_checks" for k in "EFAMLO"))
    for case in tiny_suite(args.equiv, args.perturbed, args.seed):
        oracle = grid_check(case.net_R, case.net_T, case.box, case.prop)
        table = min_depth_oracle(case.net_R, case.net_T, case.box, case.prop)
        cells = []
        for k in "EFAMLO":
            strategy = Strategy(StrategyKind(k), depth_table=table if k == "O" else None)
            t0 = time.monotonic()
            verdict, stats = enumerate_paths(case.net_R, case.net_T, case.box, case.prop, strategy)
            totals[k][0] += stats.paths_total
            totals[k][1] += stats.checks_run
            totals[k][2] += time.monotonic() - t0
            cells.append(f"{verdict.kind.value},{stats.paths_total},{stats.checks_run}")
        print(f"{case.name},{oracle.verdict_hint}," + ",".join(cells))
    print()
    print("strategy,paths_total,checks_run,seconds")
    for k, (paths, checks, secs) in totals.items():
        print(f"{k},{paths},{checks},{secs:.2f}")


if __name__ == "__main__":
    main()
