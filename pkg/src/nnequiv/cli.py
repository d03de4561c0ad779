"""Command-line interface.

Exit codes: 0 equivalent, 1 not equivalent, 2 timeout or inconclusive,
3 usage, file or format errors. ``find-cex`` exits 0 when a counterexample
is found and 2 otherwise.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .equivalence import EquivProperty, concrete_counterexample
from .gpe import EngineConfig, VerdictKind, enumerate_paths
from .networks import NetworkFormatError, load_box, load_network, save_network, save_box
from .reduction import build_equiv_instance, load_instance
from .refinement import (DepthTableError, Strategy, read_depth_log, read_depth_table,
                         write_depth_log, write_depth_table)

EXIT_ERROR = 3
log = logging.getLogger("nnequiv")


class _Parser(argparse.ArgumentParser):
    # argparse's default exit status 2 would collide with "timeout"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    net_r: str
    net_t: str
    box: str
    property: EquivProperty
    strategy: str = "L"
    timeout: float = 600.0
    worker_count: int = 1
    depth_log_path: Optional[str] = None
    depth_table_path: Optional[str] = None
    record_table_path: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.worker_count < 1:
            raise ValueError("worker count must be positive")
        if self.strategy.upper() == "O" and not self.depth_table_path:
            raise ValueError("strategy O needs --depth-table")


def _setup_logging():
    level = os.environ.get("NNEQUIV_LOG_LEVEL", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s")


def _run_config(args) -> RunConfig:
    return RunConfig(args.net_r, args.net_t, args.box, EquivProperty.parse(args.property),
                     args.strategy, args.timeout, args.workers, args.depth_log,
                     args.depth_table, args.record_depth_table, args.seed)


def _run(cfg: RunConfig, find_cex: bool):
    net_R = load_network(cfg.net_r)
    net_T = load_network(cfg.net_t)
    box = load_box(cfg.box)
    table = read_depth_table(cfg.depth_table_path) if cfg.strategy.upper() == "O" else None
    strategy = Strategy.from_name(cfg.strategy, table)
    engine_cfg = EngineConfig(timeout=cfg.timeout, workers=cfg.worker_count, find_cex=find_cex)
    verdict, stats = enumerate_paths(net_R, net_T, box, cfg.property, strategy, engine_cfg)
    if cfg.depth_log_path:
        write_depth_log(cfg.depth_log_path, stats.depth_log)
    if cfg.record_table_path:
        write_depth_table(cfg.record_table_path, stats.depth_table_rows())
    return (net_R, net_T, box), verdict, stats


def _report(verdict, stats, extra=None):
    out = {"verdict": verdict.kind.value, "stats": stats.to_dict()}
    if verdict.detail:
        out["detail"] = verdict.detail
    if verdict.counterexample is not None:
        out["counterexample"] = verdict.counterexample.to_json()
    if extra:
        out.update(extra)
    print(json.dumps(out, indent=2))


def cmd_verify(args) -> int:
    cfg = _run_config(args)
    _, verdict, stats = _run(cfg, find_cex=False)
    _report(verdict, stats)
    return verdict.exit_code


def cmd_find_cex(args) -> int:
    cfg = _run_config(args)
    net_R = load_network(cfg.net_r)
    net_T = load_network(cfg.net_t)
    box = load_box(cfg.box)
    # cheap random probe before the symbolic search
    rng = np.random.default_rng(cfg.seed)
    for x in rng.uniform(box.lo, box.hi, size=(args.probes, box.dim)):
        cex = concrete_counterexample(x, net_R, net_T, cfg.property)
        if cex is not None:
            print(json.dumps({"verdict": VerdictKind.NOT_EQUIVALENT.value, "source": "probe",
                              "counterexample": cex.to_json()}, indent=2))
            return 0
    _, verdict, stats = _run(cfg, find_cex=True)
    _report(verdict, stats, {"source": "search"})
    return 0 if verdict.kind is VerdictKind.NOT_EQUIVALENT else 2


def cmd_reduce(args) -> int:
    inst = load_instance(args.instance)
    net_R, net_T = build_equiv_instance(inst)
    save_network(net_R, args.out_r)
    save_network(net_T, args.out_t)
    if args.out_box:
        save_box(inst.box, args.out_box)
    print(json.dumps({"constraints": inst.num_constraints, "epsilon": inst.epsilon,
                      "layers_r": len(net_R.layers), "layers_t": len(net_T.layers),
                      "relus_t": net_T.num_relus}))
    return 0


def running_percentile(values, window: int, q: float) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return np.array([np.percentile(v[max(0, i + 1 - window):i + 1], q) for i in range(len(v))])


def cmd_stats(args) -> int:
    rows = read_depth_log(args.depth_log)
    if not rows:
        print("count,0")
        return 0
    depths = np.array([d for _, d in rows], dtype=float)
    run_max = np.maximum.accumulate(depths)
    run_pct = running_percentile(depths, args.window, args.percentile)
    print(f"# count={len(depths)} min={depths.min():g} max={depths.max():g} mean={depths.mean():g}")
    print(f"index,path_id,depth,running_max,running_p{args.percentile:g}")
    for i, ((pid, d), m, p) in enumerate(zip(rows, run_max, run_pct)):
        print(f"{i},{pid},{d},{m:g},{p:g}")
    return 0


def _add_run_args(p):
    p.add_argument("--net-r", required=True, help="reference network JSON")
    p.add_argument("--net-t", required=True, help="test network JSON")
    p.add_argument("--box", required=True, help="input box JSON")
    p.add_argument("--property", required=True, help="epsilon:<float> or top1")
    p.add_argument("--strategy", default="L", choices=list("EFAMLO"))
    p.add_argument("--timeout", type=float, default=600.0, help="seconds")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--depth-log", help="write path_id,success_depth CSV")
    p.add_argument("--depth-table", help="depth table to replay (strategy O)")
    p.add_argument("--record-depth-table", help="write branch_string,success_depth CSV")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nnequiv", description="Equivalence checking of ReLU networks")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("verify", help="prove or refute equivalence")
    _add_run_args(p)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("find-cex", help="search for a counterexample")
    _add_run_args(p)
    p.add_argument("--probes", type=int, default=1000, help="random probes before the search")
    p.set_defaults(func=cmd_find_cex)
    p = sub.add_parser("reduce", help="compile a Net-Verify instance into a network pair")
    p.add_argument("--instance", required=True)
    p.add_argument("--out-r", required=True)
    p.add_argument("--out-t", required=True)
    p.add_argument("--out-box")
    p.set_defaults(func=cmd_reduce)
    p = sub.add_parser("stats", help="summarize a depth log")
    p.add_argument("depth_log")
    p.add_argument("--window", type=int, default=479)
    p.add_argument("--percentile", type=float, default=95.0)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NetworkFormatError, DepthTableError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
