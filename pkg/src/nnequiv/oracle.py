"""Brute-force reference checks by dense sampling.

Sampling can refute a property but never prove it; ``verdict_hint`` is only
a hint.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .equivalence import EquivProperty
from .gpe import EngineConfig, VerdictKind, enumerate_paths
from .networks import InputBox, Network, eval_network
from .refinement import Strategy, StrategyKind


class OracleBudgetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OracleReport:
    samples: int
    worst_deviation: float
    worst_x: np.ndarray
    argmax_disagreements: int
    verdict_hint: str
    # first input with disjoint argmax sets, if any
    disagreement_x: Optional[np.ndarray] = None

    @property
    def violation_found(self) -> bool:
        return self.verdict_hint == "ViolationFound"

    def to_json(self) -> dict:
        out = {"samples": self.samples,
               "worst_deviation": self.worst_deviation,
               "worst_x": self.worst_x.tolist(),
               "argmax_disagreements": self.argmax_disagreements,
               "verdict_hint": self.verdict_hint}
        if self.disagreement_x is not None:
            out["disagreement_x"] = self.disagreement_x.tolist()
        return out


def sample_points(box: InputBox, resolution: int = 25, n_random: int = 10_000,
                  seed: int = 0, budget: int = 1_000_000) -> np.ndarray:
    n_grid = resolution ** box.dim
    if n_grid > budget:
        raise OracleBudgetError(
            f"grid of {resolution}^{box.dim} = {n_grid} points exceeds budget {budget}; "
            f"use a coarser resolution")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(box.lo, box.hi)]
    grid = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, box.dim)
    rng = np.random.default_rng(seed)
    rand = rng.uniform(box.lo, box.hi, size=(n_random, box.dim))
    return np.vstack([grid, rand])


def _disjoint_argmax(y_r: np.ndarray, y_t: np.ndarray) -> np.ndarray:
    top_r = y_r == y_r.max(axis=1, keepdims=True)
    top_t = y_t == y_t.max(axis=1, keepdims=True)
    return ~np.any(top_r & top_t, axis=1)


def grid_check(net_R: Network, net_T: Network, box: InputBox, prop: EquivProperty,
               resolution: int = 25, n_random: int = 10_000, seed: int = 0,
               budget: int = 1_000_000) -> OracleReport:
    X = sample_points(box, resolution, n_random, seed, budget)
    y_r = eval_network(net_R, X)
    y_t = eval_network(net_T, X)
    dev = np.max(np.abs(y_r - y_t), axis=1)
    worst = int(np.argmax(dev))
    disagree = _disjoint_argmax(y_r, y_t)
    n_dis = int(disagree.sum())
    if prop.kind == "epsilon":
        found = bool(dev[worst] >= prop.epsilon)
    else:
        found = n_dis > 0
    dis_x = X[int(np.argmax(disagree))].copy() if n_dis else None
    return OracleReport(X.shape[0], float(dev[worst]), X[worst].copy(), n_dis,
                        "ViolationFound" if found else "NoViolationFound", dis_x)


def min_depth_oracle(net_R: Network, net_T: Network, box: InputBox, prop: EquivProperty,
                     config: Optional[EngineConfig] = None) -> dict:
    """Depth table (branch string -> success depth) from a strategy-A run."""
    verdict, stats = enumerate_paths(net_R, net_T, box, prop,
                                     Strategy(StrategyKind.FIRST_APPROX), config)
    if verdict.kind is VerdictKind.TIMEOUT:
        raise TimeoutError("depth oracle run timed out")
    return {path_id[1:]: depth for path_id, depth in stats.depth_table_rows()}
