"""Split-or-over-approximate strategies and the refinement step.

Strategy letters:

* ``E`` always split (exact enumeration).
* ``F`` over-approximate everything with an LP over all error dimensions, and
  on a failed leaf check split the first over-approximated neuron.
* ``A`` like ``F`` but rows touching error dimensions are relaxed in closed
  form, so LPs only range over the input dimensions.
* ``M`` split while the path's split depth is below the running maximum of
  recorded success depths.
* ``L`` split while below the previous success depth minus one.
* ``O`` replay a depth table recorded by an earlier run.

Depth strategies use the ``A`` machinery once they start over-approximating.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional


class StrategyKind(str, Enum):
    EXACT = "E"
    FIRST = "F"
    FIRST_APPROX = "A"
    RUNNING_MAX = "M"
    LAST_MINUS_ONE = "L"
    ORACLE = "O"


class Decision(Enum):
    SPLIT = "split"
    OVERAPPROX = "overapprox"


class DepthTableError(KeyError):
    """Replay table does not match the run."""


@dataclass
class Strategy:
    kind: StrategyKind
    depth_table: Optional[dict] = None
    running_max: int = 0
    last: Optional[int] = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)
    _prefixes: frozenset = field(default=frozenset(), repr=False, compare=False)

    def __post_init__(self):
        self.kind = StrategyKind(self.kind)
        if self.kind is StrategyKind.ORACLE:
            if self.depth_table is None:
                raise ValueError("oracle replay needs a depth table")
            self._prefixes = frozenset(key[:n] for key in self.depth_table
                                       for n in range(len(key)))

    @classmethod
    def from_name(cls, name: str, depth_table: Optional[dict] = None) -> "Strategy":
        try:
            kind = StrategyKind(name.strip().upper())
        except ValueError:
            raise ValueError(f"strategy must be one of E,F,A,M,L,O, got {name!r}") from None
        return cls(kind, depth_table=depth_table)

    @property
    def lp_approx(self) -> bool:
        """Whether over-approximated error columns stay out of the LP."""
        return self.kind is not StrategyKind.FIRST

    def fresh(self) -> "Strategy":
        """Same strategy with empty history."""
        return Strategy(self.kind, depth_table=self.depth_table)

    def oracle_depth(self, path_id: str) -> int:
        branch = path_id[1:]
        if branch in self._prefixes:
            # a recorded leaf lies below this node: keep splitting
            return len(branch) + 1
        if branch in self.depth_table:
            return self.depth_table[branch]
        for n in range(len(branch) - 1, -1, -1):
            if branch[:n] in self.depth_table:
                return self.depth_table[branch[:n]]
        raise DepthTableError(f"no depth table entry for branch {branch!r}")

    def threshold(self, state) -> int:
        if self.kind is StrategyKind.RUNNING_MAX:
            return self.running_max
        if self.kind is StrategyKind.LAST_MINUS_ONE:
            return 0 if self.last is None else max(self.last - 1, 0)
        if self.kind is StrategyKind.ORACLE:
            return self.oracle_depth(state.path_id)
        return 0


def decide(strategy: Strategy, state) -> Decision:
    """Called at a straddling neuron."""
    if strategy.kind is StrategyKind.EXACT:
        return Decision.SPLIT
    if state.overapprox_log:
        # the set is already approximate; splitting now may hit a ghost neuron
        return Decision.OVERAPPROX
    if state.split_depth < state.floor:
        return Decision.SPLIT
    if state.split_depth < strategy.threshold(state):
        return Decision.SPLIT
    return Decision.OVERAPPROX


def on_check_failure(strategy: Strategy, leaf, engine) -> list:
    """Split at the first over-approximated neuron of a failed leaf.

    Returns the children (already counted by the engine). Children may not
    over-approximate before one more exact split than their parent had.
    """
    if strategy.kind is StrategyKind.EXACT or not leaf.overapprox_log:
        raise RuntimeError(
            "refinement requested on a path without over-approximation; "
            "a genuine counterexample should have been reported")
    snap = leaf.overapprox_log[0]
    children = engine.split_state(snap, snap.neuron, *snap.pending)
    for child in children:
        child.floor = max(child.floor, snap.split_depth + 1)
    return children


def record_success(strategy: Strategy, stats, path_id: str, split_depth: int) -> None:
    with strategy._lock:
        stats.depth_log.append((path_id, split_depth))
        strategy.running_max = max(strategy.running_max, split_depth)
        strategy.last = split_depth


# -- depth tables ---------------------------------------------------------------

def write_depth_table(path, rows) -> None:
    """``rows`` are ``(path_id, depth)`` pairs; path ids start with ``b``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["branch_string", "success_depth"])
        for path_id, depth in rows:
            w.writerow([path_id[1:], depth])


def read_depth_table(path) -> dict:
    table = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["branch_string", "success_depth"]:
            raise ValueError(f"{path}: expected header branch_string,success_depth")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2 or set(row[0]) - {"0", "1"}:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}")
            table[row[0]] = int(row[1])
    return table


def write_depth_log(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "success_depth"])
        w.writerows(rows)


def read_depth_log(path) -> list:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "path_id,success_depth":
        raise ValueError(f"{path}: expected header path_id,success_depth")
    rows = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            rows.append((parts[0], int(parts[1])))
        except (IndexError, ValueError):
            raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
    return rows
