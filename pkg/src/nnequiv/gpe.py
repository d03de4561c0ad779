"""Two-network geometric path enumeration.

A worklist of :class:`PropState` values is drained one neuron at a time. Each
state first runs through network R; at the end of R its output set is stored
and the set is reset to the input geometry while keeping the accumulated
predicate, so T is evaluated on exactly the inputs that produced that R
output. Leaves at the end of T are handed to the property checks.
"""

from __future__ import annotations

import copy
import logging
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .equivalence import (Counterexample, EquivProperty, check_epsilon_star,
                          check_epsilon_zono, check_top1, extract_counterexample,
                          strict_top1_witness)
from .geometry import (StarSet, init_from_box, make_diff, overapprox_relu_star,
                       split_relu, zero_row, affine_map)
from .lp import LpSolver
from .networks import InputBox, Network
from . import refinement
from .refinement import Decision, Strategy

log = logging.getLogger("nnequiv")


class VerdictKind(str, Enum):
    EQUIVALENT = "equivalent"
    NOT_EQUIVALENT = "not_equivalent"
    TIMEOUT = "timeout"
    UNKNOWN = "unknown"


EXIT_CODES = {
    VerdictKind.EQUIVALENT: 0,
    VerdictKind.NOT_EQUIVALENT: 1,
    VerdictKind.TIMEOUT: 2,
    VerdictKind.UNKNOWN: 2,
}


@dataclass
class Verdict:
    kind: VerdictKind
    counterexample: Optional[Counterexample] = None
    detail: str = ""

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.kind]

    def __str__(self):
        return self.kind.value


@dataclass
class RunStats:
    paths_total: int = 0
    checks_run: int = 0
    descend_ops: int = 0
    depth_log: list = field(default_factory=list)
    wall_time: float = 0.0
    splits: int = 0
    overapprox: int = 0
    infeasible_dropped: int = 0
    refinements: int = 0
    unresolved: int = 0
    cex_record: Optional[tuple] = None

    def to_dict(self) -> dict:
        return {
            "paths_total": self.paths_total,
            "checks_run": self.checks_run,
            "descend_ops": self.descend_ops,
            "proven_paths": len(self.depth_log),
            "max_success_depth": max((d for _, d in self.depth_log), default=0),
            "splits": self.splits,
            "overapprox": self.overapprox,
            "infeasible_dropped": self.infeasible_dropped,
            "refinements": self.refinements,
            "unresolved": self.unresolved,
            "wall_time": round(self.wall_time, 6),
        }

    def depth_table_rows(self) -> list:
        """Proven leaves plus the counterexample leaf, for oracle replay."""
        rows = list(self.depth_log)
        if self.cex_record is not None:
            rows.append(self.cex_record)
        return rows


@dataclass
class EngineConfig:
    timeout: Optional[float] = None
    workers: int = 1
    exact_lp_check: bool = True
    # LP feasibility of split children whose bounds were not LP-certified
    check_feasibility: bool = True
    tie_tol: float = 1e-9
    find_cex: bool = False
    # called as leaf_hook(state, engine) before each leaf check
    leaf_hook: Optional[Callable] = None


@dataclass(eq=False)
class PropState:
    nn: str
    layer: int
    neuron: Optional[int]
    star: StarSet
    out_R: Optional[StarSet] = None
    split_depth: int = 0
    overapprox_log: list = field(default_factory=list)
    path_id: str = "b"
    floor: int = 0
    # (lo, hi, certified) at the neuron a snapshot was taken for
    pending: Optional[tuple] = None

    @property
    def zono(self):
        return self.star.to_zonotope()

    @property
    def exact(self) -> bool:
        return not self.overapprox_log

    def clone(self) -> "PropState":
        c = copy.copy(self)
        c.overapprox_log = list(self.overapprox_log)
        return c


class _Timeout(Exception):
    pass


class Engine:
    """One verification run. Not reusable."""

    def __init__(self, net_R: Network, net_T: Network, box: InputBox, prop: EquivProperty,
                 strategy: Strategy, config: Optional[EngineConfig] = None):
        if net_R.input_dim != box.dim or net_T.input_dim != box.dim:
            raise ValueError("network input dimensions must match the box")
        if net_R.output_dim != net_T.output_dim:
            raise ValueError("networks have different output dimensions")
        self.net_R = net_R
        self.net_T = net_T
        self.box = box
        self.prop = prop
        self.strategy = strategy
        self.config = config or EngineConfig()
        self.stats = RunStats()
        self.input_star, _ = init_from_box(box)
        self._lock = threading.RLock()
        self._local = threading.local()
        self._deadline = None

    # -- helpers ---------------------------------------------------------------

    @property
    def solver(self) -> LpSolver:
        s = getattr(self._local, "solver", None)
        if s is None:
            s = self._local.solver = LpSolver(exact_check=self.config.exact_lp_check)
        return s

    def _count(self, **inc):
        with self._lock:
            for name, n in inc.items():
                setattr(self.stats, name, getattr(self.stats, name) + n)

    def _net(self, s: PropState) -> Network:
        return self.net_R if s.nn == "R" else self.net_T

    def initial_state(self) -> PropState:
        return PropState("R", 0, None, self.input_star)

    @staticmethod
    def _advance(s: PropState, width: int):
        s.neuron += 1
        if s.neuron == width:
            s.layer += 1
            s.neuron = None

    def finished(self, s: PropState) -> bool:
        return s.neuron is None and s.layer == len(self._net(s).layers)

    # -- transfer --------------------------------------------------------------

    def relu_bounds(self, s: PropState, neuron: int) -> tuple:
        """Sound ``(lo, hi, certified)`` for a pre-activation.

        ``certified`` means the bounds are attained by the set under its
        predicate (closed form on a plain box, or exact LP), so both halves of
        a split at 0 are non-empty.
        """
        star = s.star
        g = star.generators[neuron]
        c = float(star.center[neuron])
        radius = float(np.abs(g).sum())
        lo, hi = c - radius, c + radius
        P = star.predicate
        if P.num_rows == 0:
            return lo, hi, True
        k = P.dim
        v_hi, out_hi = self.solver.maximize_split(P, g[:k], g[k:])
        v_lo, out_lo = self.solver.maximize_split(P, -g[:k], -g[k:])
        if v_hi is None or v_lo is None:
            if out_hi.infeasible or out_lo.infeasible:
                return None
            # iteration limit: keep the looser zonotope bounds
            return lo, hi, False
        return max(lo, c - v_lo), min(hi, c + v_hi), True

    def split_state(self, s: PropState, neuron: int, lo: float, hi: float,
                    certified: bool) -> list:
        """Exact case split of a straddling neuron; returns live children."""
        neg, pos = split_relu(s.star, neuron)
        width = s.star.dim
        children = []
        for star, bit in ((neg, "0"), (pos, "1")):
            self._count(descend_ops=1)
            if self.config.check_feasibility and not certified:
                out = self.solver.check_feasible(star.predicate)
                if out.infeasible:
                    assert out.exact_confirmed
                    self._count(infeasible_dropped=1)
                    continue
            child = s.clone()
            child.star = star
            child.split_depth = s.split_depth + 1
            child.path_id = s.path_id + bit
            child.pending = None
            self._advance(child, width)
            children.append(child)
        self._count(splits=1)
        return children

    def step(self, s: PropState) -> list:
        """Advance ``s`` by one layer map or one ReLU neuron; returns successors."""
        net = self._net(s)
        if s.neuron is None:
            layer = net.layers[s.layer]
            s.star = affine_map(s.star, layer.weights, layer.bias)
            if layer.is_relu:
                s.neuron = 0
            else:
                s.layer += 1
            return [s]
        j = s.neuron
        width = s.star.dim
        bounds = self.relu_bounds(s, j)
        if bounds is None:
            self._count(infeasible_dropped=1)
            return []
        lo, hi, certified = bounds
        if hi <= 0.0:
            s.star = zero_row(s.star, j)
            self._advance(s, width)
            return [s]
        if lo >= 0.0:
            self._advance(s, width)
            return [s]
        if refinement.decide(self.strategy, s) is Decision.SPLIT:
            return self.split_state(s, j, lo, hi, certified)
        snap = s.clone()
        snap.pending = (lo, hi, certified)
        s.overapprox_log.append(snap)
        tag = (s.nn, s.layer, j, len(s.star.error_tags))
        s.star = overapprox_relu_star(s.star, j, lo, hi, tag,
                                      extend_predicate=not self.strategy.lp_approx)
        self._count(overapprox=1)
        self._advance(s, width)
        return [s]

    def transition(self, s: PropState) -> None:
        """Store R's output and restart from the input set in T."""
        s.out_R = s.star
        n_vars = s.star.num_vars
        G = np.zeros((self.input_star.dim, n_vars))
        G[:, :self.input_star.num_vars] = self.input_star.generators
        s.star = StarSet(self.input_star.center, G, s.star.predicate, s.star.error_tags)
        s.nn = "T"
        s.layer = 0
        s.neuron = None

    # -- leaves ----------------------------------------------------------------

    def _validate(self, alpha):
        return extract_counterexample(alpha, self.input_star, self.net_R, self.net_T, self.prop)

    def check_leaf(self, s: PropState) -> tuple:
        """Returns ``("proven", None)``, ``("cex", Counterexample)`` or
        ``("failed", None)`` when no definitive answer was reached."""
        out_R, out_T = s.out_R, s.star
        if self.prop.kind == "epsilon":
            eps = self.prop.epsilon
            d = make_diff(out_R, out_T)
            if not self.config.find_cex and check_epsilon_zono(d, eps).proven:
                return "proven", None
            res = check_epsilon_star(d, eps, self.solver)
            if res.proven:
                return "proven", None
            tries = res.violations if (self.config.find_cex or s.exact) else res.violations[:1]
            for _, alpha, _, _ in tries:
                cex = self._validate(alpha)
                if cex is not None:
                    return "cex", cex
            return "failed", None
        res = check_top1(out_R, out_T, self.solver, self.config.tie_tol)
        if res.proven:
            return "proven", None
        for _, alpha, _, _ in res.candidates:
            cex = self._validate(alpha)
            if cex is not None:
                return "cex", cex
        if s.exact:
            # raw LP vertices may sit on argmax ties; look for a strict witness
            seen = set()
            for _, _, j, i in res.candidates:
                if (j, i) in seen:
                    continue
                seen.add((j, i))
                for strict_R, strict_T in ((False, True), (True, False)):
                    alpha = strict_top1_witness(out_R, out_T, j, i, self.solver,
                                                strict_R=strict_R, strict_T=strict_T)
                    if alpha is not None:
                        cex = self._validate(alpha)
                        if cex is not None:
                            return "cex", cex
        return "failed", None

    def handle_leaf(self, s: PropState) -> tuple:
        """Returns ``(new_states, counterexample_or_None)``."""
        self._count(checks_run=1)
        if self.config.leaf_hook is not None:
            self.config.leaf_hook(s, self)
        outcome, cex = self.check_leaf(s)
        if outcome == "proven":
            self._count(paths_total=1)
            refinement.record_success(self.strategy, self.stats, s.path_id, s.split_depth)
            return [], None
        if outcome == "cex":
            self._count(paths_total=1)
            with self._lock:
                self.stats.cex_record = (s.path_id, s.split_depth)
            return [], cex
        if s.exact:
            # disagreement confined to argmax ties or to boundary values
            log.info("unresolved leaf %s", s.path_id)
            self._count(paths_total=1, unresolved=1)
            return [], None
        self._count(refinements=1)
        return refinement.on_check_failure(self.strategy, s, self), None

    # -- driver ----------------------------------------------------------------

    def process(self, s: PropState) -> tuple:
        """Run ``s`` until it branches, dies or reaches a leaf."""
        while True:
            if self._deadline is not None and time.monotonic() > self._deadline:
                raise _Timeout()
            if self.finished(s):
                if s.nn == "R":
                    self.transition(s)
                    continue
                return self.handle_leaf(s)
            succ = self.step(s)
            if len(succ) != 1 or succ[0] is not s:
                return succ, None

    def run(self) -> tuple:
        start = time.monotonic()
        if self.config.timeout is not None:
            self._deadline = start + self.config.timeout
        try:
            if self.config.workers > 1:
                verdict = self._run_parallel()
            else:
                verdict = self._run_serial()
        except _Timeout:
            verdict = Verdict(VerdictKind.TIMEOUT, detail="time limit reached")
        self.stats.wall_time = time.monotonic() - start
        log.info("verdict %s stats %s", verdict.kind.value, self.stats.to_dict())
        return verdict, self.stats

    def _final(self) -> Verdict:
        if self.stats.unresolved:
            return Verdict(VerdictKind.UNKNOWN,
                           detail=f"{self.stats.unresolved} leaves unresolved (argmax ties or boundary)")
        return Verdict(VerdictKind.EQUIVALENT)

    def _run_serial(self) -> Verdict:
        worklist = [self.initial_state()]
        while worklist:
            s = worklist.pop()
            new, cex = self.process(s)
            if cex is not None:
                return Verdict(VerdictKind.NOT_EQUIVALENT, cex)
            # push so that the '1' child is explored first, then '0'
            worklist.extend(new)
        return self._final()

    def _run_parallel(self) -> Verdict:
        worklist = [self.initial_state()]
        cond = threading.Condition()
        state = {"active": 0, "cex": None, "error": None, "timeout": False}

        def worker():
            while True:
                with cond:
                    while not worklist and state["active"] and state["cex"] is None \
                            and state["error"] is None and not state["timeout"]:
                        cond.wait()
                    if state["cex"] is not None or state["error"] is not None \
                            or state["timeout"] or not worklist:
                        cond.notify_all()
                        return
                    s = worklist.pop()
                    state["active"] += 1
                try:
                    new, cex = self.process(s)
                except _Timeout:
                    with cond:
                        state["timeout"] = True
                        state["active"] -= 1
                        cond.notify_all()
                    return
                except BaseException as exc:  # surfaced in the caller
                    with cond:
                        state["error"] = exc
                        state["active"] -= 1
                        cond.notify_all()
                    return
                with cond:
                    state["active"] -= 1
                    if cex is not None and state["cex"] is None:
                        state["cex"] = cex
                    worklist.extend(new)
                    cond.notify_all()

        threads = [threading.Thread(target=worker, daemon=True) for _ in range(self.config.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if state["error"] is not None:
            raise state["error"]
        if state["cex"] is not None:
            return Verdict(VerdictKind.NOT_EQUIVALENT, state["cex"])
        if state["timeout"]:
            raise _Timeout()
        return self._final()


def enumerate_paths(net_R: Network, net_T: Network, box: InputBox, prop: EquivProperty,
                    strategy="L", config: Optional[EngineConfig] = None) -> tuple:
    """Decide ``prop`` for the pair over ``box``; returns ``(Verdict, RunStats)``."""
    if isinstance(strategy, str):
        strategy = Strategy.from_name(strategy)
    return Engine(net_R, net_T, box, prop, strategy, config).run()
