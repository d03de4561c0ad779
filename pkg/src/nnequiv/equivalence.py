"""Leaf-level property checks and counterexample handling.

Two properties are supported: epsilon-equivalence under the Chebyshev norm
(violated when ``max |g_R(x) - g_T(x)| >= eps``) and top-1 equivalence
(violated when the argmax sets of the two outputs are disjoint).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import DiffSet, StarSet, align_columns
from .lp import LpSolver, approximate_row, default_solver
from .networks import Network, eval_network


@dataclass(frozen=True)
class EquivProperty:
    kind: str
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("epsilon", "top1"):
            raise ValueError(f"unknown property kind {self.kind!r}")
        if self.kind == "epsilon" and not (self.epsilon is not None and self.epsilon > 0):
            raise ValueError("epsilon must be positive")

    @classmethod
    def epsilon_equiv(cls, eps: float) -> "EquivProperty":
        return cls("epsilon", float(eps))

    @classmethod
    def top1(cls) -> "EquivProperty":
        return cls("top1")

    @classmethod
    def parse(cls, text: str) -> "EquivProperty":
        """``"epsilon:<float>"`` or ``"top1"``."""
        text = text.strip().lower()
        if text == "top1":
            return cls.top1()
        if text.startswith("epsilon:"):
            try:
                eps = float(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad epsilon in property {text!r}") from None
            return cls.epsilon_equiv(eps)
        raise ValueError(f"property must be 'epsilon:<float>' or 'top1', got {text!r}")

    def __str__(self):
        return "top1" if self.kind == "top1" else f"epsilon:{self.epsilon:g}"


def argmax_set(y) -> frozenset:
    y = np.asarray(y, dtype=float)
    return frozenset(np.flatnonzero(y == y.max()).tolist())


@dataclass(frozen=True, eq=False)
class Counterexample:
    x: np.ndarray
    y_r: np.ndarray
    y_t: np.ndarray
    deviation: Optional[float] = None
    argmax_r: Optional[int] = None
    argmax_t: Optional[int] = None

    def to_json(self) -> dict:
        out = {"x": self.x.tolist(), "y_r": self.y_r.tolist(), "y_t": self.y_t.tolist()}
        if self.deviation is not None:
            out["deviation"] = self.deviation
        else:
            out["argmax_r"] = self.argmax_r
            out["argmax_t"] = self.argmax_t
        return out


def violates(prop: EquivProperty, y_r, y_t) -> bool:
    if prop.kind == "epsilon":
        return float(np.max(np.abs(np.asarray(y_r) - np.asarray(y_t)))) >= prop.epsilon
    return not (argmax_set(y_r) & argmax_set(y_t))


def concrete_counterexample(x, net_R: Network, net_T: Network,
                            prop: EquivProperty) -> Optional[Counterexample]:
    """Evaluate both networks at ``x``; a Counterexample only if it violates."""
    x = np.asarray(x, dtype=float)
    y_r = eval_network(net_R, x)
    y_t = eval_network(net_T, x)
    if not violates(prop, y_r, y_t):
        return None
    if prop.kind == "epsilon":
        return Counterexample(x, y_r, y_t, deviation=float(np.max(np.abs(y_r - y_t))))
    return Counterexample(x, y_r, y_t, argmax_r=int(np.argmax(y_r)), argmax_t=int(np.argmax(y_t)))


def validate_counterexample(cex: Counterexample, net_R: Network, net_T: Network,
                            prop: EquivProperty, tol: float = 1e-9) -> bool:
    """Independent re-evaluation of a reported counterexample."""
    y_r = eval_network(net_R, cex.x)
    y_t = eval_network(net_T, cex.x)
    if prop.kind == "epsilon":
        dev = float(np.max(np.abs(y_r - y_t)))
        return dev >= prop.epsilon and abs(dev - cex.deviation) <= tol
    return not (argmax_set(y_r) & argmax_set(y_t))


# -- epsilon ----------------------------------------------------------------------

@dataclass(frozen=True)
class ZonoCheck:
    proven: bool
    max_dev: float


def check_epsilon_zono(d: DiffSet, eps: float) -> ZonoCheck:
    radius = np.abs(d.dG_input).sum(axis=1) + np.abs(d.dG_error).sum(axis=1)
    dev = np.abs(d.dc) + radius
    max_dev = float(dev.max()) if dev.size else 0.0
    return ZonoCheck(max_dev < eps, max_dev)


@dataclass(frozen=True, eq=False)
class StarCheck:
    proven: bool
    max_dev: float
    alpha: Optional[np.ndarray] = None
    dim: Optional[int] = None
    sign: Optional[int] = None
    # every (dev, alpha, dim, sign) with dev >= eps, worst first
    violations: list = field(default_factory=list)


def check_epsilon_star(d: DiffSet, eps: float, solver: Optional[LpSolver] = None,
                       prefilter: bool = True) -> StarCheck:
    """LP bound on every output dimension and sign of the differential set.

    With ``prefilter`` dimensions whose closed-form bound is already below
    ``eps`` are not sent to the LP.
    """
    solver = solver or default_solver()
    zono_dev = np.abs(d.dc) + np.abs(d.dG_input).sum(axis=1) + np.abs(d.dG_error).sum(axis=1)
    max_dev = 0.0
    violations = []
    for i in range(d.out_dim):
        if prefilter and zono_dev[i] < eps:
            max_dev = max(max_dev, 0.0)
            continue
        for sign in (1, -1):
            value, out = solver.maximize_split(d.predicate, sign * d.dG_input[i], sign * d.dG_error[i])
            if value is None:
                if out.infeasible:
                    # empty leaf: nothing to violate
                    return StarCheck(True, 0.0)
                raise RuntimeError(f"LP failed on leaf check: {out.status.value}")
            dev = sign * float(d.dc[i]) + value
            max_dev = max(max_dev, dev)
            if dev >= eps:
                violations.append((dev, out.witness, i, sign))
    if not violations:
        return StarCheck(True, max_dev)
    violations.sort(key=lambda v: -v[0])
    dev, alpha, i, sign = violations[0]
    return StarCheck(False, max_dev, alpha, i, sign, violations)


# -- top-1 --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Top1Check:
    proven: bool
    # (difference, alpha, j, i): on P_j (R prefers j) T's i beats j by `difference`
    candidates: list = field(default_factory=list)
    max_difference: float = float("-inf")
    feasible_regions: tuple = ()


def _region_rows(out_R_c, G_R, j, k):
    """Constraints ``r_j >= r_i`` for all i != j, over the predicate's columns."""
    rows, rhs = [], []
    trailing = range(k, G_R.shape[1])
    for i in range(G_R.shape[0]):
        if i == j:
            continue
        # r_i - r_j <= 0  <=>  (G_i - G_j) alpha <= c_j - c_i
        row, b = approximate_row(G_R[i] - G_R[j], out_R_c[j] - out_R_c[i], trailing)
        rows.append(row[:k])
        rhs.append(b)
    return rows, rhs


def check_top1(out_R: StarSet, out_T: StarSet, solver: Optional[LpSolver] = None,
               tie_tol: float = 1e-9) -> Top1Check:
    """Partition ``P_T`` by R's argmax and bound T's competing outputs.

    A maximized difference ``t_i - t_j`` at or below ``tie_tol`` means j stays a
    maximizer of T wherever it is one of R's, so the argmax sets intersect.
    """
    solver = solver or default_solver()
    G_R, G_T, _ = align_columns(out_R, out_T)
    P = out_T.predicate
    k = P.dim
    O = out_T.dim
    if O < 2:
        return Top1Check(True, [], float("-inf"))
    candidates = []
    max_diff = float("-inf")
    feasible = []
    for j in range(O):
        rows, rhs = _region_rows(out_R.center, G_R, j, k)
        P_j = P.add_rows(rows, rhs)
        feas = solver.check_feasible(P_j)
        if feas.infeasible:
            continue
        feasible.append(j)
        for i in range(O):
            if i == j:
                continue
            row = G_T[i] - G_T[j]
            value, out = solver.maximize_split(P_j, row[:k], row[k:])
            if value is None:
                if out.infeasible:
                    break
                raise RuntimeError(f"LP failed on top-1 check: {out.status.value}")
            diff = float(out_T.center[i] - out_T.center[j]) + value
            max_diff = max(max_diff, diff)
            if diff > tie_tol:
                candidates.append((diff, out.witness, j, i))
    candidates.sort(key=lambda c: -c[0])
    return Top1Check(not candidates, candidates, max_diff, tuple(feasible))


def strict_top1_witness(out_R: StarSet, out_T: StarSet, j: int, i: int,
                        solver: Optional[LpSolver] = None, strict_R: bool = True,
                        strict_T: bool = True) -> Optional[np.ndarray]:
    """Point of ``P_T`` where j maximizes R, i maximizes T, and the argmax sets
    are disjoint.

    A common margin ``delta`` (an extra LP variable in [-1, 1]) is maximized.
    It always separates i from j on both sides; ``strict_R``/``strict_T``
    additionally make j (resp. i) the unique maximizer. Returns the alpha part
    when the optimal margin is positive. The predicate must cover all columns.
    """
    solver = solver or default_solver()
    G_R, G_T, _ = align_columns(out_R, out_T)
    P = out_T.predicate
    k = P.dim
    if G_R.shape[1] != k:
        raise ValueError("strict witness search needs the predicate to cover all columns")
    rows, rhs = [], []
    sides = ((G_R, out_R.center, j, i, strict_R), (G_T, out_T.center, i, j, strict_T))
    for G, c, top, rival, strict in sides:
        for q in range(G.shape[0]):
            if q == top:
                continue
            # v_q - v_top + delta <= 0   (delta dropped for non-strict rows)
            margin = 1.0 if (strict or q == rival) else 0.0
            rows.append(np.append(G[q] - G[top], margin))
            rhs.append(float(c[top] - c[q]))
    ext = P.pad(k + 1).add_rows(rows, rhs)
    objective = np.zeros(k + 1)
    objective[-1] = 1.0
    out = solver.maximize(ext, objective)
    if not out.optimal or out.value <= 0:
        return None
    return out.witness[:k]


# -- counterexamples ------------------------------------------------------------------

def input_point(alpha, input_star: StarSet) -> np.ndarray:
    k = input_star.k_input
    a = np.clip(np.asarray(alpha, dtype=float)[:k], -1.0, 1.0)
    return input_star.center + input_star.generators[:, :k] @ a


def extract_counterexample(alpha, input_star: StarSet, net_R: Network, net_T: Network,
                           prop: EquivProperty) -> Optional[Counterexample]:
    """Map an LP witness back to the input space and evaluate concretely.

    Returns None when the candidate is spurious.
    """
    return concrete_counterexample(input_point(alpha, input_star), net_R, net_T, prop)
