"""Linear programming over star-set predicates.

Problems have the form ``max c.alpha  s.t.  A alpha <= b,  alpha in [-1, 1]^k``.
A dense two-phase tableau simplex does the work in floating point (Dantzig
pricing, switching to Bland's rule after a run of degenerate pivots). Float
answers are never trusted on their own:

* an infeasible verdict is confirmed in exact rational arithmetic, first by
  checking the Farkas multipliers read off the phase-1 tableau and, if they do
  not certify, by re-running phase 1 with :class:`fractions.Fraction` entries;
* an optimal basis is re-solved exactly (vertex and dual multipliers); if it is
  not exactly primal and dual feasible the whole problem is solved again in
  rational arithmetic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .geometry import DiffSet, Polytope

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
OPT_RTOL = 1e-6
_PIVOT_TOL = 1e-9
_BLAND_AFTER = 20


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


class LpError(RuntimeError):
    """Internal solver failure (e.g. an unbounded report on a compact domain)."""


@dataclass(frozen=True, eq=False)
class LpOutcome:
    status: LpStatus
    value: Optional[float] = None
    witness: Optional[np.ndarray] = None
    exact_confirmed: bool = False
    float_value: Optional[float] = None
    exact_value: Optional[Fraction] = None
    basis_verified: bool = False

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    @property
    def infeasible(self) -> bool:
        return self.status is LpStatus.INFEASIBLE


@dataclass
class LpStats:
    solves: int = 0
    feasibility_checks: int = 0
    exact_infeasible: int = 0
    farkas_certified: int = 0
    exact_phase1_runs: int = 0
    bases_verified: int = 0
    exact_resolves: int = 0


# -- tableau simplex ------------------------------------------------------------

class _Unbounded(Exception):
    pass


class _Tableau:
    """Dense tableau for ``max c.u  s.t.  A u <= b, u >= 0``.

    Works on float arrays or on object arrays of Fractions (``exact``).
    """

    def __init__(self, A, b, exact: bool, max_iter: int):
        self.exact = exact
        self.tol = 0 if exact else _PIVOT_TOL
        self.max_iter = max_iter
        m, n = A.shape
        self.m, self.n = m, n
        neg = [bool(v < 0) for v in b]
        art_rows = [i for i in range(m) if neg[i]]
        na = len(art_rows)
        width = n + m + na + 1
        dtype = object if exact else float
        zero = Fraction(0) if exact else 0.0
        one = Fraction(1) if exact else 1.0
        T = np.full((m + 1, width), zero, dtype=dtype)
        T[:m, :n] = A
        for i in range(m):
            T[i, n + i] = one
            T[i, -1] = b[i]
        self.basis = [n + i for i in range(m)]
        for a, i in enumerate(art_rows):
            T[i, :] = -T[i, :]
            T[i, n + m + a] = one
            self.basis[i] = n + m + a
        self.T = T
        self.n_art = na
        self.first_art = n + m
        self.iterations = 0

    # objective row holds (z_j - c_j); rhs of that row is the objective value
    def set_objective(self, c_full):
        T = self.T
        T[-1, :] = 0
        T[-1, :len(c_full)] = -np.asarray(c_full, dtype=T.dtype)
        for i, j in enumerate(self.basis):
            coef = T[-1, j]
            if coef != 0:
                T[-1, :] = T[-1, :] - coef * T[i, :]

    def pivot(self, r, j):
        T = self.T
        T[r, :] = T[r, :] / T[r, j]
        col = T[:, j].copy()
        col[r] = 0
        nz = np.nonzero(col != 0)[0]
        if nz.size:
            T[nz, :] = T[nz, :] - np.outer(col[nz], T[r, :])
        if not self.exact:
            T[nz, j] = 0.0
        self.basis[r] = j

    def run(self, allowed_cols) -> bool:
        """Optimize the current objective row. Returns False on iteration limit."""
        T = self.T
        tol = self.tol
        bland = self.exact
        degenerate = 0
        allowed = np.array(sorted(allowed_cols))
        while True:
            if self.iterations >= self.max_iter:
                return False
            red = T[-1, allowed]
            if bland:
                cand = [k for k in range(len(allowed)) if red[k] < -tol]
                if not cand:
                    return True
                j = int(allowed[cand[0]])
            else:
                k = int(np.argmin(red))
                if not red[k] < -tol:
                    return True
                j = int(allowed[k])
            col = T[:-1, j]
            best = None
            for i in np.nonzero(col > tol)[0] if not self.exact else \
                    [i for i in range(len(col)) if col[i] > 0]:
                ratio = T[i, -1] / col[i]
                if best is None or ratio < best[0] or (ratio == best[0] and self.basis[i] < self.basis[best[1]]):
                    best = (ratio, i)
            if best is None:
                raise _Unbounded()
            if best[0] <= tol:
                degenerate += 1
                if degenerate >= _BLAND_AFTER:
                    bland = True
            else:
                degenerate = 0
            self.pivot(best[1], j)
            self.iterations += 1

    def phase1(self):
        """Returns (feasible, phase-1 objective value) or None on iteration limit."""
        if self.n_art == 0:
            return True, 0
        c = [0] * (self.first_art + self.n_art)
        for a in range(self.n_art):
            c[self.first_art + a] = -1
        self.set_objective(c)
        if not self.run(range(self.first_art + self.n_art)):
            return None
        value = self.T[-1, -1]
        feasible = value >= 0 if self.exact else value >= -FEAS_TOL
        return feasible, value

    def drop_artificials(self):
        T = self.T
        keep = []
        for i in range(self.m):
            if self.basis[i] >= self.first_art:
                row = T[i, :self.first_art]
                nz = [j for j in range(self.first_art) if abs(row[j]) > self.tol]
                if nz:
                    j = max(nz, key=lambda q: abs(row[q]))
                    self.pivot(i, j)
                    keep.append(i)
                # else: redundant row, dropped
            else:
                keep.append(i)
        rows = keep + [self.m]
        self.T = np.concatenate([T[rows, :self.first_art], T[rows, -1:]], axis=1)
        self.basis = [self.basis[i] for i in keep]
        self.m = len(keep)
        self.n_art = 0

    def values(self):
        """Values of the structural and slack variables."""
        x = [0] * self.first_art
        for i, j in enumerate(self.basis):
            if j < self.first_art:
                x[j] = self.T[i, -1]
        return x


def _standard_form(rows, rhs, dim, exact):
    """Shift alpha = u - 1 so that u >= 0; box upper bounds become rows."""
    if exact:
        A = [[Fraction(float(v)) for v in r] for r in np.asarray(rows, dtype=float).reshape(-1, dim)]
        b = [Fraction(float(v)) + sum(r, Fraction(0)) for v, r in zip(rhs, A)]
        eye = [[Fraction(int(i == j)) for j in range(dim)] for i in range(dim)]
        A_full = np.array(A + eye, dtype=object).reshape(len(A) + dim, dim)
        return A_full, b + [Fraction(2)] * dim
    A = np.asarray(rows, dtype=float).reshape(-1, dim)
    b = np.asarray(rhs, dtype=float) + A.sum(axis=1)
    return np.vstack([A, np.eye(dim)]), np.concatenate([b, np.full(dim, 2.0)])


def _solve_exact(M, h):
    """Gaussian elimination over Fractions; None when singular."""
    n = len(M)
    A = [list(M[i]) + [h[i]] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            return None
        A[col], A[piv] = A[piv], A[col]
        p = A[col][col]
        row = [v / p for v in A[col]]
        A[col] = row
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * b for a, b in zip(A[r], row)]
    return [A[i][n] for i in range(n)]


class LpSolver:
    """Stateful solver front end; keep one instance per worker."""

    def __init__(self, exact_check: bool = True, max_iter: Optional[int] = None):
        self.exact_check = exact_check
        self.max_iter = max_iter
        self.stats = LpStats()

    def _iter_cap(self, m, n):
        return self.max_iter if self.max_iter is not None else 50 * (m + n) + 500

    # -- feasibility ---------------------------------------------------------

    def check_feasible(self, p: Polytope) -> LpOutcome:
        self.stats.feasibility_checks += 1
        k = p.dim
        if p.num_rows == 0:
            return LpOutcome(LpStatus.OPTIMAL, 0.0, np.zeros(k), float_value=0.0)
        A, b = _standard_form(p.rows, p.rhs, k, exact=False)
        tab = _Tableau(A, b, exact=False, max_iter=self._iter_cap(*A.shape))
        res = tab.phase1()
        if res is None:
            return LpOutcome(LpStatus.ITERATION_LIMIT)
        feasible, _ = res
        if feasible:
            u = np.array(tab.values()[:k], dtype=float)
            return LpOutcome(LpStatus.OPTIMAL, 0.0, np.clip(u - 1.0, -1.0, 1.0), float_value=0.0)
        return self._confirm_infeasible(p, tab)

    def _confirm_infeasible(self, p: Polytope, tab: _Tableau) -> LpOutcome:
        # Farkas multipliers of the explicit rows are the phase-1 reduced
        # costs of their slack columns
        y = np.maximum(np.asarray(tab.T[-1, tab.n:tab.n + p.num_rows], dtype=float), 0.0)
        if self._farkas_certifies(p, y):
            self.stats.farkas_certified += 1
            self.stats.exact_infeasible += 1
            return LpOutcome(LpStatus.INFEASIBLE, exact_confirmed=True)
        return self._exact_phase1(p)

    @staticmethod
    def _farkas_certifies(p: Polytope, y) -> bool:
        """Exact check: y >= 0 with  -sum|y^T A| > y^T b  proves emptiness."""
        if not np.any(y > 0):
            return False
        ys = [Fraction(float(v)) for v in y]
        k = p.dim
        w = [Fraction(0)] * k
        rhs = Fraction(0)
        for i, yi in enumerate(ys):
            if yi == 0:
                continue
            rhs += yi * Fraction(float(p.rhs[i]))
            row = p.rows[i]
            for j in range(k):
                if row[j] != 0.0:
                    w[j] += yi * Fraction(float(row[j]))
        return -sum(abs(v) for v in w) > rhs

    def _exact_phase1(self, p: Polytope) -> LpOutcome:
        self.stats.exact_phase1_runs += 1
        k = p.dim
        A, b = _standard_form(p.rows, p.rhs, k, exact=True)
        tab = _Tableau(A, b, exact=True, max_iter=10 ** 9)
        feasible, _ = tab.phase1()
        if not feasible:
            self.stats.exact_infeasible += 1
            return LpOutcome(LpStatus.INFEASIBLE, exact_confirmed=True)
        log.debug("float phase 1 claimed infeasibility; exact phase 1 found a point")
        u = np.array([float(v) for v in tab.values()[:k]])
        return LpOutcome(LpStatus.OPTIMAL, 0.0, u - 1.0, float_value=0.0)

    # -- optimization ----------------------------------------------------------

    def maximize(self, p: Polytope, objective) -> LpOutcome:
        self.stats.solves += 1
        obj = np.asarray(objective, dtype=float).reshape(-1)
        k = p.dim
        if obj.shape[0] != k:
            raise ValueError(f"objective has length {obj.shape[0]}, polytope dim is {k}")
        if p.num_rows == 0:
            # base box only: closed form
            alpha = np.where(obj >= 0, 1.0, -1.0)
            val = float(np.abs(obj).sum())
            return LpOutcome(LpStatus.OPTIMAL, val, alpha, float_value=val,
                             exact_value=sum((abs(Fraction(float(v))) for v in obj), Fraction(0)),
                             basis_verified=True)
        A, b = _standard_form(p.rows, p.rhs, k, exact=False)
        tab = _Tableau(A, b, exact=False, max_iter=self._iter_cap(*A.shape))
        res = tab.phase1()
        if res is None:
            return self._exact_maximize(p, obj)
        if not res[0]:
            return self._confirm_infeasible(p, tab)
        tab.drop_artificials()
        tab.set_objective(list(obj) + [0.0] * (tab.first_art - tab.n))
        try:
            finished = tab.run(range(tab.first_art))
        except _Unbounded:
            raise LpError("LP reported unbounded on a compact domain") from None
        if not finished:
            return self._exact_maximize(p, obj)
        u = np.array(tab.values()[:k], dtype=float)
        alpha = np.clip(u - 1.0, -1.0, 1.0)
        fval = float(tab.T[-1, -1]) - float(obj.sum())
        if not self.exact_check:
            return LpOutcome(LpStatus.OPTIMAL, fval, alpha, float_value=fval)
        nonbasic = [j for j in range(tab.first_art) if j not in set(tab.basis)]
        checked = self._verify_basis(p, obj, nonbasic)
        if checked is None:
            out = self._exact_maximize(p, obj)
            return LpOutcome(out.status, out.value, out.witness, out.exact_confirmed,
                             fval, out.exact_value, out.basis_verified)
        self.stats.bases_verified += 1
        exact_val, exact_alpha = checked
        return LpOutcome(LpStatus.OPTIMAL, float(exact_val), np.array([float(v) for v in exact_alpha]),
                         float_value=fval, exact_value=exact_val, basis_verified=True)

    def _verify_basis(self, p: Polytope, obj, nonbasic):
        """Exact vertex and duals for the active set named by ``nonbasic``.

        Variables 0..k-1 are the shifted alphas (nonbasic: alpha_j = -1),
        k..k+m-1 slacks of explicit rows, k+m.. slacks of alpha_j <= 1.
        """
        k, m = p.dim, p.num_rows
        if len(nonbasic) != k:
            return None
        normals, rhs = [], []
        for j in nonbasic:
            if j < k:
                row = [Fraction(0)] * k
                row[j] = Fraction(-1)
                normals.append(row)
                rhs.append(Fraction(1))
            elif j < k + m:
                i = j - k
                normals.append([Fraction(float(v)) for v in p.rows[i]])
                rhs.append(Fraction(float(p.rhs[i])))
            else:
                row = [Fraction(0)] * k
                row[j - k - m] = Fraction(1)
                normals.append(row)
                rhs.append(Fraction(1))
        alpha = _solve_exact(normals, rhs)
        if alpha is None:
            return None
        if any(abs(a) > 1 for a in alpha):
            return None
        for i in range(m):
            lhs = sum((Fraction(float(p.rows[i, j])) * alpha[j] for j in range(k) if p.rows[i, j] != 0.0),
                      Fraction(0))
            if lhs > Fraction(float(p.rhs[i])):
                return None
        c = [Fraction(float(v)) for v in obj]
        transposed = [[normals[r][col] for r in range(k)] for col in range(k)]
        y = _solve_exact(transposed, c)
        if y is None or any(v < 0 for v in y):
            return None
        value = sum((c[j] * alpha[j] for j in range(k)), Fraction(0))
        return value, alpha

    def _exact_maximize(self, p: Polytope, obj) -> LpOutcome:
        self.stats.exact_resolves += 1
        k = p.dim
        A, b = _standard_form(p.rows, p.rhs, k, exact=True)
        tab = _Tableau(A, b, exact=True, max_iter=10 ** 9)
        feasible, _ = tab.phase1()
        if not feasible:
            self.stats.exact_infeasible += 1
            return LpOutcome(LpStatus.INFEASIBLE, exact_confirmed=True)
        tab.drop_artificials()
        c = [Fraction(float(v)) for v in obj]
        tab.set_objective(c + [Fraction(0)] * (tab.first_art - tab.n))
        try:
            tab.run(range(tab.first_art))
        except _Unbounded:
            raise LpError("LP reported unbounded on a compact domain") from None
        u = tab.values()[:k]
        alpha = [v - 1 for v in u]
        value = sum((c[j] * alpha[j] for j in range(k)), Fraction(0))
        return LpOutcome(LpStatus.OPTIMAL, float(value), np.array([float(v) for v in alpha]),
                         float_value=float(value), exact_value=value, basis_verified=True)

    def minimize(self, p: Polytope, objective) -> LpOutcome:
        out = self.maximize(p, -np.asarray(objective, dtype=float))
        if not out.optimal:
            return out
        neg = None if out.exact_value is None else -out.exact_value
        fv = None if out.float_value is None else -out.float_value
        return LpOutcome(out.status, -out.value, out.witness, out.exact_confirmed, fv, neg,
                         out.basis_verified)

    # -- star-set helpers ------------------------------------------------------

    def maximize_split(self, p: Polytope, row_pred, row_tail=()) -> tuple:
        """``max row.alpha`` where columns beyond ``p.dim`` are box-only.

        Returns ``(value, outcome)``; the closed-form tail contribution
        ``sum |row_tail|`` is included in ``value``.
        """
        out = self.maximize(p, row_pred)
        if not out.optimal:
            return None, out
        tail = float(np.abs(np.asarray(row_tail, dtype=float)).sum()) if len(row_tail) else 0.0
        return out.value + tail, out


_default = LpSolver()


def default_solver() -> LpSolver:
    return _default


def check_feasible(p: Polytope, solver: Optional[LpSolver] = None) -> LpOutcome:
    return (solver or _default).check_feasible(p)


def maximize(p: Polytope, objective, solver: Optional[LpSolver] = None) -> LpOutcome:
    return (solver or _default).maximize(p, objective)


def approximate_row(g, c: float, error_cols: Iterable[int]) -> tuple:
    """Drop error columns from ``g.alpha <= c`` soundly.

    The minimum of the error part over ``[-1, 1]`` is ``-sum |g_i|``; moving
    it to the right-hand side gives a constraint implied by the original one.
    """
    g = np.asarray(g, dtype=float)
    cols = sorted(set(int(i) for i in error_cols))
    if not cols:
        return g.copy(), float(c)
    mu = -float(np.abs(g[cols]).sum())
    return np.delete(g, cols), float(c) - mu


def maximize_with_error_dims(d: DiffSet, out_dim: int, sign: int,
                             solver: Optional[LpSolver] = None) -> float:
    """Upper bound of ``sign * (dG alpha)[out_dim]`` over the differential set.

    LP over the predicate's columns plus the closed-form maximum of the
    remaining error columns. The constant ``dc`` is not included.
    """
    solver = solver or _default
    value, out = solver.maximize_split(d.predicate, sign * d.dG_input[out_dim],
                                       sign * d.dG_error[out_dim])
    if value is None:
        raise LpError(f"differential predicate is {out.status.value}")
    return value
