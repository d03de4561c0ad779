"""Star sets, zonotopes and their transformers.

All sets share the base variable domain ``[-1, 1]^k``: box geometry is folded
into the center and generators. The first ``k_input`` generator columns belong
to the input variables, later columns are error dimensions introduced by ReLU
over-approximation. Error columns carry provenance tags ``(network, layer,
neuron, serial)`` so that outputs of the two networks can be aligned.

A star set's predicate may cover fewer columns than its generator matrix. The
uncovered trailing columns are constrained only by the base box; optimizing
over them is done in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .networks import InputBox


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Polytope:
    """``{alpha | rows @ alpha <= rhs}`` intersected with ``[-1, 1]^dim``."""

    rows: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        rhs = np.array(self.rhs, dtype=float).reshape(-1)
        if rows.ndim != 2 or rows.shape[0] != rhs.shape[0]:
            raise ValueError(f"constraint shape mismatch: rows {rows.shape}, rhs {rhs.shape}")
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "rhs", _frozen(rhs))

    @classmethod
    def box(cls, dim: int) -> "Polytope":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def num_rows(self) -> int:
        return self.rows.shape[0]

    def add_row(self, row, rhs: float) -> "Polytope":
        row = np.asarray(row, dtype=float).reshape(1, -1)
        if row.shape[1] != self.dim:
            raise ValueError(f"row has length {row.shape[1]}, polytope dim is {self.dim}")
        return Polytope(np.vstack([self.rows, row]), np.append(self.rhs, rhs))

    def add_rows(self, rows, rhs) -> "Polytope":
        rows = np.asarray(rows, dtype=float).reshape(-1, self.dim)
        return Polytope(np.vstack([self.rows, rows]), np.concatenate([self.rhs, np.ravel(rhs)]))

    def pad(self, dim: int) -> "Polytope":
        """Extend to ``dim`` variables; new variables are box-constrained only."""
        if dim < self.dim:
            raise ValueError("cannot shrink a polytope")
        if dim == self.dim:
            return self
        rows = np.hstack([self.rows, np.zeros((self.num_rows, dim - self.dim))])
        return Polytope(rows, self.rhs)

    def contains(self, alpha, tol: float = 1e-9) -> bool:
        alpha = np.asarray(alpha, dtype=float)[:self.dim]
        if np.any(np.abs(alpha) > 1.0 + tol):
            return False
        return bool(np.all(self.rows @ alpha <= self.rhs + tol))

    def contains_batch(self, alphas, tol: float = 1e-9) -> np.ndarray:
        alphas = np.asarray(alphas, dtype=float)[:, :self.dim]
        inside = np.all(np.abs(alphas) <= 1.0 + tol, axis=1)
        if self.num_rows:
            inside &= np.all(alphas @ self.rows.T <= self.rhs + tol, axis=1)
        return inside


@dataclass(frozen=True, eq=False)
class StarSet:
    """``{c + G alpha | alpha in P}``."""

    center: np.ndarray
    generators: np.ndarray
    predicate: Polytope
    error_tags: tuple = ()

    def __post_init__(self):
        c = _frozen(np.reshape(self.center, -1))
        g = _frozen(np.reshape(self.generators, (c.shape[0], -1)))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "error_tags", tuple(self.error_tags))
        if self.predicate.dim > g.shape[1]:
            raise ValueError(
                f"predicate has {self.predicate.dim} variables, generators only {g.shape[1]}")
        if len(self.error_tags) > g.shape[1]:
            raise ValueError("more error tags than generator columns")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def num_vars(self) -> int:
        return self.generators.shape[1]

    @property
    def k_input(self) -> int:
        return self.num_vars - len(self.error_tags)

    def point(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        return self.center + self.generators[:, :alpha.shape[-1]] @ alpha

    def to_zonotope(self) -> "Zonotope":
        return Zonotope(self.center, self.generators, self.k_input, self.error_tags)


@dataclass(frozen=True, eq=False)
class Zonotope:
    """Star set whose predicate is exactly the base box."""

    center: np.ndarray
    generators: np.ndarray
    k_input: int
    error_tags: tuple = ()

    def __post_init__(self):
        c = _frozen(np.reshape(self.center, -1))
        g = _frozen(np.reshape(self.generators, (c.shape[0], -1)))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "error_tags", tuple(self.error_tags))
        if self.k_input + len(self.error_tags) != g.shape[1]:
            raise ValueError(
                f"k_input {self.k_input} + k_error {len(self.error_tags)} != {g.shape[1]} columns")

    @property
    def k_error(self) -> int:
        return len(self.error_tags)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def as_star(self) -> StarSet:
        return StarSet(self.center, self.generators, Polytope.box(self.k_input), self.error_tags)

    def intervals(self) -> tuple:
        radius = np.abs(self.generators).sum(axis=1)
        return self.center - radius, self.center + radius


@dataclass(frozen=True, eq=False)
class DiffSet:
    """Differential set ``<c_R - c_T, G_R - G_T, P_T>``.

    ``dG_input`` holds the columns covered by the predicate (optimized by LP),
    ``dG_error`` the trailing columns handled in closed form.
    """

    dc: np.ndarray
    dG_input: np.ndarray
    dG_error: np.ndarray
    predicate: Polytope
    error_tags: tuple = field(default=())

    @property
    def out_dim(self) -> int:
        return self.dc.shape[0]

    def value(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        k = self.dG_input.shape[1]
        return self.dc + self.dG_input @ alpha[:k] + self.dG_error @ alpha[k:]


# -- transformers -------------------------------------------------------------

def affine_map(s, W, b):
    """Apply ``x -> W x + b``; the predicate is untouched."""
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if W.ndim != 2 or W.shape[1] != s.dim:
        raise ValueError(f"weight matrix {W.shape} does not match set dimension {s.dim}")
    if b.shape[0] != W.shape[0]:
        raise ValueError(f"bias length {b.shape[0]} does not match {W.shape[0]} rows")
    c = W @ s.center + b
    G = W @ s.generators
    if isinstance(s, Zonotope):
        return Zonotope(c, G, s.k_input, s.error_tags)
    return StarSet(c, G, s.predicate, s.error_tags)


def zono_interval(z: Zonotope, dim: int) -> tuple:
    if not 0 <= dim < z.dim:
        raise IndexError(f"dimension {dim} out of range for {z.dim}-dimensional zonotope")
    radius = float(np.abs(z.generators[dim]).sum())
    c = float(z.center[dim])
    return c - radius, c + radius


def zero_row(s, neuron: int):
    """ReLU of a neuron known to be non-positive."""
    c = s.center.copy()
    G = s.generators.copy()
    c[neuron] = 0.0
    G[neuron] = 0.0
    if isinstance(s, Zonotope):
        return Zonotope(c, G, s.k_input, s.error_tags)
    return StarSet(c, G, s.predicate, s.error_tags)


def split_relu(s: StarSet, neuron: int) -> tuple:
    """Exact ReLU case split on ``neuron``; returns ``(neg, pos)``.

    Generator entries outside the predicate's columns are folded into the
    constraint's right-hand side (closed-form relaxation).
    """
    from .lp import approximate_row

    if not 0 <= neuron < s.dim:
        raise IndexError(f"neuron {neuron} out of range for {s.dim}-dimensional set")
    g = s.generators[neuron]
    c0 = float(s.center[neuron])
    k = s.predicate.dim
    trailing = range(k, s.num_vars)
    # value >= 0  <=>  -g.alpha <= c0
    pos_row, pos_rhs = approximate_row(-g, c0, trailing)
    # value <= 0  <=>   g.alpha <= -c0
    neg_row, neg_rhs = approximate_row(g, -c0, trailing)
    pos = StarSet(s.center, s.generators, s.predicate.add_row(pos_row[:k], pos_rhs), s.error_tags)
    neg_pred = s.predicate.add_row(neg_row[:k], neg_rhs)
    neg = zero_row(StarSet(s.center, s.generators, neg_pred, s.error_tags), neuron)
    return neg, pos


def parallelogram(lo: float, hi: float) -> tuple:
    """Slope and offset of the minimal-area ReLU relaxation on ``[lo, hi]``."""
    if not lo < 0.0 < hi:
        raise ValueError(f"over-approximation needs a straddling neuron, got [{lo}, {hi}]")
    lam = hi / (hi - lo)
    mu = -lam * lo / 2.0
    return lam, mu


def _overapprox_arrays(c, G, dim, lo, hi):
    lam, mu = parallelogram(lo, hi)
    c = c.copy()
    c[dim] = lam * c[dim] + mu
    G = G.copy()
    G[dim] *= lam
    col = np.zeros((G.shape[0], 1))
    col[dim, 0] = mu
    return c, np.hstack([G, col])


def overapprox_relu(z: Zonotope, dim: int, lo: float, hi: float, tag=None) -> Zonotope:
    """Replace ReLU on ``dim`` by a parallelogram using one new error column."""
    c, G = _overapprox_arrays(z.center, z.generators, dim, lo, hi)
    tag = ("?", -1, dim, len(z.error_tags)) if tag is None else tag
    return Zonotope(c, G, z.k_input, z.error_tags + (tag,))


def overapprox_relu_star(s: StarSet, dim: int, lo: float, hi: float, tag,
                         extend_predicate: bool = False) -> StarSet:
    """Star counterpart of :func:`overapprox_relu`.

    With ``extend_predicate`` the predicate grows to cover the new column
    (exact LP over error dimensions); otherwise it stays over its columns.
    """
    c, G = _overapprox_arrays(s.center, s.generators, dim, lo, hi)
    pred = s.predicate.pad(G.shape[1]) if extend_predicate else s.predicate
    return StarSet(c, G, pred, s.error_tags + (tag,))


def align_columns(a, b) -> tuple:
    """Generator matrices of ``a`` and ``b`` over a common column layout.

    Input columns must agree. Error columns are matched by tag; a column
    present in only one operand contributes zero on the other side. The layout
    follows ``b``'s column order, then ``a``'s unmatched columns.
    """
    if a.k_input != b.k_input:
        raise ValueError(f"input dimensions differ: {a.k_input} vs {b.k_input}")
    if len(set(a.error_tags)) != len(a.error_tags) or len(set(b.error_tags)) != len(b.error_tags):
        raise ValueError("duplicate error tags; cannot align")
    k_in = a.k_input
    tags = list(b.error_tags) + [t for t in a.error_tags if t not in set(b.error_tags)]
    index = {t: k_in + i for i, t in enumerate(tags)}
    width = k_in + len(tags)

    def expand(s):
        G = np.zeros((s.dim, width))
        G[:, :k_in] = s.generators[:, :k_in]
        for j, t in enumerate(s.error_tags):
            G[:, index[t]] = s.generators[:, k_in + j]
        return G

    return expand(a), expand(b), tuple(tags)


def make_diff(out_R, out_T) -> DiffSet:
    """Differential set of two outputs constrained by ``out_T``'s predicate."""
    if out_R.dim != out_T.dim:
        raise ValueError(f"output dimensions differ: {out_R.dim} vs {out_T.dim}")
    G_R, G_T, tags = align_columns(out_R, out_T)
    if isinstance(out_T, StarSet):
        pred = out_T.predicate
    else:
        pred = Polytope.box(out_T.k_input)
    dG = G_R - G_T
    k = pred.dim
    return DiffSet(out_R.center - out_T.center, dG[:, :k], dG[:, k:], pred, tags)


def init_from_box(box: InputBox) -> tuple:
    c = (box.lo + box.hi) / 2.0
    G = np.diag((box.hi - box.lo) / 2.0)
    star = StarSet(c, G, Polytope.box(box.dim))
    return star, star.to_zonotope()
