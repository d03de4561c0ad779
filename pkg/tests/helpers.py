import numpy as np

from nnequiv.lp import LpSolver


def sample_polytope(P, n, rng):
    """Hit-and-run samples from {rows a <= rhs} within [-1, 1]^dim."""
    solver = LpSolver()
    k = P.dim
    verts = [solver.maximize(P, rng.normal(size=k)).witness for _ in range(2 * k + 2)]
    x = np.mean(verts, axis=0)
    A = np.vstack([P.rows, np.eye(k), -np.eye(k)])
    b = np.concatenate([P.rhs, np.ones(k), np.ones(k)])
    out = []
    for _ in range(n):
        d = rng.normal(size=k)
        d /= np.linalg.norm(d)
        Ad = A @ d
        slack = b - A @ x
        with np.errstate(divide="ignore", invalid="ignore"):
            t = slack / Ad
        hi = np.min(t[Ad > 1e-12], initial=np.inf)
        lo = np.max(t[Ad < -1e-12], initial=-np.inf)
        lo, hi = min(lo, 0.0), max(hi, 0.0)
        x = x + rng.uniform(lo, hi) * d
        out.append(x.copy())
    return np.array(out)


def collect_leaves(states):
    def hook(s, engine):
        states.append(s.clone())
    return hook
