import numpy as np
import pytest
from hypothesis import given, strategies as st

from nnequiv.equivalence import (Counterexample, EquivProperty, check_epsilon_star,
                                 check_epsilon_zono, check_top1, concrete_counterexample,
                                 extract_counterexample, strict_top1_witness,
                                 validate_counterexample)
from nnequiv.geometry import DiffSet, Polytope, StarSet, init_from_box, make_diff
from nnequiv.networks import InputBox, make_network

seeds = st.integers(0, 1_000_000)


def _d(dc, dG, pred=None):
    dc = np.asarray(dc, float)
    dG = np.asarray(dG, float).reshape(len(dc), -1)
    return DiffSet(dc, dG, np.zeros((len(dc), 0)), pred or Polytope.box(dG.shape[1]))


def test_parse_property():
    assert EquivProperty.parse("epsilon:0.25") == EquivProperty("epsilon", 0.25)
    assert EquivProperty.parse("top1").kind == "top1"
    assert str(EquivProperty.parse("epsilon:1e-9")) == "epsilon:1e-09"
    for bad in ("epsilon:-1", "epsilon:x", "l2:1", "epsilon:0"):
        with pytest.raises(ValueError):
            EquivProperty.parse(bad)


def test_zono_check_examples():
    assert check_epsilon_zono(_d([0.0], [[0.0]]), 1e-9).proven
    res = check_epsilon_zono(_d([1.0], [[0.0]]), 0.5)
    assert not res.proven and res.max_dev == 1.0


@given(seeds)
def test_zono_check_sound(seed):
    rng = np.random.default_rng(seed)
    d = DiffSet(rng.normal(size=2), rng.normal(size=(2, 2)), rng.normal(size=(2, 2)),
                Polytope.box(2))
    bound = check_epsilon_zono(d, 1.0).max_dev
    a = rng.uniform(-1, 1, size=(10_000, 4))
    dev = np.abs(d.dc + a[:, :2] @ d.dG_input.T + a[:, 2:] @ d.dG_error.T).max()
    assert dev <= bound + 1e-12


def test_star_check_examples():
    assert check_epsilon_star(_d([0.0, 0.0], np.zeros((2, 1))), 1e-9).proven
    d = _d([1.0], [[0.0]])
    res = check_epsilon_star(d, 2.0, prefilter=False)
    assert res.proven and res.max_dev == pytest.approx(1.0)
    res = check_epsilon_star(d, 0.5)
    assert not res.proven and res.max_dev == pytest.approx(1.0)
    assert res.dim == 0 and res.sign == 1 and res.alpha is not None


@given(seeds, st.floats(0.05, 3.0))
def test_epsilon_monotone_and_zono_dominates(seed, eps):
    rng = np.random.default_rng(seed)
    pred = Polytope(rng.normal(size=(2, 2)), np.abs(rng.normal(size=2)))
    d = DiffSet(rng.normal(size=2) * 0.5, rng.normal(size=(2, 2)), rng.normal(size=(2, 1)) * 0.3,
                pred)
    star = check_epsilon_star(d, eps, prefilter=False)
    zono = check_epsilon_zono(d, eps)
    assert zono.max_dev >= star.max_dev - 1e-9
    if star.proven:
        assert check_epsilon_star(d, eps * 1.5, prefilter=False).proven


def _out(c, G, pred=None):
    G = np.asarray(G, float)
    return StarSet(c, G, pred or Polytope.box(G.shape[1]))


def test_top1_identical_outputs_proven():
    s = _out([0.1, 0.0, -0.2], [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    assert check_top1(s, s).proven


def test_top1_constant_disagreement():
    r = _out([1.0, 0.0], np.zeros((2, 1)))
    t = _out([0.0, 1.0], np.zeros((2, 1)))
    res = check_top1(r, t)
    assert not res.proven
    diff, alpha, j, i = res.candidates[0]
    assert (j, i) == (0, 1) and diff == pytest.approx(1.0)


@given(seeds)
def test_top1_regions_cover_predicate(seed):
    rng = np.random.default_rng(seed)
    pred = Polytope(rng.normal(size=(1, 2)), [0.5])
    r = _out(rng.normal(size=3), rng.normal(size=(3, 2)), pred)
    t = _out(rng.normal(size=3), rng.normal(size=(3, 2)), pred)
    res = check_top1(r, t)
    a = rng.uniform(-1, 1, size=(1000, 2))
    a = a[pred.contains_batch(a, tol=0)]
    winners = np.argmax(r.center + a @ r.generators.T, axis=1)
    assert set(winners.tolist()) <= set(res.feasible_regions)


@given(seeds, st.floats(0.1, 10.0))
def test_top1_invariant_under_positive_scaling(seed, scale):
    rng = np.random.default_rng(seed)
    r = _out(rng.normal(size=3), rng.normal(size=(3, 2)))
    t = _out(rng.normal(size=3), rng.normal(size=(3, 2)))
    base = check_top1(r, t, tie_tol=0.0).proven
    scaled = check_top1(_out(scale * r.center, scale * r.generators),
                        _out(scale * t.center, scale * t.generators), tie_tol=0.0).proven
    assert base == scaled


def test_strict_witness_separates():
    # R prefers 0 for alpha > 0, T prefers 1 for alpha > 0.5
    r = _out([0.0, 0.0], [[1.0], [0.0]])
    t = _out([0.0, 0.5], [[0.0], [1.0]])
    alpha = strict_top1_witness(r, t, 0, 1)
    ra, ta = r.point(alpha), t.point(alpha)
    assert np.argmax(ra) == 0 and ra[0] > ra[1]
    assert np.argmax(ta) == 1 and ta[1] > ta[0]
    # no point where R strictly prefers 1 and T strictly prefers 0
    assert strict_top1_witness(r, _out([0.0, 0.0], [[0.0], [0.0]]), 1, 0) is None


@pytest.fixture
def shift_pair():
    R = make_network([([[1.0]], [0.0], "relu"), ([[1.0]], [0.0], "linear")])
    T = make_network([([[1.0]], [0.0], "relu"), ([[1.0]], [1.0], "linear")])
    return R, T, InputBox([-1.0], [1.0])


def test_extract_accepts_exact_candidate(shift_pair):
    R, T, box = shift_pair
    star, _ = init_from_box(box)
    cex = extract_counterexample(np.array([0.3]), star, R, T, EquivProperty.epsilon_equiv(0.5))
    assert cex is not None and cex.deviation == pytest.approx(1.0)
    assert validate_counterexample(cex, R, T, EquivProperty.epsilon_equiv(0.5))


def test_extract_rejects_spurious_candidate():
    # R = T: the over-approximation suggests deviation, concrete check does not
    R = make_network([([[1.0], [-1.0]], [0.0, 0.0], "relu"), ([[1.0, 1.0]], [0.0], "linear")])
    star, _ = init_from_box(InputBox([-1.0], [1.0]))
    assert extract_counterexample([0.5], star, R, R, EquivProperty.epsilon_equiv(0.1)) is None


def test_boundary_deviation_counts_as_violation(shift_pair):
    R, T, _ = shift_pair
    cex = concrete_counterexample([0.0], R, T, EquivProperty.epsilon_equiv(1.0))
    assert cex is not None and cex.deviation == 1.0


def test_counterexample_json():
    c = Counterexample(np.array([1.0]), np.array([0.0, 1.0]), np.array([1.0, 0.0]),
                       argmax_r=1, argmax_t=0)
    assert c.to_json() == {"x": [1.0], "y_r": [0.0, 1.0], "y_t": [1.0, 0.0],
                           "argmax_r": 1, "argmax_t": 0}
    c = Counterexample(np.array([1.0]), np.array([0.0]), np.array([2.0]), deviation=2.0)
    assert set(c.to_json()) == {"x", "y_r", "y_t", "deviation"}


def test_top1_ties_are_not_counterexamples():
    R = make_network([([[0.0], [0.0]], [1.0, 1.0], "linear")])
    T = make_network([([[0.0], [0.0]], [1.0, 0.0], "linear")])
    assert concrete_counterexample([0.0], R, T, EquivProperty.top1()) is None
