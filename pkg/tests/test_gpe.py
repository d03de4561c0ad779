import numpy as np
import pytest

from nnequiv.equivalence import EquivProperty, validate_counterexample
from nnequiv.geometry import zono_interval
from nnequiv.gpe import Engine, EngineConfig, VerdictKind, enumerate_paths
from nnequiv.instances import perturb, random_network
from nnequiv.networks import InputBox, eval_network, make_network
from nnequiv.oracle import grid_check
from nnequiv.refinement import Strategy, StrategyKind

from conftest import shift_last_bias
from helpers import collect_leaves, sample_polytope

EPS = EquivProperty.epsilon_equiv


def _engine(R, T, box, kind="E", prop=None):
    return Engine(R, T, box, prop or EPS(1.0), Strategy(StrategyKind(kind)))


def _to_relu(engine, s):
    (s,) = engine.step(s)  # affine map of the first layer
    return s


def test_positive_layer_has_no_branching():
    R = make_network([([[1.0], [2.0]], [3.0, 3.0], "relu"), ([[1.0, 1.0]], [0.0], "linear")])
    box = InputBox([-1.0], [1.0])
    eng = _engine(R, R, box)
    s = _to_relu(eng, eng.initial_state())
    before = s.star
    for _ in range(2):
        (s,) = eng.step(s)
    assert s.star is before and eng.stats.splits == 0


def test_straddling_neuron_exact_gives_two_children():
    R = make_network([([[1.0]], [0.0], "relu"), ([[1.0]], [0.0], "linear")])
    eng = _engine(R, R, InputBox([-1.0], [1.0]))
    s = _to_relu(eng, eng.initial_state())
    children = eng.step(s)
    assert len(children) == 2 and eng.stats.descend_ops == 2
    assert [c.path_id for c in children] == ["b0", "b1"]
    assert all(c.split_depth == 1 for c in children)


def test_straddling_neuron_overapprox_grows_error_dims():
    R = make_network([([[1.0]], [0.0], "relu"), ([[1.0]], [0.0], "linear")])
    eng = _engine(R, R, InputBox([-1.0], [1.0]), kind="F")
    s = _to_relu(eng, eng.initial_state())
    (t,) = eng.step(s)
    assert t.zono.k_error == 1 and len(t.overapprox_log) == 1


def test_relu_bounds_no_split_equals_zonotope(small_pair):
    net, box = small_pair
    eng = _engine(net, net, box)
    s = _to_relu(eng, eng.initial_state())
    for j in range(4):
        lo, hi, _ = eng.relu_bounds(s, j)
        assert (lo, hi) == pytest.approx(zono_interval(s.zono, j))


def test_relu_bounds_tightened_by_split():
    # neuron 0 splits on alpha >= 0; neuron 1 carries the same value
    R = make_network([([[1.0], [1.0]], [0.0, 0.0], "relu"), ([[1.0, 1.0]], [0.0], "linear")])
    eng = _engine(R, R, InputBox([-1.0], [1.0]))
    s = _to_relu(eng, eng.initial_state())
    neg, pos = eng.step(s)
    lo, hi, cert = eng.relu_bounds(pos, 1)
    assert lo == pytest.approx(0.0) and hi == pytest.approx(1.0) and cert
    assert zono_interval(pos.zono, 1) == (-1.0, 1.0)


def test_relu_bounds_contain_samples(small_pair):
    net, box = small_pair
    rng = np.random.default_rng(0)
    leaves = []
    enumerate_paths(net, net, box, EPS(1e-9), "E", EngineConfig(leaf_hook=collect_leaves(leaves)))
    eng = _engine(net, net, box)
    for leaf in leaves[:3]:
        # re-run the R side of this leaf's region and check first-layer bounds
        alphas = sample_polytope(leaf.star.predicate, 100, rng)
        s = _to_relu(eng, eng.initial_state())
        s.star = type(s.star)(s.star.center, s.star.generators, leaf.star.predicate)
        pre = alphas @ s.star.generators.T + s.star.center
        for j in range(s.star.dim):
            lo, hi, _ = eng.relu_bounds(s, j)
            assert np.all(pre[:, j] >= lo - 1e-9) and np.all(pre[:, j] <= hi + 1e-9)


def test_transition_keeps_predicate():
    R = make_network([([[1.0], [-1.0]], [0.0, 0.0], "relu"), ([[1.0, 1.0]], [0.0], "linear")])
    box = InputBox([-1.0], [1.0])
    eng = _engine(R, R, box)
    frontier, done = [eng.initial_state()], []
    while frontier:
        s = frontier.pop()
        if eng.finished(s):
            done.append(s)
            continue
        frontier.extend(eng.step(s))
    for s in done:
        rows = s.star.predicate.num_rows
        eng.transition(s)
        assert s.nn == "T" and s.layer == 0 and s.out_R is not None
        np.testing.assert_array_equal(s.star.center, eng.input_star.center)
        np.testing.assert_array_equal(s.star.generators, eng.input_star.generators)
        assert s.star.predicate.num_rows == rows == s.split_depth


def test_identical_networks_equivalent(small_pair):
    net, box = small_pair
    verdict, stats = enumerate_paths(net, net, box, EPS(1e-9), "E")
    assert verdict.kind is VerdictKind.EQUIVALENT
    assert stats.checks_run == stats.paths_total and stats.wall_time > 0


def test_bias_shift_refuted(small_pair):
    net, box = small_pair
    other = shift_last_bias(net, 1.0)
    verdict, _ = enumerate_paths(net, other, box, EPS(0.5), "E")
    assert verdict.kind is VerdictKind.NOT_EQUIVALENT
    assert verdict.counterexample.deviation == pytest.approx(1.0, abs=1e-12)
    assert validate_counterexample(verdict.counterexample, net, other, EPS(0.5))


def test_grid_agreement_random_pairs():
    rng = np.random.default_rng(11)
    box = InputBox([-1.0, -1.0], [1.0, 1.0])
    for n in range(20):
        R = random_network([2, 4, 4, 2], rng)
        T = perturb(R, rng, sigma=0.05) if n % 2 else R
        worst = grid_check(R, T, box, EPS(1.0), resolution=25, n_random=2000).worst_deviation
        eps = 0.5 * worst if n % 2 else 1e-6
        prop = EPS(eps)
        verdict, _ = enumerate_paths(R, T, box, prop, "L")
        report = grid_check(R, T, box, prop, resolution=25, n_random=2000)
        assert (verdict.kind is VerdictKind.NOT_EQUIVALENT) == report.violation_found


def test_output_correspondence_and_partition(small_pair):
    net, box = small_pair
    other = shift_last_bias(net, 0.25)
    rng = np.random.default_rng(1)
    leaves = []
    enumerate_paths(net, other, box, EPS(1.0), "E", EngineConfig(leaf_hook=collect_leaves(leaves)))
    eng = _engine(net, other, box)
    for leaf in leaves:
        alphas = sample_polytope(leaf.star.predicate, 100, rng)
        X = alphas @ eng.input_star.generators.T + eng.input_star.center
        np.testing.assert_allclose(eval_network(net, X), alphas @ leaf.out_R.generators.T
                                   + leaf.out_R.center, atol=1e-6)
        np.testing.assert_allclose(eval_network(other, X), alphas @ leaf.star.generators.T
                                   + leaf.star.center, atol=1e-6)
    alphas = rng.uniform(-1, 1, size=(10_000, 2))
    covered = np.zeros(len(alphas), dtype=bool)
    for leaf in leaves:
        covered |= leaf.star.predicate.contains_batch(alphas, tol=1e-9)
    assert covered.all()


def test_infeasible_children_are_dropped_not_counted_as_paths():
    # the second neuron repeats the first: after the first split one child of
    # the second split would be empty; LP bounds catch it as fixed-phase
    R = make_network([([[1.0], [1.0], [-1.0]], [0.0, 0.0, 0.0], "relu"),
                      ([[1.0, 1.0, 1.0]], [0.0], "linear")])
    box = InputBox([-1.0], [1.0])
    verdict, stats = enumerate_paths(R, R, box, EPS(1e-9), "E",
                                     EngineConfig(check_feasibility=True))
    assert verdict.kind is VerdictKind.EQUIVALENT
    assert stats.paths_total == 2 and stats.descend_ops == 2 * stats.splits


def test_timeout_verdict(small_pair):
    net, box = small_pair
    verdict, stats = enumerate_paths(net, net, box, EPS(1e-9), "E", EngineConfig(timeout=1e-9))
    assert verdict.kind is VerdictKind.TIMEOUT and verdict.exit_code == 2


@pytest.mark.parametrize("workers", [2, 4])
def test_parallel_matches_serial(small_pair, workers):
    net, box = small_pair
    cfg = EngineConfig(workers=workers)
    v, s = enumerate_paths(net, net, box, EPS(1e-9), "E", cfg)
    v1, s1 = enumerate_paths(net, net, box, EPS(1e-9), "E")
    assert v.kind is v1.kind is VerdictKind.EQUIVALENT
    assert s.paths_total == s1.paths_total
    other = shift_last_bias(net, 1.0)
    v, _ = enumerate_paths(net, other, box, EPS(0.5), "L", cfg)
    assert v.kind is VerdictKind.NOT_EQUIVALENT
    assert validate_counterexample(v.counterexample, net, other, EPS(0.5))


def test_top1_tie_only_disagreement_is_unknown():
    # R ties everywhere, T prefers output 1 for x > 0: argmax sets still intersect
    R = make_network([([[0.0], [0.0]], [0.0, 0.0], "linear")])
    T = make_network([([[0.0], [1.0]], [0.0, 0.0], "linear")])
    verdict, stats = enumerate_paths(R, T, InputBox([-1.0], [1.0]), EquivProperty.top1(), "E")
    assert verdict.kind is VerdictKind.UNKNOWN and stats.unresolved == 1


def test_top1_constant_disagreement():
    R = make_network([([[0.0]], [1.0], "relu"), ([[1.0], [0.0]], [0.0, 0.5], "linear")])
    T = make_network([([[0.0]], [1.0], "relu"), ([[0.0], [1.0]], [0.5, 0.0], "linear")])
    verdict, _ = enumerate_paths(R, T, InputBox([-1.0], [1.0]), EquivProperty.top1(), "L")
    cex = verdict.counterexample
    assert verdict.kind is VerdictKind.NOT_EQUIVALENT
    assert (cex.argmax_r, cex.argmax_t) == (0, 1)


def test_mismatched_networks_rejected(small_pair):
    net, box = small_pair
    other = make_network([([[1.0, 1.0]], [0.0], "linear")])
    with pytest.raises(ValueError):
        enumerate_paths(net, other, box, EPS(1.0))
