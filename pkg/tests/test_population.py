import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semlearn.errors import EmptyActiveSet, NonPositiveDiagonal, NotPositiveDefinite, NotSymmetric
from semlearn.population import find_terminal, learn_population, misspecification_margin, schur_remove
from semlearn.precision import PrecisionEstimate
from semlearn.sem import KnownVarianceSpec, Sem, lemma1_counterexample, marginal_sem, precision_of
from semlearn.synth import random_dag, random_sem

from oracles import all_topological_orders


# -- find_terminal --------------------------------------------------------------------


def test_find_terminal_examples():
    assert find_terminal([3, 1, 2], {0, 1, 2}) == 1
    assert find_terminal([1, 1], {0, 1}) == 0
    assert find_terminal([np.nan, 5], {1}) == 1


def test_find_terminal_tie_rules():
    assert find_terminal([1, 1, 2], {0, 1, 2}, "highest") == 1
    picks = {find_terminal([1, 1, 1], {0, 1, 2}, np.random.default_rng(s)) for s in range(30)}
    assert picks == {0, 1, 2}


def test_find_terminal_empty():
    with pytest.raises(EmptyActiveSet):
        find_terminal([1.0], set())


# -- schur_remove ---------------------------------------------------------------------


def test_schur_on_identity():
    out = schur_remove(PrecisionEstimate.from_matrix(np.eye(3)), 1)
    assert out.active == {0, 2}
    np.testing.assert_array_equal(out.values, np.diag([1.0, 0.0, 1.0]))


def test_schur_two_node_chain():
    b = 0.7
    O = np.array([[1 + b * b, -b], [-b, 1]])
    out = schur_remove(PrecisionEstimate.from_matrix(O), 1)
    assert out.values[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_schur_three_chain_matches_marginal():
    s = Sem.from_weights(3, [(0, 1, 0.6), (1, 2, -1.1)], [1.0, 0.5, 2.0])
    out = schur_remove(PrecisionEstimate.from_matrix(precision_of(s)), 0)
    np.testing.assert_allclose(out.active_block(), precision_of(marginal_sem(s, 0)), atol=1e-9)


def test_schur_rejects_nonpositive_pivot():
    with pytest.raises(NonPositiveDiagonal):
        schur_remove(PrecisionEstimate.from_matrix(np.diag([1.0, -1.0])), 1)


@pytest.mark.parametrize("seed", range(10))
def test_schur_keeps_psd(seed):
    s = random_sem(random_dag(10, 3, 0.4, seed), 0.3, 1.0, ("range", 0.5, 2.0), seed)
    est = PrecisionEstimate.from_matrix(precision_of(s))
    order = list(reversed(s.dag.topological_order()))
    for i in order[:-1]:
        est = schur_remove(est, i)
        A = est.active_block()
        assert np.abs(A - A.T).max() <= 1e-9
        assert np.linalg.eigvalsh(A).min() >= -1e-9


# -- learn_population ----------------------------------------------------------------------


def test_identity_gives_empty_graph():
    res = learn_population(np.eye(4))
    assert not res.G_hat.edges
    assert np.all(res.B_hat == 0)
    assert sorted(res.elimination_order) == [0, 1, 2, 3]


def test_two_node_chain_trace():
    b = 0.7
    res = learn_population(np.array([[1 + b * b, -b], [-b, 1]]))
    assert res.elimination_order[0] == 1
    assert res.B_hat[1, 0] == 0.7
    assert res.G_hat.edges == frozenset({(1, 0)})
    assert res.diagnostics[0].gap == pytest.approx(b * b)


def test_left_variant_known_variances():
    s = lemma1_counterexample(1, 0.5, 1.0, 4.0, "0")
    res = learn_population(precision_of(s), KnownVarianceSpec(s.sigma2))
    assert res.G_hat.edges == s.dag.edges
    np.testing.assert_allclose(res.B_hat, s.B, atol=1e-12)


def test_right_variant_known_variances():
    s = lemma1_counterexample(2, -1.2, 2.0, 3.0, "10")
    res = learn_population(precision_of(s), KnownVarianceSpec(s.sigma2, alpha=3.0))
    assert res.G_hat.edges == s.dag.edges


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 14), st.integers(1, 4), st.floats(0.1, 0.9), st.integers(0, 10**6))
def test_exact_recovery_homoscedastic(p, d, prob, seed):
    s = random_sem(random_dag(p, d, prob, seed), 0.2, 1.5, 1.3, seed)
    res = learn_population(precision_of(s))
    assert res.G_hat.edges == s.dag.edges
    assert np.abs(res.B_hat - s.B).max() <= 1e-8
    assert s.dag.is_topological_order(res.elimination_order[::-1])


@pytest.mark.parametrize("seed", range(10))
def test_tie_break_independence(seed):
    s = random_sem(random_dag(9, 3, 0.3, seed), 0.3, 1.0, 1.0, seed)
    O = precision_of(s)
    ref = learn_population(O, tie_break="lowest").B_hat
    for rule in ("highest", np.random.default_rng(seed)):
        np.testing.assert_allclose(learn_population(O, tie_break=rule).B_hat, ref, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_elimination_order_is_reverse_topological(seed):
    s = random_sem(random_dag(7, 2, 0.5, seed), 0.3, 1.0, 1.0, seed)
    res = learn_population(precision_of(s))
    assert tuple(res.elimination_order[::-1]) in set(all_topological_orders(s.dag))


def test_input_validation():
    with pytest.raises(NotSymmetric):
        learn_population(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(NonPositiveDiagonal):
        learn_population(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(NotPositiveDefinite):
        learn_population(np.array([[1.0, 2.0], [2.0, 1.0]]))


# -- misspecification -----------------------------------------------------------------------


def test_exact_variances_hold():
    s = random_sem(random_dag(8, 3, 0.4, 1), 0.3, 1.0, ("range", 0.5, 2.0), 1)
    holds, margin = misspecification_margin(s, KnownVarianceSpec(s.sigma2))
    assert holds and margin > 0
    holds2, margin2 = misspecification_margin(s, KnownVarianceSpec(4.0 * s.sigma2))
    assert holds2 and margin2 == pytest.approx(margin)


def test_ratio_band_too_wide_fails():
    # two disjoint unit-weight edges; supplied/true ratios spread over [1, 2.5]
    s = Sem.from_weights(4, [(0, 1, 1.0), (2, 3, -1.0)], np.ones(4))
    holds, margin = misspecification_margin(s, KnownVarianceSpec(np.array([1.0, 2.5, 1.0, 1.0])))
    assert not holds
    assert margin == pytest.approx(1.0 - 1.5)
