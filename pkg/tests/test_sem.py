import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semlearn.errors import CycleDetected, InvalidParams, InvalidVertex, NotTerminal, TooLarge
from semlearn.sem import (
    Dag,
    Sem,
    check_identifiability,
    constant_M,
    covariance_of,
    lemma1_counterexample,
    marginal_sem,
    precision_of,
    reachable_subsets,
    restrict_sem,
    support_sizes,
    validate_dag,
)
from semlearn.synth import random_dag, random_sem

from oracles import (
    constant_M_bruteforce,
    covariance_via_paths,
    precision_entrywise,
    topological_prefix_sets,
)


def chain(b=0.7):
    # vertex 1 <- vertex 0
    return Sem.from_weights(2, [(1, 0, b)], [1.0, 1.0])


# -- validate_dag --------------------------------------------------------------------


def test_two_node_dag():
    g = validate_dag(2, {(1, 0)})
    assert g.edges == frozenset({(1, 0)})
    assert g.parents(1) == [0] and g.children(0) == [1]


def test_two_cycle_rejected():
    with pytest.raises(CycleDetected) as info:
        validate_dag(2, {(0, 1), (1, 0)})
    assert sorted(info.value.cycle) == [0, 1]


def test_chain_of_three():
    g = validate_dag(3, {(0, 1), (1, 2)})
    assert g.topological_order() == [2, 1, 0]
    assert g.terminals() == [0]


@pytest.mark.parametrize("edges", [{(0, 3)}, {(-1, 0)}, {(1, 1)}])
def test_bad_vertices(edges):
    with pytest.raises((InvalidVertex, CycleDetected)):
        validate_dag(3, edges)


def test_degree_bound_enforced():
    with pytest.raises(InvalidParams):
        validate_dag(4, {(0, 1), (0, 2), (0, 3)}, degree_bound=2)


def test_cycle_in_longer_graph_named():
    with pytest.raises(CycleDetected) as info:
        validate_dag(4, {(0, 1), (1, 2), (2, 0), (3, 0)})
    assert sorted(info.value.cycle) == [0, 1, 2]


# -- Sem invariants ---------------------------------------------------------------------


def test_sem_requires_support_equal_edges():
    dag = validate_dag(2, {(1, 0)})
    with pytest.raises(InvalidParams):
        Sem(dag, np.zeros((2, 2)), np.ones(2))
    with pytest.raises(InvalidParams):
        Sem(dag, np.array([[0, 0.5], [0.5, 0]]), np.ones(2))


def test_sem_rejects_nonpositive_variance():
    with pytest.raises(InvalidParams):
        Sem.from_weights(2, [(1, 0, 0.5)], [1.0, 0.0])


def test_sem_arrays_read_only():
    s = chain()
    with pytest.raises(ValueError):
        s.B[0, 0] = 1.0


# -- covariance / precision ---------------------------------------------------------------


def test_empty_graph_moments_are_identity():
    s = Sem.from_weights(4, [], np.ones(4))
    np.testing.assert_array_equal(covariance_of(s), np.eye(4))
    np.testing.assert_array_equal(precision_of(s), np.eye(4))


@pytest.mark.parametrize("b", [0.7, -1.3, 2.0])
def test_two_node_closed_forms(b):
    s = chain(b)
    np.testing.assert_allclose(covariance_of(s), [[1, b], [b, 1 + b * b]], atol=1e-14)
    np.testing.assert_allclose(precision_of(s), [[1 + b * b, -b], [-b, 1]], atol=1e-14)


def test_counterexample_block_precision():
    r = math.sqrt(0.75)
    want = np.array([[1, -0.5, 0], [-0.5, 1.25, -r], [0, -r, 1]])
    for bits in ("0", "1"):
        s = lemma1_counterexample(1, 0.5, 1.0, 4.0, bits)
        np.testing.assert_allclose(precision_of(s), want, atol=1e-12)
    # the factor 1/v1 in front
    s = lemma1_counterexample(1, 0.5, 2.0, 8.0, "1")
    np.testing.assert_allclose(precision_of(s), want / 2.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(15))
def test_moments_against_oracles(seed):
    s = random_sem(random_dag(7, 3, 0.5, seed), 0.3, 1.5, ("range", 0.5, 2.0), seed)
    S, O = covariance_of(s), precision_of(s)
    np.testing.assert_allclose(S @ O, np.eye(7), atol=1e-9)
    np.testing.assert_allclose(S, covariance_via_paths(s), atol=1e-10)
    weights = [(i, j, s.B[i, j]) for i, j in s.dag.edges]
    np.testing.assert_allclose(O, precision_entrywise(7, weights, s.sigma2), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.integers(1, 4), st.floats(0.1, 1.0), st.integers(0, 10_000))
def test_mutual_inverse_property(p, d, prob, seed):
    s = random_sem(random_dag(p, d, prob, seed), 0.2, 1.2, ("range", 0.3, 3.0), seed)
    np.testing.assert_allclose(covariance_of(s) @ precision_of(s), np.eye(p), atol=1e-9)


# -- marginalization ----------------------------------------------------------------------


def test_marginal_drops_sink_of_chain():
    s = Sem.from_weights(3, [(0, 1, 0.5), (1, 2, -0.8)], [1.0, 2.0, 3.0])
    m = marginal_sem(s, 0)
    assert m.p == 2 and m.dag.edges == frozenset({(0, 1)})
    assert m.B[0, 1] == -0.8
    np.testing.assert_array_equal(m.sigma2, [2.0, 3.0])
    assert m.index_map == (1, 2)


def test_marginal_two_node_to_single():
    m = marginal_sem(chain(), 1)
    assert m.p == 1 and not m.dag.edges and m.B.shape == (1, 1)


def test_marginal_of_star():
    d = 4
    s = Sem.from_weights(d + 1, [(c, 0, 0.5 + 0.1 * c) for c in range(1, d + 1)], np.ones(d + 1))
    m = marginal_sem(s, 2)
    assert m.dag.children(0) == [1, 2, 3]
    assert m.index_map == (0, 1, 3, 4)


def test_marginal_rejects_nonterminal():
    with pytest.raises(NotTerminal):
        marginal_sem(chain(), 0)


@pytest.mark.parametrize("seed", range(10))
def test_marginal_matches_schur_complement(seed):
    s = random_sem(random_dag(8, 3, 0.4, seed), 0.3, 1.0, ("range", 0.5, 2.0), seed)
    O = precision_of(s)
    for i in s.dag.terminals():
        keep = [k for k in range(8) if k != i]
        schur = O[np.ix_(keep, keep)] - np.outer(O[keep, i], O[i, keep]) / O[i, i]
        np.testing.assert_allclose(precision_of(marginal_sem(s, i)), schur, atol=1e-9)


def test_restrict_requires_ancestral_set():
    s = Sem.from_weights(3, [(0, 1, 0.5), (1, 2, -0.8)], np.ones(3))
    assert restrict_sem(s, [1, 2]).p == 2
    with pytest.raises(NotTerminal):
        restrict_sem(s, [0, 1])


# -- enumeration, identifiability, M ------------------------------------------------------


@pytest.mark.parametrize("seed", range(8))
def test_reachable_subsets_equal_prefix_sets(seed):
    dag = random_dag(7, 3, 0.5, seed)
    got = {frozenset(v for v in range(7) if m >> v & 1) for m in reachable_subsets(dag)}
    assert got == topological_prefix_sets(dag)


def test_enumeration_limit():
    dag = random_dag(25, 2, 0.2, 0)
    s = random_sem(dag, 0.5, 1.0, 1.0, 0)
    with pytest.raises(TooLarge):
        check_identifiability(s)
    with pytest.raises(TooLarge):
        constant_M(s, limit=20)


@pytest.mark.parametrize("seed", range(20))
def test_homoscedastic_is_identifiable(seed):
    s = random_sem(random_dag(10, 3, 0.4, seed), 0.1, 1.0, 0.7, seed)
    assert check_identifiability(s).satisfied


@pytest.mark.parametrize("seed", range(10))
def test_factor_two_band_with_strong_edges(seed):
    # sigma^2 in [1, 2) and B^2 / sigma_child^2 >= 1 on every edge
    dag = random_dag(9, 3, 0.4, seed)
    rng = np.random.default_rng(seed)
    s2 = rng.uniform(1.0, 2.0 - 1e-9, size=9)
    weights = [(i, j, rng.choice([-1, 1]) * math.sqrt(s2[i]) * rng.uniform(1.0, 1.5)) for i, j in dag.edges]
    assert check_identifiability(Sem.from_weights(9, weights, s2)).satisfied


def test_left_variant_witness_is_vertex_three():
    s = lemma1_counterexample(1, 0.5, 1.0, 4.0, "0")
    rep = check_identifiability(s)
    assert not rep.satisfied
    assert rep.witness[2] == 2
    assert rep.worst_margin <= 1e-12


def test_constant_M_trivial_cases():
    assert constant_M(Sem.from_weights(5, [], np.ones(5))) == 1.0
    assert constant_M(chain(1.0)) == pytest.approx(3.0, abs=1e-14)


@pytest.mark.parametrize("seed", range(6))
def test_constant_M_against_bruteforce(seed):
    s = random_sem(random_dag(8, 3, 0.4, seed), 0.3, 1.0, ("range", 0.5, 2.0), seed)
    assert constant_M(s) == pytest.approx(constant_M_bruteforce(s, covariance_of(s)), rel=1e-9)


# -- counterexample family -----------------------------------------------------------------


def test_counterexample_variants_share_precision():
    a = lemma1_counterexample(1, 0.5, 1.0, 4.0, "0")
    b = lemma1_counterexample(1, 0.5, 1.0, 4.0, "1")
    assert a.dag.edges != b.dag.edges
    assert np.abs(precision_of(a) - precision_of(b)).max() <= 1e-12


def test_counterexample_block_diagonal():
    s = lemma1_counterexample(2, 0.5, 1.0, 4.0, "01")
    O = precision_of(s)
    assert s.p == 6
    np.testing.assert_allclose(O[:3, :3], O[3:, 3:], atol=1e-12)
    assert np.all(O[:3, 3:] == 0)


def test_connected_variants_share_precision():
    mats = [precision_of(lemma1_counterexample(2, -1.2, 2.0, 3.0, bits, connected=True, b0=0.8))
            for bits in ("00", "01", "10", "11")]
    for M in mats[1:]:
        assert np.abs(M - mats[0]).max() <= 1e-12


@pytest.mark.parametrize("v2", [1.0, 0.5])
def test_counterexample_needs_v2_above_v1(v2):
    with pytest.raises(InvalidParams):
        lemma1_counterexample(1, 0.5, 1.0, v2, "0")


# -- support sizes ------------------------------------------------------------------------


def test_star_with_co_parents_hits_d_squared():
    # vertex 0 has children 1, 2; each child has one more parent (3, 4)
    s = Sem.from_weights(5, [(1, 0, 0.7), (2, 0, 0.9), (1, 3, 0.6), (2, 4, -0.8)], np.ones(5))
    assert s.dag.max_degree() == 2
    assert support_sizes(precision_of(s))[0] == 4
