import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semlearn.errors import Infeasible, InvalidParams
from semlearn.lp import LpProblem, solve_l1_linf

from oracles import l1_linf_reference


def test_identity_shrinks_until_tight():
    x = solve_l1_linf(LpProblem(np.eye(2), [1.0, 0.0], 0.1))
    np.testing.assert_allclose(x, [0.9, 0.0], atol=1e-12)


@pytest.mark.parametrize("lam", [1.0, 1.5])
def test_zero_is_feasible(lam):
    np.testing.assert_array_equal(solve_l1_linf(LpProblem(np.eye(2), [1.0, 0.0], lam)), [0.0, 0.0])


def test_random_psd_instance_matches_frozen_optimum():
    # optimum computed once by the vertex-enumeration oracle at 40 digits
    rng = np.random.default_rng(4)
    G = rng.standard_normal((4, 4))
    A = G @ G.T / 4 + 0.1 * np.eye(4)
    x = solve_l1_linf(LpProblem(A, [0, 1, 0, 0], 0.05))
    assert np.abs(x).sum() == pytest.approx(7.211651628461412, abs=1e-6)


def test_lambda_zero_is_inverse():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    x = solve_l1_linf(LpProblem(A, [1.0, 0.0], 0.0))
    np.testing.assert_allclose(x, np.linalg.inv(A)[:, 0], atol=1e-12)


def test_infeasible_detected():
    # two identical rows asking for values 0 and 1 with radius 0.1
    with pytest.raises(Infeasible):
        solve_l1_linf(LpProblem(np.array([[1.0], [1.0]]), [0.0, 1.0], 0.1))


def test_problem_validation():
    with pytest.raises(InvalidParams):
        LpProblem(np.eye(2), [1.0], 0.1)
    with pytest.raises(InvalidParams):
        LpProblem(np.eye(2), [1.0, 0.0], -0.1)
    with pytest.raises(InvalidParams):
        LpProblem(np.array([[np.inf]]), [1.0], 0.1)


def test_violation():
    prob = LpProblem(np.eye(2), [1.0, 0.0], 0.1)
    assert prob.violation(np.array([0.9, 0.0])) == 0.0
    assert prob.violation(np.array([0.5, 0.0])) == pytest.approx(0.4)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.floats(0.0, 0.6), st.integers(0, 10**6))
def test_matches_enumeration_oracle(q, k, lam, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((k, q))
    b = A @ rng.standard_normal(q) + rng.uniform(-lam, lam, size=k)  # feasible by construction
    want, _ = l1_linf_reference(A, b, lam)
    x = solve_l1_linf(LpProblem(A, b, lam))
    assert LpProblem(A, b, lam).violation(x) <= 1e-8 * max(1.0, np.abs(b).max())
    assert np.abs(x).sum() == pytest.approx(want, abs=1e-6)
