"""``min ||x||_1  s.t.  ||A x - b||_inf <= radius`` as a linear program.

The LP is handed to HiGHS (through :func:`scipy.optimize.linprog`) in the
split form over ``(x, t)``::

    minimize   sum(t)
    subject to -t <= x <= t
               b - radius <= A x <= b + radius

and the returned vertex is then polished by re-solving its active equations
in least squares, which brings feasibility and optimality down to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import bmat, csr_matrix, identity

from .errors import Infeasible, InvalidParams, IterationLimit

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class LpProblem:
    A: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise InvalidParams(f"A has {A.shape[0]} rows but b has {b.size} entries")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidParams("LP data must be finite")
        if not self.radius >= 0:
            raise InvalidParams("radius must be non-negative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "radius", float(self.radius))

    def violation(self, x: np.ndarray) -> float:
        """How far ``x`` is outside the feasible set (0 if feasible)."""
        r = np.abs(self.A @ x - self.b) - self.radius
        return float(max(r.max(initial=0.0), 0.0))


def _polish(prob: LpProblem, x: np.ndarray, tol: float) -> np.ndarray:
    A, b, lam = prob.A, prob.b, prob.radius
    scale = max(1.0, float(np.abs(x).max(initial=0.0)))
    J = np.nonzero(np.abs(x) > 1e-12 * scale)[0]
    if J.size == 0:
        return x if prob.violation(np.zeros_like(x)) > prob.violation(x) else np.zeros_like(x)
    r = A @ x - b
    T = np.nonzero(np.abs(r) >= lam - 10 * tol * max(1.0, np.abs(b).max()))[0]
    if T.size < J.size:
        return x
    side = np.where(r[T] >= 0, 1.0, -1.0)
    sub = A[np.ix_(T, J)]
    if np.linalg.matrix_rank(sub) < J.size:
        return x
    xJ, *_ = np.linalg.lstsq(sub, b[T] + side * lam, rcond=None)
    y = np.zeros_like(x)
    y[J] = xJ
    if np.any(np.sign(xJ) != np.sign(x[J])):
        return x
    if prob.violation(y) > max(prob.violation(x), 1e-13 * scale):
        return x
    if np.abs(y).sum() > np.abs(x).sum() + tol * scale:
        return x
    return y


def solve_l1_linf(prob: LpProblem, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Minimum-l1 point within ``radius`` (in sup norm) of ``A x = b``.

    Raises:
        Infeasible: the constraint set is empty.
        IterationLimit: the solver stopped early; ``best`` holds its iterate.
    """
    A, b, lam = prob.A, prob.b, prob.radius
    k, q = A.shape
    I = identity(q, format="csr")
    As = csr_matrix(A)
    A_ub = bmat([[I, -I], [-I, -I], [As, None], [-As, None]], format="csr")
    b_ub = np.concatenate([np.zeros(2 * q), b + lam, lam - b])
    c = np.concatenate([np.zeros(q), np.ones(q)])
    bounds = [(None, None)] * q + [(0, None)] * q
    ftol = min(max(tol, 1e-10), 1e-7)
    opts = {"primal_feasibility_tolerance": ftol, "dual_feasibility_tolerance": ftol}
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs", options=opts)
    if res.status not in (0, 2):
        # HiGHS occasionally gives up on nearly-infeasible instances; retry with the IPM
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs-ipm", options=opts)
    if res.status == 2 or (res.status != 0 and "infeasible" in str(res.message).lower()):
        raise Infeasible(f"no x with |Ax - b|_inf <= {lam}")
    if res.status != 0 or res.x is None:
        best = None if res.x is None else res.x[:q]
        raise IterationLimit(f"LP solver stopped: {res.message}", best=best)
    x = _polish(prob, res.x[:q], ftol)
    if prob.violation(x) > tol * max(1.0, np.abs(b).max(initial=0.0)):
        raise Infeasible(f"solver returned a point violating the constraints by {prob.violation(x):.3g}")
    return x
