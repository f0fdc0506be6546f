"""Structure learning from an exact precision matrix.

Each round picks the active vertex with the smallest (optionally
variance-weighted) precision diagonal, reads its parent weights off its row,
and removes it with a rank-one Schur downdate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import (
    EmptyActiveSet,
    InvalidParams,
    NonPositiveDiagonal,
    NotPositiveDefinite,
    NotSymmetric,
)
from .precision import PrecisionEstimate
from .sem import ENUMERATION_LIMIT, Dag, KnownVarianceSpec, Sem, _children_masks, _members, reachable_subsets

TieBreak = Union[str, np.random.Generator]

WEIGHT_CUTOFF = 1e-12
TIE_RTOL = 1e-12


@dataclass
class IterationRecord:
    vertex: int
    min_value: float
    runner_up: Optional[float]
    gap: Optional[float]
    widened: tuple = ()

    def to_json(self) -> dict:
        out = {
            "vertex": self.vertex + 1,
            "min_value": self.min_value,
            "runner_up": self.runner_up,
            "gap": self.gap,
        }
        if self.widened:
            out["widened_columns"] = [k + 1 for k in self.widened]
        return out


@dataclass
class LearnResult:
    B_hat: np.ndarray
    G_hat: Dag
    elimination_order: list
    diagnostics: list = field(default_factory=list)

    def edges(self) -> list[tuple[int, int, float]]:
        """0-based ``(child, parent, weight)`` triples, sorted."""
        return [(i, j, float(self.B_hat[i, j])) for (i, j) in sorted(self.G_hat.edges)]


def find_terminal(diag_scores, active, tie_break: TieBreak = "lowest") -> int:
    """Argmin of ``diag_scores`` over ``active``.

    Scores within a relative ``1e-12`` of the minimum count as tied; ``tie_break``
    is ``"lowest"``, ``"highest"`` or a numpy ``Generator`` for a random pick.
    """
    act = sorted(active)
    if not act:
        raise EmptyActiveSet("no active vertices left")
    scores = np.asarray(diag_scores, dtype=float)[act]
    if not np.all(np.isfinite(scores)):
        raise InvalidParams("diagonal scores must be finite on the active set")
    lo = scores.min()
    tied = [v for v, s in zip(act, scores) if s - lo <= TIE_RTOL * max(1.0, abs(lo))]
    if isinstance(tie_break, np.random.Generator):
        return int(tied[tie_break.integers(len(tied))])
    if tie_break == "lowest":
        return tied[0]
    if tie_break == "highest":
        return tied[-1]
    raise InvalidParams(f"unknown tie-break rule {tie_break!r}")


def _schur_inplace(values: np.ndarray, i: int, cutoff: float) -> None:
    # Only entries in the support of row i change.
    nz = np.nonzero(np.abs(values[i]) > cutoff)[0]
    nz = nz[nz != i]
    oii = values[i, i]
    if nz.size:
        u = values[nz, i].copy()
        values[np.ix_(nz, nz)] -= np.outer(u, u) / oii
    values[i, :] = 0.0
    values[:, i] = 0.0


def schur_remove(omega: PrecisionEstimate, i: int) -> PrecisionEstimate:
    """Rank-one downdate eliminating active vertex ``i``."""
    if i not in omega.active:
        raise InvalidParams(f"vertex {i + 1} is not active")
    oii = omega.values[i, i]
    if not oii > 0:
        raise NonPositiveDiagonal(i, float(oii))
    v = omega.values.copy()
    _schur_inplace(v, i, omega.cutoff)
    return PrecisionEstimate(v, omega.active - {i}, omega.lambda_used, omega.cutoff)


def _check_precision_input(omega: np.ndarray) -> np.ndarray:
    O = np.asarray(omega, dtype=float)
    if O.ndim != 2 or O.shape[0] != O.shape[1]:
        raise NotSymmetric("precision matrix must be square")
    if not np.all(np.isfinite(O)):
        raise NotPositiveDefinite("precision matrix has non-finite entries")
    scale = max(np.abs(O).max(), 1.0)
    if np.abs(O - O.T).max() > 1e-9 * scale:
        raise NotSymmetric("precision matrix is not symmetric")
    O = (O + O.T) / 2
    d = np.diag(O)
    if np.any(d <= 0):
        k = int(np.argmin(d))
        raise NonPositiveDiagonal(k, float(d[k]))
    if np.linalg.eigvalsh(O).min() < -1e-8 * d.max():
        raise NotPositiveDefinite("precision matrix is not positive definite")
    return O


def _variance_weights(p: int, d_diag) -> np.ndarray:
    if d_diag is None:
        return np.ones(p)
    d = d_diag.d_diag if isinstance(d_diag, KnownVarianceSpec) else np.asarray(d_diag, dtype=float)
    if d.shape != (p,):
        raise InvalidParams(f"known variances need length {p}")
    if np.any(d <= 0):
        raise InvalidParams("known variances must be positive")
    return d


def run_elimination(
    values: np.ndarray,
    weights: np.ndarray,
    tie_break: TieBreak,
    remove: Callable[[np.ndarray, frozenset, int, int], np.ndarray],
) -> LearnResult:
    """Shared elimination loop.

    ``remove(values, active, vertex, round)`` returns the matrix over the
    vertices left once ``vertex`` is gone; it may update ``values`` in place.
    """
    p = values.shape[0]
    active = frozenset(range(p))
    B = np.zeros((p, p))
    order: list[int] = []
    diags: list[IterationRecord] = []
    for t in range(p):
        scores = np.diag(values) * weights
        i = find_terminal(scores, active, tie_break)
        rest = sorted(active - {i})
        runner = float(np.min(scores[rest])) if rest else None
        diags.append(IterationRecord(i, float(scores[i]), runner,
                                     None if runner is None else runner - float(scores[i])))
        oii = values[i, i]
        if not oii > 0:
            raise NonPositiveDiagonal(i, float(oii), diagnostics=diags)
        if rest:
            row = -values[i, rest] / oii
            row[np.abs(row) < WEIGHT_CUTOFF] = 0.0
            B[i, rest] = row
        order.append(i)
        values = remove(values, active, i, t)
        active = active - {i}
    edges = frozenset((int(a), int(b)) for a, b in zip(*np.nonzero(B)))
    return LearnResult(B, Dag(p, edges), order, diags)


def learn_population(
    omega,
    d_diag: Optional[KnownVarianceSpec] = None,
    tie_break: TieBreak = "lowest",
    cutoff: float = 1e-12,
) -> LearnResult:
    """Recover ``(G, B)`` from a population precision matrix.

    Without ``d_diag`` the diagonal is used as is; with known variances the
    scores are ``Omega_ii * sigma_i^2``.

    Raises:
        NotSymmetric, NotPositiveDefinite, NonPositiveDiagonal: invalid input.
    """
    O = _check_precision_input(omega)
    w = _variance_weights(O.shape[0], d_diag)

    # In-place downdates keep each round at O(|support|^2).
    def remove(values, _active, i, _t):
        _schur_inplace(values, i, cutoff)
        return values

    return run_elimination(O.copy(), w, tie_break, remove)


def misspecification_margin(sem: Sem, d_prime: KnownVarianceSpec, limit: int = ENUMERATION_LIMIT) -> tuple[bool, float]:
    """Check ``sum_{l in Ch(j)} B_lj^2 > alpha_max / alpha_min - 1`` for every
    non-terminal ``j`` of every terminal-deletion subgraph, where the alphas are
    the ratios of supplied to true noise variances.

    Returns ``(holds, margin)`` with ``margin`` the smallest slack.
    """
    d = np.asarray(d_prime.d_diag, dtype=float)
    if d.shape != (sem.p,):
        raise InvalidParams(f"d_prime needs length {sem.p}")
    ratio = d / sem.sigma2
    bound = ratio.max() / ratio.min() - 1.0
    B2 = sem.B ** 2
    ch = _children_masks(sem.dag)
    margin = math.inf
    for S in reachable_subsets(sem.dag, limit):
        idx = _members(S)
        mask = np.zeros(sem.p)
        mask[idx] = 1.0
        nonterm = [v for v in idx if ch[v] & S]
        if nonterm:
            margin = min(margin, float((mask @ B2[:, nonterm]).min() - bound))
    return margin > 0, margin
