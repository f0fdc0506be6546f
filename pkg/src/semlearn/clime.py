"""CLIME precision estimation and the post-removal column re-estimation.

Columns of the estimate solve ``min ||w||_1  s.t.  ||S w - e_i||_inf <= lambda``
for the empirical covariance ``S``; the non-symmetric result is made symmetric
by keeping, for every pair, the entry of smaller magnitude.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from .errors import Infeasible, IterationLimit, NotTerminalEstimate
from .lp import DEFAULT_TOL, LpProblem, solve_l1_linf
from .precision import DEFAULT_CUTOFF, PrecisionEstimate

UPDATE_MODES = ("appendix_constraints", "restricted_shortcut")


def clime_column(sigma_n: np.ndarray, i: int, lam: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    S = np.asarray(sigma_n, dtype=float)
    e = np.zeros(S.shape[0])
    e[i] = 1.0
    try:
        return solve_l1_linf(LpProblem(S, e, lam), tol)
    except (Infeasible, IterationLimit) as exc:
        exc.column = i
        raise


def symmetrize_min(omega_bar: np.ndarray, cutoff: float = DEFAULT_CUTOFF, lambda_used=None) -> PrecisionEstimate:
    """For ``i < j`` both ``(i, j)`` and ``(j, i)`` take ``omega_bar[i, j]`` when it
    is strictly smaller in magnitude than ``omega_bar[j, i]``, otherwise
    ``omega_bar[j, i]``; equal magnitudes therefore pick the lower-triangle entry."""
    W = np.asarray(omega_bar, dtype=float)
    upper = np.where(np.abs(W) < np.abs(W.T), W, W.T)
    sym = np.triu(upper, 1)
    sym = sym + sym.T + np.diag(np.diag(W))
    return PrecisionEstimate.from_matrix(sym, cutoff=cutoff, lambda_used=lambda_used)


def clime_full(
    sigma_n: np.ndarray,
    lam: float,
    tol: float = DEFAULT_TOL,
    cutoff: float = DEFAULT_CUTOFF,
    workers: int = 1,
) -> PrecisionEstimate:
    """Solve all ``p`` column programs and symmetrize."""
    S = np.asarray(sigma_n, dtype=float)
    p = S.shape[0]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            cols = list(pool.map(lambda i: clime_column(S, i, lam, tol), range(p)))
    else:
        cols = [clime_column(S, i, lam, tol) for i in range(p)]
    return symmetrize_min(np.column_stack(cols), cutoff, lambda_used=lam)


def update_after_removal(
    omega_hat: PrecisionEstimate,
    i: int,
    sigma_n: np.ndarray,
    lam: float,
    tol: float = DEFAULT_TOL,
    cutoff: Optional[float] = None,
    mode: str = "appendix_constraints",
    widen_on_infeasible: bool = True,
) -> PrecisionEstimate:
    """Re-estimate the columns touched by removing terminal vertex ``i``.

    Only the estimated parents ``P = supp(row i) - {i}`` are refit. Column
    ``j`` in ``P`` is searched over ``S_j = (supp(row j) - {i}) | P``. With
    ``mode="appendix_constraints"`` the residual constraints cover every
    remaining vertex; ``"restricted_shortcut"`` keeps only the rows in ``S_j``.

    When the estimated support is too small the restricted program can be
    infeasible. With ``widen_on_infeasible`` that column is then refit over all
    remaining vertices and listed in ``widened`` of the result; otherwise the
    :class:`Infeasible` error propagates with ``column`` set.
    """
    if mode not in UPDATE_MODES:
        raise ValueError(f"unknown update mode {mode!r}")
    if i not in omega_hat.active:
        raise NotTerminalEstimate(f"vertex {i + 1} is not active")
    cutoff = omega_hat.cutoff if cutoff is None else cutoff
    S = np.asarray(sigma_n, dtype=float)
    V = np.array(omega_hat.values)
    remaining = sorted(omega_hat.active - {i})
    nz = np.abs(V) > cutoff
    parents = [k for k in remaining if nz[i, k]]
    widened: list[int] = []
    for j in parents:
        Sj = sorted(({k for k in remaining if nz[j, k]} | set(parents) | {j}))
        try:
            w = _restricted_column(S, j, Sj, remaining, mode, lam, tol)
        except Infeasible as exc:
            if not widen_on_infeasible or len(Sj) == len(remaining):
                exc.column = j
                raise
            Sj = remaining
            w = _restricted_column(S, j, Sj, remaining, mode, lam, tol)
            widened.append(j)
        V[j, Sj] = w
        V[Sj, j] = w
    V[i, :] = 0.0
    V[:, i] = 0.0
    return PrecisionEstimate(V, frozenset(remaining), lam, cutoff, tuple(widened))


def _restricted_column(S, j, Sj, remaining, mode, lam, tol):
    rows = remaining if mode == "appendix_constraints" else Sj
    target = np.array([1.0 if k == j else 0.0 for k in rows])
    try:
        return solve_l1_linf(LpProblem(S[np.ix_(rows, Sj)], target, lam), tol)
    except (Infeasible, IterationLimit) as exc:
        exc.column = j
        raise


def threshold(matrix: np.ndarray, eps: float) -> tuple[np.ndarray, frozenset]:
    """Zero every entry with ``|value| <= eps``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    M = np.array(matrix, dtype=float)
    M[np.abs(M) <= eps] = 0.0
    return M, frozenset((int(a), int(b)) for a, b in zip(*np.nonzero(M)))
