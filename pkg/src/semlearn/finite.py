"""Finite-sample learner and the bound calculators that go with it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .clime import UPDATE_MODES, clime_full, threshold, update_after_removal
from .errors import BoundDiverges, Infeasible, InvalidInputs, InvalidParams, IterationLimit
from .lp import DEFAULT_TOL
from .population import LearnResult, TieBreak, _variance_weights, run_elimination
from .precision import DEFAULT_CUTOFF, PrecisionEstimate
from .sem import (
    ENUMERATION_LIMIT,
    Dag,
    IdentifiabilityReport,
    KnownVarianceSpec,
    Sem,
    _children_masks,
    _members,
    check_identifiability,
    constant_M,
    reachable_subsets,
    subset_precisions,
)
from .synth import DataMatrix, empirical_covariance


@dataclass(frozen=True)
class LearnerConfig:
    lambda_n: float
    threshold_eps: float = 0.0
    known_variances: Optional[KnownVarianceSpec] = None
    tie_break: TieBreak = "lowest"
    lp_tol: float = DEFAULT_TOL
    support_cutoff: float = DEFAULT_CUTOFF
    update_mode: str = "appendix_constraints"

    def __post_init__(self):
        if not self.lambda_n >= 0:
            raise InvalidParams("lambda_n must be non-negative")
        if not self.threshold_eps >= 0:
            raise InvalidParams("threshold_eps must be non-negative")
        if not (self.lp_tol > 0 and self.support_cutoff > 0):
            raise InvalidParams("tolerances must be positive")
        if self.update_mode not in UPDATE_MODES:
            raise InvalidParams(f"update_mode must be one of {UPDATE_MODES}")


def heuristic_lambda(p: int, n: int, c0: float = 0.5) -> float:
    """``c0 * sqrt(log p / n)``; a default outside the theoretical guarantees."""
    return c0 * math.sqrt(math.log(max(p, 2)) / n)


def learn_finite(x_or_sigma: Union[DataMatrix, np.ndarray], config: LearnerConfig) -> LearnResult:
    """CLIME estimate, then ``p`` rounds of terminal detection, weight read-off
    and column re-estimation, then thresholding of ``B_hat``.

    A :class:`DataMatrix` is turned into its (uncentered) empirical covariance
    first; a square array is taken to be that covariance already.
    """
    if isinstance(x_or_sigma, DataMatrix):
        S = empirical_covariance(x_or_sigma)
    else:
        S = np.asarray(x_or_sigma, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise InvalidInputs("expected a DataMatrix or a square covariance matrix")
    p = S.shape[0]
    lam, tol, cut = config.lambda_n, config.lp_tol, config.support_cutoff
    w = _variance_weights(p, config.known_variances)

    est = clime_full(S, lam, tol, cut)
    widened: dict[int, tuple] = {}

    def remove(values, active, i, t):
        cur = PrecisionEstimate(values, active, lam, cut)
        try:
            nxt = update_after_removal(cur, i, S, lam, tol, cut, config.update_mode)
        except (Infeasible, IterationLimit) as exc:
            exc.iteration = t
            raise
        widened[t] = nxt.widened
        return np.array(nxt.values)

    res = run_elimination(np.array(est.values), w, config.tie_break, remove)
    for t, rec in enumerate(res.diagnostics):
        rec.widened = widened.get(t, ())
    B, support = threshold(res.B_hat, config.threshold_eps)
    return LearnResult(B, Dag(p, support), res.elimination_order, res.diagnostics)


# -- theory-side calculators ---------------------------------------------------------


@dataclass(frozen=True)
class BoundInputs:
    M: float
    B_max: float
    sigma2_max: float
    sigma2_min: float
    n: int
    p: int
    delta: float
    nu: float = 1.0
    m: int = 1
    K_m: float = 3.0
    C1: float = 1.0
    C2: float = 1.0
    C_m: float = 1.0
    eps: Optional[float] = None

    def __post_init__(self):
        positive = dict(M=self.M, sigma2_max=self.sigma2_max, sigma2_min=self.sigma2_min, n=self.n,
                        p=self.p, nu=self.nu, m=self.m, K_m=self.K_m, C1=self.C1, C2=self.C2, C_m=self.C_m)
        bad = [k for k, v in positive.items() if not v > 0]
        if bad:
            raise InvalidInputs(f"must be positive: {', '.join(bad)}")
        if not self.B_max >= 0:
            raise InvalidInputs("B_max must be non-negative")
        if not 0 < self.delta <= 1:
            raise InvalidInputs("delta must lie in (0, 1]")
        if self.sigma2_min > self.sigma2_max:
            raise InvalidInputs("sigma2_min exceeds sigma2_max")
        if self.eps is not None and not self.eps > 0:
            raise InvalidInputs("eps must be positive")


def c1_constant(nu: float, sigma_diag_max: float) -> float:
    """Sub-Gaussian concentration constant ``sqrt(128) (1 + 4 nu^2) max_i Sigma_ii``."""
    return math.sqrt(128.0) * (1.0 + 4.0 * nu ** 2) * sigma_diag_max


def c2_constant(C_m: float, K_m: float, m: int, sigma_diag_max: float) -> float:
    """Bounded-moment constant ``2 max_i Sigma_ii (C_m (C_m (K_m + 1) + 1))^(1/2m)``."""
    return 2.0 * sigma_diag_max * (C_m * (C_m * (K_m + 1.0) + 1.0)) ** (1.0 / (2 * m))


def _c_factor(inp: BoundInputs, lam: float) -> float:
    denom = 1.0 - 4.0 * inp.M * lam * inp.sigma2_min
    if not denom > 0:
        raise BoundDiverges(f"4 M lambda sigma2_min = {1 - denom:.4g} >= 1; the guarantee does not apply")
    return inp.sigma2_min / denom


def error_bound(inputs: BoundInputs, lam: float) -> float:
    """Sup-norm bound on ``B_hat - B`` when ``lam >= M |Sigma_n - Sigma|_inf``."""
    if lam < 0:
        raise InvalidInputs("lambda must be non-negative")
    c = _c_factor(inputs, lam)
    return c * 4.0 * inputs.M * (1.0 + inputs.B_max) * inputs.sigma2_max * lam


def lambda_guidance(regime: str, inputs: BoundInputs) -> tuple[float, Optional[float]]:
    """Smallest admissible ``lambda`` and, if ``inputs.eps`` is set, the sample
    size needed for error ``eps``.

    ``regime`` is ``"subgaussian"`` (uses ``C1``) or ``"bounded_moment"``
    (uses ``C2`` and ``m``).
    """
    M, p, n, delta = inputs.M, inputs.p, inputs.n, inputs.delta
    if regime == "subgaussian":
        log_term = math.log(2.0 * p / math.sqrt(delta))
        lam = M * inputs.C1 * math.sqrt(2.0 / n * log_term)
        const = inputs.C1
        size_factor = 2.0 * log_term
    elif regime == "bounded_moment":
        m = inputs.m
        lam = M * inputs.C2 * (p ** 2 / (n ** m * delta)) ** (1.0 / (2 * m))
        const = inputs.C2
        size_factor = (p ** 2 / delta) ** (1.0 / m)
    else:
        raise InvalidInputs(f"unknown regime {regime!r}")
    if inputs.eps is None:
        return lam, None
    c = _c_factor(inputs, lam)
    n_min = (c * const * 4.0 * M ** 2 * (1.0 + inputs.B_max) * inputs.sigma2_max) ** 2 / inputs.eps ** 2 * size_factor
    return lam, n_min


def assumption2_check(
    sem: Sem,
    lam: float,
    known_variances: Optional[KnownVarianceSpec] = None,
    limit: int = ENUMERATION_LIMIT,
    cutoff: float = 1e-12,
) -> IdentifiabilityReport:
    """Check the three finite-sample conditions at regularization ``lam``.

    (i) the diagonal gap, (ii) every nonzero marginal precision entry exceeds
    ``4 M lam`` in magnitude, (iii) ``4 M lam sigma_i^2 < 1``. With
    ``known_variances`` part (i) uses the variance-weighted form with gap
    ``8 alpha M lam``. ``worst_margin`` is the smallest slack over the parts.
    """
    if lam < 0:
        raise InvalidInputs("lambda must be non-negative")
    M = constant_M(sem, limit)
    parts = {}
    if known_variances is None:
        rep = check_identifiability(sem, 8.0 * M * lam, limit)
        parts["i"] = (rep.satisfied, rep.worst_margin)
        witness, count = rep.witness, rep.subsets_checked
    else:
        alpha = known_variances.alpha if known_variances.alpha is not None else 1.0
        m_i, witness, count = _known_variance_gap(sem, 8.0 * alpha * M * lam, limit)
        parts["i"] = (m_i > 0, m_i)
    min_entry = math.inf
    for _, O in subset_precisions(sem, limit):
        a = np.abs(O)
        nz = a[a > cutoff]
        if nz.size:
            min_entry = min(min_entry, float(nz.min()))
    m_ii = min_entry - 4.0 * M * lam
    parts["ii"] = (m_ii > 0, m_ii)
    m_iii = 1.0 - 4.0 * M * lam * float(sem.sigma2.max())
    parts["iii"] = (m_iii > 0, m_iii)
    worst = min(v[1] for v in parts.values())
    return IdentifiabilityReport(worst > 0, worst, witness, count, parts)


def _known_variance_gap(sem: Sem, gap: float, limit: int):
    # sum_{l in Ch(j)} (sigma_j^2 / sigma_l^2) B_lj^2 - gap, minimized over non-terminals
    W = (sem.B ** 2) / sem.sigma2[:, None] * sem.sigma2[None, :]
    ch = _children_masks(sem.dag)
    worst, witness, count = math.inf, None, 0
    for S in reachable_subsets(sem.dag, limit):
        count += 1
        idx = _members(S)
        nonterm = [v for v in idx if ch[v] & S]
        if not nonterm:
            continue
        mask = np.zeros(sem.p)
        mask[idx] = 1.0
        vals = mask @ W[:, nonterm] - gap
        k = int(np.argmin(vals))
        if vals[k] < worst:
            term = [v for v in idx if not ch[v] & S]
            worst, witness = float(vals[k]), (tuple(idx), term[0], nonterm[k])
    return worst, witness, count
