"""Random degree-bounded DAGs and SEMs, noise samplers, empirical covariance.

All generators take an explicit integer seed and are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.stats import wishart

from .errors import DegenerateRange, InvalidParams
from .sem import Dag, Sem, covariance_of, validate_dag

NOISE_KINDS = ("gaussian", "scaled_rademacher_mix", "bounded_moment_t")


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean noise, rescaled so that ``Var(N_i) = sigma_i^2``.

    ``bounded_moment_t`` is a Student-t with ``4m + 1`` degrees of freedom.
    ``nu`` is the sub-Gaussian parameter reported to the bound calculators; it
    does not change the samples.
    """

    kind: str = "gaussian"
    nu: float = 1.0
    m: int = 1
    K_m: Optional[float] = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidParams(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")
        if self.m < 1:
            raise InvalidParams("moment order m must be a positive integer")
        if not self.nu > 0:
            raise InvalidParams("nu must be positive")
        if self.kind == "bounded_moment_t" and self.K_m is None:
            object.__setattr__(self, "K_m", t_standardized_moment(self.df, 4 * self.m))

    @property
    def df(self) -> int:
        return 4 * self.m + 1

    def standardized(self, rng: np.random.Generator, size) -> np.ndarray:
        """Unit-variance draws."""
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "scaled_rademacher_mix":
            rad = rng.integers(0, 2, size=size) * 2.0 - 1.0
            uni = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=size)
            pick = rng.integers(0, 2, size=size).astype(bool)
            return np.where(pick, rad, uni)
        df = self.df
        return rng.standard_t(df, size=size) / np.sqrt(df / (df - 2.0))


def t_standardized_moment(df: float, k: int) -> float:
    """``E[(T / sd(T))^k]`` for Student-t ``T`` with ``df > k`` (even ``k``)."""
    if k % 2:
        return 0.0
    if df <= k:
        return float("inf")
    # E|T|^k = df^{k/2} prod_{r=1}^{k/2} (2r - 1) / (df - 2r)
    m = 1.0
    for r in range(1, k // 2 + 1):
        m *= (2 * r - 1) / (df - 2 * r)
    m *= df ** (k / 2)
    return m / (df / (df - 2.0)) ** (k / 2)


@dataclass(frozen=True)
class DataMatrix:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise InvalidParams("data matrix must be 2-D with at least one row")
        if not np.all(np.isfinite(v)):
            raise InvalidParams("data matrix has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def random_dag(p: int, d: int, edge_prob: float, seed: int) -> Dag:
    """Random member of the class of DAGs with every vertex degree at most ``d``.

    A uniformly random permutation fixes the topological order; every backward
    pair is then proposed with probability ``edge_prob`` and rejected when it
    would push either endpoint past ``d`` neighbors.
    """
    if d < 1:
        raise InvalidParams("degree bound d must be at least 1")
    if not 0 < edge_prob <= 1:
        raise InvalidParams("edge_prob must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(p)
    deg = np.zeros(p, dtype=int)
    edges = []
    for b in range(1, p):
        draws = rng.random(b)
        child = int(order[b])
        for a in range(b):
            if draws[a] >= edge_prob:
                continue
            parent = int(order[a])
            if deg[child] >= d or deg[parent] >= d:
                continue
            edges.append((child, parent))
            deg[child] += 1
            deg[parent] += 1
    return validate_dag(p, edges, degree_bound=d)


VarianceMode = Union[tuple, float]


def _variances(p: int, mode, rng: np.random.Generator) -> np.ndarray:
    """``mode`` is ``("homoscedastic", s2)``, ``("range", lo, hi)`` or
    ``("explicit", vector)``; a bare float means homoscedastic."""
    if isinstance(mode, (int, float)):
        mode = ("homoscedastic", float(mode))
    kind = mode[0]
    if kind == "homoscedastic":
        s2 = float(mode[1])
        if not s2 > 0:
            raise DegenerateRange("variance must be positive")
        return np.full(p, s2)
    if kind == "range":
        lo, hi = float(mode[1]), float(mode[2])
        if not 0 < lo <= hi:
            raise DegenerateRange(f"variance range [{lo}, {hi}] is invalid")
        return rng.uniform(lo, hi, size=p)
    if kind == "explicit":
        v = np.asarray(mode[1], dtype=float).reshape(-1)
        if v.shape != (p,) or np.any(v <= 0):
            raise DegenerateRange(f"explicit variances need {p} positive entries")
        return v.copy()
    raise DegenerateRange(f"unknown variance mode {kind!r}")


def random_sem(dag: Dag, weight_low: float, weight_high: float, variance_mode=1.0, seed: int = 0) -> Sem:
    """Edge weights uniform on ``±[weight_low, weight_high]`` with a fair sign."""
    if not 0 < weight_low <= weight_high:
        raise DegenerateRange(f"weight range [{weight_low}, {weight_high}] must satisfy 0 < low <= high")
    rng = np.random.default_rng(seed)
    edges = sorted(dag.edges)
    mags = rng.uniform(weight_low, weight_high, size=len(edges))
    signs = rng.choice([-1.0, 1.0], size=len(edges))
    B = np.zeros((dag.p, dag.p))
    for (i, j), w in zip(edges, mags * signs):
        B[i, j] = w
    sigma2 = _variances(dag.p, variance_mode, rng)
    return Sem(dag, B, sigma2)


def sample_data(sem: Sem, n: int, noise: NoiseModel | None = None, seed: int = 0) -> DataMatrix:
    """Draw ``n`` i.i.d. rows by ancestral sampling."""
    if n < 1:
        raise InvalidParams("sample count n must be at least 1")
    noise = noise or NoiseModel()
    rng = np.random.default_rng(seed)
    N = noise.standardized(rng, (n, sem.p)) * np.sqrt(sem.sigma2)
    X = np.empty_like(N)
    for i in sem.dag.topological_order():
        pa = sem.dag.parents(i)
        X[:, i] = N[:, i] + (X[:, pa] @ sem.B[i, pa] if pa else 0.0)
    return DataMatrix(X)


def empirical_covariance(x: DataMatrix | np.ndarray) -> np.ndarray:
    """``X^T X / n`` without centering."""
    X = x.values if isinstance(x, DataMatrix) else np.asarray(x, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidParams("need at least one sample")
    S = X.T @ X / X.shape[0]
    return (S + S.T) / 2


def gaussian_sample_covariance(sem: Sem, n: int, seed: int = 0) -> np.ndarray:
    """Draw ``X^T X / n`` for ``n`` Gaussian rows without forming ``X``.

    For zero-mean Gaussian rows the scatter matrix is Wishart with ``n``
    degrees of freedom and scale ``Sigma``, so very large ``n`` costs the
    same as small ``n``.
    """
    if n < sem.p:
        raise InvalidParams("the Wishart shortcut needs n >= p")
    S = wishart.rvs(df=n, scale=covariance_of(sem), random_state=np.random.default_rng(seed))
    S = np.atleast_2d(S) / n
    return (S + S.T) / 2
