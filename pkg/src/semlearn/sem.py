"""Ground-truth linear SEMs: graphs, exact second moments and identifiability checks.

Vertices are 0-based internally. An edge ``(i, j)`` means ``i <- j``: ``j`` is a
parent of ``i`` and ``B[i, j]`` is the weight of that edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import (
    CycleDetected,
    InvalidParams,
    InvalidVertex,
    NotTerminal,
    SingularSystem,
    TooLarge,
)

ZERO_CUTOFF = 1e-12
ENUMERATION_LIMIT = 20


@dataclass(frozen=True)
class Dag:
    """A directed acyclic graph over ``range(p)``.

    Use :func:`validate_dag` to build one; the constructor does not check
    acyclicity.
    """

    p: int
    edges: frozenset
    degree_bound: Optional[int] = None

    def parents(self, i: int) -> list[int]:
        return sorted(j for (c, j) in self.edges if c == i)

    def children(self, j: int) -> list[int]:
        return sorted(c for (c, pa) in self.edges if pa == j)

    def neighbors(self, i: int) -> list[int]:
        return sorted(set(self.parents(i)) | set(self.children(i)))

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def max_degree(self) -> int:
        return max((self.degree(i) for i in range(self.p)), default=0)

    def is_terminal(self, i: int) -> bool:
        return not any(pa == i for (_, pa) in self.edges)

    def terminals(self) -> list[int]:
        has_child = {pa for (_, pa) in self.edges}
        return [i for i in range(self.p) if i not in has_child]

    def topological_order(self) -> list[int]:
        """Parents before children; ties broken by vertex index."""
        return _toposort(self.p, self.edges)

    def is_topological_order(self, order: Sequence[int]) -> bool:
        if sorted(order) != list(range(self.p)):
            return False
        pos = {v: k for k, v in enumerate(order)}
        return all(pos[j] < pos[i] for (i, j) in self.edges)

    def adjacency(self) -> np.ndarray:
        """Boolean matrix ``A`` with ``A[i, j]`` true iff ``i <- j``."""
        a = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.edges:
            a[i, j] = True
        return a


def _toposort(p: int, edges: Iterable[tuple[int, int]]) -> list[int]:
    parents: dict[int, set[int]] = {i: set() for i in range(p)}
    for i, j in edges:
        parents[i].add(j)
    ts = TopologicalSorter(parents)
    try:
        ts.prepare()
    except CycleError as exc:
        # graphlib lists the cycle parent-first, closing on its start vertex
        raise CycleDetected(list(exc.args[1])[:-1]) from None
    order: list[int] = []
    while ts.is_active():
        ready = sorted(ts.get_ready())
        order.extend(ready)
        ts.done(*ready)
    return order


def validate_dag(p: int, edges: Iterable[tuple[int, int]], degree_bound: Optional[int] = None) -> Dag:
    """Build a :class:`Dag` from 0-based ``(child, parent)`` pairs.

    Raises:
        InvalidVertex: an endpoint is outside ``range(p)`` or an edge is a self-loop.
        CycleDetected: the edges contain a directed cycle.
        InvalidParams: ``degree_bound`` is given and some vertex exceeds it.
    """
    if p < 1:
        raise InvalidVertex(f"vertex count must be positive, got {p}")
    es = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if not (0 <= i < p and 0 <= j < p):
            raise InvalidVertex(f"edge ({i + 1}, {j + 1}) has an endpoint outside [1, {p}]")
        if i == j:
            raise InvalidVertex(f"self-loop at vertex {i + 1}")
        es.add((i, j))
    _toposort(p, es)
    dag = Dag(p, frozenset(es), degree_bound)
    if degree_bound is not None and dag.max_degree() > degree_bound:
        raise InvalidParams(f"max degree {dag.max_degree()} exceeds bound {degree_bound}")
    return dag


@dataclass(frozen=True)
class Sem:
    """Linear SEM ``X = B X + N`` with ``Cov(N) = diag(sigma2)``.

    ``index_map[k]`` is the vertex label, in the model this one was
    marginalized from, of local vertex ``k``.
    """

    dag: Dag
    B: np.ndarray
    sigma2: np.ndarray
    index_map: tuple = field(default=())

    def __post_init__(self):
        p = self.dag.p
        B = np.array(self.B, dtype=float)
        s2 = np.array(self.sigma2, dtype=float).reshape(-1)
        if B.shape != (p, p):
            raise InvalidParams(f"B has shape {B.shape}, expected {(p, p)}")
        if s2.shape != (p,):
            raise InvalidParams(f"sigma2 has length {s2.size}, expected {p}")
        if not np.all(np.isfinite(B)) or not np.all(np.isfinite(s2)):
            raise InvalidParams("non-finite entries in B or sigma2")
        if np.any(s2 <= 0):
            raise InvalidParams("noise variances must be strictly positive")
        support = {(int(i), int(j)) for i, j in zip(*np.nonzero(B))}
        if support != set(self.dag.edges):
            raise InvalidParams("support of B must equal the edge set (causal minimality)")
        B.setflags(write=False)
        s2.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "sigma2", s2)
        if not self.index_map:
            object.__setattr__(self, "index_map", tuple(range(p)))
        elif len(self.index_map) != p:
            raise InvalidParams("index_map length must equal p")

    @property
    def p(self) -> int:
        return self.dag.p

    @classmethod
    def from_weights(cls, p: int, weights: Iterable[tuple[int, int, float]], sigma2) -> "Sem":
        """Build from 0-based ``(child, parent, weight)`` triples."""
        B = np.zeros((p, p))
        edges = []
        for i, j, w in weights:
            B[int(i), int(j)] = w
            edges.append((int(i), int(j)))
        dag = validate_dag(p, edges)
        return cls(dag, B, np.asarray(sigma2, dtype=float))


@dataclass(frozen=True)
class KnownVarianceSpec:
    """Noise variances known up to the common factor ``alpha``."""

    d_diag: np.ndarray
    alpha: Optional[float] = None

    def __post_init__(self):
        d = np.array(self.d_diag, dtype=float).reshape(-1)
        if d.size == 0 or np.any(~np.isfinite(d)) or np.any(d <= 0):
            raise InvalidParams("known variances must be finite and positive")
        if self.alpha is not None and not self.alpha > 0:
            raise InvalidParams("alpha must be positive")
        d.setflags(write=False)
        object.__setattr__(self, "d_diag", d)


@dataclass
class IdentifiabilityReport:
    satisfied: bool
    worst_margin: float
    witness: Optional[tuple] = None  # (vertex subset, terminal i, non-terminal j)
    subsets_checked: int = 0
    parts: dict = field(default_factory=dict)


# -- exact second moments ----------------------------------------------------------


def covariance_of(sem: Sem) -> np.ndarray:
    """``(I - B)^-1 D (I - B)^-T``."""
    p = sem.p
    A = np.eye(p) - sem.B
    try:
        Ainv = np.linalg.solve(A, np.eye(p))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("I - B is singular") from exc
    if not np.all(np.isfinite(Ainv)):
        raise SingularSystem("I - B is numerically singular")
    S = (Ainv * sem.sigma2) @ Ainv.T
    return (S + S.T) / 2


def precision_of(sem: Sem) -> np.ndarray:
    """``(I - B)^T D^-1 (I - B)``."""
    A = np.eye(sem.p) - sem.B
    O = A.T @ (A / sem.sigma2[:, None])
    return (O + O.T) / 2


def marginal_sem(sem: Sem, i: int) -> Sem:
    """Drop terminal vertex ``i``; the remaining model keeps ``B`` restricted."""
    if not 0 <= i < sem.p:
        raise InvalidVertex(f"vertex {i + 1} out of range")
    if not sem.dag.is_terminal(i):
        raise NotTerminal(f"vertex {i + 1} has children {[c + 1 for c in sem.dag.children(i)]}")
    keep = [k for k in range(sem.p) if k != i]
    new_of = {old: new for new, old in enumerate(keep)}
    edges = [(new_of[a], new_of[b]) for (a, b) in sem.dag.edges if a != i]
    dag = Dag(sem.p - 1, frozenset(edges), sem.dag.degree_bound)
    return Sem(
        dag,
        sem.B[np.ix_(keep, keep)],
        sem.sigma2[keep],
        index_map=tuple(sem.index_map[k] for k in keep),
    )


def restrict_sem(sem: Sem, vertices: Sequence[int]) -> Sem:
    """Marginal model over an ancestral vertex set."""
    keep = sorted(vertices)
    kept = set(keep)
    for i, j in sem.dag.edges:
        if i in kept and j not in kept:
            raise NotTerminal(f"vertex set is not ancestral: {j + 1} is a parent of {i + 1}")
    new_of = {old: new for new, old in enumerate(keep)}
    edges = [(new_of[a], new_of[b]) for (a, b) in sem.dag.edges if a in kept]
    dag = Dag(len(keep), frozenset(edges), sem.dag.degree_bound)
    return Sem(dag, sem.B[np.ix_(keep, keep)], sem.sigma2[keep],
               index_map=tuple(sem.index_map[k] for k in keep))


# -- enumeration of terminal-deletion subgraphs ----------------------------------------


def _children_masks(dag: Dag) -> list[int]:
    masks = [0] * dag.p
    for child, parent in dag.edges:
        masks[parent] |= 1 << child
    return masks


def reachable_subsets(dag: Dag, limit: int = ENUMERATION_LIMIT) -> Iterator[int]:
    """Yield (as bitmasks) every nonempty vertex set reachable from the full set
    by repeatedly deleting a terminal vertex.

    These are exactly the vertex sets of the first-m-vertices subgraphs over all
    topological orders; each is visited once.
    """
    if dag.p > limit:
        raise TooLarge(dag.p, limit)
    ch = _children_masks(dag)
    full = (1 << dag.p) - 1
    seen = {full}
    stack = [full]
    while stack:
        S = stack.pop()
        yield S
        rest = S
        while rest:
            low = rest & -rest
            v = low.bit_length() - 1
            rest ^= low
            if ch[v] & S == 0:
                T = S ^ low
                if T and T not in seen:
                    seen.add(T)
                    stack.append(T)


def _members(mask: int) -> list[int]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return out


def _check_gap(sem: Sem, gap: float, limit: int):
    """Worst (RHS - LHS) of the terminal/non-terminal diagonal inequality."""
    inv_s2 = 1.0 / sem.sigma2
    W = (sem.B ** 2) * inv_s2[:, None]  # W[l, j] = B_lj^2 / sigma_l^2
    ch = _children_masks(sem.dag)
    worst = math.inf
    witness = None
    count = 0
    for S in reachable_subsets(sem.dag, limit):
        count += 1
        idx = _members(S)
        term = [v for v in idx if ch[v] & S == 0]
        nonterm = [v for v in idx if ch[v] & S]
        if not nonterm:
            continue
        mask = np.zeros(sem.p)
        mask[idx] = 1.0
        diag_nt = inv_s2[nonterm] + mask @ W[:, nonterm]
        jk = int(np.argmin(diag_nt))
        ik = int(np.argmax(inv_s2[term]))
        margin = float(diag_nt[jk] - gap - inv_s2[term][ik])
        if margin < worst:
            worst = margin
            witness = (tuple(idx), term[ik], nonterm[jk])
    return worst, witness, count


def check_identifiability(sem: Sem, gap: float = 0.0, limit: int = ENUMERATION_LIMIT) -> IdentifiabilityReport:
    """Check that terminal vertices have strictly smaller precision diagonals than
    non-terminal ones, by at least ``gap``, in every terminal-deletion subgraph.

    ``gap = 0`` is the population condition; ``gap = 8 M lambda`` is the gapped
    condition used by the finite-sample learner.
    """
    if gap < 0:
        raise InvalidParams("gap must be non-negative")
    worst, witness, count = _check_gap(sem, gap, limit)
    return IdentifiabilityReport(worst > 0, worst, witness, count)


def _l1_operator_norm(A: np.ndarray) -> float:
    return float(np.abs(A).sum(axis=0).max()) if A.size else 0.0


def subset_precisions(sem: Sem, limit: int = ENUMERATION_LIMIT) -> Iterator[tuple[list[int], np.ndarray]]:
    """``(vertices, precision of the marginal over them)`` for each reachable subset."""
    inv_s2 = 1.0 / sem.sigma2
    for S in reachable_subsets(sem.dag, limit):
        idx = _members(S)
        A = np.eye(len(idx)) - sem.B[np.ix_(idx, idx)]
        yield idx, A.T @ (A * inv_s2[idx][:, None])


def constant_M(sem: Sem, limit: int = ENUMERATION_LIMIT) -> float:
    """Largest l1 operator norm of the marginal precision over reachable subsets."""
    return max(_l1_operator_norm(O) for _, O in subset_precisions(sem, limit))


# -- non-identifiable family --------------------------------------------------------------


def lemma1_counterexample(
    k: int,
    beta: float,
    v1: float,
    v2: float,
    variant_bits: Sequence[int] | str,
    connected: bool = False,
    b0: float = 1.0,
    v0: float = 1.0,
) -> Sem:
    """Chains of three vertices sharing one precision matrix across orientations.

    Triplet ``(a, b, c)`` is either ``a <- b <- c`` with variances
    ``(v1, v1, v2)`` (bit 0) or ``a <- b -> c`` with variances ``(v1, v2, v1)``
    (bit 1). Weights are ``beta`` on ``a <- b`` and ``sqrt(1 - v1/v2)`` on the
    other edge, so every choice of bits gives the block
    ``(1/v1) [[1, -beta, 0], [-beta, 1 + beta^2, -b2], [0, -b2, 1]]``.

    With ``connected`` a hub vertex 0 (variance ``v0``) is added as a parent of
    every ``a`` with weight ``b0``; the blocks are unchanged.
    """
    if k < 1:
        raise InvalidParams("k must be positive")
    bits = [int(b) for b in variant_bits]
    if len(bits) != k or any(b not in (0, 1) for b in bits):
        raise InvalidParams(f"variant_bits must be {k} bits")
    if not v1 > 0:
        raise InvalidParams("v1 must be positive")
    if not v2 > v1:
        raise InvalidParams("v2 must exceed v1, otherwise b2 = 0 breaks causal minimality")
    if beta == 0:
        raise InvalidParams("beta = 0 removes an edge and breaks causal minimality")
    if connected and (b0 == 0 or not v0 > 0):
        raise InvalidParams("hub weight must be nonzero and hub variance positive")
    b2 = math.sqrt(1.0 - v1 / v2)
    off = 1 if connected else 0
    p = 3 * k + off
    weights = []
    sigma2 = np.empty(p)
    if connected:
        sigma2[0] = v0
    for t, bit in enumerate(bits):
        a, b, c = off + 3 * t, off + 3 * t + 1, off + 3 * t + 2
        weights.append((a, b, beta))
        if bit == 0:
            weights.append((b, c, b2))
            sigma2[[a, b, c]] = (v1, v1, v2)
        else:
            weights.append((c, b, b2))
            sigma2[[a, b, c]] = (v1, v2, v1)
        if connected:
            weights.append((a, 0, b0))
    return Sem.from_weights(p, weights, sigma2)


def support_sizes(omega: np.ndarray, cutoff: float = ZERO_CUTOFF) -> np.ndarray:
    """Off-diagonal support size of each row."""
    nz = np.abs(omega) > cutoff
    np.fill_diagonal(nz, False)
    return nz.sum(axis=1)
