"""Symmetric precision-matrix estimate with an explicit active-vertex set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

DEFAULT_CUTOFF = 1e-9


@dataclass(frozen=True)
class PrecisionEstimate:
    """A symmetric ``p x p`` matrix whose rows/columns outside ``active`` are zero.

    Removed vertices are tracked by ``active`` rather than by an infinite
    diagonal sentinel.
    """

    values: np.ndarray
    active: frozenset
    lambda_used: Optional[float] = None
    cutoff: float = DEFAULT_CUTOFF
    widened: tuple = ()  # columns whose restricted refit had to use every vertex

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("precision estimate must be square")
        v = (v + v.T) / 2
        inactive = [k for k in range(v.shape[0]) if k not in self.active]
        v[inactive, :] = 0.0
        v[:, inactive] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "active", frozenset(int(k) for k in self.active))

    @classmethod
    def from_matrix(cls, matrix, cutoff: float = DEFAULT_CUTOFF, lambda_used=None,
                    active: Optional[Iterable[int]] = None) -> "PrecisionEstimate":
        m = np.asarray(matrix, dtype=float)
        act = frozenset(range(m.shape[0])) if active is None else frozenset(active)
        return cls(m, act, lambda_used, cutoff)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def support(self) -> frozenset:
        nz = np.abs(self.values) > self.cutoff
        return frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(nz)))

    def row_support(self, i: int) -> list[int]:
        """Off-diagonal support of row ``i`` at the cutoff."""
        nz = np.nonzero(np.abs(self.values[i]) > self.cutoff)[0]
        return [int(k) for k in nz if k != i]

    def active_block(self) -> np.ndarray:
        idx = sorted(self.active)
        return self.values[np.ix_(idx, idx)]

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "values": self.values.tolist(),
            "active": [k + 1 for k in sorted(self.active)],
            "lambda": self.lambda_used,
        }
