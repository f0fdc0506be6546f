"""File formats: Sem JSON, dense matrix JSON, headerless CSV, LearnResult JSON/DOT.

Vertex indices are 1-based in every file and 0-based in memory.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ParseError, SemLearnError
from .population import LearnResult
from .sem import Sem

PathLike = Union[str, os.PathLike]


def atomic_write(path: PathLike, text: str) -> None:
    """Write ``text`` to a sibling temp file and rename it over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- Sem ---------------------------------------------------------------------------


def sem_to_json(sem: Sem) -> dict:
    edges = sorted(sem.dag.edges)
    return {
        "p": sem.p,
        "edges": [[i + 1, j + 1] for i, j in edges],
        "weights": [[i + 1, j + 1, float(sem.B[i, j])] for i, j in edges],
        "sigma2": [float(v) for v in sem.sigma2],
    }


def sem_from_json(obj: dict) -> Sem:
    """Build a :class:`Sem` from its JSON object.

    ``edges`` is optional when ``weights`` is given; if both are present they
    must name the same pairs.
    """
    try:
        p = int(obj["p"])
        weights = [(int(i) - 1, int(j) - 1, float(w)) for i, j, w in obj["weights"]]
        sigma2 = [float(v) for v in obj["sigma2"]]
        edges = obj.get("edges")
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed Sem JSON: {exc}") from exc
    if edges is not None:
        named = {(int(i) - 1, int(j) - 1) for i, j in edges}
        if named != {(i, j) for i, j, _ in weights}:
            raise ParseError("Sem JSON: 'edges' and 'weights' disagree")
    return Sem.from_weights(p, weights, sigma2)


def load_sem(path: PathLike) -> Sem:
    return sem_from_json(load_json(path))


# -- generic JSON / matrices ---------------------------------------------------------


def load_json(path: PathLike):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def matrix_from_json(obj) -> np.ndarray:
    """Accept a bare row-major array or an object with a ``matrix``/``values`` key."""
    if isinstance(obj, dict):
        for key in ("matrix", "values"):
            if key in obj:
                obj = obj[key]
                break
        else:
            raise ParseError("matrix JSON needs a 'matrix' or 'values' entry")
    try:
        M = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrix JSON is not numeric: {exc}") from exc
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ParseError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ParseError("matrix contains non-finite values")
    return M


def load_matrix(path: PathLike) -> np.ndarray:
    return matrix_from_json(load_json(path))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# -- CSV -----------------------------------------------------------------------------


def read_csv_matrix(path: PathLike) -> np.ndarray:
    """Headerless numeric CSV, one sample per row."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if rows and len(vals) != len(rows[0]):
                raise ParseError(f"{path}:{lineno}: expected {len(rows[0])} columns, found {len(vals)}")
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def format_csv_matrix(X: np.ndarray) -> str:
    # repr-style floats round-trip exactly, which keeps golden files stable
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(X):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


# -- LearnResult ---------------------------------------------------------------------


def result_to_json(res: LearnResult) -> dict:
    return {
        "edges": [[i + 1, j + 1, w] for i, j, w in res.edges()],
        "elimination_order": [v + 1 for v in res.elimination_order],
        "diagnostics": [rec.to_json() for rec in res.diagnostics],
    }


def result_to_dot(res: LearnResult, name: str = "G") -> str:
    """Graphviz digraph with an arrow ``j -> i`` for every nonzero ``B_hat[i, j]``."""
    lines = [f"digraph {name} {{"]
    for v in range(res.B_hat.shape[0]):
        lines.append(f"  {v + 1};")
    for i, j, w in res.edges():
        lines.append(f'  {j + 1} -> {i + 1} [label="{w:.4f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def error_json(exc: BaseException, code: int) -> dict:
    out = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, SemLearnError):
        for attr in ("vertex", "column", "iteration", "p", "limit", "cycle"):
            val = getattr(exc, attr, None)
            if val is not None:
                # vertex-like fields are reported 1-based
                if attr in ("vertex", "column"):
                    val = int(val) + 1
                elif attr == "cycle":
                    val = [int(v) + 1 for v in val]
                out[attr] = val
    return out
