"""Command-line front end: ``fit``, ``simulate``, ``check`` and ``benchmark``.

Exit codes: 0 success, 1 I/O or parse error (including bad flags), 2
identifiability not satisfied, 3 numeric failure in a learner, 4 enumeration
limit exceeded. On failure a JSON error object goes to stderr and no output
file is written.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import io as fio
from .clime import threshold
from .errors import NumericError, SemLearnError, TooLarge
from .finite import LearnerConfig, assumption2_check, heuristic_lambda, learn_finite
from .population import LearnResult, learn_population, misspecification_margin
from .sem import (
    ENUMERATION_LIMIT,
    Dag,
    IdentifiabilityReport,
    KnownVarianceSpec,
    check_identifiability,
    precision_of,
)
from .synth import NOISE_KINDS, DataMatrix, NoiseModel, empirical_covariance, random_dag, random_sem, sample_data

EXIT_OK = 0
EXIT_IO = 1
EXIT_NOT_SATISFIED = 2
EXIT_NUMERIC = 3
EXIT_TOO_LARGE = 4

WORKERS_ENV = "SEMLEARN_WORKERS"

REPORT_COLUMNS = ("p", "d", "n", "noise", "seed", "exact_recovery", "hamming_distance",
                  "max_abs_error", "wall_time_ms")


class UsageError(SemLearnError):
    """Invalid flag combination, detected before any work starts."""


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, TooLarge):
        return EXIT_TOO_LARGE
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return EXIT_IO


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _words(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


# -- fit -----------------------------------------------------------------------------


def _known_variances(args, p: int) -> Optional[KnownVarianceSpec]:
    if args.known_variances is None:
        return None
    if len(args.known_variances) != p:
        raise UsageError(f"--known-variances needs {p} values, got {len(args.known_variances)}")
    return KnownVarianceSpec(np.array(args.known_variances), args.alpha)


def cmd_fit(args) -> int:
    path = args.input
    is_csv = args.input_format == "csv" or (args.input_format == "auto" and path.lower().endswith(".csv"))
    n = args.n
    if is_csv:
        X = fio.read_csv_matrix(path)
        if args.center:
            X = X - X.mean(axis=0)
        n = X.shape[0]
        S = empirical_covariance(DataMatrix(X))
        given = "covariance"
    else:
        if args.center:
            raise UsageError("--center only applies to CSV input")
        S = fio.load_matrix(path)
        given = args.matrix
    p = S.shape[0]
    kv = _known_variances(args, p)

    if args.population:
        omega = S if given == "precision" else np.linalg.inv(S)
        res = learn_population(omega, kv, args.tie_break)
        if args.threshold:
            B, support = threshold(res.B_hat, args.threshold)
            res = LearnResult(B, Dag(p, support), res.elimination_order, res.diagnostics)
    else:
        sigma = np.linalg.inv(S) if given == "precision" else S
        if args.lambda_ is not None:
            lam = args.lambda_
        elif n is not None:
            lam = heuristic_lambda(p, n, args.c0)
        else:
            raise UsageError("matrix input needs --lambda or --n to choose the regularization")
        eps = args.threshold if args.threshold is not None else 2.0 * lam
        cfg = LearnerConfig(lam, eps, kv, args.tie_break, args.lp_tol, update_mode=args.update_mode)
        res = learn_finite(sigma, cfg)

    text = fio.result_to_dot(res) if args.format == "dot" else fio.dumps(fio.result_to_json(res))
    _emit(text, args.output)
    return EXIT_OK


def _emit(text: str, output: Optional[str]) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        fio.atomic_write(output, text)


# -- simulate ------------------------------------------------------------------------


def _variance_mode(args):
    if args.sigma2_range is not None:
        lo, hi = args.sigma2_range
        return ("range", lo, hi)
    return ("homoscedastic", args.sigma2)


def simulate(p, d, n, edge_prob, weight_range, variance_mode, noise: NoiseModel, seed: int):
    """Seeded SEM plus samples; the three streams use seeds derived from ``seed``."""
    s_dag, s_sem, s_data = np.random.SeedSequence(seed).generate_state(3)
    dag = random_dag(p, d, edge_prob, int(s_dag))
    sem = random_sem(dag, weight_range[0], weight_range[1], variance_mode, int(s_sem))
    return sem, sample_data(sem, n, noise, int(s_data))


def cmd_simulate(args) -> int:
    if args.sem_out is None and args.data_out is None:
        raise UsageError("simulate needs --sem-out and/or --data-out")
    noise = NoiseModel(args.noise, m=args.m)
    sem, X = simulate(args.p, args.d, args.n, args.edge_prob, (args.weight_low, args.weight_high),
                      _variance_mode(args), noise, args.seed)
    texts = []
    if args.sem_out is not None:
        texts.append((args.sem_out, fio.dumps(fio.sem_to_json(sem))))
    if args.data_out is not None:
        texts.append((args.data_out, fio.format_csv_matrix(X.values)))
    for out, text in texts:
        _emit(text, out)
    return EXIT_OK


# -- check ---------------------------------------------------------------------------


def report_to_json(rep: IdentifiabilityReport, kind: str, **extra) -> dict:
    out = {"check": kind, "satisfied": bool(rep.satisfied), "worst_margin": rep.worst_margin,
           "subsets_checked": rep.subsets_checked}
    if rep.witness is not None:
        subset, term, nonterm = rep.witness
        out["witness"] = {"subset": [v + 1 for v in subset], "terminal": term + 1, "non_terminal": nonterm + 1}
    else:
        out["witness"] = None
    if rep.parts:
        out["parts"] = {k: {"satisfied": bool(s), "margin": m} for k, (s, m) in rep.parts.items()}
    out.update(extra)
    return out


def cmd_check(args) -> int:
    sem = fio.load_sem(args.input)
    if sem.p > args.limit:
        raise TooLarge(sem.p, args.limit)
    if args.d_prime is not None:
        if len(args.d_prime) != sem.p:
            raise UsageError(f"--d-prime needs {sem.p} values")
        holds, margin = misspecification_margin(sem, KnownVarianceSpec(np.array(args.d_prime)), args.limit)
        out = {"check": "misspecification", "satisfied": bool(holds), "worst_margin": margin}
    elif args.lambda_ is not None:
        kv = _known_variances(args, sem.p)
        rep = assumption2_check(sem, args.lambda_, kv, args.limit)
        out = report_to_json(rep, "finite_sample", **{"lambda": args.lambda_})
    else:
        rep = check_identifiability(sem, 0.0, args.limit)
        out = report_to_json(rep, "population")
    text = fio.dumps(out)
    sys.stdout.write(text)
    if args.output not in (None, "-"):
        fio.atomic_write(args.output, text)
    return EXIT_OK if out["satisfied"] else EXIT_NOT_SATISFIED


# -- benchmark -----------------------------------------------------------------------


@dataclass(frozen=True)
class Trial:
    cell: int
    p: int
    d: int
    n: int
    noise: str
    rule: str
    seed: int
    edge_prob: float
    weight_low: float
    weight_high: float
    sigma2: float
    c0: float
    threshold_factor: float
    m: int


def run_trial(t: Trial) -> dict:
    """One benchmark row; learner failures become an ``error`` string."""
    row = {"p": t.p, "d": t.d, "n": t.n, "noise": t.noise, "seed": t.seed, "exact_recovery": "",
           "hamming_distance": "", "max_abs_error": "", "wall_time_ms": "", "error": ""}
    try:
        s_dag, s_sem, s_data = np.random.SeedSequence(t.seed).generate_state(3)
        dag = random_dag(t.p, t.d, t.edge_prob, int(s_dag))
        sem = random_sem(dag, t.weight_low, t.weight_high, t.sigma2, int(s_sem))
        start = time.perf_counter()
        if t.rule == "population":
            res = learn_population(precision_of(sem))
        else:
            X = sample_data(sem, t.n, NoiseModel(t.noise, m=t.m), int(s_data))
            lam = heuristic_lambda(t.p, t.n, t.c0)
            res = learn_finite(X, LearnerConfig(lam, t.threshold_factor * lam))
        elapsed = (time.perf_counter() - start) * 1000.0
        est, true = set(res.G_hat.edges), set(dag.edges)
        row.update(exact_recovery=int(est == true), hamming_distance=len(est ^ true),
                   max_abs_error=float(np.abs(res.B_hat - sem.B).max()), wall_time_ms=round(elapsed, 3))
    except SemLearnError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _worker_count(flag: Optional[int]) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
    return 1


def build_trials(args) -> list[Trial]:
    trials = []
    cell = 0
    for p in args.p:
        for d in args.d:
            for n in args.n:
                for noise in args.noise:
                    for rule in args.lambda_rule:
                        for k in range(args.trials):
                            seed = int(np.random.SeedSequence([args.seed, cell, k]).generate_state(1)[0])
                            trials.append(Trial(cell, p, d, n, noise, rule, seed, args.edge_prob,
                                                args.weight_low, args.weight_high, args.sigma2,
                                                args.c0, args.threshold_factor, args.m))
                        cell += 1
    return trials


def summarize(trials: Sequence[Trial], rows: Sequence[dict]) -> dict:
    cells: dict[int, list] = {}
    for t, r in zip(trials, rows):
        cells.setdefault(t.cell, []).append((t, r))
    out = []
    for idx in sorted(cells):
        t0 = cells[idx][0][0]
        ok = [r for _, r in cells[idx] if not r["error"]]

        def med(key):
            return statistics.median(r[key] for r in ok) if ok else None

        out.append({
            "cell": idx, "p": t0.p, "d": t0.d, "n": t0.n, "noise": t0.noise, "lambda_rule": t0.rule,
            "trials": len(cells[idx]), "failures": len(cells[idx]) - len(ok),
            "median_exact_recovery": med("exact_recovery"),
            "recovery_rate": (sum(r["exact_recovery"] for r in ok) / len(ok)) if ok else None,
            "median_hamming_distance": med("hamming_distance"),
            "median_max_abs_error": med("max_abs_error"),
            "median_wall_time_ms": med("wall_time_ms"),
        })
    return {"cells": out}


def cmd_benchmark(args) -> int:
    for rule in args.lambda_rule:
        if rule not in ("heuristic", "population"):
            raise UsageError(f"unknown lambda rule {rule!r}")
    for kind in args.noise:
        if kind not in NOISE_KINDS:
            raise UsageError(f"unknown noise kind {kind!r}")
    trials = build_trials(args)
    workers = _worker_count(args.workers)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(run_trial, trials))  # map keeps input order
    else:
        rows = [run_trial(t) for t in trials]

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(REPORT_COLUMNS) + ["error"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    summary = fio.dumps(summarize(trials, rows))
    _emit(buf.getvalue(), args.output)
    if args.summary is not None:
        _emit(summary, args.summary)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semlearn", description="Learn linear SEMs from data or precision matrices.")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="learn (G, B) from samples or a matrix")
    f.add_argument("input", help="headerless CSV of samples, or JSON matrix")
    f.add_argument("-o", "--output", help="output file (default stdout)")
    f.add_argument("--format", choices=("json", "dot"), default="json")
    f.add_argument("--input-format", choices=("auto", "csv", "json"), default="auto")
    f.add_argument("--matrix", choices=("covariance", "precision"), default=None,
                   help="what a JSON input holds (default: precision with --population, else covariance)")
    f.add_argument("--population", action="store_true", help="treat the input as exact and skip CLIME")
    f.add_argument("--lambda", dest="lambda_", type=float, help="regularization (default c0*sqrt(log p / n))")
    f.add_argument("--c0", type=float, default=0.5)
    f.add_argument("--n", type=int, help="sample size behind a JSON covariance, for the default lambda")
    f.add_argument("--threshold", type=float, help="zero |B_hat| <= threshold (default 2*lambda)")
    f.add_argument("--known-variances", type=_floats, help="comma-separated noise variances")
    f.add_argument("--alpha", type=float, default=None, help="common factor on the known variances")
    f.add_argument("--tie-break", choices=("lowest", "highest"), default="lowest")
    f.add_argument("--update-mode", choices=("appendix_constraints", "restricted_shortcut"),
                   default="appendix_constraints")
    f.add_argument("--lp-tol", type=float, default=1e-8)
    f.add_argument("--center", action="store_true",
                   help="subtract column means from CSV input (the model assumes zero-mean data)")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="draw a random SEM and samples from it")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--edge-prob", type=float, default=0.3)
    s.add_argument("--weight-low", type=float, default=0.3)
    s.add_argument("--weight-high", type=float, default=1.0)
    s.add_argument("--sigma2", type=float, default=1.0)
    s.add_argument("--sigma2-range", type=float, nargs=2, metavar=("LO", "HI"))
    s.add_argument("--noise", choices=NOISE_KINDS, default="gaussian")
    s.add_argument("--m", type=int, default=1, help="moment order for bounded_moment_t")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sem-out", help="ground-truth Sem JSON")
    s.add_argument("--data-out", help="samples as headerless CSV")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check", help="check identifiability conditions for a Sem JSON")
    c.add_argument("input")
    c.add_argument("-o", "--output")
    c.add_argument("--lambda", dest="lambda_", type=float, help="check the finite-sample conditions at lambda")
    c.add_argument("--known-variances", type=_floats)
    c.add_argument("--alpha", type=float, default=None)
    c.add_argument("--d-prime", type=_floats, help="supplied variances to test for misspecification tolerance")
    c.add_argument("--limit", type=int, default=ENUMERATION_LIMIT, help="largest p to enumerate")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("benchmark", help="recovery and error over a parameter grid")
    b.add_argument("--p", type=_ints, default=[15])
    b.add_argument("--d", type=_ints, default=[2])
    b.add_argument("--n", type=_ints, default=[2000, 8000, 32000])
    b.add_argument("--noise", type=_words, default=["gaussian"])
    b.add_argument("--lambda-rule", type=_words, default=["heuristic"],
                   help="heuristic (c0*sqrt(log p/n) on samples) and/or population (exact precision)")
    b.add_argument("--c0", type=float, default=0.5)
    b.add_argument("--threshold-factor", type=float, default=2.0, help="epsilon = factor * lambda")
    b.add_argument("--trials", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--edge-prob", type=float, default=0.3)
    b.add_argument("--weight-low", type=float, default=0.3)
    b.add_argument("--weight-high", type=float, default=1.0)
    b.add_argument("--sigma2", type=float, default=1.0)
    b.add_argument("--m", type=int, default=1)
    b.add_argument("--workers", type=int, help=f"parallel trials (default ${WORKERS_ENV} or 1)")
    b.add_argument("-o", "--output", help="CSV report (default stdout)")
    b.add_argument("--summary", help="JSON summary with per-cell medians")
    b.set_defaults(func=cmd_benchmark)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_IO
    if getattr(args, "matrix", "unset") is None:
        args.matrix = "precision" if args.population else "covariance"
    try:
        return args.func(args)
    except (SemLearnError, OSError, np.linalg.LinAlgError) as exc:
        code = exit_code_for(exc)
        if isinstance(exc, np.linalg.LinAlgError):
            code = EXIT_NUMERIC
        sys.stderr.write(json.dumps(fio.error_json(exc, code)) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
