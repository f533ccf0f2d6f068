"""Benchmarks: metamodel accuracy and optimizer efficiency over repeated runs."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .bo import RunConfig, RunResult, run_optimization
from .eigenbasis import pca_fit
from .gp import fit_gp
from .objectives import get_problem
from .reduction import fit_additive, select_active
from .shapes import build_database


def r2_score(y_true, y_pred) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot``."""
    y_true, y_pred = np.asarray(y_true, float), np.asarray(y_pred, float)
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    if ss_tot == 0:
        raise ValueError("test responses are constant")
    return float(1.0 - np.sum((y_true - y_pred) ** 2) / ss_tot)


def _predict(method: str, Xtr, Atr, ytr, Xte, Ate, seed: int) -> np.ndarray:
    """Fit one metamodel and predict on the test set.

    ``method`` is ``gp_x``, ``gp_alpha:<k>``, ``gp_active`` or ``addgp``.
    """
    if method == "gp_x":
        return fit_gp(Xtr, ytr, seed=seed).predict(Xte).mean
    if method.startswith("gp_alpha"):
        k = int(method.split(":")[1]) if ":" in method else Atr.shape[1]
        return fit_gp(Atr[:, :k], ytr, seed=seed).predict(Ate[:, :k]).mean
    if method in ("gp_active", "addgp"):
        active = select_active(Atr, ytr, seed=seed).active
        if method == "gp_active":
            return fit_gp(Atr[:, active], ytr, seed=seed).predict(Ate[:, active]).mean
        return fit_additive(Atr, ytr, active, seed=seed).model.predict(Ate).mean
    raise ValueError(f"unknown metamodel {method!r}")


@dataclass
class R2Row:
    method: str
    n: int
    scores: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def sd(self) -> float:
        return float(np.std(self.scores, ddof=1)) if len(self.scores) > 1 else 0.0


def bench_metamodels(problem: str, methods: list[str], n: int, runs: int = 5, seed: int = 0,
                     test_size: int = 1000, database_size: int = 5000) -> list[R2Row]:
    """Test-set R^2 of each metamodel over ``runs`` Latin-hypercube training sets."""
    prob = get_problem(problem)
    basis = None
    if prob.family is not None:
        basis = pca_fit(build_database(prob.family, database_size, seed=seed))
    scores = {m: [] for m in methods}
    for run in range(runs):
        rng = np.random.default_rng(seed + 1000 * (run + 1))
        span = prob.upper - prob.lower
        Xtr = prob.lower + span * qmc.LatinHypercube(d=prob.d, seed=rng).random(n)
        Xte = prob.lower + span * rng.random((test_size, prob.d))
        ytr, yte = prob(Xtr), prob(Xte)
        if basis is not None:
            Atr = basis.project(prob.family.phi(Xtr, basis.mapping))
            Ate = basis.project(prob.family.phi(Xte, basis.mapping))
        else:
            Atr, Ate = Xtr, Xte
        for m in methods:
            scores[m].append(r2_score(yte, _predict(m, Xtr, Atr, ytr, Xte, Ate, seed + run)))
    return [R2Row(m, n, np.array(scores[m])) for m in methods]


def write_r2_csv(rows: list[R2Row], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "n", "mean_r2", "sd_r2"])
        for r in rows:
            w.writerow([r.method, r.n, repr(r.mean), repr(r.sd)])


@dataclass
class TargetStat:
    """Evaluations needed to reach a target, summarized over runs.

    ``value`` is the mean over runs when all succeed, the mean over
    successful runs divided by the success fraction when some do, and NaN
    when none do.
    """

    target: float
    value: float
    sd: float
    successes: int
    runs: int

    @property
    def label(self) -> str:
        if self.successes == 0:
            return "x"
        if self.successes == self.runs:
            return f"{self.value:.1f} ({self.sd:.1f})"
        return f"{self.value:.1f} [{self.successes}]"


def hitting_times(traces, target: float) -> np.ndarray:
    """1-based index of the first evaluation at or below ``target`` (NaN if never)."""
    out = []
    for tr in traces:
        hit = np.flatnonzero(np.asarray(tr) <= target)
        out.append(hit[0] + 1.0 if len(hit) else np.nan)
    return np.array(out)


def time_to_target(traces, target: float) -> TargetStat:
    t = hitting_times(traces, target)
    ok = np.sort(t[~np.isnan(t)])  # sorted so the summary does not depend on run order
    runs, k = len(t), len(ok)
    if k == 0:
        return TargetStat(target, np.nan, np.nan, 0, runs)
    sd = float(np.std(ok, ddof=1)) if k > 1 else 0.0
    mean = float(ok.mean())
    return TargetStat(target, mean if k == runs else mean / (k / runs), sd, k, runs)


@dataclass
class OptRow:
    method: str
    results: list[RunResult]

    @property
    def bests(self) -> np.ndarray:
        return np.array([r.best for r in self.results])

    def stat(self, target: float) -> TargetStat:
        return time_to_target([r.trace for r in self.results], target)


def bench_optimizers(configs: list[RunConfig], runs: int = 5, seed: int = 0) -> list[OptRow]:
    """Repeat each configuration over ``runs`` seeds."""
    out = []
    for cfg in configs:
        results = [run_optimization(replace(cfg, seed=seed + r)) for r in range(runs)]
        out.append(OptRow(cfg.name, results))
    return out


def write_opt_csv(rows: list[OptRow], targets: list[float], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "best_mean", "best_sd", "target", "stat", "successes"])
        for r in rows:
            b = r.bests
            sd = float(np.std(b, ddof=1)) if len(b) > 1 else 0.0
            for t in targets or [np.nan]:
                st = r.stat(t) if np.isfinite(t) else None
                w.writerow([r.method, repr(float(b.mean())), repr(sd), t,
                            "" if st is None else st.label, "" if st is None else st.successes])
