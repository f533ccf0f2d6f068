"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (see ``acceptance_report``) that is
repeated in the terminal summary, then asserts.  Expensive runs are cached
so criteria that share them do not repeat the work.
"""
import time
from functools import cache

import numpy as np
import pytest

from acceptance_report import report
from eigenshape.acquisition import ei_gradient, expected_improvement
from eigenshape.bench import bench_metamodels, time_to_target
from eigenshape.bo import RunConfig, run_optimization
from eigenshape.eigenbasis import pca_fit, reconstruction_error
from eigenshape.gp import Component, concentrated_loglik, condition, correlation, fit_gp
from eigenshape.reduction import fit_additive, select_active
from eigenshape.shapes import FAMILIES, build_database
from oracles import ExtendedPrecisionPredictor, assert_gradient_close

pytestmark = pytest.mark.slow

SEEDS = range(5)


@cache
def database_and_basis(pid: str, n: int = 5000):
    t0 = time.perf_counter()
    db = build_database(pid, n, seed=0)
    basis = pca_fit(db, policy=None)
    return db, basis, time.perf_counter() - t0


def significant(values) -> int:
    return int(np.count_nonzero(values > 1e-8 * values[0]))


# --- 1-4: spectra ---------------------------------------------------------------------------


def test_criterion_1_intrinsic_dimension():
    expected = {"circle1d": 1, "circle2d": 2, "circle3d": 3, "circle39": 3, "three_circles": 9, "rectangle": 40}
    found, slowest = {}, 0.0
    for pid in expected:
        _, basis, secs = database_and_basis(pid)
        found[pid] = significant(basis.values)
        slowest = max(slowest, secs)
    ok = found == expected and slowest <= 120
    report(1, ok, f"significant eigenvalues {found}; slowest family {slowest:.1f}s")
    assert ok


def test_criterion_2_rectangle_truncation():
    _, basis, _ = database_and_basis("rectangle")
    share = basis.explained()[3]
    ok = share >= 99.5
    report(2, ok, f"top-4 cumulative share {share:.3f}% (need >= 99.5%)")
    assert ok


def test_criterion_3_catenoid_truncation():
    _, basis, _ = database_and_basis("catenoid")
    share = basis.explained()[6]
    ok = share >= 99.9
    report(3, ok, f"7-component cumulative share {share:.4f}% (need >= 99.9%)")
    assert ok


def test_criterion_4_frobenius_identity():
    rng = np.random.default_rng(4)
    worst, details = 0.0, []
    for pid in sorted(FAMILIES):
        db, basis, _ = database_and_basis(pid)
        # beyond the numerical rank both sides are roundoff, so draw below it;
        # a rank-one family leaves only the mean-only reconstruction
        rank = significant(basis.values)
        delta = int(rng.integers(1, rank)) if rank > 1 else 0
        lhs = reconstruction_error(basis, db.phi, delta)
        rhs = db.size * basis.values[delta:].sum()
        rel = abs(lhs - rhs) / rhs
        worst = max(worst, rel)
        details.append(f"{pid}:d={delta}")
    ok = worst <= 1e-8
    report(4, ok, f"worst relative gap {worst:.2e} over {', '.join(details)}")
    assert ok


# --- 5-6: metamodel accuracy ----------------------------------------------------------------


def test_criterion_5_r2_on_disk_problem():
    t0 = time.perf_counter()
    rows = {r.method: r for r in bench_metamodels("f2", ["gp_alpha:3", "gp_x"], n=50, runs=5)}
    secs = time.perf_counter() - t0
    a, x = rows["gp_alpha:3"].mean, rows["gp_x"].mean
    ok = a >= 0.99 and a - x >= 0.04 and secs <= 600
    report(5, ok, f"GP(alpha_1:3) R2 {a:.5f}, GP(X) R2 {x:.5f}, gap {a - x:.4f}, {secs:.0f}s")
    assert ok


def test_criterion_6_r2_on_shape_matching():
    rows = {r.method: r for r in bench_metamodels("f4", ["gp_alpha:2", "gp_active", "addgp"], n=50, runs=5)}
    two, act, add = rows["gp_alpha:2"].mean, rows["gp_active"].mean, rows["addgp"].mean
    ok = two <= 0.3 and add >= act
    report(6, ok, f"GP(alpha_1:2) R2 {two:.4f} (need <= 0.3); AddGP {add:.4f} vs GP(active) {act:.4f}")
    assert ok


# --- 7-8, 11: optimization ------------------------------------------------------------------


@cache
def griewank_runs():
    t0 = time.perf_counter()
    add = [run_optimization(RunConfig("griewank40", space="x", model="addgp", strategy="embed",
                                      n_init=20, iterations=80, seed=s)) for s in SEEDS]
    plain = [run_optimization(RunConfig("griewank40", space="x", model="gp", strategy="full",
                                        n_init=50, iterations=50, seed=s)) for s in SEEDS]
    return add, plain, time.perf_counter() - t0


@cache
def catenoid_runs():
    def runs(rep):
        return [run_optimization(RunConfig("f5", n_components=7, replication=rep, n_init=20, iterations=60,
                                           seed=s)) for s in SEEDS]
    return runs(True), runs(False)


def test_criterion_7_griewank_optimization():
    add, plain, secs = griewank_runs()
    a = np.array([r.best for r in add])
    p = np.array([r.best for r in plain])
    ok = a.mean() <= 1.0 and a.mean() < p.mean() and secs <= 1800
    report(7, ok, f"AddGP-EI-embed mean best {a.mean():.3f} ({a.std(ddof=1):.3f}); "
                  f"GP(X)-EI mean best {p.mean():.3f}; {secs:.0f}s")
    assert ok


def test_criterion_8_catenoid_optimization():
    rep, norep = catenoid_runs()
    t30 = time_to_target([r.trace for r in rep], 30.0)
    hits_rep = time_to_target([r.trace for r in rep], 27.0).successes
    hits_norep = time_to_target([r.trace for r in norep], 27.0).successes
    ok = t30.successes > 0 and t30.value <= 35 and hits_rep > hits_norep
    report(8, ok, f"evaluations to 30 with replication {t30.label} over {t30.runs} runs (need <= 35); "
                  f"runs reaching 27: {hits_rep} with vs {hits_norep} without replication")
    assert ok


def test_criterion_11_replication_bookkeeping():
    rep, norep = catenoid_runs()
    problems = []
    for r in rep + norep:
        cfg = r.config
        if len(r.y) != cfg.n_init + cfg.iterations:
            problems.append(f"seed {cfg.seed}: {len(r.y)} evaluations")
        train = r.training
        for i in np.flatnonzero(train.virtual):
            it = train.iteration[i]
            if it < 1 or train.y[i] != r.y[cfg.n_init + it - 1]:
                problems.append(f"seed {cfg.seed}: virtual row {i} does not match iteration {it}")
    n_virtual = sum(r.n_virtual for r in rep)
    ok = not problems and sum(r.n_virtual for r in norep) == 0
    report(11, ok, f"{len(rep + norep)} runs checked, {n_virtual} replicated rows; "
                   + ("; ".join(problems) if problems else "counts and shared values consistent"))
    assert ok


# --- 9-10: gradients and oracles ------------------------------------------------------------


def _gradient_models():
    rng = np.random.default_rng(9)
    X = rng.uniform(-1, 1, (25, 5))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2 + 0.1 * X[:, 3]
    return X, y, [fit_gp(X, y), fit_additive(X, y, [0, 1]).model]


def test_criterion_9_gradient_suite():
    # the reference differences an extended-precision copy of each model: close to
    # the data the float64 variance is too cancellation-ridden to difference
    X, y, models = _gradient_models()
    f_min = y.min()
    refs = [ExtendedPrecisionPredictor(m) for m in models]
    Q = np.random.default_rng(10).uniform(-1, 1, (100, 5))
    failures, checked, worst = 0, 0, 0.0
    for k, q in enumerate(Q):
        m = models[k % 2]
        _, _, gm, gs = m.predict_gradient(q)
        v, ge = ei_gradient(m, q, f_min)
        ref_m, ref_s, ref_ei = refs[k % 2].gradients(q, f_min)
        pairs = [(gm, ref_m), (gs, ref_s)]
        if v > 0:
            pairs.append((ge, ref_ei))
        elif np.any(ge):
            failures += 1
        for g, ref in pairs:
            checked += 1
            worst = max(worst, np.linalg.norm(g - ref) / max(np.linalg.norm(ref), 1e-300))
            try:
                assert_gradient_close(g, ref, floor=1e-300)
            except AssertionError:
                failures += 1
    ok = failures == 0
    report(9, ok, f"{checked} gradient comparisons on 100 queries (plain and additive), "
                  f"{failures} failures, worst relative error {worst:.1e}")
    assert ok


def test_criterion_10_oracle_equivalence():
    rng = np.random.default_rng(10)
    X = rng.random((5, 2))
    y = rng.standard_normal(5)
    theta = np.array([0.6, 1.4])
    # likelihood against explicit inverse and determinant
    D = np.sqrt(np.sum(((X[:, None] - X[None]) / theta) ** 2, axis=2))
    C = correlation("matern52", D)
    Ci = np.linalg.inv(C)
    one = np.ones(5)
    beta = one @ Ci @ y / (one @ Ci @ one)
    s2 = (y - beta) @ Ci @ (y - beta) / 5
    dense_ll = -2.5 * np.log(2 * np.pi * s2) - 0.5 * np.linalg.slogdet(C)[1] - 2.5
    ll_gap = abs(concentrated_loglik(X, y, theta, nugget=0.0) - dense_ll)
    # prediction against explicit solves
    m = condition([Component([0, 1], theta, 1.7)], X, y, nugget=0.0, beta=0.2)
    q = rng.random((3, 2))
    k = 1.7 * correlation("matern52", np.sqrt(np.sum(((q[:, None] - X[None]) / theta) ** 2, axis=2)))
    K = 1.7 * C
    mean = 0.2 + k @ np.linalg.solve(K, y - 0.2)
    var = 1.7 - np.einsum("ij,ji->i", k, np.linalg.solve(K, k.T))
    pred = m.predict(q)
    pred_gap = max(np.abs(pred.mean - mean).max(), np.abs(pred.variance - var).max())
    # EI against Monte Carlo on the same model
    f_min = y.min()
    mu, sd = pred.mean[0], pred.sd[0]
    draws = np.concatenate([np.maximum(f_min - (mu + sd * rng.standard_normal(2_500_000)), 0) for _ in range(4)])
    se = draws.std() / np.sqrt(len(draws))
    ei_gap = abs(expected_improvement(m, q[:1], f_min)[0] - draws.mean())
    ok = ll_gap <= 1e-10 and pred_gap <= 1e-10 and ei_gap <= 3 * se
    report(10, ok, f"likelihood gap {ll_gap:.1e}, prediction gap {pred_gap:.1e}, "
                   f"EI gap {ei_gap / se:.2f} standard errors")
    assert ok


# --- 12: selection --------------------------------------------------------------------------


def test_criterion_12_selection_sanity():
    hits = 0
    for s in SEEDS:
        rng = np.random.default_rng(s)
        X = rng.uniform(-1, 1, (40, 6))
        y = np.sin(3 * X[:, 0]) + 0.001 * rng.standard_normal(40)
        hits += 0 in select_active(X, y, seed=s).active
    ok = hits >= 4
    report(12, ok, f"dimension 1 active in {hits}/5 seeds")
    assert ok
