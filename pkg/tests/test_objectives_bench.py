import numpy as np
import pytest

from eigenshape.bench import (OptRow, bench_metamodels, bench_optimizers, hitting_times, r2_score,
                              time_to_target, write_opt_csv, write_r2_csv)
from eigenshape.bo import RunConfig
from eigenshape.gp import fit_gp
from eigenshape.objectives import (GRIEWANK_OFFSETS, HEART_TARGET, PROBLEMS, get_problem, griewank_modified,
                                   revolution_area, shape_match_objective)
from eigenshape.shapes import CatenoidFamily, get_family


def trapezoid_area(V, panels=1_000_000):
    """Oracle: surface of revolution of the polyline ``V`` by composite trapezoid on ``2 pi r sqrt(1 + r'^2)``."""
    x, r = V[:, 0], V[:, 1]
    s = np.linspace(x[0], x[-1], panels + 1)
    seg = np.clip(np.searchsorted(x, s, side="right") - 1, 0, len(x) - 2)
    slope = np.diff(r) / np.diff(x)
    rs = r[seg] + slope[seg] * (s - x[seg])
    # evaluate the slope at panel midpoints so kinks never straddle a panel
    mid = 0.5 * (s[1:] + s[:-1])
    mseg = np.clip(np.searchsorted(x, mid, side="right") - 1, 0, len(x) - 2)
    ds = np.diff(s)
    integrand_ends = 0.5 * (np.abs(rs[1:]) + np.abs(rs[:-1]))
    return float(2 * np.pi * np.sum(integrand_ends * np.sqrt(1 + slope[mseg] ** 2) * ds))


# --- objectives -----------------------------------------------------------------------------


def test_griewank_zero_at_reference_point():
    x = np.zeros(40)
    x[2:10] = GRIEWANK_OFFSETS
    assert griewank_modified(x)[0] == pytest.approx(0.0, abs=1e-15)
    x[20] = 500.0  # ignored coordinates
    assert griewank_modified(x)[0] == pytest.approx(0.0, abs=1e-15)


def test_disk_objective_reference_value():
    x = np.zeros(39)
    x[0], x[13], x[26] = 3.0, 2.0, 1.0
    assert get_problem("f2")(x)[0] == pytest.approx(1 - np.pi, abs=1e-12)


def test_cylinder_area():
    fam = CatenoidFamily(y_a=1.0, y_b=1.0)
    area = revolution_area(np.zeros((1, 29)), fam)[0]
    assert area == pytest.approx(2 * np.pi, rel=1e-12)
    assert abs(area - trapezoid_area(fam.vertices(np.zeros((1, 29)))[0])) <= 1e-6 * area


def test_perturbed_curve_area_matches_quadrature():
    fam = get_family("catenoid")
    X = fam.sample(3, np.random.default_rng(0))
    exact = revolution_area(X, fam)
    for V, a in zip(fam.vertices(X), exact):
        assert abs(a - trapezoid_area(V)) <= 1e-6 * a
        assert abs(trapezoid_area(V, 500_000) - trapezoid_area(V)) <= 1e-6 * a


def test_shape_match_is_translation_invariant():
    t = HEART_TARGET.copy()
    assert shape_match_objective(t[None])[0] == pytest.approx(0.0, abs=1e-24)
    moved = t.copy()
    moved[:2] = [-0.7, 0.4]
    assert shape_match_objective(moved[None])[0] == pytest.approx(0.0, abs=1e-24)
    other = moved.copy()
    other[10] += 0.05
    assert shape_match_objective(other[None])[0] > 0


def test_problems_and_domains():
    for name in PROBLEMS:
        prob = get_problem(name)
        X = prob.lower + (prob.upper - prob.lower) * np.random.default_rng(0).random((4, prob.d))
        assert np.all(np.isfinite(prob(X)))
    with pytest.raises(ValueError):
        get_problem("griewank40")(np.full(40, 700.0))
    with pytest.raises(ValueError):
        get_problem("f5")(np.zeros(3))
    with pytest.raises(ValueError):
        get_problem("f9")
    assert get_problem("catenoid").name == "f5"


# --- R^2 ------------------------------------------------------------------------------------


def test_r2_examples():
    y = np.array([1.0, 2.0, 4.0])
    assert r2_score(y, [1.0, 2.0, 3.0]) == pytest.approx(11 / 14, abs=1e-12)
    assert r2_score(y, y) == 1.0
    assert r2_score(y, np.full(3, y.mean())) == pytest.approx(0.0, abs=1e-15)
    assert r2_score(y, [4.0, 4.0, 4.0]) < 0
    with pytest.raises(ValueError):
        r2_score([1.0, 1.0], [1.0, 2.0])


def test_interpolating_model_scores_one_on_training_data():
    X = np.random.default_rng(1).random((15, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1]
    assert r2_score(y, fit_gp(X, y).predict(X).mean) == pytest.approx(1.0, abs=1e-6)


def test_bench_metamodels_small(tmp_path):
    rows = bench_metamodels("f2", ["gp_alpha:3", "gp_x"], n=12, runs=2, test_size=100, database_size=300)
    assert [r.method for r in rows] == ["gp_alpha:3", "gp_x"]
    assert all(len(r.scores) == 2 and r.n == 12 for r in rows)
    write_r2_csv(rows, tmp_path / "r2.csv")
    lines = (tmp_path / "r2.csv").read_text().splitlines()
    assert lines[0] == "method,n,mean_r2,sd_r2" and len(lines) == 3
    with pytest.raises(ValueError):
        bench_metamodels("f2", ["nonsense"], n=12, runs=1, test_size=10, database_size=300)


# --- time to target -------------------------------------------------------------------------


def _trace(hit, length=60, below=29.0, above=40.0):
    tr = np.full(length, above)
    if hit is not None:
        tr[hit - 1:] = below
    return tr


def test_time_to_target_when_all_succeed():
    st = time_to_target([_trace(24), _trace(25), _trace(23)], 30.0)
    assert st.value == 24.0 and st.sd == 1.0 and st.successes == 3
    assert st.label == "24.0 (1.0)"


def test_empirical_runtime_when_some_succeed():
    traces = [_trace(57, length=80)] + [_trace(None, length=80)] * 9
    st = time_to_target(traces, 30.0)
    assert st.value == pytest.approx(570.0) and st.successes == 1
    assert st.label == "570.0 [1]"


def test_no_success():
    st = time_to_target([_trace(None)] * 3, 30.0)
    assert st.successes == 0 and np.isnan(st.value) and st.label == "x"
    assert np.isnan(hitting_times([_trace(None)], 30.0)[0])


def test_statistics_ignore_run_order():
    traces = [_trace(10), _trace(31), _trace(None), _trace(12)]
    a, b = time_to_target(traces, 30.0), time_to_target(traces[::-1], 30.0)
    assert (a.value, a.sd, a.successes) == (b.value, b.sd, b.successes)


def test_bench_optimizers_is_deterministic(tmp_path):
    cfg = RunConfig("griewank40", space="x", n_init=4, iterations=2, fit_starts=1, population=10,
                    generations=3, n_polish=1)
    rows = [bench_optimizers([cfg], runs=2, seed=7) for _ in range(2)]
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for r, p in zip(rows, paths):
        write_opt_csv(r, [1.0], p)
    assert paths[0].read_text() == paths[1].read_text()
    head = paths[0].read_text().splitlines()[0]
    assert head == "method,best_mean,best_sd,target,stat,successes"
    assert isinstance(rows[0][0], OptRow) and len(rows[0][0].results) == 2
