import numpy as np
import pytest

from adabatch.errors import ConfigError
from adabatch.experiment import (
    AggregateCurve,
    ExperimentSpec,
    cost_grid,
    disjoint_fraction,
    gaps_on_grid,
    overlap_fraction,
    percentile_bands,
    run_experiment,
    table_cases,
    worker_count,
)

SMALL = dict(replications=6, budget=20_000, cases=table_cases(("2", "3")), max_iterations=2_000)


def curve(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return AggregateCurve(np.arange(1, lo.size + 1), 0.5 * (lo + hi), lo, hi)


class TestCostGrid:
    def test_endpoints_and_order(self):
        grid = cost_grid(32, 10**6)
        assert grid[0] == 32 and grid[-1] == 10**6
        assert np.all(np.diff(grid) > 0)
        assert grid.dtype == np.int64
        assert len(grid) == 200

    def test_log_spacing(self):
        grid = cost_grid(32, 10**6)
        ratios = grid[1:] / grid[:-1]
        np.testing.assert_allclose(ratios[20:], (10**6 / 32) ** (1 / 199), rtol=1e-2)

    def test_duplicates_removed(self):
        grid = cost_grid(2, 10, points=50)
        np.testing.assert_array_equal(grid, np.arange(2, 11))


class TestGapsOnGrid:
    def test_hand_example(self):
        costs = np.array([32, 100, 300])
        gaps = np.array([5.0, 3.0, 1.0])
        grid = np.array([10, 32, 99, 100, 299, 1000])
        np.testing.assert_array_equal(gaps_on_grid(costs, gaps, 9.0, grid), [9.0, 5.0, 5.0, 3.0, 3.0, 1.0])

    def test_against_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            costs = np.cumsum(rng.integers(1, 50, 20))
            gaps = rng.random(20)
            grid = np.unique(rng.integers(1, costs[-1] + 100, 40))
            got = gaps_on_grid(costs, gaps, -1.0, grid)
            for c, v in zip(grid, got):
                seen = [g for k, g in zip(costs, gaps) if k <= c]
                assert v == (seen[-1] if seen else -1.0)


class TestPercentileBands:
    def test_order_statistics(self):
        rng = np.random.default_rng(1)
        samples = rng.random((1000, 7))
        lo, med, hi = percentile_bands(samples)
        ordered = np.sort(samples, axis=0)
        # inverted CDF: smallest x with F(x) >= p, i.e. index ceil(p n) - 1
        np.testing.assert_array_equal(lo, ordered[24])
        np.testing.assert_array_equal(med, ordered[499])
        np.testing.assert_array_equal(hi, ordered[974])

    def test_constant_columns(self):
        lo, med, hi = percentile_bands(np.full((10, 3), 2.5))
        assert np.all(lo == 2.5) and np.all(med == 2.5) and np.all(hi == 2.5)


class TestBandComparison:
    def test_overlap(self):
        a = curve([0, 0, 0, 0], [1, 1, 1, 1])
        b = curve([0.5, 2, 2, 0.9], [3, 3, 3, 3])
        assert overlap_fraction(a, b) == 0.5
        assert overlap_fraction(a, b, tail=True) == 0.5
        assert disjoint_fraction(a, b) == 0.5

    def test_touching_counts_as_overlap(self):
        assert overlap_fraction(curve([0, 0], [1, 1]), curve([1, 1], [2, 2])) == 1.0

    def test_symmetric(self):
        a, b = curve([0, 1, 5], [2, 2, 6]), curve([3, 0, 0], [4, 1.5, 1])
        assert overlap_fraction(a, b) == overlap_fraction(b, a)


class TestSpec:
    def test_defaults(self):
        spec = ExperimentSpec()
        assert spec.replications == 1000 and spec.budget == 10**6 and spec.b0 == 32
        np.testing.assert_array_equal(spec.start, [0.225, -0.2, 0.1])
        np.testing.assert_array_equal(ExperimentSpec(objective="quad2").start, [20.0, 50.0])

    @pytest.mark.parametrize(
        "kwargs", [dict(objective="rosenbrock"), dict(replications=1), dict(controllers=("sgd",)), dict(cases=())]
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentSpec(**kwargs)

    def test_worker_count(self, monkeypatch):
        monkeypatch.setenv("ADABATCH_THREADS", "3")
        assert worker_count() == 3
        assert worker_count(1) == 1
        monkeypatch.setenv("ADABATCH_THREADS", "many")
        with pytest.raises(ConfigError):
            worker_count()
        with pytest.raises(ConfigError):
            worker_count(-1)


class TestRunExperiment:
    def test_cells_and_shapes(self):
        spec = ExperimentSpec(**SMALL)
        curves = run_experiment(spec, threads=1)
        assert list(curves) == [("norm", "2"), ("innerOrth", "2"), ("norm", "3"), ("innerOrth", "3")]
        for c in curves.values():
            assert c.cost_grid[0] == 32 and c.cost_grid[-1] == 20_000
            assert np.all(c.lo95 <= c.median) and np.all(c.median <= c.hi95)
            assert c.failures == 0

    def test_identical_seeds_collapse_band(self, monkeypatch):
        import adabatch.experiment as ex

        monkeypatch.setattr(ExperimentSpec, "sgd_config", lambda self, c, t, seed: ex.SgdConfig(
            c, t, max_gradient_evals=self.budget, max_iterations=self.max_iterations, seed=7))
        curves = run_experiment(ExperimentSpec(**SMALL), threads=1)
        for c in curves.values():
            np.testing.assert_array_equal(c.lo95, c.median)
            np.testing.assert_array_equal(c.hi95, c.median)

    def test_worker_count_invariance(self):
        spec = ExperimentSpec(objective="quad2", **SMALL)
        a = run_experiment(spec, threads=1)
        b = run_experiment(spec, threads=2)
        assert a.keys() == b.keys()
        for key in a:
            for field in ("median", "lo95", "hi95"):
                assert np.array_equal(getattr(a[key], field), getattr(b[key], field))

    def test_gaps_shrink(self):
        spec = ExperimentSpec(**SMALL)
        obj = spec.make_objective()
        gap0 = obj.exact_value(spec.start) - obj.optimal_value()
        curves = run_experiment(spec, threads=1)
        for c in curves.values():
            # the first grid point is b0, so one noisy step has already been taken
            assert c.median[-1] < 0.2 * gap0
            assert c.median[-1] < c.median[0]
