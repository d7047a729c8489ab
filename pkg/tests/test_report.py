import numpy as np
import pytest

from adabatch.experiment import AggregateCurve
from adabatch.report import CSV_HEADER, curves_to_csv, read_csv, write_csv, write_svg

GOLDEN = (
    "controller,case,cost,gap_lo,gap_med,gap_hi\n"
    "norm,1,32,0.10000000000000001,0.5,1\n"
    "norm,1,100,0.01,0.050000000000000003,0.29999999999999999\n"
    "innerOrth,1,32,0,1e-300,2.5\n"
    "innerOrth,1,100,1.0000000000000001e-05,0.001,0.01\n"
)


def curves():
    grid = np.array([32, 100])
    return {
        ("norm", "1"): AggregateCurve(grid, np.array([0.5, 0.05]), np.array([0.1, 0.01]), np.array([1.0, 0.3])),
        ("innerOrth", "1"): AggregateCurve(grid, np.array([1e-300, 1e-3]), np.array([0.0, 1e-5]), np.array([2.5, 1e-2])),
    }


class TestCsv:
    def test_golden_bytes(self, tmp_path):
        path = tmp_path / "out.csv"
        write_csv(curves(), path)
        assert path.read_bytes() == GOLDEN.encode()

    def test_one_row_per_grid_point(self):
        grid = np.array([32, 50, 90])
        c = AggregateCurve(grid, np.ones(3), np.zeros(3), np.full(3, 2.0))
        lines = curves_to_csv({("norm", "3"): c}).splitlines()
        assert len(lines) == 4
        assert tuple(lines[0].split(",")) == CSV_HEADER

    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        grid = np.array([32, 64, 1000, 10**6])
        original = {
            (c, k): AggregateCurve(grid, *np.sort(rng.lognormal(0, 20, (3, 4)), axis=0)[[1, 0, 2]])
            for c in ("norm", "innerOrth")
            for k in ("1", "4")
        }
        path = tmp_path / "rt.csv"
        write_csv(original, path)
        back = read_csv(path)
        assert list(back) == list(original)
        for key, c in original.items():
            np.testing.assert_array_equal(back[key].cost_grid, c.cost_grid)
            for field in ("median", "lo95", "hi95"):
                np.testing.assert_array_equal(getattr(back[key], field), getattr(c, field))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n")
        with pytest.raises(ValueError):
            read_csv(path)

    def test_empty(self):
        with pytest.raises(ValueError):
            curves_to_csv({})

    def test_no_temp_files_left(self, tmp_path):
        write_csv(curves(), tmp_path / "x.csv")
        assert [p.name for p in tmp_path.iterdir()] == ["x.csv"]


class TestSvg:
    def test_written_and_reproducible(self, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        write_svg(curves(), a, title="demo")
        write_svg(curves(), b, title="demo")
        data = a.read_bytes()
        assert data.startswith(b"<?xml") and b"<svg" in data
        assert b"norm, case 1" in data
        assert data == b.read_bytes()

    def test_empty(self, tmp_path):
        with pytest.raises(ValueError):
            write_svg({}, tmp_path / "e.svg")
