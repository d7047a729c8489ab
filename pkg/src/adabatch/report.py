"""CSV and SVG output for aggregated gap-versus-cost curves.

CSV columns are ``controller,case,cost,gap_lo,gap_med,gap_hi`` with one row
per grid point and floats written with 17 significant digits, which is
enough for an exact float64 round trip. Both writers replace the target
atomically.
"""

import csv
import io
import os
import tempfile

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import AggregateCurve  # noqa: E402

CSV_HEADER = ("controller", "case", "cost", "gap_lo", "gap_med", "gap_hi")
PLOT_FLOOR = 1e-300


def _fmt(x):
    return format(float(x), ".17g")


def _atomic_write(path, data, mode="w"):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({"newline": ""} if "b" not in mode else {})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def curves_to_csv(curves):
    if not curves:
        raise ValueError("no curves to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for (controller, case), curve in curves.items():
        for row in zip(curve.cost_grid, curve.lo95, curve.median, curve.hi95):
            writer.writerow([controller, case, int(row[0])] + [_fmt(v) for v in row[1:]])
    return buf.getvalue()


def write_csv(curves, path):
    _atomic_write(path, curves_to_csv(curves))


def read_csv(path):
    """Parse a file written by `write_csv` back into ``{(controller, case): curve}``."""
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        for controller, case, cost, lo, med, hi in reader:
            rows.setdefault((controller, case), []).append(
                (int(cost), float(lo), float(med), float(hi))
            )
    curves = {}
    for key, data in rows.items():
        arr = np.array(data, dtype=np.float64)
        curves[key] = AggregateCurve(
            cost_grid=arr[:, 0].astype(np.int64), median=arr[:, 2], lo95=arr[:, 1], hi95=arr[:, 3]
        )
    return curves


def plot_curves(curves, title=None):
    """Log-log gap versus cost with a shaded 95% band per curve."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    cases = list(dict.fromkeys(case for _, case in curves))
    controllers = list(dict.fromkeys(c for c, _ in curves))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    styles = ["-", "--", ":", "-."]
    for (controller, case), curve in curves.items():
        color = colors[cases.index(case) % len(colors)]
        style = styles[controllers.index(controller) % len(styles)]
        lo = np.maximum(curve.lo95, PLOT_FLOOR)
        hi = np.maximum(curve.hi95, PLOT_FLOOR)
        ax.fill_between(curve.cost_grid, lo, hi, color=color, alpha=0.15, linewidth=0)
        ax.plot(
            curve.cost_grid,
            np.maximum(curve.median, PLOT_FLOOR),
            color=color,
            linestyle=style,
            label=f"{controller}, case {case}",
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("gradient evaluations")
    ax.set_ylabel(r"$F(\xi_k) - F(\xi^*)$")
    if title:
        ax.set_title(title)
    ax.legend(fontsize="small")
    ax.grid(True, which="major", alpha=0.3)
    fig.tight_layout()
    return fig


def write_svg(curves, path, title=None):
    if not curves:
        raise ValueError("no curves to plot")
    fig = plot_curves(curves, title)
    buf = io.StringIO()
    # fixed salt and no date keep the SVG bytes reproducible
    with plt.rc_context({"svg.hashsalt": "adabatch", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _atomic_write(path, buf.getvalue())
