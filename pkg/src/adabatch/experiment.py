"""Replicated SGD experiments aggregated into gap-versus-cost bands.

Every (controller, case) cell runs `replications` independent SGD runs with
seeds ``base_seed + i``. Each run's optimality gap is carried forward onto a
shared log-spaced cost grid, and the cell reports pointwise 2.5/50/97.5
percentiles across runs. Runs may execute in worker processes; results are
joined by replication index, so output never depends on the worker count.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
import os

import numpy as np

from .batch import ORACLE, ToleranceConfig
from .errors import AdaBatchError, ConfigError
from .objectives import make_objective
from .sgd import CONTROLLERS, INNER_ORTH, NORM, SgdConfig, run_sgd

log = logging.getLogger(__name__)

THREADS_ENV = "ADABATCH_THREADS"
GRID_POINTS = 200
PERCENTILES = (2.5, 50.0, 97.5)
DEFAULT_XI0 = {"quad3": (0.225, -0.2, 0.1), "quad2": (20.0, 50.0)}


def table_cases(labels=("1", "2", "3", "4"), strict=False):
    return tuple((str(c), ToleranceConfig.preset(c, strict=strict)) for c in labels)


@dataclass(frozen=True)
class ExperimentSpec:
    objective: str = "quad3"
    kappa: float = 100.0
    cases: tuple = field(default_factory=table_cases)
    controllers: tuple = (NORM, INNER_ORTH)
    replications: int = 1000
    xi0: tuple = None
    base_seed: int = 0
    budget: int = 10**6
    mode: str = ORACLE
    b0: int = 32
    step_size: float = None
    max_iterations: int = 10**5
    grid_points: int = GRID_POINTS

    def __post_init__(self):
        if self.objective not in DEFAULT_XI0:
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.replications < 2:
            raise ConfigError("replications must be >= 2")
        if not self.cases:
            raise ConfigError("no cases given")
        for c in self.controllers:
            if c not in CONTROLLERS:
                raise ConfigError(f"unknown controller {c!r}")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be >= 2")

    @property
    def start(self):
        if self.xi0 is None:
            return np.array(DEFAULT_XI0[self.objective])
        return np.asarray(self.xi0, dtype=np.float64)

    def make_objective(self):
        return make_objective(self.objective, kappa=self.kappa)

    def sgd_config(self, controller, tolerances, seed):
        return SgdConfig(
            controller=controller,
            tolerances=tolerances,
            mode=self.mode,
            step_size=self.step_size,
            max_iterations=self.max_iterations,
            max_gradient_evals=self.budget,
            b0=self.b0,
            seed=seed,
        )


@dataclass(frozen=True)
class AggregateCurve:
    cost_grid: np.ndarray
    median: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray
    failures: int = 0


def cost_grid(b0, budget, points=GRID_POINTS):
    """Integer, strictly increasing, log-spaced costs from `b0` to `budget`."""
    raw = np.geomspace(b0, budget, points)
    return np.unique(np.rint(raw).astype(np.int64))


def gaps_on_grid(costs, gaps, initial_gap, grid):
    """Last-observation-carried-forward gap at each grid cost.

    The value at grid cost c uses only iterations with cumulative cost <= c;
    before the first iteration the initial gap applies.
    """
    idx = np.searchsorted(costs, grid, side="right") - 1
    values = np.concatenate([[initial_gap], np.asarray(gaps, dtype=np.float64)])
    return values[idx + 1]


def percentile_bands(samples):
    """Pointwise (lo, median, hi) order statistics of a ``(runs, grid)`` array."""
    lo, med, hi = np.percentile(samples, PERCENTILES, axis=0, method="inverted_cdf")
    return lo, med, hi


def _one_replication(args):
    objective, cfg, xi0, grid = args
    try:
        record = run_sgd(objective, cfg, xi0)
    except AdaBatchError as exc:
        return f"{type(exc).__name__}: {exc}"
    return gaps_on_grid(record.costs(), record.gaps(), record.initial_gap, grid)


def worker_count(threads=None):
    """Workers to use; `threads` or ``$ADABATCH_THREADS``, 0 meaning all cores."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if threads < 0:
        raise ConfigError("thread count must be >= 0")
    return threads or os.cpu_count() or 1


class ExperimentError(AdaBatchError):
    pass


def run_experiment(spec, threads=None):
    """Run every cell of `spec`; returns ``{(controller, case): AggregateCurve}``."""
    objective = spec.make_objective()
    grid = cost_grid(spec.b0, spec.budget, spec.grid_points)
    xi0 = spec.start
    cells = [(c, label, tol) for label, tol in spec.cases for c in spec.controllers]
    tasks = [
        (objective, spec.sgd_config(c, tol, spec.base_seed + i), xi0, grid)
        for c, _, tol in cells
        for i in range(spec.replications)
    ]
    workers = min(worker_count(threads), len(tasks))
    if workers <= 1:
        results = [_one_replication(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_replication, tasks, chunksize=8))

    curves = {}
    for n, (controller, label, _) in enumerate(cells):
        chunk = results[n * spec.replications : (n + 1) * spec.replications]
        ok = [r for r in chunk if not isinstance(r, str)]
        failures = len(chunk) - len(ok)
        if not ok:
            raise ExperimentError(f"all replications failed for {controller}/case {label}: {chunk[0]}")
        if failures:
            log.warning("%s/case %s: %d of %d replications failed", controller, label, failures, len(chunk))
        lo, med, hi = percentile_bands(np.vstack(ok))
        curves[(controller, label)] = AggregateCurve(grid.copy(), med, lo, hi, failures)
    return curves


def bands_intersect(a, b):
    """Boolean mask of grid points where the two 95% bands share a value."""
    return np.maximum(a.lo95, b.lo95) <= np.minimum(a.hi95, b.hi95)


def overlap_fraction(a, b, tail=False):
    mask = bands_intersect(a, b)
    if tail:
        mask = mask[len(mask) // 2 :]
    return float(np.mean(mask))


def disjoint_fraction(a, b, tail=False):
    return 1.0 - overlap_fraction(a, b, tail)
