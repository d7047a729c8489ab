"""Acceptance checks, runnable from the ``adabatch verify`` subcommand.

Each check returns a `CheckResult`; wall-clock limits are part of the pass
condition. The experiment checks also write CSV/SVG fixtures so repeated
runs can be compared byte for byte.
"""

from dataclasses import dataclass
import hashlib
import math
import os
import time

import numpy as np

from . import batch
from .batch import ToleranceConfig, rate_bound
from .experiment import ExperimentSpec, disjoint_fraction, overlap_fraction, run_experiment, table_cases
from .linalg import contract, error_split, projectors, unit_direction
from .objectives import Quadratic2Objective, Quadratic3Objective
from .report import write_csv, write_svg
from .sgd import INNER_ORTH, NORM, OPTIMAL_SPLIT, SgdConfig, run_sgd

QUAD3_FIXTURE = "quad3_cases.csv"
QUAD2_FIXTURE = "quad2_cases.csv"


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    limit: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} [{self.number}] {self.name}: {self.detail} ({self.seconds:.1f}s / {self.limit:.0f}s)"


def _timed(number, name, limit, fn, *args):
    start = time.perf_counter()
    passed, detail = fn(*args)
    seconds = time.perf_counter() - start
    if seconds > limit:
        passed = False
        detail += f"; exceeded {limit:.0f}s"
    return CheckResult(number, name, bool(passed), detail, seconds, limit)


def _random_psd(rng, d):
    a = rng.standard_normal((d, d))
    return a @ a.T * rng.uniform(0.01, 100.0)


def check_error_identity(seed, pairs=10_000, draws=100_000):
    rng = np.random.default_rng([seed, 1])
    worst = 0.0
    for _ in range(pairs):
        d = int(rng.choice([2, 3, 8]))
        g = rng.standard_normal(d) * rng.uniform(0.1, 10.0)
        ups = g + rng.standard_normal(d) * rng.uniform(0.01, 10.0)
        s = error_split(ups, g)
        lhs = float((ups - g) @ (ups - g))
        rhs = float(s.parallel @ s.parallel + s.orthogonal @ s.orthogonal)
        worst = max(worst, abs(lhs - rhs) / max(lhs, 1e-300))
    pointwise_ok = worst <= 1e-10

    stat_ok = True
    zmax = 0.0
    for d in (2, 3, 8):
        g = rng.standard_normal(d)
        sigma = _random_psd(rng, d)
        ups = rng.multivariate_normal(g, sigma, size=draws)
        e = unit_direction(g)
        along = ups @ e
        perp = ups - along[:, None] * e
        err_sq = np.sum((ups - g) ** 2, axis=1)
        perp_sq = np.sum(perp**2, axis=1)
        lhs = err_sq.mean()
        rhs = along.var(ddof=1) + perp_sq.mean()
        se = err_sq.std(ddof=1) / math.sqrt(draws)
        # both sides against each other and against the exact trace
        zs = [abs(lhs - rhs) / se, abs(lhs - np.trace(sigma)) / se, abs(rhs - np.trace(sigma)) / se]
        zmax = max(zmax, *zs)
        stat_ok &= max(zs) <= 3.0
    return pointwise_ok and stat_ok, f"pointwise max rel err {worst:.1e}, max |z| {zmax:.2f}"


def check_covariance_split(seed, trials=10_000):
    rng = np.random.default_rng([seed, 2])
    dims = rng.integers(2, 9, size=trials)
    cases = [(_random_psd(rng, d), rng.standard_normal(d)) for d in dims]
    worst = 0.0
    for sigma, direction in cases:
        pair = projectors(direction)
        total = contract(sigma, pair.p_nabla) + contract(sigma, pair.p_perp)
        tr = float(np.trace(sigma))
        worst = max(worst, abs(total - tr) / tr)
    return worst <= 1e-12, f"max rel err {worst:.1e}"


def check_equivalence(seed, trials=10_000):
    rng = np.random.default_rng([seed, 3])
    worst = 0.0
    counterexamples = 0
    for _ in range(trials):
        d = int(rng.integers(2, 9))
        sigma = _random_psd(rng, d)
        g = rng.standard_normal(d) * rng.uniform(0.1, 10.0)
        eps = rng.uniform(0.05, 6.0)
        theta, nu = batch.optimal_split(sigma, g, eps)
        b_in, b_perp = batch.inner_orth_batch_sizes_real(sigma, g, theta, nu)
        b_bar = batch.norm_batch_size_real(sigma, g, eps)
        worst = max(worst, abs(b_in - b_bar) / b_bar, abs(b_perp - b_bar) / b_bar)

        phi = rng.uniform(0.0, math.pi / 2)
        shrink = rng.uniform(0.2, 1.0)
        th, nn = eps * shrink * math.cos(phi), eps * shrink * math.sin(phi)
        if th == 0.0 or nn == 0.0:
            continue
        b_i, b_o = batch.inner_orth_batch_sizes_real(sigma, g, th, nn)
        b = max(1, math.ceil(max(b_i, b_o) * rng.uniform(0.5, 2.0)))
        inner, orth = batch.inner_orth_test_holds(sigma, g, b, th, nn)
        if inner and orth and not batch.norm_test_holds(sigma, g, b, eps):
            counterexamples += 1
    ok = worst <= 1e-10 and counterexamples == 0
    return ok, f"max rel diff {worst:.1e}, counterexamples {counterexamples}"


def check_rate(seed, reps=100, iterations=30, slack=1.5):
    obj = Quadratic3Objective()
    L, mu = obj.smoothness()
    tol = ToleranceConfig.preset(3)
    xi0 = np.array([0.225, -0.2, 0.1])
    sq = np.zeros(iterations + 1)
    for i in range(reps):
        cfg = SgdConfig(NORM, tol, max_iterations=iterations, max_gradient_evals=10**15, seed=seed + i)
        rec = run_sgd(obj, cfg, xi0)
        if len(rec.iterations) != iterations:
            return False, f"run {i} stopped early: {rec.termination}"
        sq += np.sum((rec.iterates() - obj.minimizer()) ** 2, axis=1)
    sq /= reps
    bound = np.array([rate_bound(L / mu, tol.epsilon, k) for k in range(iterations + 1)])
    bound *= float((xi0 - obj.minimizer()) @ (xi0 - obj.minimizer()))
    ratio = sq / bound
    worst = float(np.max(ratio))
    return worst <= slack, f"max mean-sq-error / bound {worst:.3f}, over k >= 1 {np.max(ratio[1:]):.3f} (limit {slack})"


def quad3_spec(seed, reps):
    return ExperimentSpec(
        objective="quad3",
        cases=table_cases(("1", "2", "3", "4")),
        controllers=(NORM, INNER_ORTH),
        replications=reps,
        base_seed=seed,
        budget=10**6,
    )


def quad2_spec(seed, reps):
    return ExperimentSpec(
        objective="quad2",
        cases=table_cases(("1", "2", "3")),
        controllers=(NORM, INNER_ORTH, OPTIMAL_SPLIT),
        replications=reps,
        base_seed=seed,
        budget=10**6,
    )


def check_quad3_bands(seed, reps, out_dir, threads):
    curves = run_experiment(quad3_spec(seed, reps), threads)
    write_csv(curves, os.path.join(out_dir, QUAD3_FIXTURE))
    write_svg(curves, os.path.join(out_dir, "quad3_cases.svg"), "objective 1")
    parts, ok = [], True
    for case in ("1", "2", "3"):
        f = overlap_fraction(curves[(NORM, case)], curves[(INNER_ORTH, case)])
        ok &= f >= 0.9
        parts.append(f"#{case} overlap {f:.2f}")
    f = disjoint_fraction(curves[(NORM, "4")], curves[(INNER_ORTH, "4")], tail=True)
    ok &= f >= 0.5
    parts.append(f"#4 tail disjoint {f:.2f}")
    return ok, ", ".join(parts)


def check_quad2_bands(seed, reps, out_dir, threads):
    curves = run_experiment(quad2_spec(seed, reps), threads)
    write_csv(curves, os.path.join(out_dir, QUAD2_FIXTURE))
    write_svg(curves, os.path.join(out_dir, "quad2_cases.svg"), "objective 2")
    parts, ok = [], True
    for case in ("1", "2", "3"):
        apart = disjoint_fraction(curves[(NORM, case)], curves[(INNER_ORTH, case)], tail=True)
        joined = overlap_fraction(curves[(NORM, case)], curves[(OPTIMAL_SPLIT, case)])
        ok &= apart >= 0.3 and joined >= 0.9
        parts.append(f"#{case} tail disjoint {apart:.2f} / split overlap {joined:.2f}")
    return ok, ", ".join(parts)


def _se_cov(g):
    centred = g - g.mean(axis=0)
    prods = centred[:, :, None] * centred[:, None, :]
    return prods.std(axis=0, ddof=1) / math.sqrt(len(g))


def check_oracles(seed, draws=100_000, points=5):
    rng = np.random.default_rng([seed, 7])
    zmax = 0.0
    ok = True
    for obj in (Quadratic3Objective(), Quadratic2Objective()):
        for _ in range(points):
            xi = rng.uniform(-5.0, 5.0, obj.dim)
            g = obj.sample_gradients(xi, draws, rng)
            emp = np.cov(g, rowvar=False)
            exact = obj.exact_covariance(xi)
            se = _se_cov(g)
            diff = np.abs(emp - exact)
            ok &= bool(np.all(diff <= 10.0 * se + 1e-12 * np.abs(exact).max()))
            zmax = max(zmax, float(np.max(diff / np.maximum(se, 1e-300))))
    q2 = Quadratic2Objective()
    resid = float(np.linalg.norm(q2.mean_H @ q2.minimizer() - q2.b))
    ok &= resid < 1e-12
    return ok, f"max cov z {zmax:.2f}, minimizer residual {resid:.1e}"


def fixture_digests(out_dir):
    out = {}
    for name in (QUAD3_FIXTURE, QUAD2_FIXTURE):
        path = os.path.join(out_dir, name)
        if os.path.exists(path):
            with open(path, "rb") as fh:
                out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


CHECKS = {
    1: ("error decomposition identity", 10.0),
    2: ("covariance decomposition", 1.0),
    3: ("norm / inner-orth equivalence", 5.0),
    4: ("linear rate bound", 120.0),
    5: ("objective 1 band equivalence", 600.0),
    6: ("objective 2 non-equivalence", 600.0),
    7: ("objective oracles", 30.0),
}


def run_verify(out_dir, reps=100, base_seed=0, threads=None, only=None, echo=None):
    """Run the selected checks (all by default) and return their results."""
    os.makedirs(out_dir, exist_ok=True)
    calls = {
        1: (check_error_identity, base_seed),
        2: (check_covariance_split, base_seed),
        3: (check_equivalence, base_seed),
        4: (check_rate, base_seed),
        5: (check_quad3_bands, base_seed, reps, out_dir, threads),
        6: (check_quad2_bands, base_seed, reps, out_dir, threads),
        7: (check_oracles, base_seed),
    }
    results = []
    for number in sorted(only or calls):
        name, limit = CHECKS[number]
        fn, *args = calls[number]
        result = _timed(number, name, limit, fn, *args)
        results.append(result)
        if echo:
            echo(result.line())
    return results
