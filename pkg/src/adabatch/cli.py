"""Command-line entry point: ``adabatch {run,verify,split,rate}``.

Exit status is 0 on success, 1 on usage or configuration errors and 2 when
an experiment fails or a verification check does not pass.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import batch
from .batch import ToleranceConfig
from .errors import AdaBatchError, ConfigError
from .experiment import ExperimentError, ExperimentSpec, table_cases
from .objectives import make_objective
from .report import write_csv, write_svg
from .sgd import CONTROLLERS

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2

CONFIG_KEYS = {
    "objective": str,
    "kappa": float,
    "cases": str,
    "epsilon": float,
    "theta": float,
    "nu": float,
    "strict": str,
    "controllers": str,
    "replications": int,
    "xi0": str,
    "base_seed": int,
    "budget": int,
    "mode": str,
    "b0": int,
    "step_size": float,
    "max_iterations": int,
    "grid_points": int,
    "out": str,
    "svg": str,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_config_file(path):
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = CONFIG_KEYS[key](value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _truthy(value):
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def build_spec(values):
    """Turn merged config/flag values into an ExperimentSpec."""
    strict = _truthy(values.get("strict", "false"))
    cases = []
    if values.get("cases"):
        labels = [c.strip().lstrip("#") for c in str(values["cases"]).split(",") if c.strip()]
        cases.extend(table_cases(labels, strict=strict))
    if values.get("epsilon") is not None:
        eps = values["epsilon"]
        theta = values.get("theta")
        nu = values.get("nu")
        if theta is None:
            tol = ToleranceConfig.coupled(eps, 0.0) if nu is None else ToleranceConfig(eps, 0.0, nu)
        elif nu is None or strict:
            tol = ToleranceConfig.coupled(eps, theta)
        else:
            tol = ToleranceConfig(eps, theta, nu)
        cases.append(("custom", tol))
    if not cases:
        cases = list(table_cases(strict=strict))

    controllers = tuple(c.strip() for c in values.get("controllers", "norm,innerOrth").split(",") if c.strip())
    kwargs = dict(
        objective=values.get("objective", "quad3"),
        kappa=values.get("kappa", 100.0),
        cases=tuple(cases),
        controllers=controllers,
        replications=values.get("replications", 1000),
        base_seed=values.get("base_seed", 0),
        budget=values.get("budget", 10**6),
        mode=values.get("mode", batch.ORACLE),
        b0=values.get("b0", 32),
        step_size=values.get("step_size"),
        max_iterations=values.get("max_iterations", 10**5),
        grid_points=values.get("grid_points", 200),
    )
    if values.get("xi0"):
        kwargs["xi0"] = _floats(values["xi0"])
    if kwargs["mode"] not in batch.MODES:
        raise ConfigError(f"unknown mode {kwargs['mode']!r}")
    return ExperimentSpec(**kwargs)


def _cmd_run(args):
    from .experiment import run_experiment

    values = parse_config_file(args.config) if args.config else {}
    overrides = {
        "objective": args.objective,
        "kappa": args.kappa,
        "cases": args.case,
        "epsilon": args.epsilon,
        "theta": args.theta,
        "nu": args.nu,
        "controllers": args.controllers,
        "replications": args.reps,
        "xi0": args.xi0,
        "base_seed": args.seed,
        "budget": args.budget,
        "mode": args.mode,
        "b0": args.b0,
        "step_size": args.step_size,
        "max_iterations": args.max_iterations,
        "out": args.out,
        "svg": args.svg,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    if args.strict:
        values["strict"] = "true"
    spec = build_spec(values)
    out = values.get("out", "adabatch.csv")
    svg = values.get("svg") or os.path.splitext(out)[0] + ".svg"

    curves = run_experiment(spec, args.threads)
    write_csv(curves, out)
    write_svg(curves, svg, title=spec.objective)
    print(f"wrote {out} and {svg} ({len(curves)} curves, {spec.replications} replications each)")
    return EXIT_OK


def _cmd_verify(args):
    from .verify import fixture_digests, run_verify

    only = None
    if args.only:
        only = sorted({int(x) for x in args.only.split(",")})
        bad = [n for n in only if not 1 <= n <= 7]
        if bad:
            raise UsageError(f"unknown check number(s) {bad}")
    results = run_verify(args.out_dir, args.reps, args.seed, args.threads, only, echo=print)
    for name, digest in fixture_digests(args.out_dir).items():
        print(f"fixture {name} sha256 {digest}")
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return EXIT_OK if passed == len(results) else EXIT_FAILED


def _cmd_split(args):
    obj = make_objective(args.objective, kappa=args.kappa)
    xi = np.array(_floats(args.xi)) if args.xi else obj.minimizer() + 1.0
    sigma = obj.exact_covariance(xi)
    grad = obj.exact_gradient(xi)
    theta, nu = batch.optimal_split(sigma, grad, args.epsilon)
    c_par, c_perp, trace, grad_sq = batch.split_contractions(sigma, grad)
    print(f"xi        = {np.array2string(xi, separator=', ')}")
    print(f"|grad|^2  = {grad_sq:.17g}")
    print(f"S:P_nabla = {c_par:.17g}")
    print(f"S:P_perp  = {c_perp:.17g}")
    print(f"tr S      = {trace:.17g}")
    print(f"theta     = {theta:.17g}")
    print(f"nu        = {nu:.17g}")
    print(f"b_norm    = {batch.norm_batch_size_real(sigma, grad, args.epsilon):.17g}")
    return EXIT_OK


def _cmd_rate(args):
    if args.epsilon is not None:
        tol = args.epsilon
    elif args.theta is not None and args.nu is not None:
        tol = ToleranceConfig(float(np.hypot(args.theta, args.nu)), args.theta, args.nu)
    else:
        raise UsageError("give --epsilon or both --theta and --nu")
    print(f"rho = {batch.rate_factor(args.kappa, tol):.17g}")
    print("k\tbound")
    for k in range(args.k + 1):
        print(f"{k}\t{batch.rate_bound(args.kappa, tol, k):.17g}")
    return EXIT_OK


def make_parser():
    parser = _Parser(prog="adabatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a replicated experiment and write CSV + SVG")
    run.add_argument("--config", help="key = value experiment file")
    run.add_argument("--objective", choices=["quad3", "quad2"])
    run.add_argument("--kappa", type=float)
    run.add_argument("--case", help="published case labels, e.g. 1,2,3")
    run.add_argument("--epsilon", type=float, help="custom case tolerance")
    run.add_argument("--theta", type=float)
    run.add_argument("--nu", type=float)
    run.add_argument("--strict", action="store_true", help="recompute nu = sqrt(eps^2 - theta^2)")
    run.add_argument("--controllers", help=f"comma list from {', '.join(CONTROLLERS)}")
    run.add_argument("--reps", type=int)
    run.add_argument("--xi0", help="starting point, comma separated")
    run.add_argument("--seed", type=int)
    run.add_argument("--budget", type=int, help="gradient evaluations per run")
    run.add_argument("--mode", choices=list(batch.MODES))
    run.add_argument("--b0", type=int)
    run.add_argument("--step-size", type=float)
    run.add_argument("--max-iterations", type=int)
    run.add_argument("--threads", type=int, help="worker processes (default $ADABATCH_THREADS, 0 = auto)")
    run.add_argument("--out", help="CSV path")
    run.add_argument("--svg", help="SVG path (default: CSV path with .svg)")
    run.set_defaults(func=_cmd_run)

    ver = sub.add_parser("verify", help="run the acceptance checks")
    ver.add_argument("--reps", type=int, default=100)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--threads", type=int)
    ver.add_argument("--only", help="comma list of check numbers 1-7")
    ver.add_argument("--out-dir", default="verify-out")
    ver.set_defaults(func=_cmd_verify)

    split = sub.add_parser("split", help="print the optimal (theta, nu) split")
    split.add_argument("--objective", choices=["quad3", "quad2"], default="quad3")
    split.add_argument("--kappa", type=float, default=100.0)
    split.add_argument("--xi", help="point, comma separated (default: minimizer + 1)")
    split.add_argument("--epsilon", type=float, required=True)
    split.set_defaults(func=_cmd_split)

    rate = sub.add_parser("rate", help="print the linear-rate bound table")
    rate.add_argument("--kappa", type=float, required=True)
    rate.add_argument("--epsilon", type=float)
    rate.add_argument("--theta", type=float)
    rate.add_argument("--nu", type=float)
    rate.add_argument("--k", type=int, default=10)
    rate.set_defaults(func=_cmd_rate)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"adabatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ExperimentError, AdaBatchError) as exc:
        print(f"adabatch: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as exc:
        print(f"adabatch: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
