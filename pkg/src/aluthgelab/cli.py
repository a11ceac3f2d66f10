"""Batch experiment runner.

Subcommands: ``run <config>`` executes one experiment, ``validate
<config>`` checks a config without running, ``demo <name>`` materializes
a bundled example into the output directory and runs it.  Every run is
deterministic given config plus seed: multi-trial experiments give each
trial its own spawned seed, trials are gathered in index order no matter
how many worker threads execute them, and all files are written with
fixed numeric formatting, so reruns are byte-identical.

Exit codes: 0 all assertions pass, 1 an assertion failed, 2 config or
input-file problem, 3 a computation could not be completed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .aluthge import (
    ApproximationFailure,
    aluthge,
    iterate,
    polynomial_surrogate,
    regularizer_bounds,
    surrogate_apply,
)
from .brown import (
    brown_measure,
    fk_determinant,
    measure_distance,
    measure_to_csv,
    rotate_measure,
)
from .config import ConfigError, ExperimentConfig, parse_config
from .crossed import (
    PermutationWeightOperator,
    aluthge_limit,
    densify,
    from_text as perm_from_text,
    limit_h,
    orbits,
    permutation_matrix,
    power_limit_step,
    to_text as perm_to_text,
    uniform_mu,
)
from .ensembles import ginibre, random_contraction, random_log_uniform_weights
from .ergodic import binomial_average, fixed_space_projection
from .operators import (
    EigensolverError,
    InvalidOperatorError,
    as_operator,
    normality_defect,
    op_norm,
    spectral_radius,
    trace_norm2,
)

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SCHEMA_VERSION = 1
OUT_DIR_ENV = "ALUTHGELAB_OUT_DIR"

# Slack for monotonicity of norm sequences along the iteration.
MONOTONE_SLACK = 1e-9
# Floor slack for op norm versus spectral radius.
RADIUS_SLACK = 1e-9
# mu is treated as uniform when within this of 1/N.
_UNIFORM_TOL = 1e-12


def _assertion(name: str, measured: float, bound: float) -> dict:
    measured = float(measured)
    bound = float(bound)
    return {
        "name": name,
        "measured": measured,
        "bound": bound,
        "pass": bool(measured <= bound),
    }


def _fmt(x) -> str:
    return "" if x is None else f"{float(x):.17g}"


def _trace_csv(rows) -> str:
    lines = ["step,traceNorm2,opNorm,normalityDefect,distToLimit"]
    for step, tn, on, nd, dist in rows:
        lines.append(f"{step},{_fmt(tn)},{_fmt(on)},{_fmt(nd)},{_fmt(dist)}")
    return "\n".join(lines) + "\n"


def _load_matrix(path: str) -> np.ndarray:
    """Square complex matrix from text: one row per line, entries as
    whitespace-separated Python complex literals (no inner spaces)."""
    try:
        with open(path, "r") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file {path!r}: {exc}") from exc
    rows = []
    for ln in lines:
        try:
            rows.append([complex(tok) for tok in ln.split()])
        except ValueError as exc:
            raise ConfigError(f"matrix file {path!r}: bad entry in line {ln!r}") from exc
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ConfigError(f"matrix file {path!r} must hold a square matrix")
    try:
        return as_operator(np.array(rows, dtype=complex))
    except (InvalidOperatorError, ValueError) as exc:
        raise ConfigError(f"matrix file {path!r}: {exc}") from exc


def _load_permutation_operator(path: str) -> PermutationWeightOperator:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read operator file {path!r}: {exc}") from exc
    try:
        return perm_from_text(text)
    except InvalidOperatorError as exc:
        raise ConfigError(f"operator file {path!r}: {exc}") from exc


def _random_permutation_operator(cfg: ExperimentConfig,
                                 rng: np.random.Generator) -> PermutationWeightOperator:
    alpha = rng.permutation(cfg.size)
    weights = random_log_uniform_weights(cfg.size, rng, cfg.zero_weight_prob)
    return PermutationWeightOperator(alpha, uniform_mu(cfg.size), weights)


def _is_uniform(mu: np.ndarray) -> bool:
    return bool(np.max(np.abs(mu - 1.0 / len(mu))) <= _UNIFORM_TOL)


def _spectral_measures(p: PermutationWeightOperator):
    """Measures of T and of the limit UH.

    Uniform mu: eigen-solve of both densified matrices.  Non-uniform mu:
    the closed-form cycle spectra, which is the only route that weights
    masses by mu.
    """
    uh = p.with_weights(limit_h(p))
    if _is_uniform(p.mu):
        return brown_measure(densify(p)), brown_measure(densify(uh))
    return brown_measure(p), brown_measure(uh)


def _run_aluthge_iterate(cfg: ExperimentConfig, threads: int):
    if cfg.source == "random":
        t = ginibre(cfg.size, np.random.default_rng(cfg.seed))
    else:
        t = _load_matrix(cfg.path)
    trace = iterate(t, max_steps=cfg.max_steps, tol=cfg.tol)
    rows = [
        (s.index, s.trace_norm2, s.op_norm, s.normality_defect, s.dist_to_limit)
        for s in trace.steps
    ]
    tn = trace.trace_norms()
    on = trace.op_norms()
    assertions = [
        _assertion("trace-norm-monotone", np.max(np.diff(tn), initial=0.0), MONOTONE_SLACK),
        _assertion("op-norm-monotone", np.max(np.diff(on), initial=0.0), MONOTONE_SLACK),
        _assertion("spectral-radius-floor", spectral_radius(t) - on[-1], RADIUS_SLACK),
    ]
    if cfg.require_converged:
        assertions.append(_assertion("converged", 0.0 if trace.converged else 1.0, 0.0))
    return assertions, {cfg.outputs["trace"]: _trace_csv(rows)}


def _run_crossed_limit(cfg: ExperimentConfig, threads: int):
    if cfg.source == "random":
        p = _random_permutation_operator(cfg, np.random.default_rng(cfg.seed))
    else:
        p = _load_permutation_operator(cfg.path)
    _, trace = aluthge_limit(p, max_steps=cfg.max_steps, tol=cfg.tol)
    rows = [
        (s.index, s.trace_norm2, s.op_norm, s.normality_defect, s.dist_to_limit)
        for s in trace.steps
    ]
    h = limit_h(p)
    cycles = orbits(p)
    assertions = [
        _assertion("limit-distance", trace.steps[-1].dist_to_limit, cfg.limit_tol),
    ]
    if len(cycles) == 1:
        assertions.append(
            _assertion(
                "single-cycle-determinant",
                np.max(np.abs(h - fk_determinant(p))),
                cfg.determinant_tol,
            )
        )
    if cfg.expected_h is not None:
        assertions.append(
            _assertion("limit-h-expected", np.max(np.abs(h - cfg.expected_h)), cfg.limit_tol)
        )
    m = cfg.power_m if cfg.power_m is not None else math.lcm(*(len(c) for c in cycles))
    assertions.append(
        _assertion(
            "power-step-at-m",
            np.max(np.abs(power_limit_step(p, m, "right") - h)),
            cfg.power_tol,
        )
    )
    measure_t, measure_uh = _spectral_measures(p)
    files = {
        cfg.outputs["trace"]: _trace_csv(rows),
        cfg.outputs["measure"]: measure_to_csv(measure_t),
        cfg.outputs["measure-limit"]: measure_to_csv(measure_uh),
    }
    return assertions, files


def _run_ergodic_average(cfg: ExperimentConfig, threads: int):
    rng = np.random.default_rng(cfg.seed)
    if cfg.source == "random":
        alpha = rng.permutation(cfg.size)
    else:
        # only the permutation is used here; weights and mu in the file
        # feed the functional averages, not the vector one
        alpha = _load_permutation_operator(cfg.path).alpha
    u = permutation_matrix(alpha)
    n_pts = len(alpha)
    v = (rng.standard_normal(n_pts) + 1j * rng.standard_normal(n_pts)) / np.sqrt(2.0)
    projection = fixed_space_projection(u)
    grid = [0]
    k = 1
    while k < cfg.n_max:
        grid.append(k)
        k *= 2
    grid.append(cfg.n_max)
    rows = []
    residuals = []
    for n in grid:
        report = binomial_average(u, v, n, projection=projection)
        residuals.append(report.residual)
        rows.append(
            (
                n,
                float(np.linalg.norm(report.value)),
                float(np.max(np.abs(report.value))),
                None,
                report.residual,
            )
        )
    residuals = np.array(residuals)
    assertions = [
        _assertion("residual-decreasing", np.max(np.diff(residuals), initial=0.0),
                   cfg.monotone_slack),
        _assertion("residual-final", residuals[-1], cfg.residual_tol),
    ]
    return assertions, {cfg.outputs["trace"]: _trace_csv(rows)}


def _map_trials(work, count: int, threads: int) -> list:
    if threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, range(count)))
    return [work(i) for i in range(count)]


def _run_brown_equality(cfg: ExperimentConfig, threads: int):
    if cfg.source == "random":
        seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
        operators = [
            _random_permutation_operator(cfg, np.random.default_rng(s)) for s in seeds
        ]
    else:
        operators = [_load_permutation_operator(cfg.path)]

    thetas = [2.0 * np.pi * j / cfg.theta_grid for j in range(cfg.theta_grid)]

    def one(i: int):
        p = operators[i]
        t = densify(p)
        measure_t, measure_uh = _spectral_measures(p)
        dist = measure_distance(measure_t, measure_uh)
        # rotation compares atom sets, so the uniform counting measure is
        # the right dense-side object for any mu
        rotation_worst = 0.0
        if thetas:
            dense_measure = brown_measure(t)
            for theta in thetas:
                rotated = rotate_measure(dense_measure, theta)
                scaled = brown_measure(np.exp(1j * theta) * t)
                rotation_worst = max(rotation_worst, measure_distance(rotated, scaled))
        row = (i, trace_norm2(t), op_norm(t), normality_defect(t), dist)
        return dist, rotation_worst, row, (measure_t, measure_uh)

    results = _map_trials(one, len(operators), threads)
    dists = [r[0] for r in results]
    rot = [r[1] for r in results]
    rows = [r[2] for r in results]
    first_measures = results[0][3]
    assertions = [_assertion("wasserstein-max", max(dists), cfg.distance_tol)]
    if thetas:
        assertions.append(_assertion("rotation-invariance", max(rot), cfg.rotation_tol))
    files = {
        cfg.outputs["trace"]: _trace_csv(rows),
        cfg.outputs["measure"]: measure_to_csv(first_measures[0]),
        cfg.outputs["measure-limit"]: measure_to_csv(first_measures[1]),
    }
    return assertions, files


def _run_bound_check(cfg: ExperimentConfig, threads: int):
    surrogate = None
    if cfg.surrogate_eps is not None:
        try:
            surrogate = polynomial_surrogate(cfg.surrogate_radius, cfg.surrogate_eps)
        except ApproximationFailure as exc:
            raise ApproximationFailure(
                f"assertion 'surrogate-transform-error' cannot be evaluated: {exc}",
                exc.achieved_p,
                exc.achieved_q,
                exc.target,
            ) from exc
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)

    def one(i: int):
        rng = np.random.default_rng(seeds[i])
        t = ginibre(cfg.size, rng)
        margins = {}
        for order in cfg.bound_orders:
            for check in regularizer_bounds(t, order):
                margin = check.lhs - check.rhs
                margins[check.name] = max(margin, margins.get(check.name, -np.inf))
        surrogate_err = None
        if surrogate is not None:
            ts = cfg.surrogate_radius * random_contraction(cfg.size, rng)
            surrogate_err = float(
                np.linalg.norm(surrogate_apply(surrogate, ts) - aluthge(ts), 2)
            )
        row = (i, trace_norm2(t), op_norm(t), normality_defect(t), max(margins.values()))
        return margins, surrogate_err, row

    results = _map_trials(one, cfg.trials, threads)
    rows = [r[2] for r in results]
    names = sorted(results[0][0])
    assertions = [
        _assertion(
            f"bound-{name}",
            max(r[0][name] for r in results),
            cfg.bound_slack,
        )
        for name in names
    ]
    if surrogate is not None:
        assertions.append(
            _assertion(
                "surrogate-transform-error",
                max(r[1] for r in results),
                cfg.surrogate_eps,
            )
        )
    return assertions, {cfg.outputs["trace"]: _trace_csv(rows)}


_RUNNERS = {
    "aluthge-iterate": _run_aluthge_iterate,
    "crossed-limit": _run_crossed_limit,
    "ergodic-average": _run_ergodic_average,
    "brown-equality": _run_brown_equality,
    "bound-check": _run_bound_check,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str, threads: int = 1) -> int:
    """Execute one experiment and write its artifacts under out_dir."""
    assertions, files = _RUNNERS[cfg.kind](cfg, threads)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.name,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "assertions": assertions,
    }
    files[cfg.outputs["summary"]] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    for rel in sorted(files):
        full = os.path.join(out_dir, rel)
        parent = os.path.dirname(full)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(full, "w", newline="") as fh:
            fh.write(files[rel])
    return EXIT_OK if all(a["pass"] for a in assertions) else EXIT_ASSERTION


# Bundled demos: config text plus any input files it references.
_DEMO_SEED = 20260817


def _demo_bundle(name: str) -> dict[str, str]:
    if name == "three-cycle":
        op = PermutationWeightOperator([1, 2, 0], uniform_mu(3), [1.0, 2.0, 4.0])
        config = (
            "[experiment]\n"
            "kind = crossed-limit\n"
            "name = three-cycle\n"
            "\n"
            "[operator]\n"
            "source = permutation-file\n"
            "path = three-cycle-op.txt\n"
            "\n"
            "[parameters]\n"
            "max-steps = 200\n"
            "limit-tol = 1e-6\n"
            "expected-h = 2.0\n"
        )
        return {"three-cycle.cfg": config, "three-cycle-op.txt": perm_to_text(op)}
    if name == "bound-check":
        config = (
            "[experiment]\n"
            "kind = bound-check\n"
            "name = bound-check\n"
            f"seed = {_DEMO_SEED}\n"
            "\n"
            "[operator]\n"
            "source = random\n"
            "size = 8\n"
            "trials = 50\n"
            "\n"
            "[parameters]\n"
            "bound-orders = 100\n"
        )
        return {"bound-check.cfg": config}
    if name == "brown-equality":
        config = (
            "[experiment]\n"
            "kind = brown-equality\n"
            "name = brown-equality\n"
            f"seed = {_DEMO_SEED}\n"
            "\n"
            "[operator]\n"
            "source = random\n"
            "size = 32\n"
            "trials = 10\n"
            "\n"
            "[parameters]\n"
            "theta-grid = 12\n"
        )
        return {"brown-equality.cfg": config}
    raise ConfigError(f"unknown demo {name!r}")


DEMO_NAMES = ("three-cycle", "bound-check", "brown-equality")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aluthgelab",
        description="Run declarative operator-theory experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out-dir", default=None,
                       help=f"output directory (default: ${OUT_DIR_ENV} or '.')")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for independent trials")

    run_p = sub.add_parser("run", help="execute an experiment config")
    run_p.add_argument("config")
    add_common(run_p)

    val_p = sub.add_parser("validate", help="parse and validate a config")
    val_p.add_argument("config")

    demo_p = sub.add_parser("demo", help="materialize and run a bundled example")
    demo_p.add_argument("name", choices=DEMO_NAMES)
    add_common(demo_p)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = parse_config(args.config)
            print(f"valid: {cfg.kind} experiment '{cfg.name}'")
            return EXIT_OK

        out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
        if args.threads < 1:
            print("config error: --threads must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        os.makedirs(out_dir, exist_ok=True)

        if args.command == "demo":
            bundle = _demo_bundle(args.name)
            for rel in sorted(bundle):
                with open(os.path.join(out_dir, rel), "w", newline="") as fh:
                    fh.write(bundle[rel])
            config_path = os.path.join(out_dir, f"{args.name}.cfg")
        else:
            config_path = args.config

        cfg = parse_config(config_path)
        if args.seed is not None:
            cfg.seed = args.seed
        code = run_experiment(cfg, out_dir, threads=args.threads)
        status = "pass" if code == EXIT_OK else "FAIL"
        print(f"{cfg.kind} '{cfg.name}': {status} "
              f"(summary: {os.path.join(out_dir, cfg.outputs['summary'])})")
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ApproximationFailure, EigensolverError, InvalidOperatorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
