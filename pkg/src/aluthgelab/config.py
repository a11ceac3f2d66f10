"""Experiment configuration: flat key-value files with sections.

A config names one experiment kind, an operator source, numeric
parameters, and output file names.  Parsing is fail-closed: unknown
sections, unknown keys, duplicate keys, malformed numbers, and
kind-incompatible combinations are all errors, so a config that validates
runs the same way everywhere.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

KINDS = (
    "aluthge-iterate",
    "crossed-limit",
    "ergodic-average",
    "brown-equality",
    "bound-check",
)

SOURCES = ("random", "matrix-file", "permutation-file")

# Operator sources each kind accepts.
_KIND_SOURCES = {
    "aluthge-iterate": ("random", "matrix-file"),
    "crossed-limit": ("random", "permutation-file"),
    "ergodic-average": ("random", "permutation-file"),
    "brown-equality": ("random", "permutation-file"),
    "bound-check": ("random",),
}

# Random matrix family drawn per kind when source = random.
_KIND_DISTRIBUTIONS = {
    "aluthge-iterate": ("ginibre",),
    "crossed-limit": ("permutation-weight",),
    "ergodic-average": ("permutation",),
    "brown-equality": ("permutation-weight",),
    "bound-check": ("ginibre",),
}

# Parameter keys each kind accepts, with defaults applied when absent.
_KIND_PARAMETERS = {
    "aluthge-iterate": ("max-steps", "tol", "require-converged"),
    "crossed-limit": (
        "max-steps",
        "tol",
        "limit-tol",
        "expected-h",
        "power-m",
        "power-tol",
        "determinant-tol",
    ),
    "ergodic-average": ("n-max", "residual-tol", "monotone-slack"),
    "brown-equality": ("distance-tol", "theta-grid", "rotation-tol"),
    "bound-check": ("bound-orders", "bound-slack", "surrogate-eps", "surrogate-radius"),
}

# Kinds that run several independently seeded trials.
_MULTI_TRIAL_KINDS = ("brown-equality", "bound-check")

# Output keys each kind writes; all kinds produce a trace and a summary.
_KIND_OUTPUTS = {
    "aluthge-iterate": ("trace", "summary"),
    "crossed-limit": ("trace", "summary", "measure", "measure-limit"),
    "ergodic-average": ("trace", "summary"),
    "brown-equality": ("trace", "summary", "measure", "measure-limit"),
    "bound-check": ("trace", "summary"),
}


class ConfigError(ValueError):
    """A config file failed to parse or validate.

    The message names the offending key or carries the parser's
    line/column information.
    """


@dataclass
class ExperimentConfig:
    """Fully validated experiment description."""

    kind: str
    name: str
    seed: int | None
    source: str
    size: int | None = None
    path: str | None = None
    distribution: str | None = None
    zero_weight_prob: float = 0.0
    trials: int = 1
    max_steps: int = 100
    tol: float = 1e-10
    require_converged: bool = False
    limit_tol: float = 1e-6
    expected_h: float | None = None
    power_m: int | None = None
    power_tol: float = 1e-12
    determinant_tol: float = 1e-10
    n_max: int = 4096
    residual_tol: float = 1e-2
    monotone_slack: float = 1e-12
    distance_tol: float = 1e-8
    theta_grid: int = 0
    rotation_tol: float = 1e-9
    bound_orders: tuple[int, ...] = (4, 16, 64, 256)
    bound_slack: float = 1e-12
    surrogate_eps: float | None = None
    surrogate_radius: float = 2.0
    outputs: dict[str, str] = field(default_factory=dict)

    def output_path(self, key: str) -> str:
        return self.outputs[key]


def _positive(value: float, key: str) -> float:
    if not value > 0:
        raise ConfigError(f"key '{key}' must be positive, got {value!r}")
    return value


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"key '{key}' expects an integer, got {raw!r}") from exc


def _parse_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"key '{key}' expects a number, got {raw!r}") from exc


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"key '{key}' expects a boolean, got {raw!r}")


def parse_config_text(text: str, default_name: str = "experiment") -> ExperimentConfig:
    """Parse and validate a config from its text."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        # configparser messages carry line numbers for duplicates and
        # malformed lines
        raise ConfigError(str(exc)) from exc
    if parser.defaults():
        raise ConfigError("a DEFAULT section is not allowed; use explicit sections")

    known_sections = ("experiment", "operator", "parameters", "output")
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(f"unknown section '{section}'")
    if not parser.has_section("experiment"):
        raise ConfigError("missing mandatory section 'experiment'")
    if not parser.has_section("operator"):
        raise ConfigError("missing mandatory section 'operator'")

    exp = dict(parser.items("experiment"))
    for key in exp:
        if key not in ("kind", "name", "seed"):
            raise ConfigError(f"unknown key 'experiment.{key}'")
    if "kind" not in exp:
        raise ConfigError("missing mandatory key 'experiment.kind'")
    kind = exp["kind"].strip()
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    name = exp.get("name", default_name).strip()
    if not name:
        raise ConfigError("key 'experiment.name' must not be empty")
    seed = _parse_int(exp["seed"], "experiment.seed") if "seed" in exp else None

    op = dict(parser.items("operator"))
    allowed_op_keys = {"source", "size", "path", "distribution", "zero-weight-prob", "trials"}
    for key in op:
        if key not in allowed_op_keys:
            raise ConfigError(f"unknown key 'operator.{key}'")
    if "source" not in op:
        raise ConfigError("missing mandatory key 'operator.source'")
    source = op["source"].strip()
    if source not in SOURCES:
        raise ConfigError(f"unknown source {source!r}; expected one of {', '.join(SOURCES)}")
    if source not in _KIND_SOURCES[kind]:
        raise ConfigError(
            f"kind '{kind}' does not accept source '{source}'; "
            f"allowed: {', '.join(_KIND_SOURCES[kind])}"
        )

    cfg = ExperimentConfig(kind=kind, name=name, seed=seed, source=source)

    if source == "random":
        if "size" not in op:
            raise ConfigError("source 'random' requires key 'operator.size'")
        cfg.size = _parse_int(op["size"], "operator.size")
        if cfg.size < 1:
            raise ConfigError("key 'operator.size' must be at least 1")
        if seed is None:
            raise ConfigError("a seed is mandatory for random operator sources")
        default_dist = _KIND_DISTRIBUTIONS[kind][0]
        cfg.distribution = op.get("distribution", default_dist).strip()
        if cfg.distribution not in _KIND_DISTRIBUTIONS[kind]:
            raise ConfigError(
                f"kind '{kind}' draws from {', '.join(_KIND_DISTRIBUTIONS[kind])}; "
                f"got distribution {cfg.distribution!r}"
            )
        if "path" in op:
            raise ConfigError("key 'operator.path' is only for file sources")
    else:
        if "path" not in op:
            raise ConfigError(f"source '{source}' requires key 'operator.path'")
        cfg.path = op["path"].strip()
        if not cfg.path:
            raise ConfigError("key 'operator.path' must not be empty")
        for key in ("size", "distribution"):
            if key in op:
                raise ConfigError(f"key 'operator.{key}' is only for source 'random'")

    if "zero-weight-prob" in op:
        if cfg.distribution != "permutation-weight":
            raise ConfigError(
                "key 'operator.zero-weight-prob' applies only to the "
                "permutation-weight distribution"
            )
        cfg.zero_weight_prob = _parse_float(op["zero-weight-prob"], "operator.zero-weight-prob")
        if not 0.0 <= cfg.zero_weight_prob < 1.0:
            raise ConfigError("key 'operator.zero-weight-prob' must lie in [0, 1)")

    if "trials" in op:
        if kind not in _MULTI_TRIAL_KINDS:
            raise ConfigError(f"kind '{kind}' runs a single trial; remove 'operator.trials'")
        if source != "random":
            raise ConfigError("key 'operator.trials' requires source 'random'")
        cfg.trials = _parse_int(op["trials"], "operator.trials")
        if cfg.trials < 1:
            raise ConfigError("key 'operator.trials' must be at least 1")

    if kind == "ergodic-average" and seed is None:
        raise ConfigError(
            "kind 'ergodic-average' draws a random vector and needs 'experiment.seed'"
        )

    params = dict(parser.items("parameters")) if parser.has_section("parameters") else {}
    allowed = _KIND_PARAMETERS[kind]
    for key in params:
        if key not in allowed:
            raise ConfigError(f"kind '{kind}' does not accept key 'parameters.{key}'")

    if "max-steps" in params:
        cfg.max_steps = _parse_int(params["max-steps"], "parameters.max-steps")
        if cfg.max_steps < 0:
            raise ConfigError("key 'parameters.max-steps' must be nonnegative")
    elif kind == "crossed-limit":
        cfg.max_steps = 200
    if "tol" in params:
        cfg.tol = _positive(_parse_float(params["tol"], "parameters.tol"), "parameters.tol")
    if "require-converged" in params:
        cfg.require_converged = _parse_bool(params["require-converged"], "parameters.require-converged")
    if "limit-tol" in params:
        cfg.limit_tol = _positive(_parse_float(params["limit-tol"], "parameters.limit-tol"), "parameters.limit-tol")
    if "expected-h" in params:
        cfg.expected_h = _parse_float(params["expected-h"], "parameters.expected-h")
        if cfg.expected_h < 0:
            raise ConfigError("key 'parameters.expected-h' must be nonnegative")
    if "power-m" in params:
        cfg.power_m = _parse_int(params["power-m"], "parameters.power-m")
        if cfg.power_m < 1:
            raise ConfigError("key 'parameters.power-m' must be at least 1")
    if "power-tol" in params:
        cfg.power_tol = _positive(_parse_float(params["power-tol"], "parameters.power-tol"), "parameters.power-tol")
    if "determinant-tol" in params:
        cfg.determinant_tol = _positive(
            _parse_float(params["determinant-tol"], "parameters.determinant-tol"),
            "parameters.determinant-tol",
        )
    if "n-max" in params:
        cfg.n_max = _parse_int(params["n-max"], "parameters.n-max")
        if cfg.n_max < 1:
            raise ConfigError("key 'parameters.n-max' must be at least 1")
    if "residual-tol" in params:
        cfg.residual_tol = _positive(
            _parse_float(params["residual-tol"], "parameters.residual-tol"),
            "parameters.residual-tol",
        )
    if "monotone-slack" in params:
        cfg.monotone_slack = _positive(
            _parse_float(params["monotone-slack"], "parameters.monotone-slack"),
            "parameters.monotone-slack",
        )
    if "distance-tol" in params:
        cfg.distance_tol = _positive(
            _parse_float(params["distance-tol"], "parameters.distance-tol"),
            "parameters.distance-tol",
        )
    if "theta-grid" in params:
        cfg.theta_grid = _parse_int(params["theta-grid"], "parameters.theta-grid")
        if cfg.theta_grid < 0:
            raise ConfigError("key 'parameters.theta-grid' must be nonnegative")
    if "rotation-tol" in params:
        cfg.rotation_tol = _positive(
            _parse_float(params["rotation-tol"], "parameters.rotation-tol"),
            "parameters.rotation-tol",
        )
    if "bound-orders" in params:
        toks = params["bound-orders"].split()
        if not toks:
            raise ConfigError("key 'parameters.bound-orders' must list at least one order")
        orders = tuple(_parse_int(tok, "parameters.bound-orders") for tok in toks)
        if any(n < 1 for n in orders):
            raise ConfigError("key 'parameters.bound-orders' entries must be at least 1")
        cfg.bound_orders = orders
    if "bound-slack" in params:
        cfg.bound_slack = _positive(
            _parse_float(params["bound-slack"], "parameters.bound-slack"),
            "parameters.bound-slack",
        )
    if "surrogate-eps" in params:
        cfg.surrogate_eps = _positive(
            _parse_float(params["surrogate-eps"], "parameters.surrogate-eps"),
            "parameters.surrogate-eps",
        )
    if "surrogate-radius" in params:
        cfg.surrogate_radius = _positive(
            _parse_float(params["surrogate-radius"], "parameters.surrogate-radius"),
            "parameters.surrogate-radius",
        )
        if "surrogate-eps" not in params:
            raise ConfigError("key 'parameters.surrogate-radius' requires 'parameters.surrogate-eps'")

    out = dict(parser.items("output")) if parser.has_section("output") else {}
    allowed_outputs = _KIND_OUTPUTS[kind]
    for key in out:
        if key not in allowed_outputs:
            raise ConfigError(f"kind '{kind}' does not write output '{key}'")
    defaults = {
        "trace": f"{name}-trace.csv",
        "summary": f"{name}-summary.json",
        "measure": f"{name}-measure.csv",
        "measure-limit": f"{name}-limit-measure.csv",
    }
    for key in allowed_outputs:
        value = out.get(key, defaults[key]).strip()
        if not value:
            raise ConfigError(f"key 'output.{key}' must not be empty")
        cfg.outputs[key] = value
    paths = list(cfg.outputs.values())
    if len(set(paths)) != len(paths):
        raise ConfigError("output paths must be pairwise distinct")

    return cfg


def parse_config(path) -> ExperimentConfig:
    """Read and validate a config file.

    A relative operator path is resolved against the config file's own
    directory, so a config travels together with its input files.
    """
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    cfg = parse_config_text(text, default_name=stem or "experiment")
    if cfg.path is not None and not os.path.isabs(cfg.path):
        cfg.path = os.path.join(os.path.dirname(os.path.abspath(str(path))), cfg.path)
    return cfg
