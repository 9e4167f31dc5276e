"""Experiment configuration.

Configs are YAML files (JSON is accepted too, being a YAML subset). The
schema is strict: unknown keys and names are rejected when the file is
parsed, before anything runs.

Example::

    name: rosenbrock-adaptive
    seed: 0
    problem:
      name: rosenbrock
      dimension: 2
      params: {a: 1, b: 100}
      init: rosenbrock-2d-start
    optimizer:
      name: adaptive_rsav
      lr: 1.0
      params: {eta: 0.99, gamma: 0.9, C: 1.0e-8}
    operator: {kind: zero}
    iterations: 1000
    outputs: {trace: out/trace.csv, format: csv, plot: out/loss.svg}

A ``compare`` section turns the file into a matrix for ``savopt compare``::

    compare:
      optimizers: [{name: gd}, {name: adam}]
      lr: [1.0e-4, 1.0e-2, 1]
      out_dir: out/rosenbrock
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

OPTIMIZERS = ("gd", "nag", "adam", "sd", "sav", "savgd", "msav", "legacy_sav",
              "rsav", "adaptive_rsav", "rsavq", "linesearch_sav")
PROBLEMS = ("quadratic", "rastrigin", "rosenbrock", "rosenbrock2d",
            "phase_retrieval", "matrix_factorization", "least_squares",
            "polynomial")
INIT_PRESETS = ("ones", "zeros", "rosenbrock-2d-start", "box-random", "random")
OPERATOR_KINDS = ("zero", "identity", "diagonal", "hessian_diag", "laplacian",
                  "composite")

# optimizer parameter names and the optimizers that accept them
OPTIMIZER_PARAMS = {
    "C": OPTIMIZERS,
    "eta": ("rsav", "adaptive_rsav"),
    "rho": ("adaptive_rsav",),
    "gamma": ("adaptive_rsav",),
    "dt_min": ("adaptive_rsav",),
    "q": ("rsavq", "linesearch_sav"),
    "restart": ("rsavq",),
    "wolfe": ("linesearch_sav",),
    "C_g": ("legacy_sav",),
    "momentum": ("nag",),
    "beta1": ("adam",),
    "beta2": ("adam",),
    "eps": ("adam",),
}
USES_OPERATOR = ("gd", "sav", "msav", "legacy_sav", "rsav", "adaptive_rsav",
                 "rsavq", "linesearch_sav")
STOCHASTIC_PROBLEMS = ("phase_retrieval", "matrix_factorization")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ProblemConfig:
    name: str
    dimension: int | None = None
    params: dict = field(default_factory=dict)
    seed: int | None = None
    init: object = None


@dataclass
class OptimizerConfig:
    name: str
    lr: float | None = None
    params: dict = field(default_factory=dict)


@dataclass
class NoiseConfig:
    epsilon: float = 0.0
    seed: int | None = None


@dataclass
class BatchConfig:
    size: int
    epochs: int
    seed: int | None = None


@dataclass
class OutputConfig:
    trace: str | None = None
    format: str = "csv"
    plot: str | None = None
    summary: str | None = None


@dataclass
class CompareConfig:
    optimizers: list
    lrs: list
    out_dir: str | None = None


@dataclass
class ExperimentConfig:
    problem: ProblemConfig
    optimizer: OptimizerConfig
    operator: dict = field(default_factory=lambda: {"kind": "zero"})
    iterations: int = 1000
    noise: NoiseConfig | None = None
    batch: BatchConfig | None = None
    outputs: OutputConfig = field(default_factory=OutputConfig)
    compare: CompareConfig | None = None
    name: str = "experiment"
    seed: int | None = None
    stop_rel_loss: float | None = None

    def with_optimizer(self, opt: OptimizerConfig) -> "ExperimentConfig":
        return replace(copy.deepcopy(self), optimizer=copy.deepcopy(opt), compare=None)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Copy with every seed replaced by ``seed``."""
        cfg = copy.deepcopy(self)
        cfg.seed = seed
        cfg.problem.seed = seed
        if isinstance(cfg.problem.init, dict) and "seed" in cfg.problem.init:
            cfg.problem.init["seed"] = seed
        if cfg.noise is not None:
            cfg.noise.seed = seed
        if cfg.batch is not None:
            cfg.batch.seed = seed
        return cfg


def _take(d: dict, allowed, where: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    return d


def _num(x, where, *, positive=False, nonneg=False, integer=False):
    try:
        v = int(x) if integer and float(x) == int(float(x)) else float(x)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {x!r}") from None
    if integer and not isinstance(v, int):
        raise ConfigError(f"{where}: expected an integer, got {x!r}")
    if positive and not v > 0:
        raise ConfigError(f"{where}: must be positive")
    if nonneg and not v >= 0:
        raise ConfigError(f"{where}: must be >= 0")
    return v


def _seed(x, where):
    if x is None:
        return None
    return _num(x, where, nonneg=True, integer=True)


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a mapping and build an ExperimentConfig."""
    _take(data, ("name", "seed", "problem", "optimizer", "operator", "iterations",
                 "noise", "batch", "outputs", "compare", "stop"), "config")
    seed = _seed(data.get("seed"), "seed")

    p = _take(data.get("problem") or {}, ("name", "dimension", "params", "seed", "init"),
              "problem")
    if p.get("name") not in PROBLEMS:
        raise ConfigError(f"problem.name must be one of {PROBLEMS}, got {p.get('name')!r}")
    problem = ProblemConfig(
        name=p["name"],
        dimension=None if p.get("dimension") is None
        else _num(p["dimension"], "problem.dimension", positive=True, integer=True),
        params=dict(p.get("params") or {}),
        seed=_seed(p.get("seed"), "problem.seed"),
        init=copy.deepcopy(p.get("init")),
    )
    _check_init(problem.init)

    if "optimizer" not in data:
        raise ConfigError("config needs an optimizer section")
    optimizer = _parse_optimizer(data["optimizer"], "optimizer",
                                 need_lr="compare" not in data)

    op = dict(data.get("operator") or {"kind": "zero"})
    _take(op, ("kind", "lambda", "sigma", "diag"), "operator")
    if op.get("kind", "zero") not in OPERATOR_KINDS:
        raise ConfigError(f"operator.kind must be one of {OPERATOR_KINDS}")
    for key in ("lambda", "sigma"):
        if key in op:
            op[key] = _num(op[key], f"operator.{key}", nonneg=True)

    noise = None
    if data.get("noise") is not None:
        n = data["noise"]
        if not isinstance(n, dict):
            n = {"epsilon": n}
        _take(n, ("epsilon", "seed"), "noise")
        noise = NoiseConfig(_num(n.get("epsilon", 0.0), "noise.epsilon", nonneg=True),
                            _seed(n.get("seed"), "noise.seed"))

    batch = None
    if data.get("batch") is not None:
        b = _take(data["batch"], ("size", "epochs", "seed"), "batch")
        batch = BatchConfig(_num(b.get("size"), "batch.size", positive=True, integer=True),
                            _num(b.get("epochs"), "batch.epochs", positive=True, integer=True),
                            _seed(b.get("seed"), "batch.seed"))
        if problem.name != "matrix_factorization":
            raise ConfigError("mini-batches are only defined for matrix_factorization")

    o = _take(data.get("outputs") or {}, ("trace", "format", "plot", "summary"), "outputs")
    outputs = OutputConfig(o.get("trace"), o.get("format", "csv"), o.get("plot"),
                           o.get("summary"))
    if outputs.format not in ("csv", "json"):
        raise ConfigError("outputs.format must be csv or json")

    compare = None
    if data.get("compare") is not None:
        c = _take(data["compare"], ("optimizers", "lr", "out_dir"), "compare")
        opts = [_parse_optimizer(x, f"compare.optimizers[{i}]", need_lr=False)
                for i, x in enumerate(c.get("optimizers") or [])]
        lrs = [_num(x, "compare.lr", positive=True) for x in (c.get("lr") or [])]
        if not opts or not lrs:
            raise ConfigError("compare needs non-empty optimizers and lr lists")
        compare = CompareConfig(opts, lrs, c.get("out_dir"))

    stop = data.get("stop")
    stop_rel = None
    if stop is not None:
        _take(stop, ("rel_loss",), "stop")
        stop_rel = _num(stop["rel_loss"], "stop.rel_loss", positive=True)

    cfg = ExperimentConfig(
        problem=problem, optimizer=optimizer, operator=op,
        iterations=_num(data.get("iterations", 1000), "iterations", nonneg=True,
                        integer=True),
        noise=noise, batch=batch, outputs=outputs, compare=compare,
        name=str(data.get("name", "experiment")), seed=seed, stop_rel_loss=stop_rel,
    )
    _fill_seeds(cfg)
    return cfg


def _parse_optimizer(o, where, need_lr):
    if isinstance(o, str):
        o = {"name": o}
    _take(o, ("name", "lr", "dt", "params"), where)
    name = o.get("name")
    if name not in OPTIMIZERS:
        raise ConfigError(f"{where}.name must be one of {OPTIMIZERS}, got {name!r}")
    lr = o.get("lr", o.get("dt"))
    if lr is not None:
        lr = _num(lr, f"{where}.lr", positive=True)
    elif need_lr and name != "sd":
        raise ConfigError(f"{where}: optimizer {name} needs lr")
    params = dict(o.get("params") or {})
    for key, val in params.items():
        if key not in OPTIMIZER_PARAMS or name not in OPTIMIZER_PARAMS[key]:
            raise ConfigError(f"{where}.params: {key!r} is not a parameter of {name}")
        if key == "restart":
            params[key] = bool(val)
        elif key == "wolfe":
            if val is not None:
                if not isinstance(val, (list, tuple)) or len(val) != 2:
                    raise ConfigError(f"{where}.params.wolfe must be [c1, c2]")
                params[key] = [_num(v, f"{where}.params.wolfe") for v in val]
        else:
            params[key] = _num(val, f"{where}.params.{key}")
    return OptimizerConfig(name, lr, params)


def _check_init(init):
    if init is None or isinstance(init, list):
        return
    if isinstance(init, str):
        if init not in INIT_PRESETS:
            raise ConfigError(f"problem.init preset must be one of {INIT_PRESETS}")
        return
    if isinstance(init, dict):
        _take(init, ("preset", "seed", "low", "high", "scale"), "problem.init")
        if init.get("preset") not in INIT_PRESETS:
            raise ConfigError(f"problem.init preset must be one of {INIT_PRESETS}")
        return
    raise ConfigError("problem.init must be a list, preset name or mapping")


def _fill_seeds(cfg: ExperimentConfig):
    """Fill missing seeds from the top-level seed; fail if still missing."""
    top = cfg.seed
    need = []
    if cfg.problem.name in STOCHASTIC_PROBLEMS:
        if cfg.problem.seed is None:
            cfg.problem.seed = top
        need.append(("problem.seed", cfg.problem.seed))
    init = cfg.problem.init
    preset = init if isinstance(init, str) else (init or {}).get("preset") \
        if isinstance(init, dict) else None
    if preset in ("box-random", "random"):
        if not isinstance(init, dict):
            init = cfg.problem.init = {"preset": preset}
        if init.get("seed") is None:
            init["seed"] = top
        need.append(("problem.init.seed", init["seed"]))
    if cfg.noise is not None and cfg.noise.epsilon > 0:
        if cfg.noise.seed is None:
            cfg.noise.seed = top
        need.append(("noise.seed", cfg.noise.seed))
    if cfg.batch is not None:
        if cfg.batch.seed is None:
            cfg.batch.seed = top
        need.append(("batch.seed", cfg.batch.seed))
    for where, value in need:
        if value is None:
            raise ConfigError(f"{where} is required (or set a top-level seed)")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data)
