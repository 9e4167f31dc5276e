"""Run one experiment or a comparison matrix from a config."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import baselines, problems, sav
from ..objective import (DivergenceError, MiniBatchObjective, NoisyGradient,
                         Objective, evaluate, gradient)
from ..operators import OperatorError, from_spec
from .config import ConfigError, ExperimentConfig, USES_OPERATOR
from .traces import render_plot, write_trace

log = logging.getLogger(__name__)

DT_FLAG = 1e12


@dataclass
class RunResult:
    trace: list
    summary: dict
    theta: np.ndarray
    extras: dict = field(default_factory=dict)


# ----------------------------------------------------------------- building


def build_problem(cfg: ExperimentConfig):
    """Return (objective, data_problem_or_None)."""
    p = cfg.problem
    params = dict(p.params)
    C = cfg.optimizer.params.get("C")
    if C is not None:
        params["shift_C"] = C
    name = "rosenbrock" if p.name == "rosenbrock2d" else p.name
    try:
        if name == "quadratic":
            return problems.QuadraticProblem(p.dimension or 100, **params), None
        if name == "rastrigin":
            return problems.RastriginProblem(p.dimension or 2, **params), None
        if name == "rosenbrock":
            n = 2 if p.name == "rosenbrock2d" else (p.dimension or 2)
            return problems.RosenbrockProblem(n, **params), None
        if name == "least_squares":
            return problems.LeastSquaresProblem(**params), None
        if name == "polynomial":
            return problems.SeparablePolynomial(n=p.dimension or 1, **params), None
        if name == "phase_retrieval":
            shape = params.pop("shape", p.dimension or 64)
            pr = problems.PhaseRetrievalProblem(shape, seed=p.seed, **params)
            return pr, pr
        if name == "matrix_factorization":
            path = params.pop("ratings_path", None)
            if path is not None:
                mf = problems.load_ratings(path, seed=p.seed, **params)
            else:
                m = params.pop("users", 200)
                n = params.pop("items", 300)
                d_true = params.pop("d_true", params.get("d", 8))
                mf = problems.synth_ratings(m, n, d_true, p.seed, **params)
            return mf.objective(), mf
    except TypeError as exc:
        raise ConfigError(f"problem.params: {exc}") from None
    raise ConfigError(f"unknown problem {p.name!r}")


def initial_point(cfg: ExperimentConfig, obj: Objective, data) -> np.ndarray:
    init = cfg.problem.init
    n = obj.dimension
    if init is None:
        init = "random" if cfg.problem.name in ("phase_retrieval",
                                                 "matrix_factorization") else "zeros"
        if init == "random":
            raise ConfigError("problem.init is required for this problem")
    if isinstance(init, list):
        theta = np.asarray(init, dtype=float).ravel()
        if theta.size == 1 and n > 1:
            theta = np.full(n, theta[0])
        if theta.shape != (n,):
            raise ConfigError(f"problem.init has length {theta.size}, expected {n}")
        return theta
    spec = {"preset": init} if isinstance(init, str) else dict(init)
    preset = spec["preset"]
    if preset == "ones":
        return np.ones(n)
    if preset == "zeros":
        return np.zeros(n)
    if preset == "rosenbrock-2d-start":
        if n != 2:
            raise ConfigError("rosenbrock-2d-start needs a 2-D problem")
        return np.array([-3.0, -4.0])
    if preset == "box-random":
        lo, hi = getattr(obj, "domain", (-1.0, 1.0))
        lo = float(spec.get("low", lo))
        hi = float(spec.get("high", hi))
        return np.random.default_rng(spec["seed"]).uniform(lo, hi, n)
    if preset == "random":
        if data is not None and hasattr(data, "random_init"):
            kw = {"scale": float(spec["scale"])} if "scale" in spec else {}
            return data.random_init(spec["seed"], **kw)
        scale = float(spec.get("scale", 1.0))
        return scale * np.random.default_rng(spec["seed"]).standard_normal(n)
    raise ConfigError(f"unknown init preset {preset!r}")


def build_operator(cfg: ExperimentConfig, obj: Objective):
    try:
        return from_spec(cfg.operator, obj.dimension,
                         hessian_diag=obj.hessian_diagonal(),
                         blocks=obj.operator_blocks())
    except OperatorError as exc:
        raise ConfigError(f"operator: {exc}") from None


# ------------------------------------------------------------------ drivers


class _Tap(Objective):
    """Forwards to an objective and remembers the last gradient it returned."""

    def __init__(self, base):
        self.base = base
        self.dimension = base.dimension
        self.shift_C = base.shift_C
        self.supports_quartic = base.supports_quartic
        self.last_grad = None

    def value(self, theta):
        return self.base.value(theta)

    def gradient(self, theta):
        self.last_grad = self.base.gradient(theta)
        return self.last_grad

    def directional_quartic(self, theta, d):
        return self.base.directional_quartic(theta, d)


class Driver:
    """Uniform (init, step, restart) interface over all optimizers."""

    def __init__(self, cfg: ExperimentConfig, op):
        o = cfg.optimizer
        self.name = o.name
        self.lr = o.lr
        self.params = o.params
        self.op = op
        if self.name not in USES_OPERATOR and cfg.operator.get("kind", "zero") != "zero":
            raise ConfigError(f"optimizer {self.name} does not use an operator")
        pr = self.params
        self.C_g = pr.get("C_g", 1.0)
        self.wolfe = pr.get("wolfe")
        try:
            self.relax = sav.RelaxParams(pr.get("eta", 0.99))
            self.q = sav.QParams(pr.get("q", 0.5), bool(pr.get("restart", False)))
            if self.name == "adaptive_rsav":
                self.adapt = sav.AdaptiveParams(self.lr, min(pr.get("dt_min", 1e-6), self.lr),
                                                pr.get("rho", 1.1), pr.get("gamma", 0.9))
        except ValueError as exc:
            raise ConfigError(f"optimizer.params: {exc}") from None

    def init(self, theta, obj):
        n = self.name
        if n == "nag":
            return baselines.NagState.start(theta, self.lr, self.params.get("momentum", 0.9))
        if n == "adam":
            pr = self.params
            return baselines.AdamState.start(theta, self.lr, pr.get("beta1", 0.9),
                                             pr.get("beta2", 0.999), pr.get("eps", 1e-8))
        if n in ("gd", "sd"):
            return np.array(theta, dtype=float)
        if n == "legacy_sav":
            return sav.init_legacy_state(obj, self.op, theta, self.lr, self.C_g)
        q = self.q.q if n in ("rsavq", "linesearch_sav") else 0.5
        return sav.init_state(obj, theta, self.lr, q)

    def theta(self, state):
        return state if isinstance(state, np.ndarray) else state.theta

    def restart(self, state, obj):
        """Re-anchor r to the current (batch) objective."""
        if not isinstance(state, sav.SavState) or self.name == "adaptive_rsav":
            return state
        if self.name == "legacy_sav":
            fresh = sav.init_legacy_state(obj, self.op, state.theta, state.dt, self.C_g)
        else:
            q = self.q.q if self.name in ("rsavq", "linesearch_sav") else 0.5
            fresh = sav.init_state(obj, state.theta, state.dt, q)
        return replace(state, r=fresh.r)

    def step(self, state, obj, k, batch_restart=False):
        n = self.name
        if n == "sav":
            return sav.modified_sav_step(state, obj, self.op)
        if n == "savgd":
            return sav.savgd_step(state, obj)
        if n == "msav":
            return sav.msav_step(state, obj, self.op)
        if n == "legacy_sav":
            return sav.legacy_sav_step(state, obj, self.op, self.C_g)
        if n == "rsav":
            return sav.rsav_step(state, obj, self.op, self.relax)
        if n == "adaptive_rsav":
            return sav.adaptive_rsav_step(state, obj, self.op, self.relax, self.adapt,
                                          restart=batch_restart)
        if n == "rsavq":
            return sav.rsavq_step(state, obj, self.op, self.q)
        if n == "linesearch_sav":
            return sav.linesearch_sav_step(state, obj, self.op,
                                           sav.QParams(self.q.q, True), wolfe=self.wolfe)
        # baselines: record f and the gradient the update actually used
        tap = _Tap(obj)
        f = evaluate(obj, self.theta(state))
        alpha = self.lr
        if n == "gd":
            new = baselines.gd_step(state, tap, self.op, self.lr)
        elif n == "nag":
            new = baselines.nag_step(state, tap)
        elif n == "adam":
            new = baselines.adam_step(state, tap)
        elif n == "sd":
            new, alpha = baselines.steepest_descent_step(state, tap)
        else:
            raise ConfigError(f"unknown optimizer {n!r}")
        g = tap.last_grad
        rec = sav.TraceRecord(k, f, dt=self.lr if self.lr is not None else float("nan"),
                              alpha=alpha, grad_norm=float(np.linalg.norm(g)))
        return new, rec

    def final_record(self, state, obj, k):
        theta = self.theta(state)
        f = evaluate(obj, theta)
        # the exact gradient, so the final record draws no noise
        base = obj.base if isinstance(obj, NoisyGradient) else obj
        rec = sav.TraceRecord(k, f, grad_norm=float(np.linalg.norm(gradient(base, theta))))
        if isinstance(state, sav.SavState):
            rec.r = state.r
            rec.dt = state.dt
            q = self.q.q if self.name in ("rsavq", "linesearch_sav") else 0.5
            if self.name != "legacy_sav":
                rec.indicator = state.r / (f + obj.shift_C) ** q
        elif self.lr is not None:
            rec.dt = self.lr
        return rec


# ------------------------------------------------------------------ running

_RUNTIME_ERRORS = (sav.LowerBoundError, sav.WolfeError, ValueError, OperatorError)


def _failed_record(k, f, status):
    return sav.TraceRecord(k, f, status=status)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunResult:
    """Run a config. Divergence and runtime failures end the run and are
    recorded in the trace and summary; config problems raise ConfigError."""
    if cfg.optimizer.lr is None and cfg.optimizer.name != "sd":
        raise ConfigError(f"optimizer {cfg.optimizer.name} needs lr "
                          "(this config only sets lr under compare)")
    obj, data = build_problem(cfg)
    theta0 = initial_point(cfg, obj, data)
    op = build_operator(cfg, obj)
    driver = Driver(cfg, op)
    if cfg.noise is not None and cfg.noise.epsilon > 0:
        obj = NoisyGradient(obj, cfg.noise.epsilon, cfg.noise.seed)

    start = time.perf_counter()
    trace: list = []
    extras: dict = {}
    status = "ok"
    state = None
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        try:
            state = driver.init(theta0, obj)
            if cfg.batch is not None:
                state, status = _run_batches(cfg, driver, data, state, trace, extras)
            else:
                state, status = _run_full(cfg, driver, obj, state, trace)
        except ConfigError:
            raise
        except DivergenceError:
            status = "diverge"
            trace.append(_failed_record(len(trace), float("nan"), status))
        except _RUNTIME_ERRORS as exc:
            status = "error"
            extras["error"] = str(exc)
            trace.append(_failed_record(len(trace), float("nan"), status))

    elapsed = time.perf_counter() - start
    theta = driver.theta(state) if state is not None else theta0
    finite = [r.f for r in trace if math.isfinite(r.f)]
    dts = [r.dt for r in trace if math.isfinite(r.dt)]
    summary = {
        "name": cfg.name,
        "problem": cfg.problem.name,
        "optimizer": cfg.optimizer.name,
        "lr": cfg.optimizer.lr,
        "status": status,
        "final_loss": trace[-1].f if status == "ok" else float("nan"),
        "last_finite_loss": finite[-1] if finite else float("nan"),
        "initial_loss": trace[0].f if trace else float("nan"),
        "iterations": max(0, len(trace) - 1),
        "wall_time": elapsed,
        "dt_flagged": any(d > DT_FLAG for d in dts),
    }
    if summary["dt_flagged"]:
        log.warning("%s: step size exceeded %.0e", cfg.name, DT_FLAG)
    summary.update(extras)
    result = RunResult(trace, summary, theta, extras)
    if write:
        write_outputs(cfg, result)
    return result


def _run_full(cfg, driver, obj, state, trace):
    f0 = None
    for k in range(cfg.iterations):
        state, rec = driver.step(state, obj, k)
        trace.append(rec)
        if f0 is None:
            f0 = rec.f
        if cfg.stop_rel_loss is not None and f0 > 0 and rec.f / f0 < cfg.stop_rel_loss:
            break
    trace.append(driver.final_record(state, obj, len(trace)))
    return state, "ok"


def _run_batches(cfg, driver, data, state, trace, extras):
    sampler = MiniBatchObjective(data, cfg.batch.size, cfg.batch.seed)
    full = data.objective()
    epoch_losses, test_errors = [], []
    k = 0
    for _ in range(cfg.batch.epochs):
        losses = []
        for idx in sampler.epoch():
            obj = sampler.batch(idx)
            state = driver.restart(state, obj)
            state, rec = driver.step(state, obj, k, batch_restart=True)
            trace.append(rec)
            losses.append(rec.f)
            k += 1
        epoch_losses.append(float(np.mean(losses)))
        test_errors.append(data.test_error(driver.theta(state)))
    trace.append(driver.final_record(state, full, k))
    extras["epoch_losses"] = epoch_losses
    extras["test_errors"] = test_errors
    return state, "ok"


def write_outputs(cfg: ExperimentConfig, result: RunResult):
    out = cfg.outputs
    if out.trace:
        write_trace(result.trace, out.trace, out.format)
    if out.plot:
        render_plot([(f"{cfg.optimizer.name} lr={cfg.optimizer.lr:g}"
                      if cfg.optimizer.lr else cfg.optimizer.name, result.trace)],
                    out.plot, title=cfg.name)
    if out.summary:
        import json
        path = Path(out.summary)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(result.summary, indent=1, default=float) + "\n")


# ------------------------------------------------------------------ compare


def _cell(value, status):
    return "diverge" if status == "diverge" else ("error" if status == "error"
                                                   else f"{value:.4g}")


def compare(cfg: ExperimentConfig, write: bool = True):
    """Run every optimizer x step-size cell. Returns (results, table_text)."""
    if cfg.compare is None:
        raise ConfigError("config has no compare section")
    out_dir = Path(cfg.compare.out_dir) if cfg.compare.out_dir else None
    results = {}
    for opt in cfg.compare.optimizers:
        for lr in cfg.compare.lrs:
            cell = cfg.with_optimizer(replace(opt, lr=lr))
            cell.name = f"{cfg.name}:{opt.name}:{lr:g}"
            cell.outputs = replace(cell.outputs, plot=None, summary=None,
                                   trace=str(out_dir / f"{opt.name}_lr{lr:g}.{cell.outputs.format}")
                                   if out_dir and write else None)
            results[(opt.name, lr)] = run_experiment(cell, write=write)
    table = summary_table(cfg, results)
    if out_dir and write:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "summary.md").write_text(table + "\n")
        render_plot([(f"{name} lr={lr:g}", r.trace) for (name, lr), r in results.items()],
                    out_dir / "loss.svg", title=cfg.name)
    return results, table


def summary_table(cfg, results) -> str:
    lrs = cfg.compare.lrs
    head = "| optimizer | " + " | ".join(f"lr={lr:g}" for lr in lrs) + " |"
    lines = [head, "|" + "---|" * (len(lrs) + 1)]
    for opt in cfg.compare.optimizers:
        cells = []
        for lr in lrs:
            r = results[(opt.name, lr)]
            cells.append(_cell(r.summary["final_loss"], r.summary["status"]))
        lines.append(f"| {opt.name} | " + " | ".join(cells) + " |")
    return "\n".join(lines)
