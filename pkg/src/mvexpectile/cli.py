"""Command-line front end: JSON config plus flag overrides, CSV output.

Commands
--------
solve        Newton solve of a catalogued model at one level.
empirical    empirical-score minimization over a CSV sample.
estimate     Robbins-Monro estimate with replicated runs.
sweep-alpha  analytic solves over a level grid.
sweep-steps  step-schedule comparison against the Newton oracle.
props        randomized coherence-property suite.

Exit codes: 0 converged / all passed, 2 configuration error, 3 solver
non-convergence or failed properties. Floats are written with their
shortest round-trip representation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .core import Level, SampleMatrix, ScoringMatrix
from .distributions import Exponential, Fgm, Independence, ModelSpec, Pareto
from .deterministic import GradientConfig, NewtonConfig, solve_analytic, solve_empirical
from .stochastic import RmConfig, StepSchedule, rm_estimate, step_schedule_sweep
from .analysis import asymptotic_sweep
from .properties import run_property_suite

__all__ = ["RunConfig", "ConfigError", "parse_config", "run", "main"]

COMMANDS = ("solve", "empirical", "estimate", "sweep-alpha", "sweep-steps", "props")
SEED_ENV_VAR = "MVEXPECTILE_SEED"


class ConfigError(ValueError):
    """Configuration problem; carries the offending field name."""

    def __init__(self, fieldname: str, message: str):
        super().__init__(f"config field '{fieldname}': {message}")
        self.fieldname = fieldname


@dataclass
class RunConfig:
    command: str
    model: ModelSpec | None = None
    sample: SampleMatrix | None = None
    sigma: ScoringMatrix | None = None
    alpha: float | None = None
    alphas: list = field(default_factory=list)
    out: str | None = None
    trace_out: str | None = None
    seed: int = 0
    tol: float = 1e-10
    max_iter: int = 100
    iterations: int = 100_000
    runs: int = 100
    schedule: StepSchedule = field(default_factory=StepSchedule)
    schedules: list = field(default_factory=list)
    x0: list | None = None
    instances: int = 50
    prop_tol: float = 1e-6


def _parse_marginals(spec: str):
    spec = spec.strip()
    try:
        name, _, inner = spec.partition("(")
        if not inner.endswith(")"):
            raise ValueError("missing closing parenthesis")
        values = [float(v) for v in inner[:-1].split(",") if v.strip()]
        name = name.strip().lower()
        if name in ("exp", "exponential"):
            if not values:
                raise ValueError("no rates given")
            return tuple(Exponential(rate=v) for v in values)
        if name == "pareto":
            if len(values) < 2:
                raise ValueError("pareto needs a shape followed by one scale per coordinate")
            shape = values[0]
            return tuple(Pareto(shape=shape, scale=v) for v in values[1:])
        raise ValueError(f"unknown family '{name}'")
    except ValueError as exc:
        raise ConfigError("model", f"cannot parse '{spec}': {exc}") from exc


def _parse_copula(spec: str):
    spec = spec.strip().lower()
    if spec in ("independence", "indep", ""):
        return Independence()
    if spec.startswith("fgm"):
        inner = spec[3:].strip("() ")
        try:
            return Fgm(theta=float(inner))
        except ValueError as exc:
            raise ConfigError("copula", f"cannot parse '{spec}': {exc}") from exc
    raise ConfigError("copula", f"unknown copula '{spec}'")


def _parse_sigma(spec, d: int) -> ScoringMatrix:
    try:
        if isinstance(spec, str):
            s = spec.strip().lower()
            if s == "ones":
                return ScoringMatrix.ones(d)
            if s == "identity":
                return ScoringMatrix.identity(d)
            spec = json.loads(spec)
        return ScoringMatrix(np.asarray(spec, dtype=float))
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError("sigma", str(exc)) from exc


def _parse_alpha_grid(spec):
    if isinstance(spec, (list, tuple)):
        values = [float(v) for v in spec]
    else:
        s = str(spec).strip()
        if ":" in s:
            start, stop, count = s.split(":")
            values = list(np.linspace(float(start), float(stop), int(count)))
        else:
            values = [float(v) for v in s.split(",") if v.strip()]
    if not values:
        raise ConfigError("alphas", "empty level grid")
    return values


def _parse_schedule(spec) -> StepSchedule:
    try:
        if isinstance(spec, StepSchedule):
            return spec
        if isinstance(spec, dict):
            return StepSchedule(**{k: float(v) for k, v in spec.items()})
        parts = [float(v) for v in str(spec).split(",")]
        if len(parts) != 3:
            raise ValueError("expected 'a,b,kappa'")
        return StepSchedule(a=parts[0], b=parts[1], kappa=parts[2])
    except (TypeError, ValueError) as exc:
        raise ConfigError("schedule", str(exc)) from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvexpectile", description="multivariate expectile solvers and checks"
    )
    parser.add_argument("command", nargs="?", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file; flags override its keys")
    parser.add_argument("--model", help="marginals, e.g. exp(0.05,0.25) or pareto(2,10,20)")
    parser.add_argument("--copula", help="independence (default) or fgm(theta)")
    parser.add_argument("--sigma", help="'ones', 'identity', or a JSON matrix")
    parser.add_argument("--data", help="headerless CSV of n rows x d columns")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--alphas", help="comma list or start:stop:count grid")
    parser.add_argument("--out", help="result CSV path")
    parser.add_argument("--trace", dest="trace", help="opt-in iterate trace CSV path")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--max-iter", dest="max_iter", type=int)
    parser.add_argument("--iterations", type=int, help="Robbins-Monro steps per run")
    parser.add_argument("--runs", type=int, help="independent Robbins-Monro replicas")
    parser.add_argument("--schedule", help="step schedule 'a,b,kappa'")
    parser.add_argument("--schedules", help="semicolon-separated schedules for sweep-steps")
    parser.add_argument("--x0", help="comma-separated starting point")
    parser.add_argument("--instances", type=int, help="property-suite instance count")
    parser.add_argument("--prop-tol", dest="prop_tol", type=float)
    return parser


def parse_config(source) -> RunConfig:
    """Build a validated RunConfig from CLI flags, a config path, or both.

    ``source`` is an argv list (e.g. ``["solve", "--alpha", "0.7"]``) or a
    path to a JSON config file. Flags override config-file keys; unknown
    config keys are rejected.
    """
    if isinstance(source, (str, os.PathLike)):
        argv = ["--config", str(source)]
    else:
        argv = list(source)
    ns = _build_parser().parse_args(argv)

    raw: dict = {}
    if ns.config:
        if not os.path.exists(ns.config):
            raise ConfigError("config", f"file not found: {ns.config}")
        try:
            with open(ns.config) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be a JSON object")

    known = {
        "command", "model", "copula", "sigma", "data", "alpha", "alphas", "out",
        "trace", "seed", "tol", "max_iter", "iterations", "runs", "schedule",
        "schedules", "x0", "instances", "prop_tol",
    }
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown configuration key")

    def pick(name, default=None):
        flag = getattr(ns, name, None)
        return flag if flag is not None else raw.get(name, default)

    command = ns.command or raw.get("command")
    if command not in COMMANDS:
        raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}, got {command!r}")

    seed = pick("seed")
    if seed is None:
        seed = int(os.environ.get(SEED_ENV_VAR, "0"))
    cfg = RunConfig(
        command=command,
        out=pick("out"),
        trace_out=pick("trace"),
        seed=int(seed),
        tol=float(pick("tol", 1e-10)),
        max_iter=int(pick("max_iter", 100)),
        iterations=int(pick("iterations", 100_000)),
        runs=int(pick("runs", 100)),
        instances=int(pick("instances", 50)),
        prop_tol=float(pick("prop_tol", 1e-6)),
    )
    if cfg.tol <= 0:
        raise ConfigError("tol", "must be positive")

    alpha = pick("alpha")
    if alpha is not None:
        try:
            cfg.alpha = Level(float(alpha)).alpha
        except ValueError as exc:
            raise ConfigError("alpha", str(exc)) from exc
    alphas = pick("alphas")
    if alphas is not None:
        cfg.alphas = _parse_alpha_grid(alphas)
        for a in cfg.alphas:
            try:
                Level(a)
            except ValueError as exc:
                raise ConfigError("alphas", str(exc)) from exc

    model_spec = pick("model")
    if model_spec is not None:
        marginals = _parse_marginals(str(model_spec))
        copula = _parse_copula(str(pick("copula", "independence")))
        try:
            cfg.model = ModelSpec(marginals, copula)
        except ValueError as exc:
            raise ConfigError("model", str(exc)) from exc

    data_path = pick("data")
    if data_path is not None:
        if not os.path.exists(data_path):
            raise ConfigError("data", f"file not found: {data_path}")
        try:
            rows = np.loadtxt(data_path, delimiter=",", ndmin=2)
            cfg.sample = SampleMatrix(rows)
        except ValueError as exc:
            raise ConfigError("data", str(exc)) from exc

    sched = pick("schedule")
    if sched is not None:
        cfg.schedule = _parse_schedule(sched)
    schedules = pick("schedules")
    if schedules is not None:
        if isinstance(schedules, (list, tuple)):
            cfg.schedules = [_parse_schedule(s) for s in schedules]
        else:
            cfg.schedules = [_parse_schedule(s) for s in str(schedules).split(";") if s.strip()]

    x0 = pick("x0")
    if x0 is not None:
        if isinstance(x0, (list, tuple)):
            cfg.x0 = [float(v) for v in x0]
        else:
            cfg.x0 = [float(v) for v in str(x0).split(",")]

    needs_model = command in ("solve", "estimate", "sweep-alpha", "sweep-steps")
    if needs_model and cfg.model is None:
        raise ConfigError("model", f"command '{command}' requires a model")
    if command == "empirical" and cfg.sample is None:
        raise ConfigError("data", "command 'empirical' requires a data file")
    if command in ("solve", "empirical", "estimate", "sweep-steps") and cfg.alpha is None:
        raise ConfigError("alpha", f"command '{command}' requires a level")
    if command == "sweep-alpha" and not cfg.alphas:
        raise ConfigError("alphas", "command 'sweep-alpha' requires a level grid")
    if command == "sweep-steps" and not cfg.schedules:
        raise ConfigError("schedules", "command 'sweep-steps' requires step schedules")

    if command != "props":
        d = cfg.model.d if cfg.model is not None else cfg.sample.d
        sigma_spec = pick("sigma")
        if sigma_spec is None:
            raise ConfigError("sigma", f"command '{command}' requires a scoring matrix")
        cfg.sigma = _parse_sigma(sigma_spec, d)
        if cfg.sigma.dim != d:
            raise ConfigError("sigma", f"dimension {cfg.sigma.dim} does not match d={d}")
    return cfg


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


def _write_csv(path, header, data_rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in data_rows:
            writer.writerow([_fmt(v) for v in row])


def _result_header(d):
    return ["alpha"] + [f"x_{k + 1}" for k in range(d)] + ["residual_norm", "iterations"]


def _result_row(alpha, result):
    return [alpha, *result.point, result.residual_norm, result.iterations]


def _write_trace(path, trace, d):
    rows = [[i, *pt] for i, pt in enumerate(trace)]
    _write_csv(path, ["iteration"] + [f"x_{k + 1}" for k in range(d)], rows)


def run(cfg: RunConfig) -> int:
    """Dispatch a validated config; writes CSV output and prints a one-line
    summary. Returns the process exit code."""
    if cfg.command == "solve":
        result = solve_analytic(
            cfg.model,
            cfg.sigma,
            Level(cfg.alpha),
            NewtonConfig(tol=cfg.tol, max_iter=cfg.max_iter, record_trace=bool(cfg.trace_out)),
            x0=np.asarray(cfg.x0, dtype=float) if cfg.x0 else None,
        )
        if cfg.out:
            _write_csv(cfg.out, _result_header(cfg.model.d), [_result_row(cfg.alpha, result)])
        if cfg.trace_out and result.trace:
            _write_trace(cfg.trace_out, result.trace, cfg.model.d)
        point = ", ".join(f"{v:.6g}" for v in result.point)
        print(
            f"solve: alpha={cfg.alpha} point=({point}) residual={result.residual_norm:.3e} "
            f"iterations={result.iterations} converged={result.converged}"
        )
        return 0 if result.converged else 3

    if cfg.command == "empirical":
        result = solve_empirical(
            cfg.sample,
            cfg.sigma,
            Level(cfg.alpha),
            GradientConfig(tol=cfg.tol, record_trace=bool(cfg.trace_out)),
        )
        if cfg.out:
            _write_csv(cfg.out, _result_header(cfg.sample.d), [_result_row(cfg.alpha, result)])
        if cfg.trace_out and result.trace:
            _write_trace(cfg.trace_out, result.trace, cfg.sample.d)
        point = ", ".join(f"{v:.6g}" for v in result.point)
        print(
            f"empirical: n={cfg.sample.n} alpha={cfg.alpha} point=({point}) "
            f"residual={result.residual_norm:.3e} converged={result.converged}"
        )
        return 0 if result.converged else 3

    if cfg.command == "estimate":
        record_every = max(1, cfg.iterations // 500) if cfg.trace_out else 0
        est = rm_estimate(
            cfg.model,
            cfg.sigma,
            Level(cfg.alpha),
            RmConfig(
                schedule=cfg.schedule,
                iterations=cfg.iterations,
                runs=cfg.runs,
                seed=cfg.seed,
                x0=tuple(cfg.x0) if cfg.x0 else None,
                record_every=record_every,
            ),
        )
        result = est.result
        if cfg.out:
            _write_csv(cfg.out, _result_header(cfg.model.d), [_result_row(cfg.alpha, result)])
        if cfg.trace_out and est.run_traces is not None:
            mean_trace = est.run_traces.mean(axis=1)
            rows = [[step, *pt] for step, pt in zip(est.checkpoint_steps, mean_trace)]
            _write_csv(
                cfg.trace_out,
                ["step"] + [f"x_{k + 1}" for k in range(cfg.model.d)],
                rows,
            )
        point = ", ".join(f"{v:.6g}" for v in result.point)
        print(
            f"estimate: alpha={cfg.alpha} runs={cfg.runs} steps={cfg.iterations} "
            f"point=({point}) validation_residual={result.residual_norm:.3e} "
            f"diverged={int(est.diverged.sum())}"
        )
        return 0 if result.converged else 3

    if cfg.command == "sweep-alpha":
        grid = sorted(cfg.alphas)
        sweep = asymptotic_sweep(
            cfg.model, cfg.sigma, grid, NewtonConfig(tol=cfg.tol, max_iter=cfg.max_iter)
        )
        rows = [_result_row(a, r) for a, r in sweep]
        if cfg.out:
            _write_csv(cfg.out, _result_header(cfg.model.d), rows)
        bad = sum(1 for _, r in sweep if not r.converged)
        print(f"sweep-alpha: {len(rows)} levels, non-converged={bad}")
        return 0 if bad == 0 else 3

    if cfg.command == "sweep-steps":
        rm_cfg = RmConfig(
            iterations=cfg.iterations, runs=cfg.runs, seed=cfg.seed,
            x0=tuple(cfg.x0) if cfg.x0 else None,
        )
        rows, _ = step_schedule_sweep(
            cfg.model, cfg.sigma, Level(cfg.alpha), cfg.schedules, rm_cfg
        )
        d = cfg.model.d
        header = (
            ["a", "b", "kappa"]
            + [f"x_{k + 1}" for k in range(d)]
            + [f"abs_err_{k + 1}" for k in range(d)]
            + ["max_rel_error"]
        )
        table = [
            [r["a"], r["b"], r["kappa"], *r["point"], *r["abs_error"], r["max_rel_error"]]
            for r in rows
        ]
        if cfg.out:
            _write_csv(cfg.out, header, table)
        best = min(rows, key=lambda r: r["max_rel_error"])
        print(
            f"sweep-steps: {len(rows)} schedules; best a={best['a']} b={best['b']} "
            f"kappa={best['kappa']} max_rel_error={best['max_rel_error']:.3e}"
        )
        return 0

    if cfg.command == "props":
        reports = run_property_suite(seed=cfg.seed, instances=cfg.instances, tol=cfg.prop_tol)
        rows = [
            [r.name, r.instances, r.skipped, r.max_violation, r.tol, r.passed] for r in reports
        ]
        if cfg.out:
            _write_csv(cfg.out, ["property", "instances", "skipped", "max_violation", "tol", "passed"], rows)
        failed = [r.name for r in reports if not r.passed]
        for r in reports:
            status = "pass" if r.passed else "FAIL"
            print(f"props: {r.name}: {status} (max violation {r.max_violation:.3e}, tol {r.tol})")
        return 0 if not failed else 3

    raise ConfigError("command", f"unhandled command {cfg.command!r}")


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
