"""Robbins-Monro stochastic approximation of the matrix expectile from
streaming model samples, with independent replicated runs and averaging.

The iteration is x_{n+1} = x_n + gamma_n Z_{n+1}, where Z is the
single-observation optimality residual and gamma_n = a / (b + n)^kappa.
Runs are vectorized: all replicas advance together, each consuming its own
generator stream spawned from the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ExpectileResult, Level, SampleMatrix, ScoringMatrix, residual

__all__ = ["StepSchedule", "RmConfig", "RmEstimate", "rm_estimate", "step_schedule_sweep"]

_CHUNK = 20_000


@dataclass(frozen=True)
class StepSchedule:
    """Step sequence gamma_n = a / (b + n)^kappa, n >= 1.

    kappa in (1/2, 1] makes the sequence decrease to zero with divergent sum
    and convergent sum of squares, as the convergence theorem requires.
    """

    a: float = 1.0
    b: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if not self.a > 0.0:
            raise ValueError("schedule requires a > 0")
        if not self.b >= 0.0:
            raise ValueError("schedule requires b >= 0")
        if not 0.5 < self.kappa <= 1.0:
            raise ValueError(f"schedule requires kappa in (1/2, 1], got {self.kappa}")

    def gamma(self, n: int) -> float:
        return self.a / (self.b + n) ** self.kappa


@dataclass(frozen=True)
class RmConfig:
    schedule: StepSchedule = StepSchedule()
    iterations: int = 100_000
    runs: int = 100
    seed: int = 0
    x0: tuple | None = None  # default: vector of marginal means
    record_every: int = 0  # 0 disables iterate traces
    divergence_guard: float = 1e12
    clip_box: tuple | None = None  # ((lo_1..lo_d), (hi_1..hi_d)); off by default
    validation_draws: int = 100_000

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")


@dataclass
class RmEstimate:
    """Averaged estimate plus the per-run outcomes behind it."""

    result: ExpectileResult
    run_points: np.ndarray  # (runs, d) final iterates
    diverged: np.ndarray  # (runs,) flags for aborted runs
    checkpoint_steps: np.ndarray | None = None
    run_traces: np.ndarray | None = field(default=None, repr=False)  # (n_ckpt, runs, d)


def _observation(x, draws, pi, alpha):
    diff = draws - x
    pos = np.maximum(diff, 0.0)
    neg = np.maximum(-diff, 0.0)
    return alpha * (pos @ pi) * (diff > 0.0) - (1.0 - alpha) * (neg @ pi) * (diff < 0.0)


def rm_estimate(model, sigma: ScoringMatrix, level, config: RmConfig | None = None) -> RmEstimate:
    """Robbins-Monro estimate of the matrix expectile of a samplable model.

    Each run iterates x_{n+1} = x_n + gamma_n Phi(x_n, X_{n+1}) on its own
    observation stream; the returned point is the across-run average of the
    final iterates and its residual is evaluated on an independent
    validation sample. A run whose iterate norm passes the divergence guard
    is frozen and flagged; it is excluded from the average.
    """
    config = config or RmConfig()
    lv = Level.of(level)
    alpha = lv.alpha
    d = model.d
    if sigma.dim != d:
        raise ValueError(f"scoring matrix dim {sigma.dim} does not match model d={d}")
    pi = sigma.entries
    runs, total = config.runs, config.iterations

    seeds = np.random.SeedSequence(config.seed).spawn(runs + 1)
    gens = [np.random.default_rng(s) for s in seeds[:runs]]

    if config.x0 is not None:
        x0 = np.asarray(config.x0, dtype=float)
        if x0.shape != (d,):
            raise ValueError(f"x0 must have length {d}")
    else:
        x0 = model.means()
    x = np.tile(x0, (runs, 1))
    alive = np.ones(runs, dtype=bool)

    if config.clip_box is not None:
        lo = np.asarray(config.clip_box[0], dtype=float)
        hi = np.asarray(config.clip_box[1], dtype=float)
    record = config.record_every
    ckpt_steps: list[int] = []
    traces: list[np.ndarray] = []

    n = 0
    done = 0
    while done < total:
        m = min(_CHUNK, total - done)
        draws = np.stack([model.sample_rows(m, g) for g in gens], axis=1)  # (m, runs, d)
        for t in range(m):
            n += 1
            z = np.where(alive[:, None], _observation(x, draws[t], pi, alpha), 0.0)
            x += config.schedule.gamma(n) * z
            if config.clip_box is not None:
                np.clip(x, lo, hi, out=x)
            np.logical_and(alive, np.max(np.abs(x), axis=1) <= config.divergence_guard, out=alive)
            if record and n % record == 0:
                ckpt_steps.append(n)
                traces.append(x.copy())
        done += m

    run_points = x.copy()
    diverged = ~alive
    if alive.any():
        point = run_points[alive].mean(axis=0)
        validation = SampleMatrix(
            model.sample_rows(config.validation_draws, np.random.default_rng(seeds[runs]))
        )
        res_norm = float(np.max(np.abs(residual(point, validation, sigma, lv))))
    else:
        point = np.full(d, np.nan)
        res_norm = float("inf")
    result = ExpectileResult(
        point=point,
        residual_norm=res_norm,
        iterations=total,
        converged=bool(alive.all()),  # no residual criterion: flags divergence only
    )
    return RmEstimate(
        result=result,
        run_points=run_points,
        diverged=diverged,
        checkpoint_steps=np.array(ckpt_steps) if record else None,
        run_traces=np.stack(traces) if traces else None,
    )


def step_schedule_sweep(
    model,
    sigma: ScoringMatrix,
    level,
    schedules,
    config: RmConfig | None = None,
    oracle=None,
):
    """Compare step schedules on shared observation streams.

    Every schedule is run through :func:`rm_estimate` with the same master
    seed, so all schedules see identical draws. Returns ``(rows, estimates)``
    where each row records the schedule, its averaged estimate, and its
    error against the deterministic oracle (computed by the Newton solver
    when not supplied).
    """
    schedules = list(schedules)
    if len(schedules) < 1:
        raise ValueError("sweep needs at least one schedule")
    config = config or RmConfig()
    if oracle is None:
        from .deterministic import solve_analytic

        oracle = solve_analytic(model, sigma, level).point
    oracle = np.asarray(oracle, dtype=float)
    rows = []
    estimates = []
    for sched in schedules:
        est = rm_estimate(model, sigma, level, config=_with_schedule(config, sched))
        err = np.abs(est.result.point - oracle)
        rows.append(
            {
                "a": sched.a,
                "b": sched.b,
                "kappa": sched.kappa,
                "point": est.result.point,
                "abs_error": err,
                "max_rel_error": float(np.max(err / np.maximum(np.abs(oracle), 1e-300))),
            }
        )
        estimates.append(est)
    return rows, estimates


def _with_schedule(config: RmConfig, schedule: StepSchedule) -> RmConfig:
    from dataclasses import replace

    return replace(config, schedule=schedule)
