"""Deterministic solvers: damped Newton-Raphson on the analytic optimality
systems, empirical-score minimization by gradient descent, and the L^p
expectile front end."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ExpectileResult, Level, SampleMatrix, ScoringMatrix, residual, score
from .distributions import ModelSpec, optimality_residual_fn
from .univariate import univariate_expectile

__all__ = [
    "NewtonConfig",
    "GradientConfig",
    "LpConfig",
    "solve_analytic",
    "solve_empirical",
    "solve_lp",
]


@dataclass(frozen=True)
class NewtonConfig:
    """Newton iteration parameters; the Jacobian is central finite differences
    with relative step ``jacobian_step`` and steps are damped by residual-norm
    backtracking."""

    tol: float = 1e-10
    max_iter: int = 100
    jacobian_step: float = 1e-6
    damping: float = 0.5
    max_halvings: int = 30
    record_trace: bool = False

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class GradientConfig:
    """Descent parameters for the empirical minimizers (Armijo backtracking)."""

    tol: float = 1e-9
    max_iter: int = 50_000
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    record_trace: bool = False


@dataclass(frozen=True)
class LpConfig:
    """Parameters of the L^p solver; p is a real in [1, inf)."""

    p: float
    tol: float = 1e-9
    max_iter: int = 50_000
    record_trace: bool = False

    def __post_init__(self):
        p = float(self.p)
        if not (p >= 1.0 and np.isfinite(p)):
            raise ValueError(f"p={self.p} is not supported; p must be a finite real >= 1")
        object.__setattr__(self, "p", p)


def _fd_jacobian(fun, x, fx, rel_step):
    d = x.size
    jac = np.empty((d, d))
    for k in range(d):
        h = rel_step * max(1.0, abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        jac[:, k] = (fun(xp) - fun(xm)) / (2.0 * h)
    return jac


def _newton(fun, x0, config: NewtonConfig) -> ExpectileResult:
    x = np.asarray(x0, dtype=float).copy()
    fx = fun(x)
    norm = float(np.max(np.abs(fx)))
    trace = [x.copy()] if config.record_trace else None
    best_x, best_norm = x.copy(), norm
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        if norm <= config.tol:
            break
        jac = _fd_jacobian(fun, x, fx, config.jacobian_step)
        try:
            step = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(jac, -fx, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        t = 1.0
        improved = False
        for _ in range(config.max_halvings + 1):
            candidate = x + t * step
            cand_f = fun(candidate)
            cand_norm = float(np.max(np.abs(cand_f)))
            if np.isfinite(cand_norm) and cand_norm < norm:
                x, fx, norm = candidate, cand_f, cand_norm
                improved = True
                break
            t *= config.damping
        if not improved:
            break  # damping exhausted: report the best iterate, do not crash
        if trace is not None:
            trace.append(x.copy())
        if norm < best_norm:
            best_x, best_norm = x.copy(), norm
    if best_norm < norm:
        x, norm = best_x, best_norm
    return ExpectileResult(
        point=x,
        residual_norm=norm,
        iterations=iterations,
        converged=bool(norm <= config.tol),
        trace=trace,
    )


def solve_analytic(
    model: ModelSpec,
    sigma: ScoringMatrix,
    level,
    config: NewtonConfig | None = None,
    x0=None,
) -> ExpectileResult:
    """Expectile of a catalogued model by Newton-Raphson on its closed-form
    optimality system.

    Diagonal scoring matrices reduce coordinatewise to the univariate
    expectile; otherwise the full system is solved with a finite-difference
    Jacobian and residual-norm backtracking, starting from the vector of
    marginal univariate expectiles unless ``x0`` is given.
    """
    config = config or NewtonConfig()
    lv = Level.of(level)
    if sigma.dim != model.d:
        raise ValueError(f"scoring matrix dim {sigma.dim} does not match model d={model.d}")
    fun = optimality_residual_fn(model, sigma, lv)
    if sigma.is_diagonal():
        point = np.array([univariate_expectile(m, lv) for m in model.marginals])
        norm = float(np.max(np.abs(fun(point))))
        return ExpectileResult(
            point=point,
            residual_norm=norm,
            iterations=0,
            converged=bool(norm <= config.tol),
            trace=[point.copy()] if config.record_trace else None,
        )
    if x0 is None:
        x0 = np.array([univariate_expectile(m, lv) for m in model.marginals])
    return _newton(fun, x0, config)


def _nudge_off_ties(x, columns_sorted, direction):
    # Keep iterates off exact sample coordinates so the score stays
    # differentiable at every visited point.
    out = x.copy()
    for k, col in enumerate(columns_sorted):
        pos = np.searchsorted(col, out[k])
        if pos < col.size and col[pos] == out[k]:
            sign = 1.0 if direction[k] >= 0.0 else -1.0
            out[k] += sign * 1e-12 * max(1.0, abs(out[k]))
    return out


def _descend(score_fn, grad_fn, x0, config: GradientConfig, columns_sorted, scale):
    """Armijo-backtracked gradient descent with a Barzilai-Borwein trial step."""
    x = np.asarray(x0, dtype=float).copy()
    g = grad_fn(x)
    fx = score_fn(x)
    trace = [x.copy()] if config.record_trace else None
    step = scale / max(float(np.linalg.norm(g)), 1e-30)
    iterations = 0
    stalled = False
    no_progress = 0
    for iterations in range(1, config.max_iter + 1):
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= 2.0 * config.tol:
            break
        direction = -g
        slope = -float(g @ g)
        t = min(step, 1e12)
        accepted = False
        for _ in range(config.max_backtracks + 1):
            candidate = _nudge_off_ties(x + t * direction, columns_sorted, direction)
            fc = score_fn(candidate)
            if fc <= fx + config.armijo * t * slope:
                accepted = True
                break
            t *= config.backtrack
        if not accepted:
            stalled = True  # flat to line-search resolution
            break
        # plateau at float resolution: the iterate has stopped moving
        if fc >= fx - 1e-15 * max(1.0, abs(fx)):
            no_progress += 1
            if no_progress >= 5:
                stalled = True
                x, fx = candidate, fc
                g = grad_fn(x)
                break
        else:
            no_progress = 0
        g_new = grad_fn(candidate)
        s = candidate - x
        y = g_new - g
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0.0 else t / config.backtrack
        if not np.isfinite(step) or step <= 0.0:
            step = t
        x, g, fx = candidate, g_new, fc
        if trace is not None:
            trace.append(x.copy())
    res_norm = float(np.max(np.abs(g))) / 2.0
    return x, res_norm, iterations, stalled, trace


def _subgradient_box(x, sample: SampleMatrix, sigma: ScoringMatrix, level):
    """Componentwise residual interval [lo, hi] at ``x``.

    With off-diagonal weights the empirical score is not differentiable on
    sample hyperplanes and its minimizer may sit exactly there; the strict
    residual then never vanishes. The subdifferential is an axis-aligned
    box whose residual-space sides are returned here; both collapse to the
    plain residual at non-tied points. Optimality means 0 in [lo_k, hi_k]
    for every k.
    """
    lv = Level.of(level)
    alpha = lv.alpha
    res = residual(x, sample, sigma, lv)
    diff = sample.rows - np.asarray(x, dtype=float)
    tied = diff == 0.0
    if tied.any():
        pos = np.maximum(diff, 0.0)
        neg = np.maximum(-diff, 0.0)
        m = sigma.entries
        c_gain = np.mean((pos @ m) * tied, axis=0)
        c_loss = np.mean((neg @ m) * tied, axis=0)
        lo = res - (1.0 - alpha) * c_loss
        hi = res + alpha * c_gain
    else:
        lo = hi = res
    return lo, hi


def _optimality_gap(lo, hi) -> float:
    return float(np.max(np.maximum(lo, 0.0) + np.maximum(-hi, 0.0)))


def _exact_coordinate_min(x, k, sample: SampleMatrix, sigma: ScoringMatrix, alpha):
    """Exact minimizer of the empirical score along coordinate k.

    Along one coordinate the score is convex piecewise-quadratic with
    breakpoints at the sample values, so the one-dimensional residual is
    decreasing and piecewise linear; its root is either interior to a piece
    (found by interpolation) or at a breakpoint whose residual interval
    straddles zero.
    """
    rows = sample.rows
    pi = sigma.entries
    n = sample.n
    others = np.maximum(rows - x, 0.0) @ pi[k] - pi[k, k] * np.maximum(rows[:, k] - x[k], 0.0)
    others_neg = np.maximum(x - rows, 0.0) @ pi[k] - pi[k, k] * np.maximum(x[k] - rows[:, k], 0.0)
    col = rows[:, k]
    order = np.argsort(col, kind="stable")
    col_s, cg_s, cl_s = col[order], others[order], others_neg[order]
    pkk = pi[k, k]

    values, starts = np.unique(col_s, return_index=True)
    bounds = np.append(starts, n)
    lo_prev = None
    t_prev = None
    for j, v in enumerate(values):
        above = slice(bounds[j + 1], n)
        below = slice(0, starts[j])
        tied = slice(starts[j], bounds[j + 1])
        gain = np.sum(cg_s[above] + pkk * (col_s[above] - v)) / n
        loss = np.sum(cl_s[below] + pkk * (v - col_s[below])) / n
        res_at = alpha * gain - (1.0 - alpha) * loss
        hi = res_at + alpha * np.sum(cg_s[tied]) / n
        lo = res_at - (1.0 - alpha) * np.sum(cl_s[tied]) / n
        if lo <= 0.0 <= hi:
            return v
        if lo <= 0.0:
            # root inside the previous open interval; residual is linear there
            if lo_prev is None:
                return v
            return t_prev + lo_prev * (v - t_prev) / (lo_prev - hi)
        lo_prev, t_prev = lo, v
    return values[-1]


def _coordinate_polish(x, sample, sigma, lv, tol, max_sweeps=200):
    """Cycle exact one-dimensional minimizations until the residual interval
    of every coordinate straddles zero. Axis-aligned kinks make limiting
    directional derivatives additive per coordinate, so coordinatewise
    optimality is global optimality for this score."""
    x = x.copy()
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        lo, hi = _subgradient_box(x, sample, sigma, lv)
        bad = np.maximum(lo, 0.0) + np.maximum(-hi, 0.0) > tol
        if not bad.any():
            break
        for k in np.flatnonzero(bad):
            x[k] = _exact_coordinate_min(x, k, sample, sigma, lv.alpha)
    return x, sweeps


def solve_empirical(
    sample: SampleMatrix,
    sigma: ScoringMatrix,
    level,
    config: GradientConfig | None = None,
) -> ExpectileResult:
    """Minimize the empirical matrix score over sample data.

    Gradient descent on the (convex, continuous) empirical score with
    gradient -2 * residual, initialized at the coordinatewise empirical
    univariate expectile vector, followed by an exact coordinatewise polish
    that also resolves minimizers sitting exactly on sample hyperplanes.
    The reported residual norm is the distance from optimality: the plain
    residual max-norm off sample hyperplanes, the subdifferential-box
    distance on them.
    """
    config = config or GradientConfig()
    lv = Level.of(level)
    if sample.n < 2:
        raise ValueError(f"empirical solve needs at least 2 observations, got n={sample.n}")
    if sigma.dim != sample.d:
        raise ValueError(f"scoring matrix dim {sigma.dim} does not match sample d={sample.d}")
    # Canonical row order makes the solve exactly invariant under permutations
    # of the observations (the estimator only depends on the empirical law).
    order = np.lexsort(sample.rows.T[::-1])
    canonical = SampleMatrix(sample.rows[order])
    columns_sorted = [np.sort(canonical.column(k)) for k in range(canonical.d)]
    x0 = np.array([univariate_expectile(col, lv) for col in columns_sorted])
    scale = max(float(np.max(canonical.rows) - np.min(canonical.rows)), 1.0)

    score_fn = lambda x: score(x, canonical, sigma, lv)
    grad_fn = lambda x: -2.0 * residual(x, canonical, sigma, lv)
    x, _, iterations, _, trace = _descend(score_fn, grad_fn, x0, config, columns_sorted, scale)
    x, sweeps = _coordinate_polish(x, canonical, sigma, lv, config.tol)
    lo, hi = _subgradient_box(x, canonical, sigma, lv)
    gap = _optimality_gap(lo, hi)
    if trace is not None:
        trace.append(x.copy())
    return ExpectileResult(
        point=x,
        residual_norm=gap,
        iterations=iterations + sweeps,
        converged=bool(gap <= config.tol),
        trace=trace,
    )


def _lp_score_and_grad(sample: SampleMatrix, p: float, alpha: float):
    rows = sample.rows

    def score_fn(x):
        pos = np.maximum(rows - x, 0.0)
        neg = np.maximum(x - rows, 0.0)
        gain = np.sum(pos**p, axis=1) ** (2.0 / p)
        loss = np.sum(neg**p, axis=1) ** (2.0 / p)
        return float(np.mean(alpha * gain + (1.0 - alpha) * loss))

    def grad_fn(x):
        pos = np.maximum(rows - x, 0.0)
        neg = np.maximum(x - rows, 0.0)
        norm_pos = np.sum(pos**p, axis=1) ** (1.0 / p)
        norm_neg = np.sum(neg**p, axis=1) ** (1.0 / p)
        # rows whose positive (negative) part vanishes contribute no gradient
        w_pos = np.where(norm_pos > 0.0, norm_pos, 1.0) ** (2.0 - p)
        w_neg = np.where(norm_neg > 0.0, norm_neg, 1.0) ** (2.0 - p)
        w_pos = np.where(norm_pos > 0.0, w_pos, 0.0)
        w_neg = np.where(norm_neg > 0.0, w_neg, 0.0)
        gain = w_pos[:, None] * pos ** (p - 1.0)
        loss = w_neg[:, None] * neg ** (p - 1.0)
        return np.mean(-2.0 * alpha * gain + 2.0 * (1.0 - alpha) * loss, axis=0)

    return score_fn, grad_fn


def solve_lp(sample: SampleMatrix, p, level, config: LpConfig | None = None) -> ExpectileResult:
    """Empirical L^p expectile for 1 <= p < inf.

    p=1 coincides with the all-ones matrix expectile and delegates to
    :func:`solve_empirical`; p=2 is the vector of marginal univariate
    expectiles; other p minimize the empirical L^p score by gradient
    descent. p = inf is not supported.
    """
    config = LpConfig(p=p) if config is None else replace(config, p=float(p))
    p = config.p
    lv = Level.of(level)
    alpha = lv.alpha
    if p == 1.0:
        gd = GradientConfig(
            tol=config.tol, max_iter=config.max_iter, record_trace=config.record_trace
        )
        return solve_empirical(sample, ScoringMatrix.ones(sample.d), lv, gd)
    if p == 2.0:
        point = np.array(
            [univariate_expectile(sample.column(k), lv) for k in range(sample.d)]
        )
        res = np.array(
            [
                alpha * np.mean(np.maximum(sample.column(k) - point[k], 0.0))
                - (1.0 - alpha) * np.mean(np.maximum(point[k] - sample.column(k), 0.0))
                for k in range(sample.d)
            ]
        )
        norm = float(np.max(np.abs(res)))
        return ExpectileResult(
            point=point,
            residual_norm=norm,
            iterations=0,
            converged=bool(norm <= config.tol),
            trace=[point.copy()] if config.record_trace else None,
        )
    columns_sorted = [np.sort(sample.column(k)) for k in range(sample.d)]
    x0 = np.array([univariate_expectile(col, lv) for col in columns_sorted])
    scale = max(float(np.max(sample.rows) - np.min(sample.rows)), 1.0)
    score_fn, grad_fn = _lp_score_and_grad(sample, p, alpha)
    gd = GradientConfig(tol=config.tol, max_iter=config.max_iter, record_trace=config.record_trace)
    x, res_norm, iterations, stalled, trace = _descend(
        score_fn, grad_fn, x0, gd, columns_sorted, scale
    )
    return ExpectileResult(
        point=x,
        residual_norm=res_norm,
        iterations=iterations,
        converged=bool(res_norm <= config.tol and not (stalled and res_norm > config.tol)),
        trace=trace,
    )
