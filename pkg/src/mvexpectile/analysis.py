"""Derived quantities: the level-recovery mapping alpha(x), the linear
system for the derivative of the expectile with respect to alpha, and the
asymptotic sweep toward the support endpoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Level, SampleMatrix, ScoringMatrix
from .distributions import Fgm, Independence, ModelSpec, fgm_conditional_inverse
from .deterministic import NewtonConfig, solve_analytic

__all__ = [
    "AlphaDerivativeSystem",
    "alpha_of_point",
    "alpha_derivative",
    "alpha_derivative_system",
    "asymptotic_sweep",
]


def _empirical_pair_matrices(x, sample: SampleMatrix):
    rows = sample.rows
    diff = rows - x
    pos = np.maximum(diff, 0.0)
    neg = np.maximum(-diff, 0.0)
    up = (diff > 0.0).astype(float)
    down = (diff < 0.0).astype(float)
    gains = pos.T @ up / sample.n  # gains[i, k] = E[(X_i-x_i)+ 1{X_k>x_k}]
    losses = neg.T @ down / sample.n
    return gains, losses


def _model_pair_matrices(x, model: ModelSpec):
    d = model.d
    sl = np.array([m.stop_loss(x[i]) for i, m in enumerate(model.marginals)])
    lsl = np.array([m.lower_stop_loss(x[i]) for i, m in enumerate(model.marginals)])
    sf = np.array([m.sf(x[i]) for i, m in enumerate(model.marginals)])
    cdf = np.array([m.cdf(x[i]) for i, m in enumerate(model.marginals)])
    gains = sl[:, None] * sf[None, :]
    losses = lsl[:, None] * cdf[None, :]
    if isinstance(model.copula, Fgm):
        theta = model.copula.theta
        for i in range(d):
            m = model.marginals[i]
            tail = m.sf_squared_tail_integral(x[i])
            up_w = m.stop_loss(max(x[i], 0.0)) - tail
            dn_w = (m.stop_loss(0.0) - m.sf_squared_tail_integral(0.0)) - up_w
            for k in range(d):
                if k == i:
                    continue
                gains[i, k] += theta * sf[k] * cdf[k] * up_w
                losses[i, k] += theta * cdf[k] * sf[k] * dn_w
    np.fill_diagonal(gains, sl)
    np.fill_diagonal(losses, lsl)
    return gains, losses


def alpha_of_point(x, data, sigma: ScoringMatrix) -> np.ndarray:
    """Level recovered from a point: component k is the ratio

        sum_i pi_ki E[(x_i-X_i)+ 1{x_k>X_k}]
        / sum_i pi_ki (E[(X_i-x_i)+ 1{X_k>x_k}] + E[(x_i-X_i)+ 1{x_k>X_k}]).

    At the alpha-expectile every component equals alpha. Components whose
    denominator vanishes are returned as NaN.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(data, SampleMatrix):
        gains, losses = _empirical_pair_matrices(x, data)
    else:
        gains, losses = _model_pair_matrices(x, data)
    pi = sigma.entries
    num = np.einsum("ki,ik->k", pi, losses)
    den = np.einsum("ki,ik->k", pi, gains + losses)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den != 0.0, num / den, np.nan)
    return out


@dataclass
class AlphaDerivativeSystem:
    """Assembled linear system (diag(B) + Gamma) dx/dalpha = A."""

    A: np.ndarray
    B: np.ndarray
    Gamma: np.ndarray
    solution: np.ndarray


def _conditional_tail_means(model: ModelSpec, i: int, k: int, x, mc_draws: int, rng):
    """(E[(X_i-x_i)+ | X_k=x_k], E[(x_i-X_i)+ | X_k=x_k]) for i != k."""
    mi, mk = model.marginals[i], model.marginals[k]
    if isinstance(model.copula, Independence):
        return float(mi.stop_loss(x[i])), float(mi.lower_stop_loss(x[i]))
    # FGM: draw from the conditional copula by inversion and average.
    w = float(mk.cdf(x[k]))
    t = rng.random(mc_draws)
    v = fgm_conditional_inverse(np.full(mc_draws, w), t, model.copula.theta)
    xi = mi.ppf(np.maximum(v, 2.0**-53))
    return (
        float(np.mean(np.maximum(xi - x[i], 0.0))),
        float(np.mean(np.maximum(x[i] - xi, 0.0))),
    )


def _joint_orthants(model: ModelSpec, i: int, k: int, x):
    """(P(X_i>x_i, X_k>x_k), P(X_i<x_i, X_k<x_k))."""
    mi, mk = model.marginals[i], model.marginals[k]
    si, sk = float(mi.sf(x[i])), float(mk.sf(x[k]))
    fi, fk = float(mi.cdf(x[i])), float(mk.cdf(x[k]))
    if isinstance(model.copula, Fgm):
        theta = model.copula.theta
        return si * sk * (1.0 + theta * fi * fk), fi * fk * (1.0 + theta * si * sk)
    return si * sk, fi * fk


def alpha_derivative_system(
    x_star,
    level,
    model: ModelSpec,
    sigma: ScoringMatrix,
    mc_draws: int = 1_000_000,
    seed: int = 0,
) -> AlphaDerivativeSystem:
    """Assemble and solve the linear system satisfied by dx/dalpha at the
    solved expectile ``x_star``.

    Conditional expectations are exact under independence and Monte Carlo
    (conditional-copula inversion, ``mc_draws`` draws) under FGM.
    """
    x = np.asarray(x_star, dtype=float)
    alpha = Level.of(level).alpha
    pi = sigma.entries
    d = model.d
    rng = np.random.default_rng(seed)

    gains, losses = _model_pair_matrices(x, model)
    a_vec = np.einsum("ki,ik->k", pi, gains + losses)

    b_vec = np.zeros(d)
    gamma = np.zeros((d, d))
    for k in range(d):
        fk = float(model.marginals[k].pdf(x[k]))
        acc = 0.0
        for i in range(d):
            if i == k:
                up, dn = float(model.marginals[k].sf(x[k])), float(model.marginals[k].cdf(x[k]))
                gamma[k, k] = pi[k, k] * (alpha * up + (1.0 - alpha) * dn)
                continue
            p_up, p_dn = _joint_orthants(model, i, k, x)
            gamma[k, i] = pi[k, i] * (alpha * p_up + (1.0 - alpha) * p_dn)
            if pi[k, i] != 0.0:
                ce_up, ce_dn = _conditional_tail_means(model, i, k, x, mc_draws, rng)
                acc += pi[k, i] * (alpha * ce_up + (1.0 - alpha) * ce_dn)
        b_vec[k] = fk * acc

    matrix = np.diag(b_vec) + gamma
    try:
        solution = np.linalg.solve(matrix, a_vec)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            f"alpha-derivative system is singular (cond={np.linalg.cond(matrix):.3e})"
        ) from exc
    return AlphaDerivativeSystem(A=a_vec, B=b_vec, Gamma=gamma, solution=solution)


def alpha_derivative(x_star, level, model: ModelSpec, sigma: ScoringMatrix, **kwargs):
    """Vector dx/dalpha at the solved expectile; see
    :func:`alpha_derivative_system`."""
    return alpha_derivative_system(x_star, level, model, sigma, **kwargs).solution


def asymptotic_sweep(model: ModelSpec, sigma: ScoringMatrix, alphas, config=None):
    """Solve the analytic system over a grid of levels with warm starts.

    Returns one ``(alpha, ExpectileResult)`` pair per grid point, in grid
    order; non-converged levels are recorded and the sweep continues.
    """
    config = config or NewtonConfig()
    out = []
    x0 = None
    for a in alphas:
        result = solve_analytic(model, sigma, Level.of(a), config=config, x0=x0)
        out.append((float(a), result))
        if result.converged:
            x0 = result.point
    return out
