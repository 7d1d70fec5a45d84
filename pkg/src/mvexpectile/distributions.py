"""Model catalogue: exponential and Pareto marginals, independence and FGM
copulas, exact inverse-CDF samplers, and the closed-form l-functions that
assemble the analytic optimality systems.

The l-function of a pair of coordinates is

    l_{X_i,X_j}(x_i, x_j) = alpha E[(X_i-x_i)+ 1{X_j>x_j}]
                            - (1-alpha) E[(x_i-X_i)+ 1{X_j<x_j}]

and the expectile solves sum_i pi_ki l_{X_i,X_k}(x_i, x_k) = 0 for every k.
All marginal formulas are piecewise-extended below the support so solvers
may evaluate them anywhere on the real line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Level, SampleMatrix, ScoringMatrix

__all__ = [
    "Exponential",
    "Pareto",
    "Independence",
    "Fgm",
    "ModelSpec",
    "sample",
    "fgm_conditional_inverse",
    "l_pair",
    "optimality_residual_fn",
    "exponential_indep_sides",
    "pareto_indep_sides",
    "fgm_exponential_sides",
]

_TINY = 2.0**-53  # smallest uniform deviate; keeps u in the open interval


@dataclass(frozen=True)
class Exponential:
    """Exponential marginal with rate ``rate`` (mean 1/rate), support [0, inf)."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0.0:
            raise ValueError(f"exponential rate must be positive, got {self.rate}")

    def mean(self):
        return 1.0 / self.rate

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.0, 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0)))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.0, 1.0, np.exp(-self.rate * np.maximum(x, 0.0)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.0, 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)))

    def ppf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def stop_loss(self, x):
        """E[(X - x)+]; equals mean - x below the support."""
        x = np.asarray(x, dtype=float)
        inside = np.exp(-self.rate * np.maximum(x, 0.0)) / self.rate
        return np.where(x < 0.0, 1.0 / self.rate - x, inside)

    def lower_stop_loss(self, x):
        """E[(x - X)+]."""
        return np.asarray(x, dtype=float) - self.mean() + self.stop_loss(x)

    def sf_squared_tail_integral(self, x):
        """int_{max(x,0)}^inf sf(s)^2 ds, used by the FGM cross terms."""
        return np.exp(-2.0 * self.rate * np.maximum(np.asarray(x, dtype=float), 0.0)) / (
            2.0 * self.rate
        )


@dataclass(frozen=True)
class Pareto:
    """Pareto marginal with survival (scale/(scale+x))^shape on [0, inf).

    The shape must exceed 1 so that the mean scale/(shape-1) is finite.
    """

    shape: float
    scale: float

    def __post_init__(self):
        if not self.shape > 1.0:
            raise ValueError(f"pareto shape must exceed 1, got {self.shape}")
        if not self.scale > 0.0:
            raise ValueError(f"pareto scale must be positive, got {self.scale}")

    def mean(self):
        return self.scale / (self.shape - 1.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(
            x < 0.0, 1.0, (self.scale / (self.scale + np.maximum(x, 0.0))) ** self.shape
        )

    def cdf(self, x):
        return 1.0 - self.sf(x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        dens = (self.shape / self.scale) * (self.scale / (self.scale + xp)) ** (self.shape + 1.0)
        return np.where(x < 0.0, 0.0, dens)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return self.scale * ((1.0 - u) ** (-1.0 / self.shape) - 1.0)

    def stop_loss(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        inside = (self.scale / (self.scale + xp)) ** (self.shape - 1.0) * self.scale / (
            self.shape - 1.0
        )
        return np.where(x < 0.0, self.mean() - x, inside)

    def lower_stop_loss(self, x):
        return np.asarray(x, dtype=float) - self.mean() + self.stop_loss(x)

    def sf_squared_tail_integral(self, x):
        xp = np.maximum(np.asarray(x, dtype=float), 0.0)
        return (self.scale / (self.scale + xp)) ** (2.0 * self.shape - 1.0) * self.scale / (
            2.0 * self.shape - 1.0
        )


@dataclass(frozen=True)
class Independence:
    """Product copula; any dimension."""

    def cdf(self, u, v):
        return np.asarray(u) * np.asarray(v)


@dataclass(frozen=True)
class Fgm:
    """Bivariate Farlie-Gumbel-Morgenstern copula C(u,v)=uv[1+theta(1-u)(1-v)]."""

    theta: float

    def __post_init__(self):
        if not abs(self.theta) <= 1.0:
            raise ValueError(f"FGM parameter must lie in [-1, 1], got {self.theta}")

    def cdf(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return u * v * (1.0 + self.theta * (1.0 - u) * (1.0 - v))


def fgm_conditional_inverse(u, t, theta):
    """Invert the FGM conditional distribution: the v with dC/du(u, v) = t.

    Solves a v^2 - (1+a) v + t = 0 with a = theta (1 - 2u), taking the root
    in (0, 1); for |a| below 1e-12 the copula is locally independent and v=t.
    The evaluated form 2t / ((1+a) + sqrt((1+a)^2 - 4at)) is the stable
    rewriting of the ((1+a) - sqrt(...)) / (2a) branch.
    """
    u = np.asarray(u, dtype=float)
    t = np.asarray(t, dtype=float)
    a = theta * (1.0 - 2.0 * u)
    disc = (1.0 + a) ** 2 - 4.0 * a * t
    safe_a = np.where(np.abs(a) < 1e-12, 1.0, a)
    v = 2.0 * t / ((1.0 + safe_a) + np.sqrt(disc))
    out = np.where(np.abs(a) < 1e-12, t, v)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ModelSpec:
    """Joint distribution: one marginal per coordinate plus a copula."""

    marginals: tuple
    copula: object = Independence()

    def __post_init__(self):
        marginals = tuple(self.marginals)
        object.__setattr__(self, "marginals", marginals)
        if len(marginals) < 1:
            raise ValueError("model needs at least one marginal")
        if isinstance(self.copula, Fgm) and len(marginals) != 2:
            raise ValueError("the FGM copula is bivariate; model dimension must be 2")

    @property
    def d(self) -> int:
        return len(self.marginals)

    def means(self) -> np.ndarray:
        return np.array([m.mean() for m in self.marginals])

    def sample_rows(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n rows using inverse-CDF marginals on open-(0,1) uniforms."""
        u = np.maximum(rng.random((n, self.d)), _TINY)
        if isinstance(self.copula, Fgm):
            v = fgm_conditional_inverse(u[:, 0], u[:, 1], self.copula.theta)
            u = np.column_stack([u[:, 0], np.maximum(v, _TINY)])
        out = np.empty((n, self.d))
        for j, m in enumerate(self.marginals):
            out[:, j] = m.ppf(u[:, j])
        return out


def sample(model: ModelSpec, n: int, seed: int) -> SampleMatrix:
    """n i.i.d. draws from the model; deterministic for a fixed seed."""
    if n < 1:
        raise ValueError(f"sample size must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    return SampleMatrix(model.sample_rows(n, rng))


# ---------------------------------------------------------------------------
# Closed-form l-functions and the analytic optimality system
# ---------------------------------------------------------------------------


def l_self(marginal, x, level) -> float:
    """Univariate l-function alpha E[(X-x)+] - (1-alpha) E[(x-X)+]."""
    alpha = Level.of(level).alpha
    return alpha * marginal.stop_loss(x) - (1.0 - alpha) * marginal.lower_stop_loss(x)


def l_pair(model: ModelSpec, i: int, k: int, x_i, x_k, level) -> float:
    """Closed-form l_{X_i,X_k}(x_i, x_k) for the catalogued copulas."""
    alpha = Level.of(level).alpha
    mi = model.marginals[i]
    if i == k:
        return l_self(mi, x_i, level)
    mk = model.marginals[k]
    gain_i, loss_i = mi.stop_loss(x_i), mi.lower_stop_loss(x_i)
    sf_k, cdf_k = mk.sf(x_k), mk.cdf(x_k)
    if isinstance(model.copula, Independence):
        return alpha * gain_i * sf_k - (1.0 - alpha) * loss_i * cdf_k
    # FGM: P(X_i>s, X_k>x_k) = S_i(s) S_k [1 + theta F_i(s) F_k], integrated in s.
    theta = model.copula.theta
    tail = mi.sf_squared_tail_integral(x_i)
    up_weight = mi.stop_loss(np.maximum(x_i, 0.0)) - tail  # int_{x_i+}^inf S_i F_i
    dn_weight = (mi.stop_loss(0.0) - mi.sf_squared_tail_integral(0.0)) - up_weight
    gain = gain_i * sf_k + theta * sf_k * cdf_k * up_weight
    loss = loss_i * cdf_k + theta * cdf_k * sf_k * dn_weight
    return alpha * gain - (1.0 - alpha) * loss


def optimality_residual_fn(model: ModelSpec, sigma: ScoringMatrix, level):
    """Residual map x -> (sum_i pi_ki l_{X_i,X_k}(x_i, x_k))_k of the analytic system."""
    if sigma.dim != model.d:
        raise ValueError(f"scoring matrix dim {sigma.dim} does not match model d={model.d}")
    lv = Level.of(level)
    pi = sigma.entries

    def residual_map(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = model.d
        out = np.zeros(d)
        for k in range(d):
            acc = 0.0
            for i in range(d):
                if pi[k, i] != 0.0:
                    acc += pi[k, i] * l_pair(model, i, k, x[i], x[k], lv)
            out[k] = acc
        return out

    return residual_map


# -- verbatim bivariate displays of the three worked models ------------------


def exponential_indep_sides(betas, x, level):
    """Left and right sides of the explicit bivariate exponential system
    (independent marginals, all-ones matrix); the residual per coordinate
    is left - right."""
    alpha = Level.of(level).alpha
    left = np.empty(2)
    right = np.empty(2)
    for i, j in ((0, 1), (1, 0)):
        bi, bj = betas[i], betas[j]
        xi, xj = x[i], x[j]
        left[i] = (2.0 * alpha - 1.0) * np.exp(-bi * xi) / bi - (1.0 - alpha) * (xi - 1.0 / bi)
        right[i] = (1.0 - alpha) * (xj - (1.0 - np.exp(-bj * xj)) / bj) * (
            1.0 - np.exp(-bi * xi)
        ) - alpha * np.exp(-bj * xj) * np.exp(-bi * xi) / bj
    return left, right


def pareto_indep_sides(shape, scales, x, level):
    """Left and right sides of the explicit bivariate Pareto system
    (common shape, independent marginals, all-ones matrix)."""
    alpha = Level.of(level).alpha
    a = shape
    left = np.empty(2)
    right = np.empty(2)
    for i, j in ((0, 1), (1, 0)):
        bi, bj = scales[i], scales[j]
        xi, xj = x[i], x[j]
        left[i] = (2.0 * alpha - 1.0) * (bi / (a - 1.0)) * (bi / (bi + xi)) ** (a - 1.0) - (
            1.0 - alpha
        ) * (xi - bi / (a - 1.0))
        surv_i = (bi / (bi + xi)) ** a
        cross = (bj / (a - 1.0)) * (surv_i - (1.0 - alpha)) * (bj / (bj + xj)) ** (a - 1.0) - (
            1.0 - alpha
        ) * (1.0 - surv_i) * (xj - bj / (a - 1.0))
        right[i] = -cross
    return left, right


def fgm_exponential_sides(betas, theta, x, level):
    """Left and right sides of the explicit bivariate FGM-exponential system."""
    alpha = Level.of(level).alpha
    left = np.empty(2)
    right = np.empty(2)
    for i, j in ((0, 1), (1, 0)):
        bi, bj = betas[i], betas[j]
        xi, xj = x[i], x[j]
        ei = np.exp(-bi * xi)
        ej = np.exp(-bj * xj)
        left[j] = (2.0 * alpha - 1.0) * ej / bj - (1.0 - alpha) * (xj - 1.0 / bj)
        right[j] = (
            (1.0 - alpha) * (1.0 - ej) * (1.0 - theta * ej) * (xi - (1.0 - ei) / bi)
            + (1.0 - alpha)
            * (theta / 2.0)
            * (1.0 - ej)
            * ej
            * (2.0 * xi - (1.0 - np.exp(-2.0 * bi * xi)) / bi)
            - alpha * (ei / bi) * ej * (1.0 + theta * (1.0 - ei / 2.0) * (1.0 - ej))
        )
    return left, right
