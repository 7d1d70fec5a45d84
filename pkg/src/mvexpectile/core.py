"""Shared math substrate: domain types, the matrix scoring function, the
per-coordinate optimality residual and empirical stop-loss estimators.

Conventions used throughout the package:

* positive part  (v)+ = max(v, 0),  negative part  (v)- = max(-v, 0),
  so (X - x)- equals (x - X)+;
* indicator events {X_k > x_k} and {X_k < x_k} are strict: a sample point
  tying x_k exactly contributes to neither side;
* empirical expectations are unweighted sample means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Level",
    "ScoringMatrix",
    "SampleMatrix",
    "ExpectileResult",
    "score",
    "residual",
    "stop_loss_terms",
]


@dataclass(frozen=True)
class Level:
    """Asymmetry level alpha, restricted to the open interval (0, 1)."""

    alpha: float

    def __post_init__(self):
        alpha = float(self.alpha)
        if not 0.0 < alpha < 1.0 or not np.isfinite(alpha):
            raise ValueError(f"level must lie in the open interval (0, 1), got {self.alpha}")
        object.__setattr__(self, "alpha", alpha)

    @staticmethod
    def of(value) -> "Level":
        return value if isinstance(value, Level) else Level(float(value))


class ScoringMatrix:
    """Symmetric positive semi-definite matrix defining the quadratic score.

    Entries must satisfy pi_ii > 0 and pi_ii >= pi_ij >= 0; the smallest
    eigenvalue is computed at construction (tolerance 1e-10) and kept as
    ``lambda_min``.
    """

    _PSD_TOL = 1e-10

    def __init__(self, entries):
        m = np.asarray(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"scoring matrix must be square, got shape {m.shape}")
        if m.shape[0] < 1:
            raise ValueError("scoring matrix must have dimension >= 1")
        if not np.all(np.isfinite(m)):
            raise ValueError("scoring matrix entries must be finite")
        if not np.array_equal(m, m.T):
            raise ValueError("scoring matrix must be exactly symmetric")
        diag = np.diag(m)
        if np.any(diag <= 0.0):
            raise ValueError("scoring matrix diagonal entries must be strictly positive")
        if np.any(m < 0.0):
            raise ValueError("scoring matrix entries must be nonnegative")
        if np.any(m > diag[:, None]):
            raise ValueError("scoring matrix requires pi_ii >= pi_ij on every row")
        lambda_min = float(np.linalg.eigvalsh(m)[0])
        if lambda_min < -self._PSD_TOL:
            raise ValueError(
                f"scoring matrix is not positive semi-definite (lambda_min={lambda_min:.3e})"
            )
        m = m.copy()
        m.flags.writeable = False
        self._entries = m
        self.lambda_min = lambda_min

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    def is_diagonal(self) -> bool:
        return bool(np.array_equal(self._entries, np.diag(np.diag(self._entries))))

    @classmethod
    def identity(cls, d: int) -> "ScoringMatrix":
        return cls(np.eye(d))

    @classmethod
    def ones(cls, d: int) -> "ScoringMatrix":
        return cls(np.ones((d, d)))

    def __repr__(self):
        return f"ScoringMatrix({self._entries.tolist()!r})"


class SampleMatrix:
    """Immutable n x d block of observations."""

    def __init__(self, rows):
        r = np.asarray(rows, dtype=float)
        if r.ndim == 1:
            r = r[:, None]
        if r.ndim != 2:
            raise ValueError(f"sample must be a 2-d array, got ndim={r.ndim}")
        if r.shape[0] < 1 or r.shape[1] < 1:
            raise ValueError(f"sample must have n >= 1 and d >= 1, got shape {r.shape}")
        if not np.all(np.isfinite(r)):
            raise ValueError("sample entries must all be finite")
        r = r.copy()
        r.flags.writeable = False
        self._rows = r

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    @property
    def n(self) -> int:
        return self._rows.shape[0]

    @property
    def d(self) -> int:
        return self._rows.shape[1]

    def column(self, k: int) -> np.ndarray:
        return self._rows[:, k]

    def __repr__(self):
        return f"SampleMatrix(n={self.n}, d={self.d})"


@dataclass
class ExpectileResult:
    """Solver output: the solved point plus convergence diagnostics.

    ``converged`` is only set when ``residual_norm`` (max-norm of the
    optimality residual at ``point``) is within the solver's tolerance.
    """

    point: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    trace: list = field(default=None, repr=False)


def _check_dims(x, sample: SampleMatrix, sigma: ScoringMatrix | None = None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"point must be a 1-d vector, got ndim={x.ndim}")
    if x.shape[0] != sample.d:
        raise ValueError(f"point has length {x.shape[0]} but sample has d={sample.d}")
    if sigma is not None and sigma.dim != sample.d:
        raise ValueError(f"scoring matrix has dim {sigma.dim} but sample has d={sample.d}")
    return x


def score(x, sample: SampleMatrix, sigma: ScoringMatrix, level) -> float:
    """Empirical matrix score at ``x``.

    Sample mean over rows X of

        alpha (X-x)+' Sigma (X-x)+  +  (1-alpha) (X-x)-' Sigma (X-x)-

    with componentwise positive/negative parts.
    """
    x = _check_dims(x, sample, sigma)
    alpha = Level.of(level).alpha
    diff = sample.rows - x
    pos = np.maximum(diff, 0.0)
    neg = np.maximum(-diff, 0.0)
    m = sigma.entries
    gain = np.einsum("ij,jk,ik->i", pos, m, pos)
    loss = np.einsum("ij,jk,ik->i", neg, m, neg)
    return float(np.mean(alpha * gain + (1.0 - alpha) * loss))


def residual(x, sample: SampleMatrix, sigma: ScoringMatrix, level) -> np.ndarray:
    """Empirical optimality residual; the solved expectile is its root.

    Component k is the sample mean of

        sum_i pi_ki ( alpha (X_i-x_i)+ 1{X_k>x_k}
                      - (1-alpha) (x_i-X_i)+ 1{x_k>X_k} ).

    Away from sample ties the gradient of :func:`score` equals -2 times
    this residual.
    """
    x = _check_dims(x, sample, sigma)
    alpha = Level.of(level).alpha
    diff = sample.rows - x
    pos = np.maximum(diff, 0.0)
    neg = np.maximum(-diff, 0.0)
    up = diff > 0.0
    down = diff < 0.0
    m = sigma.entries
    gain = (pos @ m) * up
    loss = (neg @ m) * down
    return np.mean(alpha * gain - (1.0 - alpha) * loss, axis=0)


def stop_loss_terms(x, sample: SampleMatrix, i: int, k: int) -> tuple[float, float]:
    """Empirical bivariate stop-loss pair for coordinates (i, k) at ``x``.

    Returns ``(E[(X_i-x_i)+ 1{X_k>x_k}], E[(x_i-X_i)+ 1{x_k>X_k}])``,
    the two building blocks of the optimality system. Indices are 0-based.
    """
    x = _check_dims(x, sample)
    d = sample.d
    if not (0 <= i < d and 0 <= k < d):
        raise ValueError(f"indices must lie in [0, {d}), got i={i}, k={k}")
    col_i = sample.column(i)
    col_k = sample.column(k)
    gain = float(np.mean(np.maximum(col_i - x[i], 0.0) * (col_k > x[k])))
    loss = float(np.mean(np.maximum(x[i] - col_i, 0.0) * (col_k < x[k])))
    return gain, loss
