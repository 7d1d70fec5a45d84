import numpy as np
import pytest

from mvexpectile.core import SampleMatrix, ScoringMatrix, score
from mvexpectile.distributions import Exponential, Fgm, ModelSpec, Pareto, sample
from mvexpectile.deterministic import (
    LpConfig,
    NewtonConfig,
    solve_analytic,
    solve_empirical,
    solve_lp,
)
from mvexpectile.univariate import univariate_expectile

BETAS = (0.05, 0.25)
EXP_MODEL = ModelSpec((Exponential(BETAS[0]), Exponential(BETAS[1])))
PARETO_MODEL = ModelSpec((Pareto(2.0, 10.0), Pareto(2.0, 20.0)))
ONES2 = ScoringMatrix.ones(2)


def grid_search_score(sample_matrix, sigma, alpha, points=400):
    """Exhaustive minimization of the empirical score over the bounding box."""
    r1 = sample_matrix.column(0)
    r2 = sample_matrix.column(1)
    xs = np.linspace(r1.min(), r1.max(), points)
    ys = np.linspace(r2.min(), r2.max(), points)
    pi = sigma.entries
    best_val, best_xy = np.inf, None
    for xv in xs:
        p1 = np.maximum(r1 - xv, 0.0)
        n1 = np.maximum(xv - r1, 0.0)
        p2 = np.maximum(r2[None, :] - ys[:, None], 0.0)
        n2 = np.maximum(ys[:, None] - r2[None, :], 0.0)
        gain = pi[0, 0] * p1**2 + 2.0 * pi[0, 1] * p1 * p2 + pi[1, 1] * p2**2
        loss = pi[0, 0] * n1**2 + 2.0 * pi[0, 1] * n1 * n2 + pi[1, 1] * n2**2
        vals = np.mean(alpha * gain + (1.0 - alpha) * loss, axis=1)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best_xy = vals[j], (xs[1] - xs[0], ys[1] - ys[0], xv, ys[j])
    return best_xy  # (cell_x, cell_y, x, y)


# ---------------------------------------------------------------------------
# solve_analytic
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model", [EXP_MODEL, PARETO_MODEL])
def test_diagonal_matrix_reduces_to_univariate(model):
    diag = ScoringMatrix(np.diag([1.0, 2.5]))
    for alpha in np.arange(0.1, 0.95, 0.1):
        res = solve_analytic(model, diag, float(alpha))
        marginal = [univariate_expectile(m, float(alpha)) for m in model.marginals]
        assert res.converged
        np.testing.assert_allclose(res.point, marginal, atol=1e-8)


def test_newton_residual_within_tolerance_at_solution():
    for model, alpha in ((EXP_MODEL, 0.7), (PARETO_MODEL, 0.7)):
        res = solve_analytic(model, ONES2, alpha)
        assert res.converged
        assert res.residual_norm <= 1e-10


def test_fgm_newton_solutions_converge():
    for theta in (-1.0, 1.0):
        model = ModelSpec((Exponential(BETAS[0]), Exponential(BETAS[1])), Fgm(theta))
        res = solve_analytic(model, ONES2, 0.85)
        assert res.converged and res.residual_norm <= 1e-10


def test_newton_against_brute_force_score_minimizer():
    # oracle: empirical score of 10^6 model draws minimized by nested
    # golden-section over a box (the oracle's own noise is ~2e-2 here)
    alpha = 0.7
    rows = sample(EXP_MODEL, 1_000_000, seed=1).rows
    x1_, x2_ = rows[:, 0], rows[:, 1]

    def mc_score(x1, x2):
        gain = np.maximum(x1_ - x1, 0.0) + np.maximum(x2_ - x2, 0.0)
        loss = np.maximum(x1 - x1_, 0.0) + np.maximum(x2 - x2_, 0.0)
        return np.mean(alpha * gain**2 + (1.0 - alpha) * loss**2)

    gr = (np.sqrt(5.0) - 1.0) / 2.0

    def golden(f, lo, hi, tol=1e-3):
        a, b = lo, hi
        c, d = b - gr * (b - a), a + gr * (b - a)
        fc, fd = f(c), f(d)
        while b - a > tol:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - gr * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + gr * (b - a)
                fd = f(d)
        return 0.5 * (a + b)

    def inner(x1):
        return golden(lambda y: mc_score(x1, y), 0.0, 40.0)

    x1_opt = golden(lambda x1: mc_score(x1, inner(x1)), 0.0, 150.0)
    x2_opt = inner(x1_opt)
    newton = solve_analytic(EXP_MODEL, ONES2, alpha)
    assert abs(newton.point[0] - x1_opt) <= 2e-2
    assert abs(newton.point[1] - x2_opt) <= 2e-2


def test_newton_nonconvergence_is_reported_not_raised():
    res = solve_analytic(EXP_MODEL, ONES2, 0.7, NewtonConfig(tol=1e-10, max_iter=1))
    assert not res.converged
    assert np.all(np.isfinite(res.point))


def test_newton_trace_recording():
    res = solve_analytic(EXP_MODEL, ONES2, 0.7, NewtonConfig(record_trace=True))
    assert res.trace is not None and len(res.trace) >= 2


# ---------------------------------------------------------------------------
# solve_empirical
# ---------------------------------------------------------------------------


def test_two_point_diagonal_sample():
    s = SampleMatrix([[0.0, 0.0], [1.0, 1.0]])
    res = solve_empirical(s, ScoringMatrix.identity(2), 0.5)
    assert res.converged
    np.testing.assert_allclose(res.point, [0.5, 0.5], atol=1e-10)


def test_needs_two_observations():
    with pytest.raises(ValueError):
        solve_empirical(SampleMatrix([[1.0, 2.0]]), ONES2, 0.5)


def test_residual_norm_within_tolerance_at_solution():
    for seed in range(5):
        s = sample(EXP_MODEL, 60, seed=seed)
        res = solve_empirical(s, ONES2, 0.7)
        assert res.converged
        assert res.residual_norm <= 1e-9


def test_matches_grid_search_within_one_cell():
    for seed in (3, 14, 27):
        s = sample(EXP_MODEL, 50, seed=seed)
        res = solve_empirical(s, ONES2, 0.7)
        cell_x, cell_y, gx, gy = grid_search_score(s, ONES2, 0.7)
        assert abs(res.point[0] - gx) <= cell_x
        assert abs(res.point[1] - gy) <= cell_y


def test_mirror_sample_center_at_half():
    # centrally symmetric two-point mirror sample: alpha-symmetry plus
    # translation force the center
    center = np.array([2.0, -1.0])
    offset = np.array([1.5, 0.75])
    s = SampleMatrix([center + offset, center - offset])
    for sigma in (ScoringMatrix.identity(2), ONES2, ScoringMatrix([[2.0, 0.5], [0.5, 1.0]])):
        res = solve_empirical(s, sigma, 0.5)
        np.testing.assert_allclose(res.point, center, atol=1e-9)


def test_law_invariance_exact_under_row_permutation():
    rng = np.random.default_rng(4)
    rows = sample(EXP_MODEL, 40, seed=10).rows
    base = solve_empirical(SampleMatrix(rows), ONES2, 0.6)
    for _ in range(3):
        perm = rng.permutation(len(rows))
        shuffled = solve_empirical(SampleMatrix(rows[perm]), ONES2, 0.6)
        np.testing.assert_array_equal(shuffled.point, base.point)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.8])
def test_transformation_invariances(alpha):
    rows = sample(EXP_MODEL, 60, seed=21).rows
    sigma = ScoringMatrix([[1.5, 0.4], [0.4, 1.0]])
    base = solve_empirical(SampleMatrix(rows), sigma, alpha).point

    scaled = solve_empirical(SampleMatrix(3.0 * rows), sigma, alpha).point
    np.testing.assert_allclose(scaled, 3.0 * base, atol=1e-7)

    shift = np.array([5.0, -2.0])
    moved = solve_empirical(SampleMatrix(rows + shift), sigma, alpha).point
    np.testing.assert_allclose(moved, base + shift, atol=1e-7)

    mirrored = solve_empirical(SampleMatrix(-rows), sigma, 1.0 - alpha).point
    np.testing.assert_allclose(mirrored, -base, atol=1e-7)


def test_pseudo_invariance_under_diagonal_map():
    rows = sample(EXP_MODEL, 50, seed=33).rows
    sigma = ScoringMatrix([[1.0, 0.3], [0.3, 1.0]])
    b = np.array([1.3, 0.8])
    v_sigma = ScoringMatrix(sigma.entries * np.outer(b, b))
    a_shift = np.array([0.7, -1.2])
    left = solve_empirical(SampleMatrix(rows * b + a_shift), sigma, 0.7).point
    right = solve_empirical(SampleMatrix(rows), v_sigma, 0.7).point
    np.testing.assert_allclose(left, b * right + a_shift, atol=1e-7)


def test_support_stability_of_solutions():
    for seed in range(4):
        s = sample(PARETO_MODEL, 40, seed=seed)
        res = solve_empirical(s, ONES2, 0.85)
        assert np.all(res.point >= s.rows.min(axis=0) - 1e-12)
        assert np.all(res.point <= s.rows.max(axis=0) + 1e-12)


def test_strong_intern_monotony_on_shifted_duplicate():
    rows = sample(EXP_MODEL, 60, seed=2).rows
    aug = np.column_stack([rows, rows[:, 0] + 0.5])  # X_3 = X_1 + 0.5 a.s.
    exch = np.full((3, 3), 0.4)
    np.fill_diagonal(exch, 2.0)
    res = solve_empirical(SampleMatrix(aug), ScoringMatrix(exch), 0.7)
    assert res.converged
    assert res.point[0] <= res.point[2] + 1e-9


def test_kink_minimizer_is_detected_and_optimal():
    # this instance minimizes exactly on a sample hyperplane; the reported
    # optimality gap must still be within tolerance and the score locally best
    s = sample(EXP_MODEL, 50, seed=3)
    res = solve_empirical(s, ONES2, 0.7)
    assert res.converged
    assert res.point[1] in set(s.column(1))
    f0 = score(res.point, s, ONES2, 0.7)
    rng = np.random.default_rng(0)
    for _ in range(200):
        assert score(res.point + rng.normal(0, 0.05, 2), s, ONES2, 0.7) >= f0 - 1e-12


# ---------------------------------------------------------------------------
# solve_lp
# ---------------------------------------------------------------------------


def test_lp_rejects_unsupported_p():
    s = sample(EXP_MODEL, 20, seed=0)
    with pytest.raises(ValueError, match="not supported"):
        solve_lp(s, 0.5, 0.7)
    with pytest.raises(ValueError, match="not supported"):
        solve_lp(s, np.inf, 0.7)
    with pytest.raises(ValueError):
        LpConfig(p=np.inf)


def test_lp_p2_is_marginal_expectile_vector():
    for seed in range(20):
        s = sample(EXP_MODEL, 30 + seed, seed=seed)
        res = solve_lp(s, 2, 0.65)
        marginal = [univariate_expectile(s.column(k), 0.65) for k in range(2)]
        assert res.converged
        np.testing.assert_allclose(res.point, marginal, atol=1e-8)


def test_lp_p1_equals_all_ones_matrix_solve():
    for seed in range(20):
        s = sample(EXP_MODEL, 30 + seed, seed=100 + seed)
        lp = solve_lp(s, 1, 0.7)
        emp = solve_empirical(s, ONES2, 0.7)
        np.testing.assert_allclose(lp.point, emp.point, atol=1e-8)


def test_lp_p3_matches_grid_search():
    alpha = 0.7
    p = 3.0
    s = sample(EXP_MODEL, 30, seed=12)
    res = solve_lp(s, p, alpha)
    assert res.converged
    r1, r2 = s.column(0), s.column(1)
    xs = np.linspace(r1.min(), r1.max(), 300)
    ys = np.linspace(r2.min(), r2.max(), 300)
    best_val, best_xy = np.inf, None
    for xv in xs:
        p1 = np.maximum(r1 - xv, 0.0)
        n1 = np.maximum(xv - r1, 0.0)
        p2 = np.maximum(r2[None, :] - ys[:, None], 0.0)
        n2 = np.maximum(ys[:, None] - r2[None, :], 0.0)
        gain = (p1**p + p2**p) ** (2.0 / p)
        loss = (n1**p + n2**p) ** (2.0 / p)
        vals = np.mean(alpha * gain + (1.0 - alpha) * loss, axis=1)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best_xy = vals[j], (xv, ys[j])
    assert abs(res.point[0] - best_xy[0]) <= xs[1] - xs[0]
    assert abs(res.point[1] - best_xy[1]) <= ys[1] - ys[0]
