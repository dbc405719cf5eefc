import math
from fractions import Fraction

import numpy as np
import pytest

from confband.analysis.scores import (
    bounding_box, conformity_max, extended_quantile, extended_quantile_indices, fit_modulation,
    jk_quantiles, residual_covariance, score_fun, score_multi, score_multi_batch,
)
from confband.core.errors import (
    BadLevel, EmptySet, GridMismatch, MissingCovariance, NonPositiveModulation, TooFewResiduals,
)
from confband.types import ModulationKind, ScoreKind


# === Scores ===

def test_l2_score():
    assert score_multi(ScoreKind.L2, [3.0, 4.0], [1.0, 1.0]) == pytest.approx(5.0)


def test_max_score_is_modulated():
    assert score_multi(ScoreKind.MAX, [3.0, -4.0], [1.0, 2.0]) == pytest.approx(3.0)


def test_mahalanobis_score():
    assert score_multi(ScoreKind.MAHALANOBIS, [1.0, 1.0], [1.0, 1.0],
                       cov_inv=np.eye(2)) == pytest.approx(2.0)
    with pytest.raises(MissingCovariance):
        score_multi(ScoreKind.MAHALANOBIS, [1.0, 1.0], [1.0, 1.0])


def test_score_rejects_nonpositive_modulation():
    with pytest.raises(NonPositiveModulation):
        score_multi(ScoreKind.L2, [1.0, 1.0], [1.0, 0.0])


@pytest.mark.parametrize("kind", [ScoreKind.L2, ScoreKind.MAX])
def test_scores_are_absolutely_homogeneous(kind):
    rng = np.random.default_rng(0)
    r = rng.normal(size=(20, 3))
    s = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(score_multi_batch(kind, -2.5 * r, s),
                               2.5 * score_multi_batch(kind, r, s))


@pytest.mark.parametrize("c", [-2.5, 0.5, 3.0])
def test_mahalanobis_score_scales_with_c_squared(c):
    rng = np.random.default_rng(3)
    r = rng.normal(size=(20, 3))
    _, cov_inv = residual_covariance(rng.normal(size=(40, 3)))
    s = np.ones(3)
    np.testing.assert_allclose(score_multi_batch(ScoreKind.MAHALANOBIS, c * r, s, cov_inv),
                               c ** 2 * score_multi_batch(ScoreKind.MAHALANOBIS, r, s, cov_inv))


def test_sup_score_takes_worst_component():
    residual = [np.array([1.0, -2.0, 0.5]), np.array([6.0, -1.0])]
    s = [np.ones(3), np.full(2, 2.0)]
    assert score_fun(residual, s) == pytest.approx(3.0)
    assert score_fun(np.array([1.0, -5.0, 2.0]), np.ones(3)) == pytest.approx(5.0)
    assert score_fun([np.zeros(4)], [np.ones(4)]) == 0.0


def test_sup_score_requires_matching_grids():
    with pytest.raises(GridMismatch):
        score_fun([np.zeros(3)], [np.ones(4)])


# === Modulation ===

def test_identity_modulation():
    mod = fit_modulation(ModulationKind.IDENTITY, np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(mod.vector(), [1.0, 1.0])


def test_stdev_modulation():
    mod = fit_modulation(ModulationKind.ST_DEV, np.array([[-1.0], [1.0]]))
    assert mod.vector()[0] == pytest.approx(math.sqrt(2.0))
    with pytest.raises(TooFewResiduals):
        fit_modulation(ModulationKind.ST_DEV, np.array([[1.0]]))


def test_stdev_modulation_is_floored():
    mod = fit_modulation(ModulationKind.ST_DEV, np.array([[2.0], [2.0], [2.0]]))
    assert 0 < mod.vector()[0] <= 1e-12


def test_alpha_max_single_component():
    mod = fit_modulation(ModulationKind.ALPHA_MAX, np.array([[1.0], [2.0], [3.0]]), alpha=0.5)
    assert mod.vector()[0] == pytest.approx(1.0)


def test_alpha_max_discards_extreme_residuals():
    residuals = np.array([[1.0, 0.5], [-2.0, 1.0], [0.5, 3.0], [4.0, -1.0], [0.2, 0.1]])
    mod = fit_modulation(ModulationKind.ALPHA_MAX, residuals, alpha=0.5)
    np.testing.assert_allclose(mod.vector(), [2.0 / 3.0, 1.0 / 3.0])


def test_alpha_max_keeps_everything_past_last_order_statistic():
    residuals = np.array([[1.0], [2.0], [3.0]])
    for alpha in (0.25, 0.1):
        mod = fit_modulation(ModulationKind.ALPHA_MAX, residuals, alpha=alpha)
        assert mod.vector()[0] == pytest.approx(1.0)


def test_alpha_max_curves_integrate_to_one():
    rng = np.random.default_rng(3)
    grid = np.linspace(0.0, 2.0, 25)
    residuals = [rng.normal(size=(40, 25)), rng.normal(0, 3, size=(40, 25))]
    mod = fit_modulation(ModulationKind.ALPHA_MAX, residuals, alpha=0.1, grids=[grid, grid])
    total = sum(np.trapezoid(s, grid) for s in mod.s)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_alpha_max_ignores_residual_order():
    rng = np.random.default_rng(4)
    residuals = rng.normal(size=(30, 2))
    a = fit_modulation(ModulationKind.ALPHA_MAX, residuals, alpha=0.2)
    b = fit_modulation(ModulationKind.ALPHA_MAX, residuals[rng.permutation(30)], alpha=0.2)
    np.testing.assert_array_equal(a.vector(), b.vector())


def test_residual_covariance_regularizes_singular_input():
    t = np.arange(5, dtype=float)
    cov, inv = residual_covariance(np.column_stack([t, np.zeros(5)]))
    assert cov[1, 1] > 0
    np.linalg.cholesky(cov)
    np.testing.assert_allclose(cov @ inv, np.eye(2), atol=1e-6)
    with pytest.raises(TooFewResiduals):
        residual_covariance(np.array([[1.0, 2.0]]))


# === Conformity and extended quantiles ===

def test_max_conformity():
    assert conformity_max(np.array([2.0, 1.0]), [np.ones(1), np.ones(1)]) == pytest.approx(0.5)
    assert conformity_max(np.zeros(2), [np.ones(1), np.ones(1)]) == math.inf
    assert conformity_max([np.array([1.0, -4.0, 2.0])], [np.ones(3)]) == pytest.approx(0.25)


def test_extended_quantile_keeps_most_conformal():
    points = np.array([[1.0], [5.0], [0.5]])
    np.testing.assert_array_equal(extended_quantile(points, 1, [np.ones(1)], 0.0), [[0.5]])
    np.testing.assert_array_equal(extended_quantile(points, 3, [np.ones(1)], 0.0), points)


def test_extended_quantile_bivariate():
    points = np.array([[3.0, 0.0], [0.0, 1.0], [2.0, -1.0]])
    kept = extended_quantile(points, 2, [np.ones(1), np.ones(1)], np.zeros(2))
    np.testing.assert_array_equal(kept, [[0.0, 1.0], [2.0, -1.0]])


def test_extended_quantile_broadcasts_scalar_center():
    points = np.array([[3.0, 3.5], [1.5, 1.0], [2.0, 0.0]])
    s = [np.ones(1), np.ones(1)]
    kept = extended_quantile(points, 1, s, 1.0)
    np.testing.assert_array_equal(kept, [[1.5, 1.0]])
    np.testing.assert_array_equal(extended_quantile_indices(points, 2, s, 1.0),
                                  extended_quantile_indices(points, 2, s, np.ones(2)))


def test_extended_quantile_ties_keep_first_occurrence():
    points = np.array([[1.0], [-1.0], [1.0]])
    s = [np.ones(1)]
    assert extended_quantile_indices(points, 1, s, 0.0).tolist() == [0]
    assert extended_quantile_indices(points, 2, s, 0.0).tolist() == [0, 1]


def test_extended_quantile_ignores_modulation_scale():
    rng = np.random.default_rng(1)
    points = rng.normal(size=(15, 2))
    s = [np.array([0.5]), np.array([2.0])]
    scaled = [7.0 * c for c in s]
    np.testing.assert_array_equal(extended_quantile_indices(points, 6, s, np.zeros(2)),
                                  extended_quantile_indices(points, 6, scaled, np.zeros(2)))


@pytest.mark.parametrize("k", [0, 4])
def test_extended_quantile_level_bounds(k):
    with pytest.raises(BadLevel):
        extended_quantile(np.zeros((3, 1)), k, [np.ones(1)], 0.0)


# === Jackknife+ quantiles ===

def test_jk_quantiles_examples():
    assert jk_quantiles(np.arange(1.0, 11.0), 0.1) == (1.0, 10.0)
    assert jk_quantiles([4.0], 0.5) == (4.0, 4.0)
    assert jk_quantiles([1.0, 2.0, 3.0, 4.0, 5.0], 0.001) == (-math.inf, math.inf)
    with pytest.raises(EmptySet):
        jk_quantiles([], 0.1)


@pytest.mark.parametrize("n", range(1, 9))
def test_jk_quantiles_match_exact_rank_arithmetic(n):
    rng = np.random.default_rng(n)
    values = rng.normal(size=n)
    ordered = np.sort(values)
    for alpha in (0.05, 0.1, 0.2, 0.25, 0.3, 0.5, 0.75):
        a = Fraction(str(alpha))
        lo_rank = math.floor(a * (n + 1))
        up_rank = math.ceil((1 - a) * (n + 1))
        expected_lo = -math.inf if lo_rank == 0 else ordered[lo_rank - 1]
        expected_up = math.inf if up_rank > n else ordered[up_rank - 1]
        assert jk_quantiles(values, alpha) == (expected_lo, expected_up)


# === Bounding boxes ===

def test_bounding_box_vectors():
    lo, up = bounding_box(np.array([[0.0, 1.0], [2.0, -1.0]]))
    np.testing.assert_array_equal(lo, [0.0, -1.0])
    np.testing.assert_array_equal(up, [2.0, 1.0])
    lo, up = bounding_box(np.array([[3.0, 4.0]]))
    np.testing.assert_array_equal(lo, up)


def test_bounding_box_curves_contain_every_input():
    rng = np.random.default_rng(2)
    curves = [rng.normal(size=(6, 10)), rng.normal(size=(6, 4))]
    lo, up = bounding_box(curves)
    for c, a, b in zip(curves, lo, up):
        assert np.all((a <= c) & (c <= b))


def test_bounding_box_of_nothing():
    with pytest.raises(EmptySet):
        bounding_box(np.empty((0, 2)))
