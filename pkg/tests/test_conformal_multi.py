import math

import numpy as np
import pytest

from confband.analysis.scores import fit_modulation
from confband.core.data import region_size
from confband.core.errors import BadConfig, BadInnerAlpha, GridExplosion
from confband.core.parallel import set_threads
from confband.demo.synthetic import linear_data
from confband.methods import full, jackknife, jackplus, msplit, split
from confband.methods.multi import candidate_axes, pvalue_at, split_radius
from confband.models import custom_model, mean_model, ols_model
from confband.types import (
    FullConfig, ModulationKind, MsplitConfig, ScoreKind, TabularDataset,
)


def zero_model():
    return custom_model("zero", train=lambda x, y: None,
                        predict=lambda payload, x0: np.zeros((len(x0), 1)))


@pytest.fixture
def calibration_ds():
    """Two zero training responses, then calibration residuals 1..9 under the mean model."""
    y = np.array([0.0, 0.0] + [float(v) for v in range(1, 10)])
    return TabularDataset(x=np.arange(11.0), y=y)


# === Split ===

def test_split_radius_is_kth_calibration_score(calibration_ds):
    res = split(calibration_ds, [[5.0]], mean_model(), alpha=0.1, explicit=[0, 1],
                s_type=ModulationKind.IDENTITY)
    assert res.info["d"] == 9.0 and res.info["k"] == 9
    region = res.regions[0]
    assert (region.lo[0], region.up[0]) == (-9.0, 9.0)
    assert region.contains([9.0]) and not region.contains([9.5])


def test_split_zero_residuals_collapse_to_prediction():
    ds = TabularDataset(x=np.arange(8.0), y=np.full(8, 3.0))
    region = split(ds, [[1.0]], mean_model(), alpha=0.2, seed=0,
                   s_type=ModulationKind.IDENTITY).regions[0]
    assert region.lo[0] == region.up[0] == 3.0


def test_split_small_calibration_is_unbounded():
    ds = TabularDataset(x=np.arange(5.0), y=np.arange(5.0))
    res = split(ds, [[0.0]], mean_model(), alpha=0.1, explicit=[0, 1])
    assert math.isinf(res.info["d"])
    assert res.regions[0].contains([1e9])
    assert region_size(res.regions[0]) == math.inf


def test_smoothed_split_with_unit_tiebreaker_is_classical(calibration_ds, monkeypatch):
    classical = split(calibration_ds, [[5.0]], mean_model(), explicit=[0, 1],
                      s_type=ModulationKind.IDENTITY)

    class UnitDraw:
        def uniform(self):
            return 1.0

    monkeypatch.setattr(np.random, "default_rng", lambda seed=None: UnitDraw())
    smoothed = split(calibration_ds, [[5.0]], mean_model(), explicit=[0, 1],
                     s_type=ModulationKind.IDENTITY, randomized=True)
    assert smoothed.info["tau"] == 1.0
    assert smoothed.info["k"] == classical.info["k"]
    np.testing.assert_array_equal(smoothed.regions[0].up, classical.regions[0].up)


@pytest.mark.parametrize("seed_rand", range(10))
def test_smoothed_rank_uses_drawn_tiebreaker(seed_rand):
    scores = np.arange(1.0, 20.0)
    d, k, tau = split_radius(scores, 0.1, randomized=True, seed_rand=seed_rand)
    assert 0.0 <= tau < 1.0
    assert k == max(1, math.ceil(19 + tau - 20 * 0.1 - 1e-9))
    assert k <= math.ceil(20 * 0.9 - 1e-9)
    assert d == scores[k - 1]


def test_l2_region_is_an_ellipsoid_inside_its_box(bivariate_ds):
    res = split(bivariate_ds, [[0.5]], ols_model(), alpha=0.1, seed=4)
    region = res.regions[0]
    pred = res.pred[0]
    corner = pred + 0.99 * (region.up - pred)
    assert region.contains(pred)
    assert not region.contains(corner)
    assert np.all((region.lo <= corner) & (corner <= region.up))


def test_mahalanobis_box_uses_covariance_diagonal(bivariate_ds):
    res = split(bivariate_ds, [[0.5]], ols_model(), alpha=0.1, seed=4,
                score=ScoreKind.MAHALANOBIS)
    region = res.regions[0]
    d = res.info["d"]
    cov = np.linalg.inv(region.ellipsoid.metric)
    half = 0.5 * (region.up - region.lo)
    np.testing.assert_allclose(half, np.sqrt(d * np.diag(cov)))
    # the ellipsoid touches the box face along the first covariance column
    extreme = res.pred[0] + 0.999 * math.sqrt(d / cov[0, 0]) * cov[:, 0]
    assert region.contains(extreme)
    assert extreme[0] - res.pred[0, 0] == pytest.approx(0.999 * half[0])
    assert region.ellipsoid.level == d


def test_split_regions_nest_as_alpha_shrinks(bivariate_ds):
    wide = split(bivariate_ds, [[0.3]], ols_model(), alpha=0.05, seed=9, score=ScoreKind.MAX)
    narrow = split(bivariate_ds, [[0.3]], ols_model(), alpha=0.2, seed=9, score=ScoreKind.MAX)
    assert np.all(wide.regions[0].lo <= narrow.regions[0].lo)
    assert np.all(wide.regions[0].up >= narrow.regions[0].up)


def _nested(wide, narrow):
    return bool(np.all(wide.lo <= narrow.lo) and np.all(wide.up >= narrow.up))


@pytest.mark.parametrize("fixture", ["linear_ds", "bivariate_ds"])
def test_jackplus_regions_nest_as_alpha_shrinks(fixture, request):
    ds = request.getfixturevalue(fixture)
    regions = [jackplus(ds, [[0.3]], ols_model(), alpha=a).regions[0] for a in (0.05, 0.1, 0.3)]
    assert _nested(regions[0], regions[1]) and _nested(regions[1], regions[2])


def test_msplit_regions_nest_as_alpha_shrinks(linear_ds):
    cfg = MsplitConfig(B=10, tau=0.5)
    regions = [msplit(linear_ds, [[0.3]], ols_model(), alpha=a, cfg=cfg, seed=4).regions[0]
               for a in (0.05, 0.1, 0.3)]
    assert _nested(regions[0], regions[1]) and _nested(regions[1], regions[2])


def test_full_accepted_sets_nest_as_alpha_shrinks(linear_ds):
    ds = linear_ds.take(range(15))
    surfaces = [full(ds, [[0.3]], ols_model(), FullConfig(alpha=a, num_grid_pts_dim=15)).surfaces[0]
                for a in (0.05, 0.3)]
    wide, narrow = surfaces[0].in_region(0.05), surfaces[1].in_region(0.3)
    assert narrow.any()
    assert np.all(wide[narrow])


def test_constant_scale_model_leaves_region_unchanged(linear_ds):
    plain = split(linear_ds, [[0.4]], ols_model(), alpha=0.1, seed=2)
    scaled = split(linear_ds, [[0.4]], ols_model(), alpha=0.1, seed=2, mad_model=mean_model())
    np.testing.assert_allclose(scaled.regions[0].lo, plain.regions[0].lo, rtol=1e-9)
    np.testing.assert_allclose(scaled.regions[0].up, plain.regions[0].up, rtol=1e-9)


# === Full ===

def test_candidate_axes():
    axes = candidate_axes(np.array([[10.0], [-3.0]]), 5, 1.25)
    np.testing.assert_array_equal(axes[0], [-12.5, -6.25, 0.0, 6.25, 12.5])


def test_pvalue_counts_scores_at_least_candidate():
    x = np.zeros((3, 1))
    y = np.array([[1.0], [2.0], [3.0]])
    delta = pvalue_at(x, y, [0.0], [2.5], zero_model(), score=ScoreKind.MAX,
                      s_type=ModulationKind.IDENTITY)
    assert delta == 0.5


@pytest.mark.parametrize("cand", [-4.0, 0.0, 1.0, 7.5])
def test_single_observation_never_rejects(cand):
    delta = pvalue_at([[0.0]], [[1.0]], [0.0], [cand], mean_model())
    assert delta in (0.5, 1.0)
    assert delta > 0.1


@pytest.mark.parametrize("n", [2, 5, 10])
def test_full_pvalues_match_direct_ranking(n):
    ds = linear_data(n, seed=n)
    cfg = FullConfig(alpha=0.1, score=ScoreKind.MAX, s_type=ModulationKind.IDENTITY,
                     num_grid_pts_dim=7)
    surface = full(ds, [[0.5]], mean_model(), cfg).surfaces[0]
    for cand, delta in zip(surface.candidates, surface.pvals):
        y_aug = np.vstack([ds.y, cand[None, :]])
        scores = np.abs((y_aug - y_aug.mean(axis=0))[:, 0])
        assert delta == np.count_nonzero(scores >= scores[-1]) / (n + 1)


def test_full_is_thread_count_invariant(bivariate_ds):
    cfg = FullConfig(num_grid_pts_dim=12)
    small = bivariate_ds.take(range(15))
    set_threads(1)
    one = full(small, [[0.5]], ols_model(), cfg).surfaces[0].pvals
    set_threads(4)
    four = full(small, [[0.5]], ols_model(), cfg).surfaces[0].pvals
    np.testing.assert_array_equal(one, four)


def test_full_rejects_oversized_grid():
    ds = linear_data(10, q=3, seed=0)
    with pytest.raises(GridExplosion):
        full(ds, [[0.5]], mean_model(), FullConfig(num_grid_pts_dim=101))


def test_full_rejects_alpha_max():
    with pytest.raises(BadConfig):
        FullConfig(s_type=ModulationKind.ALPHA_MAX)


# === Jackknife+ and jackknife ===

def test_jackplus_interval_from_loo_residuals():
    ds = TabularDataset(x=np.arange(4.0), y=[1.0, 2.0, 3.0, 4.0])
    region = jackplus(ds, [[0.0]], zero_model(), alpha=0.25).regions[0]
    assert (region.lo[0], region.up[0]) == (-4.0, 4.0)


def test_jackplus_zero_residuals_collapse():
    ds = TabularDataset(x=np.arange(10.0), y=np.full((10, 2), 1.5))
    region = jackplus(ds, [[3.0]], mean_model(), alpha=0.2).regions[0]
    np.testing.assert_array_equal(region.lo, [1.5, 1.5])
    np.testing.assert_array_equal(region.up, [1.5, 1.5])


@pytest.mark.parametrize("n,q", [(3, 2), (4, 3), (5, 2)])
def test_jackplus_box_matches_brute_force(n, q):
    ds = linear_data(n, q=q, seed=10 * n + q)
    x0 = np.array([[0.6]])
    alpha = 0.2
    ols = ols_model()

    residuals, preds = [], []
    for i in range(n):
        rest = np.delete(np.arange(n), i)
        fit = ols.fit(ds.x[rest], ds.y[rest])
        residuals.append(ds.y[i] - ols.apply(fit, ds.x[i:i + 1])[0])
        preds.append(ols.apply(fit, x0)[0])
    residuals, preds = np.array(residuals), np.array(preds)
    cand = np.vstack([preds - np.abs(residuals), preds + np.abs(residuals)])
    s = fit_modulation(ModulationKind.ST_DEV, residuals).vector()
    scores = np.max(np.abs(cand - np.median(cand, axis=0)) / s, axis=1)
    keep = math.ceil(round((1 - alpha) * 2 * n, 9))
    kept = sorted(range(2 * n), key=lambda i: (scores[i], i))[:keep]

    region = jackplus(ds, x0, ols, alpha=alpha).regions[0]
    np.testing.assert_array_equal(region.lo, cand[kept].min(axis=0))
    np.testing.assert_array_equal(region.up, cand[kept].max(axis=0))


def test_jackplus_is_thread_count_invariant(bivariate_ds):
    set_threads(1)
    one = jackplus(bivariate_ds, [[0.2], [0.8]], ols_model()).regions
    set_threads(4)
    four = jackplus(bivariate_ds, [[0.2], [0.8]], ols_model()).regions
    for a, b in zip(one, four):
        np.testing.assert_array_equal(a.lo, b.lo)
        np.testing.assert_array_equal(a.up, b.up)


def test_jackknife_centers_on_full_fit(linear_ds):
    res = jackknife(linear_ds, [[0.5]], ols_model(), alpha=0.1)
    region = res.regions[0]
    assert region.lo[0] + region.up[0] == pytest.approx(2 * res.pred[0, 0])


# === Multi-split ===

@pytest.mark.parametrize("fixture", ["linear_ds", "bivariate_ds"])
def test_identical_replicates_reproduce_split(fixture, request):
    ds = request.getfixturevalue(fixture)
    cfg = MsplitConfig(B=3, tau=0.7)
    explicit = list(range(30))
    joined = msplit(ds, [[0.5]], ols_model(), alpha=0.3, cfg=cfg, explicit=explicit)
    single = split(ds, [[0.5]], ols_model(), alpha=cfg.inner_alpha(0.3), explicit=explicit)
    assert np.all(np.isfinite(single.regions[0].up))
    np.testing.assert_array_equal(joined.regions[0].lo, single.regions[0].lo)
    np.testing.assert_array_equal(joined.regions[0].up, single.regions[0].up)


@pytest.mark.parametrize("fixture", ["linear_ds", "bivariate_ds"])
def test_identical_replicates_with_few_kept_bounds_reproduce_split(fixture, request):
    ds = request.getfixturevalue(fixture)
    cfg = MsplitConfig(B=10, tau=0.1)
    explicit = list(range(30))
    joined = msplit(ds, [[0.5]], ols_model(), alpha=0.3, cfg=cfg, explicit=explicit)
    single = split(ds, [[0.5]], ols_model(), alpha=cfg.inner_alpha(0.3), explicit=explicit)
    assert joined.info["keep"] == 2
    assert np.all(single.regions[0].up > single.regions[0].lo)
    np.testing.assert_allclose(joined.regions[0].lo, single.regions[0].lo, rtol=1e-12)
    np.testing.assert_allclose(joined.regions[0].up, single.regions[0].up, rtol=1e-12)


def test_msplit_is_reproducible_for_a_seed(bivariate_ds):
    cfg = MsplitConfig(B=10, tau=0.3)
    a = msplit(bivariate_ds, [[0.5]], ols_model(), cfg=cfg, seed=17)
    b = msplit(bivariate_ds, [[0.5]], ols_model(), cfg=cfg, seed=17)
    np.testing.assert_array_equal(a.regions[0].lo, b.regions[0].lo)
    assert a.info["replicate_seeds"] == b.info["replicate_seeds"]


def test_msplit_univariate_reports_segments(linear_ds):
    res = msplit(linear_ds, [[0.5]], ols_model(), cfg=MsplitConfig(B=20, tau=0.5), seed=1)
    region = res.regions[0]
    assert region.segments
    assert region.lo[0] == region.segments[0][0]
    assert region.up[0] == region.segments[-1][1]


def test_msplit_needs_replicates():
    with pytest.raises(BadInnerAlpha):
        MsplitConfig(B=0)


def test_msplit_rejects_inner_level_outside_unit_interval(linear_ds):
    cfg = MsplitConfig(B=2, tau=0.5, **{"lambda": 2.0})
    with pytest.raises(BadInnerAlpha):
        msplit(linear_ds, [[0.5]], ols_model(), alpha=0.9, cfg=cfg)
