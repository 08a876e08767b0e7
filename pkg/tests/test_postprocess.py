import math

import numpy as np
import pytest

from ckmkit.grid import GridMap
from ckmkit.postprocess import (
    CFARConfig,
    DenormalizationError,
    cfar_threshold_map,
    denormalized_iss_map,
    estimate_sinr_map,
    fit_denormalization,
    localize_ins,
)
from ckmkit.sampling import (
    NormBounds,
    SampleSet,
    db_to_power,
    extract_iss,
    power_to_db,
)


def make_extraction(r_db, mask, bounds, neg_mask=None):
    """ExtractionResult stand-in assembled from a known dB field."""
    from ckmkit.sampling import ExtractionResult

    watts = np.where(mask, db_to_power(r_db), 0.0)
    pre = np.where(mask, bounds.normalize(r_db), 0.0)
    return ExtractionResult(
        iss_sparse=GridMap(watts, "rss_watts", {"signed": True}),
        neg_mask=neg_mask if neg_mask is not None else np.zeros_like(mask),
        preprocessed=GridMap(pre, "normalized"),
        sample_mask=mask,
        bounds=bounds,
    )


class TestDenormalization:
    def test_recovers_affine_exactly(self):
        rng = np.random.default_rng(0)
        r_db = rng.uniform(-80.0, -60.0, size=(32, 32))
        r_db.flat[0], r_db.flat[1] = -80.0, -60.0  # pin the extremes
        mask = np.zeros((32, 32), dtype=bool)
        mask.flat[rng.choice(1024, 300, replace=False)] = True
        mask.flat[:2] = True
        bounds = NormBounds(-80.0, -60.0)
        ext = make_extraction(r_db, mask, bounds)
        recon = GridMap(bounds.normalize(r_db), "normalized")
        fit = fit_denormalization(recon, ext)
        assert fit.r_min_db_hat == pytest.approx(-80.0, abs=1e-9)
        assert fit.r_max_db_hat == pytest.approx(-60.0, abs=1e-9)
        assert fit.n_points == int(mask.sum())

    def test_matches_lstsq(self):
        rng = np.random.default_rng(7)
        r_db = rng.uniform(-90.0, -55.0, size=(24, 24))
        mask = rng.uniform(size=(24, 24)) < 0.4
        bounds = NormBounds(-95.0, -50.0)
        ext = make_extraction(r_db, mask, bounds)
        u = bounds.normalize(r_db) + rng.normal(0, 0.01, size=r_db.shape)
        recon = GridMap(np.clip(u, 0, 1), "normalized")
        fit = fit_denormalization(recon, ext)

        uu = recon.data[mask]
        rr = power_to_db(ext.iss_sparse.data[mask])
        design = np.column_stack([uu, np.ones_like(uu)])
        span, rmin = np.linalg.lstsq(design, rr, rcond=None)[0]
        assert fit.r_min_db_hat == pytest.approx(rmin, abs=1e-10)
        assert fit.r_max_db_hat == pytest.approx(rmin + span, abs=1e-10)

    def test_negative_pixels_excluded(self):
        rng = np.random.default_rng(3)
        r_db = rng.uniform(-80.0, -60.0, size=(16, 16))
        mask = np.ones((16, 16), dtype=bool)
        neg = rng.uniform(size=(16, 16)) < 0.3
        bounds = NormBounds(-80.0, -60.0)
        ext = make_extraction(r_db, mask, bounds, neg_mask=neg)
        recon = GridMap(bounds.normalize(r_db), "normalized")
        fit = fit_denormalization(recon, ext)
        assert fit.n_points == int(mask.sum() - neg.sum())
        assert fit.r_min_db_hat == pytest.approx(-80.0, abs=1e-6)

    def test_constant_reconstruction_rejected(self):
        mask = np.ones((8, 8), dtype=bool)
        bounds = NormBounds(-80.0, -60.0)
        r_db = np.full((8, 8), -70.0)
        ext = make_extraction(r_db, mask, bounds)
        recon = GridMap(np.full((8, 8), 0.5), "normalized")
        with pytest.raises(DenormalizationError):
            fit_denormalization(recon, ext)

    def test_too_few_points_rejected(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[0, 0] = True
        bounds = NormBounds(-80.0, -60.0)
        ext = make_extraction(np.full((8, 8), -70.0), mask, bounds)
        recon = GridMap(np.zeros((8, 8)), "normalized")
        with pytest.raises(DenormalizationError):
            fit_denormalization(recon, ext)

    def test_denormalized_map_roundtrip(self):
        rng = np.random.default_rng(5)
        r_db = rng.uniform(-80.0, -60.0, size=(16, 16))
        r_db.flat[0], r_db.flat[1] = -80.0, -60.0
        mask = np.ones((16, 16), dtype=bool)
        bounds = NormBounds(-80.0, -60.0)
        ext = make_extraction(r_db, mask, bounds)
        recon = GridMap(bounds.normalize(r_db), "normalized")
        fit = fit_denormalization(recon, ext)
        out = denormalized_iss_map(recon, fit)
        assert out.kind == "rss_watts"
        np.testing.assert_allclose(out.data, db_to_power(r_db), rtol=1e-9)


class TestSinrEstimate:
    def test_matches_identity(self):
        rng = np.random.default_rng(2)
        r_db = rng.uniform(-80.0, -60.0, size=(16, 16))
        r_db.flat[0], r_db.flat[1] = -80.0, -60.0
        bounds = NormBounds(-80.0, -60.0)
        mask = np.ones((16, 16), dtype=bool)
        ext = make_extraction(r_db, mask, bounds)
        recon = GridMap(bounds.normalize(r_db), "normalized")
        fit = fit_denormalization(recon, ext)
        dss = GridMap(np.full((16, 16), 2.5e-6), "rss_watts")
        sinr = estimate_sinr_map(recon, fit, dss, noise_power_w=1e-14)
        want = 2.5e-6 / (db_to_power(r_db) + 1e-14)
        np.testing.assert_allclose(sinr.data, want, rtol=1e-9)
        assert sinr.kind == "sinr_linear"

    def test_shape_mismatch_rejected(self):
        recon = GridMap(np.full((8, 8), 0.5), "normalized")
        fit_obj = None
        from ckmkit.postprocess import DenormFit

        fit_obj = DenormFit(-80.0, -60.0, 10)
        dss = GridMap(np.full((4, 4), 1e-6), "rss_watts")
        with pytest.raises(ValueError):
            estimate_sinr_map(recon, fit_obj, dss, 1e-14)


class TestCFARConfig:
    def test_pfa_upper_limit(self):
        with pytest.raises(ValueError):
            CFARConfig(pfa=0.5)  # above exp(-1)

    def test_pfa_positive(self):
        with pytest.raises(ValueError):
            CFARConfig(pfa=0.0)

    def test_geometry_validation(self):
        with pytest.raises(ValueError):
            CFARConfig(guard=-1)
        with pytest.raises(ValueError):
            CFARConfig(train=0)

    def test_window(self):
        assert CFARConfig(guard=2, train=4).window_half == 6


class TestCFARDetection:
    def test_false_alarm_rate_on_noise(self):
        # Exponentially distributed power (Rayleigh envelope) is the CA-CFAR
        # design case; the empirical false alarm rate should sit near pfa.
        rng = np.random.default_rng(0)
        lin = rng.exponential(1.0, size=(200, 200))
        cfg = CFARConfig(guard=1, train=5, pfa=0.05)
        thr = cfar_threshold_map(lin, cfg)
        rate = float((lin > thr).mean())
        assert 0.02 < rate < 0.09

    def test_single_peak_found_at_argmax(self):
        xs, ys = np.meshgrid(np.arange(64), np.arange(64), indexing="ij")
        bump_db = -70.0 + 12.0 * np.exp(-(((xs - 40) ** 2 + (ys - 22) ** 2) / 60.0))
        grid = GridMap(bump_db, "gain_db")
        res = localize_ins(grid, CFARConfig(guard=2, train=4, pfa=0.3))
        assert res.m_hat == 1
        assert (res.detections[0].x_px, res.detections[0].y_px) == (40, 22)

    def test_constant_map_has_no_detections(self):
        grid = GridMap(np.full((64, 64), -70.0), "gain_db")
        res = localize_ins(grid, CFARConfig(pfa=0.3))
        assert res.m_hat == 0
        assert res.pixels().shape == (0, 2)

    def test_three_separated_peaks(self):
        xs, ys = np.meshgrid(np.arange(96), np.arange(96), indexing="ij")
        field = np.full((96, 96), -75.0)
        for cx, cy in [(20, 20), (20, 70), (70, 45)]:
            field += 15.0 * np.exp(-(((xs - cx) ** 2 + (ys - cy) ** 2) / 40.0))
        res = localize_ins(GridMap(field, "gain_db"), CFARConfig(guard=2, train=4, pfa=0.3))
        assert res.m_hat == 3
        got = {(d.x_px, d.y_px) for d in res.detections}
        assert got == {(20, 20), (20, 70), (70, 45)}

    def test_detections_sorted_by_score(self):
        xs, ys = np.meshgrid(np.arange(96), np.arange(96), indexing="ij")
        field = np.full((96, 96), -75.0)
        field += 20.0 * np.exp(-(((xs - 20) ** 2 + (ys - 20) ** 2) / 40.0))
        field += 10.0 * np.exp(-(((xs - 70) ** 2 + (ys - 70) ** 2) / 40.0))
        res = localize_ins(GridMap(field, "gain_db"), CFARConfig(pfa=0.3))
        scores = [d.score_db for d in res.detections]
        assert scores == sorted(scores, reverse=True)
        assert (res.detections[0].x_px, res.detections[0].y_px) == (20, 20)

    def test_window_must_fit(self):
        grid = GridMap(np.zeros((8, 8)), "gain_db")
        with pytest.raises(ValueError):
            localize_ins(grid, CFARConfig(guard=4, train=8, pfa=0.3))

    def test_wrong_kind_rejected(self):
        grid = GridMap(np.full((32, 32), 1e-7), "rss_watts")
        with pytest.raises(ValueError):
            localize_ins(grid, CFARConfig())
