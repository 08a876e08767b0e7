import numpy as np
import pytest

from ckmkit.channel import ChannelParams, build_scene_maps
from ckmkit.env import EnvConfig, generate_environment
from ckmkit.grid import GridMap
from ckmkit.sampling import (
    NormBounds,
    PathlossFitError,
    db_to_power,
    draw_samples,
    estimate_pathloss,
    extract_iss,
    power_to_db,
    sample_mask,
)

from conftest import make_scene


class TestDbConversion:
    def test_roundtrip(self):
        p = np.array([1e-14, 1e-7, 40.0])
        np.testing.assert_allclose(db_to_power(power_to_db(p)), p, rtol=1e-12)

    def test_floor_applied_at_zero(self):
        assert power_to_db(0.0) == power_to_db(1e-20)
        assert np.isfinite(power_to_db(0.0))


class TestNormBounds:
    def test_normalize_denormalize(self):
        b = NormBounds(-80.0, -60.0)
        db = np.array([-80.0, -70.0, -60.0])
        np.testing.assert_allclose(b.normalize(db), [0.0, 0.5, 1.0], atol=1e-15)
        np.testing.assert_allclose(b.denormalize(b.normalize(db)), db, atol=1e-12)

    def test_clipping(self):
        b = NormBounds(-80.0, -60.0)
        assert b.normalize(-100.0) == 0.0
        assert b.normalize(-10.0) == 1.0

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            NormBounds(-60.0, -60.0)

    def test_dict_roundtrip(self):
        b = NormBounds(-81.5, -59.25)
        assert NormBounds.from_dict(b.to_dict()) == b


class TestSampleMask:
    def test_count_is_floor_of_rate(self):
        mask = sample_mask((128, 128), 0.2, seed=0)
        assert mask.sum() == 3276  # floor(0.2 * 16384)

    def test_deterministic(self):
        a = sample_mask((64, 64), 0.3, seed=7)
        b = sample_mask((64, 64), 0.3, seed=7)
        np.testing.assert_array_equal(a, b)

    def test_seed_matters(self):
        a = sample_mask((64, 64), 0.3, seed=7)
        b = sample_mask((64, 64), 0.3, seed=8)
        assert (a != b).any()

    def test_nested_rates(self):
        # Hash ranking means a lower rate is a prefix of a higher one.
        small = sample_mask((64, 64), 0.1, seed=3)
        big = sample_mask((64, 64), 0.4, seed=3)
        assert (small & ~big).sum() == 0

    def test_roughly_uniform(self):
        mask = sample_mask((64, 64), 0.5, seed=1)
        # Quadrant counts should all be near 512.
        q = [mask[:32, :32].sum(), mask[:32, 32:].sum(),
             mask[32:, :32].sum(), mask[32:, 32:].sum()]
        assert max(q) - min(q) < 150

    def test_zero_selection_rejected(self):
        with pytest.raises(ValueError):
            sample_mask((4, 4), 0.01, seed=0)

    def test_draw_samples_zero_off_mask(self, urban_env):
        maps = build_scene_maps(make_scene(urban_env), realize_fading=False)
        s = draw_samples(maps.total, 0.2, seed=5)
        assert (s.values[~s.mask] == 0.0).all()
        np.testing.assert_array_equal(s.values[s.mask], maps.total.data[s.mask])


class TestPathlossFit:
    def test_plain_fit_recovers_clean_samples(self, urban_env):
        # Interference-free samples make the plain fit an exact regression.
        # At 120 m receive altitude almost every pixel sees the 25 m mast,
        # so the NLoS class is starved and falls back to the priors.
        scene = make_scene(urban_env, seed=2)
        maps = build_scene_maps(scene, realize_fading=False)
        s = draw_samples(maps.dss, 0.3, seed=2)
        est = estimate_pathloss(s, scene.env, scene.bs, mode="plain",
                                priors=scene.channel)
        assert est.los_exponent == pytest.approx(-22.0, abs=1e-9)
        assert est.los_intercept_db == pytest.approx(-28.0, abs=1e-9)
        assert est.nlos_fallback
        assert est.nlos_exponent == scene.channel.nlos_exponent
        assert est.nlos_intercept_db == scene.channel.nlos_intercept_db

    def test_recovers_exact_parameters_without_fading(self):
        # A 40 m receive plane under 40 m mean rooftops shadows a wide band
        # of pixels, so both propagation classes get enough samples for the
        # fit to become an exact linear regression in log-distance.
        cfg = EnvConfig(
            length_m=256.0,
            width_m=256.0,
            max_height_m=120.0,
            resolution_m=4.0,
            uav_altitude_m=40.0,
            seed=11,
        )
        scene = make_scene(generate_environment(cfg), seed=2, in_powers=())
        maps = build_scene_maps(scene, realize_fading=False)
        s = draw_samples(maps.total, 0.3, seed=2)
        est = estimate_pathloss(s, scene.env, scene.bs)
        assert est.los_exponent == pytest.approx(-22.0, abs=1e-9)
        assert est.los_intercept_db == pytest.approx(-28.0, abs=1e-9)
        assert est.nlos_exponent == pytest.approx(-28.0, abs=1e-9)
        assert est.nlos_intercept_db == pytest.approx(-24.0, abs=1e-9)
        assert not est.los_fallback and not est.nlos_fallback

    def test_robust_fit_near_truth_with_interference(self):
        # Full-size scene with hidden transmitters and fading: trimming the
        # most positive residuals should land near the serving-link truth
        # and beat a plain fit over the same contaminated samples.
        from ckmkit.dataset import DatasetConfig, build_scene_record

        cfg = DatasetConfig()
        rec = build_scene_record(cfg, 77, 0)
        scene = rec.scene(cfg)
        maps = build_scene_maps(scene, realize_fading=True)
        s = draw_samples(maps.total, 0.2, seed=0)
        robust = estimate_pathloss(s, scene.env, scene.bs, mode="robust")
        plain = estimate_pathloss(s, scene.env, scene.bs, mode="plain")
        assert abs(robust.los_exponent - (-22.0)) < 2.0
        assert abs(robust.los_intercept_db - (-28.0)) < 5.0
        assert abs(robust.los_exponent + 22.0) < abs(plain.los_exponent + 22.0)

    def test_fallback_on_empty_class(self, flat_env):
        # A flat scene has no NLoS pixels at all.
        scene = make_scene(flat_env, seed=1, in_powers=())
        maps = build_scene_maps(scene, realize_fading=False)
        s = draw_samples(maps.total, 0.2, seed=1)
        est = estimate_pathloss(s, scene.env, scene.bs)
        assert not est.los_fallback
        assert est.nlos_fallback
        assert est.nlos_exponent == ChannelParams().nlos_exponent

    def test_single_sample_falls_back_everywhere(self, flat_env):
        scene = make_scene(flat_env, seed=1, in_powers=())
        maps = build_scene_maps(scene, realize_fading=False)
        s = draw_samples(maps.total, 0.00025, seed=1)  # one pixel
        assert s.count == 1
        est = estimate_pathloss(s, scene.env, scene.bs)
        assert est.los_fallback and est.nlos_fallback

    def test_equidistant_samples_raise(self, flat_env):
        # Two pixels mirrored about the transmitter span zero log-distance
        # range, which leaves the regression singular.
        from ckmkit.sampling import SampleSet

        scene = make_scene(flat_env, seed=1, in_powers=())
        maps = build_scene_maps(scene, realize_fading=False)
        bx, by = scene.bs.x_px, scene.bs.y_px
        mask = np.zeros(maps.total.shape, dtype=bool)
        mask[bx, by - 4] = True
        mask[bx, by + 4] = True
        values = np.where(mask, maps.total.data, 0.0)
        s = SampleSet(mask=mask, values=values, rate=0.001, seed=0)
        with pytest.raises(PathlossFitError):
            estimate_pathloss(s, scene.env, scene.bs)


class TestExtraction:
    def test_exact_with_true_parameters(self, urban_env):
        # Handing the generating parameters straight to the extraction
        # removes the fitted model entirely, so subtraction must recover
        # the interference field exactly at every sampled pixel.
        scene = make_scene(urban_env, seed=6)
        maps = build_scene_maps(scene, realize_fading=False)
        s = draw_samples(maps.total, 0.2, seed=6)
        bounds = NormBounds(-120.0, -40.0)
        ext = extract_iss(s, scene.channel, scene.env, scene.bs, bounds)
        got = ext.iss_sparse.data[s.mask]
        want = maps.iss.data[s.mask]
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-22)
        assert ext.negative_fraction == 0.0

    def test_negative_fraction_positive_under_fading(self, urban_env):
        scene = make_scene(urban_env, seed=6)
        maps = build_scene_maps(scene, realize_fading=True)
        s = draw_samples(maps.total, 0.2, seed=6)
        est = estimate_pathloss(s, scene.env, scene.bs)
        ext = extract_iss(s, est, scene.env, scene.bs, NormBounds(-120.0, -40.0))
        assert ext.negative_fraction > 0.0
        assert np.isfinite(ext.preprocessed.data).all()

    def test_preprocessed_range_and_support(self, urban_env):
        scene = make_scene(urban_env, seed=6)
        maps = build_scene_maps(scene, realize_fading=True)
        s = draw_samples(maps.total, 0.2, seed=6)
        est = estimate_pathloss(s, scene.env, scene.bs)
        ext = extract_iss(s, est, scene.env, scene.bs, NormBounds(-120.0, -40.0))
        assert ext.preprocessed.data.min() >= 0.0
        assert ext.preprocessed.data.max() <= 1.0
        assert (ext.preprocessed.data[~s.mask] == 0.0).all()
        assert ext.neg_mask.dtype == bool
        assert not ext.neg_mask[~s.mask].any()

    def test_bounds_type_checked(self, urban_env):
        scene = make_scene(urban_env, seed=6)
        maps = build_scene_maps(scene, realize_fading=False)
        s = draw_samples(maps.total, 0.2, seed=6)
        with pytest.raises(TypeError):
            extract_iss(s, scene.channel, scene.env, scene.bs, (-120.0, -40.0))
