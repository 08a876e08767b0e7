import numpy as np
import pytest

from ckmkit.env import (
    EnvConfig,
    InfeasibleEnvironmentError,
    generate_environment,
    is_los,
    los_grid,
    pixel_center,
    rayleigh_heights,
    segment_is_clear,
)


class TestEnvConfig:
    def test_grid_shape(self):
        cfg = EnvConfig(length_m=512, width_m=512, resolution_m=4)
        assert cfg.grid_shape == (128, 128)

    def test_side_must_divide(self):
        with pytest.raises(ValueError):
            EnvConfig(length_m=510, width_m=512, resolution_m=4)

    def test_altitude_capped_by_max_height(self):
        with pytest.raises(ValueError):
            EnvConfig(uav_altitude_m=150.0, max_height_m=120.0)

    def test_ratio_range(self):
        with pytest.raises(ValueError):
            EnvConfig(built_ratio=1.2)

    def test_pixel_center(self):
        cfg = EnvConfig(length_m=512, width_m=512, resolution_m=4)
        assert pixel_center(cfg, 0, 0) == (2.0, 2.0)
        assert pixel_center(cfg, 127, 0) == (510.0, 2.0)


class TestHeights:
    def test_rayleigh_mean(self):
        rng = np.random.default_rng(0)
        h = rayleigh_heights(rng, 200_000, mean_m=40.0, cap_m=1e9)
        assert abs(h.mean() - 40.0) / 40.0 < 0.01

    def test_cap_applied(self):
        rng = np.random.default_rng(0)
        h = rayleigh_heights(rng, 50_000, mean_m=40.0, cap_m=120.0)
        assert h.max() <= 120.0
        assert h.min() > 0.0


class TestGeneration:
    def test_realized_ratio_close_to_target(self):
        ratios = []
        for seed in range(8):
            env = generate_environment(EnvConfig(seed=seed))
            ratios.append(env.realized_built_ratio)
            assert env.built_ratio_ok
            assert abs(env.realized_built_ratio - 0.25) <= 0.025
        assert 0.2 < np.mean(ratios) < 0.3

    def test_flat_when_ratio_zero(self):
        env = generate_environment(EnvConfig(built_ratio=0.0, seed=3))
        assert env.heights.max() == 0.0
        assert env.buildings == ()
        assert env.built_ratio_ok

    def test_zero_density_with_positive_ratio_is_infeasible(self):
        cfg = EnvConfig(built_ratio=0.25, buildings_per_km2=0.0)
        with pytest.raises(InfeasibleEnvironmentError):
            generate_environment(cfg)

    def test_deterministic_in_seed(self):
        a = generate_environment(EnvConfig(seed=5))
        b = generate_environment(EnvConfig(seed=5))
        np.testing.assert_array_equal(a.heights, b.heights)
        assert a.buildings == b.buildings

    def test_heights_never_exceed_cap(self):
        env = generate_environment(EnvConfig(seed=9))
        assert env.heights.max() <= 120.0


class TestLineOfSight:
    def test_empty_scene_all_los(self, flat_env):
        q = np.array([128.0, 128.0, 40.0])
        los = los_grid(flat_env, q)
        assert los.all()

    def test_wall_blocks(self, flat_env):
        # Hand-built wall across the middle of a copy of the flat scene.
        env = flat_env
        heights = env.heights.copy()
        heights[32, :] = 100.0
        from ckmkit.env import Environment

        walled = Environment(env.config, heights, (), True)
        q = np.array([250.0, 128.0, 40.0])
        assert not is_los(walled, (2, 32), q)
        assert is_los(walled, (40, 32), q)

    def test_los_grid_matches_pointwise(self, urban_env):
        q = np.array([128.0, 128.0, 120.0])
        grid = los_grid(urban_env, q)
        for x in range(0, 64, 7):
            for y in range(0, 64, 7):
                assert grid[x, y] == is_los(urban_env, (x, y), q)

    def test_segment_symmetry(self, urban_env):
        a = np.array([10.0, 10.0, 1.5])
        b = np.array([200.0, 180.0, 120.0])
        assert segment_is_clear(urban_env, a, b) == segment_is_clear(urban_env, b, a)

    def test_antenna_above_roof_sees_out(self, flat_env):
        heights = flat_env.heights.copy()
        heights[32, :] = 30.0
        from ckmkit.env import Environment

        walled = Environment(flat_env.config, heights, (), True)
        # Receiver plane at 40 m clears a 30 m wall.
        q = np.array([250.0, 128.0, 40.0])
        assert is_los(walled, (2, 32), q)
