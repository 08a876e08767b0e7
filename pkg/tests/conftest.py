import numpy as np
import pytest

from ckmkit.channel import ChannelParams, Scene, Transmitter
from ckmkit.env import EnvConfig, Environment, generate_environment


@pytest.fixture(scope="session")
def flat_env():
    """64x64 empty scene, receiver plane at 40 m."""
    cfg = EnvConfig(
        length_m=256.0,
        width_m=256.0,
        max_height_m=120.0,
        resolution_m=4.0,
        built_ratio=0.0,
        uav_altitude_m=40.0,
        seed=0,
    )
    return generate_environment(cfg)


@pytest.fixture(scope="session")
def urban_env():
    """64x64 scene with the default urban coverage statistics."""
    cfg = EnvConfig(
        length_m=256.0,
        width_m=256.0,
        max_height_m=120.0,
        resolution_m=4.0,
        uav_altitude_m=120.0,
        seed=11,
    )
    return generate_environment(cfg)


def make_scene(env: Environment, seed: int = 0, in_powers=(40.0, 10.0, 10.0),
               channel: ChannelParams | None = None) -> Scene:
    """Scene with the base station near the center and corners-ish interferers."""
    b_l, b_w = env.config.grid_shape
    free = np.argwhere(env.heights < 25.0)
    center = np.array([b_l // 2, b_w // 2])
    bs_xy = free[np.argmin(((free - center) ** 2).sum(axis=1))]
    bs = Transmitter(int(bs_xy[0]), int(bs_xy[1]), 25.0, 40.0)

    ground = np.argwhere(env.heights == 0.0)
    anchors = np.array([[4, 4], [4, b_w - 5], [b_l - 5, b_w // 2]])[: len(in_powers)]
    ins = []
    for anchor, p in zip(anchors, in_powers):
        xy = ground[np.argmin(((ground - anchor) ** 2).sum(axis=1))]
        ins.append(Transmitter(int(xy[0]), int(xy[1]), 1.5, float(p)))
    return Scene(
        env=env,
        channel=channel or ChannelParams(),
        bs=bs,
        interferers=tuple(ins),
        noise_power_w=1e-14,
        seed=seed,
    )
