"""Air-to-ground propagation and per-scene power maps.

Channel gain in dB follows a log-distance law with separate parameters per
line-of-sight class, plus an optional zero-mean Gaussian term that lumps
shadowing and small-scale fading into a single dB-domain draw.  Fading is
keyed on (scene seed, transmitter position, pixel), so a single pixel query
and a whole-map build produce identical values.

A scene holds one serving base station plus any number of ground-level
interference sources.  `build_scene_maps` produces the four canonical maps:
desired signal strength, aggregate interference, their sum as measured
received power and the resulting SINR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validate import check_positive
from .env import Environment, is_los, los_grid, pixel_center
from .grid import GridMap
from .rng import hashed_normal, stream_key


@dataclass(frozen=True)
class ChannelParams:
    """Log-distance gain model: gain_db = intercept + exponent*log10(d_m).

    Variances are dB^2; the shadowing and fast-fading contributions are
    realized together as one Gaussian of variance shadow_var_db2 +
    fade_var_db2.
    """

    los_exponent: float = -22.0
    los_intercept_db: float = -28.0
    nlos_exponent: float = -28.0
    nlos_intercept_db: float = -24.0
    shadow_var_db2: float = 1.0
    fade_var_db2: float = 1.0

    def __post_init__(self):
        if self.shadow_var_db2 < 0 or self.fade_var_db2 < 0:
            raise ValueError("variance terms must be non-negative")

    @property
    def fading_sigma_db(self) -> float:
        return math.sqrt(self.shadow_var_db2 + self.fade_var_db2)

    def gain_db(self, distance_m, los) -> np.ndarray:
        """Deterministic gain component for distances and LoS flags."""
        d = np.asarray(distance_m, dtype=np.float64)
        if np.any(d <= 0):
            raise ValueError("distance must be positive")
        los = np.asarray(los, dtype=bool)
        exponent = np.where(los, self.los_exponent, self.nlos_exponent)
        intercept = np.where(los, self.los_intercept_db, self.nlos_intercept_db)
        return intercept + exponent * np.log10(d)


@dataclass(frozen=True)
class Transmitter:
    """A radiating node pinned to a map pixel at a given antenna height."""

    x_px: int
    y_px: int
    height_m: float
    power_w: float

    def position(self, env: Environment) -> np.ndarray:
        px, py = pixel_center(env.config, self.x_px, self.y_px)
        return np.array([px, py, self.height_m])


DEFAULT_BS_HEIGHT_M = 25.0
DEFAULT_IN_HEIGHT_M = 1.5
DEFAULT_NOISE_POWER_W = 1e-14


@dataclass
class Scene:
    """One environment plus its transmitters and noise floor."""

    env: Environment
    channel: ChannelParams
    bs: Transmitter
    interferers: tuple[Transmitter, ...] = ()
    noise_power_w: float = DEFAULT_NOISE_POWER_W
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        check_positive("noise_power_w", self.noise_power_w)
        b_l, b_w = self.env.config.grid_shape
        self.interferers = tuple(self.interferers)
        for tx in (self.bs, *self.interferers):
            check_positive("transmitter power_w", tx.power_w)
            check_positive("transmitter height_m", tx.height_m)
            if not (0 <= tx.x_px < b_l and 0 <= tx.y_px < b_w):
                raise ValueError(f"transmitter pixel ({tx.x_px}, {tx.y_px}) outside grid")
            if self.env.heights[tx.x_px, tx.y_px] >= tx.height_m:
                raise ValueError(
                    f"transmitter at ({tx.x_px}, {tx.y_px}) sits inside a building "
                    f"({self.env.heights[tx.x_px, tx.y_px]:.1f} m structure vs "
                    f"{tx.height_m:.1f} m antenna)"
                )


def _fading_key(scene: Scene, position: np.ndarray) -> np.uint64:
    return stream_key(scene.seed, float(position[0]), float(position[1]), float(position[2]))


def channel_gain_db(scene: Scene, tx, q, realize_fading: bool = False) -> float:
    """Gain in dB between 3-D transmitter position tx and map pixel q."""
    cfg = scene.env.config
    tx = np.asarray(tx, dtype=np.float64)
    x, y = int(q[0]), int(q[1])
    px, py = pixel_center(cfg, x, y)
    rx = np.array([px, py, cfg.uav_altitude_m])
    d = float(np.linalg.norm(rx - tx))
    if d <= 0:
        raise ValueError("transmitter coincides with the receive pixel")
    gain = float(scene.channel.gain_db(d, is_los(scene.env, (x, y), tx)))
    if realize_fading and scene.channel.fading_sigma_db > 0:
        _, b_w = cfg.grid_shape
        idx = x * b_w + y
        gain += float(
            hashed_normal(_fading_key(scene, tx), idx, scene.channel.fading_sigma_db)
        )
    return gain


def gain_grid(scene: Scene, tx, realize_fading: bool = False) -> np.ndarray:
    """dB gain from one transmitter to every map pixel (vectorized)."""
    cfg = scene.env.config
    tx = np.asarray(tx, dtype=np.float64)
    cx, cy = scene.env.pixel_centers()
    d = np.sqrt(
        (cx - tx[0]) ** 2 + (cy - tx[1]) ** 2 + (cfg.uav_altitude_m - tx[2]) ** 2
    )
    if np.any(d <= 0):
        raise ValueError("transmitter coincides with a receive pixel")
    gains = scene.channel.gain_db(d, los_grid(scene.env, tx))
    if realize_fading and scene.channel.fading_sigma_db > 0:
        b_l, b_w = cfg.grid_shape
        idx = np.arange(b_l * b_w, dtype=np.uint64).reshape(b_l, b_w)
        gains = gains + hashed_normal(
            _fading_key(scene, tx), idx, scene.channel.fading_sigma_db
        )
    return gains


def _power_grid(scene: Scene, tx: Transmitter, realize_fading: bool) -> np.ndarray:
    g = gain_grid(scene, tx.position(scene.env), realize_fading)
    return tx.power_w * np.power(10.0, g / 10.0)


def dss_grid(scene: Scene, realize_fading: bool = False) -> np.ndarray:
    """Desired signal strength map in watts (serving base station only)."""
    return _power_grid(scene, scene.bs, realize_fading)


def iss_grid(scene: Scene, realize_fading: bool = False) -> np.ndarray:
    """Aggregate interference strength map in watts (sum over sources)."""
    b_l, b_w = scene.env.config.grid_shape
    total = np.zeros((b_l, b_w))
    for tx in scene.interferers:
        total += _power_grid(scene, tx, realize_fading)
    return total


@dataclass
class SceneMaps:
    """The four canonical maps of one scene realization."""

    dss: GridMap
    iss: GridMap
    total: GridMap
    sinr: GridMap

    def __iter__(self):
        return iter((self.dss, self.iss, self.total, self.sinr))


def build_scene_maps(scene: Scene, realize_fading: bool = False) -> SceneMaps:
    """Assemble DSS, ISS, total received power and SINR for a scene.

    total is the exact elementwise sum dss + iss, and sinr is
    dss / (iss + noise_power_w), both by construction.
    """
    dss = dss_grid(scene, realize_fading)
    iss = iss_grid(scene, realize_fading)
    total = dss + iss
    sinr = dss / (iss + scene.noise_power_w)
    meta = {"seed": scene.seed, **scene.meta}
    return SceneMaps(
        dss=GridMap(dss, "rss_watts", {**meta, "field": "dss"}),
        iss=GridMap(iss, "rss_watts", {**meta, "field": "iss"}),
        total=GridMap(total, "rss_watts", {**meta, "field": "total"}),
        sinr=GridMap(sinr, "sinr_linear", {**meta, "field": "sinr"}),
    )
