"""Sparse measurement sampling and interference extraction.

A sample set is a random subset of map pixels (uniform, without
replacement) carrying measured received power.  From those measurements the
serving link's log-distance parameters are re-estimated per line-of-sight
class, the implied base-station contribution is subtracted, and what
remains is the sparse interference map.  Negative leftovers (where the
fitted base-station power overshoots the measurement) are recorded in an
indicator mask; magnitudes are clamped, converted to dB and min-max
normalized with dataset-level bounds so the result lives in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validate import as_binary_mask, check_fraction, check_same_shape
from .channel import ChannelParams, Transmitter
from .env import Environment, los_grid
from .grid import GridMap
from .rng import splitmix64, stream_key

# Power floor applied before any dB conversion.
POWER_FLOOR_W = 1e-20

# Robust pathloss fitting: rounds of refitting, and the fraction of the
# most positive residuals dropped per round (positive residual = measured
# power above the model, the signature of interference contamination).
_TRIM_ROUNDS = 5
_TRIM_FRACTION = 0.2


class PathlossFitError(ValueError):
    """Raised when the pathloss design matrix is singular."""


def power_to_db(power_w) -> np.ndarray:
    """10*log10 with the shared power floor."""
    return 10.0 * np.log10(np.maximum(np.asarray(power_w, dtype=np.float64), POWER_FLOOR_W))


def db_to_power(db) -> np.ndarray:
    return np.power(10.0, np.asarray(db, dtype=np.float64) / 10.0)


@dataclass(frozen=True)
class NormBounds:
    """dB-domain min-max normalization bounds."""

    r_min_db: float
    r_max_db: float

    def __post_init__(self):
        if not (np.isfinite(self.r_min_db) and np.isfinite(self.r_max_db)):
            raise ValueError("normalization bounds must be finite")
        if self.r_max_db <= self.r_min_db:
            raise ValueError(
                f"r_max_db ({self.r_max_db}) must exceed r_min_db ({self.r_min_db})"
            )

    @property
    def span_db(self) -> float:
        return self.r_max_db - self.r_min_db

    def normalize(self, db) -> np.ndarray:
        """Map dB values into [0, 1], clipping anything outside the bounds."""
        u = (np.asarray(db, dtype=np.float64) - self.r_min_db) / self.span_db
        return np.clip(u, 0.0, 1.0)

    def denormalize(self, u) -> np.ndarray:
        """Invert normalize back to dB (exact for values inside the bounds)."""
        return np.asarray(u, dtype=np.float64) * self.span_db + self.r_min_db

    def to_dict(self) -> dict:
        return {"r_min_db": self.r_min_db, "r_max_db": self.r_max_db}

    @classmethod
    def from_dict(cls, d: dict) -> "NormBounds":
        return cls(float(d["r_min_db"]), float(d["r_max_db"]))


@dataclass
class SampleSet:
    """Measured pixels: a boolean mask plus values (zero off-mask)."""

    mask: np.ndarray
    values: np.ndarray
    rate: float
    seed: int

    def __post_init__(self):
        self.mask = as_binary_mask("mask", self.mask)
        self.values = np.asarray(self.values, dtype=np.float64)
        check_same_shape("mask", self.mask, "values", self.values)
        if np.any(self.values[~self.mask] != 0.0):
            raise ValueError("sample values must be zero at unsampled pixels")

    @property
    def count(self) -> int:
        return int(self.mask.sum())


def sample_mask(shape: tuple[int, int], rate: float, seed: int) -> np.ndarray:
    """Draw floor(rate * n_pixels) distinct pixels uniformly at random.

    Pixels are ranked by a per-pixel hash of the seed, which makes the mask
    a pure function of (shape, rate, seed) and straightforward to reproduce
    outside this package.
    """
    rate = check_fraction("rate", rate, open_low=True)
    n = shape[0] * shape[1]
    k = math.floor(rate * n)
    if k < 1:
        raise ValueError(f"rate {rate} selects zero pixels on a {shape} grid")
    key = stream_key(seed, 0x53414D50)  # 'SAMP'
    h = splitmix64(np.uint64(key) ^ np.arange(n, dtype=np.uint64))
    order = np.argsort(h, kind="stable")
    mask = np.zeros(n, dtype=bool)
    mask[order[:k]] = True
    return mask.reshape(shape)


def draw_samples(field: GridMap, rate: float, seed: int) -> SampleSet:
    """Sample a power map at the given rate; values are mask * field."""
    mask = sample_mask(field.shape, rate, seed)
    values = np.where(mask, field.data, 0.0)
    return SampleSet(mask=mask, values=values, rate=float(rate), seed=int(seed))


@dataclass(frozen=True)
class EstimatedParams:
    """Fitted log-distance parameters per LoS class.

    A class with fewer than two usable samples falls back to the supplied
    prior values and is flagged through the corresponding *_fallback field.
    residual_rms_db pools the final active-set residuals of both fits.
    """

    los_exponent: float
    los_intercept_db: float
    nlos_exponent: float
    nlos_intercept_db: float
    residual_rms_db: float
    los_fallback: bool = False
    nlos_fallback: bool = False

    def gain_db(self, distance_m, los) -> np.ndarray:
        d = np.asarray(distance_m, dtype=np.float64)
        los = np.asarray(los, dtype=bool)
        exponent = np.where(los, self.los_exponent, self.nlos_exponent)
        intercept = np.where(los, self.los_intercept_db, self.nlos_intercept_db)
        return intercept + exponent * np.log10(d)


def _ls_fit(log_d: np.ndarray, y: np.ndarray) -> np.ndarray:
    design = np.column_stack([log_d, np.ones_like(log_d)])
    theta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 2:
        raise PathlossFitError(
            "singular pathloss fit: sampled distances do not span the design "
            "(all samples equidistant from the base station?)"
        )
    return theta


def _fit_class(log_d: np.ndarray, y: np.ndarray, robust: bool):
    theta = _ls_fit(log_d, y)
    if not robust:
        resid = y - (theta[0] * log_d + theta[1])
        return theta, resid
    active = np.arange(log_d.size)
    for _ in range(_TRIM_ROUNDS):
        resid = y[active] - (theta[0] * log_d[active] + theta[1])
        n_drop = math.ceil(_TRIM_FRACTION * active.size)
        if active.size - n_drop < 3:
            break
        keep = np.argsort(resid, kind="stable")[: active.size - n_drop]
        active = active[np.sort(keep)]
        theta = _ls_fit(log_d[active], y[active])
    resid = y[active] - (theta[0] * log_d[active] + theta[1])
    return theta, resid


def transmitter_distances(env: Environment, tx: Transmitter) -> np.ndarray:
    """3-D distance from a transmitter to every UAV-plane pixel center."""
    cfg = env.config
    cx, cy = env.pixel_centers()
    pos = tx.position(env)
    return np.sqrt(
        (cx - pos[0]) ** 2 + (cy - pos[1]) ** 2 + (cfg.uav_altitude_m - pos[2]) ** 2
    )


def estimate_pathloss(
    samples: SampleSet,
    env: Environment,
    bs: Transmitter,
    mode: str = "robust",
    priors: ChannelParams | None = None,
) -> EstimatedParams:
    """Fit per-class log-distance parameters from measured received power.

    mode="robust" (default) iteratively drops the most positive residuals,
    which are the samples most contaminated by interference.  mode="plain"
    is a single least-squares pass for sample values already known to be
    interference-free.  To bypass fitting entirely and use known generating
    parameters, skip this function: the extraction step accepts a
    ChannelParams directly.
    """
    if mode not in ("robust", "plain"):
        raise ValueError(f"mode must be 'robust' or 'plain', got {mode!r}")
    priors = priors or ChannelParams()

    d = transmitter_distances(env, bs)[samples.mask]
    los = los_grid(env, bs.position(env))[samples.mask]
    y = power_to_db(samples.values[samples.mask]) - 10.0 * math.log10(bs.power_w)
    log_d = np.log10(d)

    results: dict[bool, tuple[float, float]] = {}
    fallback = {True: False, False: False}
    pooled = []
    for is_los_class in (True, False):
        sel = los == is_los_class
        if sel.sum() < 2:
            fallback[is_los_class] = True
            if is_los_class:
                results[True] = (priors.los_exponent, priors.los_intercept_db)
            else:
                results[False] = (priors.nlos_exponent, priors.nlos_intercept_db)
            continue
        theta, resid = _fit_class(log_d[sel], y[sel], robust=(mode == "robust"))
        results[is_los_class] = (float(theta[0]), float(theta[1]))
        pooled.append(resid)

    rms = float(np.sqrt(np.mean(np.concatenate(pooled) ** 2))) if pooled else float("nan")
    return EstimatedParams(
        los_exponent=results[True][0],
        los_intercept_db=results[True][1],
        nlos_exponent=results[False][0],
        nlos_intercept_db=results[False][1],
        residual_rms_db=rms,
        los_fallback=fallback[True],
        nlos_fallback=fallback[False],
    )


def predicted_bs_power_grid(
    est: EstimatedParams | ChannelParams, env: Environment, bs: Transmitter
) -> np.ndarray:
    """Fading-free base-station power map implied by fitted parameters."""
    d = transmitter_distances(env, bs)
    los = los_grid(env, bs.position(env))
    return bs.power_w * db_to_power(est.gain_db(d, los))


@dataclass
class ExtractionResult:
    """Sparse interference recovered by subtracting the fitted BS power.

    iss_sparse is signed (watts): negative where the fitted base-station
    power exceeded the measurement, which neg_mask records.  preprocessed
    is the clamped |iss_sparse| in normalized dB, zero at unsampled pixels.
    """

    iss_sparse: GridMap
    neg_mask: np.ndarray
    preprocessed: GridMap
    sample_mask: np.ndarray
    bounds: NormBounds

    @property
    def negative_fraction(self) -> float:
        """Share of sampled pixels with a negative extraction."""
        n = self.sample_mask.sum()
        return float(self.neg_mask.sum() / n) if n else 0.0


def extract_iss(
    samples: SampleSet,
    est: EstimatedParams | ChannelParams,
    env: Environment,
    bs: Transmitter,
    bounds: NormBounds,
) -> ExtractionResult:
    """Subtract the estimated serving-link power from sampled measurements."""
    if not isinstance(bounds, NormBounds):
        raise TypeError("bounds must be a NormBounds instance (see dataset manifest)")
    bs_hat = predicted_bs_power_grid(est, env, bs)
    iss_sparse = np.where(samples.mask, samples.values - bs_hat, 0.0)
    neg_mask = samples.mask & (iss_sparse < 0.0)
    magnitude = np.where(samples.mask, np.maximum(np.abs(iss_sparse), POWER_FLOOR_W), 0.0)
    preprocessed = np.where(samples.mask, bounds.normalize(power_to_db(magnitude)), 0.0)
    meta = {"rate": samples.rate, "seed": samples.seed}
    return ExtractionResult(
        iss_sparse=GridMap(iss_sparse, "rss_watts", {**meta, "signed": True}),
        neg_mask=neg_mask,
        preprocessed=GridMap(preprocessed, "normalized", dict(meta)),
        sample_mask=samples.mask.copy(),
        bounds=bounds,
    )
