"""From reconstructed interference maps to SINR and source locations.

The reconstruction lives in a normalized [0, 1] domain.  Its dB scale is
recovered by regressing the reconstructed values at the non-negative
sampled pixels against the measured sparse interference dB values (a
closed-form 2x2 least-squares solve).  The denormalized interference map
then yields an SINR estimate, and a cell-averaging 2-D CFAR detector with
guard and training rings turns the interference map into a list of source
locations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._validate import check_positive
from .grid import GridMap
from .sampling import POWER_FLOOR_W, ExtractionResult, db_to_power, power_to_db


class DenormalizationError(ValueError):
    """Raised when the affine dB recovery is underdetermined."""


@dataclass(frozen=True)
class DenormFit:
    """Affine map from normalized values back to dB.

    r_min_db_hat is the fitted intercept and r_max_db_hat the value a
    normalized 1.0 denormalizes to.  On noisy fits r_max_db_hat may fall
    at or below r_min_db_hat; the fit is still usable as an affine map.
    """

    r_min_db_hat: float
    r_max_db_hat: float
    n_points: int

    @property
    def span_db(self) -> float:
        return self.r_max_db_hat - self.r_min_db_hat

    def denormalize(self, u) -> np.ndarray:
        return np.asarray(u, dtype=np.float64) * self.span_db + self.r_min_db_hat


def fit_denormalization(recon: GridMap, extraction: ExtractionResult) -> DenormFit:
    """Recover dB bounds by least squares over non-negative sampled pixels.

    Solves for (span, intercept) in r_hat ~= span * r_bar + intercept where
    r_bar are reconstructed normalized values and r_hat the measured sparse
    interference in dB, restricted to sampled pixels whose extraction was
    non-negative.  Uses the closed-form 2x2 normal equations.
    """
    if recon.kind != "normalized":
        raise ValueError(f"expected a normalized reconstruction, got {recon.kind!r}")
    sel = extraction.sample_mask & ~extraction.neg_mask
    n = int(sel.sum())
    if n < 2:
        raise DenormalizationError(
            f"need at least 2 non-negative sampled pixels to fit, have {n}"
        )
    r_bar = recon.data[sel]
    r_hat = power_to_db(np.maximum(extraction.iss_sparse.data[sel], POWER_FLOOR_W))

    s_x = float(r_bar.sum())
    s_xx = float((r_bar * r_bar).sum())
    s_y = float(r_hat.sum())
    s_xy = float((r_bar * r_hat).sum())
    det = n * s_xx - s_x * s_x
    scale = max(n * s_xx, 1.0)
    if abs(det) <= 1e-12 * scale:
        raise DenormalizationError(
            "reconstructed values are constant at the sampled pixels; "
            "the affine fit is underdetermined"
        )
    span = (n * s_xy - s_x * s_y) / det
    intercept = (s_y * s_xx - s_x * s_xy) / det
    return DenormFit(
        r_min_db_hat=float(intercept),
        r_max_db_hat=float(intercept + span),
        n_points=n,
    )


def denormalized_iss_map(recon: GridMap, fit: DenormFit) -> GridMap:
    """Reconstruction mapped back to interference power in watts."""
    watts = db_to_power(fit.denormalize(recon.data))
    return GridMap(watts, "rss_watts", dict(recon.meta))


def estimate_sinr_map(
    recon: GridMap, fit: DenormFit, dss_hat: GridMap, noise_power_w: float
) -> GridMap:
    """SINR from a denormalized interference map and an estimated DSS map."""
    check_positive("noise_power_w", noise_power_w)
    if dss_hat.kind != "rss_watts":
        raise ValueError(f"dss_hat must be an rss_watts map, got {dss_hat.kind!r}")
    if dss_hat.shape != recon.shape:
        raise ValueError("dss_hat and reconstruction shapes disagree")
    iss_w = db_to_power(fit.denormalize(recon.data))
    sinr = dss_hat.data / (iss_w + noise_power_w)
    return GridMap(sinr, "sinr_linear", dict(recon.meta))


# ---------------------------------------------------------------------------
# CA-CFAR detection

@dataclass(frozen=True)
class CFARConfig:
    """Cell-averaging CFAR geometry and false-alarm setting.

    guard and train are half-widths in pixels of the square guard block and
    training ring.  The threshold multiplier alpha = n * (pfa^(-1/n) - 1)
    is computed per cell from its actual (edge-truncated) training count n;
    pfa must stay below exp(-1) so alpha > 1 and a constant map can never
    fire.
    """

    guard: int = 2
    train: int = 4
    pfa: float = 0.3

    def __post_init__(self):
        if int(self.guard) < 0 or int(self.train) < 1:
            raise ValueError("need guard >= 0 and train >= 1")
        if not (0.0 < self.pfa < math.exp(-1)):
            raise ValueError(
                f"pfa must lie in (0, {math.exp(-1):.4f}) so the CFAR offset "
                f"stays positive, got {self.pfa}"
            )

    @property
    def window_half(self) -> int:
        return int(self.guard) + int(self.train)


@dataclass(frozen=True)
class Detection:
    x_px: int
    y_px: int
    score_db: float


@dataclass
class LocalizationResult:
    detections: tuple[Detection, ...]
    m_hat: int

    def pixels(self) -> np.ndarray:
        return np.array([[d.x_px, d.y_px] for d in self.detections], dtype=float).reshape(-1, 2)


def _box_sums(arr: np.ndarray, half: int):
    """Edge-truncated (2*half+1)-square box sums and cell counts."""
    size = 2 * half + 1
    kernel_sum = ndimage.uniform_filter(arr, size=size, mode="constant", cval=0.0) * size**2
    counts = (
        ndimage.uniform_filter(np.ones_like(arr), size=size, mode="constant", cval=0.0)
        * size**2
    )
    return kernel_sum, np.rint(counts)


def cfar_threshold_map(lin: np.ndarray, cfg: CFARConfig):
    """Per-cell CA-CFAR threshold over a linear-power map."""
    big_sum, big_cnt = _box_sums(lin, cfg.window_half)
    guard_sum, guard_cnt = _box_sums(lin, int(cfg.guard))
    ring_sum = big_sum - guard_sum
    ring_cnt = big_cnt - guard_cnt
    noise = ring_sum / ring_cnt
    alpha = ring_cnt * (np.power(cfg.pfa, -1.0 / ring_cnt) - 1.0)
    return alpha * noise


def localize_ins(iss_map_db: GridMap, cfg: CFARConfig = CFARConfig()) -> LocalizationResult:
    """Detect interference sources in a dB-domain map with CA-CFAR.

    Thresholding happens in the linear power domain.  Cells above threshold
    are clustered by 8-connectivity; each cluster reports its peak pixel
    and the peak's dB margin over its threshold.  Detections are ordered by
    descending score (ties by pixel).
    """
    if iss_map_db.kind != "gain_db":
        raise ValueError(
            f"localize_ins expects a dB-domain map (kind 'gain_db'), got {iss_map_db.kind!r}"
        )
    window = 2 * cfg.window_half + 1
    if window > min(iss_map_db.shape):
        raise ValueError(
            f"CFAR window {window} exceeds the grid {iss_map_db.shape}"
        )
    lin = db_to_power(iss_map_db.data)
    threshold = cfar_threshold_map(lin, cfg)
    hits = lin > threshold
    labels, n_clusters = ndimage.label(hits, structure=np.ones((3, 3), dtype=int))

    detections = []
    for lab in range(1, n_clusters + 1):
        members = np.argwhere(labels == lab)
        vals = lin[members[:, 0], members[:, 1]]
        peak = members[int(np.argmax(vals))]
        x, y = int(peak[0]), int(peak[1])
        score = 10.0 * math.log10(lin[x, y] / threshold[x, y])
        detections.append(Detection(x, y, float(score)))
    detections.sort(key=lambda d: (-d.score_db, d.x_px, d.y_px))
    return LocalizationResult(tuple(detections), len(detections))
