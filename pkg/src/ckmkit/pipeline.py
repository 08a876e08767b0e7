"""End-to-end reconstruction chain for one scene.

Wires together sampling, pathloss fitting, interference extraction, spatial
reconstruction, denormalization, SINR estimation and localization so the
CLI and evaluation code run the exact same steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .channel import ChannelParams, Scene, Transmitter
from .env import Environment
from .grid import GridMap
from .interpolate import make_reconstructor, reconstruct
from .postprocess import (
    CFARConfig,
    DenormFit,
    LocalizationResult,
    denormalized_iss_map,
    estimate_sinr_map,
    fit_denormalization,
    localize_ins,
)
from .sampling import (
    EstimatedParams,
    ExtractionResult,
    NormBounds,
    SampleSet,
    draw_samples,
    estimate_pathloss,
    extract_iss,
    power_to_db,
    predicted_bs_power_grid,
)

DEFAULT_RATE_SWEEP = (0.05, 0.10, 0.20, 0.30, 0.50)
RECONSTRUCTION_METHODS = ("knn", "idw", "rbf", "kriging")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the per-scene chain needs besides the scene itself."""

    rate: float = 0.2
    sample_seed: int = 0
    method: str = "kriging"
    estimator_params: dict = field(default_factory=dict)
    # "robust" and "plain" fit from the samples; "true" skips fitting and
    # uses pathloss_priors as the known generating parameters.
    pathloss_mode: str = "robust"
    pathloss_priors: ChannelParams = field(default_factory=ChannelParams)
    cfar: CFARConfig = field(default_factory=CFARConfig)
    localize: bool = True


@dataclass
class PipelineResult:
    samples: SampleSet
    pathloss: EstimatedParams | ChannelParams
    extraction: ExtractionResult
    recon_norm: GridMap
    denorm: DenormFit
    iss_hat: GridMap
    dss_hat: GridMap
    sinr_hat: GridMap
    localization: LocalizationResult | None


def run_reconstruction(
    total: GridMap,
    env: Environment,
    bs: Transmitter,
    bounds: NormBounds,
    noise_power_w: float,
    cfg: PipelineConfig = PipelineConfig(),
) -> PipelineResult:
    """Observed total map + scene geometry -> interference and SINR estimates."""
    samples = draw_samples(total, cfg.rate, cfg.sample_seed)
    if cfg.pathloss_mode == "true":
        pathloss: EstimatedParams | ChannelParams = cfg.pathloss_priors
    else:
        pathloss = estimate_pathloss(
            samples, env, bs, mode=cfg.pathloss_mode, priors=cfg.pathloss_priors
        )
    extraction = extract_iss(samples, pathloss, env, bs, bounds)
    estimator = make_reconstructor(cfg.method, **cfg.estimator_params)
    recon_norm = reconstruct(extraction.preprocessed, extraction.sample_mask, estimator)
    denorm = fit_denormalization(recon_norm, extraction)
    iss_hat = denormalized_iss_map(recon_norm, denorm)
    dss_hat = GridMap(
        predicted_bs_power_grid(pathloss, env, bs), "rss_watts", dict(recon_norm.meta)
    )
    sinr_hat = estimate_sinr_map(recon_norm, denorm, dss_hat, noise_power_w)
    loc = None
    if cfg.localize:
        iss_db = GridMap(power_to_db(iss_hat.data), "gain_db", dict(iss_hat.meta))
        loc = localize_ins(iss_db, cfg.cfar)
    return PipelineResult(
        samples=samples,
        pathloss=pathloss,
        extraction=extraction,
        recon_norm=recon_norm,
        denorm=denorm,
        iss_hat=iss_hat,
        dss_hat=dss_hat,
        sinr_hat=sinr_hat,
        localization=loc,
    )


def run_on_scene(
    scene: Scene,
    total: GridMap,
    bounds: NormBounds,
    cfg: PipelineConfig = PipelineConfig(),
) -> PipelineResult:
    return run_reconstruction(
        total, scene.env, scene.bs, bounds, scene.noise_power_w, cfg
    )
