"""Interference-aware channel knowledge map toolkit.

Simulates urban air-to-ground radio scenes with hidden interferers,
extracts sparse interference samples from aggregate measurements, rebuilds
dense interference and SINR maps with classical spatial estimators, and
localizes the interferers on the result.  Everything is deterministic in
the seeds, down to the serialized bytes.
"""

from .channel import (
    DEFAULT_BS_HEIGHT_M,
    DEFAULT_IN_HEIGHT_M,
    DEFAULT_NOISE_POWER_W,
    ChannelParams,
    Scene,
    SceneMaps,
    Transmitter,
    build_scene_maps,
    channel_gain_db,
    gain_grid,
)
from .dataset import (
    DatasetConfig,
    DatasetReader,
    generate_dataset,
    place_bs,
    place_interferers,
)
from .env import (
    Building,
    EnvConfig,
    Environment,
    InfeasibleEnvironmentError,
    generate_environment,
    is_los,
    los_grid,
)
from .grid import MAP_KINDS, GridMap
from .interpolate import (
    IDWReconstructor,
    KNNReconstructor,
    KrigingReconstructor,
    RBFReconstructor,
    ReconstructionError,
    make_reconstructor,
    reconstruct,
)
from .mapio import ContainerError, read_env, read_map, write_env, write_map
from .metrics import LocalizationScore, localization_error, nmse_db, scene_localization_error
from .pipeline import PipelineConfig, PipelineResult, run_on_scene, run_reconstruction
from .postprocess import (
    CFARConfig,
    DenormalizationError,
    DenormFit,
    Detection,
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
    PathlossFitError,
    SampleSet,
    db_to_power,
    draw_samples,
    estimate_pathloss,
    extract_iss,
    power_to_db,
    sample_mask,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "Scene",
    "SceneMaps",
    "Transmitter",
    "build_scene_maps",
    "channel_gain_db",
    "gain_grid",
    "DEFAULT_BS_HEIGHT_M",
    "DEFAULT_IN_HEIGHT_M",
    "DEFAULT_NOISE_POWER_W",
    "DatasetConfig",
    "DatasetReader",
    "generate_dataset",
    "place_bs",
    "place_interferers",
    "Building",
    "EnvConfig",
    "Environment",
    "InfeasibleEnvironmentError",
    "generate_environment",
    "is_los",
    "los_grid",
    "GridMap",
    "MAP_KINDS",
    "KNNReconstructor",
    "IDWReconstructor",
    "RBFReconstructor",
    "KrigingReconstructor",
    "ReconstructionError",
    "make_reconstructor",
    "reconstruct",
    "ContainerError",
    "read_env",
    "read_map",
    "write_env",
    "write_map",
    "LocalizationScore",
    "localization_error",
    "nmse_db",
    "scene_localization_error",
    "PipelineConfig",
    "PipelineResult",
    "run_on_scene",
    "run_reconstruction",
    "CFARConfig",
    "DenormFit",
    "DenormalizationError",
    "Detection",
    "LocalizationResult",
    "denormalized_iss_map",
    "estimate_sinr_map",
    "fit_denormalization",
    "localize_ins",
    "EstimatedParams",
    "ExtractionResult",
    "NormBounds",
    "PathlossFitError",
    "SampleSet",
    "db_to_power",
    "draw_samples",
    "estimate_pathloss",
    "extract_iss",
    "power_to_db",
    "sample_mask",
    "__version__",
]
