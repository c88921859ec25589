"""Nearly-nested image datasets: cost-matched crops, calibrated payloads.

The package builds families of fixed-size image datasets cropped from one
mother corpus so that the distribution of embedding costs matches across
sizes, embeds payloads tuned per dimension, and keeps every output byte
reproducible from (inputs, config, seed).
"""

__version__ = "0.1.0"

from .cost_model import CostMap, compute_cost_map, wavelet_residuals
from .embedding import (
    EmbeddingPlan,
    PayloadSpec,
    compute_change_probabilities,
    simulate_embedding,
    srl_payload,
)
from .errors import NnidError
from .histogram import BinningSpec, Histogram, build_histogram, kl_sym
from .integral import IntegralHistogram, build_integral, query_rect
from .smart_crop import CropResult, crop_search_direct, smart_crop_2
from .calibration import CalibrationResult, DetectorOracle, calibrate_payload
from .dilated import DilatedKernel, dilated_conv2d, dilated_inception_block
from .pipeline import (
    DatasetManifest,
    ManifestEntry,
    PipelineConfig,
    assemble_splits,
    build_multi,
    build_nnid,
    embed_dataset,
)

__all__ = [
    "__version__",
    "BinningSpec",
    "CalibrationResult",
    "CostMap",
    "CropResult",
    "DatasetManifest",
    "DetectorOracle",
    "DilatedKernel",
    "EmbeddingPlan",
    "Histogram",
    "IntegralHistogram",
    "ManifestEntry",
    "NnidError",
    "PayloadSpec",
    "PipelineConfig",
    "assemble_splits",
    "build_histogram",
    "build_integral",
    "build_multi",
    "build_nnid",
    "calibrate_payload",
    "compute_change_probabilities",
    "compute_cost_map",
    "crop_search_direct",
    "dilated_conv2d",
    "dilated_inception_block",
    "embed_dataset",
    "kl_sym",
    "query_rect",
    "simulate_embedding",
    "smart_crop_2",
    "srl_payload",
    "wavelet_residuals",
]
