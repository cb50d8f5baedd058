"""strideseg: sub-linear change-point detection for very long sequences."""

from .model import (
    ChangePointEstimate,
    DetectionReport,
    PiecewiseConfig,
    StridesegError,
    SubsampleGrid,
    build_signal,
    lambda2,
    signal_at,
    validate_report_dict,
)
from .pipeline import (
    AnalyticQuantileSource,
    PipelineConfig,
    QuantileSource,
    StagePlan,
    confidence_intervals,
    detect,
    estimate_sigma,
    plan_allocation,
)
from .rwdist import (
    LDistTable,
    NoiseSpec,
    WalkSpec,
    build_table,
    quantile,
    quantile_upper_bound,
    read_table,
    simulate_argmin,
    tail_bound,
    truncation_for,
    write_table,
)
from .segmentation import SegmentationParams, binseg, wbinseg
from .seqio import FileSeries, MemorySeries, open_series, write_raw
from .synth import alternating_config, emulation_config, gen_config, gen_series

__version__ = "0.1.0"

__all__ = [
    "ChangePointEstimate",
    "DetectionReport",
    "PiecewiseConfig",
    "StridesegError",
    "SubsampleGrid",
    "build_signal",
    "lambda2",
    "signal_at",
    "validate_report_dict",
    "AnalyticQuantileSource",
    "PipelineConfig",
    "QuantileSource",
    "StagePlan",
    "confidence_intervals",
    "detect",
    "estimate_sigma",
    "plan_allocation",
    "LDistTable",
    "NoiseSpec",
    "WalkSpec",
    "build_table",
    "quantile",
    "quantile_upper_bound",
    "read_table",
    "simulate_argmin",
    "tail_bound",
    "truncation_for",
    "write_table",
    "SegmentationParams",
    "binseg",
    "wbinseg",
    "FileSeries",
    "MemorySeries",
    "open_series",
    "write_raw",
    "alternating_config",
    "emulation_config",
    "gen_config",
    "gen_series",
    "__version__",
]
