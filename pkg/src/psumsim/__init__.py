"""Bit-exact partial-sum quantization simulator and dataflow energy model."""

from .apsq import (
    ApsqConfig,
    ApsqResult,
    ApsqState,
    ErrorMetrics,
    apsq_chain,
    calibrate_group_scales,
    error_metrics,
    grouped_accumulate,
    pure_psq,
)
from .energy import (
    AccessCounts,
    ApsqInt8,
    BufferConfig,
    EnergyBreakdown,
    EnergyTable,
    PsumStorageMode,
    SweepRow,
    WidePsum,
    access_counts,
    baseline_mode,
    energy_total,
    is_access_counts,
    sweep,
    ws_access_counts,
)
from .quant import (
    PrecisionSpec,
    QuantConfig,
    calibrate_scale,
    dequantize,
    quantize,
    required_psum_bits,
    stored_psum_bits,
)
from .rae import (
    RaeConfig,
    RaeResult,
    RaeTrace,
    bank_traffic,
    decode_mode,
    encode_mode,
    rae_run,
)
from .tiling import (
    LayerShape,
    Parallelism,
    Tile,
    TilePlan,
    compute_psum_tiles,
    exact_output,
    plan_tiles,
)
from .workloads import (
    LayerEntry,
    WorkloadSpec,
    builtin,
    builtin_names,
    load_workload,
    parse_workload,
    serialize_workload,
    synth_tensors,
)

__version__ = "0.1.0"

__all__ = [
    "ApsqConfig", "ApsqResult", "ApsqState", "ErrorMetrics", "apsq_chain",
    "calibrate_group_scales", "error_metrics", "grouped_accumulate", "pure_psq",
    "AccessCounts", "ApsqInt8", "BufferConfig", "EnergyBreakdown", "EnergyTable",
    "PsumStorageMode", "SweepRow", "WidePsum", "access_counts", "baseline_mode",
    "energy_total", "is_access_counts", "sweep", "ws_access_counts",
    "PrecisionSpec", "QuantConfig", "calibrate_scale", "dequantize", "quantize",
    "required_psum_bits", "stored_psum_bits",
    "RaeConfig", "RaeResult", "RaeTrace", "bank_traffic", "decode_mode",
    "encode_mode", "rae_run",
    "LayerShape", "Parallelism", "Tile", "TilePlan", "compute_psum_tiles",
    "exact_output", "plan_tiles",
    "LayerEntry", "WorkloadSpec", "builtin", "builtin_names", "load_workload",
    "parse_workload", "serialize_workload", "synth_tensors",
]
