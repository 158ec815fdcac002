"""Accumulator-precision-aware analytical energy model.

Counts SRAM and DRAM element accesses per tensor for the weight-stationary
(WS) and input-stationary (IS) dataflows of a tiled MAC-array accelerator,
then prices them with per-access energy constants.  The PSUM term carries a
precision factor (stored accumulator bytes per operand byte), which is what
makes wide partial sums expensive: they multiply both the access volume and
the on-chip footprint that decides whether the accumulation spills to DRAM.

Counting unit is one 8-bit element.  A tensor's working set "fits" when its
footprint is <= the buffer capacity; exceeding it doubles the SRAM traffic
for that tensor and adds a DRAM round trip per revisit.

Default energy constants (overridable through EnergyTable or a key=value
file) follow the widely used 45 nm estimates: DRAM at 160 pJ and a 256 KB
class SRAM at 6.25 pJ per 8-bit element, 0.25 pJ per INT8 MAC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

from .quant import stored_psum_bits
from .tiling import LayerShape, Parallelism

DEFAULT_E_SRAM_PJ = 6.25
DEFAULT_E_DRAM_PJ = 160.0
DEFAULT_E_MAC_PJ = 0.25

KIB = 1024


@dataclass(frozen=True)
class BufferConfig:
    """On-chip SRAM capacities in bytes (ifmap, weight, ofmap/PSUM)."""

    b_i: int = 256 * KIB
    b_w: int = 128 * KIB
    b_o: int = 256 * KIB

    def __post_init__(self) -> None:
        for name in ("b_i", "b_w", "b_o"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


# Smaller preset sometimes used for edge-class configurations.
COMPACT_BUFFERS = BufferConfig(b_i=128 * KIB, b_w=64 * KIB, b_o=128 * KIB)


@dataclass(frozen=True)
class EnergyTable:
    """Per-access energies in pJ: one 8-bit element for DRAM/SRAM, one INT8
    multiply-accumulate for e_mac."""

    e_dram: float = DEFAULT_E_DRAM_PJ
    e_sram: float = DEFAULT_E_SRAM_PJ
    e_mac: float = DEFAULT_E_MAC_PJ

    def __post_init__(self) -> None:
        if not (self.e_dram > self.e_sram > 0):
            raise ValueError("expected e_dram > e_sram > 0")
        if self.e_mac <= 0:
            raise ValueError("e_mac must be positive")

    @classmethod
    def from_file(cls, path: str) -> "EnergyTable":
        """Parse a flat key = value override file.

        Recognized keys: e_sram_pj, e_dram_pj, e_mac_pj.  Missing keys keep
        their defaults; blank lines and '#' comments are ignored.
        """
        values = {}
        key_map = {"e_sram_pj": "e_sram", "e_dram_pj": "e_dram", "e_mac_pj": "e_mac"}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, _, val = line.partition("=")
                key = key.strip()
                if key not in key_map:
                    raise ValueError(
                        f"{path}:{lineno}: unknown key {key!r} "
                        f"(expected one of {sorted(key_map)})"
                    )
                try:
                    values[key_map[key]] = float(val.strip())
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad number {val.strip()!r}") from exc
        return cls(**values)


@dataclass(frozen=True)
class WidePsum:
    """Partial sums stored at full width: psum_bits per element.

    Both the access volume and the buffer footprint scale by
    psum_bits / 8 relative to the 8-bit operands.
    """

    psum_bits: int

    def __post_init__(self) -> None:
        if self.psum_bits % 8 != 0 or self.psum_bits < 8:
            raise ValueError("psum_bits must be a positive multiple of 8")

    @property
    def capacity_factor(self) -> int:
        return self.psum_bits // 8

    @property
    def access_factor(self) -> int:
        return self.psum_bits // 8

    @property
    def label(self) -> str:
        return f"int{self.psum_bits}"


@dataclass(frozen=True)
class ApsqInt8:
    """Grouped additive PSUM quantization: INT8 accesses, but gs stored
    copies resident per tile, so the capacity test uses gs bytes per element
    while the traffic term stays at operand precision."""

    gs: int

    def __post_init__(self) -> None:
        if not 1 <= self.gs <= 4:
            raise ValueError(f"gs must be in [1, 4], got {self.gs}")

    @property
    def capacity_factor(self) -> int:
        return self.gs

    @property
    def access_factor(self) -> int:
        return 1

    @property
    def label(self) -> str:
        return f"apsq-gs{self.gs}"


PsumStorageMode = Union[WidePsum, ApsqInt8]


def baseline_mode(shape: LayerShape) -> WidePsum:
    """Normalization baseline: accumulators stored at the byte-rounded width
    required by the layer's accumulation depth."""
    return WidePsum(stored_psum_bits(shape.c_i))


@dataclass(frozen=True)
class AccessCounts:
    """Per-tensor access multipliers, tensor sizes (8-bit elements), MAC
    count and the PSUM precision factor applied in the totals."""

    n_s_i: int
    n_s_w: int
    n_s_p: int
    n_s_o: int
    n_d_i: int
    n_d_w: int
    n_d_p: int
    n_d_o: int
    s_i: int
    s_w: int
    s_o: int
    n_m: int
    beta_access: int
    psum_footprint_bytes: int
    psum_spilled: bool

    @property
    def n_s(self) -> int:
        return (self.s_i * self.n_s_i + self.s_w * self.n_s_w
                + self.beta_access * self.s_o * self.n_s_p + self.s_o * self.n_s_o)

    @property
    def n_d(self) -> int:
        return (self.s_i * self.n_d_i + self.s_w * self.n_d_w
                + self.beta_access * self.s_o * self.n_d_p + self.s_o * self.n_d_o)


def _fits(footprint_bytes: int, capacity_bytes: int) -> bool:
    # Exact fit stays on chip; only exceeding the capacity spills.
    return footprint_bytes <= capacity_bytes


def enlarged_input_dims(shape: LayerShape) -> tuple[int, int]:
    """Full ifmap height/width after kernel/stride enlargement."""
    return ((shape.h_o - 1) * shape.stride + shape.k,
            (shape.w_o - 1) * shape.stride + shape.k)


def input_tile_bytes(shape: LayerShape, par: Parallelism) -> int:
    """Halo-expanded input-tile footprint feeding one output tile.

    ((p_oh - 1) * stride + k) x ((p_ow - 1) * stride + k) 8-bit elements;
    degenerates to p_o for the pointwise (k = 1, stride = 1) GEMM case.
    """
    th = (par.p_oh - 1) * shape.stride + shape.k
    tw = (par.p_ow - 1) * shape.stride + shape.k
    return th * tw


def _tensor_sizes(shape: LayerShape) -> tuple[int, int, int]:
    h_i, w_i = enlarged_input_dims(shape)
    s_i = h_i * w_i * shape.c_i
    s_w = shape.k * shape.k * shape.c_i * shape.c_o
    s_o = shape.h_o * shape.w_o * shape.c_o
    return s_i, s_w, s_o


def ws_access_counts(shape: LayerShape, par: Parallelism, buf: BufferConfig,
                     mode: PsumStorageMode) -> AccessCounts:
    """Weight-stationary access counts.

    Weights stay pinned in the array (two SRAM touches, one DRAM load) while
    ifmap tiles stream in once per output-channel tile group.  The PSUM
    working set is tokens * p_co * capacity_factor bytes; while it fits the
    ofmap buffer each of the n_p - 1 revisits costs one SRAM write + read,
    doubling and adding a DRAM round trip on spill.
    """
    n_p = math.ceil(shape.c_i / par.p_ci)
    s_i, s_w, s_o = _tensor_sizes(shape)
    co_tiles = math.ceil(shape.c_o / par.p_co)

    i_fits = _fits(input_tile_bytes(shape, par), buf.b_i)
    n_s_i = 1 + co_tiles if i_fits else 2 * co_tiles
    n_d_i = 1 if i_fits else co_tiles

    footprint = shape.h_o * shape.w_o * par.p_co * mode.capacity_factor
    p_fits = _fits(footprint, buf.b_o)
    n_s_p = (2 if p_fits else 4) * (n_p - 1)
    n_d_p = (0 if p_fits else 2) * (n_p - 1)

    return AccessCounts(
        n_s_i=n_s_i, n_s_w=2, n_s_p=n_s_p, n_s_o=2,
        n_d_i=n_d_i, n_d_w=1, n_d_p=n_d_p, n_d_o=1,
        s_i=s_i, s_w=s_w, s_o=s_o, n_m=shape.macs,
        beta_access=mode.access_factor,
        psum_footprint_bytes=footprint,
        psum_spilled=not p_fits,
    )


def is_access_counts(shape: LayerShape, par: Parallelism, buf: BufferConfig,
                     mode: PsumStorageMode) -> AccessCounts:
    """Input-stationary access counts.

    Input tiles stay resident (two ifmap SRAM touches total) while every
    weight is re-streamed once per stationary input tile, so the weight
    multiplier is the input tile grid ceil(h_i/p_ih) * ceil(w_i/p_iw),
    doubled with a DRAM reload per tile when the weights overflow their
    buffer.  The PSUM working set here is c_o * p_o * capacity_factor bytes.
    """
    n_p = math.ceil(shape.c_i / par.p_ci)
    s_i, s_w, s_o = _tensor_sizes(shape)
    h_i, w_i = enlarged_input_dims(shape)
    w_tiles = math.ceil(h_i / par.p_ih) * math.ceil(w_i / par.p_iw)

    w_fits = _fits(s_w, buf.b_w)
    n_s_w = 1 + w_tiles if w_fits else 2 * w_tiles
    n_d_w = 1 if w_fits else w_tiles

    footprint = shape.c_o * par.p_o * mode.capacity_factor
    p_fits = _fits(footprint, buf.b_o)
    n_s_p = (2 if p_fits else 4) * (n_p - 1)
    n_d_p = (0 if p_fits else 2) * (n_p - 1)

    return AccessCounts(
        n_s_i=2, n_s_w=n_s_w, n_s_p=n_s_p, n_s_o=2,
        n_d_i=1, n_d_w=n_d_w, n_d_p=n_d_p, n_d_o=1,
        s_i=s_i, s_w=s_w, s_o=s_o, n_m=shape.macs,
        beta_access=mode.access_factor,
        psum_footprint_bytes=footprint,
        psum_spilled=not p_fits,
    )


DATAFLOWS = ("is", "ws")


def access_counts(dataflow: str, shape: LayerShape, par: Parallelism,
                  buf: BufferConfig, mode: PsumStorageMode) -> AccessCounts:
    if dataflow == "ws":
        return ws_access_counts(shape, par, buf, mode)
    if dataflow == "is":
        return is_access_counts(shape, par, buf, mode)
    raise ValueError(f"unknown dataflow {dataflow!r}, expected one of {DATAFLOWS}")


@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-tensor-category energy in pJ; total is the exact sum of parts."""

    ifmap_pj: float
    weight_pj: float
    psum_pj: float
    ofmap_pj: float
    mac_pj: float

    @property
    def total_pj(self) -> float:
        return self.ifmap_pj + self.weight_pj + self.psum_pj + self.ofmap_pj + self.mac_pj

    def scaled(self, factor: float) -> "EnergyBreakdown":
        return EnergyBreakdown(
            ifmap_pj=self.ifmap_pj * factor,
            weight_pj=self.weight_pj * factor,
            psum_pj=self.psum_pj * factor,
            ofmap_pj=self.ofmap_pj * factor,
            mac_pj=self.mac_pj * factor,
        )

    def __add__(self, other: "EnergyBreakdown") -> "EnergyBreakdown":
        return EnergyBreakdown(
            ifmap_pj=self.ifmap_pj + other.ifmap_pj,
            weight_pj=self.weight_pj + other.weight_pj,
            psum_pj=self.psum_pj + other.psum_pj,
            ofmap_pj=self.ofmap_pj + other.ofmap_pj,
            mac_pj=self.mac_pj + other.mac_pj,
        )


ZERO_ENERGY = EnergyBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)


def energy_total(counts: AccessCounts, table: EnergyTable) -> EnergyBreakdown:
    """Price the access counts: per category, SRAM accesses * e_sram plus
    DRAM accesses * e_dram, with MACs at e_mac each."""
    return EnergyBreakdown(
        ifmap_pj=counts.s_i * (counts.n_s_i * table.e_sram + counts.n_d_i * table.e_dram),
        weight_pj=counts.s_w * (counts.n_s_w * table.e_sram + counts.n_d_w * table.e_dram),
        psum_pj=counts.beta_access * counts.s_o
        * (counts.n_s_p * table.e_sram + counts.n_d_p * table.e_dram),
        ofmap_pj=counts.s_o * (counts.n_s_o * table.e_sram + counts.n_d_o * table.e_dram),
        mac_pj=counts.n_m * table.e_mac,
    )


@dataclass(frozen=True)
class SweepRow:
    """One (layer, dataflow, mode) evaluation.  Energy fields and the n_s /
    n_d / n_m totals are scaled by the layer's repeat count so that the
    per-dataflow TOTAL row is their exact sum; counts stays per-instance
    (None on TOTAL rows)."""

    workload: str
    layer: str
    dataflow: str
    mode: str
    gs: int | None
    psum_bits: int | None
    repeat: int
    counts: AccessCounts | None
    energy: EnergyBreakdown
    n_s: int
    n_d: int
    n_m: int
    ratio: float


TOTAL_LABEL = "TOTAL"

_MODE_BASELINE = "baseline"
_MODE_WIDE = "wide"
_MODE_APSQ = "apsq"


def _mode_columns(mode: PsumStorageMode | None) -> tuple[int | None, int | None]:
    if isinstance(mode, ApsqInt8):
        return mode.gs, None
    if isinstance(mode, WidePsum):
        return None, mode.psum_bits
    return None, None


def sweep(workload, dataflows: Sequence[str], table: EnergyTable,
          gs_values: Sequence[int] = (), psum_bits_values: Sequence[int] = (),
          include_baseline: bool = True) -> list[SweepRow]:
    """Evaluate a workload across dataflows and PSUM storage modes.

    Emits per-layer rows plus one TOTAL row per (dataflow, mode), each with
    its energy normalized to the matching stored-width baseline row (the
    baseline is always evaluated for normalization even when its rows are
    not included).  Row order is deterministic: dataflow, then mode
    (baseline, wide widths ascending, grouped modes by gs), then layers in
    workload order.
    """
    rows: list[SweepRow] = []
    for dataflow in dataflows:
        if dataflow not in DATAFLOWS:
            raise ValueError(f"unknown dataflow {dataflow!r}")
        base_layer_totals: list[float] = []
        base_total = 0.0
        for entry in workload.layers:
            counts = access_counts(dataflow, entry.shape, workload.parallelism,
                                   workload.buffers, baseline_mode(entry.shape))
            pj = energy_total(counts, table).total_pj * entry.repeat
            base_layer_totals.append(pj)
            base_total += pj

        modes: list[tuple[str, PsumStorageMode | None]] = []
        if include_baseline:
            modes.append((_MODE_BASELINE, None))
        for bits in sorted(set(psum_bits_values)):
            modes.append((_MODE_WIDE, WidePsum(bits)))
        for gs in sorted(set(gs_values)):
            modes.append((_MODE_APSQ, ApsqInt8(gs)))

        for tag, mode in modes:
            gs_col, bits_col = _mode_columns(mode)
            agg = ZERO_ENERGY
            agg_ns = agg_nd = agg_nm = 0
            for li, entry in enumerate(workload.layers):
                layer_mode = mode if mode is not None else baseline_mode(entry.shape)
                counts = access_counts(dataflow, entry.shape, workload.parallelism,
                                       workload.buffers, layer_mode)
                energy = energy_total(counts, table).scaled(entry.repeat)
                agg = agg + energy
                n_s = counts.n_s * entry.repeat
                n_d = counts.n_d * entry.repeat
                n_m = counts.n_m * entry.repeat
                agg_ns += n_s
                agg_nd += n_d
                agg_nm += n_m
                base = base_layer_totals[li]
                rows.append(SweepRow(
                    workload=workload.name, layer=entry.label, dataflow=dataflow,
                    mode=tag, gs=gs_col,
                    psum_bits=bits_col if mode is not None else stored_psum_bits(entry.shape.c_i),
                    repeat=entry.repeat, counts=counts, energy=energy,
                    n_s=n_s, n_d=n_d, n_m=n_m,
                    ratio=energy.total_pj / base if base else 1.0,
                ))
            rows.append(SweepRow(
                workload=workload.name, layer=TOTAL_LABEL, dataflow=dataflow,
                mode=tag, gs=gs_col, psum_bits=bits_col,
                repeat=1, counts=None, energy=agg,
                n_s=agg_ns, n_d=agg_nd, n_m=agg_nm,
                ratio=agg.total_pj / base_total if base_total else 1.0,
            ))
    return rows
