"""Additive partial-sum quantization (APSQ) and the grouped accumulation
schedule.

Instead of storing every partial-sum tile at full accumulator width, APSQ
re-quantizes the running accumulation to k bits at each step, so the buffer
only ever holds k-bit codes.  The grouped variant quantizes most tiles
individually (plain PSUM quantization) and folds each group of stored codes
into the running result with a single APSQ step, which cuts the number of
times any value passes through a rounder.

Step schedule for group size gs over n_p incoming tiles: within each group
of gs tiles, the first gs - 1 are quantize-and-store steps; the last tile of
the group (and always the final tile of the layer) triggers the group-closing
accumulate step that reads back the stored codes, dequantizes them into the
wide accumulator, adds the incoming tile, and quantizes once.  gs = 1 makes
every step a closing step and reduces to the plain APSQ recursion; gs >= n_p
degenerates to pure PSUM quantization with one final accumulation.

All arithmetic runs on the exact q16 integer lattice from the quant module;
total buffer traffic (n_p tile writes, n_p - 1 tile reads) is independent of
the group size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .quant import (
    Q16_FRAC_BITS,
    QuantConfig,
    SCALE_EXP_MAX,
    SCALE_EXP_MIN,
    dequantize_q16,
    quantize_q16,
)
from .tiling import Tile


@dataclass(frozen=True)
class ApsqConfig:
    """Accumulation-quantizer settings: bit width, group size and the
    per-step scale exponents (one per PSUM tile index)."""

    k: int = 8
    gs: int = 1
    scales: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.gs < 1:
            raise ValueError(f"gs must be >= 1, got {self.gs}")
        object.__setattr__(self, "scales", tuple(self.scales))
        for e in self.scales:
            if not SCALE_EXP_MIN <= e <= SCALE_EXP_MAX:
                raise ValueError(f"scale exponent {e} out of range")

    def quantizer(self, i: int) -> QuantConfig:
        return QuantConfig(self.k, signed=True, scale_exp=self.scales[i])


@dataclass
class ApsqState:
    """One stored k-bit PSUM entry: its codes and the scale index that
    quantized it."""

    codes: np.ndarray
    index: int


@dataclass
class ApsqResult:
    """Final output codes, their dequantized values, and buffer traffic in
    k-bit element accesses."""

    codes: np.ndarray
    values: np.ndarray
    scale_exp: int
    buffer_reads: int
    buffer_writes: int


def _as_lattice(values: np.ndarray) -> np.ndarray:
    # Object dtype: Python-int elements give unbounded headroom, so the
    # accumulate-then-quantize path is exact at any scale combination.
    return np.asarray(values).astype(object) << Q16_FRAC_BITS


def _check_inputs(tiles: Sequence[Tile], cfg: ApsqConfig) -> int:
    if len(tiles) == 0:
        raise ValueError("need at least one PSUM tile")
    if len(cfg.scales) != len(tiles):
        raise ValueError(
            f"got {len(cfg.scales)} scale exponents for {len(tiles)} tiles"
        )
    shape = tiles[0].shape
    for t in tiles:
        if t.shape != shape:
            raise ValueError(f"tile shape mismatch: {t.shape} vs {shape}")
    return len(tiles)


def _finalize(codes: np.ndarray, cfg: ApsqConfig, n_p: int,
              reads: int, writes: int) -> ApsqResult:
    e = cfg.scales[n_p - 1]
    values = codes.astype(np.float64) * (2.0 ** e)
    return ApsqResult(
        codes=codes.astype(np.int64),
        values=values,
        scale_exp=e,
        buffer_reads=reads,
        buffer_writes=writes,
    )


def apsq_chain(tiles: Sequence[Tile], cfg: ApsqConfig) -> ApsqResult:
    """Plain additive recursion: every incoming tile is folded into the
    previous stored code and re-quantized.

    Step 0 quantizes the first tile directly; step i computes
    Q_i(tile_i + 2**e_{i-1} * code_{i-1}).  The last code, rescaled by its
    own scale, is the layer output.  This is the group-size-1 reference path,
    kept independent of the grouped scheduler on purpose.
    """
    n_p = _check_inputs(tiles, cfg)
    elems = tiles[0].values.size
    codes = quantize_q16(_as_lattice(tiles[0].values), cfg.quantizer(0))
    reads, writes = 0, elems
    for i in range(1, n_p):
        acc = _as_lattice(tiles[i].values) + dequantize_q16(codes, cfg.quantizer(i - 1))
        codes = quantize_q16(acc, cfg.quantizer(i))
        reads += elems
        writes += elems
    return _finalize(codes, cfg, n_p, reads, writes)


def is_closing_step(i: int, gs: int, n_p: int) -> bool:
    """True when step i performs the group-closing accumulate (APSQ)."""
    return (i % gs == gs - 1) or (i == n_p - 1)


def grouped_accumulate(tiles: Sequence[Tile], cfg: ApsqConfig) -> ApsqResult:
    """Grouped APSQ/PSQ schedule over a PSUM tile sequence.

    Non-closing steps quantize the incoming tile and store it.  Closing steps
    read back this group's stored codes plus the previous group's result,
    dequantize each by its own scale into the wide accumulator, add the
    incoming tile, quantize once and store.  Codes are always dequantized
    individually before summation; codes at different scales are never added
    directly.
    """
    n_p = _check_inputs(tiles, cfg)
    elems = tiles[0].values.size
    members: list[ApsqState] = []
    prev: ApsqState | None = None
    reads = writes = 0
    for i, tile in enumerate(tiles):
        if not is_closing_step(i, cfg.gs, n_p):
            codes = quantize_q16(_as_lattice(tile.values), cfg.quantizer(i))
            members.append(ApsqState(codes=codes, index=i))
            writes += elems
            continue
        acc = _as_lattice(tile.values)
        for entry in members:
            acc = acc + dequantize_q16(entry.codes, cfg.quantizer(entry.index))
            reads += elems
        if prev is not None:
            acc = acc + dequantize_q16(prev.codes, cfg.quantizer(prev.index))
            reads += elems
        codes = quantize_q16(acc, cfg.quantizer(i))
        prev = ApsqState(codes=codes, index=i)
        members = []
        writes += elems
    assert prev is not None
    return _finalize(prev.codes, cfg, n_p, reads, writes)


def pure_psq(tiles: Sequence[Tile], cfg: ApsqConfig) -> ApsqResult:
    """Independent reference: quantize each tile exactly once, accumulate all
    dequantized codes with the final tile, and quantize the sum once.

    grouped_accumulate with gs >= n_p must match this bit-exactly.
    """
    n_p = _check_inputs(tiles, cfg)
    elems = tiles[0].values.size
    acc = _as_lattice(tiles[n_p - 1].values)
    reads = writes = 0
    for i in range(n_p - 1):
        codes = quantize_q16(_as_lattice(tiles[i].values), cfg.quantizer(i))
        writes += elems
        acc = acc + dequantize_q16(codes, cfg.quantizer(i))
        reads += elems
    codes = quantize_q16(acc, cfg.quantizer(n_p - 1))
    writes += elems
    return _finalize(codes, cfg, n_p, reads, writes)


@dataclass(frozen=True)
class ErrorMetrics:
    mse: float
    max_abs: float
    sqnr_db: float


def error_metrics(approx: np.ndarray, exact) -> ErrorMetrics:
    """Error of a quantized output against the exact wide-integer tile.

    sqnr_db is 10*log10(sum(exact^2) / sum((exact - approx)^2)); it is +inf
    when the error is exactly zero.
    """
    exact_values = exact.values if isinstance(exact, Tile) else np.asarray(exact)
    approx = np.asarray(approx)
    if approx.shape != exact_values.shape:
        raise ValueError(
            f"shape mismatch: approx {approx.shape} vs exact {exact_values.shape}"
        )
    err = exact_values.astype(np.float64) - approx.astype(np.float64)
    mse = float(np.mean(err ** 2))
    max_abs = float(np.max(np.abs(err))) if err.size else 0.0
    err_power = float(np.sum(err ** 2))
    if err_power == 0.0:
        sqnr = math.inf
    else:
        signal = float(np.sum(exact_values.astype(np.float64) ** 2))
        sqnr = 10.0 * math.log10(signal / err_power) if signal > 0 else -math.inf
    return ErrorMetrics(mse=mse, max_abs=max_abs, sqnr_db=sqnr)


def calibrate_group_scales(streams: Sequence[Sequence[Tile]], k: int,
                           gs: int) -> tuple[int, ...]:
    """Choose one scale exponent per PSUM index from calibration runs.

    Replays the grouped schedule over every calibration stream in lockstep;
    at each step the exact pre-quantization accumulator values are pooled
    across streams and the mean-squared-error-optimal exponent is frozen
    before moving on, so later choices see the quantization effects of
    earlier ones.  Deterministic for fixed streams.
    """
    if len(streams) == 0:
        raise ValueError("need at least one calibration stream")
    n_p = len(streams[0])
    if n_p == 0:
        raise ValueError("calibration streams must be non-empty")
    for s in streams:
        if len(s) != n_p:
            raise ValueError("all calibration streams must have the same length")

    members: list[list[ApsqState]] = [[] for _ in streams]
    prev: list[ApsqState | None] = [None for _ in streams]
    scales: list[int] = []
    for i in range(n_p):
        accs = []
        for s_idx, stream in enumerate(streams):
            acc = _as_lattice(stream[i].values)
            if is_closing_step(i, gs, n_p):
                for entry in members[s_idx]:
                    q = QuantConfig(k, scale_exp=scales[entry.index])
                    acc = acc + dequantize_q16(entry.codes, q)
                p = prev[s_idx]
                if p is not None:
                    q = QuantConfig(k, scale_exp=scales[p.index])
                    acc = acc + dequantize_q16(p.codes, q)
            accs.append(acc)
        pooled = np.concatenate([a.reshape(-1) for a in accs])
        e = _calibrate_scale_q16(pooled, k)
        scales.append(e)
        cfg_i = QuantConfig(k, scale_exp=e)
        for s_idx in range(len(streams)):
            codes = quantize_q16(accs[s_idx], cfg_i)
            entry = ApsqState(codes=codes, index=i)
            if is_closing_step(i, gs, n_p):
                prev[s_idx] = entry
                members[s_idx] = []
            else:
                members[s_idx].append(entry)
    return tuple(scales)


def _calibrate_scale_q16(samples_q16: np.ndarray, k: int) -> int:
    """Exponent grid search on q16-lattice samples (signed quantizers)."""
    best_e = SCALE_EXP_MIN
    best_err = math.inf
    values = samples_q16.astype(np.float64)
    for e in range(SCALE_EXP_MIN, SCALE_EXP_MAX + 1):
        cfg = QuantConfig(k, signed=True, scale_exp=e)
        codes = quantize_q16(samples_q16, cfg)
        deq = (codes << (Q16_FRAC_BITS + e)).astype(np.float64)
        err = float(np.sum((values - deq) ** 2))
        if err < best_err:
            best_err = err
            best_e = e
    return best_e
