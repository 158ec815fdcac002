"""k-bit integer quantization with power-of-two scales.

All quantizers here use a scale alpha = 2**scale_exp so that scaling reduces
to binary shifts in hardware.  Rounding is half-away-from-zero (a cheap
shift-with-carry-in rounder).  Scalar paths use Python integers and are exact
at any magnitude; array paths accept int64 or object (big-int) ndarrays.

Internally, accumulation pipelines represent values on a fixed-point lattice
with Q16_FRAC_BITS fractional bits ("q16 units", value * 2**16).  Every
power-of-two scale down to 2**-16 lands exactly on that lattice, so the
recursive quantize/accumulate paths stay bit-exact without floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SCALE_EXP_MIN = -16
SCALE_EXP_MAX = 31

# Fractional bits of the internal fixed-point lattice.  Matches SCALE_EXP_MIN
# so dequantized codes at any legal scale are integers in lattice units.
Q16_FRAC_BITS = 16


@dataclass(frozen=True)
class QuantConfig:
    """One k-bit quantizer: bit width, signedness and power-of-two scale."""

    bit_width: int
    signed: bool = True
    scale_exp: int = 0

    def __post_init__(self) -> None:
        if not 2 <= self.bit_width <= 32:
            raise ValueError(f"bit_width must be in [2, 32], got {self.bit_width}")
        if not SCALE_EXP_MIN <= self.scale_exp <= SCALE_EXP_MAX:
            raise ValueError(
                f"scale_exp must be in [{SCALE_EXP_MIN}, {SCALE_EXP_MAX}], "
                f"got {self.scale_exp}"
            )

    @property
    def qmin(self) -> int:
        return -(1 << (self.bit_width - 1)) if self.signed else 0

    @property
    def qmax(self) -> int:
        if self.signed:
            return (1 << (self.bit_width - 1)) - 1
        return (1 << self.bit_width) - 1


@dataclass(frozen=True)
class PrecisionSpec:
    """Operand and accumulator storage precisions for one layer."""

    act_bits: int = 8
    weight_bits: int = 8
    psum_bits: int = 32

    def __post_init__(self) -> None:
        if self.psum_bits % 8 != 0:
            raise ValueError("psum_bits must be a multiple of 8 (byte-based memories)")
        if self.psum_bits < self.act_bits:
            raise ValueError("psum_bits must be at least act_bits")

    @property
    def beta(self) -> float:
        """Ratio of accumulator precision to operand precision."""
        return self.psum_bits / self.act_bits


def _round_half_away_shift(x, shift: int):
    """round(x / 2**shift) with ties away from zero; exact integer math.

    Works on Python ints, int64 ndarrays and object ndarrays.  shift <= 0
    degenerates to an exact left shift.
    """
    if shift <= 0:
        return x << (-shift) if shift < 0 else x
    half = 1 << (shift - 1)
    ax = abs(x)
    q = (ax + half) >> shift
    if isinstance(x, np.ndarray):
        return np.where(x < 0, -q, q)
    return -q if x < 0 else q


def _clip(x, lo: int, hi: int):
    if isinstance(x, np.ndarray):
        return np.minimum(np.maximum(x, lo), hi)
    return min(max(x, lo), hi)


def quantize(x, cfg: QuantConfig):
    """Quantize a value (or ndarray) to an integer code in [qmin, qmax].

    Computes clip(round(x / 2**scale_exp), qmin, qmax) with
    half-away-from-zero rounding.  Integer inputs take an exact shift-based
    path; real inputs go through float64.  Clipping is defined behavior,
    not an error.
    """
    e = cfg.scale_exp
    if isinstance(x, np.ndarray):
        if np.issubdtype(x.dtype, np.floating):
            scaled = x / (2.0 ** e)
            codes = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
            return _clip(codes.astype(np.int64), cfg.qmin, cfg.qmax)
        work = x if x.dtype == object else x.astype(np.int64)
        if e >= 0:
            codes = _round_half_away_shift(work, e)
        else:
            # Pre-clip so the left shift cannot overflow int64.
            a = -e
            hi = (cfg.qmax >> a) + 1
            lo = -((-cfg.qmin) >> a) - 1
            codes = _clip(work, lo, hi) << a
        return _clip(codes, cfg.qmin, cfg.qmax)
    if isinstance(x, (float, np.floating)):
        scaled = float(x) / (2.0 ** e)
        code = math.floor(abs(scaled) + 0.5)
        if scaled < 0:
            code = -code
        return _clip(code, cfg.qmin, cfg.qmax)
    return _clip(_round_half_away_shift(int(x), e), cfg.qmin, cfg.qmax)


def dequantize(code, cfg: QuantConfig):
    """Rescale a code back to its value: code * 2**scale_exp.

    For scale_exp >= 0 this is an exact left shift of the integer code.  For
    negative exponents the fractional value is carried exactly in binary
    floating point (the code has at most 32 significant bits).  Codes outside
    [qmin, qmax] violate the contract and raise ValueError.
    """
    e = cfg.scale_exp
    if isinstance(code, np.ndarray):
        work = code if code.dtype == object else code.astype(np.int64)
        if np.any(work < cfg.qmin) or np.any(work > cfg.qmax):
            raise ValueError("code outside quantizer range")
        if e >= 0:
            return work << e
        return work * (2.0 ** e)
    code = int(code)
    if not cfg.qmin <= code <= cfg.qmax:
        raise ValueError(f"code {code} outside [{cfg.qmin}, {cfg.qmax}]")
    return code << e if e >= 0 else code * (2.0 ** e)


def quantize_q16(x_q16, cfg: QuantConfig):
    """Quantize a value given in q16 lattice units (value * 2**16).

    The combined shift 2**(16 + scale_exp) is always non-negative, so this
    path is pure integer arithmetic at any magnitude when fed object arrays.
    """
    shift = Q16_FRAC_BITS + cfg.scale_exp
    return _clip(_round_half_away_shift(x_q16, shift), cfg.qmin, cfg.qmax)


def dequantize_q16(code, cfg: QuantConfig):
    """Rescale a code onto the q16 lattice: code * 2**(16 + scale_exp)."""
    return code << (Q16_FRAC_BITS + cfg.scale_exp)


def calibrate_scale(samples: Sequence[int] | np.ndarray, bit_width: int,
                    signed: bool = True) -> int:
    """Pick the scale exponent minimizing squared dequantization error.

    Searches the full exponent grid [SCALE_EXP_MIN, SCALE_EXP_MAX]; ties are
    broken toward the smaller exponent.  Deterministic for a fixed input.
    Error sums are accumulated in float64, which is ample for the grid
    argmin (candidate errors differ by rounding-residual magnitudes).
    """
    arr = np.asarray(samples)
    if arr.size == 0:
        raise ValueError("calibrate_scale requires at least one sample")
    flat = arr.reshape(-1)
    if flat.dtype != object:
        flat = flat.astype(np.int64)
    values = flat.astype(np.float64)
    best_e = SCALE_EXP_MIN
    best_err = math.inf
    for e in range(SCALE_EXP_MIN, SCALE_EXP_MAX + 1):
        cfg = QuantConfig(bit_width, signed=signed, scale_exp=e)
        codes = quantize(flat, cfg)
        if e >= 0:
            deq = (codes << e).astype(np.float64)
        else:
            deq = codes.astype(np.float64) * (2.0 ** e)
        err = float(np.sum((values - deq) ** 2))
        if err < best_err:
            best_err = err
            best_e = e
    return best_e


def required_psum_bits(c_i: int) -> int:
    """Accumulator bits needed for an 8x8-bit MAC chain of depth c_i.

    Each product is 16 bits; accumulating over c_i input channels grows the
    width by ceil(log2(c_i)) guard bits (16 bits exactly when c_i == 1).
    """
    if c_i < 1:
        raise ValueError(f"c_i must be >= 1, got {c_i}")
    return 16 + (c_i - 1).bit_length()


def stored_psum_bits(c_i: int) -> int:
    """required_psum_bits rounded up to the next byte multiple."""
    bits = required_psum_bits(c_i)
    return ((bits + 7) // 8) * 8
