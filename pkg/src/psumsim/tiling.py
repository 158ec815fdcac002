"""Reference tile-based integer GEMM.

A layer's matrix multiply is split along the input-channel dimension into
n_p = ceil(c_i / p_ci) partial-sum tiles that accumulate into one output
tile of shape (p_o, p_co).  The tiles here are exact wide integers; their
element-wise sum is the golden reference every quantized accumulation path
is checked against.

Convolution layers with kernel > 1 are lowered to this GEMM view via im2col
at the workload level, so the compute path itself only sees k = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Wide-integer bound for tile values: 28-bit worst case for INT8 operand
# accumulation plus generous headroom, so int64 intermediates never overflow.
TILE_VALUE_BITS = 47


@dataclass(frozen=True)
class LayerShape:
    """Layer dimensions in the output-channel / input-channel GEMM view.

    For transformer GEMMs h_o * w_o is the token count and k = stride = 1.
    """

    c_i: int
    c_o: int
    h_o: int
    w_o: int
    k: int = 1
    stride: int = 1

    def __post_init__(self) -> None:
        for name in ("c_i", "c_o", "h_o", "w_o", "k", "stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def tokens(self) -> int:
        return self.h_o * self.w_o

    @property
    def macs(self) -> int:
        return self.h_o * self.w_o * self.c_i * self.c_o * self.k * self.k


def _near_square_split(n: int) -> tuple[int, int]:
    for d in range(math.isqrt(n), 0, -1):
        if n % d == 0:
            return n // d, d
    return n, 1


@dataclass(frozen=True)
class Parallelism:
    """MAC-array parallelism over output pixels, input and output channels.

    p_o is the number of output positions computed in parallel; its 2-D
    split (p_oh x p_ow) is derived near-square and only matters for the
    halo-enlarged input-tile size of kernels > 1.  p_ih x p_iw shape the
    stationary input tile of the IS dataflow.
    """

    p_o: int
    p_ci: int
    p_co: int
    p_ih: int = 1
    p_iw: int = 1

    def __post_init__(self) -> None:
        for name in ("p_o", "p_ci", "p_co", "p_ih", "p_iw"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def p_i(self) -> int:
        return self.p_ih * self.p_iw

    @property
    def p_oh(self) -> int:
        return _near_square_split(self.p_o)[0]

    @property
    def p_ow(self) -> int:
        return _near_square_split(self.p_o)[1]


@dataclass(frozen=True)
class Tile:
    """One wide-integer PSUM/output tile of shape (p_o, p_co)."""

    values: np.ndarray
    index: int = 0

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError(f"tile must be 2-D, got shape {self.values.shape}")
        limit = 1 << TILE_VALUE_BITS
        if self.values.size and int(np.max(np.abs(self.values))) >= limit:
            raise ValueError(f"tile values must satisfy |v| < 2**{TILE_VALUE_BITS}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class TilePlan:
    """Input-channel partition of one layer into PSUM tiles."""

    c_i: int
    p_ci: int
    ranges: tuple[tuple[int, int], ...]

    @property
    def n_p(self) -> int:
        return len(self.ranges)


def plan_tiles(shape: LayerShape, par: Parallelism) -> TilePlan:
    """Partition [0, c_i) into n_p = ceil(c_i / p_ci) channel ranges.

    The last range may be ragged; the MAC array zero-pads it to p_ci, which
    leaves the computed values unchanged.
    """
    n_p = -(-shape.c_i // par.p_ci)
    ranges = tuple(
        (i * par.p_ci, min((i + 1) * par.p_ci, shape.c_i)) for i in range(n_p)
    )
    return TilePlan(c_i=shape.c_i, p_ci=par.p_ci, ranges=ranges)


def compute_psum_tiles(ifmap: np.ndarray, weights: np.ndarray,
                       plan: TilePlan) -> list[Tile]:
    """Exact integer GEMM of each input-channel slice.

    ifmap has shape (p_o, c_i) and weights (c_i, p_co); tile i is the product
    over the plan's i-th channel range, with no rounding anywhere.
    """
    if ifmap.ndim != 2 or weights.ndim != 2:
        raise ValueError("ifmap and weights must be 2-D")
    if ifmap.shape[1] != weights.shape[0]:
        raise ValueError(
            f"dimension mismatch: ifmap {ifmap.shape} vs weights {weights.shape}"
        )
    if ifmap.shape[1] != plan.c_i:
        raise ValueError(
            f"plan covers c_i={plan.c_i} but tensors have c_i={ifmap.shape[1]}"
        )
    lhs = ifmap.astype(np.int64)
    rhs = weights.astype(np.int64)
    tiles = []
    for i, (a, b) in enumerate(plan.ranges):
        tiles.append(Tile(values=lhs[:, a:b] @ rhs[a:b, :], index=i))
    return tiles


def exact_output(tiles: Sequence[Tile]) -> Tile:
    """Element-wise wide-integer sum of all PSUM tiles (the golden oracle)."""
    if not tiles:
        raise ValueError("exact_output requires at least one tile")
    shape = tiles[0].shape
    for t in tiles:
        if t.shape != shape:
            raise ValueError(f"tile shape mismatch: {t.shape} vs {shape}")
    acc = np.zeros(shape, dtype=np.int64)
    for t in tiles:
        acc = acc + t.values
    return Tile(values=acc, index=len(tiles) - 1)
