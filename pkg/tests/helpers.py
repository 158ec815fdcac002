"""Shared test utilities: tile builders and randomized case generators."""

from __future__ import annotations

import numpy as np

from psumsim import ApsqConfig, Tile


def scalar_tiles(values) -> list[Tile]:
    """Wrap a list of ints as 1x1 tiles (for hand-worked examples)."""
    return [Tile(values=np.array([[v]], dtype=np.int64), index=i)
            for i, v in enumerate(values)]


def random_tiles(rng: np.random.Generator, n_p: int, shape=(2, 2),
                 mag_bits: int = 20) -> list[Tile]:
    lim = 1 << mag_bits
    return [Tile(values=rng.integers(-lim, lim, size=shape, dtype=np.int64), index=i)
            for i in range(n_p)]


def random_scales(rng: np.random.Generator, n_p: int, lo: int = -6,
                  hi: int = 10) -> tuple[int, ...]:
    return tuple(int(x) for x in rng.integers(lo, hi + 1, size=n_p))


def random_case(rng: np.random.Generator, max_np: int = 32,
                k_choices=(4, 6, 8), shape=(2, 2)):
    """One randomized accumulation problem: (tiles, ApsqConfig without gs)."""
    n_p = int(rng.integers(1, max_np + 1))
    k = int(rng.choice(k_choices))
    scales = random_scales(rng, n_p)
    tiles = random_tiles(rng, n_p, shape=shape)
    return tiles, k, scales


def cfg_for(k: int, gs: int, scales) -> ApsqConfig:
    return ApsqConfig(k=k, gs=gs, scales=scales)
