"""Keyed counter-based uniform streams.

Every random quantity in this package is a pure function of a
:class:`StreamKey` ``(master_seed, level, cell, tag)`` and a draw index.
There is no hidden generator state: the ``i``-th variate of a stream can be
computed directly, in any order, from any process, and always comes out the
same.  This is what makes environments re-queryable, walks replayable and
parallel reductions worker-count independent.

The generator itself is a two-lane keyed hash: the key fields are absorbed
sponge-style into two independent 64-bit lanes (SplitMix64 finalizer on lane
one, Murmur3 ``fmix64`` on lane two), and output word ``i`` is the XOR of the
two lane streams evaluated at counter ``i``.  Each lane on its own is a
full-avalanche counter generator; the XOR gives 128 bits of effective key
material so that key collisions are out of reach at any realistic scale.
Not cryptographic, and not meant to be.

All hot paths work on uint64 ndarrays (numpy wraps array arithmetic silently;
scalar arithmetic would warn on overflow).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "StreamKey",
    "UniformStream",
    "derive_stream",
    "derive_seed",
    "TAG_ENV",
    "TAG_OFFSET",
    "TAG_WALK",
    "TAG_DERIVE",
    "TAG_BOOT",
]

# Stream purpose discriminators.  Environment law parameters, the per-field
# lattice offset, walk-step noise, seed derivation and bootstrap resampling
# never share a key.
TAG_ENV = 0
TAG_OFFSET = 1
TAG_WALK = 2
TAG_DERIVE = 3
TAG_BOOT = 4
TAG_DITHER = 5

_U64 = np.uint64
_MASK64 = (1 << 64) - 1

# SplitMix64 finalizer constants (lane 1) and Murmur3 fmix64 (lane 2).
_M1A = 0xBF58476D1CE4E5B9
_M1B = 0x94D049BB133111EB
_M2A = 0xFF51AFD7ED558CCD
_M2B = 0xC4CEB9FE1A85EC53

# Weyl increments for the two output counters and the absorption offset.
_GAMMA1 = 0x9E3779B97F4A7C15
_GAMMA2 = 0xC2B2AE3D27D4EB4F

# Lane initialization vectors (hex digits of pi).
_IV1 = 0x243F6A8885A308D3
_IV2 = 0x452821E638D01377

_INV_2_53 = float(2.0**-53)


def _u64(x) -> np.ndarray:
    """Coerce ints / int arrays to uint64 ndarrays (two's complement)."""
    a = np.asarray(x)
    if a.dtype == np.uint64:
        return a
    return a.astype(np.int64).view(np.uint64) if a.dtype.kind == "i" else a.astype(np.uint64)


def _mix1(z: np.ndarray) -> np.ndarray:
    # errstate: uint64 wraparound is the point; 0-d operands would warn.
    with np.errstate(over="ignore"):
        z = z ^ (z >> _U64(30))
        z = z * _U64(_M1A)
        z = z ^ (z >> _U64(27))
        z = z * _U64(_M1B)
        return z ^ (z >> _U64(31))


def _mix2(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z ^ (z >> _U64(33))
        z = z * _U64(_M2A)
        z = z ^ (z >> _U64(33))
        z = z * _U64(_M2B)
        return z ^ (z >> _U64(33))


def seed_lanes(master_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Initial lane pair for a 64-bit master seed (0-d uint64 arrays)."""
    s = _u64(np.asarray(int(master_seed) & _MASK64, dtype=np.uint64))
    return _mix1(s ^ _U64(_IV1)), _mix2(s ^ _U64(_IV2))


def absorb(lanes: tuple[np.ndarray, np.ndarray], word) -> tuple[np.ndarray, np.ndarray]:
    """Fold one key word (int or broadcastable int array) into both lanes."""
    w = _u64(word)
    h1, h2 = lanes
    with np.errstate(over="ignore"):
        a1, a2 = h1 ^ (w + _U64(_GAMMA1)), h2 ^ (w + _U64(_GAMMA2))
    return _mix1(a1), _mix2(a2)


def words_at(lanes: tuple[np.ndarray, np.ndarray], index) -> np.ndarray:
    """Raw 64-bit output words at the given draw indices (broadcast)."""
    i = _u64(index) + _U64(1)
    h1, h2 = lanes
    with np.errstate(over="ignore"):
        a1, a2 = h1 + i * _U64(_GAMMA1), h2 + i * _U64(_GAMMA2)
    return _mix1(a1) ^ _mix2(a2)


def uniforms_at(lanes: tuple[np.ndarray, np.ndarray], index) -> np.ndarray:
    """Uniform [0,1) variates at the given draw indices (broadcast)."""
    return (words_at(lanes, index) >> _U64(11)).astype(np.float64) * _INV_2_53


@dataclass(frozen=True)
class StreamKey:
    """Address of one uniform stream.

    master_seed: 64-bit run seed; level: time coordinate; cell: spatial
    cell index tuple (any length); tag: purpose discriminator.  Equal keys
    give identical streams; any single-field difference gives a
    statistically independent stream.
    """

    master_seed: int
    level: int
    cell: tuple[int, ...]
    tag: int

    def lanes(self) -> tuple[np.ndarray, np.ndarray]:
        lanes = seed_lanes(self.master_seed)
        lanes = absorb(lanes, self.tag)
        lanes = absorb(lanes, self.level)
        lanes = absorb(lanes, len(self.cell))
        for c in self.cell:
            lanes = absorb(lanes, c)
        return lanes


def seed_lanes_vec(master_seeds) -> tuple[np.ndarray, np.ndarray]:
    """Initial lane pairs for an array of master seeds."""
    s = _u64(np.asarray(master_seeds))
    return _mix1(s ^ _U64(_IV1)), _mix2(s ^ _U64(_IV2))


def lanes_for_cells(
    base_lanes: tuple[np.ndarray, np.ndarray],
    level: int,
    tag: int,
    cells: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Lane pairs for cells under shared or per-row base lanes.

    ``cells`` has shape (..., d) with d >= 0; a 1-d array is read as a list
    of d=1 cells.  ``base_lanes`` must broadcast against ``cells[..., j]``.
    Entry by entry the result is bit-identical to
    ``StreamKey(seed, level, cell, tag).lanes()``.
    """
    cells = np.asarray(cells)
    if cells.ndim == 1:
        cells = cells[:, None]
    d = cells.shape[-1]
    lanes = absorb(base_lanes, tag)
    lanes = absorb(lanes, level)
    lanes = absorb(lanes, d)
    for j in range(d):
        lanes = absorb(lanes, cells[..., j])
    return lanes


def key_lanes(
    master_seed: int, level: int, tag: int, cells: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Lane pairs for many cells sharing (master_seed, level, tag)."""
    return lanes_for_cells(seed_lanes(master_seed), level, tag, cells)


def derive_seeds_vec(master_seed: int, *word_arrays) -> np.ndarray:
    """Vectorized :func:`derive_seed` over broadcastable index arrays."""
    lanes = seed_lanes(master_seed)
    lanes = absorb(lanes, TAG_DERIVE)
    lanes = absorb(lanes, len(word_arrays))
    for w in word_arrays:
        lanes = absorb(lanes, np.asarray(w))
    return words_at(lanes, 0)


class UniformStream:
    """Replayable uniform [0,1) stream for one key.

    ``take(n)`` consumes the next ``n`` variates; ``at(i, n)`` reads without
    consuming; ``reset()`` rewinds.  Output is a pure function of the key and
    the draw index, so interleaving with other streams changes nothing.
    """

    __slots__ = ("key", "_lanes", "_pos")

    def __init__(self, key: StreamKey):
        self.key = key
        self._lanes = key.lanes()
        self._pos = 0

    @property
    def position(self) -> int:
        return self._pos

    def take(self, n: int) -> np.ndarray:
        out = uniforms_at(self._lanes, np.arange(self._pos, self._pos + n))
        self._pos += n
        return out

    def at(self, start: int, n: int = 1) -> np.ndarray:
        return uniforms_at(self._lanes, np.arange(start, start + n))

    def words(self, n: int) -> np.ndarray:
        out = words_at(self._lanes, np.arange(self._pos, self._pos + n))
        self._pos += n
        return out

    def reset(self) -> None:
        self._pos = 0


def derive_stream(key: StreamKey) -> UniformStream:
    """Stateless-replayable uniform stream determined by ``key`` alone."""
    return UniformStream(key)


def derive_seed(master_seed: int, *words: int) -> int:
    """Derive a child 64-bit seed from a master seed and index words.

    Used to give replicas (environments, walk pairs) their own master seeds
    without any sequential generator state.
    """
    lanes = seed_lanes(master_seed)
    lanes = absorb(lanes, TAG_DERIVE)
    lanes = absorb(lanes, len(words))
    for w in words:
        lanes = absorb(lanes, w)
    return int(words_at(lanes, 0))
