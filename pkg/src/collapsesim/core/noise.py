"""Seeded Wiener increments.

Generator: Philox-4x64-10 (counter-based), keyed directly by the pair
``(seed, stream)``: key word 0 holds the 64-bit master seed and key word 1 the
stream index. No hashing is involved, so stream ``i`` of seed ``s`` is the same
sequence no matter how many other streams exist or in which order they are
consumed.

Gaussian method: Box-Muller on consecutive pairs of 53-bit uniforms taken
from the raw 64-bit Philox output, ``u = ((r >> 11) + 1) * 2**-53`` in (0, 1].
Each pair (u1, u2) yields ``sqrt(-2 ln u1) * cos(2 pi u2)`` followed by
``sqrt(-2 ln u1) * sin(2 pi u2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53


def _check_seed(seed: int, stream: int) -> None:
    if int(seed) != seed or not 0 <= seed <= _MASK64:
        raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    if int(stream) != stream or not 0 <= stream <= _MASK64:
        raise InvalidArgumentError(f"stream must be a 64-bit unsigned integer, got {stream!r}")


def philox(seed: int, stream: int = 0) -> np.random.Philox:
    _check_seed(seed, stream)
    return np.random.Philox(key=(int(stream) << 64) | int(seed))


def stream_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """A ``numpy.random.Generator`` on the (seed, stream) Philox sub-stream.

    Used for non-Gaussian draws (exponential waiting times, categorical jump
    positions) where numpy's documented ``random()`` transform is sufficient.
    """
    return np.random.Generator(philox(seed, stream))


def _uniforms(bitgen: np.random.Philox, n: int) -> np.ndarray:
    raw = bitgen.random_raw(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_M53


class GaussianStream:
    """Incremental source of standard normals for one (seed, stream).

    Drawing ``n1`` then ``n2`` values gives the same numbers as drawing
    ``n1 + n2`` at once.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._bitgen = philox(seed, stream)
        self._spare = np.empty(0)

    def normals(self, n: int) -> np.ndarray:
        if n < 0:
            raise InvalidArgumentError("n must be non-negative")
        out = self._spare[:n]
        need = n - out.size
        self._spare = self._spare[out.size:]
        if need <= 0:
            return out.copy()
        pairs = (need + 1) // 2
        u = _uniforms(self._bitgen, 2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log(u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        self._spare = z[need:]
        return np.concatenate([out, z[:need]])


@dataclass(frozen=True)
class NoisePath:
    """A finite sequence of Wiener increments, each with variance ``dt``."""

    seed: int
    dt: float
    increments: np.ndarray = field(repr=False)
    stream: int = 0

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    def __len__(self) -> int:
        return self.increments.size

    @property
    def n_steps(self) -> int:
        return self.increments.size

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def wiener(self) -> np.ndarray:
        """Cumulative path W_t at ``times()``, starting from 0."""
        return np.concatenate([[0.0], np.cumsum(self.increments)])


def make_noise_path(seed: int, dt: float, n_steps: int, stream: int = 0) -> NoisePath:
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise InvalidArgumentError(f"n_steps must be a positive integer, got {n_steps}")
    z = GaussianStream(seed, stream).normals(int(n_steps))
    return NoisePath(seed=int(seed), dt=float(dt), increments=np.sqrt(dt) * z, stream=int(stream))
