"""Reproducible tables of Gaussian increments.

Each stream is keyed by (seed, index) through a counter-based generator,
so an increment is a pure function of (seed, index, step): querying out
of order, extending the horizon, or changing worker counts never alters
previously observed values.
"""
from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

__all__ = ["BrownianPath", "PER_MODE", "PER_PARTICLE"]

PER_MODE = "per_mode"          # shared noise: one scalar stream per mode index
PER_PARTICLE = "per_particle"  # independent noise: one stream per (particle, component)

# Domain tags keep the two layouts on disjoint key spaces for equal seeds.
_LAYOUT_TAG = {PER_MODE: 0x6D6F6465, PER_PARTICLE: 0x70617274}


def _stream(seed: int, tag: int, index: int, count: int) -> np.ndarray:
    """First ``count`` standard normals of stream (seed, tag, index)."""
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF, ((tag << 32) | index) & 0xFFFFFFFFFFFFFFFF)
    gen = Generator(Philox(key=key))
    # Inverse-CDF transform of uniform doubles: one draw consumed per
    # normal, so any prefix of the stream is independent of ``count``.
    # The max() guards the measure-zero u == 0 draw against -inf.
    u = np.maximum(gen.random(count), 2.0**-54)
    return ndtri(u)


class BrownianPath:
    """Seeded table of N(0, dt) increments indexed by (stream, step).

    ``per_mode`` layout serves the shared-noise system (one scalar
    Brownian motion per spectral mode); ``per_particle`` serves the
    independent-noise system (one motion per particle and component).
    """

    def __init__(self, seed: int, dt: float, num_steps: int, layout: str, num_streams: int):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if num_steps < 0:
            raise ValueError("num_steps must be nonnegative")
        if layout not in _LAYOUT_TAG:
            raise ValueError(f"unknown layout {layout!r}")
        if num_streams < 0:
            raise ValueError("num_streams must be nonnegative")
        self.seed = int(seed)
        self.dt = float(dt)
        self.num_steps = int(num_steps)
        self.layout = layout
        self.num_streams = int(num_streams)
        self._scale = float(np.sqrt(dt))
        self._cache: dict[int, np.ndarray] = {}

    def _row(self, index: int) -> np.ndarray:
        if not 0 <= index < self.num_streams:
            raise IndexError(f"stream index {index} out of range")
        row = self._cache.get(index)
        if row is None:
            row = self._scale * _stream(self.seed, _LAYOUT_TAG[self.layout], index, self.num_steps)
            self._cache[index] = row
        return row

    def increment(self, index: int, step: int) -> float:
        """Increment of stream ``index`` over time step ``step``."""
        if not 0 <= step < self.num_steps:
            raise IndexError(f"step {step} out of range")
        return float(self._row(index)[step])

    def increments(self, step: int) -> np.ndarray:
        """All stream increments for one step, shape (num_streams,)."""
        if not 0 <= step < self.num_steps:
            raise IndexError(f"step {step} out of range")
        return np.array([self._row(k)[step] for k in range(self.num_streams)])

    def table(self) -> np.ndarray:
        """Full increment table, shape (num_steps, num_streams)."""
        out = np.empty((self.num_steps, self.num_streams))
        for k in range(self.num_streams):
            out[:, k] = self._row(k)
        return out

    def extended(self, num_steps: int) -> "BrownianPath":
        """Same path on a longer horizon; shared steps keep their values."""
        return BrownianPath(self.seed, self.dt, num_steps, self.layout, self.num_streams)

    @staticmethod
    def for_common_noise(seed: int, dt: float, num_steps: int, num_modes: int) -> "BrownianPath":
        return BrownianPath(seed, dt, num_steps, PER_MODE, num_modes)

    @staticmethod
    def for_independent_noise(
        seed: int, dt: float, num_steps: int, num_particles: int, dim: int
    ) -> "BrownianPath":
        return BrownianPath(seed, dt, num_steps, PER_PARTICLE, num_particles * dim)
