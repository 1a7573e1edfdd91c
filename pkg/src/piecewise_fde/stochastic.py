"""Seeded Brownian increments for the stochastic segments.

Generator: numpy ``PCG64`` seeded through ``SeedSequence(seed, spawn_key=(stream, component))``,
so each (segment, component) pair gets its own independent substream and no
coordination between runs is needed. Gaussians come from inversion,
``ndtri(u)`` with ``u = (k + 0.5) / 2**53`` for 53-bit integers ``k``; the
open interval keeps ``u`` away from 0 and 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = ["BrownianPath", "generate_path", "GAUSSIAN_METHOD", "BIT_GENERATOR"]

GAUSSIAN_METHOD = "inversion: scipy.special.ndtri((k + 0.5) / 2**53), k uniform 53-bit"
BIT_GENERATOR = "numpy PCG64 via SeedSequence(seed, spawn_key=(stream, component))"

_U64_MAX = 2**64 - 1
_TWO53 = float(2**53)


@dataclass(frozen=True)
class BrownianPath:
    """Per-step increment pairs ``(dB1, dB2)``, each ``Normal(0, h)``."""

    increments: np.ndarray
    seed: int
    h: float
    stream: int = 0

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    def cumulative(self) -> np.ndarray:
        """Brownian path values ``B(t_k)`` including ``B(t_0) = 0``."""
        out = np.zeros((self.n_steps + 1, self.increments.shape[1]))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out


def _standard_normals(seed: int, stream: int, component: int, n: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(stream, component))
    rng = np.random.Generator(np.random.PCG64(ss))
    k = rng.integers(0, 2**53, size=n, dtype=np.int64)
    return ndtri((k.astype(np.float64) + 0.5) / _TWO53)


def generate_path(seed: int, n_steps: int, h: float, *, stream: int = 0, components: int = 2) -> BrownianPath:
    """Draw ``n_steps`` independent increment tuples of variance ``h``.

    Identical ``(seed, n_steps, h, stream)`` always gives identical output.
    """
    seed = int(seed)
    if not 0 <= seed <= _U64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if int(n_steps) < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps!r}")
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"step h must be positive, got {h!r}")
    scale = np.sqrt(h)
    cols = [scale * _standard_normals(seed, stream, c, int(n_steps)) for c in range(components)]
    return BrownianPath(np.column_stack(cols), seed, float(h), stream)
