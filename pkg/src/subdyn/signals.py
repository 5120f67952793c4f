"""Deterministic 1-D gradient noise and the regulation-signal generator.

Single-octave gradient noise over an integer lattice: each lattice point
gets a +1/-1 gradient from a seeded 256-entry permutation (doubled for
wraparound), samples blend the two neighboring ramps with the quintic fade
6u^5 - 15u^4 + 10u^3, and the raw value is scaled by 2 so the output fills
[-1, 1].  The noise is continuous and once-differentiable, vanishes at
lattice points, and is bit-reproducible per seed on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from subdyn.rounding import SeededRng

__all__ = ["PerlinTable", "perlin_sample", "regulation_signal", "SignalConfig"]


@dataclass(frozen=True)
class PerlinTable:
    """Shuffled gradient table; distinct streams give independent noise."""

    seed: int
    grid_step: float = 1.0
    stream: int = 0
    perm: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        base = SeededRng(self.seed, stream=0x9E3779B9 + self.stream).permutation(256)
        doubled = np.concatenate([base, base]).astype(np.int64)
        doubled.flags.writeable = False
        object.__setattr__(self, "perm", doubled)


def _fade(u: float) -> float:
    return u * u * u * (u * (u * 6.0 - 15.0) + 10.0)


def _grad(table: PerlinTable, lattice: int) -> float:
    return 1.0 if table.perm[lattice % 256] & 1 else -1.0


def perlin_sample(table: PerlinTable, t: float) -> float:
    """Noise value at coordinate t, in [-1, 1]; zero at integer t."""
    i0 = math.floor(t)
    d0 = t - i0
    d1 = d0 - 1.0
    g0 = _grad(table, i0)
    g1 = _grad(table, i0 + 1)
    w = _fade(d0)
    return 2.0 * ((1.0 - w) * g0 * d0 + w * g1 * d1)


def regulation_signal(
    t: float,
    amplitude: float,
    decay: float,
    period: float,
    noise: PerlinTable,
    noise_scale: float,
) -> float:
    """Decaying sinusoid plus scaled gradient noise, in signal units (kW).

    r(t) = amplitude * exp(-decay t) * sin(2 pi t / period)
           + noise_scale * noise(t * grid_step)

    Negative values and values beyond the responsive fleet's capacity are
    the caller's problem: dispatch clamps at the feasibility boundary.
    """
    if amplitude <= 0 or period <= 0:
        raise ValueError("amplitude and period must be positive")
    if decay < 0:
        raise ValueError("decay must be nonnegative")
    base = amplitude * math.exp(-decay * t) * math.sin(2.0 * math.pi * t / period)
    return base + noise_scale * perlin_sample(noise, t * noise.grid_step)


@dataclass(frozen=True)
class SignalConfig:
    """Regulation-signal settings with defaults sized for a 15-load fleet.

    Defaults keep the sinusoid inside roughly half the fleet's aggregate
    rated power and make the noise a slow, small ripple; they are plain
    config values, not calibrated constants.
    """

    amplitude: float = 40.0  # kW
    decay: float = 1.0 / 600.0  # 1/rounds
    period: float = 750.0  # rounds
    noise_scale: float = 2.0  # kW
    noise_seed: int = 0
    grid_step: float = 0.02

    def table(self) -> PerlinTable:
        return PerlinTable(self.noise_seed, self.grid_step)

    def value(self, t: float, table: PerlinTable | None = None) -> float:
        if table is None:
            table = self.table()
        return regulation_signal(
            t, self.amplitude, self.decay, self.period, table, self.noise_scale
        )
