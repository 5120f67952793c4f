"""Maps from relaxed points back to feasible subsets.

Only the unconstrained threshold rounder ships: one shared uniform draw p
thresholds every coordinate, which is what makes E[f(S)] equal the
continuous extension value.  Constrained rounders (matroid families etc.)
plug in through the Rounder interface and carry their own guarantee factor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from subdyn.core import (
    FeasibleFamily,
    InvariantViolationError,
    SetFunctionHandle,
    SubsetMask,
)
from subdyn.lovasz import RelaxedPoint, lovasz_value

__all__ = ["SeededRng", "Rounder", "threshold_round", "threshold_rounder",
           "round_with_guarantee"]

log = logging.getLogger("subdyn.rounding")

_MASK64 = (1 << 64) - 1


class SeededRng:
    """Counter-based (Philox4x64) random stream.

    Philox is splittable and platform-independent: the same (seed, stream)
    pair yields the same uniform sequence everywhere, and distinct stream
    indices give statistically independent streams for parallel replicas.
    """

    __slots__ = ("seed", "stream", "_gen")

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream: int) -> "SeededRng":
        """Independent stream derived from the same seed."""
        return SeededRng(self.seed, stream)

    def uniform(self) -> float:
        """One double in [0, 1)."""
        return float(self._gen.random())

    def uniform_open_closed(self) -> float:
        """One double in (0, 1] (threshold draws want 0 excluded)."""
        return 1.0 - float(self._gen.random())

    def uniforms(self, size: int) -> np.ndarray:
        return self._gen.random(size)

    def integer(self, high: int) -> int:
        """One integer in [0, high)."""
        return int(self._gen.integers(high))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def threshold_round(x: RelaxedPoint, rng: SeededRng) -> SubsetMask:
    """Round with one shared threshold: S = {i : x_i >= p}, p ~ U(0, 1].

    At a characteristic vector this returns exactly the underlying set for
    every draw, and in general P(i in S) = x_i.
    """
    p = rng.uniform_open_closed()
    bits = 0
    for i in range(x.n):
        if x.coords[i] >= p:
            bits |= 1 << i
    ground = _ground_for(x)
    return SubsetMask(ground, bits)


def _ground_for(x: RelaxedPoint):
    from subdyn.core import GroundSet

    return GroundSet(x.n)


@dataclass(frozen=True)
class Rounder:
    """A rounding map into a feasible family with guarantee factor alpha.

    alpha >= 1 is the multiplicative approximation the map promises against
    the extension value; alpha = 1 for maps that preserve it in expectation.
    """

    alpha: float
    round: Callable[[RelaxedPoint, SeededRng], SubsetMask]
    target: FeasibleFamily
    name: str = "rounder"

    def __post_init__(self):
        if not self.alpha >= 1.0:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")


def threshold_rounder(family: FeasibleFamily) -> Rounder:
    """The stock unconstrained rounder (expected-value semantics, alpha=1)."""

    def _round(x: RelaxedPoint, rng: SeededRng) -> SubsetMask:
        p = rng.uniform_open_closed()
        bits = 0
        for i in range(x.n):
            if x.coords[i] >= p:
                bits |= 1 << i
        return SubsetMask(family.ground, bits)

    return Rounder(1.0, _round, family, "threshold")


def round_with_guarantee(
    r: Rounder,
    x: RelaxedPoint,
    rng: SeededRng,
    f: SetFunctionHandle | None = None,
) -> SubsetMask:
    """Apply a rounder and fail fast if it leaves its target family.

    When a normalized handle is supplied the realized ratio f(S)/f_ext(x)
    is logged for audit (only where the extension value is positive).
    """
    mask = r.round(x, rng)
    if not r.target.contains(mask):
        raise InvariantViolationError(
            f"rounder {r.name!r} returned infeasible mask {mask.hex()}"
        )
    if f is not None:
        ext = lovasz_value(f, x)
        if ext > 0.0:
            log.debug(
                "rounder %s realized ratio %.6g (alpha=%.3g)",
                r.name,
                f(mask) / ext,
                r.alpha,
            )
    return mask
