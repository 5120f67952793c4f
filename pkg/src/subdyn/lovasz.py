"""Continuous extension of normalized set functions on [0,1]^n.

The extension sorts the coordinates in descending order and telescopes the
function along the resulting chain of prefix sets.  Its value is computed
in the level-set (Abel-summed) form

    f_ext(x) = sum_i f(prefix_i) * (x_(i) - x_(i+1)),   x_(n+1) := 0,

which is algebraically identical to the textbook prefix-difference sum but
reproduces f(A) *exactly* (to the last bit) on characteristic vectors: all
coordinate gaps are 0.0 except the single 1.0 at the set boundary.

The subgradient keeps the prefix-difference form: g[pi(i)] = f(prefix_i) -
f(prefix_{i-1}).  For a submodular f with |f| <= M the Euclidean norm of g
is at most 4M.

Ties in the sort are broken by ascending index.  Any consistent tie-break
yields a valid subgradient; a fixed one keeps runs reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from subdyn.core import (
    ContractViolationError,
    GroundSetMismatchError,
    SetFunctionHandle,
    SubsetMask,
)

__all__ = [
    "RelaxedPoint",
    "SortPermutation",
    "sort_descending",
    "lovasz_value",
    "lovasz_subgradient",
    "lovasz_value_and_subgradient",
]


@dataclass(frozen=True)
class RelaxedPoint:
    """A point of the solid hypercube [0,1]^n.

    Out-of-box inputs are rejected rather than clamped: silent clamping
    would hide projection bugs upstream.
    """

    coords: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coords, dtype=np.float64, copy=True)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise ValueError("coords must be a nonempty 1-d vector")
        if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
            raise ValueError("coords must lie in [0, 1]^n")
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @classmethod
    def of(cls, *values: float) -> "RelaxedPoint":
        return cls(np.array(values, dtype=float))

    @classmethod
    def from_mask(cls, mask: SubsetMask) -> "RelaxedPoint":
        return cls(mask.to_vector())


@dataclass(frozen=True)
class SortPermutation:
    """Indices listed by descending coordinate value (ties: ascending index)."""

    order: tuple[int, ...]


def sort_descending(x: RelaxedPoint) -> SortPermutation:
    """Deterministic descending sort of the coordinates."""
    # Stable sort on the negated coords keeps ascending-index order on ties.
    order = np.argsort(-x.coords, kind="stable")
    return SortPermutation(tuple(int(i) for i in order))


def _check_inputs(f: SetFunctionHandle, x: RelaxedPoint) -> None:
    if not f.normalized:
        raise ContractViolationError(
            "the continuous extension requires a normalized handle (f(empty) = 0); "
            "wrap the function with core.normalize first"
        )
    if f.ground.n != x.n:
        raise GroundSetMismatchError(
            f"point dimension {x.n} does not match ground set n={f.ground.n}"
        )


def _prefix_values(f: SetFunctionHandle, order: tuple[int, ...]) -> list[float]:
    # Exactly n+1 evaluations: the empty prefix through the full set.
    vals = [f(SubsetMask.empty(f.ground))]
    bits = 0
    for i in order:
        bits |= 1 << i
        vals.append(f(SubsetMask(f.ground, bits)))
    return vals


def lovasz_value(f: SetFunctionHandle, x: RelaxedPoint) -> float:
    """Value of the continuous extension of f at x."""
    _check_inputs(f, x)
    order = sort_descending(x).order
    return _value_from_prefixes(x, order, _prefix_values(f, order))


def _value_from_prefixes(
    x: RelaxedPoint, order: tuple[int, ...], pref: list[float]
) -> float:
    n = x.n
    total = 0.0
    for i in range(n):
        gap = x.coords[order[i]] - (x.coords[order[i + 1]] if i + 1 < n else 0.0)
        total += pref[i + 1] * gap
    return total


def lovasz_subgradient(f: SetFunctionHandle, x: RelaxedPoint) -> np.ndarray:
    """A subgradient of the extension at x, from prefix differences of f."""
    _check_inputs(f, x)
    order = sort_descending(x).order
    pref = _prefix_values(f, order)
    g = np.empty(x.n)
    for i, elem in enumerate(order):
        g[elem] = pref[i + 1] - pref[i]
    return g


def lovasz_value_and_subgradient(
    f: SetFunctionHandle, x: RelaxedPoint
) -> tuple[float, np.ndarray]:
    """Fused value + subgradient sharing one prefix sweep (n+1 evaluations)."""
    _check_inputs(f, x)
    order = sort_descending(x).order
    pref = _prefix_values(f, order)
    g = np.empty(x.n)
    for i, elem in enumerate(order):
        g[elem] = pref[i + 1] - pref[i]
    return _value_from_prefixes(x, order, pref), g
