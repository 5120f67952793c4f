"""Ground-set algebra and the set-function abstraction shared by every solver.

Sets over a finite ground set ``{0, .., n-1}`` are stored as integer bit
masks (bit ``i`` set iff element ``i`` is in the set), which makes the
symmetric-difference cardinality a popcount and keeps subsets hashable for
memoization.  Arbitrary ``n`` is supported since Python integers are
multi-word; the exhaustive oracles enforce their own capacity limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "GroundSet",
    "SubsetMask",
    "SetFunctionHandle",
    "FeasibleFamily",
    "VariationLedger",
    "GroundSetMismatchError",
    "ContractViolationError",
    "InvariantViolationError",
    "CapacityError",
    "ConfigurationError",
    "AlgorithmError",
    "symmetric_difference_card",
    "append_variation",
    "normalize",
    "modular_function",
    "table_function",
    "power_set_family",
    "cardinality_family",
    "BRUTE_FORCE_MAX_N",
]

# Exhaustive 2^n enumeration is refused above this size.
BRUTE_FORCE_MAX_N = 24


class GroundSetMismatchError(ValueError):
    """Two objects built over different ground sets were combined."""


class ContractViolationError(RuntimeError):
    """A documented precondition was violated (e.g. unnormalized input)."""


class InvariantViolationError(RuntimeError):
    """A component produced output that breaks one of its own invariants."""


class CapacityError(RuntimeError):
    """An exhaustive routine was asked to run beyond its size limit."""


class ConfigurationError(ValueError):
    """An experiment or family was configured inconsistently."""


class AlgorithmError(RuntimeError):
    """An online update failed mid-run (surfaced to the driver)."""


@dataclass(frozen=True)
class GroundSet:
    """The base set ``{0, 1, ..., n-1}``, optionally with element labels."""

    n: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"ground set needs n >= 1, got {self.n}")
        if self.labels is not None:
            if len(self.labels) != self.n:
                raise ValueError("labels must have exactly n entries")
            if len(set(self.labels)) != self.n:
                raise ValueError("labels must be distinct")

    @property
    def full_bits(self) -> int:
        return (1 << self.n) - 1

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i)


def _check_same_ground(a: "SubsetMask | SetFunctionHandle", b: "SubsetMask") -> None:
    if a.ground.n != b.ground.n or a.ground.labels != b.ground.labels:
        raise GroundSetMismatchError(
            f"ground sets differ: n={a.ground.n} vs n={b.ground.n}"
        )


@dataclass(frozen=True)
class SubsetMask:
    """A subset encoded as a bit mask over its ground set."""

    ground: GroundSet
    bits: int

    def __post_init__(self):
        if self.bits < 0 or self.bits > self.ground.full_bits:
            raise ValueError(f"mask 0x{self.bits:x} has bits outside n={self.ground.n}")

    @classmethod
    def empty(cls, ground: GroundSet) -> "SubsetMask":
        return cls(ground, 0)

    @classmethod
    def full(cls, ground: GroundSet) -> "SubsetMask":
        return cls(ground, ground.full_bits)

    @classmethod
    def from_indices(cls, ground: GroundSet, indices: Iterable[int]) -> "SubsetMask":
        bits = 0
        for i in indices:
            if not 0 <= i < ground.n:
                raise ValueError(f"element {i} outside ground set of size {ground.n}")
            bits |= 1 << i
        return cls(ground, bits)

    @classmethod
    def from_vector(cls, ground: GroundSet, chi: Sequence[float]) -> "SubsetMask":
        """Build from a 0/1 characteristic vector (lossless round trip)."""
        arr = np.asarray(chi)
        if arr.shape != (ground.n,):
            raise ValueError(f"characteristic vector must have length {ground.n}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("characteristic vector entries must be 0 or 1")
        return cls.from_indices(ground, [int(i) for i in np.nonzero(arr)[0]])

    def to_vector(self) -> np.ndarray:
        chi = np.zeros(self.ground.n)
        for i in self.indices():
            chi[i] = 1.0
        return chi

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.ground.n) if self.bits >> i & 1)

    def contains(self, i: int) -> bool:
        return bool(self.bits >> i & 1)

    @property
    def cardinality(self) -> int:
        return self.bits.bit_count()

    def union(self, other: "SubsetMask") -> "SubsetMask":
        _check_same_ground(self, other)
        return SubsetMask(self.ground, self.bits | other.bits)

    def intersection(self, other: "SubsetMask") -> "SubsetMask":
        _check_same_ground(self, other)
        return SubsetMask(self.ground, self.bits & other.bits)

    def symmetric_difference(self, other: "SubsetMask") -> "SubsetMask":
        _check_same_ground(self, other)
        return SubsetMask(self.ground, self.bits ^ other.bits)

    def issubset(self, other: "SubsetMask") -> bool:
        _check_same_ground(self, other)
        return self.bits & ~other.bits == 0

    def add(self, i: int) -> "SubsetMask":
        if not 0 <= i < self.ground.n:
            raise ValueError(f"element {i} outside ground set")
        return SubsetMask(self.ground, self.bits | 1 << i)

    def hex(self) -> str:
        return f"0x{self.bits:x}"

    def __int__(self) -> int:
        return self.bits

    def __repr__(self) -> str:
        return f"SubsetMask({{{', '.join(self.ground.label(i) for i in self.indices())}}})"


def symmetric_difference_card(a: SubsetMask, b: SubsetMask) -> int:
    """Number of elements in exactly one of the two sets."""
    _check_same_ground(a, b)
    return (a.bits ^ b.bits).bit_count()


class SetFunctionHandle:
    """An evaluatable set function with bound metadata.

    ``bound_M`` is caller-supplied (no constructive bound exists in general)
    and every evaluation is checked against it opportunistically.  The
    ``normalized`` flag asserts the empty set maps to zero, which the
    continuous-extension machinery relies on; it is verified at construction.
    """

    __slots__ = ("ground", "_eval", "bound_M", "normalized", "name")

    def __init__(
        self,
        ground: GroundSet,
        eval_fn: Callable[[SubsetMask], float],
        bound_M: float,
        normalized: bool = False,
        name: str = "",
    ):
        if not bound_M > 0:
            raise ValueError(f"bound_M must be positive, got {bound_M}")
        self.ground = ground
        self._eval = eval_fn
        self.bound_M = float(bound_M)
        self.normalized = normalized
        self.name = name
        if normalized:
            v0 = eval_fn(SubsetMask.empty(ground))
            if v0 != 0.0:
                raise ContractViolationError(
                    f"handle flagged normalized but f(empty) = {v0!r}"
                )

    def __call__(self, mask: SubsetMask) -> float:
        _check_same_ground(self, mask)
        v = float(self._eval(mask))
        if abs(v) > self.bound_M * (1.0 + 1e-12):
            raise InvariantViolationError(
                f"|f({mask})| = {abs(v)} exceeds declared bound M = {self.bound_M}"
            )
        return v

    def memoized(self) -> "SetFunctionHandle":
        """Opt-in caching wrapper keyed by mask bits."""
        cache: dict[int, float] = {}
        inner = self._eval

        def cached(mask: SubsetMask) -> float:
            v = cache.get(mask.bits)
            if v is None:
                v = float(inner(mask))
                cache[mask.bits] = v
            return v

        return SetFunctionHandle(
            self.ground, cached, self.bound_M, self.normalized, self.name
        )

    def __repr__(self) -> str:
        tag = self.name or "f"
        return f"SetFunctionHandle({tag}, n={self.ground.n}, M={self.bound_M})"


def normalize(f: SetFunctionHandle) -> SetFunctionHandle:
    """Shift a handle so the empty set evaluates to exactly zero.

    Idempotent at the value level: the shift of an already-normalized handle
    is 0.0 and every evaluation is unchanged.
    """
    offset = f._eval(SubsetMask.empty(f.ground))
    if offset == 0.0 and f.normalized:
        return f
    inner = f._eval

    def shifted(mask: SubsetMask) -> float:
        if mask.bits == 0:
            return 0.0
        return float(inner(mask)) - offset

    return SetFunctionHandle(
        f.ground,
        shifted,
        f.bound_M + abs(offset),
        normalized=True,
        name=f.name,
    )


def modular_function(
    ground: GroundSet, weights: Sequence[float], name: str = "modular"
) -> SetFunctionHandle:
    """f(S) = sum of per-element weights over S; normalized by construction."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (ground.n,):
        raise ValueError(f"need exactly {ground.n} weights")
    bound = max(float(np.abs(w).sum()), 1e-300)

    def ev(mask: SubsetMask) -> float:
        return float(sum(w[i] for i in mask.indices()))

    return SetFunctionHandle(ground, ev, bound, normalized=True, name=name)


def table_function(
    ground: GroundSet,
    table: Sequence[float],
    bound_M: float | None = None,
    name: str = "table",
) -> SetFunctionHandle:
    """Handle backed by a dense table indexed by mask bits (n <= 24)."""
    if ground.n > BRUTE_FORCE_MAX_N:
        raise CapacityError(f"table function limited to n <= {BRUTE_FORCE_MAX_N}")
    t = np.asarray(table, dtype=float)
    if t.shape != (1 << ground.n,):
        raise ValueError(f"table must have 2^{ground.n} entries")
    if bound_M is None:
        bound_M = max(float(np.abs(t).max()), 1e-300)
    return SetFunctionHandle(
        ground,
        lambda mask: float(t[mask.bits]),
        bound_M,
        normalized=(t[0] == 0.0),
        name=name,
    )


@dataclass(frozen=True)
class FeasibleFamily:
    """A family of feasible subsets, described by a membership predicate.

    ``enumerate_masks`` (required by the brute-force oracles) yields every
    feasible mask; ``linear_min`` minimizes a per-element-weight objective
    over the family in polynomial time when the structure allows it.
    """

    ground: GroundSet
    contains: Callable[[SubsetMask], bool]
    enumerate_masks: Callable[[], Iterator[SubsetMask]] | None = None
    linear_min: Callable[[np.ndarray], SubsetMask] | None = None
    name: str = ""


def power_set_family(ground: GroundSet) -> FeasibleFamily:
    """The unconstrained family 2^V."""

    def enum() -> Iterator[SubsetMask]:
        if ground.n > BRUTE_FORCE_MAX_N:
            raise CapacityError(
                f"refusing 2^{ground.n} enumeration (limit n <= {BRUTE_FORCE_MAX_N})"
            )
        for bits in range(1 << ground.n):
            yield SubsetMask(ground, bits)

    def linear_min(weights: np.ndarray) -> SubsetMask:
        # Take strictly negative weights; zero-weight elements are left out
        # so ties resolve to the smallest mask.
        return SubsetMask.from_indices(
            ground, [i for i in range(ground.n) if weights[i] < 0.0]
        )

    return FeasibleFamily(ground, lambda _m: True, enum, linear_min, "power_set")


def cardinality_family(ground: GroundSet, k_min: int, k_max: int) -> FeasibleFamily:
    """Subsets with cardinality in [k_min, k_max]."""
    if not 0 <= k_min <= k_max <= ground.n:
        raise ConfigurationError(f"bad cardinality bounds [{k_min}, {k_max}]")

    def contains(mask: SubsetMask) -> bool:
        return k_min <= mask.cardinality <= k_max

    def enum() -> Iterator[SubsetMask]:
        if ground.n > BRUTE_FORCE_MAX_N:
            raise CapacityError(
                f"refusing 2^{ground.n} enumeration (limit n <= {BRUTE_FORCE_MAX_N})"
            )
        for bits in range(1 << ground.n):
            if k_min <= bits.bit_count() <= k_max:
                yield SubsetMask(ground, bits)

    def linear_min(weights: np.ndarray) -> SubsetMask:
        # Mandatory k_min cheapest elements, then keep adding while weights
        # are strictly negative.  Stable (weight, index) order makes ties
        # resolve toward smaller indices, hence the smallest optimal mask.
        order = sorted(range(ground.n), key=lambda i: (weights[i], i))
        chosen = order[:k_min]
        for i in order[k_min:k_max]:
            if weights[i] < 0.0:
                chosen.append(i)
        return SubsetMask.from_indices(ground, chosen)

    return FeasibleFamily(
        ground, contains, enum, linear_min, f"card[{k_min},{k_max}]"
    )


@dataclass
class VariationLedger:
    """Cumulative root-cardinality drift of a comparator sequence.

    Appending mask S after previous mask P adds sqrt(card(P xor S)); the sum
    starts at the second entry and is nondecreasing.  Single-writer.
    """

    ground: GroundSet
    history: list[SubsetMask] = field(default_factory=list)
    cumulative: float = 0.0

    def last(self) -> SubsetMask | None:
        return self.history[-1] if self.history else None


def append_variation(ledger: VariationLedger, nxt: SubsetMask) -> VariationLedger:
    """Append the next comparator and accumulate its drift contribution."""
    if nxt.ground.n != ledger.ground.n:
        raise GroundSetMismatchError(
            f"mask over n={nxt.ground.n} appended to ledger over n={ledger.ground.n}"
        )
    prev = ledger.last()
    if prev is not None:
        ledger.cumulative += math.sqrt(symmetric_difference_card(prev, nxt))
    ledger.history.append(nxt)
    return ledger
