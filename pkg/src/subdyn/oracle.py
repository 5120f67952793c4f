"""Exhaustive ground-truth machinery.

Everything here enumerates; nothing samples.  These routines anchor every
other component's tests, so they trade speed for certainty and refuse
ground sets beyond a size where full enumeration stays interactive:
2^24 masks for minimization, n=16 for the submodularity scan, n=12 for the
all-pairs smoothness modulus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from subdyn import kernels
from subdyn.core import (
    BRUTE_FORCE_MAX_N,
    CapacityError,
    FeasibleFamily,
    SetFunctionHandle,
    SubsetMask,
)

__all__ = [
    "SubmodularityReport",
    "BetaSandwichReport",
    "tabulate",
    "brute_force_min",
    "check_submodular",
    "audit_beta_sandwich",
    "exact_lipschitz_modulus",
]

CHECK_SUBMODULAR_MAX_N = 16
LIPSCHITZ_MAX_N = 12


def tabulate(f: SetFunctionHandle) -> np.ndarray:
    """Dense table of f over all masks, indexed by mask bits (n <= 24)."""
    n = f.ground.n
    if n > BRUTE_FORCE_MAX_N:
        raise CapacityError(f"tabulation limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    out = np.empty(1 << n)
    for bits in range(1 << n):
        out[bits] = f(SubsetMask(f.ground, bits))
    return out


def brute_force_min(
    f: SetFunctionHandle, family: FeasibleFamily
) -> tuple[SubsetMask, float]:
    """Exact minimizer of f over the family; ties go to the smallest mask."""
    if family.enumerate_masks is None:
        raise ValueError("family has no enumerator; brute force needs one")
    if f.ground.n > BRUTE_FORCE_MAX_N:
        raise CapacityError(
            f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {f.ground.n}"
        )
    best_mask: SubsetMask | None = None
    best_val = 0.0
    for mask in family.enumerate_masks():
        v = f(mask)
        if (
            best_mask is None
            or v < best_val
            or (v == best_val and mask.bits < best_mask.bits)
        ):
            best_mask, best_val = mask, v
    if best_mask is None:
        raise ValueError("family enumerated no feasible mask")
    return best_mask, best_val


@dataclass(frozen=True)
class SubmodularityReport:
    """Verdict of the exhaustive diminishing-returns scan.

    margin is the minimum slack [f(A+i) - f(A)] - [f(B+i) - f(B)] over all
    proper chains A < B with i outside B; negative margin comes with a
    concrete counterexample triple.
    """

    holds: bool
    margin: float
    counterexample: tuple[SubsetMask, SubsetMask, int] | None = None


def check_submodular(
    f: SetFunctionHandle, tol: float | None = None
) -> SubmodularityReport:
    """Exhaustively test the diminishing marginal return property (n <= 16).

    Float default tolerance: a margin above -1e-9 * max(1, max|f|) counts as
    holding, since marginals of e.g. modular functions pick up last-bit
    rounding from the order the sums are taken in.
    """
    n = f.ground.n
    if n > CHECK_SUBMODULAR_MAX_N:
        raise CapacityError(
            f"submodularity scan limited to n <= {CHECK_SUBMODULAR_MAX_N}, got {n}"
        )
    table = tabulate(f)
    if tol is None:
        tol = 1e-9 * max(1.0, float(np.abs(table).max()))
    margin, i, b_bits = kernels.submodular_min_margin(table, n)
    if not np.isfinite(margin):  # n == 1: no triples, trivially submodular
        return SubmodularityReport(True, float("inf"))
    holds = margin >= -tol
    if holds:
        return SubmodularityReport(True, float(margin))
    # Recover the witness A: the proper submask of B with the largest
    # marginal gap to B (ties to the smallest mask).
    bit = 1 << i
    mb = table[b_bits | bit] - table[b_bits]
    best_a = -1
    best_ma = np.inf
    sub = (b_bits - 1) & b_bits
    subs = []
    while True:
        subs.append(sub)
        if sub == 0:
            break
        sub = (sub - 1) & b_bits
    for a_bits in sorted(subs):
        ma = table[a_bits | bit] - table[a_bits]
        if ma < best_ma:
            best_ma = ma
            best_a = a_bits
    return SubmodularityReport(
        False,
        float(margin),
        (
            SubsetMask(f.ground, best_a),
            SubsetMask(f.ground, b_bits),
            int(i),
        ),
    )


@dataclass(frozen=True)
class BetaSandwichReport:
    passes: bool
    worst_ratio: float
    flagged_masks: tuple[int, ...]  # masks where f <= 0 kept the ratio undefined


def audit_beta_sandwich(
    f: SetFunctionHandle,
    f_approx: SetFunctionHandle,
    beta: float,
    tol: float = 1e-9,
) -> BetaSandwichReport:
    """Exhaustively check f <= f_approx <= beta * f over every mask (n <= 16).

    Where f(S) <= 0 the ratio is undefined; those masks are flagged and only
    the absolute lower inequality f <= f_approx is enforced there.
    """
    n = f.ground.n
    if n > CHECK_SUBMODULAR_MAX_N:
        raise CapacityError(f"sandwich audit limited to n <= {CHECK_SUBMODULAR_MAX_N}")
    tf = tabulate(f)
    ta = tabulate(f_approx)
    scale = max(1.0, float(np.abs(tf).max()), float(np.abs(ta).max()))
    slack = tol * scale
    passes = True
    worst = -np.inf
    flagged: list[int] = []
    for bits in range(1 << n):
        lo, hi = tf[bits], ta[bits]
        if hi < lo - slack:
            passes = False
        if lo > 0.0:
            ratio = hi / lo
            worst = max(worst, ratio)
            if ratio > beta * (1.0 + tol):
                passes = False
        else:
            flagged.append(bits)
    return BetaSandwichReport(passes, float(worst), tuple(flagged))


def exact_lipschitz_modulus(f: SetFunctionHandle) -> float:
    """max |f(S1) - f(S2)| / card(S1 xor S2) over all mask pairs (n <= 12)."""
    n = f.ground.n
    if n > LIPSCHITZ_MAX_N:
        raise CapacityError(
            f"exact modulus limited to n <= {LIPSCHITZ_MAX_N}, got {n}"
        )
    return float(kernels.lipschitz_modulus(tabulate(f), n))
