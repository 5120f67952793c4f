import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subdyn.core import (
    GroundSet,
    GroundSetMismatchError,
    InvariantViolationError,
    SubsetMask,
    VariationLedger,
    append_variation,
    cardinality_family,
    modular_function,
    normalize,
    power_set_family,
    symmetric_difference_card,
    SetFunctionHandle,
)


def test_ground_set_validation():
    with pytest.raises(ValueError):
        GroundSet(0)
    with pytest.raises(ValueError):
        GroundSet(2, labels=("a",))
    with pytest.raises(ValueError):
        GroundSet(2, labels=("a", "a"))
    g = GroundSet(3, labels=("x", "y", "z"))
    assert g.label(1) == "y"


def test_mask_roundtrip_vector():
    g = GroundSet(5)
    m = SubsetMask.from_indices(g, [0, 3])
    chi = m.to_vector()
    assert list(chi) == [1, 0, 0, 1, 0]
    assert SubsetMask.from_vector(g, chi) == m
    assert m.hex() == "0x9"
    assert m.cardinality == 2


def test_mask_bits_bounds():
    g = GroundSet(3)
    with pytest.raises(ValueError):
        SubsetMask(g, 1 << 3)
    with pytest.raises(ValueError):
        SubsetMask.from_indices(g, [3])


def test_symmetric_difference_examples():
    g = GroundSet(3)
    a = SubsetMask.from_indices(g, [0, 1])
    b = SubsetMask.from_indices(g, [1, 2])
    assert symmetric_difference_card(a, b) == 2
    empty = SubsetMask.empty(g)
    assert symmetric_difference_card(empty, empty) == 0
    assert symmetric_difference_card(SubsetMask.full(g), empty) == 3


def test_symmetric_difference_ground_mismatch():
    a = SubsetMask.empty(GroundSet(3))
    b = SubsetMask.empty(GroundSet(4))
    with pytest.raises(GroundSetMismatchError):
        symmetric_difference_card(a, b)


def test_symmetric_difference_metric_exhaustive():
    # Nonnegative, zero iff equal, symmetric, triangle inequality: full scan
    # over all mask triples at n=4.
    g = GroundSet(4)
    masks = [SubsetMask(g, b) for b in range(16)]
    for a, b in itertools.product(masks, repeat=2):
        d = symmetric_difference_card(a, b)
        assert d >= 0
        assert (d == 0) == (a.bits == b.bits)
        assert d == symmetric_difference_card(b, a)
    for a, b, c in itertools.product(masks, repeat=3):
        assert symmetric_difference_card(a, c) <= (
            symmetric_difference_card(a, b) + symmetric_difference_card(b, c)
        )


@given(st.integers(1, 16), st.data())
def test_symmetric_difference_is_popcount(n, data):
    g = GroundSet(n)
    bits_a = data.draw(st.integers(0, (1 << n) - 1))
    bits_b = data.draw(st.integers(0, (1 << n) - 1))
    a, b = SubsetMask(g, bits_a), SubsetMask(g, bits_b)
    assert symmetric_difference_card(a, b) == (bits_a ^ bits_b).bit_count()


def test_variation_ledger_examples():
    g = GroundSet(3)
    led = VariationLedger(g)
    append_variation(led, SubsetMask.from_indices(g, [0, 1]))
    assert led.cumulative == 0.0
    append_variation(led, SubsetMask.from_indices(g, [1, 2]))
    assert led.cumulative == pytest.approx(math.sqrt(2), abs=0)


def test_variation_sequence_direct_evaluation():
    # empty, {1}, {1,2}, {1}: consecutive root-cardinalities 1 + 1 + 1 = 3.
    g = GroundSet(3)
    led = VariationLedger(g)
    for idxs in ([], [0], [0, 1], [0]):
        append_variation(led, SubsetMask.from_indices(g, idxs))
    assert led.cumulative == pytest.approx(3.0, abs=1e-15)


def test_variation_matches_euclidean_characteristic_form(rng):
    # The root-cardinality form equals the Euclidean distance of the
    # characteristic vectors, computed independently in real arithmetic.
    g = GroundSet(10)
    masks = [SubsetMask(g, int(rng.integers(0, 1 << 10))) for _ in range(60)]
    led = VariationLedger(g)
    for m in masks:
        append_variation(led, m)
    euclid = sum(
        float(np.linalg.norm(a.to_vector() - b.to_vector()))
        for a, b in zip(masks, masks[1:])
    )
    assert led.cumulative == pytest.approx(euclid, abs=1e-12)


def test_variation_nondecreasing(rng):
    g = GroundSet(6)
    led = VariationLedger(g)
    prev = 0.0
    for _ in range(40):
        append_variation(led, SubsetMask(g, int(rng.integers(0, 64))))
        assert led.cumulative >= prev
        prev = led.cumulative


def test_normalize_constant_shift():
    g = GroundSet(2)
    f = SetFunctionHandle(g, lambda m: m.cardinality + 5.0, bound_M=7.0)
    nf = normalize(f)
    assert nf(SubsetMask.empty(g)) == 0.0
    assert nf(SubsetMask.from_indices(g, [0])) == 1.0
    assert nf.normalized


def test_normalize_idempotent_on_values():
    g = GroundSet(3)
    f = SetFunctionHandle(g, lambda m: m.cardinality * 1.5 - 2.0, bound_M=10.0)
    n1 = normalize(f)
    n2 = normalize(n1)
    for bits in range(8):
        m = SubsetMask(g, bits)
        assert n1(m) == n2(m)


def test_normalize_identity_for_cut_style():
    g = GroundSet(2)
    cut = SetFunctionHandle(
        g, lambda m: 1.0 if m.cardinality == 1 else 0.0, bound_M=1.0, normalized=True
    )
    assert normalize(cut) is cut


def test_bound_check_opportunistic():
    g = GroundSet(3)
    f = SetFunctionHandle(g, lambda m: float(m.cardinality), bound_M=2.0)
    assert f(SubsetMask.from_indices(g, [0, 1])) == 2.0
    with pytest.raises(InvariantViolationError):
        f(SubsetMask.full(g))


def test_normalized_flag_verified():
    g = GroundSet(2)
    with pytest.raises(Exception):
        SetFunctionHandle(g, lambda m: 1.0, bound_M=2.0, normalized=True)


def test_memoized_handle_counts_evaluations():
    g = GroundSet(3)
    calls = []
    f = SetFunctionHandle(
        g, lambda m: calls.append(m.bits) or float(m.cardinality), bound_M=3.0
    )
    mf = f.memoized()
    m = SubsetMask.from_indices(g, [1])
    assert mf(m) == mf(m) == 1.0
    assert len(calls) == 1


def test_power_set_family_linear_min():
    fam = power_set_family(GroundSet(3))
    assert fam.linear_min(np.array([-1.0, 2.0, -3.0])).indices() == (0, 2)
    assert fam.linear_min(np.array([0.0, 0.0, 0.0])).bits == 0
    assert sum(1 for _ in fam.enumerate_masks()) == 8


def test_cardinality_family():
    fam = cardinality_family(GroundSet(4), 2, 2)
    masks = list(fam.enumerate_masks())
    assert len(masks) == 6
    assert all(m.cardinality == 2 for m in masks)
    chosen = fam.linear_min(np.array([5.0, 1.0, 3.0, 2.0]))
    assert chosen.indices() == (1, 3)
    # ties resolve toward smaller indices
    chosen = fam.linear_min(np.array([1.0, 1.0, 1.0, 1.0]))
    assert chosen.indices() == (0, 1)


def test_modular_function_values():
    f = modular_function(GroundSet(3), [1.0, -2.0, 0.5])
    assert f(SubsetMask.from_indices(GroundSet(3), [0, 1])) == -1.0
    assert f.normalized
