import math

import numpy as np
import pytest

from conftest import make_verified_submodular
from subdyn.core import (
    ContractViolationError,
    GroundSet,
    SetFunctionHandle,
    SubsetMask,
    modular_function,
    table_function,
)
from subdyn.lovasz import (
    RelaxedPoint,
    lovasz_subgradient,
    lovasz_value,
    lovasz_value_and_subgradient,
    sort_descending,
)

CUT2 = table_function(GroundSet(2), [0.0, 1.0, 1.0, 0.0], name="cut2")


def test_relaxed_point_rejects_out_of_box():
    with pytest.raises(ValueError):
        RelaxedPoint.of(0.5, 1.2)
    with pytest.raises(ValueError):
        RelaxedPoint.of(-0.01, 0.5)
    RelaxedPoint.of(0.0, 1.0)  # boundary is fine


def test_relaxed_point_copies_input():
    arr = np.array([0.2, 0.4])
    p = RelaxedPoint(arr)
    arr[0] = 0.9
    assert p.coords[0] == 0.2


def test_sort_descending_examples():
    assert sort_descending(RelaxedPoint.of(0.3, 0.9, 0.5)).order == (1, 2, 0)
    assert sort_descending(RelaxedPoint.of(0.5, 0.5)).order == (0, 1)
    assert sort_descending(RelaxedPoint.of(0.0, 1.0, 0.0)).order == (1, 0, 2)


def test_lovasz_modular_is_linear():
    f = modular_function(GroundSet(2), [2.0, 1.0])
    x = RelaxedPoint.of(0.5, 0.3)
    assert lovasz_value(f, x) == pytest.approx(1.3, abs=1e-12)
    g = lovasz_subgradient(f, x)
    assert g == pytest.approx([2.0, 1.0], abs=0)


def test_lovasz_two_node_cut_hand_value():
    # Prefix-sum definition evaluated by hand: order (0, 1), prefixes {0}
    # then {0,1}; 0.7 * (1 - 0) + 0.2 * (0 - 1) = 0.5.
    x = RelaxedPoint.of(0.7, 0.2)
    assert lovasz_value(CUT2, x) == pytest.approx(0.5, abs=1e-12)
    g = lovasz_subgradient(CUT2, x)
    assert g == pytest.approx([1.0, -1.0], abs=0)


def test_unnormalized_rejected():
    g = GroundSet(2)
    f = SetFunctionHandle(g, lambda m: m.cardinality + 1.0, bound_M=3.0)
    with pytest.raises(ContractViolationError):
        lovasz_value(f, RelaxedPoint.of(0.5, 0.5))


def test_extension_identity_exact_on_all_masks():
    for seed in range(5):
        n = 4 + seed
        f, table = make_verified_submodular(n, seed=100 + seed)
        ground = f.ground
        for bits in range(1 << n):
            mask = SubsetMask(ground, bits)
            val = lovasz_value(f, RelaxedPoint.from_mask(mask))
            assert val == table[bits]  # exact equality, no tolerance


def test_evaluation_count_is_n_plus_one():
    calls = []
    g = GroundSet(4)
    f = SetFunctionHandle(
        g,
        lambda m: calls.append(m.bits) or 0.0,
        bound_M=1.0,
        normalized=True,
    )
    lovasz_value(f, RelaxedPoint.of(0.1, 0.9, 0.4, 0.2))
    # one verification call at construction + n+1 sweep calls
    assert len(calls) == 1 + 5
    calls.clear()
    lovasz_value_and_subgradient(f, RelaxedPoint.of(0.3, 0.2, 0.8, 0.5))
    assert len(calls) == 5


def test_subgradient_supports_value(rng):
    f, _ = make_verified_submodular(6, seed=7)
    for _ in range(50):
        x = RelaxedPoint(rng.random(6))
        val, g = lovasz_value_and_subgradient(f, x)
        assert val == pytest.approx(lovasz_value(f, x), abs=0)
        assert float(g @ x.coords) == pytest.approx(val, abs=1e-12)


def test_all_equal_coordinates_consistency():
    f, _ = make_verified_submodular(5, seed=11)
    x = RelaxedPoint(np.full(5, 0.6))
    val, g = lovasz_value_and_subgradient(f, x)
    assert float(g @ x.coords) == pytest.approx(val, abs=1e-12)


def test_convexity_certificate(rng):
    f, _ = make_verified_submodular(7, seed=21)
    for _ in range(200):
        x, y = RelaxedPoint(rng.random(7)), RelaxedPoint(rng.random(7))
        lam = float(rng.random())
        mid = RelaxedPoint(lam * x.coords + (1 - lam) * y.coords)
        assert lovasz_value(f, mid) <= (
            lam * lovasz_value(f, x) + (1 - lam) * lovasz_value(f, y) + 1e-9
        )


def test_subgradient_inequality(rng):
    f, _ = make_verified_submodular(7, seed=22)
    for _ in range(200):
        x, y = RelaxedPoint(rng.random(7)), RelaxedPoint(rng.random(7))
        g = lovasz_subgradient(f, x)
        lhs = lovasz_value(f, y)
        rhs = lovasz_value(f, x) + float(g @ (y.coords - x.coords))
        assert lhs >= rhs - 1e-9


def test_subgradient_norm_bound(rng):
    for seed in range(8):
        f, table = make_verified_submodular(6, seed=300 + seed)
        M = max(abs(table.min()), abs(table.max()))
        for _ in range(50):
            g = lovasz_subgradient(f, RelaxedPoint(rng.random(6)))
            assert np.linalg.norm(g) <= 4.0 * M + 1e-9


def test_positive_homogeneity_along_fixed_permutation(rng):
    f, _ = make_verified_submodular(6, seed=33)
    x = RelaxedPoint(np.sort(rng.random(6))[::-1].copy())
    base = lovasz_value(f, x)
    for c in (0.25, 0.5, 0.9):
        scaled = RelaxedPoint(c * x.coords)
        assert lovasz_value(f, scaled) == pytest.approx(c * base, abs=1e-12)
