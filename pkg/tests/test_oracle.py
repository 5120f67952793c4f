import itertools

import numpy as np
import pytest

from conftest import make_verified_submodular
from subdyn.core import (
    CapacityError,
    GroundSet,
    SubsetMask,
    cardinality_family,
    modular_function,
    power_set_family,
    table_function,
)
from subdyn.lovasz import RelaxedPoint, lovasz_value
from subdyn.oracle import (
    audit_beta_sandwich,
    brute_force_min,
    check_submodular,
    exact_lipschitz_modulus,
    tabulate,
)
from subdyn.rounding import SeededRng


def test_brute_force_min_modular():
    g = GroundSet(3)
    f = modular_function(g, [1.0, -2.0, 3.0])
    mask, val = brute_force_min(f, power_set_family(g))
    assert mask.indices() == (1,)
    assert val == -2.0


def test_brute_force_min_tie_break_smallest_mask():
    g = GroundSet(4)
    f = modular_function(g, [0.0, 0.0, 0.0, 0.0])
    mask, val = brute_force_min(f, power_set_family(g))
    assert mask.bits == 0 and val == 0.0


def test_brute_force_min_respects_family():
    g = GroundSet(4)
    f = modular_function(g, [5.0, 1.0, 4.0, 2.0])
    mask, val = brute_force_min(f, cardinality_family(g, 2, 2))
    assert mask.indices() == (1, 3)
    assert val == 3.0


def test_brute_force_capacity():
    g = GroundSet(25)
    f = modular_function(g, np.ones(25))
    with pytest.raises(CapacityError):
        brute_force_min(f, power_set_family(g))


def test_check_submodular_cut_holds():
    cut = table_function(GroundSet(2), [0.0, 1.0, 1.0, 0.0])
    report = check_submodular(cut)
    assert report.holds and report.counterexample is None


def test_check_submodular_modular_margin_zero():
    f = modular_function(GroundSet(5), [0.3, -1.2, 0.7, 2.0, -0.4])
    report = check_submodular(f)
    assert report.holds
    assert abs(report.margin) <= 1e-9


def test_check_submodular_cardinality_squared_violates():
    # f(S) = |S|^2 grows superadditively; the scan must produce a concrete
    # counterexample triple.
    n = 5
    bits = np.arange(1 << n)
    card = sum(((bits >> i) & 1) for i in range(n)).astype(float)
    f = table_function(GroundSet(n), card**2, name="card_sq")
    report = check_submodular(f)
    assert not report.holds
    assert report.margin < 0
    a, b, i = report.counterexample
    assert a.issubset(b) and a.bits != b.bits
    assert not b.contains(i)
    table = card**2
    lhs = table[a.bits | (1 << i)] - table[a.bits]
    rhs = table[b.bits | (1 << i)] - table[b.bits]
    assert lhs < rhs  # the violated inequality, recomputed directly


def test_check_submodular_margin_matches_direct_scan():
    # Cross-check the transform-based margin against a literal triple scan.
    for seed in (0, 1, 2):
        rng = SeededRng(seed, stream=55)
        n = 5
        table = rng.uniforms(1 << n) * 4.0 - 2.0
        table[0] = 0.0
        f = table_function(GroundSet(n), table)
        report = check_submodular(f, tol=0.0)
        direct = np.inf
        for i in range(n):
            bit = 1 << i
            for b in range(1 << n):
                if b & bit:
                    continue
                sub = (b - 1) & b
                while True:
                    if sub != b:
                        slack = (table[sub | bit] - table[sub]) - (
                            table[b | bit] - table[b]
                        )
                        direct = min(direct, slack)
                    if sub == 0:
                        break
                    sub = (sub - 1) & b
        assert report.margin == pytest.approx(direct, abs=0)


def test_submodular_implies_convex_extension(rng):
    # holds-direction consistency with the continuous extension.
    f, _ = make_verified_submodular(6, seed=77)
    for _ in range(100):
        x, y = RelaxedPoint(rng.random(6)), RelaxedPoint(rng.random(6))
        lam = float(rng.random())
        mid = RelaxedPoint(lam * x.coords + (1 - lam) * y.coords)
        assert lovasz_value(f, mid) <= (
            lam * lovasz_value(f, x) + (1 - lam) * lovasz_value(f, y) + 1e-9
        )


def test_beta_sandwich_trivial_and_scaled():
    g = GroundSet(4)
    bits = np.arange(16)
    card = sum(((bits >> i) & 1) for i in range(4)).astype(float)
    f = table_function(g, card, name="card")
    same = audit_beta_sandwich(f, f, 1.0)
    assert same.passes and same.worst_ratio == pytest.approx(1.0)
    doubled = table_function(g, 2 * card, name="2card")
    rep = audit_beta_sandwich(f, doubled, 2.0)
    assert rep.passes and rep.worst_ratio == pytest.approx(2.0)
    assert not audit_beta_sandwich(f, doubled, 1.5).passes


def test_beta_sandwich_singleton_surrogate():
    # Subadditive objective vs its additive singleton surrogate: the audit
    # reports the exhaustive worst ratio and passes exactly at that beta.
    n = 5
    rng = SeededRng(4, stream=9)
    w = 0.5 + rng.uniforms(n)
    g = GroundSet(n)
    sums = np.zeros(1 << n)
    for i in range(n):
        blk = 1 << i
        sums[blk : 2 * blk] = sums[:blk] + w[i]
    f = table_function(g, np.sqrt(sums), name="sqrt_sum")
    surrogate = modular_function(g, np.sqrt(w))
    worst = max(
        surrogate(SubsetMask(g, b)) / f(SubsetMask(g, b)) for b in range(1, 1 << n)
    )
    rep = audit_beta_sandwich(f, surrogate, worst)
    assert rep.passes
    assert rep.worst_ratio == pytest.approx(worst, rel=1e-12)
    assert rep.flagged_masks == (0,)  # ratio undefined at the empty set


def test_beta_sandwich_monotone_in_beta():
    f, _ = make_verified_submodular(5, seed=91, kind="concave")
    table = tabulate(f)
    surrogate = table_function(f.ground, np.maximum(table, 0) * 1.5 + 0.1)
    betas = sorted([1.5, 2.0, 4.0, 8.0])
    passed = [audit_beta_sandwich(f, surrogate, b).passes for b in betas]
    for earlier, later in zip(passed, passed[1:]):
        assert later or not earlier  # passing is monotone in beta


def test_exact_lipschitz_modular():
    f = modular_function(GroundSet(5), [0.5, -3.0, 1.0, 2.0, -0.25])
    assert exact_lipschitz_modulus(f) == pytest.approx(3.0, abs=0)


def test_exact_lipschitz_constant_zero():
    g = GroundSet(4)
    f = table_function(g, np.zeros(16), name="zero")
    assert exact_lipschitz_modulus(f) == 0.0


def test_exact_lipschitz_matches_pairwise_scan():
    f, table = make_verified_submodular(6, seed=13)
    by_kernel = exact_lipschitz_modulus(f)
    direct = max(
        abs(table[a] - table[b]) / ((a ^ b).bit_count())
        for a, b in itertools.combinations(range(64), 2)
    )
    assert by_kernel == pytest.approx(direct, abs=0)


def test_capacity_limits():
    g = GroundSet(17)
    f = modular_function(g, np.ones(17))
    with pytest.raises(CapacityError):
        check_submodular(f)
    g = GroundSet(13)
    f = modular_function(g, np.ones(13))
    with pytest.raises(CapacityError):
        exact_lipschitz_modulus(f)
