"""Seeded synthetic problem streams for experiments, audits, and tests.

The drifting streams are built so the surrogate optimum moves by at most
one element (or one in/out swap on fixed-cardinality families) per round,
then freezes: that is the slowly-varying regime in which the greedy regret
bound is provable round by round, and the frozen tail is what makes the
time-averaged regret vanish.  Weight sequences are generated once from a
seed, so a stream replays identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from subdyn.algorithms import (
    ApproxSpec,
    GenericApproxSpec,
    GreedyLearner,
    GenericGreedyLearner,
    OspgdConfig,
    ProjectedSubgradientLearner,
    RoundData,
    SequenceStream,
    UnconstrainedGreedyLearner,
    modular_exact_min,
)
from subdyn.core import (
    FeasibleFamily,
    GroundSet,
    SetFunctionHandle,
    SubsetMask,
    cardinality_family,
    modular_function,
    power_set_family,
    table_function,
)
from subdyn.oracle import brute_force_min
from subdyn.rounding import SeededRng, threshold_rounder

__all__ = [
    "SyntheticInstance",
    "swap_modular_instance",
    "swap_sqrt_instance",
    "generic_swap_instance",
    "drifting_submodular_instance",
    "unconstrained_modular_instance",
    "random_submodular_table",
    "instance_from_config",
]


@dataclass
class SyntheticInstance:
    """A ready-to-run online problem: stream, family, learner factory."""

    name: str
    ground: GroundSet
    family: FeasibleFamily
    stream: SequenceStream
    make_learner: Callable[[SeededRng], object]
    initial: SubsetMask | None = None
    beta: float = 1.0
    gamma: float | None = None
    nu: float | None = None

    def optimum_oracle(self, round_data: RoundData):
        return brute_force_min(round_data.f, self.family)


def _swap_weight_path(
    n: int, T: int, k: int, rng: SeededRng, n_swaps: int
) -> np.ndarray:
    """Per-round weight rows whose k-smallest set drifts by single swaps.

    Round 1 starts from an ascending base; one in/out value swap happens per
    round over rounds 2..n_swaps+1, after which the weights freeze.
    """
    base = np.linspace(1.0, 3.0, n) + 0.05 * rng.uniforms(n)
    w = np.empty((T, n))
    w[0] = base
    assign = np.arange(n)  # element -> value slot, slots sorted ascending
    values = np.sort(base)
    for t in range(1, T):
        if t <= n_swaps:
            inside = [i for i in range(n) if assign[i] < k]
            outside = [i for i in range(n) if assign[i] >= k]
            a = inside[rng.integer(len(inside))]
            b = outside[rng.integer(len(outside))]
            assign[a], assign[b] = assign[b], assign[a]
        w[t] = values[assign]
    return w


def swap_modular_instance(
    n: int = 8, T: int = 50, k: int = 3, seed: int = 0, n_swaps: int = 8
) -> SyntheticInstance:
    """Modular objectives on a fixed-cardinality family; the surrogate is the
    objective itself (beta = 1) and its exact minimizer is the linear oracle."""
    ground = GroundSet(n)
    family = cardinality_family(ground, k, k)
    rng = SeededRng(seed, stream=1)
    w = _swap_weight_path(n, T, k, rng, n_swaps)
    rounds = []
    for t in range(1, T + 1):
        f = modular_function(ground, w[t - 1], name=f"mod[{t}]")
        rounds.append(RoundData(t, f, f_approx=f))
    spec = ApproxSpec(beta=1.0, exact_min=modular_exact_min, approx=lambda f: f)
    # Start from the k worst elements so early regret is visibly positive.
    initial = SubsetMask.from_indices(ground, range(n - k, n))
    return SyntheticInstance(
        name="swap_modular",
        ground=ground,
        family=family,
        stream=SequenceStream(rounds),
        make_learner=lambda _rng: GreedyLearner(spec, family, initial),
        initial=initial,
        beta=1.0,
    )


def swap_sqrt_instance(
    n: int = 8, T: int = 50, k: int = 3, seed: int = 0, n_swaps: int = 8
) -> SyntheticInstance:
    """Square-root-of-sum objectives with the additive singleton surrogate.

    f(S) = sqrt(sum of w_i), approximated by sum of sqrt(w_i): the surrogate
    dominates f by subadditivity and beta is its exhaustive worst ratio.
    """
    ground = GroundSet(n)
    family = cardinality_family(ground, k, k)
    rng = SeededRng(seed, stream=2)
    w = _swap_weight_path(n, T, k, rng, n_swaps)
    rounds = []
    beta = 1.0
    for t in range(1, T + 1):
        wt = w[t - 1]

        def ev(mask: SubsetMask, wt=wt) -> float:
            return math.sqrt(sum(wt[i] for i in mask.indices()))

        f = SetFunctionHandle(
            ground, ev, math.sqrt(float(wt.sum())), normalized=True, name=f"sqrt[{t}]"
        )
        f_approx = modular_function(ground, np.sqrt(wt), name=f"sqrt~[{t}]")
        rounds.append(RoundData(t, f, f_approx=f_approx))
        for bits in range(1, 1 << n):
            s = SubsetMask(ground, bits)
            beta = max(beta, f_approx(s) / f(s))
    spec = ApproxSpec(beta=beta, exact_min=modular_exact_min)
    initial = SubsetMask.from_indices(ground, range(n - k, n))
    return SyntheticInstance(
        name="swap_sqrt",
        ground=ground,
        family=family,
        stream=SequenceStream(rounds),
        make_learner=lambda _rng: GreedyLearner(spec, family, initial),
        initial=initial,
        beta=beta,
    )


def generic_swap_instance(
    n: int = 8, T: int = 50, k: int = 3, seed: int = 0, n_swaps: int = 8
) -> SyntheticInstance:
    """Objectives that *are* square-root-of-modular (sandwich factor 1).

    Exercises the generic-greedy update: minimizing the squared surrogate is
    one linear minimization per round.  nu is the exact minimum over the
    whole stream (the family excludes the empty set, so it is positive).
    """
    ground = GroundSet(n)
    family = cardinality_family(ground, k, k)
    rng = SeededRng(seed, stream=3)
    c = _swap_weight_path(n, T, k, rng, n_swaps)
    nu = math.inf
    rounds = []
    for t in range(1, T + 1):
        ct = c[t - 1]
        nu = min(nu, math.sqrt(float(np.sort(ct)[:k].sum())))
        spec_t = GenericApproxSpec(c=ct, gamma=1.0, nu=1.0)  # nu patched below
        rounds.append(RoundData(t, spec_t.handle(ground), generic=spec_t))
    rounds = [
        RoundData(r.t, r.f, generic=GenericApproxSpec(r.generic.c, 1.0, nu))
        for r in rounds
    ]
    initial = SubsetMask.from_indices(ground, range(n - k, n))
    return SyntheticInstance(
        name="generic_swap",
        ground=ground,
        family=family,
        stream=SequenceStream(rounds),
        make_learner=lambda _rng: GenericGreedyLearner(family, initial),
        initial=initial,
        gamma=1.0,
        nu=nu,
    )


def _cut_table(n: int, edges: list[tuple[int, int, float]]) -> np.ndarray:
    table = np.zeros(1 << n)
    bits = np.arange(1 << n)
    for i, j, w in edges:
        crossing = ((bits >> i) & 1) != ((bits >> j) & 1)
        table[crossing] += w
    return table


def _modular_table(n: int, weights: np.ndarray) -> np.ndarray:
    table = np.zeros(1 << n)
    for i in range(n):
        blk = 1 << i
        table[blk : 2 * blk] = table[:blk] + weights[i]
    return table


def drifting_submodular_instance(
    n: int = 8, T: int = 400, seed: int = 0, delta: float = 1.0
) -> SyntheticInstance:
    """Smoothly drifting cut-plus-modular objectives over the full power set.

    Graph cuts are submodular, modular parts keep them so, and slow seeded
    sinusoidal drift in both keeps consecutive optima close.  Built for the
    projected-subgradient learner with threshold rounding.
    """
    ground = GroundSet(n)
    family = power_set_family(ground)
    rng = SeededRng(seed, stream=4)
    n_edges = 2 * n
    edges = [
        (rng.integer(n), rng.integer(n), 0.5 + rng.uniforms(1)[0])
        for _ in range(n_edges)
    ]
    edges = [(i, j, w) for i, j, w in edges if i != j]
    mod_base = 2.0 * rng.uniforms(n) - 1.0
    mod_amp = 0.5 + 0.5 * rng.uniforms(n)
    phases = rng.uniforms(n)
    rounds = []
    for t in range(1, T + 1):
        drift = np.sin(2.0 * np.pi * (t / 150.0 + phases))
        weights = mod_base + mod_amp * drift
        scale = 1.0 + 0.3 * math.sin(2.0 * math.pi * t / 230.0)
        table = _cut_table(n, [(i, j, w * scale) for i, j, w in edges])
        table += _modular_table(n, weights)
        rounds.append(RoundData(t, table_function(ground, table, name=f"drift[{t}]")))
    rounder = threshold_rounder(family)

    def make_learner(rng_: SeededRng):
        cfg = OspgdConfig.centered(n, T, rounder, delta=delta)
        return ProjectedSubgradientLearner(cfg, rng_)

    return SyntheticInstance(
        name="drifting_submodular",
        ground=ground,
        family=family,
        stream=SequenceStream(rounds),
        make_learner=make_learner,
    )


def unconstrained_modular_instance(
    n: int = 8, T: int = 50, seed: int = 0, freeze_after: int = 10
) -> SyntheticInstance:
    """Drifting signed modular objectives over the full power set.

    The greedy update applies directly to the previous objective (the
    unconstrained problem is exactly minimizable); weights freeze after the
    configured round so the optimum path has bounded total variation.
    """
    ground = GroundSet(n)
    family = power_set_family(ground)
    rng = SeededRng(seed, stream=5)
    w = 2.0 * rng.uniforms(n) - 1.0
    rounds = []
    for t in range(1, T + 1):
        if 1 < t <= freeze_after:
            i = rng.integer(n)
            w = w.copy()
            w[i] = -w[i]
        f = modular_function(ground, w, name=f"umod[{t}]")
        rounds.append(RoundData(t, f, f_approx=f))
    return SyntheticInstance(
        name="unconstrained_modular",
        ground=ground,
        family=family,
        stream=SequenceStream(rounds),
        make_learner=lambda _rng: UnconstrainedGreedyLearner(
            ground, lambda f: brute_force_min(f, family)
        ),
    )


def random_submodular_table(
    n: int, rng: SeededRng, kind: str | None = None
) -> np.ndarray:
    """One random normalized submodular function as a dense table.

    Mixture families: weighted graph cuts, concave transforms of positive
    modular functions, coverage counts, plus a small signed modular part.
    All are submodular and the sum stays submodular.
    """
    kinds = ("cut", "concave", "coverage")
    if kind is None:
        kind = kinds[rng.integer(len(kinds))]
    table = np.zeros(1 << n)
    if kind == "cut":
        m = n + rng.integer(2 * n)
        edges = []
        for _ in range(m):
            i, j = rng.integer(n), rng.integer(n)
            if i != j:
                edges.append((i, j, 0.2 + rng.uniforms(1)[0]))
        table += _cut_table(n, edges)
    elif kind == "concave":
        w = 0.2 + rng.uniforms(n)
        p = 0.3 + 0.6 * rng.uniforms(1)[0]
        sums = _modular_table(n, w)
        table += sums**p
    else:  # coverage
        universe = 2 * n
        cover = rng.uniforms((n * universe)).reshape(n, universe) < 0.3
        for bits in range(1, 1 << n):
            covered = np.zeros(universe, dtype=bool)
            for i in range(n):
                if bits >> i & 1:
                    covered |= cover[i]
            table[bits] = float(covered.sum())
    table += _modular_table(n, 0.5 * (2.0 * rng.uniforms(n) - 1.0))
    return table


_BUILDERS = {
    "swap_modular": swap_modular_instance,
    "swap_sqrt": swap_sqrt_instance,
    "generic_swap": generic_swap_instance,
    "drifting_submodular": drifting_submodular_instance,
    "unconstrained_modular": unconstrained_modular_instance,
}


def instance_from_config(
    name: str, n: int, T: int, seed: int, **params
) -> SyntheticInstance:
    if name not in _BUILDERS:
        raise ValueError(
            f"unknown synthetic stream {name!r}; choose from {sorted(_BUILDERS)}"
        )
    return _BUILDERS[name](n=n, T=T, seed=seed, **params)
