"""Numeric verification of the regret bounds and objective identities.

Each report replays a seeded synthetic instance, computes every quantity
in its bound exhaustively (exact discrete smoothness moduli, brute-force
round optima, enumerated sandwich factors), and states pass/fail at a
fixed tolerance.  The CLI audit subcommand prints these; the acceptance
suite asserts them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from subdyn.algorithms import (
    RoundData,
    expected_regret_bound,
    corollary2_bound,
    high_probability_regret_bound,
    run_online,
    theorem1_bound,
)
from subdyn.core import SubsetMask, VariationLedger, append_variation
from subdyn.lovasz import RelaxedPoint, lovasz_subgradient
from subdyn.oracle import brute_force_min, exact_lipschitz_modulus, tabulate
from subdyn.rounding import SeededRng
from subdyn.synthetic import SyntheticInstance

BOUND_SLACK = 1e-9


@dataclass
class BoundReport:
    name: str
    regret: float
    bound: float
    passed: bool
    details: dict

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{self.name}: regret={self.regret:.6g} <= bound={self.bound:.6g} "
            f"[{status}]"
        )


def greedy_bound_report(instance: SyntheticInstance) -> BoundReport:
    """Greedy regret against (alpha L / beta) times the surrogate-optimum drift.

    alpha is taken equal to beta (the bound's validity floor), L is the
    exact modulus of the surrogates, and the drift sums root-cardinalities
    of consecutive surrogate optima.
    """
    T = len(instance.stream)
    result = run_online(
        instance.stream,
        instance.make_learner,
        T,
        seed=0,
        optimum_oracle=instance.optimum_oracle,
        alpha=instance.beta,
    )
    rounds = [instance.stream.reveal(t) for t in range(1, T + 1)]
    surrogate_opt = VariationLedger(instance.ground)
    L = 0.0
    for rd in rounds:
        approx = rd.f_approx if rd.f_approx is not None else rd.f
        mask, _ = brute_force_min(approx, instance.family)
        append_variation(surrogate_opt, mask)
        L = max(L, exact_lipschitz_modulus(approx))
    regret = result.regret.cumulative_alpha_regret
    bound = theorem1_bound(instance.beta, instance.beta, L, surrogate_opt.cumulative)
    return BoundReport(
        "greedy regret bound",
        regret,
        bound,
        regret <= bound + BOUND_SLACK,
        {
            "alpha": instance.beta,
            "beta": instance.beta,
            "L": L,
            "variation": surrogate_opt.cumulative,
            "time_avg_series": [result.regret.time_averaged(t) for t in (5, T)],
        },
    )


def generic_greedy_bound_report(instance: SyntheticInstance) -> BoundReport:
    """Generic-greedy regret against (gamma^2 Lg L / nu) times the drift.

    Lg is the exact modulus of the squared surrogate (a modular function),
    L the exact modulus of the objective, nu the instance's positive lower
    bound on round minima, and the drift runs over squared-surrogate optima.
    """
    from subdyn.core import modular_function

    T = len(instance.stream)
    result = run_online(
        instance.stream,
        instance.make_learner,
        T,
        seed=0,
        optimum_oracle=instance.optimum_oracle,
        alpha=1.0,
    )
    drift = VariationLedger(instance.ground)
    L = 0.0
    Lg = 0.0
    for t in range(1, T + 1):
        rd = instance.stream.reveal(t)
        sq = modular_function(instance.ground, rd.generic.c, name="sq_generic")
        mask, _ = brute_force_min(sq, instance.family)
        append_variation(drift, mask)
        L = max(L, exact_lipschitz_modulus(rd.f))
        Lg = max(Lg, exact_lipschitz_modulus(sq))
    regret = result.regret.cumulative_alpha_regret
    bound = corollary2_bound(instance.gamma, Lg, L, instance.nu, drift.cumulative)
    return BoundReport(
        "generic greedy regret bound",
        regret,
        bound,
        regret <= bound + BOUND_SLACK,
        {"gamma": instance.gamma, "nu": instance.nu, "L": L, "L_generic": Lg,
         "variation": drift.cumulative},
    )


@dataclass
class ProjectedBoundReport:
    mean_regret: float
    expected_bound: float
    hp_bound: float
    exceed_fraction: float
    epsilon: float
    mean_passed: bool
    hp_passed: bool
    details: dict

    def lines(self) -> list[str]:
        return [
            f"projected-descent expected regret: mean={self.mean_regret:.6g} <= "
            f"bound={self.expected_bound:.6g} "
            f"[{'pass' if self.mean_passed else 'FAIL'}]",
            f"projected-descent tail at eps={self.epsilon}: "
            f"exceed fraction={self.exceed_fraction:.3f} <= "
            f"{self.epsilon + 0.05:.3f} [{'pass' if self.hp_passed else 'FAIL'}]",
        ]


def projected_descent_bound_report(
    rounds: list[RoundData],
    delta: float = 1.0,
    n_seeds: int = 100,
    epsilon: float = 0.1,
) -> ProjectedBoundReport:
    """Monte-Carlo audit of the projected-subgradient regret bounds.

    The continuous trajectory is independent of rounding, so it is computed
    once; each seed then draws one threshold per round.  Mean cumulative
    regret is checked against the expected bound and the per-seed tail
    against the high-probability bound at the given epsilon.
    """
    T = len(rounds)
    n = rounds[0].f.ground.n
    eta = delta / math.sqrt(T)
    tables = [tabulate(rd.f) for rd in rounds]
    x = np.full(n, 0.5)
    xs = np.empty((T, n))
    for t in range(T):
        xs[t] = x
        g = lovasz_subgradient(rounds[t].f, RelaxedPoint(x))
        x = np.clip(x - eta * g, 0.0, 1.0)
    opt_bits = [int(np.argmin(tb)) for tb in tables]
    opt_vals = np.array([tb[b] for tb, b in zip(tables, opt_bits)])
    V_T = sum(
        math.sqrt((opt_bits[t] ^ opt_bits[t - 1]).bit_count()) for t in range(1, T)
    )
    M = max(float(np.abs(tb).max()) for tb in tables)
    regrets = np.empty(n_seeds)
    for s in range(n_seeds):
        rng = SeededRng(s, stream=77)
        total = 0.0
        for t in range(T):
            p = rng.uniform_open_closed()
            bits = 0
            for i in range(n):
                if xs[t, i] >= p:
                    bits |= 1 << i
            total += tables[t][bits]
        regrets[s] = total - float(opt_vals.sum())
    mean_regret = float(regrets.mean())
    exp_bound = expected_regret_bound(n, delta, M, V_T, T)
    hp_bound = high_probability_regret_bound(n, delta, M, V_T, T, epsilon)
    exceed = float(np.mean(regrets > hp_bound))
    return ProjectedBoundReport(
        mean_regret=mean_regret,
        expected_bound=exp_bound,
        hp_bound=hp_bound,
        exceed_fraction=exceed,
        epsilon=epsilon,
        mean_passed=mean_regret <= exp_bound + BOUND_SLACK,
        hp_passed=exceed <= epsilon + 0.05,
        details={"M": M, "V_T": V_T, "T": T, "n": n, "seeds": n_seeds},
    )


def dr_equivalence_report(n: int, seed: int, n_rounds: int = 5) -> dict:
    """Exhaustive agreement of the closed-form and literal dispatch objectives."""
    from subdyn.apps.demand_response import DrRound, dr_objective, dr_objective_literal

    rng = SeededRng(seed, stream=88)
    worst = 0.0
    from subdyn.core import GroundSet

    ground = GroundSet(n)
    for _ in range(n_rounds):
        u = 3.0 + 4.0 * rng.uniforms(n)
        r = rng.uniform() * float(u.sum())
        round_ = DrRound(r, u)
        simple = dr_objective(round_)
        literal = dr_objective_literal(round_)
        for bits in range(1 << n):
            mask = SubsetMask(ground, bits)
            a, b = simple(mask), literal(mask)
            worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    return {"max_rel_err": worst, "passed": worst < 1e-9}
