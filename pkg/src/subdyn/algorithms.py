"""Online update rules and the sequential driver with regret accounting.

Three learners are provided:

* greedy: commit the exact minimizer of the previous round's tractable
  surrogate (a beta-approximation, or the function itself when the family
  is unconstrained and small enough to minimize exactly);
* generic greedy: minimize the previous round's square-root-of-modular
  surrogate, i.e. a single linear minimization over the family;
* projected subgradient: one descent step on the previous round's
  continuous extension, followed by randomized rounding.  The continuous
  state never depends on the rounding outcome.

The driver replays a problem stream strictly in order: the decision for
round t is committed before the round-t objective is revealed, so a
learner can only ever evaluate functions from earlier rounds.  Regret is
tracked against per-round optima when an optimum oracle is supplied and
reported as unavailable otherwise (the constrained problem is NP-hard, so
round optima are a test-time luxury).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from subdyn.core import (
    AlgorithmError,
    ConfigurationError,
    ContractViolationError,
    FeasibleFamily,
    GroundSet,
    InvariantViolationError,
    SetFunctionHandle,
    SubsetMask,
    VariationLedger,
    append_variation,
)
from subdyn.lovasz import RelaxedPoint, lovasz_subgradient
from subdyn.rounding import Rounder, SeededRng, round_with_guarantee

__all__ = [
    "ApproxSpec",
    "GenericApproxSpec",
    "OspgdConfig",
    "RegretLedger",
    "RoundData",
    "RunResult",
    "TraceRow",
    "osga_step",
    "osga_unconstrained_step",
    "osgga_step",
    "ospgd_step",
    "box_project",
    "run_online",
    "sweep_seeds",
    "write_trace_csv",
    "GreedyLearner",
    "GenericGreedyLearner",
    "ProjectedSubgradientLearner",
    "theorem1_bound",
    "corollary2_bound",
    "theorem2_bound",
    "expected_regret_bound",
    "high_probability_regret_bound",
]

TRACE_HEADER = [
    "t",
    "algorithm",
    "loss",
    "optimum",
    "alpha_regret_cum",
    "regret_time_avg",
    "variation_cum",
    "mask_hex",
]


@dataclass(frozen=True)
class ApproxSpec:
    """A tractable surrogate family: f <= approx(f) <= beta * f.

    ``approx`` builds the round surrogate from the revealed objective;
    ``exact_min`` must return its true minimizer over the family in
    polynomial time (smallest mask on ties).  ``lipschitz_L`` carries the
    discrete smoothness modulus when known (exact at test scale, a user
    input at application scale).
    """

    beta: float
    exact_min: Callable[[SetFunctionHandle, FeasibleFamily], SubsetMask]
    approx: Callable[[SetFunctionHandle], SetFunctionHandle] | None = None
    lipschitz_L: float | None = None

    def __post_init__(self):
        if not self.beta >= 1.0:
            raise ValueError(f"beta must be >= 1, got {self.beta}")


@dataclass(frozen=True)
class GenericApproxSpec:
    """Square-root-of-modular surrogate data for one round.

    The surrogate is sqrt(sum of c_i over S) with nonnegative c; gamma is
    the squared sandwich factor and nu a positive lower bound on all round
    minima over the family (both are user-supplied; the vector c comes from
    the caller as well, its construction is out of scope).
    """

    c: np.ndarray
    gamma: float
    nu: float

    def __post_init__(self):
        c = np.ascontiguousarray(self.c, dtype=float)
        if np.any(c < 0.0):
            raise ValueError("generic approximation weights must be nonnegative")
        if not self.gamma > 0 or not self.nu > 0:
            raise ValueError("gamma and nu must be positive")
        object.__setattr__(self, "c", c)

    def handle(self, ground: GroundSet) -> SetFunctionHandle:
        c = self.c

        def ev(mask: SubsetMask) -> float:
            return math.sqrt(sum(c[i] for i in mask.indices()))

        bound = max(math.sqrt(float(c.sum())), 1e-300)
        return SetFunctionHandle(ground, ev, bound, normalized=True, name="generic")


def modular_exact_min(
    f_approx: SetFunctionHandle, family: FeasibleFamily
) -> SubsetMask:
    """Exact minimizer for modular surrogates via the family's linear oracle."""
    if family.linear_min is None:
        raise ConfigurationError(f"family {family.name!r} has no linear oracle")
    w = np.array(
        [f_approx(SubsetMask(f_approx.ground, 1 << i)) for i in range(f_approx.ground.n)]
    )
    return family.linear_min(w)


def osga_step(
    spec: ApproxSpec,
    prev_round_f_approx: SetFunctionHandle,
    family: FeasibleFamily,
) -> SubsetMask:
    """Greedy update: the exact minimizer of the previous round's surrogate."""
    try:
        mask = spec.exact_min(prev_round_f_approx, family)
    except Exception as exc:
        raise AlgorithmError(f"surrogate minimization failed: {exc}") from exc
    if not family.contains(mask):
        raise InvariantViolationError(
            f"exact_min returned infeasible mask {mask.hex()}"
        )
    return mask


def osga_unconstrained_step(
    f_prev: SetFunctionHandle,
    min_oracle: Callable[[SetFunctionHandle], tuple[SubsetMask, float]],
) -> SubsetMask:
    """Unconstrained greedy update: exact minimizer of the previous objective."""
    mask, _ = min_oracle(f_prev)
    return mask


def osgga_step(spec: GenericApproxSpec, family: FeasibleFamily) -> SubsetMask:
    """Generic greedy update: minimize the squared surrogate (it is modular)."""
    if family.linear_min is not None:
        return family.linear_min(spec.c)
    if family.enumerate_masks is not None:
        best: SubsetMask | None = None
        best_v = 0.0
        for mask in family.enumerate_masks():
            v = float(sum(spec.c[i] for i in mask.indices()))
            if best is None or v < best_v or (v == best_v and mask.bits < best.bits):
                best, best_v = mask, v
        if best is None:
            raise ConfigurationError("family enumerated no feasible mask")
        return best
    raise ConfigurationError(
        f"family {family.name!r} offers neither a linear oracle nor an enumerator"
    )


def box_project(v: np.ndarray) -> RelaxedPoint:
    """Euclidean projection onto [0,1]^n (componentwise clamp)."""
    return RelaxedPoint(np.clip(np.asarray(v, dtype=float), 0.0, 1.0))


@dataclass(frozen=True)
class OspgdConfig:
    """Projected-subgradient settings; the step size is delta / sqrt(T)."""

    delta: float
    horizon_T: int
    x_init: RelaxedPoint
    rounder: Rounder
    projector: Callable[[np.ndarray], RelaxedPoint] = box_project

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.horizon_T < 1:
            raise ValueError("horizon_T must be >= 1")

    @property
    def eta(self) -> float:
        return self.delta / math.sqrt(self.horizon_T)

    @classmethod
    def centered(
        cls, n: int, horizon_T: int, rounder: Rounder, delta: float = 1.0
    ) -> "OspgdConfig":
        # The box center minimizes worst-case distance to any vertex.
        return cls(delta, horizon_T, RelaxedPoint(np.full(n, 0.5)), rounder)


def ospgd_step(
    f_prev: SetFunctionHandle,
    x_t: RelaxedPoint,
    cfg: OspgdConfig,
    rng: SeededRng,
) -> tuple[RelaxedPoint, SubsetMask]:
    """One projected subgradient step on f_prev's extension, then rounding.

    Returns (x_next, S_next).  x_next is a function of (f_prev, x_t) only;
    the rounding draw never feeds back into the continuous state.
    """
    g = lovasz_subgradient(f_prev, x_t)
    x_next = cfg.projector(x_t.coords - cfg.eta * g)
    if np.any(x_next.coords < 0.0) or np.any(x_next.coords > 1.0):
        raise InvariantViolationError("projector left the unit box")
    mask = round_with_guarantee(cfg.rounder, x_next, rng)
    return x_next, mask


@dataclass
class RegretLedger:
    """Per-round losses and optima with cumulative alpha-regret.

    The benchmark weight alpha is an audit-time parameter (an algorithm
    never needs it to run); it defaults to the surrogate's beta where one
    exists and to 1 otherwise.  epsilon is the tail probability used by
    high-probability audits.
    """

    alpha: float = 1.0
    epsilon: float = 0.1
    per_round: list[tuple[float, float | None]] = field(default_factory=list)

    def __post_init__(self):
        if not self.alpha >= 1.0:
            raise ValueError("alpha must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")

    def record(self, loss: float, optimum: float | None) -> None:
        self.per_round.append((loss, optimum))

    @property
    def rounds(self) -> int:
        return len(self.per_round)

    @property
    def cumulative_alpha_regret(self) -> float | None:
        total = 0.0
        for loss, opt in self.per_round:
            if opt is None:
                return None
            total += loss - self.alpha * opt
        return total

    def regret_series(self) -> list[float | None]:
        """Cumulative alpha-regret after each recorded round."""
        out: list[float | None] = []
        total: float | None = 0.0
        for loss, opt in self.per_round:
            if total is None or opt is None:
                total = None
            else:
                total += loss - self.alpha * opt
            out.append(total)
        return out

    def time_averaged(self, t: int) -> float | None:
        """Cumulative alpha-regret through round t, divided by t."""
        if not 1 <= t <= self.rounds:
            raise ValueError(f"t={t} outside recorded horizon {self.rounds}")
        total = 0.0
        for loss, opt in self.per_round[:t]:
            if opt is None:
                return None
            total += loss - self.alpha * opt
        return total / t


@dataclass(frozen=True)
class RoundData:
    """One revealed round: the objective plus whatever surrogate data exists."""

    t: int
    f: SetFunctionHandle
    f_approx: SetFunctionHandle | None = None
    generic: GenericApproxSpec | None = None


class ProblemStream(Protocol):
    def reveal(self, t: int) -> RoundData: ...


class SequenceStream:
    """Stream over a pre-built list of rounds (reveals stay order-checked)."""

    def __init__(self, rounds: Sequence[RoundData]):
        self._rounds = list(rounds)

    def __len__(self) -> int:
        return len(self._rounds)

    def reveal(self, t: int) -> RoundData:
        if t > len(self._rounds):
            raise AlgorithmError(
                f"stream exhausted: round {t} requested, only {len(self._rounds)} present"
            )
        return self._rounds[t - 1]


class OnlineLearner(Protocol):
    name: str

    def decide(self, t: int) -> SubsetMask: ...

    def observe(self, round_data: RoundData) -> None: ...


class GreedyLearner:
    """Replays the previous round's surrogate minimizer each round."""

    def __init__(
        self,
        spec: ApproxSpec,
        family: FeasibleFamily,
        initial: SubsetMask | None = None,
    ):
        self.name = "osga"
        self.spec = spec
        self.family = family
        self._decision = initial if initial is not None else SubsetMask.empty(
            family.ground
        )

    def decide(self, t: int) -> SubsetMask:
        return self._decision

    def observe(self, round_data: RoundData) -> None:
        f_approx = round_data.f_approx
        if f_approx is None:
            if self.spec.approx is None:
                raise ContractViolationError(
                    "stream carries no surrogate and the spec has no factory"
                )
            f_approx = self.spec.approx(round_data.f)
        self._decision = osga_step(self.spec, f_approx, self.family)


class UnconstrainedGreedyLearner:
    """Greedy over the full power set via an exact minimization oracle."""

    def __init__(
        self,
        ground: GroundSet,
        min_oracle: Callable[[SetFunctionHandle], tuple[SubsetMask, float]],
        initial: SubsetMask | None = None,
    ):
        self.name = "osga"
        self.min_oracle = min_oracle
        self._decision = initial if initial is not None else SubsetMask.empty(ground)

    def decide(self, t: int) -> SubsetMask:
        return self._decision

    def observe(self, round_data: RoundData) -> None:
        self._decision = osga_unconstrained_step(round_data.f, self.min_oracle)


class GenericGreedyLearner:
    """Greedy on the square-root-of-modular surrogate stream."""

    def __init__(
        self,
        family: FeasibleFamily,
        initial: SubsetMask | None = None,
    ):
        self.name = "osgga"
        self.family = family
        self._decision = initial if initial is not None else SubsetMask.empty(
            family.ground
        )

    def decide(self, t: int) -> SubsetMask:
        return self._decision

    def observe(self, round_data: RoundData) -> None:
        if round_data.generic is None:
            raise ContractViolationError("stream carries no generic surrogate data")
        self._decision = osgga_step(round_data.generic, self.family)


class ProjectedSubgradientLearner:
    """Single projected descent step per round on the revealed extension."""

    def __init__(self, cfg: OspgdConfig, rng: SeededRng):
        self.name = "ospgd"
        self.cfg = cfg
        self.rng = rng
        self.x = cfg.x_init
        self._decision: SubsetMask | None = None

    def decide(self, t: int) -> SubsetMask:
        if self._decision is None:
            self._decision = round_with_guarantee(self.cfg.rounder, self.x, self.rng)
        return self._decision

    def observe(self, round_data: RoundData) -> None:
        self.x, self._decision = ospgd_step(round_data.f, self.x, self.cfg, self.rng)


@dataclass(frozen=True)
class TraceRow:
    t: int
    algorithm: str
    loss: float
    optimum: float | None
    alpha_regret_cum: float | None
    regret_time_avg: float | None
    variation_cum: float | None
    mask: SubsetMask


@dataclass
class RunResult:
    trace: list[TraceRow]
    regret: RegretLedger
    variation: VariationLedger


def run_online(
    stream: ProblemStream,
    make_learner: Callable[[SeededRng], OnlineLearner],
    T: int,
    seed: int,
    optimum_oracle: Callable[[RoundData], tuple[SubsetMask, float]] | None = None,
    alpha: float = 1.0,
) -> RunResult:
    """Drive one online run of T rounds.

    Per round: commit the learner's decision, then reveal the objective,
    score the decision, account regret/variation against the oracle optimum
    (when available), and only then let the learner observe the round.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = SeededRng(seed)
    learner = make_learner(rng)
    ledger = RegretLedger(alpha=alpha)
    ground = None
    variation: VariationLedger | None = None
    trace: list[TraceRow] = []
    cum_regret: float | None = 0.0
    for t in range(1, T + 1):
        decision = learner.decide(t)
        round_data = stream.reveal(t)
        if round_data.t != t:
            raise AlgorithmError(f"stream returned round {round_data.t} for t={t}")
        if ground is None:
            ground = round_data.f.ground
            variation = VariationLedger(ground)
        loss = round_data.f(decision)
        optimum: float | None = None
        if optimum_oracle is not None:
            best_mask, optimum = optimum_oracle(round_data)
            append_variation(variation, best_mask)
        ledger.record(loss, optimum)
        if optimum is None:
            cum_regret = None
        elif cum_regret is not None:
            cum_regret += loss - alpha * optimum
        trace.append(
            TraceRow(
                t=t,
                algorithm=learner.name,
                loss=loss,
                optimum=optimum,
                alpha_regret_cum=cum_regret,
                regret_time_avg=None if cum_regret is None else cum_regret / t,
                variation_cum=None if optimum_oracle is None else variation.cumulative,
                mask=decision,
            )
        )
        learner.observe(round_data)
    assert variation is not None
    return RunResult(trace, ledger, variation)


def sweep_seeds(
    run_one: Callable[[int], object],
    seeds: Iterable[int],
    max_workers: int | None = None,
) -> list[object]:
    """Replay independent runs over a seed range, optionally in parallel.

    Replicas share no mutable state, so a thread pool is safe; results come
    back in seed order either way.
    """
    seeds = list(seeds)
    if max_workers is None or max_workers <= 1:
        return [run_one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run_one, seeds))


def _cell(v: float | int | str | None) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_trace_csv(path, trace: Sequence[TraceRow]) -> None:
    """Write trace rows in the canonical column order (bit-exact per seed)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for row in trace:
            w.writerow(
                [
                    row.t,
                    row.algorithm,
                    _cell(row.loss),
                    _cell(row.optimum),
                    _cell(row.alpha_regret_cum),
                    _cell(row.regret_time_avg),
                    _cell(row.variation_cum),
                    row.mask.hex(),
                ]
            )


# Regret-bound right-hand sides (used by the numeric bound audits).

def theorem1_bound(alpha: float, beta: float, L: float, variation: float) -> float:
    """Greedy bound: (alpha * L / beta) * cumulative surrogate-optimum drift."""
    return alpha * L / beta * variation


def corollary2_bound(
    gamma: float, L_generic: float, L: float, nu: float, variation_g: float
) -> float:
    """Generic-greedy bound: (gamma^2 * L_generic * L / nu) * drift."""
    return gamma * gamma * L_generic * L / nu * variation_g


def theorem2_bound(
    n: int, delta: float, M: float, variation: float, T: int, alpha: float = 1.0
) -> float:
    """Projected-subgradient bound:
    alpha * (sqrt(n) * delta * V + 5n/(2 delta) + 4 M delta) * sqrt(T)."""
    return alpha * (
        math.sqrt(n) * delta * variation + 5.0 * n / (2.0 * delta) + 4.0 * M * delta
    ) * math.sqrt(T)


def expected_regret_bound(
    n: int, delta: float, M: float, variation: float, T: int
) -> float:
    """Expected-regret form of the projected-subgradient bound (alpha = 1)."""
    return theorem2_bound(n, delta, M, variation, T, alpha=1.0)


def high_probability_regret_bound(
    n: int, delta: float, M: float, variation: float, T: int, epsilon: float
) -> float:
    """High-probability form: adds 2 M delta log(1/eps) sqrt(T) to the mean."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    return (
        math.sqrt(n * T) * delta * variation
        + (5.0 * n / (2.0 * delta) + 4.0 * M * delta + 2.0 * M * delta * math.log(1.0 / epsilon))
        * math.sqrt(T)
    )
