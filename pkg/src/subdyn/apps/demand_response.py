"""Thermostatic-load fleet simulator and setpoint-tracking dispatch loop.

A fleet of air-conditioner-style loads offers on/off flexibility while
their temperatures stay inside the thermostat deadband.  Each round the
dispatcher picks a subset to run so the aggregate power of the picked set
tracks a regulation setpoint from above; loads whose temperature has left
the deadband are seized by their local backup controller (forced on when
too hot, forced off when too cold) and stop being flexible until they
re-enter the band.

Per-load bookkeeping splits the rated draw u into a flexible component p
(available to dispatch) and an inflexible component p_inflex (consumed
regardless because the backup forced the unit on); u = p + p_inflex, and a
unit forced off contributes zero either way.

The round objective rewards feasible sets (aggregate power at least the
setpoint) with lower aggregate power:

    f(S) = (sum_{i in S} u_i)^2 - (sum_{i in V} u_i)^2   if sum_S u >= r,
           0                                              otherwise.

``dr_objective`` evaluates this closed form in O(n); ``dr_objective_literal``
evaluates the equivalent sum over every subset A of the ground set, where
the term max(0, |S & A| - |S | A| + 1) picks out exactly A = S.  The
literal form exists for audits only; the equivalence is machine-checked
exhaustively in the tests rather than trusted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from subdyn import kernels
from subdyn.algorithms import (
    OspgdConfig,
    ProjectedSubgradientLearner,
    RegretLedger,
    RoundData,
)
from subdyn.core import (
    CapacityError,
    GroundSet,
    SetFunctionHandle,
    SubsetMask,
    VariationLedger,
    append_variation,
    normalize,
    power_set_family,
)
from subdyn.rounding import SeededRng, threshold_rounder
from subdyn.signals import SignalConfig

__all__ = [
    "TclParams",
    "TclState",
    "DrRound",
    "tcl_step",
    "initial_state",
    "dr_objective",
    "dr_objective_literal",
    "random_fleet",
    "load_fleet",
    "save_fleet",
    "run_dr_experiment",
    "DrResult",
    "DEFAULT_DT_HOURS",
    "DR_TRACE_HEADER",
]

# Regulation dispatch runs on a 4-second cadence.
DEFAULT_DT_HOURS = 4.0 / 3600.0

# Default descent scale for the dispatch loop.  The learner's objective is
# normalized to per-unit of fleet capacity, so this is dimensionless; the
# value balances tracking lag against late-horizon churn and is an
# experiment config value, not a law.
DEFAULT_DR_DELTA = 128.0

LITERAL_MAX_N = 15

DR_TRACE_HEADER = [
    "t",
    "algorithm",
    "loss",
    "optimum",
    "alpha_regret_cum",
    "regret_time_avg",
    "variation_cum",
    "mask_hex",
    "r_t",
    "dispatched_kw",
    "tracking_error",
]

# Nominal residential air-conditioner parameters (equivalent thermal
# parameter model); the fleet generator draws log-uniform factors around
# these.
NOMINAL_TCL = {
    "thermal_resistance": 2.0,  # degC/kW
    "thermal_capacitance": 10.0,  # kWh/degC
    "rated_power": 5.6,  # kW electrical
    "cop": 2.5,
    "setpoint": 20.0,  # degC
    "deadband_halfwidth": 0.5,  # degC
    "ambient": 32.0,  # degC
}


@dataclass(frozen=True)
class TclParams:
    thermal_resistance: float  # degC/kW
    thermal_capacitance: float  # kWh/degC
    rated_power: float  # kW (electrical)
    cop: float
    setpoint: float  # degC
    deadband_halfwidth: float  # degC
    ambient: float  # degC

    def __post_init__(self):
        for name in (
            "thermal_resistance",
            "thermal_capacitance",
            "rated_power",
            "cop",
            "deadband_halfwidth",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class TclState:
    """State at the start of a round.

    is_flexible / power_flexible / power_inflexible describe what the unit
    can contribute this round given its temperature; is_on is the command
    the unit actually ran during the previous step (backup override
    included).
    """

    temperature: float  # degC
    is_on: bool
    is_flexible: bool
    power_flexible: float  # kW, rated power iff flexible
    power_inflexible: float  # kW, rated power iff backup forced the unit on

    @property
    def u(self) -> float:
        return self.power_flexible + self.power_inflexible


def _availability(params: TclParams, temperature: float) -> tuple[bool, float, float]:
    # Cooling load: too hot -> backup forces on, too cold -> forces off.
    hi = params.setpoint + params.deadband_halfwidth
    lo = params.setpoint - params.deadband_halfwidth
    if temperature > hi:
        return False, 0.0, params.rated_power
    if temperature < lo:
        return False, 0.0, 0.0
    return True, params.rated_power, 0.0


def initial_state(params: TclParams, temperature: float, is_on: bool = False) -> TclState:
    flex, p, p_inflex = _availability(params, temperature)
    return TclState(temperature, is_on, flex, p, p_inflex)


def tcl_step(
    params: TclParams, state: TclState, on_command: bool, dt: float = DEFAULT_DT_HOURS
) -> TclState:
    """Advance one round of the equivalent-thermal-parameter dynamics.

    The effective on/off m is the dispatch command unless the backup
    controller has seized the unit (state.is_flexible False), in which case
    m follows the backup.  Temperature relaxes toward the ambient minus the
    cooling gain R * P * cop when running:

        theta' = a * theta + (1 - a) * (ambient - m * R * P * cop),
        a = exp(-dt / (R * C)).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if state.is_flexible:
        m = on_command
    else:
        m = state.power_inflexible > 0.0
    a = math.exp(-dt / (params.thermal_resistance * params.thermal_capacitance))
    gain = params.thermal_resistance * params.rated_power * params.cop
    theta = a * state.temperature + (1.0 - a) * (params.ambient - (gain if m else 0.0))
    flex, p, p_inflex = _availability(params, theta)
    return TclState(theta, bool(m), flex, p, p_inflex)


@dataclass(frozen=True)
class DrRound:
    """One dispatch round: the clamped setpoint and per-load available power."""

    r_t: float  # kW
    u: np.ndarray  # kW per load

    def __post_init__(self):
        u = np.array(self.u, dtype=float, copy=True)
        if u.ndim != 1 or u.shape[0] < 1:
            raise ValueError("u must be a nonempty vector")
        if np.any(u < 0):
            raise ValueError("available powers must be nonnegative")
        total = float(u.sum())
        if not 0.0 <= self.r_t <= total:
            raise ValueError(
                f"setpoint {self.r_t} outside [0, {total}]; clamp before building"
            )
        u.flags.writeable = False
        object.__setattr__(self, "u", u)

    @property
    def total(self) -> float:
        return float(self.u.sum())


def clamp_setpoint(raw: float, u: np.ndarray) -> float:
    """Clamp a raw signal value into the feasible band [0, sum(u)]."""
    return min(max(raw, 0.0), float(np.asarray(u).sum()))


def dr_objective(round_: DrRound) -> SetFunctionHandle:
    """Closed-form dispatch objective for one round (production evaluator)."""
    u = round_.u
    total = round_.total
    tt = total * total
    r = round_.r_t
    ground = GroundSet(u.shape[0])

    def ev(mask: SubsetMask) -> float:
        s = float(sum(u[i] for i in mask.indices()))
        return s * s - tt if s >= r else 0.0

    return SetFunctionHandle(
        ground, ev, max(tt, 1e-300), normalized=(r > 0.0), name="dr"
    )


def dr_objective_literal(round_: DrRound) -> SetFunctionHandle:
    """Subset-sum form of the dispatch objective (audit evaluator, n <= 15).

    Sums the bracket over every subset A, gated by the term
    max(0, |S & A| - |S | A| + 1) which is one exactly when A = S, and by
    feasibility of A.
    """
    u = round_.u
    n = u.shape[0]
    if n > LITERAL_MAX_N:
        raise CapacityError(f"literal evaluator limited to n <= {LITERAL_MAX_N}")
    ground = GroundSet(n)
    sums = kernels.subset_sums(u)
    pc = kernels.popcount_table(n).astype(np.int64)
    total = round_.total
    bracket = sums * sums - total * total
    feasible = sums >= round_.r_t
    a_bits = np.arange(1 << n, dtype=np.int64)

    def ev(mask: SubsetMask) -> float:
        s = mask.bits
        inter = pc[a_bits & s]
        union = pc[a_bits | s]
        gate = np.maximum(0, inter - union + 1)
        return float(np.sum(bracket * gate * feasible))

    return SetFunctionHandle(
        ground, ev, max(total * total, 1e-300), normalized=(round_.r_t > 0.0),
        name="dr_literal",
    )


def random_fleet(
    n: int, seed: int, spread: float = 1.25
) -> list[tuple[TclParams, TclState]]:
    """Seeded fleet with log-uniform parameter factors around the nominals.

    R, C, and rated power each get an independent factor in
    [1/spread, spread]; setpoints vary by +-0.5 degC; initial temperatures
    are uniform inside the deadband.
    """
    if n < 1:
        raise ValueError("fleet needs at least one load")
    rng = SeededRng(seed, stream=12)
    log_s = math.log(spread)
    fleet = []
    for _ in range(n):
        factors = np.exp((2.0 * rng.uniforms(3) - 1.0) * log_s)
        setpoint = NOMINAL_TCL["setpoint"] + (rng.uniform() - 0.5)
        params = TclParams(
            thermal_resistance=NOMINAL_TCL["thermal_resistance"] * factors[0],
            thermal_capacitance=NOMINAL_TCL["thermal_capacitance"] * factors[1],
            rated_power=NOMINAL_TCL["rated_power"] * factors[2],
            cop=NOMINAL_TCL["cop"],
            setpoint=setpoint,
            deadband_halfwidth=NOMINAL_TCL["deadband_halfwidth"],
            ambient=NOMINAL_TCL["ambient"],
        )
        theta0 = setpoint + (2.0 * rng.uniform() - 1.0) * params.deadband_halfwidth
        fleet.append((params, initial_state(params, theta0)))
    return fleet


def save_fleet(path, fleet: Sequence[tuple[TclParams, TclState]]) -> None:
    rows = []
    for params, state in fleet:
        rows.append(
            {
                "R": params.thermal_resistance,
                "C": params.thermal_capacitance,
                "P": params.rated_power,
                "cop": params.cop,
                "setpoint": params.setpoint,
                "deadband": params.deadband_halfwidth,
                "ambient": params.ambient,
                "theta0": state.temperature,
            }
        )
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=1)


def load_fleet(source) -> list[tuple[TclParams, TclState]]:
    """Fleet from a JSON array (path or already-parsed list)."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source) as fh:
            rows = json.load(fh)
    else:
        rows = source
    fleet = []
    for row in rows:
        params = TclParams(
            thermal_resistance=row["R"],
            thermal_capacitance=row["C"],
            rated_power=row["P"],
            cop=row["cop"],
            setpoint=row["setpoint"],
            deadband_halfwidth=row["deadband"],
            ambient=row["ambient"],
        )
        fleet.append((params, initial_state(params, row["theta0"])))
    return fleet


@dataclass(frozen=True)
class DrTraceRow:
    t: int
    algorithm: str
    loss: float
    optimum: float | None
    alpha_regret_cum: float | None
    regret_time_avg: float | None
    variation_cum: float | None
    mask: SubsetMask
    r_t: float
    dispatched_kw: float
    tracking_error: float


@dataclass
class DrResult:
    dispatcher: str
    trace: list[DrTraceRow]
    rmse: float
    regret: RegretLedger
    variation: VariationLedger


DISPATCHERS = ("ospgd", "optimal", "random")


def run_dr_experiment(
    fleet: Sequence[tuple[TclParams, TclState]],
    signal: SignalConfig,
    T: int,
    seed: int,
    dispatcher: str = "ospgd",
    delta: float = DEFAULT_DR_DELTA,
    dt: float = DEFAULT_DT_HOURS,
    compute_optima: bool = True,
) -> DrResult:
    """Run one tracking experiment and report the trace and RMSE.

    Per round: read each load's availability, clamp the signal into the
    feasible band, commit a dispatch set (the projected-subgradient learner
    replays its pending decision from the previous round's objective; the
    "optimal" dispatcher replays the hindsight round optimum; "random"
    draws uniformly among feasible sets), advance the thermostat dynamics
    under the dispatched commands, and only then let the learner observe
    the round objective.
    """
    if dispatcher not in DISPATCHERS:
        raise ValueError(f"dispatcher must be one of {DISPATCHERS}")
    if T < 1:
        raise ValueError("T must be >= 1")
    n = len(fleet)
    if compute_optima and n > 24:
        raise CapacityError("round optima by brute force need n <= 24")
    ground = GroundSet(n)
    params = [p for p, _ in fleet]
    states = [s for _, s in fleet]
    # The learner sees the objective in per-unit of fleet capacity: same
    # minimizers, but curvature O(1) so the descent step delta/sqrt(T) is
    # well conditioned regardless of the fleet's kW scale.  Losses, RMSE,
    # and the regret ledger stay in physical units.
    p_base = sum(pr.rated_power for pr in params)
    noise = signal.table()
    master = SeededRng(seed)
    learner = None
    if dispatcher == "ospgd":
        cfg = OspgdConfig.centered(
            n, T, threshold_rounder(power_set_family(ground)), delta=delta
        )
        learner = ProjectedSubgradientLearner(cfg, master.spawn(10))
    draw = master.spawn(11)  # random-dispatch stream
    ledger = RegretLedger(alpha=1.0)
    variation = VariationLedger(ground)
    trace: list[DrTraceRow] = []
    sq_err = 0.0
    cum_regret: float | None = 0.0
    for t in range(1, T + 1):
        u = np.array([s.u for s in states])
        total = float(u.sum())
        r_t = clamp_setpoint(signal.value(t, noise), u)
        round_ = DrRound(r_t, u)
        f_t = dr_objective(round_)
        sums = None
        if dispatcher == "optimal" or compute_optima:
            sums = kernels.subset_sums(u)
        if dispatcher == "ospgd":
            decision = learner.decide(t)
        elif dispatcher == "optimal":
            bits, _ = kernels.dr_min_mask(sums, total, r_t)
            decision = SubsetMask(ground, bits)
        else:
            if sums is None:
                sums = kernels.subset_sums(u)
            feasible = np.nonzero(sums >= r_t)[0]
            decision = SubsetMask(ground, int(feasible[draw.integer(len(feasible))]))
        loss = f_t(decision)
        optimum: float | None = None
        if compute_optima:
            best_bits, optimum = kernels.dr_min_mask(sums, total, r_t)
            append_variation(variation, SubsetMask(ground, best_bits))
        ledger.record(loss, optimum)
        if optimum is None:
            cum_regret = None
        elif cum_regret is not None:
            cum_regret += loss - optimum
        dispatched = float(sum(u[i] for i in decision.indices()))
        err = dispatched - r_t
        sq_err += err * err
        trace.append(
            DrTraceRow(
                t=t,
                algorithm=dispatcher,
                loss=loss,
                optimum=optimum,
                alpha_regret_cum=cum_regret,
                regret_time_avg=None if cum_regret is None else cum_regret / t,
                variation_cum=variation.cumulative if compute_optima else None,
                mask=decision,
                r_t=r_t,
                dispatched_kw=dispatched,
                tracking_error=err,
            )
        )
        states = [
            tcl_step(params[i], states[i], decision.contains(i), dt)
            for i in range(n)
        ]
        if learner is not None:
            scaled = DrRound(r_t / p_base, u / p_base)
            learner.observe(RoundData(t, normalize(dr_objective(scaled))))
    return DrResult(
        dispatcher=dispatcher,
        trace=trace,
        rmse=math.sqrt(sq_err / T),
        regret=ledger,
        variation=variation,
    )


def write_dr_trace_csv(path, trace: Sequence[DrTraceRow]) -> None:
    import csv

    def cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DR_TRACE_HEADER)
        for row in trace:
            w.writerow(
                [
                    row.t,
                    row.algorithm,
                    cell(row.loss),
                    cell(row.optimum),
                    cell(row.alpha_regret_cum),
                    cell(row.regret_time_avg),
                    cell(row.variation_cum),
                    row.mask.hex(),
                    cell(row.r_t),
                    cell(row.dispatched_kw),
                    cell(row.tracking_error),
                ]
            )
