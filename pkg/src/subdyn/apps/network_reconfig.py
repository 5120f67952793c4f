"""Real-time feeder reconfiguration on top of AC power flow.

The distribution network carries static lines (always energized) and
switched lines; a configuration closes a subset of switches and is feasible
when the energized graph is a spanning forest with exactly one feeder per
component and every bus supplied.  Reconfiguration minimizes active losses
online: each round the fully-closed (weakly meshed) network's power flow is
solved with Newton-Raphson, branch current magnitudes become edge weights,
and a minimum spanning tree over the negated currents keeps the
highest-current paths energized.  With several feeders, temporary virtual
feeder-to-feeder edges with a dominant weight force the tree to merge
sources; they are discarded from the returned switch set, which leaves one
radial island per feeder.

Power flow solves the polar Newton-Raphson equations from a flat start;
feeders are fixed-voltage (slack) buses and every other bus holds a PQ
load.  Tolerances are on the power mismatch in per-unit.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from subdyn.core import (
    BRUTE_FORCE_MAX_N,
    CapacityError,
    ConfigurationError,
    FeasibleFamily,
    GroundSet,
    InvariantViolationError,
    SetFunctionHandle,
    SubsetMask,
    VariationLedger,
    append_variation,
    modular_function,
)
from subdyn.algorithms import RegretLedger
from subdyn.rounding import SeededRng
from subdyn.signals import PerlinTable, perlin_sample

__all__ = [
    "Bus",
    "Line",
    "PowerNetwork",
    "PfSolution",
    "TopologyError",
    "NoSpanningTreeError",
    "newton_raphson_pf",
    "active_losses",
    "prim_mst",
    "wm_objective",
    "spanning_tree_family",
    "is_radial",
    "algorithm1_step",
    "wilson_random_feasible",
    "PerturbConfig",
    "run_nr_experiment",
    "NrResult",
    "load_network",
    "fixture_path",
    "load_fixture",
    "NR_TRACE_HEADER",
]

NR_TRACE_HEADER = [
    "t",
    "losses_pu",
    "radial",
    "switch_mask_hex",
    "pf_iterations",
    "pf_mismatch",
]

DEFAULT_PF_TOL = 1e-8
DEFAULT_PF_MAX_ITER = 50
DEFAULT_BIG_M = 1e6


class TopologyError(RuntimeError):
    """The energized graph leaves some bus unsupplied (or can never be radial)."""


class NoSpanningTreeError(RuntimeError):
    """The graph handed to the spanning-tree routine is disconnected."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str  # "slack" | "load"
    p_demand: float  # per-unit active demand
    q_demand: float  # per-unit reactive demand
    is_feeder: bool

    def __post_init__(self):
        if self.kind not in ("slack", "load"):
            raise ConfigurationError(f"bus {self.id}: unknown kind {self.kind!r}")
        if self.is_feeder != (self.kind == "slack"):
            raise ConfigurationError(
                f"bus {self.id}: exactly the feeder buses are slack"
            )
        if self.kind == "load" and (self.p_demand < 0 or self.q_demand < 0):
            raise ConfigurationError(f"bus {self.id}: load demands must be >= 0")


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r: float  # per-unit resistance
    x: float  # per-unit reactance
    switched: bool
    closed: bool = True  # meaningful only when switched (initial state)

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ConfigurationError("line endpoints must differ")
        if self.r == 0.0 and self.x == 0.0:
            raise ConfigurationError("line impedance must be nonzero")

    @property
    def admittance(self) -> complex:
        return 1.0 / complex(self.r, self.x)


class PowerNetwork:
    """Buses plus lines, with index maps and structural validation.

    Static lines must form a forest and must not connect two feeders:
    otherwise no radial configuration exists at all, and the instance is
    rejected up front.
    """

    def __init__(
        self,
        buses: Sequence[Bus],
        lines: Sequence[Line],
        base_mva: float = 10.0,
        base_kv: float = 12.66,
    ):
        ids = [b.id for b in buses]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("bus ids must be unique")
        self.buses = list(buses)
        self.lines = list(lines)
        self.base_mva = base_mva
        self.base_kv = base_kv
        self.index = {b.id: k for k, b in enumerate(self.buses)}
        self.feeders = [k for k, b in enumerate(self.buses) if b.is_feeder]
        if not self.feeders:
            raise ConfigurationError("network needs at least one feeder (slack) bus")
        for ln in self.lines:
            if ln.from_bus not in self.index or ln.to_bus not in self.index:
                raise ConfigurationError(
                    f"line {ln.from_bus}-{ln.to_bus} references unknown bus"
                )
        self.switch_lines = [k for k, ln in enumerate(self.lines) if ln.switched]
        self.static_lines = [k for k, ln in enumerate(self.lines) if not ln.switched]
        self.switch_ground = GroundSet(max(len(self.switch_lines), 1))
        self._validate_static()
        if not self._connected(range(len(self.lines))):
            raise ConfigurationError("fully-closed network must supply every bus")

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_switches(self) -> int:
        return len(self.switch_lines)

    def p_nominal(self) -> np.ndarray:
        return np.array([b.p_demand for b in self.buses])

    def q_nominal(self) -> np.ndarray:
        return np.array([b.q_demand for b in self.buses])

    def line_endpoints(self, k: int) -> tuple[int, int]:
        ln = self.lines[k]
        return self.index[ln.from_bus], self.index[ln.to_bus]

    def energized_lines(self, switch_mask: SubsetMask) -> list[int]:
        closed = [
            self.switch_lines[i]
            for i in range(self.n_switches)
            if switch_mask.contains(i)
        ]
        return sorted(self.static_lines + closed)

    def initial_switch_mask(self) -> SubsetMask | None:
        """Mask of switches marked closed in the input, if any are."""
        closed = [
            i
            for i, k in enumerate(self.switch_lines)
            if self.lines[k].closed
        ]
        if not closed and self.switch_lines:
            return None
        return SubsetMask.from_indices(self.switch_ground, closed)

    def _validate_static(self) -> None:
        parent = list(range(self.n_buses))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for k in self.static_lines:
            i, j = self.line_endpoints(k)
            ri, rj = find(i), find(j)
            if ri == rj:
                raise ConfigurationError(
                    "static lines form a cycle; no radial configuration exists"
                )
            parent[ri] = rj
        roots = {find(f) for f in self.feeders}
        if len(roots) < len(self.feeders):
            raise ConfigurationError(
                "static lines connect two feeders; no radial configuration exists"
            )

    def _connected(self, energized: Sequence[int]) -> bool:
        adj: list[list[int]] = [[] for _ in range(self.n_buses)]
        for k in energized:
            i, j = self.line_endpoints(k)
            adj[i].append(j)
            adj[j].append(i)
        seen = [False] * self.n_buses
        stack = list(self.feeders)
        for f in self.feeders:
            seen[f] = True
        while stack:
            a = stack.pop()
            for b in adj[a]:
                if not seen[b]:
                    seen[b] = True
                    stack.append(b)
        return all(seen)


def load_network(source) -> PowerNetwork:
    """Network from the JSON document format (path, file-like, or dict)."""
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    buses = [
        Bus(
            id=row["id"],
            kind=row["kind"],
            p_demand=row["p"],
            q_demand=row["q"],
            is_feeder=row["feeder"],
        )
        for row in doc["buses"]
    ]
    lines = [
        Line(
            from_bus=row["from"],
            to_bus=row["to"],
            r=row["r"],
            x=row["x"],
            switched=row["switched"],
            closed=row.get("closed", True),
        )
        for row in doc["lines"]
    ]
    return PowerNetwork(
        buses, lines, doc.get("base_mva", 10.0), doc.get("base_kv", 12.66)
    )


def fixture_path(name: str):
    """Filesystem path of a packaged network fixture (e.g. 'ieee33')."""
    res = resources.files("subdyn") / "fixtures" / f"{name}.json"
    if not res.is_file():
        raise FileNotFoundError(f"no packaged fixture named {name!r}")
    return res


def load_fixture(name: str) -> PowerNetwork:
    return load_network(fixture_path(name))


@dataclass
class PfSolution:
    voltages: np.ndarray  # complex per bus
    branch_currents: np.ndarray  # complex per line, 0 on de-energized lines
    branch_flows: np.ndarray  # complex P+jQ per line (sending end), 0 if open
    converged: bool
    iterations: int
    max_mismatch: float


def _ybus(network: PowerNetwork, energized: Sequence[int]) -> np.ndarray:
    n = network.n_buses
    Y = np.zeros((n, n), dtype=complex)
    for k in energized:
        i, j = network.line_endpoints(k)
        y = network.lines[k].admittance
        Y[i, i] += y
        Y[j, j] += y
        Y[i, j] -= y
        Y[j, i] -= y
    return Y


def newton_raphson_pf(
    network: PowerNetwork,
    energized: Sequence[int] | None = None,
    p: np.ndarray | None = None,
    q: np.ndarray | None = None,
    tolerance: float = DEFAULT_PF_TOL,
    max_iter: int = DEFAULT_PF_MAX_ITER,
    slack_voltage: float = 1.0,
) -> PfSolution:
    """Polar Newton-Raphson power flow from a flat start.

    Feeder buses hold the slack voltage; every other bus is a PQ load with
    demand (p, q) in per-unit (defaults to the network's nominal demand).
    Convergence means the largest PQ power mismatch is below tolerance.  A
    singular Jacobian is reported as non-convergence, not raised.
    """
    if energized is None:
        energized = range(len(network.lines))
    energized = list(energized)
    if not network._connected(energized):
        raise TopologyError("energized lines leave a bus unsupplied")
    n = network.n_buses
    p = network.p_nominal() if p is None else np.asarray(p, dtype=float)
    q = network.q_nominal() if q is None else np.asarray(q, dtype=float)
    Y = _ybus(network, energized)
    pq = np.array(
        [k for k in range(n) if not network.buses[k].is_feeder], dtype=int
    )
    # Loads consume power: specified net injection is the negated demand.
    s_spec = -(p + 1j * q)
    vm = np.full(n, float(slack_voltage))
    va = np.zeros(n)
    converged = False
    iterations = 0
    max_mis = math.inf
    while iterations < max_iter:
        iterations += 1
        v = vm * np.exp(1j * va)
        ibus = Y @ v
        s_calc = v * np.conj(ibus)
        mis = s_spec[pq] - s_calc[pq]
        f = np.concatenate([mis.real, mis.imag])
        max_mis = float(np.abs(f).max()) if f.size else 0.0
        if max_mis < tolerance:
            converged = True
            break
        diag_v = np.diag(v)
        diag_i = np.diag(ibus)
        diag_norm = np.diag(v / vm)
        ds_dva = 1j * diag_v @ np.conj(diag_i - Y @ diag_v)
        ds_dvm = diag_v @ np.conj(Y @ diag_norm) + np.conj(diag_i) @ diag_norm
        J = np.block(
            [
                [ds_dva[np.ix_(pq, pq)].real, ds_dvm[np.ix_(pq, pq)].real],
                [ds_dva[np.ix_(pq, pq)].imag, ds_dvm[np.ix_(pq, pq)].imag],
            ]
        )
        try:
            dx = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            break
        m = pq.size
        va[pq] += dx[:m]
        vm[pq] += dx[m:]
    v = vm * np.exp(1j * va)
    currents = np.zeros(len(network.lines), dtype=complex)
    flows = np.zeros(len(network.lines), dtype=complex)
    for k in energized:
        i, j = network.line_endpoints(k)
        currents[k] = (v[i] - v[j]) * network.lines[k].admittance
        flows[k] = v[i] * np.conj(currents[k])
    return PfSolution(v, currents, flows, converged, iterations, max_mis)


def active_losses(
    solution: PfSolution, network: PowerNetwork, energized: Sequence[int] | None = None
) -> float:
    """Total active losses: sum over energized lines of Re(|vi - vj|^2 y*)."""
    if not solution.converged:
        raise InvariantViolationError("losses requested from a non-converged solution")
    if energized is None:
        energized = range(len(network.lines))
    v = solution.voltages
    total = 0.0
    for k in energized:
        i, j = network.line_endpoints(k)
        dv = v[i] - v[j]
        total += ((dv * np.conj(dv)) * np.conj(network.lines[k].admittance)).real
    return float(total)


def injected_power(solution: PfSolution, network: PowerNetwork,
                   energized: Sequence[int] | None = None) -> complex:
    """Net complex power injected at the feeder buses."""
    if energized is None:
        energized = range(len(network.lines))
    Y = _ybus(network, list(energized))
    v = solution.voltages
    s = v * np.conj(Y @ v)
    return complex(s[network.feeders].sum())


def prim_mst(
    num_nodes: int, edges: Sequence[tuple[int, int, float, int]]
) -> list[int]:
    """Minimum spanning tree edge ids via Prim's algorithm.

    Edges are (u, v, weight, edge_id); negative weights are fine.  The heap
    orders by (weight, from, to, edge_id) so ties break deterministically.
    Raises NoSpanningTreeError when the graph is disconnected.
    """
    if num_nodes < 1:
        raise ValueError("graph needs at least one node")
    adj: list[list[tuple[float, int, int, int]]] = [[] for _ in range(num_nodes)]
    for u, v, w, eid in edges:
        adj[u].append((w, u, v, eid))
        adj[v].append((w, v, u, eid))
    visited = [False] * num_nodes
    visited[0] = True
    heap = list(adj[0])
    heapq.heapify(heap)
    chosen: list[int] = []
    while heap and len(chosen) < num_nodes - 1:
        w, u, v, eid = heapq.heappop(heap)
        if visited[v]:
            continue
        visited[v] = True
        chosen.append(eid)
        for entry in adj[v]:
            if not visited[entry[2]]:
                heapq.heappush(heap, entry)
    if len(chosen) != num_nodes - 1:
        raise NoSpanningTreeError("graph is disconnected; no spanning tree exists")
    return chosen


def is_radial(network: PowerNetwork, switch_mask: SubsetMask) -> bool:
    """Radiality check: energized count = buses - feeders and all supplied."""
    energized = network.energized_lines(switch_mask)
    expected = network.n_buses - len(network.feeders)
    if len(energized) != expected:
        return False
    return network._connected(energized)


def spanning_tree_family(network: PowerNetwork) -> FeasibleFamily:
    """Family of switch masks whose energized graph is a radial supply.

    linear_min minimizes a modular switch-weight objective over the family:
    a spanning-structure problem solved by Prim's algorithm with static
    lines pinned below every real weight and virtual feeder-feeder merges
    (for several feeders) pinned between the two.
    """
    ground = network.switch_ground

    def contains(mask: SubsetMask) -> bool:
        return is_radial(network, mask)

    def enum():
        if network.n_switches > BRUTE_FORCE_MAX_N:
            raise CapacityError("too many switches to enumerate")
        for bits in range(1 << network.n_switches):
            mask = SubsetMask(ground, bits)
            if is_radial(network, mask):
                yield mask

    def linear_min(weights: np.ndarray) -> SubsetMask:
        force = float(np.abs(weights).sum()) + 1.0
        chosen = _forced_mst(network, weights, virtual_w=-force, static_w=-2.0 * force)
        return SubsetMask.from_indices(ground, chosen)

    return FeasibleFamily(ground, contains, enum, linear_min, "spanning_tree")


def _forced_mst(
    network: PowerNetwork, switch_weights: np.ndarray, virtual_w: float, static_w: float
) -> list[int]:
    """Spanning tree over (static + switched + virtual feeder merges).

    Returns the chosen switch indices (virtual and static edges dropped).
    Static edges carry the deepest weight so they are always kept; virtual
    feeder-to-feeder edges come next so sources merge through them rather
    than through any physical path.
    """
    edges: list[tuple[int, int, float, int]] = []
    n_lines = len(network.lines)
    for k in network.static_lines:
        i, j = network.line_endpoints(k)
        edges.append((i, j, static_w, k))
    for s, k in enumerate(network.switch_lines):
        i, j = network.line_endpoints(k)
        edges.append((i, j, float(switch_weights[s]), k))
    feeders = network.feeders
    vid = n_lines
    for a in range(len(feeders)):
        for b in range(a + 1, len(feeders)):
            edges.append((feeders[a], feeders[b], virtual_w, vid))
            vid += 1
    tree = prim_mst(network.n_buses, edges)
    switch_pos = {k: s for s, k in enumerate(network.switch_lines)}
    return sorted(switch_pos[k] for k in tree if k in switch_pos)


def wm_objective(
    network: PowerNetwork, current_magnitudes: np.ndarray
) -> SetFunctionHandle:
    """Modular switch objective: weight of switch s is -|I| on its line.

    Currents come from the fully-closed network's power flow; minimizing
    this over the radial family keeps the highest-current lines energized
    and is exactly the spanning-tree call.
    """
    weights = np.array(
        [-abs(current_magnitudes[k]) for k in network.switch_lines]
    )
    return modular_function(network.switch_ground, weights, name="wm")


@dataclass
class Algorithm1Diagnostics:
    pf: PfSolution
    used_previous: bool
    current_magnitudes: np.ndarray | None


def algorithm1_step(
    network: PowerNetwork,
    p: np.ndarray,
    q: np.ndarray,
    previous: SubsetMask,
    big_M: float = DEFAULT_BIG_M,
    pf_tolerance: float = DEFAULT_PF_TOL,
) -> tuple[SubsetMask, Algorithm1Diagnostics]:
    """One reconfiguration update from freshly observed demands.

    Close every switch, solve the meshed power flow, read branch current
    magnitudes, add virtual feeder-feeder edges weighted like a current of
    big_M when several feeders exist, take the minimum spanning tree of the
    negated weights, drop the virtual edges, and return the retained
    switches.  If the power flow fails to converge the previous switch set
    is kept and the incident reported in the diagnostics.
    """
    pf = newton_raphson_pf(network, None, p, q, tolerance=pf_tolerance)
    if not pf.converged:
        return previous, Algorithm1Diagnostics(pf, True, None)
    mags = np.abs(pf.branch_currents)
    if big_M <= float(mags.max(initial=0.0)):
        raise ConfigurationError(
            f"big_M={big_M} does not dominate the physical currents"
        )
    weights = np.array([-mags[k] for k in network.switch_lines])
    chosen = _forced_mst(network, weights, virtual_w=-big_M, static_w=-4.0 * big_M)
    mask = SubsetMask.from_indices(network.switch_ground, chosen)
    if not is_radial(network, mask):
        raise InvariantViolationError("reconfiguration produced a non-radial topology")
    return mask, Algorithm1Diagnostics(pf, False, mags)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        self.parent[self.find(a)] = self.find(b)


def wilson_random_feasible(network: PowerNetwork, rng: SeededRng) -> SubsetMask:
    """Uniform random feasible switch configuration (loop-erased walks).

    Feeders (and the endpoints of every static line) are contracted first;
    spanning trees of the contracted multigraph are exactly the feasible
    configurations, and Wilson's algorithm samples one uniformly.
    """
    uf = _UnionFind(network.n_buses)
    for f in network.feeders[1:]:
        uf.union(f, network.feeders[0])
    for k in network.static_lines:
        i, j = network.line_endpoints(k)
        uf.union(i, j)
    # Compact supernode ids.
    reps = sorted({uf.find(b) for b in range(network.n_buses)})
    node_of = {r: idx for idx, r in enumerate(reps)}
    root = node_of[uf.find(network.feeders[0])]
    incident: list[list[tuple[int, int]]] = [[] for _ in reps]  # (switch idx, other)
    for s, k in enumerate(network.switch_lines):
        i, j = network.line_endpoints(k)
        a, b = node_of[uf.find(i)], node_of[uf.find(j)]
        if a == b:
            continue  # can never be closed in a radial configuration
        incident[a].append((s, b))
        incident[b].append((s, a))
    in_tree = [False] * len(reps)
    in_tree[root] = True
    chosen: set[int] = set()
    for start in range(len(reps)):
        if in_tree[start]:
            continue
        nxt: dict[int, tuple[int, int]] = {}
        a = start
        while not in_tree[a]:
            if not incident[a]:
                raise TopologyError("bus group unreachable from any feeder")
            s, b = incident[a][rng.integer(len(incident[a]))]
            nxt[a] = (s, b)
            a = b
        a = start
        while not in_tree[a]:
            in_tree[a] = True
            s, b = nxt[a]
            chosen.add(s)
            a = b
    return SubsetMask.from_indices(network.switch_ground, sorted(chosen))


@dataclass(frozen=True)
class PerturbConfig:
    """Multiplicative gradient-noise perturbation of the nominal demands.

    p_i(t) = p_nominal_i * (1 + noise_scale_p * noise_i(t * grid_step)),
    clipped at zero; one independent noise table per bus and channel.
    """

    noise_seed: int = 0
    noise_scale_p: float = 0.4
    noise_scale_q: float = 0.4
    grid_step: float = 0.02

    def tables(self, n_buses: int) -> tuple[list[PerlinTable], list[PerlinTable]]:
        tp = [
            PerlinTable(self.noise_seed, self.grid_step, stream=2 * k)
            for k in range(n_buses)
        ]
        tq = [
            PerlinTable(self.noise_seed, self.grid_step, stream=2 * k + 1)
            for k in range(n_buses)
        ]
        return tp, tq

    def loads_at(
        self,
        network: PowerNetwork,
        t: int,
        tables: tuple[list[PerlinTable], list[PerlinTable]],
    ) -> tuple[np.ndarray, np.ndarray]:
        tp, tq = tables
        coord = t * self.grid_step
        p = network.p_nominal()
        q = network.q_nominal()
        for k in range(network.n_buses):
            p[k] = max(0.0, p[k] * (1.0 + self.noise_scale_p * perlin_sample(tp[k], coord)))
            q[k] = max(0.0, q[k] * (1.0 + self.noise_scale_q * perlin_sample(tq[k], coord)))
        return p, q


@dataclass(frozen=True)
class NrTraceRow:
    t: int
    losses_pu: float
    radial: bool
    mask: SubsetMask
    pf_iterations: int
    pf_mismatch: float
    loss: float | None = None
    optimum: float | None = None


@dataclass
class NrResult:
    policy: str
    trace: list[NrTraceRow]
    regret: RegretLedger
    variation: VariationLedger
    total_losses: float
    all_radial: bool


NR_POLICIES = ("osga", "random")


def run_nr_experiment(
    network: PowerNetwork,
    perturb: PerturbConfig,
    T: int,
    seed: int,
    policy: str = "osga",
    big_M: float = DEFAULT_BIG_M,
    pf_tolerance: float = DEFAULT_PF_TOL,
    initial: SubsetMask | None = None,
    compute_optima: bool | None = None,
) -> NrResult:
    """Replay T rounds of online reconfiguration under noisy demand.

    The operated topology is scored by its own radial power flow (losses in
    per-unit); the greedy policy then reconfigures for the next round from
    the meshed flow of the *current* round, which is also this round's
    hindsight optimum of the current-weight objective, so the regret ledger
    comes for free.  The random policy draws a uniform feasible topology
    each round.  The initial configuration comes from the fixture's closed
    switches (or the nominal-load reconfiguration when none are marked).
    """
    if policy not in NR_POLICIES:
        raise ValueError(f"policy must be one of {NR_POLICIES}")
    if T < 1:
        raise ValueError("T must be >= 1")
    if compute_optima is None:
        compute_optima = policy == "osga"
    master = SeededRng(seed)
    draw = master.spawn(21)
    tables = perturb.tables(network.n_buses)
    if initial is None:
        initial = network.initial_switch_mask()
    if initial is None:
        initial, _ = algorithm1_step(
            network,
            network.p_nominal(),
            network.q_nominal(),
            SubsetMask.empty(network.switch_ground),
            big_M,
            pf_tolerance,
        )
    if not is_radial(network, initial):
        raise ConfigurationError("initial switch configuration is not radial")
    current = initial
    ledger = RegretLedger(alpha=1.0)
    variation = VariationLedger(network.switch_ground)
    trace: list[NrTraceRow] = []
    total_losses = 0.0
    all_radial = True
    for t in range(1, T + 1):
        p, q = perturb.loads_at(network, t, tables)
        radial = is_radial(network, current)
        all_radial = all_radial and radial
        energized = network.energized_lines(current)
        op_pf = newton_raphson_pf(network, energized, p, q, tolerance=pf_tolerance)
        losses = active_losses(op_pf, network, energized) if op_pf.converged else math.nan
        if op_pf.converged:
            total_losses += losses
        loss_val: float | None = None
        opt_val: float | None = None
        if policy == "osga" or compute_optima:
            nxt, diag = algorithm1_step(
                network, p, q, current, big_M, pf_tolerance
            )
            if diag.current_magnitudes is not None:
                f_t = wm_objective(network, diag.current_magnitudes)
                loss_val = f_t(current)
                opt_val = f_t(nxt)  # the reconfiguration *is* the round optimum
                append_variation(variation, nxt)
            ledger.record(loss_val if loss_val is not None else math.nan, opt_val)
        trace.append(
            NrTraceRow(
                t=t,
                losses_pu=losses,
                radial=radial,
                mask=current,
                pf_iterations=op_pf.iterations,
                pf_mismatch=op_pf.max_mismatch,
                loss=loss_val,
                optimum=opt_val,
            )
        )
        if policy == "osga":
            current = nxt
        else:
            current = wilson_random_feasible(network, draw)
    return NrResult(policy, trace, ledger, variation, total_losses, all_radial)


def write_nr_trace_csv(path, trace: Sequence[NrTraceRow]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(NR_TRACE_HEADER)
        for row in trace:
            w.writerow(
                [
                    row.t,
                    repr(row.losses_pu),
                    int(row.radial),
                    row.mask.hex(),
                    row.pf_iterations,
                    repr(row.pf_mismatch),
                ]
            )
