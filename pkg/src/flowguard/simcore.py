"""Discrete-time spatial-queue simulation of a signalized road network.

Vehicles travel single file along each edge at the edge speed limit,
packed no closer than ``S_JAM`` behind their leader. A vehicle leaves an
edge only through a Green signal, at most one per saturation headway per
approach (conflicting Greens share one headway clock at the node), and
only when the downstream entrance has room. Yellow counts as Red.

Controllers re-evaluate their phase every ``UPDATE_PERIOD`` seconds.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import attacks
from .config import ScenarioConfig, ScenarioError, parse_scenario, read_scenario

DT = 0.5
S_JAM = 7.5
H_SAT = 2.0
V_HALT = 0.1
UPDATE_PERIOD = 10.0
_EPS = 1e-9


def rng_stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for one named consumer (a route, a controller...)."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(label.encode())]))


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str
    length: float
    speed: float
    lanes: int = 1


@dataclass
class RoadNetwork:
    nodes: list[str]
    edges: dict[str, Edge]
    routes: dict[str, list[str]]

    def __post_init__(self):
        self.validate()
        self.incoming: dict[str, list[str]] = {n: [] for n in self.nodes}
        for e in self.edges.values():
            self.incoming[e.dst].append(e.id)

    def validate(self) -> None:
        if len(set(self.nodes)) != len(self.nodes):
            raise ScenarioError("duplicate node ids")
        known = set(self.nodes)
        bad = sorted({n for e in self.edges.values() for n in (e.src, e.dst) if n not in known})
        if bad:
            raise ScenarioError(f"edges reference unknown nodes: {', '.join(bad)}")
        for e in self.edges.values():
            if e.length <= 0 or e.speed <= 0 or e.lanes < 1:
                raise ScenarioError(f"edge {e.id}: length and speed must be > 0, lanes >= 1")
        missing = sorted({eid for r in self.routes.values() for eid in r if eid not in self.edges})
        if missing:
            raise ScenarioError(f"routes reference unknown edges: {', '.join(missing)}")
        for rid, r in self.routes.items():
            if not r:
                raise ScenarioError(f"route {rid} is empty")
            for a, b in zip(r, r[1:]):
                if self.edges[a].dst != self.edges[b].src:
                    raise ScenarioError(f"route {rid}: edges {a} and {b} do not share a node")


@dataclass(frozen=True)
class Phase:
    state: str  # one of G/y/r per approach
    duration: float


@dataclass
class SignalController:
    node: str
    approaches: list[str]
    program: list[Phase]
    conflicts: frozenset = frozenset()
    phase_index: int = 0
    time_in_phase: float = 0.0
    update_period: float = UPDATE_PERIOD
    override: attacks.Override | None = None

    def emitted(self) -> str:
        if self.override is not None:
            return self.override.state
        return self.program[self.phase_index].state

    def has_conflicting_green(self, state: str | None = None) -> bool:
        state = self.emitted() if state is None else state
        for a, b in self.conflicts:
            if state[self.approaches.index(a)] == "G" and state[self.approaches.index(b)] == "G":
                return True
        return False


def controller_tick(controller: SignalController, t: float) -> SignalController:
    """Advance the phase clock by one update period.

    The clock runs under an override too, so the program resumes on
    schedule once an attack ends.
    """
    if abs(t / controller.update_period - round(t / controller.update_period)) > 1e-9:
        raise ValueError(f"controller tick at t={t} is off the {controller.update_period:g} s grid")
    controller.time_in_phase += controller.update_period
    if controller.time_in_phase >= controller.program[controller.phase_index].duration - _EPS:
        controller.phase_index = (controller.phase_index + 1) % len(controller.program)
        controller.time_in_phase = 0.0
    return controller


@dataclass
class Vehicle:
    id: int
    route: str
    edge_index: int = 0
    pos: float = 0.0
    speed: float = 0.0
    halting: bool = False
    halt_onset: float = -1.0
    halt_time: float = 0.0
    time_loss: float = 0.0
    step_time_loss: float = 0.0
    moved_at: int = -1


@dataclass
class DemandProfile:
    rates: dict[str, float]
    horizon: float = 3600.0

    def __post_init__(self):
        if any(r < 0 for r in self.rates.values()):
            raise ScenarioError("arrival rates must be >= 0")
        if self.horizon < 0 or abs(self.horizon / 10 - round(self.horizon / 10)) > 1e-9:
            raise ScenarioError("horizon must be a non-negative multiple of 10 s")


@dataclass
class SimState:
    network: RoadNetwork
    controllers: dict[str, SignalController]
    demand: DemandProfile
    schedule: attacks.ScenarioSchedule
    seed: int = 0
    t: float = 0.0
    dt: float = DT
    step_count: int = 0
    queues: dict[str, list[Vehicle]] = field(default_factory=dict)
    backlog: dict[str, int] = field(default_factory=dict)
    drawn: int = 0
    despawned: int = 0
    next_id: int = 0
    detector_length: float = 100.0
    detect_at: list[str] | None = None
    streams: dict[str, np.random.Generator] = field(default_factory=dict)
    last_departure: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for eid in self.network.edges:
            self.queues.setdefault(eid, [])
        for rid in self.network.routes:
            self.backlog.setdefault(rid, 0)

    @property
    def vehicles(self) -> list[Vehicle]:
        return [v for q in self.queues.values() for v in q]

    @property
    def active(self) -> int:
        return sum(len(q) for q in self.queues.values())

    @property
    def pending(self) -> int:
        return sum(self.backlog.values())

    def stream(self, label: str) -> np.random.Generator:
        gen = self.streams.get(label)
        if gen is None:
            gen = self.streams[label] = rng_stream(self.seed, label)
        return gen

    def signal_for(self, edge: Edge) -> str:
        ctl = self.controllers.get(edge.dst)
        if ctl is None:
            return "G"
        return ctl.emitted()[ctl.approaches.index(edge.id)]


def _build_controller(spec, network: RoadNetwork) -> SignalController:
    if spec.node not in network.nodes:
        raise ScenarioError(f"[signals] controller references unknown intersection {spec.node}")
    if not spec.program:
        raise ScenarioError(f"[signals] {spec.node}.program is missing")
    unknown = [a for a in spec.approaches if a not in network.edges]
    if unknown:
        raise ScenarioError(f"[signals] {spec.node}.approaches: unknown edges {', '.join(unknown)}")
    if sorted(spec.approaches) != sorted(network.incoming[spec.node]):
        raise ScenarioError(f"[signals] {spec.node}.approaches must list exactly the incoming edges "
                            f"{' '.join(network.incoming[spec.node])}")
    bad = sorted({x for pair in spec.conflicts for x in pair if x not in spec.approaches})
    if bad:
        raise ScenarioError(f"[signals] {spec.node}.conflicts: unknown approaches {', '.join(bad)}")
    program = []
    for state, duration in spec.program:
        if len(state) != len(spec.approaches) or set(state) - set("Gyr"):
            raise ScenarioError(f"[signals] {spec.node}: phase {state!r} must have one of G/y/r "
                                f"per approach ({len(spec.approaches)})")
        if duration < UPDATE_PERIOD or abs(duration / 10 - round(duration / 10)) > 1e-9:
            raise ScenarioError(f"[signals] {spec.node}: phase duration {duration:g} must be a multiple of 10 s")
        program.append(Phase(state, duration))
    ctl = SignalController(spec.node, list(spec.approaches), program,
                           frozenset(tuple(p) for p in spec.conflicts))
    for phase in program:
        if ctl.has_conflicting_green(phase.state):
            raise ScenarioError(f"[signals] {spec.node}: phase {phase.state!r} gives Green to conflicting approaches")
    return ctl


def build_state(cfg: ScenarioConfig, seed: int | None = None) -> SimState:
    seed = cfg.seed if seed is None else seed
    edges = {}
    for e in cfg.edges:
        if e.id in edges:
            raise ScenarioError(f"[network] duplicate edge id {e.id}")
        edges[e.id] = Edge(e.id, e.src, e.dst, e.length, e.speed, e.lanes)
    network = RoadNetwork(list(cfg.nodes), edges, dict(cfg.routes))

    unknown = sorted(set(cfg.rates) - set(network.routes))
    if unknown:
        raise ScenarioError(f"[demand] unknown routes: {', '.join(unknown)}")
    demand = DemandProfile({r: cfg.rates.get(r, 0.0) for r in network.routes}, cfg.horizon)

    controllers = {}
    for spec in cfg.controllers:
        controllers[spec.node] = _build_controller(spec, network)
    if cfg.detect_at:
        bad = [n for n in cfg.detect_at if n not in controllers]
        if bad:
            raise ScenarioError(f"[signals] detect_at: not signalized: {', '.join(bad)}")

    spec = cfg.attacks
    events = []
    for kind, target, start, end in spec.events:
        if target not in controllers:
            raise ScenarioError(f"[attacks] events: {target} is not a signalized intersection")
        try:
            events.append(attacks.AttackEvent(attacks.parse_attack_type(kind), target, start, end))
        except ValueError as exc:
            raise ScenarioError(f"[attacks] events: {exc}") from None
    if spec.target is not None:
        if spec.target not in controllers:
            raise ScenarioError(f"[attacks] target {spec.target} is not a signalized intersection")
        try:
            drawn = attacks.build_schedule(cfg.horizon, spec.target, spec.types, spec.mean_duration,
                                           spec.mean_gap, rng_stream(seed, "attacks:schedule"))
        except ValueError as exc:
            raise ScenarioError(f"[attacks] {exc}") from None
        events.extend(drawn.events)
    try:
        schedule = attacks.ScenarioSchedule(events, cfg.horizon)
    except ValueError as exc:
        raise ScenarioError(f"[attacks] {exc}") from None

    return SimState(network, controllers, demand, schedule, seed=seed,
                    detector_length=cfg.detector_length, detect_at=cfg.detect_at)


def load_scenario(config: str | Path | ScenarioConfig, seed: int | None = None) -> SimState:
    """Build the t=0 state from a config path, config text or parsed config."""
    if isinstance(config, ScenarioConfig):
        cfg = config
    elif isinstance(config, Path) or (isinstance(config, str) and "\n" not in config
                                      and Path(config).exists()):
        cfg = read_scenario(config)
    else:
        cfg = parse_scenario(config)
    return build_state(cfg, seed)


def _entrance_free(queue: list[Vehicle]) -> bool:
    return not queue or queue[-1].pos >= S_JAM - _EPS


def insert_vehicle(state: SimState, route: str) -> Vehicle | None:
    """Place one vehicle at the entrance of ``route``; None if blocked."""
    first = state.network.edges[state.network.routes[route][0]]
    queue = state.queues[first.id]
    if not _entrance_free(queue):
        return None
    v = Vehicle(state.next_id, route, 0, 0.0, first.speed)
    state.next_id += 1
    queue.append(v)
    return v


def spawn_vehicles(state: SimState, demand: DemandProfile | None = None) -> SimState:
    """Poisson arrivals per route; blocked insertions wait in the route backlog."""
    demand = state.demand if demand is None else demand
    for rid in state.network.routes:
        rate = demand.rates.get(rid, 0.0)
        if rate > 0:
            k = int(state.stream(f"spawn:{rid}").poisson(rate * state.dt))
            state.backlog[rid] += k
            state.drawn += k
        if state.backlog[rid] > 0 and insert_vehicle(state, rid) is not None:
            state.backlog[rid] -= 1
    return state


def _headway_key(state: SimState, edge: Edge) -> str:
    ctl = state.controllers.get(edge.dst)
    if ctl is not None and ctl.has_conflicting_green():
        return edge.dst
    return edge.id


def step(state: SimState) -> SimState:
    """Advance every vehicle by one ``dt`` and the clock with it."""
    net = state.network
    dt = state.dt
    now = state.t + dt
    tick = state.step_count
    for eid, edge in net.edges.items():
        queue = state.queues[eid]
        if not queue:
            continue
        leader_pos = None
        keep = []
        for v in queue:
            if v.moved_at == tick:
                keep.append(v)
                leader_pos = v.pos
                continue
            reach = v.pos + edge.speed * dt
            crossed = False
            if leader_pos is not None:
                new_pos = min(reach, max(leader_pos - S_JAM, v.pos))
            elif reach >= edge.length - _EPS:
                crossed = _try_leave(state, v, edge, reach - edge.length, now)
                new_pos = edge.length
            else:
                new_pos = reach
            if crossed:
                continue
            _update_kinematics(v, new_pos - v.pos, edge.speed, dt, state.t)
            v.pos = new_pos
            v.moved_at = tick
            keep.append(v)
            leader_pos = v.pos
        state.queues[eid] = keep
    state.t = now
    state.step_count += 1
    return state


def _update_kinematics(v: Vehicle, displacement: float, vmax: float, dt: float, t: float) -> None:
    v.speed = min(displacement / dt, vmax)
    v.step_time_loss = dt * (1.0 - v.speed / vmax)
    v.time_loss += v.step_time_loss
    if v.speed < V_HALT:
        if not v.halting:
            v.halting = True
            v.halt_onset = t
            v.halt_time = 0.0
        v.halt_time += dt
    else:
        v.halting = False
        v.halt_time = 0.0


def _try_leave(state: SimState, v: Vehicle, edge: Edge, overflow: float, now: float) -> bool:
    if state.signal_for(edge) != "G":
        return False
    controlled = edge.dst in state.controllers
    if controlled:
        key = _headway_key(state, edge)
        last = state.last_departure.get(key)
        if last is not None and now - last < H_SAT / edge.lanes - _EPS:
            return False
        if key != edge.id and not _merge_turn(state, edge):
            return False
    route = state.network.routes[v.route]
    travelled = edge.length - v.pos
    if v.edge_index + 1 < len(route):
        nxt = state.network.edges[route[v.edge_index + 1]]
        queue = state.queues[nxt.id]
        if not _entrance_free(queue):
            return False
        room = queue[-1].pos - S_JAM if queue else nxt.length
        new_pos = max(0.0, min(overflow, room))
        _update_kinematics(v, travelled + new_pos, edge.speed, state.dt, state.t)
        v.edge_index += 1
        v.pos = new_pos
        v.moved_at = state.step_count
        queue.append(v)
    else:
        _update_kinematics(v, travelled + overflow, edge.speed, state.dt, state.t)
        state.despawned += 1
    if controlled:
        state.last_departure[key] = now
        state.last_departure[edge.id] = now
    return True


def _merge_turn(state: SimState, edge: Edge) -> bool:
    """Round-robin among Green approaches sharing one headway clock.

    The approach whose last departure is oldest goes first; ties fall to
    approach order.
    """
    ctl = state.controllers[edge.dst]
    state_str = ctl.emitted()
    mine = state.last_departure.get(edge.id, float("-inf"))
    for i, other in enumerate(ctl.approaches):
        if other == edge.id or state_str[i] != "G":
            continue
        queue = state.queues[other]
        if not queue or queue[0].pos < state.network.edges[other].length - _EPS:
            continue
        head = queue[0]
        route = state.network.routes[head.route]
        if (head.edge_index + 1 < len(route)
                and not _entrance_free(state.queues[route[head.edge_index + 1]])):
            continue
        theirs = state.last_departure.get(other, float("-inf"))
        if theirs < mine or (theirs == mine and i < ctl.approaches.index(edge.id)):
            return False
    return True
