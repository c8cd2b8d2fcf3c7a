"""Lane-area detectors and their 10 s interval statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .simcore import S_JAM, SimState

INTERVAL = 10.0
FOOTPRINT = 5.0

FEATURES = (
    "sampledSeconds",
    "nVehEntered",
    "nVehLeft",
    "nVehSeen",
    "meanSpeed",
    "meanTimeLoss",
    "meanOccupancy",
    "maxOccupancy",
    "meanMaxJamLengthInVehicles",
    "meanMaxJamLengthInMeters",
    "maxJamLengthInVehicles",
    "maxJamLengthInMeters",
    "jamLengthInVehiclesSum",
    "jamLengthInMetersSum",
    "meanHaltingDuration",
    "maxHaltingDuration",
    "haltingDurationSum",
    "meanIntervalHaltingDuration",
    "maxIntervalHaltingDuration",
    "intervalHaltingDurationSum",
    "startedHalts",
    "meanVehicleNumber",
    "maxVehicleNumber",
)
META = ("detector", "begin", "end", "target")

# (mean, max) pairs that must satisfy max >= mean on every row
PAIRED = (
    ("meanOccupancy", "maxOccupancy"),
    ("meanMaxJamLengthInVehicles", "maxJamLengthInVehicles"),
    ("meanMaxJamLengthInMeters", "maxJamLengthInMeters"),
    ("meanHaltingDuration", "maxHaltingDuration"),
    ("meanIntervalHaltingDuration", "maxIntervalHaltingDuration"),
    ("meanVehicleNumber", "maxVehicleNumber"),
)


@dataclass(frozen=True)
class FeatureRow:
    detector: str
    begin: float
    end: float
    label: int
    features: tuple

    def as_dict(self) -> dict:
        return dict(zip(FEATURES, self.features))

    def __getitem__(self, name: str) -> float:
        return self.features[FEATURES.index(name)]


@dataclass
class _HaltLedger:
    closed: float = 0.0     # completed halts, full durations
    current: float = 0.0    # running halt, duration since onset
    onset: float | None = None
    in_interval: float = 0.0
    time_loss: float = 0.0

    def total(self) -> float:
        return self.closed + self.current


@dataclass
class IntervalAccumulator:
    steps: int = 0
    vehicle_seconds: float = 0.0
    speed_seconds: float = 0.0
    occupancy_sum: float = 0.0
    occupancy_max: float = 0.0
    jam_veh_sum: float = 0.0
    jam_veh_max: float = 0.0
    jam_m_sum: float = 0.0
    jam_m_max: float = 0.0
    count_max: int = 0
    entered: int = 0
    left: int = 0
    started_halts: int = 0
    ledgers: dict = field(default_factory=dict)


@dataclass
class LaneAreaDetector:
    id: str
    edge: str
    start: float
    end: float
    acc: IntervalAccumulator = field(default_factory=IntervalAccumulator)
    on: frozenset = frozenset()

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"detector {self.id}: need 0 <= start < end")

    @property
    def length(self) -> float:
        return self.end - self.start


def detectors_for(state: SimState) -> list[LaneAreaDetector]:
    """One detector per approach of each (selected) signalized intersection."""
    nodes = state.detect_at or list(state.controllers)
    out = []
    for node in nodes:
        for eid in state.controllers[node].approaches:
            edge = state.network.edges[eid]
            out.append(LaneAreaDetector(f"{node}:{eid}", eid,
                                        max(0.0, edge.length - state.detector_length), edge.length))
    return out


def accumulate_step(det: LaneAreaDetector, state: SimState) -> LaneAreaDetector:
    """Fold the post-step vehicle states on ``det``'s region into its accumulator."""
    acc = det.acc
    dt = state.dt
    acc.steps += 1
    on_ids = []
    occupied = 0.0
    jam = 0
    jam_open = True
    for v in state.queues[det.edge]:  # front (stop line) first
        if v.pos > det.end:
            continue
        if v.pos < det.start:
            break
        on_ids.append(v.id)
        occupied += max(0.0, min(v.pos, det.end) - max(v.pos - FOOTPRINT, det.start))
        acc.speed_seconds += v.speed * dt
        if jam_open and v.halting:
            jam += 1
        else:
            jam_open = False
        led = acc.ledgers.get(v.id)
        if led is None:
            led = acc.ledgers[v.id] = _HaltLedger()
        led.time_loss += v.step_time_loss
        if v.halting:
            if led.onset != v.halt_onset:
                led.closed += led.current
                led.onset = v.halt_onset
                if v.halt_time <= dt + 1e-9:
                    acc.started_halts += 1
            led.current = v.halt_time
            led.in_interval += dt
    now_on = frozenset(on_ids)
    acc.entered += len(now_on - det.on)
    acc.left += len(det.on - now_on)
    det.on = now_on

    n = len(on_ids)
    acc.vehicle_seconds += n * dt
    occ = 100.0 * occupied / det.length
    acc.occupancy_sum += occ
    acc.occupancy_max = max(acc.occupancy_max, occ)
    acc.jam_veh_sum += jam
    acc.jam_veh_max = max(acc.jam_veh_max, jam)
    acc.jam_m_sum += jam * S_JAM
    acc.jam_m_max = max(acc.jam_m_max, jam * S_JAM)
    acc.count_max = max(acc.count_max, n)
    return det


def flush_interval(det: LaneAreaDetector, begin: float, end: float, label: int,
                   dt: float = 0.5) -> FeatureRow:
    """Emit the interval's FeatureRow and reset the accumulator."""
    if abs(end - begin - INTERVAL) > 1e-9 or abs(begin / INTERVAL - round(begin / INTERVAL)) > 1e-9:
        raise ValueError(f"interval [{begin}, {end}) is not on the {INTERVAL:g} s grid")
    acc = det.acc
    expected = round(INTERVAL / dt)
    if acc.steps != expected:
        raise ValueError(f"detector {det.id}: {acc.steps} steps accumulated, expected {expected}")

    ledgers = list(acc.ledgers.values())
    seen = len(ledgers)
    halts = [led.total() for led in ledgers]
    in_iv = [led.in_interval for led in ledgers]
    sampled = acc.vehicle_seconds
    steps = acc.steps

    def mean(xs):
        return sum(xs) / seen if seen else 0.0

    values = (
        sampled,
        float(acc.entered),
        float(acc.left),
        float(seen),
        acc.speed_seconds / sampled if sampled > 0 else 0.0,
        mean([led.time_loss for led in ledgers]),
        acc.occupancy_sum / steps,
        acc.occupancy_max,
        acc.jam_veh_sum / steps,
        acc.jam_m_sum / steps,
        acc.jam_veh_max,
        acc.jam_m_max,
        acc.jam_veh_sum,
        acc.jam_m_sum,
        mean(halts),
        max(halts, default=0.0),
        sum(halts),
        mean(in_iv),
        max(in_iv, default=0.0),
        sum(in_iv),
        float(acc.started_halts),
        sampled / INTERVAL,
        float(acc.count_max),
    )
    det.acc = IntervalAccumulator()
    return FeatureRow(det.id, begin, end, int(label), tuple(float(x) for x in values))


def format_row(row: FeatureRow) -> list[str]:
    return ([row.detector, f"{row.begin:g}", f"{row.end:g}", str(row.label)]
            + [f"{x:.6f}" for x in row.features])


def write_rows_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(META) + list(FEATURES))
        for row in rows:
            writer.writerow(format_row(row))


def read_rows_csv(path: str | Path) -> list[FeatureRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        expected = list(META) + list(FEATURES)
        if header != expected:
            for i, (got, want) in enumerate(zip(header, expected)):
                if got != want:
                    raise ValueError(f"{path}: column {i} is {got!r}, expected {want!r}")
            raise ValueError(f"{path}: expected {len(expected)} columns, got {len(header)}")
        return [FeatureRow(r[0], float(r[1]), float(r[2]), int(r[3]),
                           tuple(float(x) for x in r[4:])) for r in reader]
