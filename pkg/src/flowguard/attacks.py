"""Controller compromises: attack types, schedules, overrides and labels."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

QUANTUM = 10.0


class AttackType(enum.IntEnum):
    """The four hack types; the integer value is the label code (0 is control)."""

    AllGreen = 1
    AllRed = 2
    FrozenPhase = 3
    ChaoticPhase = 4


CONTROL = 0


def parse_attack_type(name: str) -> AttackType:
    try:
        return AttackType[name]
    except KeyError:
        raise ValueError(f"unknown attack type {name!r}; expected one of "
                         f"{', '.join(a.name for a in AttackType)}") from None


@dataclass(frozen=True)
class AttackEvent:
    type: AttackType
    target: str
    start: float
    end: float

    def covers(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass
class ScenarioSchedule:
    events: list[AttackEvent] = field(default_factory=list)
    horizon: float = 3600.0

    def __post_init__(self):
        self.events = sorted(self.events, key=lambda e: (e.target, e.start))
        validate_schedule(self)

    def for_target(self, target: str) -> list[AttackEvent]:
        return [e for e in self.events if e.target == target]

    def event_at(self, target: str, t: float) -> AttackEvent | None:
        for e in self.events:
            if e.target == target and e.covers(t):
                return e
        return None

    def attacked_fraction(self, target: str) -> float:
        if self.horizon <= 0:
            return 0.0
        return sum(e.end - e.start for e in self.for_target(target)) / self.horizon


def _on_grid(x: float) -> bool:
    return abs(x / QUANTUM - round(x / QUANTUM)) < 1e-9


def validate_schedule(schedule: ScenarioSchedule) -> None:
    last_end: dict[str, float] = {}
    for e in schedule.events:
        if not (0 <= e.start < e.end <= schedule.horizon):
            raise ValueError(f"event {e} outside [0, {schedule.horizon}] or empty")
        if not (_on_grid(e.start) and _on_grid(e.end)):
            raise ValueError(f"event {e} is not aligned to {QUANTUM:g} s")
        if e.start < last_end.get(e.target, -1.0):
            raise ValueError(f"event {e} overlaps an earlier event on {e.target}")
        last_end[e.target] = e.end


def build_schedule(horizon: float, target: str, attack_types, mean_duration: float,
                   mean_gap: float, rng: np.random.Generator) -> ScenarioSchedule:
    """Draw alternating gap/attack segments on one target.

    Segment lengths are geometric in 10 s quanta with the given means, so
    every boundary is on the controller's update grid. The schedule starts
    with a gap.
    """
    if mean_duration < QUANTUM or mean_gap < QUANTUM:
        raise ValueError("mean_duration and mean_gap must be >= 10 s")
    types = [t if isinstance(t, AttackType) else parse_attack_type(t) for t in attack_types]
    if not types or horizon < mean_gap:
        return ScenarioSchedule([], horizon)

    p_attack = QUANTUM / mean_duration
    p_gap = QUANTUM / mean_gap
    events = []
    t = 0.0
    while True:
        t += QUANTUM * rng.geometric(p_gap)
        if t >= horizon:
            break
        length = QUANTUM * rng.geometric(p_attack)
        kind = types[int(rng.integers(len(types)))]
        end = min(t + length, horizon)
        events.append(AttackEvent(kind, target, t, end))
        t = end
    return ScenarioSchedule(events, horizon)


@dataclass(frozen=True)
class Override:
    """Attack directive installed on a controller: the state string it emits."""

    event: AttackEvent
    state: str


def apply_attack(controller, schedule: ScenarioSchedule, t: float,
                 rng: np.random.Generator | None = None):
    """Install or clear the override on ``controller`` for the tick at ``t``.

    Mutates and returns the controller. ``rng`` is only consumed by
    ChaoticPhase events and must be the controller's dedicated stream.
    """
    event = schedule.event_at(controller.node, t)
    if event is None:
        controller.override = None
        return controller

    n = len(controller.approaches)
    if event.type is AttackType.AllGreen:
        state = "G" * n
    elif event.type is AttackType.AllRed:
        state = "r" * n
    elif event.type is AttackType.FrozenPhase:
        current = controller.override
        if current is not None and current.event == event:
            state = current.state
        else:
            state = controller.program[controller.phase_index].state
    else:
        if rng is None:
            raise ValueError("ChaoticPhase needs the controller's rng stream")
        state = controller.program[int(rng.integers(len(controller.program)))].state
    controller.override = Override(event, state)
    return controller


def label_at(schedule: ScenarioSchedule, begin: float, end: float,
             target: str | None = None) -> int:
    """Label code for the detector interval ``[begin, end)``.

    The event covering ``begin`` decides; ``target`` restricts to one
    intersection (None means any target).
    """
    if begin < 0 or end > schedule.horizon + 1e-9 or end <= begin:
        raise ValueError(f"interval [{begin}, {end}) outside horizon {schedule.horizon}")
    for e in schedule.events:
        if (target is None or e.target == target) and e.covers(begin):
            return int(e.type)
    return CONTROL


def write_events_csv(schedule: ScenarioSchedule, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["type", "target", "start", "end"])
        for e in schedule.events:
            writer.writerow([e.type.name, e.target, f"{e.start:g}", f"{e.end:g}"])


def read_events_csv(path: str | Path, horizon: float) -> ScenarioSchedule:
    with open(path, newline="") as fh:
        events = [AttackEvent(parse_attack_type(r["type"]), r["target"],
                              float(r["start"]), float(r["end"]))
                  for r in csv.DictReader(fh)]
    return ScenarioSchedule(events, horizon)
