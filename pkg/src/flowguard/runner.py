"""Simulation loop: controllers, attacks, vehicles and detectors in lockstep."""

from __future__ import annotations

from typing import Callable

from . import attacks
from .detectors import INTERVAL, FeatureRow, LaneAreaDetector, accumulate_step, detectors_for, flush_interval
from .simcore import SimState, controller_tick, spawn_vehicles, step


def tick_controllers(state: SimState, enable_attacks: bool = True) -> None:
    t = state.t
    for node, ctl in state.controllers.items():
        if t > 0:
            controller_tick(ctl, t)
        if enable_attacks:
            attacks.apply_attack(ctl, state.schedule, t, state.stream(f"attacks:chaos:{node}"))


def run_simulation(state: SimState, detectors: list[LaneAreaDetector] | None = None,
                   on_step: Callable[[SimState], None] | None = None,
                   enable_attacks: bool = True) -> list[FeatureRow]:
    """Run ``state`` to its demand horizon and return all interval rows.

    Rows are ordered by interval, then by detector. Labels are the attack
    code active at each interval's begin.
    """
    if detectors is None:
        detectors = detectors_for(state)
    per_interval = round(INTERVAL / state.dt)
    n_steps = round(state.demand.horizon / state.dt)
    rows: list[FeatureRow] = []
    for k in range(n_steps):
        if k % per_interval == 0:
            tick_controllers(state, enable_attacks)
        spawn_vehicles(state)
        step(state)
        for det in detectors:
            accumulate_step(det, state)
        if on_step is not None:
            on_step(state)
        if (k + 1) % per_interval == 0:
            end = state.t
            begin = end - INTERVAL
            label = attacks.label_at(state.schedule, begin, end)
            for det in detectors:
                rows.append(flush_interval(det, begin, end, label, state.dt))
    return rows
