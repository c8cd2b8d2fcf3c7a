"""Scenario config files.

A scenario is an INI-style text file with the sections ``[network]``,
``[routes]``, ``[demand]``, ``[signals]``, ``[attacks]`` and ``[seed]``.
Unknown sections or keys are rejected. Keys::

    [network]
    nodes = n1 n2 ...                      # all node ids
    edge.<id> = <from> <to> <length_m> <speed_mps> [<lanes>]

    [routes]
    <route-id> = <edge-id> <edge-id> ...

    [demand]
    horizon = 3600                         # seconds, multiple of 10
    <route-id> = <rate veh/s>

    [signals]
    detector_length = 100                  # metres upstream of each stop line
    detect_at = n1 n2                      # default: every signalized node
    <node>.approaches = e1 e2 ...          # order of the state letters
    <node>.program = GrGr:30 rGrG:30       # state:duration per phase
    <node>.conflicts = e1|e2 e1|e4 ...     # mutually conflicting approaches

    [attacks]
    target = <node>                        # enables the random schedule
    types = AllGreen AllRed
    mean_duration = 120
    mean_gap = 240
    events = AllRed n1 100 200; AllGreen n1 300 400

    [seed]
    seed = 42
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario configs."""


SECTIONS = ("network", "routes", "demand", "signals", "attacks", "seed")
_ATTACK_KEYS = {"target", "types", "mean_duration", "mean_gap", "events"}
_NODE_KEYS = {"approaches", "program", "conflicts"}


@dataclass
class EdgeSpec:
    id: str
    src: str
    dst: str
    length: float
    speed: float
    lanes: int = 1


@dataclass
class ControllerSpec:
    node: str
    approaches: list[str]
    program: list[tuple[str, float]]
    conflicts: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class AttackSpec:
    target: str | None = None
    types: list[str] = field(default_factory=list)
    mean_duration: float = 120.0
    mean_gap: float = 240.0
    events: list[tuple[str, str, float, float]] = field(default_factory=list)


@dataclass
class ScenarioConfig:
    nodes: list[str]
    edges: list[EdgeSpec]
    routes: dict[str, list[str]]
    rates: dict[str, float]
    horizon: float
    controllers: list[ControllerSpec]
    detector_length: float = 100.0
    detect_at: list[str] | None = None
    attacks: AttackSpec = field(default_factory=AttackSpec)
    seed: int = 0
    source: str = "<string>"


def _float(section: str, key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: expected a number, got {text!r}") from None


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse scenario text into a :class:`ScenarioConfig` (no cross-checks)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str  # keep key case: edge and node ids are case sensitive
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: {exc}") from None

    for name in cp.sections():
        if name not in SECTIONS:
            raise ScenarioError(f"{source}: unknown section [{name}]")
    for name in ("network", "routes", "demand"):
        if not cp.has_section(name):
            raise ScenarioError(f"{source}: missing section [{name}]")

    net = cp["network"]
    nodes: list[str] = []
    edges: list[EdgeSpec] = []
    for key, value in net.items():
        if key == "nodes":
            nodes = value.split()
        elif key.startswith("edge."):
            parts = value.split()
            if len(parts) not in (4, 5):
                raise ScenarioError(
                    f"[network] {key}: expected '<from> <to> <length> <speed> [lanes]'")
            lanes = parts[4] if len(parts) == 5 else "1"
            if not lanes.isdigit():
                raise ScenarioError(f"[network] {key}: lane count must be an integer")
            edges.append(EdgeSpec(
                key[len("edge."):], parts[0], parts[1],
                _float("network", key, parts[2]), _float("network", key, parts[3]),
                int(lanes)))
        else:
            raise ScenarioError(f"[network] unknown key {key!r}")

    routes = {key: value.split() for key, value in cp["routes"].items()}

    rates: dict[str, float] = {}
    horizon = 3600.0
    for key, value in cp["demand"].items():
        if key == "horizon":
            horizon = _float("demand", key, value)
        else:
            rates[key] = _float("demand", key, value)

    controllers: dict[str, ControllerSpec] = {}
    detector_length = 100.0
    detect_at = None
    if cp.has_section("signals"):
        for key, value in cp["signals"].items():
            if key == "detector_length":
                detector_length = _float("signals", key, value)
                continue
            if key == "detect_at":
                detect_at = value.split()
                continue
            node, _, attr = key.rpartition(".")
            if not node or attr not in _NODE_KEYS:
                raise ScenarioError(f"[signals] unknown key {key!r}")
            spec = controllers.setdefault(node, ControllerSpec(node, [], []))
            if attr == "approaches":
                spec.approaches = value.split()
            elif attr == "program":
                program = []
                for token in value.split():
                    state, sep, dur = token.partition(":")
                    if not sep:
                        raise ScenarioError(f"[signals] {key}: phase {token!r} needs 'state:duration'")
                    program.append((state, _float("signals", key, dur)))
                spec.program = program
            else:
                pairs = []
                for token in value.split():
                    a, sep, b = token.partition("|")
                    if not sep:
                        raise ScenarioError(f"[signals] {key}: conflict {token!r} needs 'a|b'")
                    pairs.append((a, b))
                spec.conflicts = pairs

    attacks = AttackSpec()
    if cp.has_section("attacks"):
        for key, value in cp["attacks"].items():
            if key not in _ATTACK_KEYS:
                raise ScenarioError(f"[attacks] unknown key {key!r}")
            if key == "target":
                attacks.target = value.strip()
            elif key == "types":
                attacks.types = value.split()
            elif key == "mean_duration":
                attacks.mean_duration = _float("attacks", key, value)
            elif key == "mean_gap":
                attacks.mean_gap = _float("attacks", key, value)
            else:
                for chunk in value.split(";"):
                    parts = chunk.split()
                    if not parts:
                        continue
                    if len(parts) != 4:
                        raise ScenarioError(
                            f"[attacks] events: expected '<type> <node> <start> <end>', got {chunk.strip()!r}")
                    attacks.events.append((parts[0], parts[1],
                                           _float("attacks", key, parts[2]),
                                           _float("attacks", key, parts[3])))

    seed = 0
    if cp.has_section("seed"):
        for key, value in cp["seed"].items():
            if key != "seed":
                raise ScenarioError(f"[seed] unknown key {key!r}")
            try:
                seed = int(value)
            except ValueError:
                raise ScenarioError(f"[seed] seed: expected an integer, got {value!r}") from None

    return ScenarioConfig(
        nodes=nodes, edges=edges, routes=routes, rates=rates, horizon=horizon,
        controllers=list(controllers.values()), detector_length=detector_length,
        detect_at=detect_at, attacks=attacks, seed=seed, source=source)


def read_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        return parse_scenario(path.read_text(), source=str(path))
    except ScenarioError as exc:
        if str(exc).startswith(str(path)):
            raise
        raise ScenarioError(f"{path}: {exc}") from None
