"""Bundled scenario files and the grid generator behind ``benchmark.ini``."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

SPEED = 13.89  # 50 km/h
NS_PHASE, EW_PHASE = "GrGr", "rGrG"
BUNDLED = ("cross", "benchmark")


def bundled(name: str) -> Path:
    """Path of a bundled scenario, e.g. ``bundled("benchmark")``."""
    if not name.endswith(".ini"):
        name += ".ini"
    path = Path(str(resources.files(__package__).joinpath(name)))
    if not path.exists():
        raise FileNotFoundError(f"no bundled scenario {name!r}")
    return path


def _node(r: int, c: int) -> str:
    return f"j{r}{c}"


def grid_text(size: int = 3, length: float = 200.0, base_rate: float = 0.05,
              busy_factor: float = 2.0, seed: int = 42, horizon: float = 3600.0,
              attack_types: str = "AllGreen AllRed", mean_duration: float = 120.0,
              mean_gap: float = 240.0, detect_at: str | None = None) -> str:
    """Scenario text for a ``size`` x ``size`` signalized grid.

    Every row and column carries one straight-through route per direction.
    Routes through the centre node carry ``busy_factor`` times the base
    rate, making the centre the busiest intersection and the attack target.
    Detectors sit on the centre approaches unless ``detect_at`` names other
    nodes; an empty string puts them at every signalized node.
    """
    mid = size // 2
    busy = _node(mid, mid)
    if detect_at is None:
        detect_at = busy
    nodes = [_node(r, c) for r in range(size) for c in range(size)]
    bnodes = ([f"bn{c}" for c in range(size)] + [f"bs{c}" for c in range(size)]
              + [f"bw{r}" for r in range(size)] + [f"be{r}" for r in range(size)])
    edges: list[tuple[str, str]] = []

    def link(a: str, b: str) -> str:
        edges.append((a, b))
        return f"{a}_{b}"

    routes: dict[str, list[str]] = {}
    rates: dict[str, float] = {}
    for c in range(size):
        col = [f"bn{c}"] + [_node(r, c) for r in range(size)] + [f"bs{c}"]
        for name, seq in ((f"col{c}_s", col), (f"col{c}_n", col[::-1])):
            routes[name] = [link(a, b) for a, b in zip(seq, seq[1:])]
            rates[name] = base_rate * (busy_factor if c == mid else 1.0)
    for r in range(size):
        row = [f"bw{r}"] + [_node(r, c) for c in range(size)] + [f"be{r}"]
        for name, seq in ((f"row{r}_e", row), (f"row{r}_w", row[::-1])):
            routes[name] = [link(a, b) for a, b in zip(seq, seq[1:])]
            rates[name] = base_rate * (busy_factor if r == mid else 1.0)

    lines = ["# generated by flowguard.scenarios.grid_text", "[network]",
             "nodes = " + " ".join(nodes + bnodes)]
    for a, b in edges:
        lines.append(f"edge.{a}_{b} = {a} {b} {length:g} {SPEED:g} 1")
    lines += ["", "[routes]"]
    lines += [f"{k} = {' '.join(v)}" for k, v in routes.items()]
    lines += ["", "[demand]", f"horizon = {horizon:g}"]
    lines += [f"{k} = {v:g}" for k, v in rates.items()]
    lines += ["", "[signals]", "detector_length = 100"]
    if detect_at:
        lines.append(f"detect_at = {detect_at}")
    for r in range(size):
        for c in range(size):
            n = _node(r, c)
            north = f"bn{c}" if r == 0 else _node(r - 1, c)
            east = f"be{r}" if c == size - 1 else _node(r, c + 1)
            south = f"bs{c}" if r == size - 1 else _node(r + 1, c)
            west = f"bw{r}" if c == 0 else _node(r, c - 1)
            appr = [f"{north}_{n}", f"{east}_{n}", f"{south}_{n}", f"{west}_{n}"]
            # staggered programs so neighbouring signals are not in lockstep
            green = 30 if n == busy else 20 + 10 * ((r + c) % 2)
            program = f"{NS_PHASE}:{green} {EW_PHASE}:{green}"
            if (r + 2 * c) % 3 == 1 and n != busy:
                program = f"{EW_PHASE}:{green} {NS_PHASE}:{green}"
            lines.append(f"{n}.approaches = {' '.join(appr)}")
            lines.append(f"{n}.program = {program}")
            lines.append(f"{n}.conflicts = {appr[0]}|{appr[1]} {appr[0]}|{appr[3]} "
                         f"{appr[2]}|{appr[1]} {appr[2]}|{appr[3]}")
    lines += ["", "[attacks]", f"target = {busy}", f"types = {attack_types}",
              f"mean_duration = {mean_duration:g}", f"mean_gap = {mean_gap:g}",
              "", "[seed]", f"seed = {seed}", ""]
    return "\n".join(lines)
