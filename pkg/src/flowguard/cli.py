"""Command line: ``flowguard simulate`` and ``flowguard experiment``.

Outputs are staged in a scratch directory next to ``--out`` and moved in
only when every stage succeeds, so a failed run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from .attacks import write_events_csv
from .config import ScenarioError
from .detectors import read_rows_csv, write_rows_csv
from .experiment import ExperimentConfig, StageError, run_experiment
from .models import ModelKind
from .runner import run_simulation
from .scenarios import BUNDLED, bundled
from .simcore import load_scenario

log = logging.getLogger("flowguard")


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(staging: Path, info: dict, stages: dict) -> None:
    files = {}
    for p in sorted(staging.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            files[p.relative_to(staging).as_posix()] = sha256(p)
    manifest = dict(info, version=__version__, stages=stages, files=files)
    (staging / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _publish(staging: Path, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for p in sorted(staging.iterdir()):
        dest = out / p.name
        if dest.is_dir():
            shutil.rmtree(dest)
        elif dest.exists():
            dest.unlink()
        shutil.move(str(p), dest)


def _staged(out: Path, work) -> int:
    """Run ``work(staging)`` in a scratch dir; publish on success, discard on failure."""
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        work(staging)
        _publish(staging, out)
        return 0
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def resolve_scenario(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    if name in BUNDLED:
        return bundled(name)
    raise ScenarioError(f"{name}: no such scenario file (bundled: {', '.join(BUNDLED)})")


def cmd_simulate(args) -> int:
    path = resolve_scenario(args.scenario)
    stages = {}

    def work(staging: Path):
        t0 = time.time()
        state = load_scenario(path, seed=args.seed)
        stages["load"] = {"start": t0, "end": time.time()}
        t1 = time.time()
        rows = run_simulation(state)
        stages["simulate"] = {"start": t1, "end": time.time()}
        write_rows_csv(rows, staging / "rows.csv")
        write_events_csv(state.schedule, staging / "events.csv")
        log.info("%d rows from %d detectors over %g s", len(rows),
                 len({r.detector for r in rows}), state.demand.horizon)
        write_manifest(staging, {"command": "simulate", "scenario": str(path), "seed": state.seed,
                                 "out": str(args.out), "horizon": state.demand.horizon}, stages)

    return _staged(Path(args.out), work)


def _parse_list(text: str, parse) -> tuple:
    return tuple(parse(x) for x in text.replace(",", " ").split())


def cmd_experiment(args) -> int:
    models = _parse_list(args.models, ModelKind.parse) if args.models else tuple(ModelKind)
    windows = _parse_list(args.windows, int)
    for w in windows:
        if w < 4:
            raise ValueError(f"window height {w} is too small for two 2x2 poolings")
    cfg = ExperimentConfig(models=models, windows=windows, smote=not args.no_smote,
                           three_channel=args.three_channel, seed=args.seed, jobs=args.jobs,
                           epochs=args.epochs)
    rows_path = Path(args.rows)
    stages: dict = {}

    def work(staging: Path):
        t0 = time.time()
        try:
            rows = read_rows_csv(rows_path)
        except (OSError, ValueError) as exc:
            raise StageError("load-rows", exc) from exc
        stages["load-rows"] = {"start": t0, "end": time.time()}
        run_experiment(rows, cfg, staging, stages)
        write_manifest(staging, {"command": "experiment", "rows": str(rows_path),
                                 "rows_sha256": sha256(rows_path), "seed": args.seed,
                                 "out": str(args.out), "config": cfg.as_dict()}, stages)

    return _staged(Path(args.out), work)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowguard", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"flowguard {__version__}")
    p.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write detector rows")
    s.add_argument("--scenario", required=True,
                   help=f"scenario .ini path or bundled name ({', '.join(BUNDLED)})")
    s.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="train and evaluate every model on rows.csv")
    e.add_argument("--rows", required=True, help="rows.csv from simulate")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--models", default="",
                   help="comma list of lr,svm,knn,dt,rf,mlp,cnn (default: all)")
    e.add_argument("--windows", default="9,18,36", help="CNN window heights")
    e.add_argument("--no-smote", action="store_true", help="train tabular models on raw imbalance")
    e.add_argument("--three-channel", action="store_true",
                   help="also train the CNN on raw/mean/std stacked windows")
    e.add_argument("--epochs", type=int, default=10, help="CNN training epochs")
    e.add_argument("--jobs", type=int, default=1, help="worker processes for tabular training")
    e.add_argument("--seed", type=int, default=42)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"flowguard: error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"flowguard: error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
