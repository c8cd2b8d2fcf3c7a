"""The full comparison: dataset, SMOTE, six tabular models, CNN windows, reports.

Every stage writes into one output directory. :func:`run_experiment`
returns the in-memory results as well so tests can inspect them without
re-reading files.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import datakit as dk
from .detectors import FEATURES
from .evalx import (
    ConfusionMatrix, MetricsReport, OcclusionReport, confusion, metrics, occlusion_sensitivity,
    weighted_metrics, write_confusion_csv, write_occlusion_csv,
)
from .models import (
    DISPLAY, TABULAR, ModelKind, TrainedModel, fit_cnn, fit_model, predict, three_channel_augment,
)
from .models import checkpoint
from .models.nn import CnnConfig, TrainConfig
from .pca import pca_project
from .smote import balance

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ExperimentConfig:
    models: tuple = tuple(ModelKind)
    windows: tuple = dk.WINDOW_SIZES
    smote: bool = True
    smote_k: int = 5
    three_channel: bool = False
    train_fraction: float = 0.8
    seed: int = 0
    jobs: int = 1
    epochs: int = 10

    def as_dict(self) -> dict:
        return {"models": [m.value for m in self.models], "windows": list(self.windows),
                "smote": self.smote, "smote_k": self.smote_k, "three_channel": self.three_channel,
                "train_fraction": self.train_fraction, "seed": self.seed, "epochs": self.epochs}


@dataclass
class ModelResult:
    name: str                 # row label in the summary
    kind: ModelKind
    window: int | None
    report: MetricsReport
    weighted: MetricsReport
    supports: dict
    cm: ConfusionMatrix
    occlusion: OcclusionReport | None
    model: TrainedModel
    n_test: int

    def summary_row(self) -> list[str]:
        r = self.report
        return [self.name, "" if self.window is None else str(self.window),
                f"{r.accuracy:.4f}", f"{r.precision:.4f}", f"{r.recall:.4f}", f"{r.f1:.4f}"]


@dataclass
class ExperimentResult:
    results: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    pca: dict = field(default_factory=dict)

    def by_name(self) -> dict:
        return {r.name: r for r in self.results}

    def accuracy(self, kind: ModelKind, window: int | None = None, channels: int = 1) -> float:
        for r in self.results:
            if r.kind is kind and r.window == window and (
                    window is None or r.model.hyper["cnn"]["channels"] == channels):
                return r.report.accuracy
        raise KeyError((kind, window, channels))


class _Stage:
    """Context manager naming the stage in any error it raises."""

    def __init__(self, name: str, timings: dict | None):
        self.name = name
        self.timings = timings

    def __enter__(self):
        log.info("stage %s", self.name)
        self._t = time.time()
        return self

    def __exit__(self, exc_type, exc, tb):
        if self.timings is not None:
            self.timings[self.name] = {"start": self._t, "end": time.time()}
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _fit_tabular(args):
    kind, X, y, seed = args
    return fit_model(kind, (X, y), seed=seed)


def _evaluate(name, kind, window, model, X_test, y_test, positive, pos_name):
    pred = predict(model, X_test)
    cm = confusion(pred.labels, y_test, positive, pos_name)
    weighted, supports = weighted_metrics(pred.labels, y_test)
    return ModelResult(name, kind, window, metrics(cm), weighted, supports, cm, None, model,
                       len(y_test))


def _scale_windows(ws: dk.WindowSet, params: dk.ScalerParams) -> dk.WindowSet:
    X = dk.transform(params, ws.X.reshape(-1, ws.X.shape[-1])).reshape(ws.X.shape)
    return dk.WindowSet(X, ws.y, ws.groups, ws.starts)


def run_experiment(rows, cfg: ExperimentConfig, out: str | Path | None = None,
                   timings: dict | None = None) -> ExperimentResult:
    """Run the comparison on detector rows; write artefacts into ``out`` if given."""
    out = Path(out) if out is not None else None
    if out is not None:
        (out / "models").mkdir(parents=True, exist_ok=True)
    res = ExperimentResult()
    split_spec = dk.SplitSpec(cfg.train_fraction, cfg.seed, True)
    tabular = [k for k in cfg.models if k in TABULAR]
    want_cnn = ModelKind.CNN2D in cfg.models and cfg.windows

    with _Stage("dataset", timings):
        ds = dk.build_dataset(rows)
        train, test = dk.split(ds, split_spec)
        scaler = dk.fit_scale(train)
        train_s = train.with_X(dk.transform(scaler, train.X))
        test_s = test.with_X(dk.transform(scaler, test.X))
        res.data = {"rows": len(ds), "hacked": int(ds.y.sum()), "normal": int((ds.y == 0).sum()),
                    "train": len(train), "test": len(test),
                    "detectors": sorted(set(ds.groups.tolist()))}
        if out is not None:
            dk.write_scaler(scaler, out / "scaler.json")
            dk.write_dataset_csv(ds.with_X(dk.transform(scaler, ds.X)), out / "dataset.csv")

    with _Stage("pca", timings):
        proj = pca_project(dk.transform(scaler, ds.X))
        res.pca = {"ratios": proj.ratios.tolist(), "explained": proj.explained,
                   "components": proj.components.tolist()}
        if out is not None:
            with open(out / "pca.csv", "w") as fh:
                fh.write("pc1,pc2,label\n")
                for (a, b), lab in zip(proj.projected, ds.y):
                    fh.write(f"{a:.6f},{b:.6f},{dk.HACKED if lab else dk.NORMAL}\n")

    if tabular:
        with _Stage("smote", timings):
            fit_set = train_s
            if cfg.smote:
                fit_set, sm = balance(train_s, cfg.smote_k, cfg.seed)
                res.data["smote_synthetic"] = len(sm.synthetic)
            res.data["fit_rows"] = len(fit_set)

        with _Stage("train-tabular", timings):
            jobs = [(k, fit_set.X, fit_set.y, cfg.seed) for k in tabular]
            if cfg.jobs > 1 and len(jobs) > 1:
                with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                    fitted = list(pool.map(_fit_tabular, jobs))
            else:
                fitted = [_fit_tabular(j) for j in jobs]

        with _Stage("evaluate-tabular", timings):
            means = train_s.X.mean(axis=0)
            for kind, model in zip(tabular, fitted):
                r = _evaluate(DISPLAY[kind], kind, None, model, test_s.X, test_s.y, 1, "hacked")
                r.occlusion = occlusion_sensitivity(model, test_s, means)
                res.results.append(r)
                log.info("%-20s accuracy %.4f", r.name, r.report.accuracy)
                if out is not None:
                    checkpoint.save(model, out / "models" / f"{kind.value}.ckpt")

    if want_cnn:
        if out is not None:
            (out / "windows").mkdir(exist_ok=True)
        for W in cfg.windows:
            with _Stage(f"cnn-w{W}", timings):
                ws = dk.windows_from_dataset(ds, W)
                wtr, wte = dk.split(ws, split_spec)
                wscale = dk.fit_scale(wtr.X.reshape(-1, ws.X.shape[-1]))
                wtr, wte = _scale_windows(wtr, wscale), _scale_windows(wte, wscale)
                if out is not None:
                    dk.write_windows(_scale_windows(ws, wscale), out / "windows" / f"{W}x{len(FEATURES)}.bin")
                means = wtr.X[:, 0].reshape(-1, wtr.X.shape[-1]).mean(axis=0)
                variants = [(1, wtr, wte)]
                if cfg.three_channel:
                    ref = wtr.X[wtr.y == 1, 0].reshape(-1, wtr.X.shape[-1])
                    variants.append((3, three_channel_augment(wtr, ref), three_channel_augment(wte, ref)))
                for channels, a, b in variants:
                    tc = TrainConfig(epochs=cfg.epochs, seed=cfg.seed)
                    model = fit_cnn(CnnConfig(height=W, channels=channels), a, tc)
                    name = f"{DISPLAY[ModelKind.CNN2D]} {W}x23" + (" 3ch" if channels == 3 else "")
                    r = _evaluate(name, ModelKind.CNN2D, W, model, b.X, b.y, 0, "abnormal")
                    r.occlusion = occlusion_sensitivity(model, b, means)
                    res.results.append(r)
                    log.info("%-20s accuracy %.4f (%d test windows)", name, r.report.accuracy, len(b))
                    if out is not None:
                        suffix = "_3ch" if channels == 3 else ""
                        checkpoint.save(model, out / "models" / f"cnn_w{W}{suffix}.ckpt")

    if out is not None:
        with _Stage("report", timings):
            write_reports(res, cfg, out)
    return res


def write_reports(res: ExperimentResult, cfg: ExperimentConfig, out: Path) -> None:
    with open(out / "summary.csv", "w") as fh:
        fh.write("model,window,accuracy,precision,recall,f1\n")
        for r in res.results:
            fh.write(",".join(r.summary_row()) + "\n")
    write_confusion_csv({r.name: r.cm for r in res.results}, out / "confusion.csv")
    write_occlusion_csv({r.name: r.occlusion for r in res.results if r.occlusion}, out / "occlusion.csv")
    report = {
        "config": cfg.as_dict(),
        "data": res.data,
        "pca": res.pca,
        "models": {
            r.name: {
                "kind": r.kind.value,
                "window": r.window,
                "n_test": r.n_test,
                "metrics": r.report.as_dict(),
                "weighted": r.weighted.as_dict(),
                "supports": {str(k): v for k, v in r.supports.items()},
                "confusion": r.cm.as_dict(),
                "occlusion": [{"feature": e.feature, "baseline": e.baseline,
                               "occluded": e.occluded, "drop": e.drop}
                              for e in (r.occlusion.entries if r.occlusion else [])],
                "loss_history": r.model.meta.get("loss_history"),
            }
            for r in res.results
        },
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
