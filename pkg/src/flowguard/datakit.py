"""Model-ready datasets from detector rows.

Scaling, one-hot encoding, windowing and splitting. SMOTE and PCA live in
:mod:`flowguard.smote` and :mod:`flowguard.pca`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detectors import FEATURES

NORMAL, HACKED = "normal", "hacked"
WINDOW_SIZES = (9, 18, 36)


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    """Rows of features with integer labels.

    In binary mode labels are 1 for hacked and 0 for normal; in multiclass
    mode they are the raw attack codes.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = FEATURES
    groups: np.ndarray | None = None  # detector id per row
    times: np.ndarray | None = None   # interval begin per row
    mode: str = "binary"
    provenance: tuple = ()

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or len(self.X) < 1:
            raise DataError("dataset needs at least one row")
        if self.X.shape[1] != len(self.feature_names):
            raise DataError(f"{self.X.shape[1]} columns but {len(self.feature_names)} names")
        if len(self.y) != len(self.X):
            raise DataError("labels and rows differ in length")
        if not np.all(np.isfinite(self.X)):
            raise DataError("non-finite feature values")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.feature_names,
                       None if self.groups is None else self.groups[idx],
                       None if self.times is None else self.times[idx],
                       self.mode, self.provenance)

    def with_X(self, X: np.ndarray) -> "Dataset":
        return Dataset(X, self.y, self.feature_names, self.groups, self.times,
                       self.mode, self.provenance)


def build_dataset(rows, mode: str = "binary", provenance: tuple = ()) -> Dataset:
    """Drop the meta columns and map label codes.

    Binary mode folds every attack code into one hacked class (1).
    """
    if mode not in ("binary", "multiclass"):
        raise ValueError(f"unknown mode {mode!r}")
    rows = list(rows)
    if not rows:
        raise DataError("no rows")
    for r in rows:
        if len(r.features) != len(FEATURES):
            raise DataError(f"row from {r.detector} has {len(r.features)} features, "
                            f"expected {len(FEATURES)} (first missing column: "
                            f"{FEATURES[min(len(r.features), len(FEATURES) - 1)]})")
    X = np.array([r.features for r in rows], dtype=float)
    codes = np.array([r.label for r in rows], dtype=int)
    y = (codes > 0).astype(int) if mode == "binary" else codes
    return Dataset(X, y, FEATURES,
                   np.array([r.detector for r in rows]),
                   np.array([r.begin for r in rows]), mode, provenance)


def binary_names(y) -> list[str]:
    return [HACKED if v else NORMAL for v in y]


# -- scaling ---------------------------------------------------------------

@dataclass
class ScalerParams:
    mins: np.ndarray
    maxs: np.ndarray
    names: tuple = FEATURES

    def to_dict(self) -> dict:
        return {n: {"min": float(a), "max": float(b)}
                for n, a, b in zip(self.names, self.mins, self.maxs)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        names = tuple(d)
        return cls(np.array([d[n]["min"] for n in names]),
                   np.array([d[n]["max"] for n in names]), names)


def fit_scale(train) -> ScalerParams:
    X = train.X if isinstance(train, Dataset) else np.asarray(train, dtype=float)
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite values in scaler fit")
    names = train.feature_names if isinstance(train, Dataset) else tuple(f"x{i}" for i in range(X.shape[1]))
    return ScalerParams(X.min(axis=0), X.max(axis=0), names)


def transform(params: ScalerParams, X) -> np.ndarray:
    """Min-max map with the fit-split extremes; no clamping outside them."""
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite values in transform")
    span = params.maxs - params.mins
    safe = np.where(span > 0, span, 1.0)
    out = (X - params.mins) / safe
    return np.where(span > 0, out, 0.0)


def write_scaler(params: ScalerParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


def read_scaler(path: str | Path) -> ScalerParams:
    return ScalerParams.from_dict(json.loads(Path(path).read_text()))


# -- one-hot ---------------------------------------------------------------

@dataclass
class OneHot:
    vocabulary: tuple

    def __call__(self, values) -> np.ndarray:
        index = {v: i for i, v in enumerate(self.vocabulary)}
        out = np.zeros((len(values), len(self.vocabulary)))
        for r, v in enumerate(values):
            i = index.get(v)
            if i is not None:
                out[r, i] = 1.0
        return out


def fit_one_hot(values) -> OneHot:
    """Vocabulary in sorted order of the training categories."""
    return OneHot(tuple(sorted(set(values))))


def one_hot(values, vocabulary=None) -> np.ndarray:
    enc = fit_one_hot(values) if vocabulary is None else OneHot(tuple(vocabulary))
    return enc(values)


# -- windows ---------------------------------------------------------------

@dataclass
class WindowSet:
    """Stacked ``(N, C, W, F)`` windows; labels are 1 for normal, 0 for hacked."""

    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray | None = None
    starts: np.ndarray | None = None

    def __len__(self):
        return len(self.y)

    @property
    def height(self) -> int:
        return self.X.shape[2]

    def subset(self, idx) -> "WindowSet":
        idx = np.asarray(idx)
        return WindowSet(self.X[idx], self.y[idx],
                         None if self.groups is None else self.groups[idx],
                         None if self.starts is None else self.starts[idx])


def make_windows(X, hacked, W: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Cut one detector's time-ordered rows into non-overlapping ``W``-row blocks.

    Returns ``(windows (n, W, F), labels (n,), discarded)``. A window is
    normal (1) only if every member row is normal.
    """
    X = np.asarray(X, dtype=float)
    hacked = np.asarray(hacked).astype(bool)
    if W < 1:
        raise ValueError("window height must be positive")
    if len(X) < W:
        raise DataError(f"{len(X)} rows cannot fill a window of {W}")
    n = len(X) // W
    blocks = X[: n * W].reshape(n, W, X.shape[1])
    y = (~hacked[: n * W].reshape(n, W).any(axis=1)).astype(int)
    return blocks, y, len(X) - n * W


def windows_from_dataset(ds: Dataset, W: int) -> WindowSet:
    """Window every detector's rows separately (rows are sorted by time first)."""
    if ds.groups is None:
        blocks, y, _ = make_windows(ds.X, ds.y > 0, W)
        return WindowSet(blocks[:, None], y)
    xs, ys, gs, ss = [], [], [], []
    for g in sorted(set(ds.groups.tolist())):
        idx = np.flatnonzero(ds.groups == g)
        if ds.times is not None:
            idx = idx[np.argsort(ds.times[idx], kind="stable")]
        if len(idx) < W:
            continue
        blocks, y, _ = make_windows(ds.X[idx], ds.y[idx] > 0, W)
        xs.append(blocks)
        ys.append(y)
        gs += [g] * len(y)
        if ds.times is not None:
            ss.append(ds.times[idx][: len(y) * W: W])
    if not xs:
        raise DataError(f"no detector has {W} rows")
    return WindowSet(np.concatenate(xs)[:, None], np.concatenate(ys), np.array(gs),
                     np.concatenate(ss) if ss else None)


def write_windows(ws: WindowSet, path: str | Path) -> None:
    """Flat binary layout, little endian.

    Header: uint32 count, uint32 W, uint32 F, uint32 C. Then count*C*W*F
    float64 values in (window, channel, row, column) order, then count
    uint8 labels.
    """
    n, c, w, f = ws.X.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4I", n, w, f, c))
        fh.write(np.ascontiguousarray(ws.X, dtype="<f8").tobytes())
        fh.write(np.asarray(ws.y, dtype=np.uint8).tobytes())


def read_windows(path: str | Path) -> WindowSet:
    data = Path(path).read_bytes()
    n, w, f, c = struct.unpack_from("<4I", data)
    off = 16
    X = np.frombuffer(data, dtype="<f8", count=n * c * w * f, offset=off).reshape(n, c, w, f)
    off += X.nbytes
    y = np.frombuffer(data, dtype=np.uint8, count=n, offset=off).astype(int)
    return WindowSet(X.copy(), y)


# -- split -----------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratify: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")


def split_indices(labels, spec: SplitSpec = SplitSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle then partition; per-class when stratified.

    The test share of each part is ``floor((1 - fraction) * n)``, so any
    remainder goes to training.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if n < 5:
        raise DataError("need at least 5 items to split")
    rng = np.random.default_rng(spec.seed)
    if not spec.stratify:
        perm = rng.permutation(n)
        n_test = int(np.floor(round((1 - spec.train_fraction) * n, 9)))
        return np.sort(perm[n_test:]), np.sort(perm[:n_test])
    train, test = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < 2:
            raise DataError(f"class {cls} has {len(idx)} item(s); stratification needs 2")
        idx = idx[rng.permutation(len(idx))]
        n_test = int(np.floor(round((1 - spec.train_fraction) * len(idx), 9)))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(data, spec: SplitSpec = SplitSpec()):
    """Split a Dataset or WindowSet into ``(train, test)``."""
    tr, te = split_indices(data.y, spec)
    return data.subset(tr), data.subset(te)


def write_dataset_csv(ds: Dataset, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(list(ds.feature_names) + ["label"]) + "\n")
        for row, lab in zip(ds.X, ds.y):
            fh.write(",".join(f"{v:.6f}" for v in row) + f",{int(lab)}\n")
