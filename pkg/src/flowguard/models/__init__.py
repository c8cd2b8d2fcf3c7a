"""Classifier zoo with one fit/predict surface.

Tabular models take binary labels with 1 = hacked and score P(hacked).
The CNN follows the window convention (1 = normal) and scores P(normal).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ..datakit import DataError, Dataset, WindowSet
from . import knn, linear, nn, tree
from .nn import AdamState, CnnConfig, TrainConfig, adam_step


class ModelKind(str, enum.Enum):
    LogisticRegression = "lr"
    LinearSVM = "svm"
    KNN = "knn"
    DecisionTree = "dt"
    RandomForest = "rf"
    MLP = "mlp"
    CNN2D = "cnn"

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        for kind in cls:
            if text.lower() in (kind.value, kind.name.lower()):
                return kind
        raise ValueError(f"unknown model {text!r}; choose from {', '.join(k.value for k in cls)}")


TABULAR = (ModelKind.LogisticRegression, ModelKind.LinearSVM, ModelKind.KNN,
           ModelKind.DecisionTree, ModelKind.RandomForest, ModelKind.MLP)

DISPLAY = {
    ModelKind.LinearSVM: "SVM-SVC",
    ModelKind.LogisticRegression: "Logistic Regression",
    ModelKind.RandomForest: "Random Forest",
    ModelKind.KNN: "KNN",
    ModelKind.DecisionTree: "Decision Tree",
    ModelKind.MLP: "MLP",
    ModelKind.CNN2D: "CNN2D",
}

DEFAULTS = {
    ModelKind.LogisticRegression: {"l2": 1e-4, "lr": 0.05, "max_iter": 500, "tol": 1e-6},
    ModelKind.LinearSVM: {"l2": 1e-4, "lr": 0.01, "epochs": 20},
    ModelKind.KNN: {"k": 5},
    ModelKind.DecisionTree: {"min_samples_split": 2},
    ModelKind.RandomForest: {"n_trees": 100, "max_features": "sqrt", "bootstrap": True},
    ModelKind.MLP: {"sizes": [23, 64, 32, 1], "epochs": 10, "batch_size": 32, "lr": 1e-3},
}


@dataclass
class TrainedModel:
    kind: ModelKind
    params: dict
    hyper: dict
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return int(self.meta["n_features"])


@dataclass
class Prediction:
    labels: np.ndarray
    scores: np.ndarray


def _check_training(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite training features")
    if len(np.unique(y)) < 2:
        raise DataError("training labels contain a single class")
    return X, y


def _tree_params(t: tree.Tree, prefix: str = "") -> dict:
    return {prefix + "feature": t.feature, prefix + "threshold": t.threshold,
            prefix + "left": t.left, prefix + "right": t.right, prefix + "value": t.value}


def _forest_params(f: tree.Forest) -> dict:
    sizes = [t.n_nodes for t in f.trees]
    cat = {k: np.concatenate([getattr(t, k) for t in f.trees])
           for k in ("feature", "threshold", "left", "right", "value")}
    cat["tree_sizes"] = np.array(sizes)
    return cat


def _forest_from_params(p: dict) -> tree.Forest:
    trees = []
    start = 0
    for size in p["tree_sizes"]:
        sl = slice(start, start + int(size))
        trees.append(tree.Tree(*(p[k][sl] for k in ("feature", "threshold", "left", "right", "value"))))
        start += int(size)
    return tree.Forest(trees)


def fit_model(kind: ModelKind | str, train, hyper: dict | None = None, seed: int = 0) -> TrainedModel:
    """Fit one tabular model on a scaled, binary-labelled Dataset or ``(X, y)``."""
    kind = ModelKind.parse(kind) if isinstance(kind, str) else kind
    if kind is ModelKind.CNN2D:
        raise ValueError("use fit_cnn for the CNN")
    X, y = (train.X, train.y) if isinstance(train, Dataset) else train
    X, y = _check_training(X, y)
    h = dict(DEFAULTS[kind])
    h.update(hyper or {})
    meta = {"seed": seed, "n_features": X.shape[1], "n_train": len(y)}

    if kind is ModelKind.LogisticRegression:
        w, b, hist = linear.fit_logistic(X, y, h["l2"], h["lr"], h["max_iter"], h["tol"])
        params = {"w": w, "b": np.array([b])}
        meta.update(iterations=len(hist), final_loss=hist[-1])
    elif kind is ModelKind.LinearSVM:
        w, b, hist = linear.fit_linear_svm(X, y, h["l2"], h["lr"], h["epochs"], seed)
        params = {"w": w, "b": np.array([b])}
        meta.update(epochs=len(hist), final_loss=hist[-1])
    elif kind is ModelKind.KNN:
        params = {"X": X.copy(), "y": y.copy()}
    elif kind is ModelKind.DecisionTree:
        t = tree.build_tree(X, y, None, None, h["min_samples_split"])
        params = _tree_params(t)
        meta.update(n_nodes=t.n_nodes)
    elif kind is ModelKind.RandomForest:
        mf = h["max_features"]
        if mf == "sqrt":
            mf = math.ceil(math.sqrt(X.shape[1]))
        h["max_features"] = mf
        f = tree.build_forest(X, y, h["n_trees"], mf, h["bootstrap"], seed)
        params = _forest_params(f)
    else:
        sizes = list(h["sizes"])
        sizes[0] = X.shape[1]
        h["sizes"] = sizes
        rng = np.random.default_rng(seed)
        params = nn.mlp_init(sizes, rng)
        tc = TrainConfig(lr=h["lr"], epochs=h["epochs"], batch_size=h["batch_size"], seed=seed)
        hist = nn.train_minibatch(params, nn.mlp_forward, nn.mlp_backward, X, y, tc, rng)
        meta.update(epochs=len(hist), final_loss=hist[-1], loss_history=hist)
    return TrainedModel(kind, params, h, meta)


def predict(model: TrainedModel, X) -> Prediction:
    """Labels and scores; a score of at least 0.5 means the positive class."""
    X = np.asarray(X, dtype=float)
    kind = model.kind
    if kind is ModelKind.CNN2D:
        cfg = CnnConfig(**model.hyper["cnn"])
        scores = nn.cnn_forward(cfg, model.params, X)
        return Prediction((scores >= 0.5).astype(int), scores)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} columns, got shape {X.shape}")
    p = model.params
    if kind in (ModelKind.LogisticRegression, ModelKind.LinearSVM):
        scores = nn.sigmoid(X @ p["w"] + p["b"][0])
    elif kind is ModelKind.KNN:
        neigh = knn.knn_neighbors(p["X"], X, model.hyper["k"])
        labels, scores = knn.knn_vote(p["y"], neigh)
        return Prediction(labels.astype(int), scores)
    elif kind is ModelKind.DecisionTree:
        scores = tree.Tree(p["feature"], p["threshold"], p["left"], p["right"], p["value"]).predict_proba(X)
    elif kind is ModelKind.RandomForest:
        scores = _forest_from_params(p).votes(X)
    else:
        logits, _ = nn.mlp_forward(p, X)
        scores = nn.sigmoid(logits)
    return Prediction((scores >= 0.5).astype(int), scores)


def fit_cnn(cfg: CnnConfig, train: WindowSet, tc: TrainConfig = TrainConfig()) -> TrainedModel:
    """Train the CNN on windows labelled 1 = normal, 0 = hacked."""
    X = np.asarray(train.X, dtype=float)
    y = np.asarray(train.y, dtype=int)
    if X.shape[1:] != (cfg.channels, cfg.height, cfg.width):
        raise ValueError(f"windows {X.shape[1:]} do not match the CNN input "
                         f"{(cfg.channels, cfg.height, cfg.width)}")
    X, y = _check_training(X.reshape(len(X), -1), y)
    X = X.reshape(train.X.shape)
    rng = np.random.default_rng(tc.seed)
    params = nn.cnn_init(cfg, rng)
    hist = nn.train_minibatch(params, nn.cnn_forward_logits, nn.cnn_backward, X, y, tc, rng)
    hyper = {"cnn": {"height": cfg.height, "width": cfg.width, "channels": cfg.channels,
                     "filters": list(cfg.filters), "hidden": cfg.hidden},
             "lr": tc.lr, "beta1": tc.beta1, "beta2": tc.beta2, "eps": tc.eps,
             "epochs": tc.epochs, "batch_size": tc.batch_size}
    meta = {"seed": tc.seed, "n_train": len(y), "epochs": len(hist),
            "final_loss": hist[-1], "loss_history": hist,
            "n_features": cfg.width}
    return TrainedModel(ModelKind.CNN2D, params, hyper, meta)


def three_channel_augment(windows: WindowSet, normal_reference) -> WindowSet:
    """Stack each window with the reference per-feature mean and std matrices.

    ``normal_reference`` holds scaled rows of normal traffic only.
    """
    ref = normal_reference.X if isinstance(normal_reference, Dataset) else np.asarray(normal_reference)
    if len(ref) == 0:
        raise DataError("empty normal reference")
    if isinstance(normal_reference, Dataset) and np.any(normal_reference.y != 0):
        raise DataError("reference must contain normal rows only")
    n, c, h, w = windows.X.shape
    if c != 1:
        raise ValueError("expected single-channel windows")
    mean = np.broadcast_to(ref.mean(axis=0), (h, w))
    std = np.broadcast_to(ref.std(axis=0), (h, w))
    stats = np.broadcast_to(np.stack([mean, std]), (n, 2, h, w))
    return WindowSet(np.concatenate([windows.X, stats], axis=1), windows.y,
                     windows.groups, windows.starts)
