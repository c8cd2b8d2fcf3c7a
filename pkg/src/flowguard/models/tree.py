"""CART classification trees (Gini) and a bagged random forest, binary labels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Tree:
    """Flat node arrays; ``left[i] == -1`` marks a leaf.

    ``value[i]`` is the fraction of class-1 training samples in node ``i``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(len(X), dtype=int)
        active = np.flatnonzero(self.left[node] >= 0)
        while len(active):
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.left[node[active]] >= 0]
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def _best_split(X, y, idx, features):
    """Lowest weighted Gini over the candidate features.

    Ties keep the earliest candidate feature and the lowest threshold.
    Returns ``(feature, threshold)`` or None when no split separates rows.
    """
    n = len(idx)
    yi = y[idx]
    best = None
    best_score = np.inf
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        ones_left = np.cumsum(yi[order])[:-1]
        ones_right = ones_left[-1] + yi[order][-1] - ones_left
        # n * weighted gini = n_l * (1 - p_l^2 - q_l^2) + n_r * (...)
        gl = n_left - (ones_left ** 2 + (n_left - ones_left) ** 2) / n_left
        gr = n_right - (ones_right ** 2 + (n_right - ones_right) ** 2) / n_right
        score = np.where(valid, gl + gr, np.inf)
        i = int(np.argmin(score))
        if score[i] < best_score - 1e-12:
            best_score = score[i]
            thr = 0.5 * (xs[i] + xs[i + 1])
            if not xs[i] <= thr < xs[i + 1]:  # midpoint rounded onto xs[i + 1]
                thr = xs[i]
            best = (int(f), thr)
    return best


def build_tree(X: np.ndarray, y: np.ndarray, max_features: int | None = None,
               rng: np.random.Generator | None = None, min_samples_split: int = 2,
               max_depth: int | None = None) -> Tree:
    """Grow a CART tree until leaves are pure or too small to split.

    With ``max_features`` set, each node draws that many candidate features
    from ``rng``; otherwise every feature is tried in column order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n_feat = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        p = value[node]
        if len(idx) < min_samples_split or p in (0.0, 1.0):
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        if max_features is None or max_features >= n_feat:
            candidates = range(n_feat)
        else:
            candidates = rng.choice(n_feat, size=max_features, replace=False)
        split = _best_split(X, y, idx, candidates)
        if split is None:
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature), np.array(threshold), np.array(left),
                np.array(right), np.array(value))


@dataclass
class Forest:
    trees: list

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting class 1 (each tree votes its leaf majority)."""
        v = np.zeros(len(X))
        for tree in self.trees:
            v += tree.predict_proba(X) >= 0.5
        return v / len(self.trees)


def build_forest(X, y, n_trees: int = 100, max_features: int | str | None = "sqrt",
                 bootstrap: bool = True, seed: int = 0) -> Forest:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if max_features == "sqrt":
        max_features = math.ceil(math.sqrt(X.shape[1]))
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        idx = rng.integers(len(y), size=len(y)) if bootstrap else np.arange(len(y))
        trees.append(build_tree(X[idx], y[idx], max_features, rng))
    return Forest(trees)
