"""k-nearest-neighbour voting."""

from __future__ import annotations

import numpy as np


def knn_neighbors(train_X: np.ndarray, X: np.ndarray, k: int, chunk: int = 512) -> np.ndarray:
    """Indices of the ``k`` nearest training rows for each query row.

    Ordered nearest first; equal distances fall to the lower training index.
    """
    sq_train = np.einsum("ij,ij->i", train_X, train_X)
    out = np.empty((len(X), k), dtype=int)
    for s in range(0, len(X), chunk):
        q = X[s:s + chunk]
        d2 = np.einsum("ij,ij->i", q, q)[:, None] + sq_train[None, :] - 2.0 * q @ train_X.T
        d2 = np.maximum(d2, 0.0)
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        for r in range(len(q)):
            cand = np.flatnonzero(d2[r] <= kth[r])
            order = np.lexsort((cand, d2[r, cand]))
            out[s + r] = cand[order[:k]]
    return out


def knn_vote(train_y: np.ndarray, neighbors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Majority class per row and the fraction of class-1 neighbours.

    A tie goes to the class of the nearest neighbour among the tied classes.
    """
    labels = train_y[neighbors]
    classes = np.unique(train_y)
    counts = np.stack([(labels == c).sum(axis=1) for c in classes], axis=1)
    top = counts.max(axis=1)
    pred = np.empty(len(labels), dtype=train_y.dtype)
    for r in range(len(labels)):
        tied = classes[counts[r] == top[r]]
        if len(tied) == 1:
            pred[r] = tied[0]
        else:
            pred[r] = next(lab for lab in labels[r] if lab in tied)
    return pred, (labels == 1).mean(axis=1)
