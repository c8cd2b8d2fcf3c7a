"""SMOTE: synthetic minority samples on segments between minority neighbours."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datakit import DataError, Dataset


@dataclass
class SmoteResult:
    """Synthetic rows plus the generator pairs needed to audit them.

    ``synthetic[i] == minority[pairs[i, 0]] + lam[i] * (minority[pairs[i, 1]] - minority[pairs[i, 0]])``
    """

    synthetic: np.ndarray
    pairs: np.ndarray
    lam: np.ndarray


def nearest_neighbors(X: np.ndarray, k: int) -> np.ndarray:
    """Indices of each row's ``k`` nearest other rows (Euclidean, ties by index)."""
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def smote(X_minority, X_majority, k: int, rng: np.random.Generator) -> SmoteResult:
    """Generate ``len(majority) - len(minority)`` synthetic minority rows."""
    Xm = np.asarray(X_minority, dtype=float)
    n_major = len(X_majority)
    if len(Xm) < 2:
        raise DataError("SMOTE needs at least two minority samples")
    if k < 1:
        raise ValueError("k must be >= 1")
    need = max(0, n_major - len(Xm))
    if need == 0:
        return SmoteResult(np.empty((0, Xm.shape[1])), np.empty((0, 2), dtype=int), np.empty(0))
    k_eff = min(k, len(Xm) - 1)
    nn = nearest_neighbors(Xm, k_eff)
    base = rng.integers(len(Xm), size=need)
    other = nn[base, rng.integers(k_eff, size=need)]
    lam = rng.random(need)
    synthetic = Xm[base] + lam[:, None] * (Xm[other] - Xm[base])
    return SmoteResult(synthetic, np.stack([base, other], axis=1), lam)


def balance(ds: Dataset, k: int = 5, seed: int = 0) -> tuple[Dataset, SmoteResult]:
    """Oversample the smaller class of a binary dataset to parity."""
    classes, counts = np.unique(ds.y, return_counts=True)
    if len(classes) != 2:
        raise DataError("SMOTE balancing needs exactly two classes")
    minority = classes[np.argmin(counts)]
    res = smote(ds.X[ds.y == minority], ds.X[ds.y != minority], k, np.random.default_rng(seed))
    X = np.vstack([ds.X, res.synthetic])
    y = np.concatenate([ds.y, np.full(len(res.synthetic), minority)])
    return Dataset(X, y, ds.feature_names, mode=ds.mode, provenance=ds.provenance), res
