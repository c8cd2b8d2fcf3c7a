"""Principal component projection for the 2-D class-overlap plot."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datakit import DataError


@dataclass
class Projection:
    projected: np.ndarray     # (N, n_components)
    ratios: np.ndarray        # explained-variance ratio per component
    components: np.ndarray    # (n_components, F), orthonormal rows
    eigenvalues: np.ndarray
    mean: np.ndarray

    @property
    def explained(self) -> float:
        return float(self.ratios.sum())


def pca_project(X, n_components: int = 2) -> Projection:
    """Project onto the top covariance eigenvectors.

    Each component's sign is fixed so its largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=float)
    n, f = X.shape
    if n <= n_components:
        raise DataError(f"need more than {n_components} rows")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = evals.sum()
    if total <= 0:
        raise DataError("all rows are identical; nothing to project")
    comps = evecs[:, :n_components].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return Projection(Xc @ comps.T, evals[:n_components] / total, comps,
                      evals[:n_components], mean)
