"""Logistic regression and a linear hinge-loss SVM."""

from __future__ import annotations

import numpy as np

from .nn import AdamState, TrainConfig, adam_step, sigmoid


def logistic_loss(w, b, X, y, l2):
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = (sigmoid(z) - y) / len(y)
    return loss, X.T @ r + l2 * w, r.sum()


def fit_logistic(X, y, l2: float = 1e-4, lr: float = 0.05, max_iter: int = 500,
                 tol: float = 1e-6) -> tuple[np.ndarray, float, list[float]]:
    """Full-batch Adam on L2-regularized log-loss.

    Stops after ``max_iter`` iterations or once the gradient norm is below
    ``tol``. Returns ``(weights, bias, loss history)``.
    """
    params = {"w": np.zeros(X.shape[1]), "b": np.zeros(1)}
    tc = TrainConfig(lr=lr)
    state = AdamState()
    history = []
    for t in range(1, max_iter + 1):
        loss, gw, gb = logistic_loss(params["w"], params["b"][0], X, y, l2)
        history.append(float(loss))
        if np.sqrt(gw @ gw + gb * gb) < tol:
            break
        adam_step(params, {"w": gw, "b": np.array([gb])}, state, t, tc)
    return params["w"], float(params["b"][0]), history


def hinge_objective(w, b, X, y_pm, l2):
    margins = y_pm * (X @ w + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * l2 * (w @ w))


def fit_linear_svm(X, y, l2: float = 1e-4, lr: float = 0.01, epochs: int = 20,
                   seed: int = 0) -> tuple[np.ndarray, float, list[float]]:
    """Stochastic subgradient descent on mean hinge loss + L2.

    Labels in {0, 1} are mapped to {-1, +1}. The step size decays as
    ``lr / (1 + lr * l2 * t)``.
    """
    rng = np.random.default_rng(seed)
    y_pm = np.where(np.asarray(y) > 0, 1.0, -1.0)
    w = np.zeros(X.shape[1])
    b = 0.0
    t = 0
    history = []
    for _ in range(epochs):
        for i in rng.permutation(len(y_pm)):
            t += 1
            eta = lr / (1.0 + lr * l2 * t)
            if y_pm[i] * (X[i] @ w + b) < 1.0:
                w -= eta * (l2 * w - y_pm[i] * X[i])
                b += eta * y_pm[i]
            else:
                w -= eta * l2 * w
        history.append(hinge_objective(w, b, X, y_pm, l2))
    return w, b, history
