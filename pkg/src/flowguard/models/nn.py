"""Hand-written forward/backward passes for the MLP and the 2-D CNN, plus Adam.

Parameters live in plain ``dict[str, ndarray]``; every ``*_backward``
returns gradients under the same keys. Conv layers use 3x3 kernels,
stride 1 and same padding; pooling is 2x2 with stride 2 and floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if min(self.lr, self.beta1, self.beta2, self.eps) <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("training constants must be strictly positive")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, t: int, tc: TrainConfig) -> tuple[dict, AdamState]:
    """One bias-corrected Adam update, in place. ``t`` counts from 1."""
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {params[name].shape} for {name}")
    for name, g in grads.items():
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        v = state.v[name]
        m *= tc.beta1
        m += (1 - tc.beta1) * g
        v *= tc.beta2
        v += (1 - tc.beta2) * g * g
        m_hat = m / (1 - tc.beta1 ** t)
        v_hat = v / (1 - tc.beta2 ** t)
        params[name] -= tc.lr * m_hat / (np.sqrt(v_hat) + tc.eps)
    state.t = t
    return params, state


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def bce_from_logits(z: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. the logits."""
    loss = np.logaddexp(0.0, z) - y * z
    return float(loss.mean()), (sigmoid(z) - y) / len(z)


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# -- MLP -------------------------------------------------------------------

def mlp_init(sizes, rng: np.random.Generator) -> dict:
    params = {}
    for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
        params[f"W{i}"] = _uniform(rng, (a, b), a)
        params[f"b{i}"] = _uniform(rng, (b,), a)
    return params


def _mlp_layers(params):
    return len([k for k in params if k.startswith("W")])


def mlp_forward(params: dict, X: np.ndarray):
    """Logits of shape (N,) and the activation cache for backprop."""
    n = _mlp_layers(params)
    acts = [X]
    h = X
    for i in range(n):
        z = h @ params[f"W{i}"] + params[f"b{i}"]
        h = np.maximum(z, 0.0) if i < n - 1 else z
        acts.append(h)
    return h[:, 0], acts


def mlp_backward(params: dict, acts, dz: np.ndarray) -> dict:
    n = _mlp_layers(params)
    grads = {}
    g = dz[:, None]
    for i in range(n - 1, -1, -1):
        grads[f"W{i}"] = acts[i].T @ g
        grads[f"b{i}"] = g.sum(axis=0)
        if i:
            g = (g @ params[f"W{i}"].T) * (acts[i] > 0)
    return grads


# -- CNN -------------------------------------------------------------------

@dataclass(frozen=True)
class CnnConfig:
    height: int = 18
    width: int = 23
    channels: int = 1
    filters: tuple = (64, 128)
    hidden: int = 64

    def __post_init__(self):
        if self.height < 4 or self.width < 4:
            raise ValueError("input must survive two 2x2 poolings")

    @property
    def pooled(self) -> tuple[int, int]:
        return (self.height // 2) // 2, (self.width // 2) // 2

    @property
    def flatten_dim(self) -> int:
        h, w = self.pooled
        return self.filters[-1] * h * w


def cnn_init(cfg: CnnConfig, rng: np.random.Generator) -> dict:
    f1, f2 = cfg.filters
    return {
        "conv1_w": _uniform(rng, (f1, cfg.channels, 3, 3), cfg.channels * 9),
        "conv1_b": _uniform(rng, (f1,), cfg.channels * 9),
        "conv2_w": _uniform(rng, (f2, f1, 3, 3), f1 * 9),
        "conv2_b": _uniform(rng, (f2,), f1 * 9),
        "fc1_w": _uniform(rng, (cfg.flatten_dim, cfg.hidden), cfg.flatten_dim),
        "fc1_b": _uniform(rng, (cfg.hidden,), cfg.flatten_dim),
        "fc2_w": _uniform(rng, (cfg.hidden, 1), cfg.hidden),
        "fc2_b": _uniform(rng, (1,), cfg.hidden),
    }


def _im2col(x: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))  # n,c,h,w,3,3
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * 9)


def conv_forward(x, w, b):
    n, c, h, wd = x.shape
    cols = _im2col(x)
    out = cols @ w.reshape(len(w), -1).T + b
    return out.reshape(n, h, wd, len(w)).transpose(0, 3, 1, 2), cols


def conv_backward(dout, cols, x_shape, w):
    n, c, h, wd = x_shape
    f = len(w)
    d = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (d.T @ cols).reshape(w.shape)
    db = d.sum(axis=0)
    dcols = (d @ w.reshape(f, -1)).reshape(n, h, wd, c, 3, 3)
    dxp = np.zeros((n, c, h + 2, wd + 2))
    for i in range(3):
        for j in range(3):
            dxp[:, :, i:i + h, j:j + wd] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def pool_forward(x):
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    blocks = x[:, :, :h2 * 2, :w2 * 2].reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, h2, w2, 4)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, arg


def pool_backward(dout, arg, x_shape):
    n, c, h, w = x_shape
    h2, w2 = dout.shape[2:]
    blocks = np.zeros((n, c, h2, w2, 4))
    np.put_along_axis(blocks, arg[..., None], dout[..., None], axis=-1)
    blocks = blocks.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2 * 2, w2 * 2)
    dx = np.zeros(x_shape)
    dx[:, :, :h2 * 2, :w2 * 2] = blocks
    return dx


def cnn_forward_logits(params: dict, x: np.ndarray):
    """Logits (N,) for inputs (N, C, H, W), with the cache for backprop."""
    z1, cols1 = conv_forward(x, params["conv1_w"], params["conv1_b"])
    a1 = np.maximum(z1, 0.0)
    p1, arg1 = pool_forward(a1)
    z2, cols2 = conv_forward(p1, params["conv2_w"], params["conv2_b"])
    a2 = np.maximum(z2, 0.0)
    p2, arg2 = pool_forward(a2)
    flat = p2.reshape(len(x), -1)
    z3 = flat @ params["fc1_w"] + params["fc1_b"]
    a3 = np.maximum(z3, 0.0)
    logits = (a3 @ params["fc2_w"] + params["fc2_b"])[:, 0]
    cache = (x.shape, cols1, z1, arg1, p1.shape, cols2, z2, arg2, p2.shape, flat, z3, a3)
    return logits, cache


def cnn_backward(params: dict, cache, dlogits: np.ndarray) -> dict:
    x_shape, cols1, z1, arg1, p1_shape, cols2, z2, arg2, p2_shape, flat, z3, a3 = cache
    g = {}
    d = dlogits[:, None]
    g["fc2_w"] = a3.T @ d
    g["fc2_b"] = d.sum(axis=0)
    d = (d @ params["fc2_w"].T) * (z3 > 0)
    g["fc1_w"] = flat.T @ d
    g["fc1_b"] = d.sum(axis=0)
    d = (d @ params["fc1_w"].T).reshape(p2_shape)
    d = pool_backward(d, arg2, z2.shape) * (z2 > 0)
    d, g["conv2_w"], g["conv2_b"] = conv_backward(d, cols2, p1_shape, params["conv2_w"])
    d = pool_backward(d, arg1, z1.shape) * (z1 > 0)
    _, g["conv1_w"], g["conv1_b"] = conv_backward(d, cols1, x_shape, params["conv1_w"])
    return g


def cnn_forward(cfg: CnnConfig, params: dict, x: np.ndarray) -> np.ndarray:
    """Probability of the normal class for each input of shape (N, C, H, W)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 3:
        x = x[:, None] if cfg.channels == 1 else x[None]
    if x.shape[1:] != (cfg.channels, cfg.height, cfg.width):
        raise ValueError(f"input shape {x.shape[1:]} does not match "
                         f"{(cfg.channels, cfg.height, cfg.width)}")
    out = []
    for i in range(0, len(x), 256):
        logits, _ = cnn_forward_logits(params, x[i:i + 256])
        out.append(sigmoid(logits))
    return np.concatenate(out) if out else np.empty(0)


def train_minibatch(params: dict, forward, backward, X: np.ndarray, y: np.ndarray,
                    tc: TrainConfig, rng: np.random.Generator) -> list[float]:
    """Shuffled mini-batch Adam on mean BCE; returns per-epoch mean loss."""
    state = AdamState()
    t = 0
    history = []
    n = len(y)
    y = y.astype(float)
    for _ in range(tc.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, tc.batch_size):
            idx = order[start:start + tc.batch_size]
            logits, cache = forward(params, X[idx])
            loss, dz = bce_from_logits(logits, y[idx])
            total += loss * len(idx)
            t += 1
            adam_step(params, backward(params, cache, dz), state, t, tc)
        history.append(total / n)
    return history
