import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowguard.datakit import DataError, Dataset, WindowSet
from flowguard.models import (
    DISPLAY, TABULAR, ModelKind, fit_cnn, fit_model, predict, three_channel_augment,
)
from flowguard.models import checkpoint, knn, linear, nn, tree

from oracles import central_difference


def toy(n=80, f=4, seed=0, sep=True):
    rng = np.random.default_rng(seed)
    X = rng.random((n, f))
    y = (X[:, 0] + X[:, 1] > 1.0).astype(int) if sep else rng.integers(0, 2, n)
    return X, y


def test_kinds_cover_table_plus_cnn():
    assert len(ModelKind) == 7 and len(TABULAR) == 6
    assert ModelKind.CNN2D not in TABULAR
    assert set(DISPLAY) == set(ModelKind)
    assert ModelKind.parse("RandomForest") is ModelKind.RandomForest
    assert ModelKind.parse("rf") is ModelKind.RandomForest
    with pytest.raises(ValueError):
        ModelKind.parse("xgb")


def test_logistic_separable_fits_training_set():
    X = np.array([[0.0, 0.0], [0.1, 0.2], [0.2, 0.1], [0.9, 1.0], [1.0, 0.8], [0.8, 0.9]])
    y = np.array([0, 0, 0, 1, 1, 1])
    m = fit_model("lr", (X, y))
    assert np.array_equal(predict(m, X).labels, y)


def test_logistic_boundary_is_positive():
    m = fit_model("lr", toy())
    m.params["w"][:] = 0
    m.params["b"][:] = 0
    pred = predict(m, np.zeros((3, 4)))
    assert pred.scores.tolist() == [0.5] * 3 and pred.labels.tolist() == [1] * 3


def test_logistic_loss_gradient_and_monotone_descent():
    X, y = toy(sep=False)
    w, b = np.zeros(4), 0.0
    _, gw, gb = linear.logistic_loss(w + 0.3, b, X, y, 1e-4)

    def f(w=w + 0.3, b=b):
        return linear.logistic_loss(w, b, X, y, 1e-4)[0]
    eps = 1e-6
    num = [(f(w + 0.3 + eps * e) - f(w + 0.3 - eps * e)) / (2 * eps) for e in np.eye(4)]
    assert np.allclose(gw, num, atol=1e-8)
    losses = []
    for _ in range(100):
        loss, gw, gb = linear.logistic_loss(w, b, X, y, 1e-4)
        losses.append(loss)
        w, b = w - 0.5 * gw, b - 0.5 * gb
    assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))


def test_svm_objective_decreases_on_separable_toy():
    X, y = toy(200, 2, seed=3)
    w, b, hist = linear.fit_linear_svm(X, y, 1e-4, 0.01, 15, seed=0)
    assert hist[-1] < hist[0]
    assert np.mean((X @ w + b > 0) == y) > 0.85


def test_knn_k1_reproduces_training_labels():
    X, y = toy(sep=False)
    m = fit_model("knn", (X, y), {"k": 1})
    assert np.array_equal(predict(m, X).labels, y)


def test_knn_majority_and_tie():
    train_X = np.arange(5, dtype=float)[:, None]
    train_y = np.array([1, 1, 1, 0, 0])
    m = fit_model("knn", (train_X, train_y))
    assert predict(m, [[2.0]]).labels.tolist() == [1]
    # k=2 with one of each: nearest neighbour's class wins
    nb = knn.knn_neighbors(train_X, np.array([[3.4]]), 2)
    assert nb.tolist() == [[3, 4]]
    assert knn.knn_vote(train_y, nb)[0].tolist() == [0]


def test_knn_neighbors_bruteforce():
    rng = np.random.default_rng(1)
    A = rng.integers(0, 3, (60, 3)).astype(float)  # many ties
    Q = rng.integers(0, 3, (25, 3)).astype(float)
    got = knn.knn_neighbors(A, Q, 5, chunk=7)
    for q, row in zip(Q, got):
        d = [(float(((a - q) ** 2).sum()), i) for i, a in enumerate(A)]
        assert row.tolist() == [i for _, i in sorted(d)[:5]]


def test_tree_leaf_rule_and_purity():
    X, y = toy(sep=False, seed=5)
    m = fit_model("dt", (X, y))
    assert np.array_equal(predict(m, X).labels, y)  # distinct rows: grows to purity
    t = tree.Tree(m.params["feature"], m.params["threshold"], m.params["left"],
                  m.params["right"], m.params["value"])
    leaves = t.apply(X)
    assert np.all(m.params["left"][leaves] == -1)


def test_tree_gini_split_bruteforce():
    rng = np.random.default_rng(2)
    X = rng.integers(0, 6, (40, 3)).astype(float)
    y = rng.integers(0, 2, 40)

    def gini(lab):
        if not len(lab):
            return 0.0
        p = lab.mean()
        return 1 - p * p - (1 - p) ** 2
    best = None
    for f in range(3):
        vals = np.unique(X[:, f])
        for a, b in zip(vals, vals[1:]):
            thr = (a + b) / 2
            m = X[:, f] <= thr
            s = m.sum() * gini(y[m]) + (~m).sum() * gini(y[~m])
            if best is None or s < best[0] - 1e-12:
                best = (s, f, thr)
    got = tree._best_split(X, y, np.arange(40), range(3))
    assert got == (best[1], best[2])


def test_degenerate_forest_equals_tree():
    X, y = toy(300, 6, seed=9, sep=False)
    dt = fit_model("dt", (X, y), seed=4)
    rf = fit_model("rf", (X, y), {"n_trees": 1, "bootstrap": False, "max_features": 6}, seed=4)
    Q = np.random.default_rng(1).random((500, 6))
    assert np.array_equal(predict(dt, Q).labels, predict(rf, Q).labels)


def test_forest_determinism_and_votes():
    X, y = toy(150, 5, seed=2)
    a = fit_model("rf", (X, y), {"n_trees": 15}, seed=3)
    b = fit_model("rf", (X, y), {"n_trees": 15}, seed=3)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert a.hyper["max_features"] == 3
    p1, p2 = predict(a, X), predict(a, X)
    assert np.array_equal(p1.scores, p2.scores)
    assert np.all((p1.scores * 15) == np.round(p1.scores * 15))


def test_training_errors():
    X, _ = toy()
    with pytest.raises(DataError):
        fit_model("rf", (X, np.zeros(len(X), dtype=int)))
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(DataError):
        fit_model("lr", (bad, np.arange(len(X)) % 2))
    m = fit_model("lr", toy())
    with pytest.raises(ValueError):
        predict(m, np.zeros((2, 5)))


@pytest.mark.parametrize("kind", [k.value for k in TABULAR])
def test_every_tabular_model_learns_toy(kind):
    X, y = toy(300, 4, seed=11)
    m = fit_model(kind, Dataset(X, y, tuple("abcd")), seed=1)
    assert np.mean(predict(m, X).labels == y) > 0.8
    assert all(np.all(np.isfinite(np.asarray(v, dtype=float))) for v in m.params.values())


def test_mlp_shapes():
    m = fit_model("mlp", toy())
    assert m.params["W0"].shape == (4, 64) and m.params["W1"].shape == (64, 32)
    assert m.params["W2"].shape == (32, 1)
    assert len(m.meta["loss_history"]) == 10


# -- Adam ------------------------------------------------------------------

def test_adam_zero_gradient_is_noop():
    p = {"a": np.array([1.0, -2.0])}
    nn.adam_step(p, {"a": np.zeros(2)}, nn.AdamState(), 1, nn.TrainConfig())
    assert p["a"].tolist() == [1.0, -2.0]


def test_adam_first_step_and_limit():
    tc = nn.TrainConfig()
    p = {"a": np.zeros(1)}
    nn.adam_step(p, {"a": np.ones(1)}, nn.AdamState(), 1, tc)
    assert p["a"][0] == pytest.approx(-tc.lr / (1 + tc.eps), rel=1e-12)
    p = {"a": np.zeros(1)}
    state = nn.AdamState()
    for t in range(1, 3001):
        before = p["a"][0]
        nn.adam_step(p, {"a": np.array([0.3])}, state, t, tc)
    assert before - p["a"][0] == pytest.approx(tc.lr, rel=1e-6)


def test_adam_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        nn.adam_step({"a": np.zeros(1)}, {"a": np.array([np.inf])}, nn.AdamState(), 1, nn.TrainConfig())


# -- gradients ---------------------------------------------------------------

def _rel_err(a, b):
    """Norm-wise relative error of one parameter tensor's gradient."""
    return np.linalg.norm(a - b) / max(1e-12, np.linalg.norm(a) + np.linalg.norm(b))


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**31))
def test_mlp_gradients(seed):
    rng = np.random.default_rng(seed)
    params = nn.mlp_init([5, 7, 4, 1], rng)
    X, y = rng.normal(size=(6, 5)), rng.integers(0, 2, 6).astype(float)

    def loss():
        return nn.bce_from_logits(nn.mlp_forward(params, X)[0], y)[0]
    logits, acts = nn.mlp_forward(params, X)
    grads = nn.mlp_backward(params, acts, nn.bce_from_logits(logits, y)[1])
    for name in params:
        num = central_difference(loss, params, name, 1e-5)
        assert _rel_err(grads[name], num) < 1e-4, name


@settings(max_examples=3, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([1, 3]))
def test_cnn_gradients(seed, channels):
    rng = np.random.default_rng(seed)
    cfg = nn.CnnConfig(height=9, channels=channels, filters=(2, 2), hidden=4)
    params = nn.cnn_init(cfg, rng)
    X = rng.normal(size=(3, channels, 9, 23))
    y = rng.integers(0, 2, 3).astype(float)

    def loss():
        return nn.bce_from_logits(nn.cnn_forward_logits(params, X)[0], y)[0]
    logits, cache = nn.cnn_forward_logits(params, X)
    grads = nn.cnn_backward(params, cache, nn.bce_from_logits(logits, y)[1])
    for name in params:
        num = central_difference(loss, params, name, 1e-5)
        assert _rel_err(grads[name], num) < 1e-4, name


# -- CNN -------------------------------------------------------------------

@pytest.mark.parametrize("h, flat", [(9, 1280), (18, 2560), (36, 5760)])
def test_flatten_dims(h, flat):
    cfg = nn.CnnConfig(height=h)
    assert cfg.flatten_dim == flat
    params = nn.cnn_init(cfg, np.random.default_rng(0))
    _, cache = nn.cnn_forward_logits(params, np.zeros((2, 1, h, 23)))
    assert cache[9].shape == (2, flat)


def test_zero_network_outputs_half():
    cfg = nn.CnnConfig(height=9)
    params = {k: np.zeros_like(v) for k, v in nn.cnn_init(cfg, np.random.default_rng(0)).items()}
    assert nn.cnn_forward(cfg, params, np.zeros((2, 1, 9, 23))).tolist() == [0.5, 0.5]
    with pytest.raises(ValueError):
        nn.cnn_forward(cfg, params, np.zeros((2, 1, 18, 23)))


def _windows(n, h=9, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.random((n, 1, h, 23)) * 0.2
    X[y == 1, 0, :, :5] += 0.7
    return WindowSet(X, y)


def test_cnn_overfits_eight_windows():
    ws = _windows(8)
    m = fit_cnn(nn.CnnConfig(height=9), ws, nn.TrainConfig(epochs=200, seed=1))
    assert np.array_equal(predict(m, ws.X).labels, ws.y)


def test_cnn_training_is_deterministic_and_small_batches_ok():
    ws = _windows(20)
    tc = nn.TrainConfig(epochs=2, seed=5)
    a = fit_cnn(nn.CnnConfig(height=9), ws, tc)
    b = fit_cnn(nn.CnnConfig(height=9), ws, tc)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert a.meta["n_train"] == 20 < tc.batch_size


def test_cnn_rejects_single_class_and_bad_shape():
    ws = _windows(8)
    with pytest.raises(DataError):
        fit_cnn(nn.CnnConfig(height=9), WindowSet(ws.X, np.ones(8, dtype=int)), nn.TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        fit_cnn(nn.CnnConfig(height=18), ws, nn.TrainConfig(epochs=1))


def test_three_channel_augment():
    ws = _windows(6)
    ref_X = np.random.default_rng(3).random((30, 23))
    ref_X[:, 4] = 0.25
    ref = Dataset(ref_X, np.zeros(30, dtype=int))
    aug = three_channel_augment(ws, ref)
    assert aug.X.shape == (6, 3, 9, 23)
    assert np.array_equal(aug.X[:, 0], ws.X[:, 0])
    assert np.all(aug.X[:, 1] == aug.X[0, 1]) and np.all(aug.X[:, 2] == aug.X[0, 2])
    assert np.allclose(aug.X[0, 1, 3], ref_X.mean(0))
    assert np.all(aug.X[:, 2, :, 4] == 0)
    m = fit_cnn(nn.CnnConfig(height=9, channels=3), aug, nn.TrainConfig(epochs=1))
    assert m.params["conv1_w"].shape == (64, 3, 3, 3)
    with pytest.raises(DataError):
        three_channel_augment(ws, Dataset(ref_X[:1], [1]))
    with pytest.raises(DataError):
        three_channel_augment(ws, np.empty((0, 23)))


def test_predict_is_pure():
    X, y = toy()
    m = fit_model("mlp", (X, y))
    before = {k: v.copy() for k, v in m.params.items()}
    Xc = X.copy()
    a, b = predict(m, X), predict(m, X)
    assert np.array_equal(a.scores, b.scores) and np.array_equal(X, Xc)
    assert all(np.array_equal(before[k], m.params[k]) for k in before)


# -- checkpoints -----------------------------------------------------------

@pytest.mark.parametrize("kind", ["lr", "svm", "knn", "dt", "rf", "mlp"])
def test_checkpoint_roundtrip(kind, tmp_path):
    X, y = toy(60)
    m = fit_model(kind, (X, y), {"n_trees": 5} if kind == "rf" else None)
    path = tmp_path / f"{kind}.ckpt"
    checkpoint.save(m, path)
    back = checkpoint.load(path)
    assert back.kind is m.kind and back.hyper == m.hyper
    assert np.array_equal(predict(back, X).scores, predict(m, X).scores)
    txt = path.with_suffix(".txt").read_text()
    assert txt.startswith(f"kind: {m.kind.name}") and "parameters:" in txt


def test_checkpoint_cnn_and_magic(tmp_path):
    ws = _windows(4)
    m = fit_cnn(nn.CnnConfig(height=9, filters=(2, 3), hidden=4), ws, nn.TrainConfig(epochs=1))
    back = checkpoint.loads(checkpoint.dumps(m))
    assert np.array_equal(predict(back, ws.X).scores, predict(m, ws.X).scores)
    assert "final_loss" in checkpoint.summary(m)
    with pytest.raises(ValueError):
        checkpoint.loads(b"NOTACKPT" + b"\0" * 20)
