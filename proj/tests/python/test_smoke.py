"""Smoke tests for the python bindings."""

import os
import sys

import numpy as np
import pytest

_mod_dir = os.environ.get("SDI_PYMODULE_DIR")
if _mod_dir:
    sys.path.insert(0, _mod_dir)

core = pytest.importorskip("_core") if _mod_dir else pytest.importorskip("solardefect")


def test_conv2d_matches_numpy_oracle():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((6, 6, 2)).astype(np.float32)
    k = rng.standard_normal((3, 2, 3, 3)).astype(np.float32)
    b = rng.standard_normal(3).astype(np.float32)
    out = core.conv2d(x, k, b)
    assert out.shape == (6, 6, 3)
    pad = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    for y in range(6):
        for xx in range(6):
            patch = pad[y : y + 3, xx : xx + 3, :]  # H x W x C
            for o in range(3):
                want = b[o] + np.sum(patch * k[o].transpose(1, 2, 0))
                assert abs(out[y, xx, o] - want) < 1e-4


def test_pool_relu_softmax():
    x = np.array([[[1.0], [2.0]], [[3.0], [4.0]]], dtype=np.float32)
    assert core.maxpool2d(x).ravel().tolist() == [4.0]
    r = core.relu(np.array([-1.0, 0.5], dtype=np.float32))
    assert r.tolist() == [0.0, 0.5]
    p = core.softmax([2.0, 0.0])
    assert abs(p[0] - 0.8808) < 1e-4
    assert abs(sum(p) - 1.0) < 1e-9


def test_model_train_save_load(tmp_path):
    data = core.synth_dataset(side=32, count=4, seed=3)
    images = [img for img, _ in data]
    labels = [0 if cls == 0 else 1 for _, cls in data]
    model = core.Model.build("s1", classes=2, input_side=32, fc1=16, fc2=8, seed=5)
    loss = model.train(images, labels, eta=1e-3, dropout=0.0, batch_size=4, iterations=30, seed=7)
    assert np.isfinite(loss)
    probs = model.classify(images[0])
    assert len(probs) == 2
    assert abs(sum(probs) - 1.0) < 1e-5

    path = str(tmp_path / "model.sdm")
    model.save(path, "smoke")
    loaded = core.Model.load(path)
    assert loaded.arch == "s1"
    assert loaded.classes == 2
    assert loaded.classify(images[0]) == probs


def test_features_and_metrics():
    gray = np.random.default_rng(2).random((48, 48))
    assert len(core.lbp_features(gray)) == 12 * 12 * 256
    assert len(core.gabor_features(gray)) == 4000
    hog = core.hog_features(np.random.default_rng(3).random((64, 64)))
    assert len(hog) > 0

    scores = [0.9, 0.8, 0.2, 0.1]
    truth = [1, 1, 0, 0]
    points, auc = core.roc(scores, truth)
    assert auc == pytest.approx(1.0)
    assert points[0][1] == 0.0

    s = core.prf([1, 1, 0, 0], [1, 0, 0, 0])
    assert s["tp"] == 1
    assert s["fp"] == 1
    assert s["precision"] == pytest.approx(0.5)


def test_kfold_partition():
    labels = [0] * 10 + [1] * 10
    folds = core.stratified_kfold(labels, 5, seed=4)
    seen = sorted(i for fold in folds for i in fold)
    assert seen == list(range(20))
    for fold in folds:
        assert sum(labels[i] for i in fold) == 2  # one per class


def test_slide_positions():
    assert core.slide_positions(1868) == [0, 235, 470, 705, 940, 1175, 1399]
