"""Accuracy, confusion counting, and the heatmap artifact."""
from __future__ import annotations

import struct

import numpy as np
import pytest

from skelfuse import (AlignmentError, Metrics, ScoreMatrix, evaluate,
                      plot_confusion)

RNG = np.random.default_rng(61)


def stream(logits, ids=None):
    logits = np.asarray(logits, dtype=np.float64)
    if ids is None:
        ids = [f"id{i}" for i in range(logits.shape[0])]
    return ScoreMatrix(sample_ids=ids, logits=logits, stream_name="t")


def test_one_hot_scores_are_perfect():
    labels = {f"id{i}": i % 3 for i in range(6)}
    logits = np.zeros((6, 3))
    logits[np.arange(6), [labels[f"id{i}"] for i in range(6)]] = 1.0
    m = evaluate(stream(logits), labels)
    assert m.top1 == 1.0
    assert (m.confusion == np.diag([2, 2, 2])).all()
    assert m.total == 6
    assert m.num_classes == 3


def test_tied_rows_predict_the_lowest_class():
    labels = {"id0": 1, "id1": 2}
    m = evaluate(stream(np.zeros((2, 3))), labels)
    assert m.top1 == 0.0
    assert m.confusion[1, 0] == 1
    assert m.confusion[2, 0] == 1


def test_evaluate_matches_loop_oracle():
    logits = RNG.normal(size=(20, 4))
    y = RNG.integers(0, 4, size=20)
    labels = {f"id{i}": int(y[i]) for i in range(20)}
    m = evaluate(stream(logits), labels)
    confusion = np.zeros((4, 4), dtype=int)
    hits = 0
    for i in range(20):
        pred = int(np.argmax(logits[i]))
        confusion[y[i], pred] += 1
        hits += pred == y[i]
    assert (m.confusion == confusion).all()
    assert m.top1 == hits / 20
    assert m.confusion.sum() == 20
    # per-class row sums are the true class counts
    assert (m.confusion.sum(axis=1) == np.bincount(y, minlength=4)).all()
    # diagonal over total reproduces top-1
    assert np.trace(m.confusion) / m.total == m.top1


def test_evaluate_guards():
    with pytest.raises(AlignmentError):
        evaluate(stream(np.zeros((2, 3))), {"id0": 0})
    with pytest.raises(ValueError):
        evaluate(stream(np.zeros((2, 3))), {"id0": 0, "id1": 3})


def test_metrics_validation():
    with pytest.raises(ValueError):
        Metrics(top1=0.5, confusion=np.zeros((2, 3), dtype=int))
    with pytest.raises(ValueError):
        Metrics(top1=0.5, confusion=np.asarray([[1, -1], [0, 0]]))
    with pytest.raises(ValueError):
        Metrics(top1=1.5, confusion=np.zeros((2, 2), dtype=int))


def png_dimensions(path):
    blob = path.read_bytes()
    assert blob[:8] == b"\x89PNG\r\n\x1a\n"
    width, height = struct.unpack(">II", blob[16:24])
    return width, height


def test_plot_writes_fixed_size_png(tmp_path):
    m = Metrics(top1=1.0, confusion=np.diag([3, 3]))
    path = tmp_path / "confusion.png"
    plot_confusion(m, path, title="fused")
    assert png_dimensions(path) == (500, 400)


def test_plot_handles_empty_class_row(tmp_path):
    m = Metrics(top1=0.5, confusion=np.asarray([[2, 0], [0, 0]]))
    path = tmp_path / "empty_row.png"
    plot_confusion(m, path)
    assert path.exists() and path.stat().st_size > 0


def test_plot_class_name_count_guard(tmp_path):
    m = Metrics(top1=1.0, confusion=np.diag([1, 1]))
    with pytest.raises(ValueError):
        plot_confusion(m, tmp_path / "x.png", class_names=["only-one"])
