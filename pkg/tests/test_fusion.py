"""Score containers, weighted late fusion, grid search and the CSV format."""
from __future__ import annotations

import numpy as np
import pytest

from skelfuse import (AlignmentError, DimensionError, FormatError,
                      FusionWeights, ScoreMatrix, fuse_scores,
                      grid_search_weights, read_scores, softmax_scores,
                      write_scores)

RNG = np.random.default_rng(31)


def make_stream(logits, ids=None, name="s"):
    logits = np.asarray(logits, dtype=np.float64)
    if ids is None:
        ids = [f"id{i}" for i in range(logits.shape[0])]
    return ScoreMatrix(sample_ids=ids, logits=logits, stream_name=name)


def test_score_matrix_validation():
    with pytest.raises(DimensionError):
        ScoreMatrix(sample_ids=["a"], logits=np.zeros(3))
    with pytest.raises(DimensionError):
        ScoreMatrix(sample_ids=["a"], logits=np.zeros((1, 1)))
    with pytest.raises(DimensionError):
        ScoreMatrix(sample_ids=["a", "b"], logits=np.zeros((3, 2)))
    with pytest.raises(AlignmentError):
        ScoreMatrix(sample_ids=["a", "a"], logits=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ScoreMatrix(sample_ids=["a"], logits=np.asarray([[np.nan, 0.0]]))


def test_fusion_weights_validation():
    assert len(FusionWeights(weights=(0.5, 0.5))) == 2
    with pytest.raises(ValueError):
        FusionWeights(weights=())
    with pytest.raises(ValueError):
        FusionWeights(weights=(0.5, -0.1))
    with pytest.raises(ValueError):
        FusionWeights(weights=(0.0, 0.0))


def test_fuse_one_hot_weights_copy_first_stream():
    a = make_stream(RNG.normal(size=(4, 3)), name="a")
    b = make_stream(RNG.normal(size=(4, 3)), name="b")
    fused = fuse_scores([a, b], FusionWeights(weights=(1.0, 0.0)))
    assert fused.logits.tobytes() == a.logits.tobytes()
    assert fused.sample_ids == a.sample_ids


def test_fuse_is_linear():
    a = make_stream([[2.0, 0.0]])
    b = make_stream([[0.0, 2.0]])
    fused = fuse_scores([a, b], FusionWeights(weights=(0.5, 0.5)))
    assert (fused.logits == [[1.0, 1.0]]).all()


def test_fuse_three_streams_matches_loop_oracle():
    streams = [make_stream(RNG.normal(size=(5, 4)), name=f"s{i}")
               for i in range(3)]
    w = (0.3, 0.5, 0.2)
    fused = fuse_scores(streams, FusionWeights(weights=w))
    for n in range(5):
        for k in range(4):
            want = sum(w[s] * streams[s].logits[n, k] for s in range(3))
            assert fused.logits[n, k] == pytest.approx(want, rel=0,
                                                       abs=1e-12)


def test_fuse_aligns_rows_by_sample_id():
    ids = ["a", "b", "c"]
    la = RNG.normal(size=(3, 2))
    lb = RNG.normal(size=(3, 2))
    perm = [2, 0, 1]
    a = make_stream(la, ids=ids)
    b = make_stream(lb[perm], ids=[ids[i] for i in perm])
    fused = fuse_scores([a, b], FusionWeights(weights=(1.0, 1.0)))
    assert fused.sample_ids == ids
    assert np.allclose(fused.logits, la + lb, rtol=0, atol=1e-15)


def test_fuse_stream_order_permutation():
    a = make_stream(RNG.normal(size=(3, 2)), name="a")
    b = make_stream(RNG.normal(size=(3, 2)), name="b")
    ab = fuse_scores([a, b], FusionWeights(weights=(0.3, 0.7)))
    ba = fuse_scores([b, a], FusionWeights(weights=(0.7, 0.3)))
    assert np.allclose(ab.logits, ba.logits, rtol=0, atol=1e-15)


def test_fuse_errors():
    a = make_stream(np.zeros((2, 2)), ids=["a", "b"])
    with pytest.raises(DimensionError):
        fuse_scores([a], FusionWeights(weights=(1.0, 1.0)))
    with pytest.raises(AlignmentError):
        fuse_scores([a, make_stream(np.zeros((2, 2)), ids=["a", "z"])],
                    FusionWeights(weights=(1.0, 1.0)))
    with pytest.raises(DimensionError):
        fuse_scores([a, make_stream(np.zeros((2, 3)), ids=["a", "b"])],
                    FusionWeights(weights=(1.0, 1.0)))
    with pytest.raises(ValueError):
        fuse_scores([], FusionWeights(weights=(1.0,)))


def test_softmax_uniform_row():
    out = softmax_scores(make_stream([[0.0, 0.0]]))
    assert (out.logits == [[0.5, 0.5]]).all()


def test_softmax_shift_invariance_and_oracle():
    logits = RNG.normal(size=(4, 3)) * 3.0
    base = softmax_scores(make_stream(logits))
    shifted = softmax_scores(make_stream(logits + 7.0))
    assert np.abs(base.logits - shifted.logits).max() < 1e-9
    assert np.abs(base.logits.sum(axis=1) - 1.0).max() < 1e-7
    for n in range(4):
        e = np.exp(logits[n] - logits[n].max())
        assert np.allclose(base.logits[n], e / e.sum(), rtol=0, atol=1e-12)
    assert (base.logits.argmax(axis=1) == logits.argmax(axis=1)).all()


def test_grid_search_single_stream():
    # every positive weight scales logits without moving the argmax, so
    # all grid points tie and the smallest one wins the lexicographic rule
    logits = RNG.normal(size=(6, 3))
    stream = make_stream(logits)
    labels = {f"id{i}": int(RNG.integers(0, 3)) for i in range(6)}
    w, acc = grid_search_weights([stream], labels)
    assert w.weights == (0.1,)
    y = np.asarray([labels[f"id{i}"] for i in range(6)])
    assert acc == (logits.argmax(axis=1) == y).mean()


def test_grid_search_endpoint_dominance():
    # stream a is right everywhere, stream b is pure noise
    labels = {f"id{i}": i % 3 for i in range(9)}
    la = np.zeros((9, 3))
    la[np.arange(9), [labels[f"id{i}"] for i in range(9)]] = 5.0
    a = make_stream(la, name="a")
    b = make_stream(RNG.normal(size=(9, 3)), name="b")
    _, acc = grid_search_weights([a, b], labels)
    assert acc == 1.0


def test_grid_search_tie_break_is_lexicographic():
    # each stream is right on exactly one sample and every grid point
    # scores 0.5, so the smallest nonzero vector (0, step) must win
    a = make_stream([[2.0, 0.0], [2.0, 0.0]], ids=["p", "q"], name="a")
    b = make_stream([[0.0, 2.0], [0.0, 2.0]], ids=["p", "q"], name="b")
    labels = {"p": 0, "q": 1}
    w, acc = grid_search_weights([a, b], labels, grid_step=0.1)
    assert acc == 0.5
    assert w.weights == (0.0, 0.1)


def test_grid_search_never_below_best_single_stream():
    labels = {f"id{i}": int(RNG.integers(0, 3)) for i in range(12)}
    streams = [make_stream(RNG.normal(size=(12, 3)), name=f"s{i}")
               for i in range(3)]
    _, acc = grid_search_weights(streams, labels, grid_step=0.5)
    y = np.asarray([labels[f"id{i}"] for i in range(12)])
    for s in streams:
        assert acc >= (s.logits.argmax(axis=1) == y).mean()


def test_grid_step_not_dividing_one_still_works():
    # 0.3 does not divide 1 evenly; the grid tops out at an appended 1.0
    stream = make_stream(RNG.normal(size=(4, 2)))
    labels = {f"id{i}": 0 for i in range(4)}
    w, _ = grid_search_weights([stream], labels, grid_step=0.3)
    assert w.weights == (0.3,)


def test_grid_search_can_beat_both_single_streams():
    # each stream alone is right on one sample of three; an equal mix is
    # right on all three, so the search must leave the endpoints
    a = make_stream([[2.0, 3.0, 0.0], [0.0, 5.0, 1.0], [4.0, 0.0, 1.0]],
                    ids=["x", "y", "z"], name="a")
    b = make_stream([[2.0, 0.0, 3.0], [3.0, 2.0, 1.0], [0.0, 1.0, 5.0]],
                    ids=["x", "y", "z"], name="b")
    labels = {"x": 0, "y": 1, "z": 2}
    y = np.asarray([0, 1, 2])
    assert (a.logits.argmax(axis=1) == y).mean() == pytest.approx(1 / 3)
    assert (b.logits.argmax(axis=1) == y).mean() == pytest.approx(1 / 3)
    w, acc = grid_search_weights([a, b], labels)
    assert acc == 1.0
    assert w.weights[0] > 0 and w.weights[1] > 0


def test_fused_argmax_invariant_under_joint_weight_scaling():
    streams = [make_stream(RNG.normal(size=(10, 4)), name=f"s{i}")
               for i in range(2)]
    base = fuse_scores(streams, FusionWeights(weights=(0.3, 0.7)))
    scaled = fuse_scores(streams, FusionWeights(weights=(0.75, 1.75)))
    assert (base.logits.argmax(axis=1) == scaled.logits.argmax(axis=1)).all()


def test_grid_search_guards():
    stream = make_stream(np.zeros((2, 2)), ids=["a", "b"])
    with pytest.raises(ValueError):
        grid_search_weights([stream], {"a": 0, "b": 0}, grid_step=0.0)
    with pytest.raises(ValueError):
        grid_search_weights([stream], {"a": 0, "b": 0}, grid_step=1.5)
    with pytest.raises(AlignmentError):
        grid_search_weights([stream], {"a": 0})
    with pytest.raises(ValueError):
        grid_search_weights([stream], {"a": 0, "b": 5})


def test_scores_csv_roundtrip_is_lossless(tmp_path):
    s = make_stream(RNG.normal(size=(5, 3)) * 1e3, name="joint")
    path = tmp_path / "joint.csv"
    write_scores(path, s)
    back = read_scores(path)
    assert back.logits.tobytes() == s.logits.tobytes()
    assert back.sample_ids == s.sample_ids
    assert back.stream_name == "joint"
    assert read_scores(path, stream_name="xy").stream_name == "xy"
    header = path.read_text().splitlines()[0]
    assert header == "sample_id,c0,c1,c2"


@pytest.mark.parametrize("text", [
    "",
    "sample_id,c0\nid0,1.0\n",
    "sample,c0,c1\nid0,1.0,2.0\n",
    "sample_id,c0,c2\nid0,1.0,2.0\n",
    "sample_id,c0,c1\nid0,1.0\n",
    "sample_id,c0,c1\nid0,1.0,oops\n",
    "sample_id,c0,c1\nid0,1.0,inf\n",
    "sample_id,c0,c1\nid0,1.0,2.0\nid0,3.0,4.0\n",
])
def test_scores_csv_rejects_malformed(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(FormatError):
        read_scores(path)
