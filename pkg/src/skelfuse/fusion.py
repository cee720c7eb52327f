"""Late fusion of per-stream classification scores.

Streams are fused as a weighted sum of raw logits, aligned by sample id
(never row position); softmax comes after fusion. Fusion weights are found
by exhaustive grid search on labeled validation scores; one-hot weight
vectors are always on the grid, so fused accuracy can never fall below the
best single stream.

Score CSV format: header ``sample_id,c0,...,c{K-1}``, one row per sample,
floats printed at 17 significant digits so a write/read round-trip is
lossless.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AlignmentError, DimensionError, FormatError

_GRID_CHUNK = 4096


@dataclass
class ScoreMatrix:
    """Per-sample, per-class logits for one stream."""

    sample_ids: list[str]
    logits: np.ndarray
    stream_name: str = ""

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 2:
            raise DimensionError(f"logits must be [N, K], got {self.logits.shape}")
        if self.logits.shape[1] < 2:
            raise DimensionError(
                f"need at least 2 classes, got {self.logits.shape[1]}")
        if len(self.sample_ids) != self.logits.shape[0]:
            raise DimensionError(
                f"{len(self.sample_ids)} ids for {self.logits.shape[0]} rows")
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise AlignmentError("duplicate sample ids in score matrix")
        if not np.isfinite(self.logits).all():
            raise ValueError(f"stream {self.stream_name!r} has non-finite logits")

    @property
    def num_classes(self) -> int:
        return self.logits.shape[1]

    def __len__(self) -> int:
        return len(self.sample_ids)


@dataclass
class FusionWeights:
    """Nonnegative per-stream weights, at least one positive."""

    weights: tuple[float, ...]

    def __post_init__(self):
        self.weights = tuple(float(w) for w in self.weights)
        if not self.weights:
            raise ValueError("need at least one weight")
        if any(w < 0 for w in self.weights):
            raise ValueError(f"weights must be nonnegative, got {self.weights}")
        if not any(w > 0 for w in self.weights):
            raise ValueError("at least one weight must be positive")

    def __len__(self) -> int:
        return len(self.weights)


def _aligned_logits(streams: list[ScoreMatrix]) -> np.ndarray:
    """Stack stream logits as [S, N, K], rows aligned to the first stream."""
    if not streams:
        raise ValueError("need at least one stream")
    first = streams[0]
    k = first.num_classes
    ref_ids = first.sample_ids
    ref_set = set(ref_ids)
    stacked = np.empty((len(streams), len(ref_ids), k))
    stacked[0] = first.logits
    for s, stream in enumerate(streams[1:], start=1):
        if stream.num_classes != k:
            raise DimensionError(
                f"stream {stream.stream_name!r} has K={stream.num_classes}, "
                f"first stream has K={k}")
        if set(stream.sample_ids) != ref_set:
            raise AlignmentError(
                f"stream {stream.stream_name!r} covers different sample ids "
                f"than {first.stream_name!r}")
        index = {sid: row for row, sid in enumerate(stream.sample_ids)}
        order = np.asarray([index[sid] for sid in ref_ids])
        stacked[s] = stream.logits[order]
    return stacked


def fuse_scores(streams: list[ScoreMatrix], w: FusionWeights) -> ScoreMatrix:
    """Weighted sum of logits across streams, aligned by sample id."""
    if len(w) != len(streams):
        raise DimensionError(f"{len(w)} weights for {len(streams)} streams")
    stacked = _aligned_logits(streams)
    fused = np.einsum("s,snk->nk", np.asarray(w.weights), stacked)
    name = "+".join(s.stream_name or f"stream{i}" for i, s in enumerate(streams))
    return ScoreMatrix(sample_ids=list(streams[0].sample_ids), logits=fused,
                       stream_name=f"fused({name})")


def softmax_scores(s: ScoreMatrix) -> ScoreMatrix:
    """Max-shifted softmax per row; rows become probabilities."""
    shifted = s.logits - s.logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    return ScoreMatrix(sample_ids=list(s.sample_ids), logits=probs,
                       stream_name=s.stream_name)


def _labels_for(ids: list[str], labels: dict[str, int]) -> np.ndarray:
    missing = [sid for sid in ids if sid not in labels]
    if missing:
        raise AlignmentError(
            f"no label for sample ids {missing[:5]}"
            + (" ..." if len(missing) > 5 else ""))
    return np.asarray([labels[sid] for sid in ids], dtype=np.int64)


def grid_search_weights(streams: list[ScoreMatrix], labels: dict[str, int],
                        grid_step: float = 0.1) -> tuple[FusionWeights, float]:
    """Exhaustive weight search on the grid {0, step, ..., 1} per stream.

    Returns the weight vector with the highest top-1 accuracy; ties go to
    the lexicographically smallest vector (the all-zero point is excluded).
    1.0 is always a grid value, so every one-hot vector is a candidate and
    the result is at least as accurate as the best single stream.
    """
    if not 0 < grid_step <= 1:
        raise ValueError(f"grid_step must be in (0, 1], got {grid_step}")
    stacked = _aligned_logits(streams)
    y = _labels_for(streams[0].sample_ids, labels)
    if y.max(initial=0) >= stacked.shape[2]:
        raise ValueError(
            f"label {y.max()} out of range for K={stacked.shape[2]}")
    values = [0.0]
    while values[-1] + grid_step <= 1.0 + 1e-12:
        values.append(round(values[-1] + grid_step, 12))
    if values[-1] != 1.0:
        values.append(1.0)
    n = len(y)
    best_acc = -1.0
    best_w: tuple[float, ...] | None = None
    combos = itertools.product(values, repeat=len(streams))
    while True:
        chunk = list(itertools.islice(combos, _GRID_CHUNK))
        if not chunk:
            break
        w_mat = np.asarray(chunk)
        keep = w_mat.any(axis=1)
        if not keep.any():
            continue
        w_mat = w_mat[keep]
        fused = np.einsum("cs,snk->cnk", w_mat, stacked)
        preds = fused.argmax(axis=2)
        accs = (preds == y).sum(axis=1) / n
        # chunk order is lexicographic, so the first strict improvement wins
        idx = int(np.argmax(accs))
        if accs[idx] > best_acc:
            best_acc = float(accs[idx])
            best_w = tuple(w_mat[idx])
    assert best_w is not None
    return FusionWeights(weights=best_w), best_acc


def write_scores(path: str | Path, s: ScoreMatrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id"] + [f"c{i}" for i in range(s.num_classes)])
        for sid, row in zip(s.sample_ids, s.logits):
            writer.writerow([sid] + [format(x, ".17g") for x in row])


def read_scores(path: str | Path, stream_name: str | None = None) -> ScoreMatrix:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty score file")
    header = rows[0]
    if len(header) < 3 or header[0] != "sample_id":
        raise FormatError(f"{path}: bad header {header!r}")
    k = len(header) - 1
    if header[1:] != [f"c{i}" for i in range(k)]:
        raise FormatError(f"{path}: bad header {header!r}")
    ids = []
    logits = np.empty((len(rows) - 1, k))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != k + 1:
            raise FormatError(f"{path}:{i}: expected {k + 1} columns, got {len(row)}")
        ids.append(row[0])
        try:
            logits[i - 2] = [float(x) for x in row[1:]]
        except ValueError as exc:
            raise FormatError(f"{path}:{i}: non-numeric score") from exc
    if not np.isfinite(logits).all():
        raise FormatError(f"{path}: non-finite scores")
    try:
        return ScoreMatrix(sample_ids=ids, logits=logits,
                           stream_name=stream_name or path.stem)
    except (DimensionError, AlignmentError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
