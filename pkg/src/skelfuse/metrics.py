"""Top-1 accuracy, confusion matrices and their heatmap rendering.

Predictions are per-row argmax with ties going to the lowest class index,
the convention used everywhere in this package. The confusion matrix is
[true, predicted] with integer counts; rendering row-normalizes so each
row shows the distribution of predictions for that true class.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AlignmentError
from .fusion import ScoreMatrix


@dataclass
class Metrics:
    """Top-1 accuracy plus the [true, predicted] count matrix."""

    top1: float
    confusion: np.ndarray

    def __post_init__(self):
        self.confusion = np.asarray(self.confusion, dtype=np.int64)
        if self.confusion.ndim != 2 or self.confusion.shape[0] != self.confusion.shape[1]:
            raise ValueError(f"confusion must be square, got {self.confusion.shape}")
        if (self.confusion < 0).any():
            raise ValueError("confusion counts must be nonnegative")
        if not 0.0 <= self.top1 <= 1.0:
            raise ValueError(f"top1 must lie in [0, 1], got {self.top1}")

    @property
    def num_classes(self) -> int:
        return self.confusion.shape[0]

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


def evaluate(scores: ScoreMatrix, labels: dict[str, int]) -> Metrics:
    """Score predictions against labels keyed by sample id."""
    missing = [sid for sid in scores.sample_ids if sid not in labels]
    if missing:
        raise AlignmentError(
            f"no label for sample ids {missing[:5]}"
            + (" ..." if len(missing) > 5 else ""))
    k = scores.num_classes
    y = np.asarray([labels[sid] for sid in scores.sample_ids], dtype=np.int64)
    if len(y) and (y.min() < 0 or y.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got range "
                         f"[{y.min()}, {y.max()}]")
    preds = scores.logits.argmax(axis=1)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, preds), 1)
    top1 = float((preds == y).mean()) if len(y) else 0.0
    return Metrics(top1=top1, confusion=confusion)


def plot_confusion(metrics: Metrics, path: str | Path,
                   class_names: list[str] | None = None,
                   title: str | None = None) -> None:
    """Render the row-normalized confusion matrix as a raster heatmap.

    Empty rows (classes with no samples) render as zeros. The figure size is
    fixed (5 x 4 inches at 100 dpi) so output dimensions are reproducible.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    counts = metrics.confusion.astype(np.float64)
    row_sums = counts.sum(axis=1, keepdims=True)
    norm = np.divide(counts, row_sums, out=np.zeros_like(counts),
                     where=row_sums > 0)
    k = metrics.num_classes
    names = class_names if class_names is not None else [str(i) for i in range(k)]
    if len(names) != k:
        raise ValueError(f"{len(names)} class names for {k} classes")
    fig, ax = plt.subplots(figsize=(5, 4), dpi=100)
    image = ax.imshow(norm, cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_xticks(range(k), names)
    ax.set_yticks(range(k), names)
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax, fraction=0.046)
    try:
        fig.savefig(path)
    finally:
        plt.close(fig)
