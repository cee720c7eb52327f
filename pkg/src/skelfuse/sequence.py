"""Skeleton sequence data model, the SKL1 binary format and basic preprocessing.

A sequence is a dense ``[M, T, V, C]`` array (persons, frames, joints,
channels) tagged with a modality. Raw 2D pose is modality ``J`` with C=2;
derived modalities and lifted 3D sequences keep the same layout. Two-person
material uses M=2 with absent persons zero-padded; zero rows are inert under
every derivation.

SKL1 layout: magic ``SKL1``, five little-endian uint32 (M, T, V, C, label
with 0xFFFFFFFF meaning unlabeled), then M*T*V*C little-endian float32 values
in [m][t][v][c] order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, ModalityError

MODALITIES = ("J", "B", "JM", "BM", "K2", "K2M")

SKL1_MAGIC = b"SKL1"
_SKL1_HEADER = struct.Struct("<4s5I")
_NO_LABEL = 0xFFFFFFFF


@dataclass
class SkeletonSequence:
    """One pose sample: ``data[M, T, V, C]`` plus modality tag, id and label."""

    data: np.ndarray
    modality: str = "J"
    sample_id: str = ""
    label: int | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 4:
            raise DimensionError(
                f"sequence data must be [M, T, V, C], got shape {self.data.shape}")
        m, t, v, c = self.data.shape
        if m < 1 or t < 1 or v < 1:
            raise DimensionError(f"M, T, V must all be >= 1, got {(m, t, v)}")
        if c not in (2, 3):
            raise DimensionError(f"channels must be 2 or 3, got {c}")
        if not np.issubdtype(self.data.dtype, np.floating):
            self.data = self.data.astype(np.float64)
        if not np.isfinite(self.data).all():
            raise ValueError(f"sequence {self.sample_id!r} contains non-finite values")
        if self.modality not in MODALITIES:
            raise ModalityError(f"unknown modality {self.modality!r}")

    @property
    def num_persons(self) -> int:
        return self.data.shape[0]

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    @property
    def num_joints(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    def with_data(self, data: np.ndarray, modality: str | None = None) -> "SkeletonSequence":
        """Same id/label, new array (and optionally a new modality tag)."""
        return SkeletonSequence(data=data,
                                modality=modality or self.modality,
                                sample_id=self.sample_id,
                                label=self.label)


@dataclass
class Dataset:
    """Ordered labeled sequences sharing joint count and channel count."""

    sequences: list[SkeletonSequence]
    num_classes: int
    split: str = "train"

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.split not in ("train", "val", "test"):
            raise ValueError(f"split must be train/val/test, got {self.split!r}")
        ids = set()
        shapes = set()
        for seq in self.sequences:
            if seq.label is None or not 0 <= seq.label < self.num_classes:
                raise ValueError(
                    f"sample {seq.sample_id!r} has label {seq.label} outside "
                    f"[0, {self.num_classes})")
            if seq.sample_id in ids:
                raise ValueError(f"duplicate sample_id {seq.sample_id!r}")
            ids.add(seq.sample_id)
            shapes.add((seq.num_joints, seq.channels))
        if len(shapes) > 1:
            raise DimensionError(f"sequences disagree on (V, C): {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.sequences)

    def label_map(self) -> dict[str, int]:
        return {seq.sample_id: seq.label for seq in self.sequences}

    def stack(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """Batch the whole split into (x[B,M,T,V,C], labels[B], ids).

        Requires every sequence to share the full [M, T, V, C] shape.
        """
        if not self.sequences:
            raise ValueError("cannot stack an empty dataset")
        shapes = {seq.data.shape for seq in self.sequences}
        if len(shapes) > 1:
            raise DimensionError(
                f"cannot batch ragged sequences, shapes: {sorted(shapes)}")
        x = np.stack([seq.data for seq in self.sequences])
        y = np.asarray([seq.label for seq in self.sequences], dtype=np.int64)
        ids = [seq.sample_id for seq in self.sequences]
        return x, y, ids

    def map(self, fn) -> "Dataset":
        """Apply a sequence transform to every sample, keeping labels/split."""
        return Dataset(sequences=[fn(s) for s in self.sequences],
                       num_classes=self.num_classes, split=self.split)


def write_skl1(seq: SkeletonSequence, path: str | Path) -> None:
    m, t, v, c = seq.data.shape
    label = _NO_LABEL if seq.label is None else int(seq.label)
    if not 0 <= label <= _NO_LABEL:
        raise ValueError(f"label {seq.label} does not fit the SKL1 header")
    payload = np.ascontiguousarray(seq.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_SKL1_HEADER.pack(SKL1_MAGIC, m, t, v, c, label))
        fh.write(payload)


def read_skl1(path: str | Path, modality: str = "J",
              sample_id: str | None = None) -> SkeletonSequence:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _SKL1_HEADER.size:
        raise FormatError(f"{path}: truncated SKL1 header")
    magic, m, t, v, c, label = _SKL1_HEADER.unpack_from(raw)
    if magic != SKL1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if m < 1 or t < 1 or v < 1 or c not in (2, 3):
        raise FormatError(f"{path}: invalid dimensions M={m} T={t} V={v} C={c}")
    expected = _SKL1_HEADER.size + m * t * v * c * 4
    if len(raw) < expected:
        raise FormatError(f"{path}: truncated payload "
                          f"({len(raw)} bytes, expected {expected})")
    if len(raw) > expected:
        raise FormatError(f"{path}: {len(raw) - expected} trailing bytes")
    data = np.frombuffer(raw, dtype="<f4", offset=_SKL1_HEADER.size)
    data = data.reshape(m, t, v, c).astype(np.float32)
    if not np.isfinite(data).all():
        raise FormatError(f"{path}: non-finite values in payload")
    return SkeletonSequence(
        data=data, modality=modality,
        sample_id=sample_id if sample_id is not None else path.stem,
        label=None if label == _NO_LABEL else int(label))


def resample_sequence(seq: SkeletonSequence, num_frames: int) -> SkeletonSequence:
    """Linearly interpolate along the frame axis to ``num_frames`` frames.

    The identity case (same frame count) returns a bit-exact copy; a single
    input frame is repeated.
    """
    if num_frames < 1:
        raise ValueError(f"target frame count must be >= 1, got {num_frames}")
    t = seq.num_frames
    if num_frames == t:
        return seq.with_data(seq.data.copy())
    if t == 1:
        return seq.with_data(np.repeat(seq.data, num_frames, axis=1))
    if num_frames == 1:
        return seq.with_data(seq.data[:, :1].copy())
    idx = np.arange(num_frames, dtype=np.float64)
    pos = idx * (t - 1) / (num_frames - 1)
    lo = np.minimum(np.floor(pos).astype(np.int64), t - 2)
    w = pos - lo
    x = seq.data.astype(np.float64)
    out = (1.0 - w)[None, :, None, None] * x[:, lo] + w[None, :, None, None] * x[:, lo + 1]
    return seq.with_data(out.astype(seq.data.dtype))


def center_normalize(seq: SkeletonSequence, root_joint: int = 0) -> SkeletonSequence:
    """Center every frame on the root joint, then scale into [-1, 1].

    Per person per frame the root joint's coordinates are subtracted, then
    all coordinates are divided by the sample-wide max absolute value of the
    centered data (skipped when that value is 0, so all-zero input passes
    through unchanged).
    """
    if seq.modality != "J":
        raise ModalityError(f"center_normalize expects modality J, got {seq.modality}")
    if not 0 <= root_joint < seq.num_joints:
        raise ValueError(f"root joint {root_joint} out of range")
    centered = seq.data - seq.data[:, :, root_joint:root_joint + 1, :]
    scale = np.abs(centered).max()
    if scale > 0:
        centered = centered / scale
    return seq.with_data(centered)


def save_dataset_dir(dataset: Dataset, root: str | Path) -> None:
    """Write one SKL1 file per sample under ``root/<split>/`` plus a meta file."""
    root = Path(root)
    split_dir = root / dataset.split
    split_dir.mkdir(parents=True, exist_ok=True)
    meta = root / "meta.txt"
    meta.write_text(f"num_classes = {dataset.num_classes}\n")
    for seq in dataset.sequences:
        write_skl1(seq, split_dir / f"{seq.sample_id}.skl1")


def load_dataset_dir(root: str | Path, split: str) -> Dataset:
    root = Path(root)
    meta = root / "meta.txt"
    if not meta.exists():
        raise FormatError(f"{root}: missing meta.txt")
    fields = {}
    for line in meta.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line and "=" in line:
            key, value = line.split("=", 1)
            fields[key.strip()] = value.strip()
    if "num_classes" not in fields:
        raise FormatError(f"{meta}: missing num_classes")
    num_classes = int(fields["num_classes"])
    split_dir = root / split
    if not split_dir.is_dir():
        raise FormatError(f"{root}: no '{split}' split directory")
    sequences = [read_skl1(p) for p in sorted(split_dir.glob("*.skl1"))]
    if not sequences:
        raise FormatError(f"{split_dir}: no .skl1 files")
    return Dataset(sequences=sequences, num_classes=num_classes, split=split)
