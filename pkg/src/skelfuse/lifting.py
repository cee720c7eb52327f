"""2D-to-3D pose lifting boundary.

A lifter is any callable turning a C=2 joint sequence into a C=3 one while
preserving persons, frames and joints. Only the interface and a trivial
zero-z stub live here; real lifted poses come from files produced offline
and enter through ``load_precomputed_3d``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, DimensionError, FormatError, ModalityError
from .sequence import SkeletonSequence, read_skl1


@dataclass
class PoseLifter:
    """Named 2D → 3D sequence transform."""

    name: str
    lift: Callable[[SkeletonSequence], SkeletonSequence]


def zero_z_lifter() -> PoseLifter:
    """Lifter that appends a zero third channel: (x, y) -> (x, y, 0)."""

    def lift(seq: SkeletonSequence) -> SkeletonSequence:
        zeros = np.zeros(seq.data.shape[:3] + (1,), dtype=seq.data.dtype)
        return seq.with_data(np.concatenate([seq.data, zeros], axis=3))

    return PoseLifter(name="zero_z", lift=lift)


def lift_to_3d(seq: SkeletonSequence, lifter: PoseLifter) -> SkeletonSequence:
    """Apply a lifter and enforce its output contract."""
    if seq.channels != 2:
        raise DimensionError(f"lifting expects C=2 input, got C={seq.channels}")
    if seq.modality != "J":
        raise ModalityError(f"lifting expects modality J, got {seq.modality}")
    out = lifter.lift(seq)
    if not isinstance(out, SkeletonSequence):
        raise ContractError(f"lifter {lifter.name!r} returned {type(out).__name__}")
    if out.data.shape[:3] != seq.data.shape[:3]:
        raise ContractError(
            f"lifter {lifter.name!r} changed [M, T, V] from "
            f"{seq.data.shape[:3]} to {out.data.shape[:3]}")
    if out.channels != 3:
        raise ContractError(f"lifter {lifter.name!r} emitted C={out.channels}, want 3")
    if not np.isfinite(out.data).all():
        raise ContractError(f"lifter {lifter.name!r} emitted non-finite values")
    return out


def load_precomputed_3d(path) -> SkeletonSequence:
    """Read an SKL1 file that must carry 3-channel data."""
    seq = read_skl1(path)
    if seq.channels != 3:
        raise FormatError(f"{path}: expected C=3 pose data, got C={seq.channels}")
    return seq
