"""Derived skeleton modalities: bone, motion and two-hop bone streams.

All derivations preserve the ``[M, T, V, C]`` layout so every downstream
model consumes any modality unchanged.

- bone ``B``: joint minus its parent joint; the root bone is zero.
- motion ``JM``/``BM``: next frame minus current frame, last frame zero.
- two-hop bone ``K2``: joint minus its grandparent (parent of parent),
  capturing a longer-range limb vector; roots and their children give zero
  or a one-hop bone respectively by the same parent-chain rule.
- ``K2M``: frame difference of ``K2``.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, ModalityError
from .sequence import MODALITIES, SkeletonSequence
from .topology import Topology


def _check_joints(seq: SkeletonSequence, topology: Topology) -> None:
    if seq.num_joints != topology.num_joints:
        raise DimensionError(
            f"sequence has {seq.num_joints} joints but topology "
            f"{topology.name!r} defines {topology.num_joints}")


def derive_bone(seq: SkeletonSequence, topology: Topology) -> SkeletonSequence:
    """Bone vectors: ``data[..., v, :] - data[..., parent[v], :]``."""
    if seq.modality != "J":
        raise ModalityError(f"bone derivation expects modality J, got {seq.modality}")
    _check_joints(seq, topology)
    parent = topology.parent_index()
    bone = seq.data - seq.data[:, :, parent, :]
    return seq.with_data(bone, modality="B")


def derive_k2(seq: SkeletonSequence, topology: Topology) -> SkeletonSequence:
    """Two-hop bone vectors: joint minus grandparent joint."""
    if seq.modality != "J":
        raise ModalityError(f"k2 derivation expects modality J, got {seq.modality}")
    _check_joints(seq, topology)
    parent2 = topology.parent2_index()
    k2 = seq.data - seq.data[:, :, parent2, :]
    return seq.with_data(k2, modality="K2")


def _frame_difference(data: np.ndarray) -> np.ndarray:
    out = np.zeros_like(data)
    out[:, :-1] = data[:, 1:] - data[:, :-1]
    return out


def derive_joint_motion(seq: SkeletonSequence) -> SkeletonSequence:
    """Temporal difference of joints; the last frame is zero-padded."""
    if seq.modality != "J":
        raise ModalityError(f"joint motion expects modality J, got {seq.modality}")
    return seq.with_data(_frame_difference(seq.data), modality="JM")


def derive_bone_motion(seq: SkeletonSequence, topology: Topology) -> SkeletonSequence:
    """Temporal difference of bone vectors (bone first, then difference)."""
    bone = derive_bone(seq, topology)
    return seq.with_data(_frame_difference(bone.data), modality="BM")


def derive_k2_motion(seq: SkeletonSequence, topology: Topology) -> SkeletonSequence:
    """Temporal difference of two-hop bone vectors."""
    k2 = derive_k2(seq, topology)
    return seq.with_data(_frame_difference(k2.data), modality="K2M")


def derive_modality(seq: SkeletonSequence, modality: str,
                    topology: Topology) -> SkeletonSequence:
    """Dispatch a modality name to its derivation; ``J`` is a copy."""
    if modality == "J":
        return seq.with_data(seq.data.copy())
    if modality == "B":
        return derive_bone(seq, topology)
    if modality == "JM":
        return derive_joint_motion(seq)
    if modality == "BM":
        return derive_bone_motion(seq, topology)
    if modality == "K2":
        return derive_k2(seq, topology)
    if modality == "K2M":
        return derive_k2_motion(seq, topology)
    raise ModalityError(f"unknown modality {modality!r}")
