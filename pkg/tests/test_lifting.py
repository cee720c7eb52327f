"""The 2D-to-3D lifting boundary and its output contract."""
from __future__ import annotations

import numpy as np
import pytest

from skelfuse import (ContractError, DimensionError, FormatError,
                      ModalityError, PoseLifter, SkeletonSequence,
                      lift_to_3d, load_precomputed_3d, write_skl1,
                      zero_z_lifter)
from skelfuse.lifting import PoseLifter as _PoseLifter

RNG = np.random.default_rng(31)


def flat_seq(m=1, t=3, v=4):
    return SkeletonSequence(data=RNG.normal(size=(m, t, v, 2)),
                            sample_id="p", label=0)


def test_zero_z_appends_zero_channel():
    seq = flat_seq(m=2, t=5, v=6)
    out = lift_to_3d(seq, zero_z_lifter())
    assert out.channels == 3
    assert out.data.shape[:3] == seq.data.shape[:3]
    assert (out.data[..., :2] == seq.data).all()
    assert (out.data[..., 2] == 0.0).all()
    assert out.sample_id == seq.sample_id
    assert out.label == seq.label


def test_lift_requires_2d_joint_input():
    three_d = SkeletonSequence(data=np.zeros((1, 2, 3, 3)))
    with pytest.raises(DimensionError):
        lift_to_3d(three_d, zero_z_lifter())
    bone = flat_seq().with_data(np.zeros((1, 3, 4, 2)), modality="B")
    with pytest.raises(ModalityError):
        lift_to_3d(bone, zero_z_lifter())


def test_lifter_contract_enforced():
    seq = flat_seq()
    with pytest.raises(ContractError):
        lift_to_3d(seq, PoseLifter(name="junk", lift=lambda s: s.data))
    with pytest.raises(ContractError):
        # keeps C=2, violating the 3-channel promise
        lift_to_3d(seq, PoseLifter(name="flat", lift=lambda s: s.with_data(s.data)))

    def drops_frames(s):
        zeros = np.zeros(s.data.shape[:3] + (1,))
        lifted = np.concatenate([s.data, zeros], axis=3)
        return s.with_data(lifted[:, :-1])

    with pytest.raises(ContractError):
        lift_to_3d(seq, PoseLifter(name="short", lift=drops_frames))


def test_pose_lifter_export_is_single_type():
    assert PoseLifter is _PoseLifter


def test_load_precomputed_requires_three_channels(tmp_path):
    seq3 = SkeletonSequence(data=RNG.normal(size=(1, 2, 3, 3)).astype(np.float32),
                            sample_id="deep", label=2)
    path = tmp_path / "deep.skl1"
    write_skl1(seq3, path)
    back = load_precomputed_3d(path)
    assert back.channels == 3
    assert (back.data == seq3.data.astype(np.float32)).all()

    flat = tmp_path / "flat.skl1"
    write_skl1(flat_seq(), flat)
    with pytest.raises(FormatError):
        load_precomputed_3d(flat)
