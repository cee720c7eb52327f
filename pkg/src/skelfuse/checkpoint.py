"""Model checkpoints as self-describing npz archives.

The archive stores a format version, a branch tag, the topology (for the
graph branch), the architecture metadata needed to rebuild the model
structurally, and every parameter array under a ``param.`` prefix. Loading
reconstructs the model and optionally rejects joint-count or class-count
mismatches against an expected dataset.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError
from .former import AttentionParams, FeedforwardParams, FormerModel
from .gcn import GcnLayerParams, GcnModel
from .topology import Topology

FORMAT_VERSION = 1


def save_model(model, path: str | Path) -> None:
    arrays: dict[str, np.ndarray] = {
        "format_version": np.asarray(FORMAT_VERSION),
        "branch": np.asarray(model.branch),
        "num_classes": np.asarray(model.num_classes),
    }
    if model.branch == "gcn":
        topo = model.topology
        arrays["topology.name"] = np.asarray(topo.name)
        arrays["topology.num_joints"] = np.asarray(topo.num_joints)
        arrays["topology.edges"] = np.asarray(topo.edges, dtype=np.int64).reshape(-1, 2)
        arrays["topology.parent"] = np.asarray(topo.parent, dtype=np.int64)
        arrays["adjacency_mode"] = np.asarray(model.adjacency_mode)
        arrays["temporal_kernel"] = np.asarray(model.layers[0].temporal_kernel)
        arrays["channels"] = np.asarray([layer.c_out for layer in model.layers])
        arrays["refine_scale"] = np.asarray(
            [layer.tau for layer in model.layers], dtype=np.float64)
    elif model.branch == "former":
        arrays["num_joints"] = np.asarray(model.num_joints)
        arrays["segments"] = np.asarray(model.segments)
        arrays["depth"] = np.asarray(len(model.blocks))
    else:
        raise ValueError(f"unknown branch {model.branch!r}")
    for name, p in model.params().items():
        arrays[f"param.{name}"] = np.asarray(p)
    # savez on a handle, not a path: keeps the exact file name the caller chose
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path: str | Path, expect_joints: int | None = None,
               expect_classes: int | None = None):
    """Rebuild a model from ``save_model`` output.

    ``expect_joints`` / ``expect_classes`` guard against feeding the model a
    dataset with a different skeleton or label space.
    """
    path = Path(path)

    def get(archive, key):
        if key not in archive:
            raise FormatError(f"{path}: checkpoint is missing field {key!r}")
        return archive[key]

    def param(archive, name):
        return np.array(get(archive, f"param.{name}"), dtype=np.float64)

    try:
        archive = np.load(path, allow_pickle=False)
    except FileNotFoundError:
        raise
    except (OSError, ValueError) as exc:
        raise FormatError(f"{path}: not a model checkpoint ({exc})") from exc
    with archive:
        version = int(get(archive, "format_version"))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported format version {version}")
        branch = str(get(archive, "branch"))
        num_classes = int(get(archive, "num_classes"))
        if branch == "gcn":
            model = _load_gcn(archive, get, param)
        elif branch == "former":
            model = _load_former(archive, get, param)
        else:
            raise FormatError(f"{path}: unknown branch {branch!r}")
    if model.num_classes != num_classes:
        raise FormatError(
            f"{path}: head has {model.num_classes} classes but the archive "
            f"declares {num_classes}")
    if expect_classes is not None and model.num_classes != expect_classes:
        raise FormatError(
            f"{path}: checkpoint has {model.num_classes} classes, "
            f"expected {expect_classes}")
    joints = (model.topology.num_joints if branch == "gcn" else model.num_joints)
    if expect_joints is not None and joints != expect_joints:
        raise FormatError(
            f"{path}: checkpoint has {joints} joints, expected {expect_joints}")
    return model


def _load_gcn(archive, get, param) -> GcnModel:
    topo = Topology(
        name=str(get(archive, "topology.name")),
        num_joints=int(get(archive, "topology.num_joints")),
        edges=[tuple(int(x) for x in e) for e in get(archive, "topology.edges")],
        parent=[int(p) for p in get(archive, "topology.parent")])
    mode = str(get(archive, "adjacency_mode"))
    kernel = int(get(archive, "temporal_kernel"))
    channels = [int(c) for c in get(archive, "channels")]
    scales = [float(s) for s in get(archive, "refine_scale")]
    if len(scales) != len(channels):
        raise FormatError("checkpoint refine_scale does not match layer count")
    layers = []
    for i in range(len(channels)):
        refine_w = None
        tau = scales[i]
        if mode != "static":
            refine_w = param(archive, f"layers.{i}.refine_w")
        layers.append(GcnLayerParams(
            W=param(archive, f"layers.{i}.W"),
            temporal_W=param(archive, f"layers.{i}.temporal_W"),
            temporal_b=param(archive, f"layers.{i}.temporal_b"),
            temporal_kernel=kernel,
            adjacency_mode=mode,
            refine_w=refine_w,
            tau=tau))
    return GcnModel(topology=topo, layers=layers,
                    head_W=param(archive, "head.W"),
                    head_b=param(archive, "head.b"))


def _load_former(archive, get, param) -> FormerModel:
    depth = int(get(archive, "depth"))
    blocks = []
    for i in range(depth):
        attn = AttentionParams(
            W_Q=param(archive, f"blocks.{i}.attn.W_Q"),
            W_K=param(archive, f"blocks.{i}.attn.W_K"),
            W_V=param(archive, f"blocks.{i}.attn.W_V"),
            W_O=param(archive, f"blocks.{i}.attn.W_O"),
            norm_gamma=param(archive, f"blocks.{i}.attn.norm_gamma"),
            norm_beta=param(archive, f"blocks.{i}.attn.norm_beta"))
        ffn = FeedforwardParams(
            W1=param(archive, f"blocks.{i}.ffn.W1"),
            W2=param(archive, f"blocks.{i}.ffn.W2"),
            norm_gamma=param(archive, f"blocks.{i}.ffn.norm_gamma"),
            norm_beta=param(archive, f"blocks.{i}.ffn.norm_beta"))
        blocks.append((attn, ffn))
    return FormerModel(
        num_joints=int(get(archive, "num_joints")),
        segments=int(get(archive, "segments")),
        embed_W=param(archive, "embed.W"),
        pos_table=param(archive, "pos.table"),
        blocks=blocks,
        head_W=param(archive, "head.W"))
