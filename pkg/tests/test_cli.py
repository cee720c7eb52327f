"""End-to-end command-line workflows on small synthetic data."""
from __future__ import annotations

import struct

import numpy as np
import pytest

from skelfuse import (SkeletonSequence, builtin_topology, derive_bone,
                      read_skl1, write_skl1)
from skelfuse.cli import main

RNG = np.random.default_rng(97)


def gen_args(out, classes=2, per_class=4, frames=6, seed=0):
    return ["gen-synth", "--classes", str(classes), "--per-class",
            str(per_class), "--frames", str(frames), "--noise", "0.03",
            "--seed", str(seed), "--out", str(out)]


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_no_arguments_exits_with_usage():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_unknown_command_exits_with_usage():
    with pytest.raises(SystemExit) as exc:
        main(["transmogrify"])
    assert exc.value.code == 2


def test_gen_synth_is_byte_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(gen_args(a)) == 0
    assert main(gen_args(b)) == 0
    files_a = tree_bytes(a)
    assert files_a == tree_bytes(b)
    train_files = [name for name in files_a if name.startswith("train/")]
    assert len(train_files) == 8
    val_files = [name for name in files_a if name.startswith("val/")]
    assert len(val_files) == 2  # per-class // 5 floored, min 1


def test_derive_matches_library_call(tmp_path):
    seq = SkeletonSequence(data=RNG.normal(size=(1, 4, 17, 2)).astype(np.float32),
                           modality="J", sample_id="probe", label=1)
    src = tmp_path / "probe.skl1"
    dst = tmp_path / "probe_bone.skl1"
    write_skl1(seq, src)
    assert main(["derive", "--in", str(src), "--modality", "B",
                 "--out", str(dst)]) == 0
    # the container stores no modality tag; the reader takes it as an arg
    out = read_skl1(dst, modality="B")
    want = derive_bone(seq, builtin_topology())
    assert out.modality == "B"
    assert out.data.tobytes() == want.data.astype(np.float32).tobytes()


def test_lift_appends_zero_channel(tmp_path):
    seq = SkeletonSequence(data=RNG.normal(size=(1, 3, 17, 2)).astype(np.float32),
                           modality="J", sample_id="probe", label=0)
    src = tmp_path / "p.skl1"
    dst = tmp_path / "p3d.skl1"
    write_skl1(seq, src)
    assert main(["lift", "--in", str(src), "--out", str(dst)]) == 0
    out = read_skl1(dst)
    assert out.channels == 3
    assert (out.data[..., 2] == 0.0).all()
    assert np.allclose(out.data[..., :2], seq.data, rtol=0, atol=0)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One shared tiny dataset + 2-epoch training run for the CLI chain."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    run = root / "run"
    assert main(gen_args(data)) == 0
    assert main(["train", "--data", str(data), "--branch", "gcn",
                 "--adjacency", "static", "--modality", "J",
                 "--epochs", "2", "--out", str(run)]) == 0
    return data, run


def test_train_writes_artifacts(trained, capsys):
    _, run = trained
    assert (run / "model.npz").exists()
    assert (run / "history.csv").exists()
    assert (run / "val_scores.csv").exists()
    history = (run / "history.csv").read_text().strip().splitlines()
    assert history[0] == "epoch,lr,train_loss,train_acc,val_acc"
    assert len(history) == 3


def test_eval_prints_accuracy(trained, tmp_path, capsys):
    data, run = trained
    out = tmp_path / "scores.csv"
    code = main(["eval", "--model", str(run / "model.npz"), "--data",
                 str(data), "--split", "val", "--out", str(out)])
    assert code == 0
    assert out.exists()
    printed = capsys.readouterr().out
    assert printed.startswith("top1 ")
    assert "on 2 samples" in printed


def test_fuse_with_explicit_and_searched_weights(trained, tmp_path, capsys):
    data, run = trained
    scores = str(run / "val_scores.csv")
    fused_out = tmp_path / "fused.csv"
    code = main(["fuse", "--scores", scores, scores, "--data", str(data),
                 "--weights", "1,1", "--out", str(fused_out)])
    assert code == 0
    assert fused_out.exists()
    assert capsys.readouterr().out.startswith("weights 1 1  top1 ")
    code = main(["fuse", "--scores", scores, "--data", str(data),
                 "--grid-step", "0.5", "--probs"])
    assert code == 0
    assert capsys.readouterr().out.startswith("weights 0.5  top1 ")


def test_plot_confusion_writes_png(trained, tmp_path):
    data, run = trained
    out = tmp_path / "c.png"
    code = main(["plot-confusion", "--scores", str(run / "val_scores.csv"),
                 "--data", str(data), "--out", str(out)])
    assert code == 0
    blob = out.read_bytes()
    assert blob[:8] == b"\x89PNG\r\n\x1a\n"
    assert struct.unpack(">II", blob[16:24]) == (500, 400)


def test_ablate_runs_spec(trained, tmp_path, capsys):
    data, _ = trained
    cfg = tmp_path / "fast.cfg"
    cfg.write_text("epochs = 2\nbatch_size = 8\nmilestones =\n")
    spec = tmp_path / "spec.json"
    spec.write_text('[{"backbone": "gcn-static", "modality": "J", '
                    f'"config": "{cfg}"}},'
                    '{"backbone": "gcn-static", "modality": "B", '
                    f'"config": "{cfg}"}}]')
    out = tmp_path / "report"
    code = main(["ablate", "--spec", str(spec), "--data", str(data),
                 "--grid-step", "0.5", "--out", str(out)])
    assert code == 0
    assert (out / "report.csv").exists()
    printed = capsys.readouterr().out.strip().splitlines()
    assert printed[0].startswith("gcn-static-J-2d: top1 ")
    assert printed[-1].startswith("fused: top1 ")


def test_failures_exit_one_with_diagnostic(tmp_path, capsys):
    assert main(["derive", "--in", str(tmp_path / "missing.skl1"),
                 "--modality", "B", "--out", str(tmp_path / "o.skl1")]) == 1
    assert capsys.readouterr().err.startswith("error: ")
    assert main(["eval", "--model", str(tmp_path / "no.npz"), "--data",
                 str(tmp_path / "nodata")]) == 1
    assert capsys.readouterr().err.startswith("error: ")
    bad_spec = tmp_path / "bad.json"
    bad_spec.write_text("{broken")
    assert main(["ablate", "--spec", str(bad_spec), "--data",
                 str(tmp_path / "nodata"), "--out", str(tmp_path / "r")]) == 1
    assert capsys.readouterr().err.startswith("error: ")
    assert main(["train", "--data", str(tmp_path / "nodata"), "--out",
                 str(tmp_path / "run")]) == 1
    assert capsys.readouterr().err.startswith("error: ")
