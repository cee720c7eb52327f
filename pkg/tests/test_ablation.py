"""Stream specs, per-stream data preparation, and the ablation runner."""
from __future__ import annotations

import numpy as np
import pytest

from skelfuse import (ConfigError, FormatError, StreamSpec, SynthConfig,
                      TrainConfig, builtin_topology, evaluate,
                      generate_synthetic, lift_to_3d, load_ablation_spec,
                      prepare_stream_dataset, read_scores, run_ablation,
                      write_train_config, zero_z_lifter)

TOPO = builtin_topology()


def test_stream_spec_names_and_validation():
    spec = StreamSpec(backbone="gcn-ctr", modality="JM", dims=3)
    assert spec.name == "gcn-ctr-JM-3d"
    assert StreamSpec(backbone="former", modality="J").name == "former-J-2d"
    with pytest.raises(ConfigError):
        StreamSpec(backbone="cnn", modality="J")
    with pytest.raises(ConfigError):
        StreamSpec(backbone="former", modality="Q")
    with pytest.raises(ConfigError):
        StreamSpec(backbone="former", modality="J", dims=4)


def test_load_spec_roundtrip(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text('[{"backbone": "gcn-static", "modality": "J"},'
                    ' {"backbone": "former", "modality": "B", "dims": 3,'
                    ' "config": "former.cfg"}]')
    specs = load_ablation_spec(path)
    assert [s.name for s in specs] == ["gcn-static-J-2d", "former-B-3d"]
    assert specs[0].config is None
    assert specs[1].config == "former.cfg"


@pytest.mark.parametrize("text,err", [
    ("{not json", FormatError),
    ('{"backbone": "former"}', FormatError),
    ("[]", FormatError),
    ('[["former", "J"]]', FormatError),
    ('[{"backbone": "former", "modality": "J", "lr": 1}]', FormatError),
    ('[{"modality": "J"}]', FormatError),
    ('[{"backbone": "former"}]', FormatError),
    ('[{"backbone": "former", "modality": "J"},'
     ' {"backbone": "former", "modality": "J"}]', ConfigError),
])
def test_load_spec_rejects_bad_files(tmp_path, text, err):
    path = tmp_path / "spec.json"
    path.write_text(text)
    with pytest.raises(err):
        load_ablation_spec(path)


def tiny_data(split="train", per_class=4, seed=3):
    cfg = SynthConfig(num_classes=2, samples_per_class=per_class,
                      num_frames=6, noise_std=0.03, seed=seed)
    return generate_synthetic(cfg, split=split)


def test_prepare_stream_lifts_and_derives():
    data = tiny_data()
    spec = StreamSpec(backbone="gcn-static", modality="B", dims=3)
    out = prepare_stream_dataset(data, spec, TOPO)
    first = out.sequences[0]
    assert first.channels == 3
    assert first.modality == "B"
    # zero-lift then bone: z differences of a flat skeleton stay zero
    assert (first.data[..., 2] == 0.0).all()
    plain = prepare_stream_dataset(data, StreamSpec(backbone="former",
                                                    modality="JM"), TOPO)
    assert plain.sequences[0].channels == 2
    assert plain.sequences[0].modality == "JM"


def test_prepare_stream_rejects_2d_on_3d_data():
    lifter = zero_z_lifter()
    data = tiny_data().map(lambda s: lift_to_3d(s, lifter))
    spec = StreamSpec(backbone="gcn-static", modality="J", dims=2)
    with pytest.raises(ConfigError):
        prepare_stream_dataset(data, spec, TOPO)


def test_run_ablation_writes_report_directory(tmp_path):
    cfg_path = tmp_path / "fast.cfg"
    write_train_config(TrainConfig(base_lr=0.02, decay_factor=0.1,
                                   milestones=(), epochs=2, batch_size=8,
                                   momentum=0.9, seed=0, weight_decay=1e-4),
                       cfg_path)
    specs = [
        StreamSpec(backbone="gcn-static", modality="J", config=str(cfg_path)),
        StreamSpec(backbone="gcn-ctr", modality="JM", dims=3,
                   config=str(cfg_path)),
    ]
    train = tiny_data()
    val = tiny_data(split="val", per_class=2, seed=4)
    out = tmp_path / "report"
    report = run_ablation(specs, train, val, TOPO, out, grid_step=0.5)

    assert report.stream_names == ["gcn-static-J-2d", "gcn-ctr-JM-3d"]
    assert len(report.weights) == 2
    assert report.fused_top1 >= max(report.stream_top1)
    for name in report.stream_names:
        assert (out / "scores" / f"{name}.csv").exists()
    assert (out / "scores" / "fused.csv").exists()
    assert (out / "confusion_fused.png").exists()

    lines = (out / "report.csv").read_text().strip().splitlines()
    assert lines[0] == "stream,top1,weight"
    assert len(lines) == 4
    assert lines[3].startswith("fused,")

    md = (out / "report.md").read_text().strip().splitlines()
    assert md[0] == "| stream | top-1 | weight |"
    assert len(md) == 5

    # written scores reproduce the reported accuracies exactly
    labels = val.label_map()
    for name, top1 in zip(report.stream_names, report.stream_top1):
        back = read_scores(out / "scores" / f"{name}.csv")
        assert evaluate(back, labels).top1 == top1
    fused_back = read_scores(out / "scores" / "fused.csv")
    assert evaluate(fused_back, labels).top1 == report.fused_top1
