"""Multi-stream ablation runner.

A stream is (backbone, modality, dims): one backbone trained on one derived
modality at 2D or zero-lifted 3D. The runner trains every stream in a spec,
scores the validation split, fuses the per-stream scores with grid-searched
weights, and writes a report directory:

    scores/<stream>.csv     per-stream validation logits
    scores/fused.csv        fused logits
    report.csv              one row per stream plus the fused row
    report.md               the same table as Markdown
    confusion_fused.png     heatmap of the fused confusion matrix
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, FormatError
from .fusion import FusionWeights, fuse_scores, grid_search_weights, write_scores
from .gcn import init_gcn_model
from .former import init_former_model
from .lifting import lift_to_3d, zero_z_lifter
from .metrics import evaluate, plot_confusion
from .modalities import MODALITIES, derive_modality
from .sequence import Dataset
from .topology import Topology
from .training import desk_config, load_train_config, score_dataset, train_model

BACKBONES = ("gcn-static", "gcn-ctr", "gcn-td", "former")

_ADJACENCY_FOR = {
    "gcn-static": "static",
    "gcn-ctr": "channel_refined",
    "gcn-td": "temporal_dependent",
}


@dataclass
class StreamSpec:
    """One (backbone, modality, dims) stream of an ablation."""

    backbone: str
    modality: str
    dims: int = 2
    config: str | None = None

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ConfigError(f"unknown backbone {self.backbone!r}, "
                              f"expected one of {BACKBONES}")
        if self.modality not in MODALITIES:
            raise ConfigError(f"unknown modality {self.modality!r}")
        if self.dims not in (2, 3):
            raise ConfigError(f"dims must be 2 or 3, got {self.dims}")

    @property
    def name(self) -> str:
        return f"{self.backbone}-{self.modality}-{self.dims}d"

    def to_dict(self) -> dict:
        out = {"backbone": self.backbone, "modality": self.modality,
               "dims": self.dims}
        if self.config is not None:
            out["config"] = self.config
        return out


def load_ablation_spec(path: str | Path) -> list[StreamSpec]:
    """Parse a JSON list of stream records."""
    path = Path(path)
    try:
        records = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(records, list) or not records:
        raise FormatError(f"{path}: expected a non-empty JSON list of streams")
    specs = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise FormatError(f"{path}: stream {i} is not an object")
        unknown = set(rec) - {"backbone", "modality", "dims", "config"}
        if unknown:
            raise FormatError(f"{path}: stream {i} has unknown keys {sorted(unknown)}")
        if "backbone" not in rec or "modality" not in rec:
            raise FormatError(f"{path}: stream {i} needs backbone and modality")
        specs.append(StreamSpec(backbone=rec["backbone"],
                                modality=rec["modality"],
                                dims=int(rec.get("dims", 2)),
                                config=rec.get("config")))
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate streams in spec: {names}")
    return specs


def prepare_stream_dataset(dataset: Dataset, spec: StreamSpec,
                           topology: Topology) -> Dataset:
    """Lift to 3D if requested, then derive the stream's modality."""
    first = dataset.sequences[0]
    if spec.dims == 3 and first.channels == 2:
        lifter = zero_z_lifter()
        dataset = dataset.map(lambda s: lift_to_3d(s, lifter))
    elif spec.dims == 2 and first.channels == 3:
        raise ConfigError(
            f"stream {spec.name} wants 2D input but the data has 3 channels")
    return dataset.map(lambda s: derive_modality(s, spec.modality, topology))


def _train_stream(spec: StreamSpec, train: Dataset, val: Dataset,
                  topology: Topology, seed: int):
    in_channels = train.sequences[0].channels
    if spec.backbone == "former":
        model = init_former_model(topology.num_joints, train.num_classes,
                                  in_channels, seed=seed)
        config = (load_train_config(spec.config) if spec.config
                  else desk_config("former"))
    else:
        model = init_gcn_model(topology, train.num_classes, in_channels,
                               adjacency_mode=_ADJACENCY_FOR[spec.backbone],
                               seed=seed)
        config = (load_train_config(spec.config) if spec.config
                  else desk_config("gcn"))
    model, history = train_model(model, train, config, val_dataset=val)
    scores = score_dataset(model, val, stream_name=spec.name)
    return scores, history


@dataclass
class AblationReport:
    """Per-stream validation accuracies plus the fused result."""

    stream_names: list[str]
    stream_top1: list[float]
    weights: FusionWeights
    fused_top1: float

    def rows(self) -> list[tuple[str, float, str]]:
        out = [(name, acc, format(w, "g"))
               for name, acc, w in zip(self.stream_names, self.stream_top1,
                                       self.weights.weights)]
        out.append(("fused", self.fused_top1, ""))
        return out

    def to_csv_text(self) -> str:
        lines = ["stream,top1,weight"]
        lines += [f"{name},{format(acc, '.17g')},{w}" for name, acc, w in self.rows()]
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        lines = ["| stream | top-1 | weight |", "| --- | --- | --- |"]
        lines += [f"| {name} | {acc:.4f} | {w} |" for name, acc, w in self.rows()]
        return "\n".join(lines) + "\n"


def run_ablation(specs: list[StreamSpec], train: Dataset, val: Dataset,
                 topology: Topology, out_dir: str | Path,
                 grid_step: float = 0.1, seed: int = 0) -> AblationReport:
    """Train every stream, fuse, and write the report directory."""
    out_dir = Path(out_dir)
    scores_dir = out_dir / "scores"
    scores_dir.mkdir(parents=True, exist_ok=True)
    labels = val.label_map()
    stream_scores = []
    stream_top1 = []
    for spec in specs:
        s_train = prepare_stream_dataset(train, spec, topology)
        s_val = prepare_stream_dataset(val, spec, topology)
        scores, _ = _train_stream(spec, s_train, s_val, topology, seed)
        write_scores(scores_dir / f"{spec.name}.csv", scores)
        stream_scores.append(scores)
        stream_top1.append(evaluate(scores, labels).top1)
    weights, fused_top1 = grid_search_weights(stream_scores, labels,
                                              grid_step=grid_step)
    fused = fuse_scores(stream_scores, weights)
    write_scores(scores_dir / "fused.csv", fused)
    report = AblationReport(stream_names=[s.name for s in specs],
                            stream_top1=stream_top1, weights=weights,
                            fused_top1=fused_top1)
    (out_dir / "report.csv").write_text(report.to_csv_text())
    (out_dir / "report.md").write_text(report.to_markdown())
    plot_confusion(evaluate(fused, labels), out_dir / "confusion_fused.png",
                   title="fused validation confusion")
    return report
