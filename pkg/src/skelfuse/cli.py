"""Command-line surface.

Subcommands: derive, lift, gen-synth, train, eval, fuse, ablate,
plot-confusion. All failures from this package or the filesystem exit with
code 1 and a one-line ``error:`` diagnostic on stderr; missing arguments
exit with argparse's usage text and code 2.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .ablation import load_ablation_spec, run_ablation
from .checkpoint import load_model
from .errors import SkelfuseError
from .fusion import (FusionWeights, fuse_scores, grid_search_weights,
                     read_scores, softmax_scores, write_scores)
from .gcn import ADJACENCY_MODES, init_gcn_model
from .former import init_former_model
from .lifting import lift_to_3d, zero_z_lifter
from .metrics import evaluate, plot_confusion
from .modalities import MODALITIES, derive_modality
from .sequence import (load_dataset_dir, read_skl1, save_dataset_dir,
                       write_skl1)
from .synth import SynthConfig, generate_synthetic
from .topology import resolve_topology
from .training import (desk_config, load_train_config, score_dataset,
                       train_model)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--topology", default="coco17",
                        help="built-in topology name or a topology file path")


def _cmd_derive(args) -> int:
    topology = resolve_topology(args.topology)
    seq = read_skl1(args.input)
    out = derive_modality(seq, args.modality, topology)
    write_skl1(out, args.out)
    return 0


def _cmd_lift(args) -> int:
    seq = read_skl1(args.input)
    out = lift_to_3d(seq, zero_z_lifter())
    write_skl1(out, args.out)
    return 0


def _cmd_gen_synth(args) -> int:
    splits = [("train", args.per_class, args.seed)]
    val_count = args.val_per_class
    if val_count is None:
        val_count = max(1, args.per_class // 5)
    if val_count > 0:
        splits.append(("val", val_count, args.seed + 1))
    if args.test_per_class > 0:
        splits.append(("test", args.test_per_class, args.seed + 2))
    for split, per_class, seed in splits:
        config = SynthConfig(num_classes=args.classes,
                             samples_per_class=per_class,
                             num_frames=args.frames,
                             num_joints=args.joints,
                             noise_std=args.noise,
                             seed=seed)
        save_dataset_dir(generate_synthetic(config, split=split), args.out)
    return 0


def _load_split(root: str, split: str, modality: str, dims: int, topology):
    dataset = load_dataset_dir(root, split)
    if dims == 3 and dataset.sequences[0].channels == 2:
        lifter = zero_z_lifter()
        dataset = dataset.map(lambda s: lift_to_3d(s, lifter))
    if modality != "J":
        dataset = dataset.map(lambda s: derive_modality(s, modality, topology))
    return dataset


def _cmd_train(args) -> int:
    topology = resolve_topology(args.topology)
    train = _load_split(args.data, "train", args.modality, args.dims, topology)
    val = None
    if (Path(args.data) / "val").is_dir():
        val = _load_split(args.data, "val", args.modality, args.dims, topology)
    in_channels = train.sequences[0].channels
    if args.branch == "former":
        model = init_former_model(topology.num_joints, train.num_classes,
                                  in_channels, seed=args.seed)
    else:
        model = init_gcn_model(topology, train.num_classes, in_channels,
                               adjacency_mode=args.adjacency, seed=args.seed)
    config = (load_train_config(args.config) if args.config
              else desk_config(args.branch))
    if args.epochs is not None:
        # a shortened run must also drop decay milestones it can never reach
        milestones = tuple(m for m in config.milestones if m < args.epochs)
        config = replace(config, epochs=args.epochs, milestones=milestones)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, history = train_model(model, train, config, val_dataset=val,
                                 checkpoint_path=out_dir / "model.npz")
    history.to_csv(out_dir / "history.csv")
    stream = f"{args.branch}-{args.modality}-{args.dims}d"
    if val is not None:
        write_scores(out_dir / "val_scores.csv",
                     score_dataset(model, val, stream_name=stream))
        print(f"train acc {history.train_acc[-1]:.4f}  "
              f"val acc {history.val_acc[-1]:.4f}")
    else:
        print(f"train acc {history.train_acc[-1]:.4f}")
    return 0


def _cmd_eval(args) -> int:
    topology = resolve_topology(args.topology)
    dataset = _load_split(args.data, args.split, args.modality, args.dims,
                          topology)
    model = load_model(args.model,
                       expect_joints=dataset.sequences[0].num_joints,
                       expect_classes=dataset.num_classes)
    scores = score_dataset(model, dataset)
    if args.out:
        write_scores(args.out, scores)
    metrics = evaluate(scores, dataset.label_map())
    print(f"top1 {metrics.top1:.4f} on {len(dataset)} samples")
    return 0


def _cmd_fuse(args) -> int:
    streams = [read_scores(p) for p in args.scores]
    if args.probs:
        streams = [softmax_scores(s) for s in streams]
    labels = load_dataset_dir(args.data, args.split).label_map()
    if args.weights:
        parts = [float(w) for w in args.weights.replace(",", " ").split()]
        weights = FusionWeights(weights=tuple(parts))
    else:
        weights, _ = grid_search_weights(streams, labels,
                                         grid_step=args.grid_step)
    fused = fuse_scores(streams, weights)
    if args.out:
        write_scores(args.out, fused)
    metrics = evaluate(fused, labels)
    weight_text = " ".join(format(w, "g") for w in weights.weights)
    print(f"weights {weight_text}  top1 {metrics.top1:.4f}")
    return 0


def _cmd_ablate(args) -> int:
    topology = resolve_topology(args.topology)
    specs = load_ablation_spec(args.spec)
    train = load_dataset_dir(args.data, "train")
    val = load_dataset_dir(args.data, "val")
    report = run_ablation(specs, train, val, topology, args.out,
                          grid_step=args.grid_step, seed=args.seed)
    for name, top1, weight in report.rows():
        suffix = f"  weight {weight}" if weight else ""
        print(f"{name}: top1 {top1:.4f}{suffix}")
    return 0


def _cmd_plot_confusion(args) -> int:
    scores = read_scores(args.scores)
    labels = load_dataset_dir(args.data, args.split).label_map()
    plot_confusion(evaluate(scores, labels), args.out, title=args.title)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skelfuse",
        description="Skeleton action recognition: dual-branch models with "
                    "late score fusion.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="derive a modality from a pose file")
    p.add_argument("--in", dest="input", required=True, help="input .skl1 file")
    p.add_argument("--modality", required=True, choices=MODALITIES)
    p.add_argument("--out", required=True, help="output .skl1 file")
    _add_common(p)
    p.set_defaults(fn=_cmd_derive)

    p = sub.add_parser("lift", help="lift 2D poses to 3D (zero-z stub)")
    p.add_argument("--in", dest="input", required=True, help="input .skl1 file")
    p.add_argument("--out", required=True, help="output .skl1 file")
    p.set_defaults(fn=_cmd_lift)

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--val-per-class", type=int, default=None,
                   help="default: per-class // 5")
    p.add_argument("--test-per-class", type=int, default=0)
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--joints", type=int, default=17)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset directory")
    p.set_defaults(fn=_cmd_gen_synth)

    p = sub.add_parser("train", help="train one branch on one modality")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--branch", choices=("gcn", "former"), default="gcn")
    p.add_argument("--adjacency", choices=ADJACENCY_MODES, default="static")
    p.add_argument("--modality", choices=MODALITIES, default="J")
    p.add_argument("--dims", type=int, choices=(2, 3), default=2)
    p.add_argument("--config", help="training config file")
    p.add_argument("--epochs", type=int, default=None,
                   help="override the configured epoch count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="score a dataset with a checkpoint")
    p.add_argument("--model", required=True, help="model .npz checkpoint")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--split", choices=("train", "val", "test"), default="val")
    p.add_argument("--modality", choices=MODALITIES, default="J")
    p.add_argument("--dims", type=int, choices=(2, 3), default=2)
    p.add_argument("--out", help="write scores CSV here")
    _add_common(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("fuse", help="fuse per-stream score files")
    p.add_argument("--scores", nargs="+", required=True,
                   help="score CSV files, one per stream")
    p.add_argument("--data", required=True, help="dataset directory for labels")
    p.add_argument("--split", choices=("train", "val", "test"), default="val")
    p.add_argument("--weights", help="comma-separated weights; omit to search")
    p.add_argument("--grid-step", type=float, default=0.1)
    p.add_argument("--probs", action="store_true",
                   help="fuse softmax probabilities instead of raw logits")
    p.add_argument("--out", help="write fused scores CSV here")
    p.set_defaults(fn=_cmd_fuse)

    p = sub.add_parser("ablate", help="run a multi-stream ablation")
    p.add_argument("--spec", required=True, help="JSON stream list")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--grid-step", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report directory")
    _add_common(p)
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("plot-confusion", help="render a confusion heatmap")
    p.add_argument("--scores", required=True, help="score CSV file")
    p.add_argument("--data", required=True, help="dataset directory for labels")
    p.add_argument("--split", choices=("train", "val", "test"), default="val")
    p.add_argument("--title", default=None)
    p.add_argument("--out", required=True, help="output image path")
    p.set_defaults(fn=_cmd_plot_confusion)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (SkelfuseError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
