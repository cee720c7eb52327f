"""Training: cross-entropy objective, SGD with momentum, step-decay
schedule, a deterministic mini-batch loop and a finite-difference gradient
checker.

Models plug in through three methods: ``params()`` (live name -> array
dict), ``forward(x) -> (logits, cache)`` and ``backward(dlogits, cache) ->
grads``. The loop never touches model internals beyond that contract, so
both branches train through the same code.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import save_model
from .errors import ConfigError, FormatError
from .fusion import ScoreMatrix
from .sequence import Dataset


def cross_entropy_loss(logits: np.ndarray,
                       labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient wrt logits.

    Computed via the max-shifted log-sum-exp; gradient is
    (softmax - one_hot) / B. Batch sum is loss * B.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ValueError(
            f"need logits [B, K] and labels [B], got {logits.shape}, {labels.shape}")
    b, k = logits.shape
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise ValueError(f"labels must lie in [0, {k}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float((log_z - shifted[np.arange(b), labels]).mean())
    grad = np.exp(shifted - log_z[:, None])
    grad[np.arange(b), labels] -= 1.0
    grad /= b
    return loss, grad


@dataclass
class TrainConfig:
    """Optimizer and loop settings; milestones are epochs where lr decays."""

    base_lr: float = 0.02
    decay_factor: float = 0.1
    milestones: tuple[int, ...] = (40,)
    epochs: int = 60
    batch_size: int = 16
    momentum: float = 0.9
    seed: int = 0
    weight_decay: float = 1e-4

    def __post_init__(self):
        self.milestones = tuple(int(m) for m in self.milestones)
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")
        if not 0 < self.decay_factor < 1:
            raise ConfigError(
                f"decay_factor must be in (0, 1), got {self.decay_factor}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if any(b <= a for a, b in zip(self.milestones, self.milestones[1:])):
            raise ConfigError(f"milestones must be strictly increasing, "
                              f"got {self.milestones}")
        if self.milestones and self.milestones[-1] >= self.epochs:
            raise ConfigError(
                f"milestones must lie below epochs={self.epochs}, "
                f"got {self.milestones}")


def paper_gcn_config() -> TrainConfig:
    """Published GCN-branch schedule: lr 0.1 decayed 10x at epochs 35 and 55."""
    return TrainConfig(base_lr=0.1, decay_factor=0.1, milestones=(35, 55),
                       epochs=65, batch_size=64, momentum=0.9, seed=0,
                       weight_decay=4e-4)


def paper_former_config() -> TrainConfig:
    """Published Transformer-branch schedule: lr 0.02 for 90 epochs."""
    return TrainConfig(base_lr=0.02, decay_factor=0.1, milestones=(),
                       epochs=90, batch_size=128, momentum=0.9, seed=0,
                       weight_decay=4e-4)


def desk_config(branch: str = "gcn") -> TrainConfig:
    """Defaults sized for the synthetic datasets in this package."""
    if branch == "gcn":
        return TrainConfig(base_lr=0.02, decay_factor=0.1, milestones=(40,),
                           epochs=60, batch_size=16, momentum=0.9, seed=0,
                           weight_decay=1e-4)
    if branch == "former":
        return TrainConfig(base_lr=0.01, decay_factor=0.1, milestones=(60,),
                           epochs=80, batch_size=16, momentum=0.9, seed=0,
                           weight_decay=1e-4)
    raise ConfigError(f"unknown branch {branch!r}")


def write_train_config(config: TrainConfig, path: str | Path) -> None:
    lines = [
        f"base_lr = {config.base_lr!r}",
        f"decay_factor = {config.decay_factor!r}",
        "milestones = " + " ".join(str(m) for m in config.milestones),
        f"epochs = {config.epochs}",
        f"batch_size = {config.batch_size}",
        f"momentum = {config.momentum!r}",
        f"seed = {config.seed}",
        f"weight_decay = {config.weight_decay!r}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_train_config(text: str, source: str = "<config>") -> TrainConfig:
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    known = {"base_lr", "decay_factor", "milestones", "epochs", "batch_size",
             "momentum", "seed", "weight_decay"}
    unknown = set(fields) - known
    if unknown:
        raise FormatError(f"{source}: unknown fields {sorted(unknown)}")
    kwargs = {}
    try:
        for key in ("base_lr", "decay_factor", "momentum", "weight_decay"):
            if key in fields:
                kwargs[key] = float(fields[key])
        for key in ("epochs", "batch_size", "seed"):
            if key in fields:
                kwargs[key] = int(fields[key])
        if "milestones" in fields:
            parts = fields["milestones"].replace(",", " ").split()
            kwargs["milestones"] = tuple(int(p) for p in parts)
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from exc
    return TrainConfig(**kwargs)


def load_train_config(path: str | Path) -> TrainConfig:
    path = Path(path)
    return parse_train_config(path.read_text(), source=str(path))


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """base_lr * decay_factor^(number of milestones at or before epoch)."""
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    hits = sum(1 for m in config.milestones if m <= epoch)
    return config.base_lr * config.decay_factor ** hits


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float, momentum: float = 0.0, weight_decay: float = 0.0,
             velocity: dict[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
    """One in-place SGD update; returns the velocity dict for the next step.

    v <- momentum * v + grad + weight_decay * param
    param <- param - lr * v
    """
    if velocity is None:
        velocity = {name: np.zeros_like(p) for name, p in params.items()}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(
                f"gradient shape {g.shape} != param shape {p.shape} for {name!r}")
        v = velocity[name]
        v *= momentum
        v += g
        if weight_decay:
            v += weight_decay * p
        p -= lr * v
    return velocity


@dataclass
class TrainHistory:
    """Per-epoch learning rate, train loss/accuracy and validation accuracy."""

    lr: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)

    def append(self, lr: float, train_loss: float, train_acc: float,
               val_acc: float) -> None:
        self.lr.append(lr)
        self.train_loss.append(train_loss)
        self.train_acc.append(train_acc)
        self.val_acc.append(val_acc)

    def __len__(self) -> int:
        return len(self.lr)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "lr", "train_loss", "train_acc", "val_acc"])
            for e in range(len(self.lr)):
                writer.writerow([e] + [format(x, ".17g") for x in
                                       (self.lr[e], self.train_loss[e],
                                        self.train_acc[e], self.val_acc[e])])


def _forward_chunks(model, x: np.ndarray, batch_size: int) -> np.ndarray:
    outs = []
    for start in range(0, x.shape[0], batch_size):
        logits, _ = model.forward(x[start:start + batch_size])
        outs.append(logits)
    return np.concatenate(outs, axis=0)


def score_dataset(model, dataset: Dataset, stream_name: str = "",
                  batch_size: int = 64) -> ScoreMatrix:
    """Run the model over a dataset and collect per-sample logits."""
    x, _, ids = dataset.stack()
    logits = _forward_chunks(model, x, batch_size)
    return ScoreMatrix(sample_ids=ids, logits=logits,
                       stream_name=stream_name or f"{model.branch}-{dataset.split}")


def train_model(model, dataset: Dataset, config: TrainConfig,
                val_dataset: Dataset | None = None,
                checkpoint_path: str | Path | None = None):
    """Deterministic mini-batch SGD; returns (model, TrainHistory).

    Shuffle order and parameter init are fixed by seeds, so two runs with
    the same inputs produce identical histories. When a checkpoint path and
    a validation set are given, the best-validation-epoch model is saved
    (the final model otherwise). Raises on non-finite loss.
    """
    if dataset.split != "train":
        raise ValueError(f"training needs the train split, got {dataset.split!r}")
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    if model.num_classes != dataset.num_classes:
        raise ConfigError(
            f"model has {model.num_classes} classes, dataset has "
            f"{dataset.num_classes}")
    x_all, y_all, _ = dataset.stack()
    val = None
    if val_dataset is not None and len(val_dataset) > 0:
        val = val_dataset.stack()
    rng = np.random.default_rng(config.seed)
    velocity = None
    history = TrainHistory()
    best_val = -1.0
    n = x_all.shape[0]
    for epoch in range(config.epochs):
        lr = lr_at_epoch(config, epoch)
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            logits, cache = model.forward(x_all[idx])
            loss, dlogits = cross_entropy_loss(logits, y_all[idx])
            if not np.isfinite(loss):
                raise ArithmeticError(
                    f"non-finite loss at epoch {epoch}, batch {start}")
            grads = model.backward(dlogits, cache)
            velocity = sgd_step(model.params(), grads, lr, config.momentum,
                                config.weight_decay, velocity)
            total_loss += loss * len(idx)
            correct += int((logits.argmax(axis=1) == y_all[idx]).sum())
        val_acc = float("nan")
        if val is not None:
            vx, vy, _ = val
            vlogits = _forward_chunks(model, vx, config.batch_size)
            val_acc = float((vlogits.argmax(axis=1) == vy).mean())
            if checkpoint_path is not None and val_acc > best_val:
                best_val = val_acc
                save_model(model, checkpoint_path)
        history.append(lr, total_loss / n, correct / n, val_acc)
    if checkpoint_path is not None and val is None:
        save_model(model, checkpoint_path)
    return model, history


def finite_difference_check(loss_fn, params: dict[str, np.ndarray],
                            probe_count: int = 50, step: float = 1e-3,
                            seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn()`` evaluates the current parameters and returns
    (scalar loss, grads dict aligned with ``params``). Coordinates are
    probed uniformly across all parameters; the relative-error denominator
    is max(|analytic|, |numeric|, 1e-8).
    """
    if probe_count < 1:
        raise ValueError(f"probe_count must be >= 1, got {probe_count}")
    _, grads = loss_fn()
    names = sorted(params)
    sizes = np.asarray([params[n].size for n in names])
    offsets = np.cumsum(sizes)
    rng = np.random.default_rng(seed)
    max_rel = 0.0
    for flat in rng.integers(0, offsets[-1], size=probe_count):
        which = int(np.searchsorted(offsets, flat, side="right"))
        name = names[which]
        idx = int(flat - (offsets[which] - sizes[which]))
        p = params[name]
        orig = p.flat[idx]
        p.flat[idx] = orig + step
        loss_plus, _ = loss_fn()
        p.flat[idx] = orig - step
        loss_minus, _ = loss_fn()
        p.flat[idx] = orig
        numeric = (loss_plus - loss_minus) / (2 * step)
        analytic = grads[name].flat[idx]
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel
