"""Graph-convolution branch: normalized adjacency, spatial graph layers with
three adjacency modes, depthwise temporal convolution and a linear head.

A block is graph conv -> temporal conv, each with a ReLU; the model stacks
blocks, average-pools over frames, joints and persons, and maps to class
logits. All arithmetic is float64 numpy; forward passes return a cache that
``backward`` consumes to produce analytic gradients (the training module's
finite-difference check pins their correctness).

Adjacency modes:
- ``static``: the normalized topology matrix, shared by all samples.
- ``channel_refined``: per-sample additive refinement tau * tanh(s_i - s_j)
  where s projects the temporal-mean joint features to a scalar.
- ``temporal_dependent``: the same form computed per frame.

The refinement scale tau is a fixed model constant, not a learned parameter:
a single scalar coupled to every (batch, frame, i, j) position collects a
gradient several orders of magnitude larger than any per-weight gradient,
which no shared SGD learning rate can serve. The learned part of the dynamic
modes is the score projection ``refine_w``.

Every mode materializes a dense [B, T, V, V] adjacency and feeds one shared
contraction, so tau = 0 reproduces the static output bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .topology import Topology

ADJACENCY_MODES = ("static", "channel_refined", "temporal_dependent")


def normalized_adjacency(topology: Topology) -> np.ndarray:
    """Symmetrically normalized adjacency with self-loops.

    Returns D^{-1/2} (A + I) D^{-1/2} where A is the 0/1 edge matrix and D
    the degree matrix of A + I. Computed through an outer-product scaling so
    the result is symmetric to the last bit; its eigenvalues lie in [-1, 1]
    with the largest equal to 1.
    """
    a_tilde = topology.adjacency() + np.eye(topology.num_joints)
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return a_tilde * np.outer(inv_sqrt, inv_sqrt)


def graph_conv_forward(h: np.ndarray, a_norm: np.ndarray,
                       w: np.ndarray) -> np.ndarray:
    """One spatial graph convolution: ReLU(A_norm . H . W) per frame.

    ``h`` is [B, T, V, C_in], ``a_norm`` [V, V], ``w`` [C_in, C_out].
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 4:
        raise DimensionError(f"H must be [B, T, V, C], got shape {h.shape}")
    v, c_in = h.shape[2], h.shape[3]
    if a_norm.shape != (v, v):
        raise DimensionError(f"adjacency {a_norm.shape} does not match V={v}")
    if w.ndim != 2 or w.shape[0] != c_in:
        raise DimensionError(f"weight {w.shape} does not chain with C_in={c_in}")
    z = np.einsum("uv,btvc->btuc", a_norm, h)
    return np.maximum(z @ w, 0.0)


def _joint_score_refinement(scores: np.ndarray, a_norm: np.ndarray,
                            tau: float) -> np.ndarray:
    """A_norm + tau * tanh(s_i - s_j) for per-joint scalar scores.

    ``scores`` carries any leading batch axes with joints last; the result
    appends a second joint axis. The refinement term is antisymmetric in
    (i, j) by oddness of tanh and bounded by |tau| per entry.
    """
    diff = scores[..., :, None] - scores[..., None, :]
    return a_norm + tau * np.tanh(diff)


def channel_refined_adjacency(h: np.ndarray, a_norm: np.ndarray,
                              refine_w: np.ndarray, tau: float) -> np.ndarray:
    """Per-sample refined adjacency [B, V, V] from temporal-mean features."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 4:
        raise DimensionError(f"H must be [B, T, V, C], got shape {h.shape}")
    if refine_w.shape != (h.shape[3],):
        raise DimensionError(
            f"refine weights {refine_w.shape} do not match C={h.shape[3]}")
    scores = h.mean(axis=1) @ refine_w
    return _joint_score_refinement(scores, a_norm, tau)


def temporal_dependent_adjacency(h: np.ndarray, a_norm: np.ndarray,
                                 refine_w: np.ndarray, tau: float) -> np.ndarray:
    """Per-frame refined adjacency [B, T, V, V] from frame features."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 4:
        raise DimensionError(f"H must be [B, T, V, C], got shape {h.shape}")
    if refine_w.shape != (h.shape[3],):
        raise DimensionError(
            f"refine weights {refine_w.shape} do not match C={h.shape[3]}")
    scores = h @ refine_w
    return _joint_score_refinement(scores, a_norm, tau)


def temporal_conv_forward(h: np.ndarray, temporal_w: np.ndarray,
                          temporal_b: np.ndarray, kernel: int) -> np.ndarray:
    """Depthwise temporal convolution with residual add and ReLU.

    ``temporal_w`` is [C, k] (one k-tap filter per channel), ``temporal_b``
    [C]. Zero "same" padding keeps T; the kernel must be odd.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 4:
        raise DimensionError(f"H must be [B, T, V, C], got shape {h.shape}")
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"temporal kernel must be odd and positive, got {kernel}")
    c = h.shape[3]
    if temporal_w.shape != (c, kernel) or temporal_b.shape != (c,):
        raise DimensionError(
            f"temporal weights {temporal_w.shape}/{temporal_b.shape} do not "
            f"match C={c}, k={kernel}")
    conv, _ = _temporal_conv_raw(h, temporal_w, temporal_b, kernel)
    return np.maximum(conv + h, 0.0)


def _temporal_conv_raw(h, temporal_w, temporal_b, kernel):
    """Convolution term only (no residual, no activation) plus padded input."""
    b, t, v, c = h.shape
    pad = kernel // 2
    hpad = np.zeros((b, t + 2 * pad, v, c), dtype=np.float64)
    hpad[:, pad:pad + t] = h
    conv = np.broadcast_to(temporal_b, (b, t, v, c)).copy()
    for j in range(kernel):
        conv += hpad[:, j:j + t] * temporal_w[:, j]
    return conv, hpad


@dataclass
class GcnLayerParams:
    """Parameters of one graph-conv + temporal-conv block."""

    W: np.ndarray                      # [C_in, C_out]
    temporal_W: np.ndarray             # [C_out, k]
    temporal_b: np.ndarray             # [C_out]
    temporal_kernel: int
    adjacency_mode: str = "static"
    refine_w: np.ndarray | None = None  # [C_in], dynamic modes only
    tau: float = 0.0                    # fixed refinement scale, dynamic modes

    def __post_init__(self):
        if self.W.ndim != 2 or min(self.W.shape) < 1:
            raise DimensionError(f"layer weight must be [C_in, C_out], got {self.W.shape}")
        if self.temporal_kernel < 1 or self.temporal_kernel % 2 == 0:
            raise ConfigError(
                f"temporal kernel must be odd and positive, got {self.temporal_kernel}")
        if self.adjacency_mode not in ADJACENCY_MODES:
            raise ConfigError(f"unknown adjacency mode {self.adjacency_mode!r}")
        c_out = self.W.shape[1]
        if self.temporal_W.shape != (c_out, self.temporal_kernel):
            raise DimensionError(
                f"temporal weights {self.temporal_W.shape} do not match "
                f"C_out={c_out}, k={self.temporal_kernel}")
        if self.temporal_b.shape != (c_out,):
            raise DimensionError(f"temporal bias {self.temporal_b.shape} != ({c_out},)")
        if self.adjacency_mode != "static":
            if self.refine_w is None:
                raise ConfigError(
                    f"mode {self.adjacency_mode!r} needs refine_w")
            if self.refine_w.shape != (self.W.shape[0],):
                raise DimensionError(
                    f"refine weights {self.refine_w.shape} do not match "
                    f"C_in={self.W.shape[0]}")
            if not np.isfinite(self.tau):
                raise ConfigError(f"refinement scale must be finite, got {self.tau}")

    @property
    def c_in(self) -> int:
        return self.W.shape[0]

    @property
    def c_out(self) -> int:
        return self.W.shape[1]


@dataclass
class GcnModel:
    """Stack of graph-conv blocks with an average-pool classification head."""

    topology: Topology
    layers: list[GcnLayerParams]
    head_W: np.ndarray                 # [C_last, K]
    head_b: np.ndarray                 # [K]
    a_norm: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("model needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.c_out != nxt.c_in:
                raise DimensionError(
                    f"layer channels do not chain: {prev.c_out} -> {nxt.c_in}")
        if self.head_W.shape[0] != self.layers[-1].c_out:
            raise DimensionError(
                f"head input {self.head_W.shape[0]} != last layer "
                f"C_out {self.layers[-1].c_out}")
        if self.head_b.shape != (self.head_W.shape[1],):
            raise DimensionError(
                f"head bias {self.head_b.shape} does not match K={self.head_W.shape[1]}")
        self.a_norm = normalized_adjacency(self.topology)

    @property
    def branch(self) -> str:
        return "gcn"

    @property
    def adjacency_mode(self) -> str:
        return self.layers[0].adjacency_mode

    @property
    def num_classes(self) -> int:
        return self.head_W.shape[1]

    @property
    def in_channels(self) -> int:
        return self.layers[0].c_in

    def params(self) -> dict[str, np.ndarray]:
        """Live parameter arrays keyed by name; in-place updates train the model."""
        out: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            out[f"layers.{i}.W"] = layer.W
            out[f"layers.{i}.temporal_W"] = layer.temporal_W
            out[f"layers.{i}.temporal_b"] = layer.temporal_b
            if layer.adjacency_mode != "static":
                out[f"layers.{i}.refine_w"] = layer.refine_w
        out["head.W"] = self.head_W
        out["head.b"] = self.head_b
        return out

    def _expand_adjacency(self, h: np.ndarray, layer: GcnLayerParams):
        """Materialize the effective adjacency as contiguous [B, T, V, V].

        Single code path shared by all modes: every mode builds the full
        per-frame tensor before the contraction, so modes differ only in the
        values, never in the arithmetic that consumes them.
        """
        b, t, v, _ = h.shape
        mode = layer.adjacency_mode
        if mode == "static":
            a = np.broadcast_to(self.a_norm, (b, t, v, v))
            cache = None
        elif mode == "channel_refined":
            scores = h.mean(axis=1) @ layer.refine_w
            per_sample = _joint_score_refinement(scores, self.a_norm, layer.tau)
            a = np.broadcast_to(per_sample[:, None], (b, t, v, v))
            cache = scores
        else:
            scores = h @ layer.refine_w
            a = _joint_score_refinement(scores, self.a_norm, layer.tau)
            cache = scores
        return np.ascontiguousarray(a), cache

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Map a batch [B, M, T, V, C] to logits [B, K]; returns (logits, cache)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 5:
            raise DimensionError(f"batch must be [B, M, T, V, C], got {x.shape}")
        bsz, m, t, v, c = x.shape
        if v != self.topology.num_joints:
            raise DimensionError(
                f"batch has V={v}, topology {self.topology.name!r} has "
                f"V={self.topology.num_joints}")
        if c != self.in_channels:
            raise DimensionError(f"batch has C={c}, layer 0 expects {self.in_channels}")
        h = x.reshape(bsz * m, t, v, c)
        caches = []
        for layer in self.layers:
            a_eff, adj_scores = self._expand_adjacency(h, layer)
            z = a_eff @ h
            pre1 = z @ layer.W
            g = np.maximum(pre1, 0.0)
            conv, gpad = _temporal_conv_raw(g, layer.temporal_W, layer.temporal_b,
                                            layer.temporal_kernel)
            pre2 = conv + g
            out = np.maximum(pre2, 0.0)
            caches.append({"h": h, "a_eff": a_eff, "adj_scores": adj_scores,
                           "z": z, "mask1": pre1 > 0, "gpad": gpad,
                           "mask2": pre2 > 0})
            h = out
        pooled = h.reshape(bsz, m, t, v, -1).mean(axis=(1, 2, 3))
        logits = pooled @ self.head_W + self.head_b
        caches.append({"pooled": pooled, "shape": (bsz, m, t, v)})
        return logits, caches

    def backward(self, dlogits: np.ndarray, caches: list) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss wrt every parameter, given dloss/dlogits."""
        head_cache = caches[-1]
        bsz, m, t, v = head_cache["shape"]
        pooled = head_cache["pooled"]
        grads: dict[str, np.ndarray] = {
            "head.W": pooled.T @ dlogits,
            "head.b": dlogits.sum(axis=0),
        }
        dpooled = dlogits @ self.head_W.T
        c_last = self.layers[-1].c_out
        dh = np.broadcast_to(
            dpooled[:, None, None, None, :] / (m * t * v),
            (bsz, m, t, v, c_last)).reshape(bsz * m, t, v, c_last)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            cache = caches[i]
            dpre2 = dh * cache["mask2"]
            dg = dpre2.copy()
            k = layer.temporal_kernel
            pad = k // 2
            tlen = dpre2.shape[1]
            dtw = np.empty_like(layer.temporal_W)
            dgpad = np.zeros_like(cache["gpad"])
            for j in range(k):
                dtw[:, j] = (dpre2 * cache["gpad"][:, j:j + tlen]).sum(axis=(0, 1, 2))
                dgpad[:, j:j + tlen] += dpre2 * layer.temporal_W[:, j]
            grads[f"layers.{i}.temporal_W"] = dtw
            grads[f"layers.{i}.temporal_b"] = dpre2.sum(axis=(0, 1, 2))
            dg += dgpad[:, pad:pad + tlen]
            dpre1 = dg * cache["mask1"]
            grads[f"layers.{i}.W"] = (
                cache["z"].reshape(-1, layer.c_in).T @ dpre1.reshape(-1, layer.c_out))
            dz = dpre1 @ layer.W.T
            h_in = cache["h"]
            dh = cache["a_eff"].swapaxes(-1, -2) @ dz
            if layer.adjacency_mode != "static":
                da = dz @ h_in.swapaxes(-1, -2)
                dh_adj, drw = self._adjacency_backward(layer, cache, da, h_in)
                dh += dh_adj
                grads[f"layers.{i}.refine_w"] = drw
        return grads

    def _adjacency_backward(self, layer, cache, da, h_in):
        """Backprop through tau * tanh(s_i - s_j) to features and refine_w."""
        scores = cache["adj_scores"]
        if layer.adjacency_mode == "channel_refined":
            da = da.sum(axis=1)
        r = np.tanh(scores[..., :, None] - scores[..., None, :])
        dd = layer.tau * da * (1.0 - r * r)
        ds = dd.sum(axis=-1) - dd.sum(axis=-2)
        if layer.adjacency_mode == "channel_refined":
            tlen = h_in.shape[1]
            drw = np.einsum("bv,btvc->c", ds, h_in) / tlen
            dh_adj = ds[:, None, :, None] * layer.refine_w / tlen
        else:
            drw = np.einsum("btv,btvc->c", ds, h_in)
            dh_adj = ds[..., None] * layer.refine_w
        return dh_adj, drw


def he_uniform(rng: np.random.Generator, shape: tuple[int, ...],
               fan_in: int) -> np.ndarray:
    """Uniform init on [-sqrt(6/fan_in), sqrt(6/fan_in)]."""
    bound = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def init_gcn_model(topology: Topology, num_classes: int, in_channels: int,
                   adjacency_mode: str = "static",
                   channels: tuple[int, ...] = (32, 32, 64, 64),
                   temporal_kernel: int = 5, refine_scale: float = 0.1,
                   seed: int = 0) -> GcnModel:
    """Seeded desk-scale model: He-uniform weights, zero biases.

    ``refine_scale`` sets tau for the dynamic adjacency modes; 0 makes them
    behave exactly like the static mode.
    """
    if num_classes < 2:
        raise ConfigError(f"num_classes must be >= 2, got {num_classes}")
    if in_channels not in (2, 3):
        raise ConfigError(f"in_channels must be 2 or 3, got {in_channels}")
    if adjacency_mode not in ADJACENCY_MODES:
        raise ConfigError(f"unknown adjacency mode {adjacency_mode!r}")
    if not channels:
        raise ConfigError("need at least one block")
    if not np.isfinite(refine_scale):
        raise ConfigError(f"refine_scale must be finite, got {refine_scale}")
    rng = np.random.default_rng(seed)
    layers = []
    c_prev = in_channels
    for c_out in channels:
        refine_w = None
        tau = 0.0
        if adjacency_mode != "static":
            refine_w = he_uniform(rng, (c_prev,), c_prev)
            tau = float(refine_scale)
        layers.append(GcnLayerParams(
            W=he_uniform(rng, (c_prev, c_out), c_prev),
            temporal_W=he_uniform(rng, (c_out, temporal_kernel), temporal_kernel),
            temporal_b=np.zeros(c_out),
            temporal_kernel=temporal_kernel,
            adjacency_mode=adjacency_mode,
            refine_w=refine_w,
            tau=tau))
        c_prev = c_out
    head_w = he_uniform(rng, (c_prev, num_classes), c_prev)
    return GcnModel(topology=topology, layers=layers,
                    head_W=head_w, head_b=np.zeros(num_classes))
