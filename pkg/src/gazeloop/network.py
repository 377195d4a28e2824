"""Graph classifiers: the inductive message-passing model, a transductive
GCN baseline, and a descriptor-only local baseline.

The inductive model computes, per layer, an aggregate of each node's
neighbors (elementwise max, or the final hidden state of a recurrent pass
over the neighbor sequence), concatenates it with the node's own embedding,
and applies a weight matrix and ReLU; a linear head plus softmax yields
per-node class probabilities. Because nothing depends on the global graph
size, the same trained weights score graphs with any node count. Gradients
are hand-derived reverse-mode (no autodiff tape) and validated against
central finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .graphs import FrameGraph
from .numerics import (AdamState, adam_step, assert_finite, cross_entropy,
                       relu, sigmoid, softmax_rows)
from .scene import BoundingBox

__all__ = [
    "InductiveGraphModel", "TransductiveGcn", "LocalFeatureBaseline",
    "TrainConfig", "PredictionSet", "NodePrediction",
    "UnsupportedGraphSizeError", "aggregate_maxpool", "aggregate_lstm",
    "LstmParams", "forward", "predict_unseen", "loss_and_backward", "fit",
    "gcn_forward", "local_baseline_fit", "local_baseline_predict",
    "save_model", "load_model",
]

CHECKPOINT_VERSION = 1


class UnsupportedGraphSizeError(ValueError):
    """Raised by the transductive baseline when graph size differs from the
    node count it was trained on; it cannot score unseen nodes."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr: float = 0.02
    seed: int = 0
    early_stop_tol: float = 0.0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(eq=False)
class NodePrediction:
    box: BoundingBox
    label: str
    probs: np.ndarray

    @property
    def score(self) -> float:
        return float(self.probs.max())


@dataclass(eq=False)
class PredictionSet:
    items: list[NodePrediction]
    class_labels: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.items]


# --- aggregators ----------------------------------------------------------

def aggregate_maxpool(neighbors, dim: int | None = None) -> np.ndarray:
    """Elementwise max of neighbor vectors; empty neighborhood -> zeros."""
    vecs = [np.asarray(v, dtype=np.float64) for v in neighbors]
    if not vecs:
        if dim is None:
            raise ValueError("empty neighborhood needs an explicit dim")
        return np.zeros(dim, dtype=np.float64)
    d = vecs[0].shape
    if any(v.shape != d for v in vecs):
        raise ValueError("neighbor vectors have mixed dimensions")
    return np.max(np.stack(vecs), axis=0)


@dataclass(eq=False)
class LstmParams:
    """Single-layer LSTM weights; gate order in the stacked axis is i,f,g,o."""

    w_x: np.ndarray   # (4H, D)
    w_h: np.ndarray   # (4H, H)
    bias: np.ndarray  # (4H,)

    @property
    def hidden_dim(self) -> int:
        return self.w_h.shape[1]

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[1]

    @classmethod
    def init(cls, rng: np.random.Generator, input_dim: int, hidden_dim: int) -> "LstmParams":
        sx = 1.0 / np.sqrt(input_dim)
        sh = 1.0 / np.sqrt(hidden_dim)
        w_x = rng.normal(0.0, sx, (4 * hidden_dim, input_dim))
        w_h = rng.normal(0.0, sh, (4 * hidden_dim, hidden_dim))
        bias = np.zeros(4 * hidden_dim)
        bias[hidden_dim:2 * hidden_dim] = 1.0  # forget-gate bias
        return cls(w_x, w_h, bias)


def _lstm_forward_batch(seq: np.ndarray, w_x: np.ndarray, w_h: np.ndarray,
                        bias: np.ndarray):
    """Run the LSTM over seq (B, T, D); returns final hidden (B, H) + cache."""
    b_sz, t_len, _ = seq.shape
    hd = w_h.shape[1]
    h = np.zeros((b_sz, hd))
    c = np.zeros((b_sz, hd))
    steps = []
    for t in range(t_len):
        x = seq[:, t, :]
        z = x @ w_x.T + h @ w_h.T + bias
        i = sigmoid(z[:, :hd])
        f = sigmoid(z[:, hd:2 * hd])
        g = np.tanh(z[:, 2 * hd:3 * hd])
        o = sigmoid(z[:, 3 * hd:])
        c_new = f * c + i * g
        hc = np.tanh(c_new)
        steps.append((x, h, c, i, f, g, o, hc))
        h = o * hc
        c = c_new
    return h, steps


def _lstm_backward_batch(d_h_final: np.ndarray, steps, w_x: np.ndarray,
                         w_h: np.ndarray):
    """BPTT through _lstm_forward_batch. Returns (d_seq, dWx, dWh, db)."""
    hd = w_h.shape[1]
    b_sz = d_h_final.shape[0]
    t_len = len(steps)
    d_seq = np.zeros((b_sz, t_len, w_x.shape[1]))
    d_wx = np.zeros_like(w_x)
    d_wh = np.zeros_like(w_h)
    d_b = np.zeros(4 * hd)
    dh = d_h_final.copy()
    dc = np.zeros((b_sz, hd))
    for t in range(t_len - 1, -1, -1):
        x, h_prev, c_prev, i, f, g, o, hc = steps[t]
        do = dh * hc
        dc = dc + dh * o * (1.0 - hc * hc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate([di * i * (1.0 - i), df * f * (1.0 - f),
                             dg * (1.0 - g * g), do * o * (1.0 - o)], axis=1)
        d_wx += dz.T @ x
        d_wh += dz.T @ h_prev
        d_b += dz.sum(axis=0)
        d_seq[:, t, :] = dz @ w_x
        dh = dz @ w_h
        dc = dc * f
    return d_seq, d_wx, d_wh, d_b


def aggregate_lstm(neighbors, params: LstmParams) -> np.ndarray:
    """Final hidden state of a recurrent pass over the neighbor sequence, in
    the order given; empty sequence -> zero state."""
    vecs = [np.asarray(v, dtype=np.float64) for v in neighbors]
    if not vecs:
        return np.zeros(params.hidden_dim, dtype=np.float64)
    d = vecs[0].shape
    if any(v.shape != d for v in vecs):
        raise ValueError("neighbor vectors have mixed dimensions")
    seq = np.stack(vecs)[None, :, :]
    h, _ = _lstm_forward_batch(seq, params.w_x, params.w_h, params.bias)
    return h[0]


# --- inductive model -------------------------------------------------------

@dataclass(eq=False)
class InductiveGraphModel:
    """Trainable message-passing classifier.

    dims[0] is the node feature dimension; dims[1:] are layer output sizes.
    For the recurrent aggregator, each layer's hidden size equals the layer's
    input size, so W(k) always acts on concat(own, aggregated) of shape
    2 * dims[k-1].
    """

    dims: tuple[int, ...]
    aggregator: str
    class_labels: tuple[str, ...]
    params: dict = field(default_factory=dict)
    train_losses: list = field(default_factory=list, repr=False)

    @property
    def depth(self) -> int:
        return len(self.dims) - 1

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @classmethod
    def init(cls, seed: int, in_dim: int, hidden_dims, class_labels,
             aggregator: str = "maxpool") -> "InductiveGraphModel":
        if aggregator not in ("maxpool", "lstm"):
            raise ValueError(f"unknown aggregator {aggregator!r}")
        labels = tuple(class_labels)
        if len(labels) < 1:
            raise ValueError("at least one class label required")
        dims = (in_dim, *hidden_dims)
        rng = np.random.default_rng(seed)
        params: dict[str, np.ndarray] = {}
        for k in range(1, len(dims)):
            d_in, d_out = dims[k - 1], dims[k]
            params[f"W{k}"] = rng.normal(0.0, np.sqrt(2.0 / (2 * d_in)), (d_out, 2 * d_in))
            if aggregator == "lstm":
                lstm = LstmParams.init(rng, d_in, d_in)
                params[f"lstm{k}_wx"] = lstm.w_x
                params[f"lstm{k}_wh"] = lstm.w_h
                params[f"lstm{k}_b"] = lstm.bias
        params["Wo"] = rng.normal(0.0, np.sqrt(1.0 / dims[-1]), (len(labels), dims[-1]))
        return cls(dims=dims, aggregator=aggregator, class_labels=labels, params=params)

    def label_index(self, label: str) -> int:
        try:
            return self.class_labels.index(label)
        except ValueError:
            raise ValueError(f"label {label!r} not in model classes") from None


def _neighbor_index(n: int) -> np.ndarray:
    """nbr[v, t] = the t-th neighbor of v in canonical order (skips v)."""
    t = np.arange(n - 1)[None, :].repeat(n, axis=0)
    v = np.arange(n)[:, None]
    return t + (t >= v)


def _aggregate_layer(h: np.ndarray, model: InductiveGraphModel, k: int):
    """Neighbor aggregate for all nodes at layer k; returns (agg, cache)."""
    n, d = h.shape
    if n <= 1:
        return np.zeros((n, d)), ("empty", None)
    if model.aggregator == "maxpool":
        stacked = np.broadcast_to(h[None, :, :], (n, n, d)).copy()
        idx = np.arange(n)
        stacked[idx, idx, :] = -np.inf
        arg = stacked.argmax(axis=1)                       # (n, d)
        agg = h[arg, np.arange(d)[None, :]]
        return agg, ("maxpool", arg)
    nbr = _neighbor_index(n)
    seq = h[nbr]                                           # (n, n-1, d)
    final_h, steps = _lstm_forward_batch(seq, model.params[f"lstm{k}_wx"],
                                         model.params[f"lstm{k}_wh"],
                                         model.params[f"lstm{k}_b"])
    return final_h, ("lstm", (nbr, steps))


def _aggregate_backward(d_agg: np.ndarray, cache, model: InductiveGraphModel,
                        k: int, grads: dict, n: int, d: int) -> np.ndarray:
    kind, payload = cache
    d_h = np.zeros((n, d))
    if kind == "empty":
        return d_h
    if kind == "maxpool":
        arg = payload
        np.add.at(d_h, (arg, np.arange(d)[None, :].repeat(n, axis=0)), d_agg)
        return d_h
    nbr, steps = payload
    d_seq, d_wx, d_wh, d_b = _lstm_backward_batch(
        d_agg, steps, model.params[f"lstm{k}_wx"], model.params[f"lstm{k}_wh"])
    grads[f"lstm{k}_wx"] += d_wx
    grads[f"lstm{k}_wh"] += d_wh
    grads[f"lstm{k}_b"] += d_b
    np.add.at(d_h, nbr, d_seq)
    return d_h


def _forward_pass(graph: FrameGraph, model: InductiveGraphModel):
    x = graph.features
    if x.shape[0] == 0:
        return np.zeros((0, model.n_classes)), ([], np.zeros((0, model.dims[-1])))
    if x.shape[1] != model.dims[0]:
        raise ValueError(f"graph feature dim {x.shape[1]} != model input dim {model.dims[0]}")
    h = x
    layer_caches = []
    for k in range(1, model.depth + 1):
        agg, agg_cache = _aggregate_layer(h, model, k)
        a = np.concatenate([h, agg], axis=1)
        s = a @ model.params[f"W{k}"].T
        layer_caches.append((h, a, s, agg_cache))
        h = relu(s)
    logits = h @ model.params["Wo"].T
    probs = softmax_rows(logits) if h.shape[0] else np.zeros((0, model.n_classes))
    return probs, (layer_caches, h)


def forward(graph: FrameGraph, model: InductiveGraphModel) -> PredictionSet:
    """Per-node class probabilities; an empty graph yields empty predictions."""
    probs, _ = _forward_pass(graph, model)
    items = [NodePrediction(box=rec.box,
                            label=model.class_labels[int(np.argmax(probs[i]))],
                            probs=probs[i])
             for i, rec in enumerate(graph.records)]
    return PredictionSet(items=items, class_labels=model.class_labels)


def predict_unseen(model: InductiveGraphModel, graph: FrameGraph) -> PredictionSet:
    """Score a graph of any size, including nodes never seen in training.

    Same code path as forward: no retraining, no graph-size assumption, and
    the model is never mutated.
    """
    return forward(graph, model)


def _resolve_labels(model: InductiveGraphModel, labels) -> np.ndarray:
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        out[i] = lab if isinstance(lab, (int, np.integer)) else model.label_index(lab)
        if not 0 <= out[i] < model.n_classes:
            raise ValueError(f"class index {out[i]} out of range")
    return out


def loss_and_backward(graph: FrameGraph, model: InductiveGraphModel, labels):
    """Summed cross-entropy over nodes plus exact reverse-mode gradients.

    labels: one target per node (class index or label string), canonical order.
    """
    if len(labels) != graph.n_nodes:
        raise ValueError(f"{graph.n_nodes} nodes but {len(labels)} labels")
    grads = {name: np.zeros_like(p) for name, p in model.params.items()}
    if graph.n_nodes == 0:
        return 0.0, grads
    y = _resolve_labels(model, labels)
    probs, (layer_caches, h_final) = _forward_pass(graph, model)
    loss = float(sum(cross_entropy(probs[i], int(y[i])) for i in range(len(y))))

    d_logits = probs.copy()
    d_logits[np.arange(len(y)), y] -= 1.0
    grads["Wo"] += d_logits.T @ h_final
    d_h = d_logits @ model.params["Wo"]
    for k in range(model.depth, 0, -1):
        h, a, s, agg_cache = layer_caches[k - 1]
        d_s = d_h * (s > 0)
        grads[f"W{k}"] += d_s.T @ a
        d_a = d_s @ model.params[f"W{k}"]
        d = h.shape[1]
        d_own = d_a[:, :d]
        d_agg = d_a[:, d:]
        d_h = d_own + _aggregate_backward(d_agg, agg_cache, model, k, grads,
                                          h.shape[0], d)
    return loss, grads


def fit(samples, class_labels, config: TrainConfig, *, hidden_dims=(32, 32),
        aggregator: str = "maxpool",
        init_model: InductiveGraphModel | None = None) -> InductiveGraphModel:
    """Adam-train a model on (FrameGraph, labels) pairs.

    Full-batch: gradients are summed over all graphs each epoch. Per-epoch
    mean node loss is recorded on model.train_losses. Deterministic per
    config.seed. Passing init_model warm-starts from its weights instead of
    a fresh seeded init.
    """
    config.validate()
    samples = [(g, list(lab)) for g, lab in samples]
    n_nodes = sum(g.n_nodes for g, _ in samples)
    if not samples or n_nodes == 0:
        raise ValueError("training needs at least one labeled node")
    in_dim = next(g.features.shape[1] for g, _ in samples if g.n_nodes > 0)
    if init_model is not None:
        model = InductiveGraphModel(
            dims=init_model.dims, aggregator=init_model.aggregator,
            class_labels=init_model.class_labels,
            params={k: p.copy() for k, p in init_model.params.items()})
    else:
        model = InductiveGraphModel.init(config.seed, in_dim, hidden_dims,
                                         class_labels, aggregator)
    state = AdamState.for_params(model.params, lr=config.lr)
    prev = None
    for _ in range(config.epochs):
        total = 0.0
        grads = {name: np.zeros_like(p) for name, p in model.params.items()}
        for g, labels in samples:
            loss, g_grads = loss_and_backward(g, model, labels)
            total += loss
            for name in grads:
                grads[name] += g_grads[name]
        adam_step(model.params, grads, state)
        epoch_loss = total / n_nodes
        model.train_losses.append(epoch_loss)
        if prev is not None and config.early_stop_tol > 0 and \
                abs(prev - epoch_loss) < config.early_stop_tol:
            break
        prev = epoch_loss
    for name, p in model.params.items():
        assert_finite(f"trained parameter {name}", p)
    return model


# --- transductive GCN baseline ---------------------------------------------

@dataclass(eq=False)
class TransductiveGcn:
    """Fixed-size GCN: symmetric-normalized propagation over a baked-in
    adjacency. Exists to demonstrate why a fixed adjacency cannot score
    graphs whose node count changed."""

    n: int
    adjacency: np.ndarray            # with self-connections, (n, n)
    weights: list                    # per-layer (d_in, d_out)
    w_out: np.ndarray                # (C, d_K)
    class_labels: tuple[str, ...]

    @classmethod
    def init(cls, seed: int, n: int, dims, class_labels,
             adjacency: np.ndarray | None = None) -> "TransductiveGcn":
        if adjacency is None:
            adjacency = np.ones((n, n))    # complete graph + self loops
        adjacency = np.asarray(adjacency, dtype=np.float64)
        if adjacency.shape != (n, n):
            raise ValueError("adjacency must be n x n")
        if not np.allclose(adjacency, adjacency.T) or np.any(np.diag(adjacency) != 1.0):
            raise ValueError("adjacency must be symmetric with unit diagonal")
        rng = np.random.default_rng(seed)
        weights = [rng.normal(0.0, np.sqrt(2.0 / dims[k]), (dims[k], dims[k + 1]))
                   for k in range(len(dims) - 1)]
        w_out = rng.normal(0.0, np.sqrt(1.0 / dims[-1]), (len(class_labels), dims[-1]))
        return cls(n=n, adjacency=adjacency, weights=weights, w_out=w_out,
                   class_labels=tuple(class_labels))

    def propagate(self, x: np.ndarray) -> np.ndarray:
        """K rounds of sigma(D^-1/2 A D^-1/2 H W)."""
        deg = self.adjacency.sum(axis=1)
        d_inv_sqrt = np.diag(1.0 / np.sqrt(deg))
        norm = d_inv_sqrt @ self.adjacency @ d_inv_sqrt
        h = np.asarray(x, dtype=np.float64)
        for w in self.weights:
            h = relu(norm @ h @ w)
        return h


def gcn_forward(graph: FrameGraph, model: TransductiveGcn) -> PredictionSet:
    if graph.n_nodes != model.n:
        raise UnsupportedGraphSizeError(
            f"transductive model fixed at {model.n} nodes cannot score a "
            f"{graph.n_nodes}-node graph; it has no update rule for unseen nodes")
    h = model.propagate(graph.features)
    logits = h @ model.w_out.T
    probs = softmax_rows(logits)
    items = [NodePrediction(box=rec.box,
                            label=model.class_labels[int(np.argmax(probs[i]))],
                            probs=probs[i])
             for i, rec in enumerate(graph.records)]
    return PredictionSet(items=items, class_labels=model.class_labels)


# --- local-feature baseline -------------------------------------------------

@dataclass(eq=False)
class LocalFeatureBaseline:
    """Multinomial logistic regression on the descriptor part of node
    features only; no box coordinates, no neighbors."""

    w: np.ndarray   # (C, d_app)
    b: np.ndarray   # (C,)
    class_labels: tuple[str, ...]


def local_baseline_fit(descriptors: np.ndarray, labels, class_labels,
                       config: TrainConfig) -> LocalFeatureBaseline:
    config.validate()
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("descriptors must be a non-empty (N, d) matrix")
    classes = tuple(class_labels)
    index = {lab: i for i, lab in enumerate(classes)}
    y = np.array([index[lab] for lab in labels], dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    params = {"w": rng.normal(0.0, 0.01, (len(classes), x.shape[1])),
              "b": np.zeros(len(classes))}
    state = AdamState.for_params(params, lr=config.lr)
    onehot = np.zeros((x.shape[0], len(classes)))
    onehot[np.arange(x.shape[0]), y] = 1.0
    for _ in range(config.epochs):
        probs = softmax_rows(x @ params["w"].T + params["b"])
        d_logits = probs - onehot
        grads = {"w": d_logits.T @ x, "b": d_logits.sum(axis=0)}
        adam_step(params, grads, state)
    return LocalFeatureBaseline(w=params["w"], b=params["b"], class_labels=classes)


def local_baseline_predict(model: LocalFeatureBaseline, descriptors: np.ndarray) -> list[str]:
    x = np.asarray(descriptors, dtype=np.float64)
    probs = softmax_rows(x @ model.w.T + model.b)
    return [model.class_labels[int(i)] for i in np.argmax(probs, axis=1)]


# --- checkpointing -----------------------------------------------------------

def save_model(model: InductiveGraphModel, path) -> None:
    payload = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "dims": list(model.dims),
        "aggregator": model.aggregator,
        "class_labels": list(model.class_labels),
        "params": {name: {"shape": list(p.shape), "values": p.ravel().tolist()}
                   for name, p in sorted(model.params.items())},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))


def load_model(path) -> InductiveGraphModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('checkpoint_version')!r}")
    params = {name: np.asarray(rec["values"], dtype=np.float64).reshape(rec["shape"])
              for name, rec in payload["params"].items()}
    return InductiveGraphModel(dims=tuple(payload["dims"]),
                               aggregator=payload["aggregator"],
                               class_labels=tuple(payload["class_labels"]),
                               params=params)
