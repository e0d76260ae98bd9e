"""Stacked RBMs with a softmax classifier head.

Layers are pretrained greedily; hidden probabilities (never samples)
propagate between layers, so forward evaluation, KL comparison and path
tracing are all deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .adaptive import (LAYER_GENERATED, LayerSignals, StructureConfig, StructureEvent,
                       adaptive_cd_train, check_layer_generation, layer_energy, log_event)
from .rbm import CdConfig, Rbm, _as_batch


@dataclass
class SoftmaxHead:
    """Linear classifier on the top layer's hidden probabilities."""

    U: np.ndarray  # (top_hidden, n_classes)
    d: np.ndarray  # (n_classes,)

    @classmethod
    def zeros(cls, n_in: int, n_classes: int) -> "SoftmaxHead":
        return cls(np.zeros((n_in, n_classes)), np.zeros(n_classes))

    def copy(self) -> "SoftmaxHead":
        return SoftmaxHead(self.U.copy(), self.d.copy())


@dataclass
class HeadReport:
    losses: list[float] = field(default_factory=list)


@dataclass
class EvalReport:
    accuracy: float
    per_class: np.ndarray
    confusion: np.ndarray


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class Dbn:
    """Ordered RBM stack, softmax head, and the structure-event log."""

    def __init__(self, layers: list[Rbm], head: SoftmaxHead,
                 events: list[StructureEvent] | None = None,
                 meta: dict | None = None):
        self.layers = layers
        self.head = head
        self.events = events if events is not None else []
        self.meta = meta if meta is not None else {}
        self.validate()

    def validate(self) -> None:
        if not self.layers:
            raise ValueError("a Dbn needs at least one layer")
        for l in range(len(self.layers) - 1):
            lo, hi = self.layers[l], self.layers[l + 1]
            if hi.n_visible != lo.n_hidden:
                raise ValueError(
                    f"layer {l + 1} expects {hi.n_visible} inputs but layer {l} "
                    f"has {lo.n_hidden} hidden neurons"
                )
        if self.head.U.shape[0] != self.layers[-1].n_hidden:
            raise ValueError(
                f"head takes {self.head.U.shape[0]} inputs but the top layer has "
                f"{self.layers[-1].n_hidden} hidden neurons"
            )
        if self.head.U.shape[1] != self.d_width:
            raise ValueError("head weight and bias widths differ")

    @property
    def d_width(self) -> int:
        return self.head.d.shape[0]

    @property
    def n_classes(self) -> int:
        return self.head.U.shape[1]

    @property
    def n_visible(self) -> int:
        return self.layers[0].n_visible

    def clone(self) -> "Dbn":
        return Dbn([layer.copy() for layer in self.layers], self.head.copy(),
                   events=list(self.events), meta=dict(self.meta))

    # -- inference ---------------------------------------------------------

    def hidden_activations(self, v) -> list[np.ndarray]:
        """Per-layer hidden probabilities for one vector or a batch."""
        V, single = _as_batch(v, self.n_visible, "v")
        acts = []
        x = V
        for layer in self.layers:
            x = layer.prob_h_given_v(x)
            acts.append(x)
        return [a[0] for a in acts] if single else acts

    def forward(self, v):
        """All per-layer hidden probabilities plus the class distribution."""
        V, single = _as_batch(v, self.n_visible, "v")
        acts = self.hidden_activations(V)
        probs = _softmax(acts[-1] @ self.head.U + self.head.d)
        if single:
            return [a[0] for a in acts], probs[0]
        return acts, probs

    def predict_proba(self, v) -> np.ndarray:
        _, probs = self.forward(v)
        return probs

    def predict(self, v):
        """Most probable class; ties go to the lowest class index."""
        probs = self.predict_proba(v)
        if probs.ndim == 1:
            return int(np.argmax(probs))
        return np.argmax(probs, axis=1)

    # -- training ----------------------------------------------------------

    def train_head(self, data, labels, epochs: int, lr: float) -> HeadReport:
        """Full-batch cross-entropy gradient descent on the head only."""
        V, _ = _as_batch(data, self.n_visible, "data")
        y = _check_labels(labels, self.n_classes, V.shape[0])
        if epochs < 0:
            raise ValueError("epochs must be >= 0")
        X = self.hidden_activations(V)[-1]
        n = X.shape[0]
        onehot = np.zeros((n, self.n_classes))
        onehot[np.arange(n), y] = 1.0
        report = HeadReport()
        for _ in range(epochs):
            logits = X @ self.head.U + self.head.d
            logits -= logits.max(axis=1, keepdims=True)
            logz = np.log(np.exp(logits).sum(axis=1))
            report.losses.append(float(np.mean(logz - logits[np.arange(n), y])))
            delta = (np.exp(logits - logz[:, None]) - onehot) / n
            self.head.U -= lr * (X.T @ delta)
            self.head.d -= lr * delta.sum(axis=0)
        return report

    def evaluate(self, data, labels) -> EvalReport:
        """Accuracy, per-class accuracy and the (true x predicted) confusion matrix."""
        V, _ = _as_batch(data, self.n_visible, "data")
        y = _check_labels(labels, self.n_classes, V.shape[0])
        preds = self.predict(V)
        k = self.n_classes
        confusion = np.zeros((k, k), dtype=np.int64)
        np.add.at(confusion, (y, preds), 1)
        support = confusion.sum(axis=1)
        with np.errstate(invalid="ignore"):
            per_class = np.where(support > 0, np.diag(confusion) / np.maximum(support, 1),
                                 np.nan)
        accuracy = float(np.trace(confusion) / max(1, confusion.sum()))
        return EvalReport(accuracy=accuracy, per_class=per_class, confusion=confusion)


def _check_labels(labels, n_classes: int, n_expected: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (n_expected,):
        raise ValueError(f"labels have shape {y.shape}, expected ({n_expected},)")
    if y.size and (not np.issubdtype(y.dtype, np.integer)):
        if not np.array_equal(y, y.astype(np.int64)):
            raise ValueError("labels must be integers")
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes}), got range "
                         f"[{y.min()}, {y.max()}]")
    return y


def derive_seed(*parts: int) -> int:
    """Stable child seed from an integer key path."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def pretrain(data, structure_cfg: StructureConfig, cd_cfg: CdConfig,
             n_classes: int) -> Dbn:
    """Greedy adaptive pretraining; stacks layers while both layer signals stay hot.

    The returned model carries an untrained (all-zero) head and the full
    structure-event log.
    """
    V, _ = np.asarray(data, dtype=np.float64), None
    if V.ndim != 2 or V.shape[0] == 0:
        raise ValueError("data must be a nonempty matrix")
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    events: list[StructureEvent] = []
    layers: list[Rbm] = []
    x = V
    layer_index = 0
    while True:
        init_seed = derive_seed(cd_cfg.seed, layer_index, 0)
        train_seed = derive_seed(cd_cfg.seed, layer_index, 1)
        rbm = Rbm(x.shape[1], structure_cfg.n_hidden_init, seed=init_seed)
        layer_report = adaptive_cd_train(rbm, x, replace(cd_cfg, seed=train_seed),
                                         structure_cfg, events=events,
                                         layer_index=layer_index)
        energy = layer_energy(rbm, x)
        layers.append(rbm)
        x = rbm.prob_h_given_v(x)
        if x.min() < 0.0 or x.max() > 1.0:
            raise FloatingPointError("propagated activations left [0, 1]")
        signals = LayerSignals(total_wd=layer_report.total_wd, energy=energy)
        if not check_layer_generation(signals, structure_cfg, len(layers)):
            break
        layer_index += 1
        log_event(events, cd_cfg.epochs, LAYER_GENERATED, layer_index, None,
                  detail=f"total_wd={signals.total_wd:.6f} energy={signals.energy:.6f}")
    head = SoftmaxHead.zeros(layers[-1].n_hidden, n_classes)
    return Dbn(layers, head, events=events,
               meta={"seed": cd_cfg.seed, "provenance": "pretrain"})
