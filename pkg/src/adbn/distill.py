"""Parent/child model comparison and repair.

A child model is a structural clone of a trained parent, retrained on the
parent's problem cases. Per-sample KL divergence between the two class
distributions selects the inputs whose activation paths are compared; child
neurons that fire on a diverging path but not in the parent are grafted into
the parent, which is then perturbed, retrained, and optionally fine-tuned by
overwriting path-traversed weights of exclusively-correct or
exclusively-wrong neurons.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adaptive import NEURON_GRAFTED, log_event
from .dbn import Dbn, derive_seed
from .rbm import CdConfig, _as_batch, cd_train


# -- KL divergence ---------------------------------------------------------

Q_FLOOR = 1e-12


def per_sample_kl(p, q) -> float:
    """sum_i p_i ln(p_i / q_i) with 0 ln(0/q) = 0; q floored at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 1 or p.shape != q.shape:
        raise ValueError(f"p and q must be equal-length vectors, got {p.shape} vs {q.shape}")
    for name, dist in (("p", p), ("q", q)):
        if dist.size and dist.min() < 0:
            raise ValueError(f"{name} has negative components")
        if abs(dist.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} sums to {dist.sum()!r}, expected 1")
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / np.maximum(q[mask], Q_FLOOR))))


@dataclass
class KlReport:
    """Per-sample KL values and their sum."""

    per_sample: np.ndarray
    aggregate: float


def dataset_kl(parent: Dbn, child: Dbn, data) -> KlReport:
    """KL of the parent's class distribution against the child's, per sample."""
    if parent.n_classes != child.n_classes:
        raise ValueError(
            f"class counts differ: parent {parent.n_classes}, child {child.n_classes}"
        )
    P = parent.predict_proba(data)
    Q = child.predict_proba(data)
    if P.ndim == 1:
        P, Q = P[None, :], Q[None, :]
    values = np.array([per_sample_kl(P[i], Q[i]) for i in range(P.shape[0])])
    return KlReport(per_sample=values, aggregate=float(values.sum()))


def split_by_threshold(report: KlReport, theta_kl: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices with KL above the threshold, and those at or below (order preserved)."""
    values = np.asarray(report.per_sample)
    above = np.flatnonzero(values > theta_kl)
    at_or_below = np.flatnonzero(values <= theta_kl)
    return above, at_or_below


# -- activation paths ------------------------------------------------------

@dataclass
class PathTrace:
    """Binarized hidden activations per layer, plus the predicted class."""

    layers: list[np.ndarray]
    predicted_class: int


def _binary_activations(m: Dbn, X: np.ndarray, threshold: float):
    acts, probs = m.forward(X)
    binary = [(a >= threshold) for a in acts]
    preds = np.argmax(probs, axis=1)
    return binary, preds


def trace_path(m: Dbn, v, activation_threshold: float = 0.5) -> PathTrace:
    """Trace one input; a neuron is on the path when its probability >= threshold."""
    V, single = _as_batch(v, m.n_visible, "v")
    if not single:
        raise ValueError("trace_path takes a single input vector; use trace_paths")
    return trace_paths(m, V, activation_threshold)[0]


def trace_paths(m: Dbn, X, activation_threshold: float = 0.5) -> list[PathTrace]:
    V, _ = _as_batch(X, m.n_visible, "X")
    binary, preds = _binary_activations(m, V, activation_threshold)
    return [PathTrace(layers=[b[i].astype(np.uint8) for b in binary],
                      predicted_class=int(preds[i]))
            for i in range(V.shape[0])]


@dataclass
class PathDiff:
    """Per-layer sets of neurons active in only one of the two traces."""

    child_only: dict[int, frozenset[int]] = field(default_factory=dict)
    parent_only: dict[int, frozenset[int]] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not self.child_only and not self.parent_only


def diff_paths(parent_trace: PathTrace, child_trace: PathTrace,
               layer_range: tuple[int, int] | None = None) -> PathDiff:
    """Set difference of active neurons per layer, restricted to layer_range.

    ``layer_range`` is a half-open (start, stop) index span; None compares
    every layer. Empty diff iff the traces agree on the whole range.
    """
    n_parent = len(parent_trace.layers)
    n_child = len(child_trace.layers)
    if layer_range is None:
        layer_range = (0, n_parent)
    start, stop = layer_range
    if not (0 <= start <= stop):
        raise ValueError(f"bad layer range ({start}, {stop})")
    if stop > n_parent or stop > n_child:
        raise ValueError(
            f"layer range ({start}, {stop}) exceeds trace depth "
            f"(parent {n_parent}, child {n_child})"
        )
    diff = PathDiff()
    for l in range(start, stop):
        active_parent = set(np.flatnonzero(parent_trace.layers[l]).tolist())
        active_child = set(np.flatnonzero(child_trace.layers[l]).tolist())
        child_only = frozenset(active_child - active_parent)
        parent_only = frozenset(active_parent - active_child)
        if child_only:
            diff.child_only[l] = child_only
        if parent_only:
            diff.parent_only[l] = parent_only
    return diff


def merge_path_diffs(diffs) -> PathDiff:
    """Union of several diffs, layer by layer."""
    merged = PathDiff()
    for d in diffs:
        for l, s in d.child_only.items():
            merged.child_only[l] = merged.child_only.get(l, frozenset()) | s
        for l, s in d.parent_only.items():
            merged.parent_only[l] = merged.parent_only.get(l, frozenset()) | s
    return merged


# -- grafting --------------------------------------------------------------

@dataclass
class GraftReport:
    """(layer, child neuron, new parent index) for every grafted neuron."""

    grafted: list[tuple[int, int, int]] = field(default_factory=list)


def graft_neurons(parent: Dbn, child: Dbn, diff: PathDiff, *, epoch: int = 0) -> GraftReport:
    """Copy each child-only neuron into the parent at its layer.

    The new neuron keeps the child's incoming weights/bias and its outgoing
    row into the next layer (or the head); connections to units that exist
    only in the parent start at zero. An empty diff leaves the parent
    bitwise unchanged.
    """
    n_layers = len(parent.layers)
    if n_layers != len(child.layers):
        raise ValueError(
            f"layer counts differ: parent {n_layers}, child {len(child.layers)}"
        )
    if parent.n_classes != child.n_classes:
        raise ValueError("class counts differ between parent and child")
    report = GraftReport()
    for l in sorted(diff.child_only):
        if not 0 <= l < n_layers:
            raise ValueError(f"diff references layer {l}, outside 0..{n_layers - 1}")
        for j in sorted(diff.child_only[l]):
            child_rbm = child.layers[l]
            parent_rbm = parent.layers[l]
            if j >= child_rbm.n_hidden:
                raise ValueError(f"child layer {l} has no neuron {j}")
            if parent_rbm.n_visible < child_rbm.n_visible:
                raise ValueError(f"parent layer {l} is narrower than the child's")
            incoming = np.zeros(parent_rbm.n_visible)
            incoming[:child_rbm.n_visible] = child_rbm.W[:, j]
            new_index = parent_rbm.add_hidden(incoming, child_rbm.c[j])
            if l + 1 < n_layers:
                child_up = child.layers[l + 1]
                parent_up = parent.layers[l + 1]
                outgoing = np.zeros(parent_up.n_hidden)
                outgoing[:child_up.n_hidden] = child_up.W[j, :]
                parent_up.add_visible(outgoing, child_up.b[j])
            else:
                parent.head.U = np.vstack([parent.head.U, child.head.U[j]])
            log_event(parent.events, epoch, NEURON_GRAFTED, l, new_index,
                      detail=f"copied child neuron {j}")
            report.grafted.append((l, j, new_index))
    parent.validate()
    return report


def grafted_locations(m: Dbn) -> dict[int, list[int]]:
    """Layer -> neuron indices recorded as grafted in the event log."""
    out: dict[int, list[int]] = {}
    for event in m.events:
        if event.kind == NEURON_GRAFTED and event.neuron_index is not None:
            out.setdefault(event.layer_index, []).append(event.neuron_index)
    return out


# -- retraining ------------------------------------------------------------

@dataclass
class PerturbReport:
    n_perturbed: int = 0
    cd_errors: dict[int, list[float]] = field(default_factory=dict)
    head_losses: list[float] = field(default_factory=list)


def perturb_retrain(parent: Dbn, data, labels, epochs: int, lr: float,
                    sigma_perturb: float = 0.005, *,
                    cd_refresh_epochs: int | None = None,
                    cd_lr: float | None = None,
                    batch_size: int = 32,
                    seed: int = 0,
                    grafted: dict[int, list[int]] | None = None) -> PerturbReport:
    """Jitter grafted neurons, refresh the affected layers with CD, retrain the head.

    ``cd_refresh_epochs`` defaults to 20, or 0 when ``epochs`` is 0 so that a
    zero-epoch call with sigma 0 leaves the model unchanged.
    """
    V, _ = _as_batch(data, parent.n_visible, "data")
    if cd_refresh_epochs is None:
        cd_refresh_epochs = 20 if epochs > 0 else 0
    if cd_lr is None:
        cd_lr = lr
    if grafted is None:
        grafted = grafted_locations(parent)
    rng = np.random.default_rng(seed)
    report = PerturbReport()

    n_layers = len(parent.layers)
    if sigma_perturb > 0:
        for l in sorted(grafted):
            rbm = parent.layers[l]
            for g in sorted(grafted[l]):
                rbm.W[:, g] += rng.normal(0.0, sigma_perturb, size=rbm.n_visible)
                rbm.c[g] += rng.normal(0.0, sigma_perturb)
                if l + 1 < n_layers:
                    up = parent.layers[l + 1]
                    up.W[g, :] += rng.normal(0.0, sigma_perturb, size=up.n_hidden)
                else:
                    parent.head.U[g, :] += rng.normal(0.0, sigma_perturb,
                                                      size=parent.n_classes)
                report.n_perturbed += 1

    if cd_refresh_epochs > 0 and grafted:
        affected = set()
        for l in grafted:
            affected.add(l)
            if l + 1 < n_layers:
                affected.add(l + 1)
        x = V
        for l, rbm in enumerate(parent.layers):
            if l in affected:
                cfg = CdConfig(k=1, learning_rate=cd_lr, batch_size=batch_size,
                               epochs=cd_refresh_epochs, seed=derive_seed(seed, 1, l))
                cd_report = cd_train(rbm, x, cfg)
                report.cd_errors[l] = cd_report.reconstruction_errors
            x = rbm.prob_h_given_v(x)

    if epochs > 0:
        report.head_losses = parent.train_head(V, labels, epochs, lr).losses
    return report


# -- fine-tuning (path-based weight overwrite) ------------------------------

@dataclass
class FineTuneConfig:
    """Thresholds and constants for the exclusive-firing weight overwrite."""

    theta_T: float = 0.3
    theta_F: float = 0.3
    w_correct: float = 1.0
    w_wrong: float = 0.0
    activation_threshold: float = 0.5
    exclusive: bool = True

    def __post_init__(self):
        for name in ("theta_T", "theta_F"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if not 0 < self.activation_threshold < 1:
            raise ValueError("activation_threshold must lie in (0, 1)")


@dataclass
class FineTuneReport:
    """Edges overwritten per rule: (layer, neuron, target, new value).

    ``target`` is a next-layer neuron index, or a class index for the top
    layer. Only edges whose value actually changed are listed.
    """

    modified: list[tuple[int, int, int, float]] = field(default_factory=list)
    n_correct_rule: int = 0
    n_wrong_rule: int = 0


def fine_tune(m: Dbn, X, Y, cfg: FineTuneConfig | None = None) -> FineTuneReport:
    """Overwrite traversed outgoing weights of exclusively-fired neurons.

    All activations are recorded in one forward pass; the correct/wrong
    partition compares predictions with Y. A neuron qualifies for the
    correct rule when the fraction of samples firing it, all of them
    correct, reaches theta_T (symmetrically for the wrong rule); its
    outgoing edges along the firing samples' recorded paths are then set to
    w_correct (w_wrong).
    """
    cfg = cfg if cfg is not None else FineTuneConfig()
    V, _ = _as_batch(X, m.n_visible, "X")
    if V.shape[0] == 0:
        raise ValueError("X must be nonempty")
    y = np.asarray(Y, dtype=np.int64)
    if y.shape != (V.shape[0],):
        raise ValueError(f"Y has shape {y.shape}, expected ({V.shape[0]},)")
    binary, preds = _binary_activations(m, V, cfg.activation_threshold)
    correct = preds == y
    n_total = V.shape[0]
    n_layers = len(m.layers)
    report = FineTuneReport()

    def overwrite(l: int, j: int, sample_mask: np.ndarray, value: float) -> None:
        if l + 1 < n_layers:
            targets = np.flatnonzero(binary[l + 1][sample_mask].any(axis=0))
            matrix = m.layers[l + 1].W
        else:
            targets = np.unique(preds[sample_mask])
            matrix = m.head.U
        for k in targets:
            if matrix[j, k] != value:
                matrix[j, k] = value
                report.modified.append((l, j, int(k), value))

    for l in range(n_layers):
        fired = binary[l]
        fired_correct = fired[correct].sum(axis=0)
        fired_wrong = fired[~correct].sum(axis=0)
        if cfg.exclusive:
            act_correct = np.where(fired_wrong == 0, fired_correct, 0)
            act_wrong = np.where(fired_correct == 0, fired_wrong, 0)
        else:
            act_correct, act_wrong = fired_correct, fired_wrong
        for j in np.flatnonzero(act_correct / n_total >= cfg.theta_T):
            report.n_correct_rule += 1
            overwrite(l, int(j), correct & fired[:, j], cfg.w_correct)
        for j in np.flatnonzero(act_wrong / n_total >= cfg.theta_F):
            report.n_wrong_rule += 1
            overwrite(l, int(j), (~correct) & fired[:, j], cfg.w_wrong)
    return report


# -- end-to-end repair -----------------------------------------------------

@dataclass
class RepairConfig:
    """Knobs of the repair pipeline."""

    theta_kl: float = 0.0015
    activation_threshold: float = 0.5
    upper_layers: int = 2
    child_train_set: str = "misclassified"  # or "correct" / "all"
    child_head_epochs: int = 100
    child_lr: float = 0.5
    child_cd_epochs: int = 10
    child_cd_lr: float = 0.05
    child_max_rounds: int = 10
    retrain_head_epochs: int = 100
    retrain_lr: float = 0.5
    cd_refresh_epochs: int = 20
    cd_refresh_lr: float = 0.05
    sigma_perturb: float = 0.005
    fine_tune: FineTuneConfig = field(default_factory=FineTuneConfig)
    fine_tune_scope: str = "targets"  # or "all" / "none"
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.theta_kl <= 0:
            raise ValueError("theta_kl must be > 0")
        if self.upper_layers < 1:
            raise ValueError("upper_layers must be >= 1")
        if self.child_train_set not in ("misclassified", "correct", "all"):
            raise ValueError(f"unknown child_train_set {self.child_train_set!r}")
        if self.fine_tune_scope not in ("targets", "all", "none"):
            raise ValueError(f"unknown fine_tune_scope {self.fine_tune_scope!r}")


@dataclass
class RepairReport:
    no_op: bool
    message: str
    target_classes: list[int]
    seed: int
    before: "EvalReport"
    after: "EvalReport | None" = None
    kl: KlReport | None = None
    n_above_threshold: int = 0
    n_misclassified: int = 0
    child_rounds: int = 0
    grafted: list[tuple[int, int, int]] = field(default_factory=list)
    fine_tune: FineTuneReport | None = None


def retrain_child(parent: Dbn, X, Y, cfg: RepairConfig) -> tuple[Dbn, int]:
    """Clone the parent and retrain it (CD refresh + head) on (X, Y).

    Runs at least one round and stops once every sample is classified
    correctly or ``child_max_rounds`` is reached. The clone keeps the
    parent's layer widths, so activation paths stay comparable.
    """
    child = parent.clone()
    rounds = 0
    for r in range(max(1, cfg.child_max_rounds)):
        rounds = r + 1
        x = np.asarray(X, dtype=np.float64)
        for l, rbm in enumerate(child.layers):
            cd_cfg = CdConfig(k=1, learning_rate=cfg.child_cd_lr,
                              batch_size=cfg.batch_size, epochs=cfg.child_cd_epochs,
                              seed=derive_seed(cfg.seed, 2, r, l))
            cd_train(rbm, x, cd_cfg)
            x = rbm.prob_h_given_v(x)
        child.train_head(X, Y, cfg.child_head_epochs, cfg.child_lr)
        if np.array_equal(child.predict(X), np.asarray(Y)):
            break
    return child, rounds


def repair_pipeline(parent: Dbn, data, labels, target_classes,
                    cfg: RepairConfig | None = None) -> RepairReport:
    """Full child-distillation repair of the parent on the target classes.

    Stages: collect the parent's mis-classified target samples; retrain a
    cloned child on them; threshold the per-sample KL between the two
    models; diff the upper-layer activation paths of the high-KL samples;
    graft the child-only neurons; perturb and retrain; fine-tune; re-evaluate.
    """
    cfg = cfg if cfg is not None else RepairConfig()
    V, _ = _as_batch(data, parent.n_visible, "data")
    y = np.asarray(labels, dtype=np.int64)
    targets = sorted(int(t) for t in target_classes)
    if not targets:
        raise ValueError("target_classes must be nonempty")
    if any(t < 0 or t >= parent.n_classes for t in targets):
        raise ValueError(f"target classes {targets} outside [0, {parent.n_classes})")

    before = parent.evaluate(V, y)
    target_mask = np.isin(y, targets)
    tX, tY = V[target_mask], y[target_mask]
    if tX.shape[0] == 0:
        raise ValueError("no samples of the target classes in the data")
    mis_mask = parent.predict(tX) != tY
    report = RepairReport(no_op=False, message="", target_classes=targets,
                          seed=cfg.seed, before=before,
                          n_misclassified=int(mis_mask.sum()))
    if not mis_mask.any():
        report.no_op = True
        report.message = "parent classifies every target-class sample correctly"
        report.after = before
        return report

    if cfg.child_train_set == "misclassified":
        cX, cY = tX[mis_mask], tY[mis_mask]
    elif cfg.child_train_set == "correct":
        cX, cY = tX[~mis_mask], tY[~mis_mask]
    else:
        cX, cY = tX, tY
    child, rounds = retrain_child(parent, cX, cY, cfg)
    report.child_rounds = rounds

    kl = dataset_kl(parent, child, tX)
    report.kl = kl
    above, _ = split_by_threshold(kl, cfg.theta_kl)
    report.n_above_threshold = int(above.size)

    if above.size:
        n_layers = len(parent.layers)
        span = (max(0, n_layers - cfg.upper_layers), n_layers)
        parent_traces = trace_paths(parent, tX[above], cfg.activation_threshold)
        child_traces = trace_paths(child, tX[above], cfg.activation_threshold)
        merged = merge_path_diffs(
            diff_paths(p, c, span) for p, c in zip(parent_traces, child_traces)
        )
        graft_report = graft_neurons(parent, child, merged)
        report.grafted = graft_report.grafted

    perturb_retrain(parent, V, y, cfg.retrain_head_epochs, cfg.retrain_lr,
                    cfg.sigma_perturb, cd_refresh_epochs=cfg.cd_refresh_epochs,
                    cd_lr=cfg.cd_refresh_lr, batch_size=cfg.batch_size,
                    seed=derive_seed(cfg.seed, 3))

    if cfg.fine_tune_scope != "none":
        if cfg.fine_tune_scope == "targets":
            ftX, ftY = tX, tY
        else:
            ftX, ftY = V, y
        report.fine_tune = fine_tune(parent, ftX, ftY, cfg.fine_tune)

    report.after = parent.evaluate(V, y)
    report.message = (
        f"repaired classes {targets}: grafted {len(report.grafted)} neurons "
        f"from {report.n_above_threshold} high-KL samples"
    )
    return report
