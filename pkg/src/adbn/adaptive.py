"""Walking-distance monitoring and the three structure rules.

Each hidden neuron's walking distance (WD) for an epoch is the L2 norm of
the change of its parameter vector (hidden bias concatenated with its weight
column). Sustained fluctuation of WD flags a neuron that cannot settle and
should be split; a near-constant activation flags a redundant neuron to
remove; the per-layer WD total together with the free-energy spread decides
whether another layer is stacked.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rbm import CdConfig, Rbm, _as_batch, cd_epoch

NEURON_GENERATED = "NeuronGenerated"
NEURON_ANNIHILATED = "NeuronAnnihilated"
LAYER_GENERATED = "LayerGenerated"
NEURON_GRAFTED = "NeuronGrafted"


@dataclass
class StructureEvent:
    """One append-only record of a structural edit."""

    epoch: int
    kind: str
    layer_index: int
    neuron_index: int | None
    detail: str = ""
    seq: int = 0


def log_event(events: list[StructureEvent] | None, epoch: int, kind: str,
              layer_index: int, neuron_index: int | None, detail: str = "") -> None:
    if events is not None:
        events.append(StructureEvent(epoch, kind, layer_index, neuron_index, detail,
                                     seq=len(events)))


@dataclass
class StructureConfig:
    """Thresholds and limits for the structure rules."""

    theta_gen: float = 0.05
    theta_ann: float = 1e-4
    window: int = 10
    warmup_epochs: int = 20
    max_hidden: int = 64
    n_hidden_init: int = 8
    theta_wd_layer: float = 0.5
    theta_energy_layer: float = 1.0
    max_layers: int = 3
    inherit_noise_sigma: float = 0.01

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.warmup_epochs < self.window:
            raise ValueError(
                f"warmup_epochs ({self.warmup_epochs}) must be >= window ({self.window})"
            )
        for name in ("theta_gen", "theta_ann", "theta_wd_layer", "theta_energy_layer"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.inherit_noise_sigma < 0:
            raise ValueError("inherit_noise_sigma must be >= 0")
        if self.max_hidden < 1 or self.max_layers < 1 or self.n_hidden_init < 1:
            raise ValueError("max_hidden, max_layers and n_hidden_init must be >= 1")


class WdMonitor:
    """Per-neuron history of walking distances, index-aligned with an Rbm."""

    def __init__(self, n_neurons: int, window: int = 10):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        if n_neurons < 1:
            raise ValueError(f"n_neurons must be >= 1, got {n_neurons}")
        self.window = window
        self._history: list[list[float]] = [[] for _ in range(n_neurons)]
        self.epoch = 0

    @property
    def n_neurons(self) -> int:
        return len(self._history)

    def update(self, prev_params, cur_params) -> np.ndarray:
        """Record one epoch's WD per neuron from (W, c) snapshots; returns the WDs."""
        (w0, c0), (w1, c1) = prev_params, cur_params
        w0 = np.asarray(w0, dtype=np.float64)
        w1 = np.asarray(w1, dtype=np.float64)
        c0 = np.asarray(c0, dtype=np.float64)
        c1 = np.asarray(c1, dtype=np.float64)
        if w0.shape != w1.shape or c0.shape != c1.shape:
            raise ValueError("parameter shapes changed between snapshots")
        if w1.shape[1] != self.n_neurons or c1.shape[0] != self.n_neurons:
            raise ValueError(
                f"snapshot covers {w1.shape[1]} neurons, monitor tracks {self.n_neurons}"
            )
        wd = np.sqrt(((w1 - w0) ** 2).sum(axis=0) + (c1 - c0) ** 2)
        for j, value in enumerate(wd):
            self._history[j].append(float(value))
        self.epoch += 1
        return wd

    def window_values(self, j: int) -> list[float]:
        return self._history[j][-self.window:]

    def windowed_mean(self, j: int) -> float:
        win = self.window_values(j)
        return float(np.mean(win)) if win else 0.0

    def windowed_var(self, j: int) -> float:
        win = self.window_values(j)
        return float(np.var(win)) if win else 0.0

    def previous_window_mean(self, j: int) -> float | None:
        """Mean of the window immediately before the current one; None if empty."""
        h = self._history[j]
        prev = h[max(0, len(h) - 2 * self.window):len(h) - self.window]
        return float(np.mean(prev)) if prev else None

    def total_windowed_mean(self) -> float:
        return float(sum(self.windowed_mean(j) for j in range(self.n_neurons)))

    def on_neuron_added(self) -> None:
        self._history.append([])

    def on_neuron_removed(self, j: int) -> None:
        del self._history[j]


def check_neuron_generation(mon: WdMonitor, cfg: StructureConfig) -> set[int]:
    """Neurons whose WD still fluctuates: windowed variance above theta_gen
    while the windowed mean exceeds its value one window ago."""
    if mon.epoch < cfg.warmup_epochs:
        return set()
    if mon.n_neurons >= cfg.max_hidden:
        return set()
    picked = set()
    for j in range(mon.n_neurons):
        prev_mean = mon.previous_window_mean(j)
        if prev_mean is None:
            continue
        if mon.windowed_var(j) > cfg.theta_gen and mon.windowed_mean(j) > prev_mean:
            picked.add(j)
    return picked


def generate_neuron(m: Rbm, j: int, sigma: float, rng, *, monitor: WdMonitor | None = None,
                    events: list[StructureEvent] | None = None, epoch: int = 0,
                    layer_index: int = 0, max_hidden: int | None = None) -> int:
    """Split neuron j: append a noisy copy of its column and bias.

    Existing parameters are untouched; returns the new neuron's index.
    """
    if not 0 <= j < m.n_hidden:
        raise IndexError(f"neuron index {j} out of range for {m.n_hidden} hidden units")
    if max_hidden is not None and m.n_hidden >= max_hidden:
        raise ValueError(f"hidden capacity {max_hidden} exhausted")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    column = m.W[:, j].copy()
    if sigma > 0:
        column += rng.normal(0.0, sigma, size=m.n_visible)
    new_index = m.add_hidden(column, m.c[j])
    if monitor is not None:
        monitor.on_neuron_added()
    log_event(events, epoch, NEURON_GENERATED, layer_index, new_index,
              detail=f"split of neuron {j}")
    return new_index


def check_neuron_annihilation(m: Rbm, data, cfg: StructureConfig) -> set[int]:
    """Neurons whose activation is nearly constant over the data.

    The highest-variance neuron always survives, so the result never covers
    every neuron; a single-neuron model yields the empty set.
    """
    V, _ = _as_batch(data, m.n_visible, "data")
    if V.shape[0] == 0:
        raise ValueError("empty dataset")
    if m.n_hidden < 2:
        return set()
    variances = m.prob_h_given_v(V).var(axis=0)
    doomed = {j for j in range(m.n_hidden) if variances[j] < cfg.theta_ann}
    if len(doomed) == m.n_hidden:
        doomed.discard(int(np.argmax(variances)))
    return doomed


def annihilate_neuron(m: Rbm, j: int, *, monitor: WdMonitor | None = None,
                      events: list[StructureEvent] | None = None, epoch: int = 0,
                      layer_index: int = 0) -> None:
    """Remove neuron j; indices above shift down and the monitor realigns."""
    m.remove_hidden(j)
    if monitor is not None:
        monitor.on_neuron_removed(j)
    log_event(events, epoch, NEURON_ANNIHILATED, layer_index, j)


@dataclass
class LayerSignals:
    """Aggregate signals of a finished layer: WD total and free-energy spread."""

    total_wd: float
    energy: float


def layer_energy(m: Rbm, data) -> float:
    """Dataset-mean free energy shifted nonnegative by the dataset minimum."""
    f = m.free_energy(np.asarray(data, dtype=np.float64))
    return float(np.mean(f) - np.min(f))


def check_layer_generation(signals: LayerSignals, cfg: StructureConfig,
                           n_layers: int) -> bool:
    """True when both layer signals stay above their thresholds and capacity remains."""
    if n_layers >= cfg.max_layers:
        return False
    return signals.total_wd > cfg.theta_wd_layer and signals.energy > cfg.theta_energy_layer


@dataclass
class AdaptiveTrainReport:
    reconstruction_errors: list[float] = field(default_factory=list)
    total_wd: float = 0.0
    n_generated: int = 0
    n_annihilated: int = 0


def adaptive_cd_train(m: Rbm, data, cd_cfg: CdConfig, structure_cfg: StructureConfig, *,
                      monitor: WdMonitor | None = None,
                      events: list[StructureEvent] | None = None,
                      layer_index: int = 0) -> AdaptiveTrainReport:
    """CD training with the generation/annihilation rules applied each epoch.

    After the warmup, generation is evaluated once per epoch (at most one
    split per flagged parent) and annihilation runs strictly afterwards.
    """
    V, _ = _as_batch(data, m.n_visible, "data")
    if V.size and (V.min() < 0.0 or V.max() > 1.0):
        raise ValueError("training data must lie in [0, 1]")
    if m.n_hidden > structure_cfg.max_hidden:
        raise ValueError(
            f"model has {m.n_hidden} hidden neurons, above max_hidden={structure_cfg.max_hidden}"
        )
    if monitor is None:
        monitor = WdMonitor(m.n_hidden, structure_cfg.window)
    rng = np.random.default_rng(cd_cfg.seed)
    report = AdaptiveTrainReport()
    for _ in range(cd_cfg.epochs):
        prev = (m.W.copy(), m.c.copy())
        cd_epoch(m, V, cd_cfg, rng)
        m.check_finite()
        report.reconstruction_errors.append(m.reconstruction_error(V))
        monitor.update(prev, (m.W, m.c))
        if monitor.epoch < structure_cfg.warmup_epochs:
            continue
        for j in sorted(check_neuron_generation(monitor, structure_cfg)):
            if m.n_hidden >= structure_cfg.max_hidden:
                break
            generate_neuron(m, j, structure_cfg.inherit_noise_sigma, rng,
                            monitor=monitor, events=events, epoch=monitor.epoch,
                            layer_index=layer_index)
            report.n_generated += 1
        for j in sorted(check_neuron_annihilation(m, V, structure_cfg), reverse=True):
            if m.n_hidden < 2:
                break
            annihilate_neuron(m, j, monitor=monitor, events=events,
                              epoch=monitor.epoch, layer_index=layer_index)
            report.n_annihilated += 1
    report.total_wd = monitor.total_windowed_mean()
    return report
