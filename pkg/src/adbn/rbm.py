"""Bernoulli-Bernoulli restricted Boltzmann machine with CD-k training.

Energy of a joint state is ``E(v, h) = -b.v - c.h - v.W.h``; the free energy
of a visible vector marginalizes the hidden units analytically,
``F(v) = -b.v - sum_j log(1 + exp(c_j + (v.W)_j))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


def _as_batch(x, width: int, name: str) -> tuple[np.ndarray, bool]:
    """Coerce a vector or matrix to a 2-D float batch of the given width."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValueError(f"{name} has shape {np.shape(x)}, expected (*, {width})")
    return arr, single


@dataclass
class CdConfig:
    """Contrastive-divergence hyperparameters."""

    k: int = 1
    learning_rate: float = 0.1
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")


@dataclass
class CdReport:
    """Per-epoch training diagnostics."""

    reconstruction_errors: list[float] = field(default_factory=list)


class Rbm:
    """One RBM layer: weight matrix ``W`` plus visible/hidden biases ``b``/``c``.

    Weights are held with one contiguous row per hidden neuron so that the
    pre-activation of each neuron is computed from exactly the same buffers
    before and after structural edits; outputs of untouched neurons are
    therefore bitwise stable when neurons are appended or removed.
    """

    def __init__(self, n_visible: int, n_hidden: int, seed: int = 0):
        if n_visible < 1 or n_hidden < 1:
            raise ValueError(
                f"need at least one visible and one hidden unit, got {n_visible}x{n_hidden}"
            )
        rng = np.random.default_rng(seed)
        # rows of _Wt are per-neuron weight vectors; W exposes the usual
        # (n_visible, n_hidden) orientation as a transposed view
        self._Wt = np.ascontiguousarray(rng.normal(0.0, 0.01, size=(n_hidden, n_visible)))
        self.b = np.zeros(n_visible)
        self.c = np.zeros(n_hidden)

    @property
    def W(self) -> np.ndarray:
        return self._Wt.T

    @W.setter
    def W(self, value) -> None:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != (self.n_visible, self.n_hidden):
            raise ValueError(f"W must keep shape {(self.n_visible, self.n_hidden)}")
        self._Wt = np.ascontiguousarray(value.T)

    @property
    def n_visible(self) -> int:
        return self._Wt.shape[1]

    @property
    def n_hidden(self) -> int:
        return self._Wt.shape[0]

    def copy(self) -> "Rbm":
        dup = object.__new__(Rbm)
        dup._Wt = self._Wt.copy()
        dup.b = self.b.copy()
        dup.c = self.c.copy()
        return dup

    # -- conditionals ------------------------------------------------------

    def _pre_hidden(self, V: np.ndarray) -> np.ndarray:
        # per-neuron gemv over a contiguous row: the call for neuron j is
        # identical no matter how many other neurons exist
        out = np.empty((V.shape[0], self.n_hidden))
        for j in range(self.n_hidden):
            out[:, j] = V @ self._Wt[j]
        out += self.c
        return out

    def prob_h_given_v(self, v) -> np.ndarray:
        """P(h_j = 1 | v) = sigmoid(c_j + (v.W)_j), for one vector or a batch."""
        V, single = _as_batch(v, self.n_visible, "v")
        p = expit(self._pre_hidden(V))
        return p[0] if single else p

    def prob_v_given_h(self, h) -> np.ndarray:
        """P(v_i = 1 | h) = sigmoid(b_i + (W.h)_i), for one vector or a batch."""
        H, single = _as_batch(h, self.n_hidden, "h")
        p = expit(H @ self._Wt + self.b)
        return p[0] if single else p

    # -- energies ----------------------------------------------------------

    def energy(self, v, h) -> float:
        """Joint energy E(v, h) of one binary configuration."""
        v = np.asarray(v, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        if v.shape != (self.n_visible,):
            raise ValueError(f"v has shape {v.shape}, expected ({self.n_visible},)")
        if h.shape != (self.n_hidden,):
            raise ValueError(f"h has shape {h.shape}, expected ({self.n_hidden},)")
        return float(-(self.b @ v) - (self.c @ h) - (self._Wt @ v) @ h)

    def free_energy(self, v):
        """F(v) with hidden units summed out; satisfies exp(-F(v)) = sum_h exp(-E(v,h))."""
        V, single = _as_batch(v, self.n_visible, "v")
        f = -(V @ self.b) - np.logaddexp(0.0, self._pre_hidden(V)).sum(axis=1)
        return float(f[0]) if single else f

    def free_energy_grad(self, v) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gradient of the batch-mean free energy w.r.t. (W, b, c)."""
        V, _ = _as_batch(v, self.n_visible, "v")
        p = expit(self._pre_hidden(V))
        n = V.shape[0]
        dW = -(V.T @ p) / n
        db = -V.mean(axis=0)
        dc = -p.mean(axis=0)
        return dW, db, dc

    def reconstruction_error(self, data) -> float:
        """Mean absolute error of the deterministic mean-field round trip."""
        V, _ = _as_batch(data, self.n_visible, "data")
        recon = self.prob_v_given_h(self.prob_h_given_v(V))
        return float(np.abs(V - recon).mean())

    # -- structural edits --------------------------------------------------

    def add_hidden(self, weights, bias: float) -> int:
        """Append a hidden neuron; returns its index. Existing rows are untouched."""
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (self.n_visible,):
            raise ValueError(f"weights have shape {w.shape}, expected ({self.n_visible},)")
        self._Wt = np.ascontiguousarray(np.vstack([self._Wt, w]))
        self.c = np.append(self.c, float(bias))
        return self.n_hidden - 1

    def remove_hidden(self, j: int) -> None:
        """Delete hidden neuron j; neurons above j shift down by one."""
        if not 0 <= j < self.n_hidden:
            raise IndexError(f"hidden index {j} out of range for {self.n_hidden} neurons")
        if self.n_hidden == 1:
            raise ValueError("cannot remove the last hidden neuron")
        self._Wt = np.ascontiguousarray(np.delete(self._Wt, j, axis=0))
        self.c = np.delete(self.c, j)

    def add_visible(self, weights, bias: float) -> int:
        """Append a visible unit (one new weight per hidden neuron); returns its index."""
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (self.n_hidden,):
            raise ValueError(f"weights have shape {w.shape}, expected ({self.n_hidden},)")
        self._Wt = np.ascontiguousarray(np.column_stack([self._Wt, w]))
        self.b = np.append(self.b, float(bias))
        return self.n_visible - 1

    def check_finite(self) -> None:
        for name, arr in (("W", self._Wt), ("b", self.b), ("c", self.c)):
            if not np.isfinite(arr).all():
                raise FloatingPointError(f"non-finite values in parameter {name}")

    def __repr__(self) -> str:
        return f"Rbm(n_visible={self.n_visible}, n_hidden={self.n_hidden})"


def cd_epoch(m: Rbm, V: np.ndarray, cfg: CdConfig, rng: np.random.Generator) -> None:
    """One CD-k sweep over the data in shuffled minibatches.

    Hidden states are sampled during the Gibbs steps; the gradient statistics
    use mean-field probabilities.
    """
    lr = cfg.learning_rate
    order = rng.permutation(V.shape[0])
    for start in range(0, V.shape[0], cfg.batch_size):
        v0 = V[order[start:start + cfg.batch_size]]
        h0 = expit(m._pre_hidden(v0))
        hs = (rng.random(h0.shape) < h0).astype(np.float64)
        for step in range(cfg.k):
            vk = expit(hs @ m._Wt + m.b)
            hk = expit(m._pre_hidden(vk))
            if step + 1 < cfg.k:
                hs = (rng.random(hk.shape) < hk).astype(np.float64)
        n = v0.shape[0]
        m.W += lr * (v0.T @ h0 - vk.T @ hk) / n
        m.b += lr * (v0 - vk).mean(axis=0)
        m.c += lr * (h0 - hk).mean(axis=0)


def cd_train(m: Rbm, data, cfg: CdConfig, monitor=None) -> CdReport:
    """Train in place for ``cfg.epochs`` epochs; fully reproducible from ``cfg.seed``.

    If a monitor is supplied it receives the (W, c) snapshots around each
    epoch so per-neuron parameter movement can be tracked.
    """
    V, _ = _as_batch(data, m.n_visible, "data")
    if V.size and (V.min() < 0.0 or V.max() > 1.0):
        raise ValueError("training data must lie in [0, 1]")
    rng = np.random.default_rng(cfg.seed)
    report = CdReport()
    for _ in range(cfg.epochs):
        prev = (m.W.copy(), m.c.copy()) if monitor is not None else None
        cd_epoch(m, V, cfg, rng)
        m.check_finite()
        report.reconstruction_errors.append(m.reconstruction_error(V))
        if monitor is not None:
            monitor.update(prev, (m.W, m.c))
    return report
