"""Shared fixtures: the pinned repair-benchmark corpus and its parent model.

The corpus and parent are expensive to build, so they are session-scoped;
tests must clone the parent before mutating it.
"""
from __future__ import annotations

import numpy as np
import pytest

import adbn

# The seed-pinned repair scenario: an 8-class corpus whose classes 6 and 5
# overlap, with one-way annotator disagreement, and an under-capacity parent.
A5_SYNTH = dict(n_classes=8, samples_per_class=500, input_dim=32,
                confusable_pair=(6, 5), pair_overlap=0.6,
                disagreement_rate=0.2, noise=0.15, seed=0)
A5_STRUCTURE = dict(n_hidden_init=5, max_hidden=5, max_layers=2,
                    warmup_epochs=10, window=5, theta_gen=0.05, theta_ann=1e-5,
                    theta_wd_layer=0.3, theta_energy_layer=0.5)
A5_CD = dict(epochs=25, learning_rate=0.1, batch_size=64, seed=11)
A5_HEAD_EPOCHS = 600
A5_HEAD_LR = 0.5
A5_TARGETS = [5, 6]
A5_REPAIR = dict(theta_kl=0.0015, upper_layers=2, cd_refresh_epochs=20,
                 cd_refresh_lr=0.02, retrain_head_epochs=800, retrain_lr=0.5,
                 child_cd_epochs=30, child_cd_lr=0.1, child_head_epochs=100,
                 child_lr=0.5, child_max_rounds=5, sigma_perturb=0.005,
                 fine_tune_scope="targets", batch_size=32, seed=11)


def a5_run_config_tree() -> dict:
    """The same scenario as one RunConfig-shaped mapping (for the CLI)."""
    return {
        "seed": 11,
        "cd": dict(A5_CD),
        "structure": dict(A5_STRUCTURE),
        "synth": {k: (list(v) if isinstance(v, tuple) else v)
                  for k, v in A5_SYNTH.items()},
        "head": {"epochs": A5_HEAD_EPOCHS, "lr": A5_HEAD_LR},
        "repair": dict(A5_REPAIR),
    }


@pytest.fixture(scope="session")
def a5_corpus():
    return adbn.synth_ambiguous(adbn.SynthConfig(**A5_SYNTH))


@pytest.fixture(scope="session")
def a5_parent(a5_corpus):
    train, _ = a5_corpus
    model = adbn.pretrain(train.features, adbn.StructureConfig(**A5_STRUCTURE),
                          adbn.CdConfig(**A5_CD), train.n_classes)
    model.train_head(train.features, train.labels, A5_HEAD_EPOCHS, A5_HEAD_LR)
    return model


def pair_accuracy(model, dataset, pair) -> float:
    mask = np.isin(dataset.labels, pair)
    preds = model.predict(dataset.features[mask])
    return float(np.mean(preds == dataset.labels[mask]))
