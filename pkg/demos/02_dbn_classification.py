"""Train a full classifier: synthetic corpus, adaptive stacking, softmax head.

The corpus imitates annotator disagreement: classes 6 and 5 share 60% of
their prototype bits and a fifth of class-6 samples carry label 5, the way a
second human rater mislabels ambiguous inputs. Layers are stacked while the
walking-distance total and the free-energy spread of the last layer stay
above their thresholds.
"""
import numpy as np

from adbn import CdConfig, StructureConfig, SynthConfig, pretrain, synth_ambiguous
from adbn.reports import format_eval_report

corpus = SynthConfig(n_classes=8, samples_per_class=200, input_dim=32,
                     confusable_pair=(6, 5), pair_overlap=0.6,
                     disagreement_rate=0.2, noise=0.1, seed=0)
train, test = synth_ambiguous(corpus)
print(f"corpus: {train.n_samples} train / {test.n_samples} test samples, "
      f"{train.n_classes} classes, {train.n_features} features")

structure = StructureConfig(n_hidden_init=8, max_hidden=16, max_layers=3,
                            warmup_epochs=10, window=5, theta_gen=0.05,
                            theta_ann=1e-5, theta_wd_layer=0.3,
                            theta_energy_layer=0.5)
model = pretrain(train.features, structure, CdConfig(epochs=40, seed=7), 8)
print(f"stacked layers: {[(l.n_visible, l.n_hidden) for l in model.layers]}")
print(f"structure events during pretraining: {len(model.events)}")

head_report = model.train_head(train.features, train.labels, epochs=400, lr=0.5)
print(f"head loss: {head_report.losses[0]:.4f} -> {head_report.losses[-1]:.4f}")

evaluation = model.evaluate(test.features, test.labels)
print()
print(format_eval_report(evaluation, test.class_names, seed=7))

pair = np.isin(test.labels, [5, 6])
pair_acc = np.mean(model.predict(test.features[pair]) == test.labels[pair])
print(f"confusable-pair (class_5/class_6) accuracy: {pair_acc:.3f} "
      f"- the overlap plus disagreement makes these two hardest")
