"""Watch an undersized RBM grow the hidden layer it needs.

Two hidden neurons cannot represent four orthogonal patterns. During
training the per-neuron walking distance (the epoch-to-epoch movement of a
neuron's weights) keeps fluctuating instead of settling, which triggers the
neuron-generation rule; redundant neurons that end up with near-constant
activations are annihilated again.
"""
import numpy as np

from adbn import CdConfig, Rbm, StructureConfig, WdMonitor, adaptive_cd_train

patterns = np.array([
    [1, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 1, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 1],
], dtype=float)
data = np.repeat(patterns, 8, axis=0)

model = Rbm(n_visible=8, n_hidden=2, seed=3)
monitor = WdMonitor(model.n_hidden, window=10)
events = []

structure = StructureConfig(theta_gen=1e-4, theta_ann=1e-5, window=10,
                            warmup_epochs=10, max_hidden=12,
                            theta_wd_layer=0.1, theta_energy_layer=0.1)
training = CdConfig(epochs=300, learning_rate=0.1, batch_size=8, seed=5)

print(f"start: {model.n_hidden} hidden neurons for {len(patterns)} patterns")
report = adaptive_cd_train(model, data, training, structure,
                           monitor=monitor, events=events)

print(f"end:   {model.n_hidden} hidden neurons, "
      f"reconstruction error {report.reconstruction_errors[-1]:.4f}")
print(f"       {report.n_generated} generated, {report.n_annihilated} annihilated")
print("\nfirst ten structure events:")
for event in events[:10]:
    print(f"  epoch {event.epoch:3d}  {event.kind:18s} neuron {event.neuron_index} "
          f"({event.detail})")

print("\nreconstruction error, every 30th epoch:")
for i in range(0, 300, 30):
    print(f"  epoch {i:3d}: {report.reconstruction_errors[i]:.4f}")
