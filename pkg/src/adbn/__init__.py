"""Adaptive-structure deep belief networks with distillation-based repair.

RBM stacks that grow and prune hidden neurons (and stack layers) while
training, a KL-divergence comparison between a trained parent model and a
child retrained on its problem cases, activation-path diffing with neuron
grafting, path-based fine-tuning, and decision-rule extraction.
"""
from .adaptive import (LAYER_GENERATED, NEURON_ANNIHILATED, NEURON_GENERATED,
                       NEURON_GRAFTED, AdaptiveTrainReport, LayerSignals,
                       StructureConfig, StructureEvent, WdMonitor, adaptive_cd_train,
                       annihilate_neuron, check_layer_generation,
                       check_neuron_annihilation, check_neuron_generation,
                       generate_neuron, layer_energy)
from .archive import ArchiveError, load_model, save_model
from .config import ConfigError, HeadConfig, RunConfig, dump_config, load_config
from .data import (DataFormatError, Dataset, SynthConfig, load_csv, load_idx,
                   read_idx_images, read_idx_labels, synth_ambiguous,
                   write_idx_images, write_idx_labels)
from .dbn import Dbn, EvalReport, HeadReport, SoftmaxHead, derive_seed, pretrain
from .distill import (FineTuneConfig, FineTuneReport, GraftReport, KlReport,
                      PathDiff, PathTrace, PerturbReport, RepairConfig, RepairReport,
                      dataset_kl, diff_paths, fine_tune, graft_neurons,
                      grafted_locations, merge_path_diffs, per_sample_kl,
                      perturb_retrain, repair_pipeline, retrain_child,
                      split_by_threshold, trace_path, trace_paths)
from .rbm import CdConfig, CdReport, Rbm, cd_train
from .rules import (DecisionTree, RuleList, TreeConfig, c45_build, entropy,
                    extract_rules, fidelity, gain_ratio, parse_rules, tree_to_text)

__version__ = "0.1.0"
