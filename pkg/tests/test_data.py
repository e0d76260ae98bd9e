"""Synthetic-corpus and IDX/CSV loader tests."""
import struct

import numpy as np
import pytest

from adbn import (DataFormatError, Dataset, SynthConfig, load_csv, load_idx,
                  read_idx_images, read_idx_labels, synth_ambiguous,
                  write_idx_images, write_idx_labels)
from adbn.data import _prototypes


SMALL = dict(n_classes=4, samples_per_class=50, input_dim=16,
             confusable_pair=(3, 2), pair_overlap=0.6, disagreement_rate=0.2,
             noise=0.05, seed=9)


class TestSynthAmbiguous:
    def test_deterministic(self):
        a_train, a_test = synth_ambiguous(SynthConfig(**SMALL))
        b_train, b_test = synth_ambiguous(SynthConfig(**SMALL))
        assert (a_train.features == b_train.features).all()
        assert (a_train.labels == b_train.labels).all()
        assert (a_test.features == b_test.features).all()
        assert (a_test.labels == b_test.labels).all()

    def test_features_binary(self):
        train, test = synth_ambiguous(SynthConfig(**SMALL))
        assert set(np.unique(train.features)) <= {0.0, 1.0}
        assert set(np.unique(test.features)) <= {0.0, 1.0}

    def test_zero_disagreement_keeps_generating_labels(self):
        cfg = SynthConfig(**{**SMALL, "disagreement_rate": 0.0, "noise": 0.0})
        train, test = synth_ambiguous(cfg)
        protos = _prototypes(cfg, np.random.default_rng(cfg.seed))
        for ds in (train, test):
            for row, label in zip(ds.features, ds.labels):
                assert (row == protos[label]).all()

    def test_label_histogram_matches_counting_oracle(self):
        cfg = SynthConfig(**SMALL)
        train, test = synth_ambiguous(cfg)
        counts = np.bincount(np.concatenate([train.labels, test.labels]),
                             minlength=cfg.n_classes)
        a, b = cfg.confusable_pair
        n_flip = int(round(cfg.disagreement_rate * cfg.samples_per_class))
        expected = np.full(cfg.n_classes, cfg.samples_per_class)
        expected[a] -= n_flip
        expected[b] += n_flip
        assert (counts == expected).all()

    def test_disagreement_direction_is_one_way(self):
        # pair (6, 5): some class-6 samples carry label 5, never the reverse
        cfg = SynthConfig(n_classes=8, samples_per_class=40, input_dim=16,
                          confusable_pair=(6, 5), pair_overlap=0.6,
                          disagreement_rate=0.3, noise=0.0, seed=2)
        train, test = synth_ambiguous(cfg)
        protos = _prototypes(cfg, np.random.default_rng(cfg.seed))
        labels = np.concatenate([train.labels, test.labels])
        features = np.vstack([train.features, test.features])
        counts = np.bincount(labels, minlength=8)
        n_flip = int(round(0.3 * 40))
        assert counts[6] == 40 - n_flip and counts[5] == 40 + n_flip
        assert (counts[[0, 1, 2, 3, 4, 7]] == 40).all()
        # every sample labeled 6 was generated from prototype 6
        assert all((row == protos[6]).all() for row in features[labels == 6])

    def test_split_is_disjoint_and_stratified(self):
        cfg = SynthConfig(**SMALL)
        train, test = synth_ambiguous(cfg)
        assert train.n_samples + test.n_samples == cfg.n_classes * cfg.samples_per_class
        # per final label, the 80/20 split is within one sample of exact
        for k in range(cfg.n_classes):
            total = (train.labels == k).sum() + (test.labels == k).sum()
            assert abs((train.labels == k).sum() - 0.8 * total) <= 1
        # disjointness: every generated sample appears exactly once
        combined = np.vstack([train.features, test.features])
        assert combined.shape[0] == cfg.n_classes * cfg.samples_per_class

    def test_pair_prototype_overlap(self):
        cfg = SynthConfig(**SMALL)
        protos = _prototypes(cfg, np.random.default_rng(cfg.seed))
        a, b = cfg.confusable_pair
        active_a = protos[a].sum()
        shared = (protos[a] * protos[b]).sum()
        assert active_a == cfg.input_dim // 2
        assert shared == round(cfg.pair_overlap * active_a)

    def test_prototypes_distinct(self):
        cfg = SynthConfig(**SMALL)
        protos = _prototypes(cfg, np.random.default_rng(cfg.seed))
        patterns = {tuple(p) for p in protos}
        assert len(patterns) == cfg.n_classes

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(**{**SMALL, "confusable_pair": (1, 1)})
        with pytest.raises(ValueError):
            SynthConfig(**{**SMALL, "confusable_pair": (0, 9)})
        with pytest.raises(ValueError):
            SynthConfig(**{**SMALL, "disagreement_rate": 1.0})


class TestDatasetValidation:
    def test_feature_range_checked(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[1.5]]), np.array([0]), ["a"])

    def test_label_range_checked(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[0.5]]), np.array([3]), ["a", "b"])

    def test_length_mismatch_checked(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 2)), np.zeros(3, int), ["a"])


class TestIdx:
    def test_round_trip_fixture(self, tmp_path):
        rng = np.random.default_rng(1)
        features = rng.integers(0, 256, size=(4, 4)).astype(float) / 255.0
        labels = np.array([0, 1, 2, 1])
        write_idx_images(tmp_path / "img.idx", features, rows=2, cols=2)
        write_idx_labels(tmp_path / "lab.idx", labels)
        ds = load_idx(tmp_path / "img.idx", tmp_path / "lab.idx")
        assert ds.features.shape == (4, 4)
        assert (ds.features == features).all()
        assert (ds.labels == labels).all()
        assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0

    def test_values_are_255ths(self, tmp_path):
        write_idx_images(tmp_path / "img.idx", np.array([[0.0, 1.0, 1 / 255]]),
                         rows=3, cols=1)
        back = read_idx_images(tmp_path / "img.idx")
        assert back.tolist() == [[0.0, 1.0, 1 / 255]]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">IIII", 0xDEADBEEF, 1, 1, 1) + b"\x00")
        with pytest.raises(DataFormatError, match="magic 0xdeadbeef"):
            read_idx_images(path)

    def test_truncated_data_names_byte_counts(self, tmp_path):
        path = tmp_path / "short.idx"
        path.write_bytes(struct.pack(">IIII", 0x00000803, 2, 2, 2) + b"\x00" * 3)
        with pytest.raises(DataFormatError, match="expected 24 bytes, got 19"):
            read_idx_images(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "tiny.idx"
        path.write_bytes(b"\x00\x00")
        with pytest.raises(DataFormatError, match="truncated IDX header"):
            read_idx_images(path)

    def test_label_reader_validates_magic(self, tmp_path):
        path = tmp_path / "lab.idx"
        path.write_bytes(struct.pack(">II", 0x00000803, 0))
        with pytest.raises(DataFormatError, match="0x00000801"):
            read_idx_labels(path)

    def test_count_mismatch(self, tmp_path):
        write_idx_images(tmp_path / "img.idx", np.zeros((3, 2)))
        write_idx_labels(tmp_path / "lab.idx", np.zeros(2, int))
        with pytest.raises(DataFormatError, match="3 images.*2 labels"):
            load_idx(tmp_path / "img.idx", tmp_path / "lab.idx")


class TestCsv:
    def write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_numeric_labels(self, tmp_path):
        path = self.write(tmp_path, "f1,f2,label\n0.5,0.25,1\n1.0,0.0,0\n")
        ds = load_csv(path)
        assert ds.features.tolist() == [[0.5, 0.25], [1.0, 0.0]]
        assert ds.labels.tolist() == [1, 0]
        assert ds.class_names == ["class_0", "class_1"]

    def test_string_labels_sorted(self, tmp_path):
        path = self.write(tmp_path, "x,label\n0.1,dog\n0.2,cat\n0.3,dog\n")
        ds = load_csv(path)
        assert ds.class_names == ["cat", "dog"]
        assert ds.labels.tolist() == [1, 0, 1]

    def test_label_column_by_name(self, tmp_path):
        path = self.write(tmp_path, "kind,a\nx,0.9\n")
        ds = load_csv(path, label_column="kind")
        assert ds.features.tolist() == [[0.9]]

    def test_empty_body(self, tmp_path):
        path = self.write(tmp_path, "a,label\n")
        with pytest.raises(DataFormatError, match="no samples"):
            load_csv(path)

    def test_empty_file(self, tmp_path):
        path = self.write(tmp_path, "")
        with pytest.raises(DataFormatError, match="no samples"):
            load_csv(path)

    def test_missing_label_column(self, tmp_path):
        path = self.write(tmp_path, "a,b\n0.1,0.2\n")
        with pytest.raises(DataFormatError, match="label column 'label'"):
            load_csv(path)

    def test_ragged_row_names_line(self, tmp_path):
        path = self.write(tmp_path, "a,label\n0.1,0\n0.2\n")
        with pytest.raises(DataFormatError, match="line 3.*1 fields, expected 2"):
            load_csv(path)

    def test_non_numeric_cell_names_position(self, tmp_path):
        path = self.write(tmp_path, "a,label\noops,0\n")
        with pytest.raises(DataFormatError, match="line 2, column 'a'"):
            load_csv(path)

    def test_out_of_range_value(self, tmp_path):
        path = self.write(tmp_path, "a,label\n1.5,0\n")
        with pytest.raises(DataFormatError, match="outside \\[0, 1\\]"):
            load_csv(path)
