"""Datasets: a synthetic annotator-disagreement generator plus IDX/CSV loaders.

The synthetic corpus gives every class a distinct binary prototype and makes
one configured pair of classes hard to tell apart: their prototypes share a
fraction of active bits, and a fraction of the first pair member's samples
carry the second member's label, the way a second human annotator would
disagree on ambiguous inputs.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    """Malformed dataset file."""


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: list[str]
    provenance: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be a matrix, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"{self.features.shape[0]} samples but {self.labels.shape[0]} labels"
            )
        if self.features.size and (self.features.min() < 0 or self.features.max() > 1):
            raise ValueError("features must lie in [0, 1]")
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= len(self.class_names)):
            raise ValueError(
                f"labels must lie in [0, {len(self.class_names)}), got range "
                f"[{self.labels.min()}, {self.labels.max()}]"
            )

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass
class SynthConfig:
    """Shape of the synthetic ambiguous-pair corpus."""

    n_classes: int = 8
    samples_per_class: int = 500
    input_dim: int = 32
    confusable_pair: tuple[int, int] = (6, 5)
    pair_overlap: float = 0.6
    disagreement_rate: float = 0.2
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.confusable_pair, list):
            self.confusable_pair = tuple(self.confusable_pair)
        a, b = self.confusable_pair
        if a == b:
            raise ValueError("confusable_pair members must differ")
        if not (0 <= a < self.n_classes and 0 <= b < self.n_classes):
            raise ValueError(f"confusable_pair {self.confusable_pair} outside "
                             f"[0, {self.n_classes})")
        if not 0 <= self.disagreement_rate < 1:
            raise ValueError("disagreement_rate must lie in [0, 1)")
        if not 0 <= self.pair_overlap <= 1:
            raise ValueError("pair_overlap must lie in [0, 1]")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.n_classes < 2 or self.samples_per_class < 1 or self.input_dim < 2:
            raise ValueError("need n_classes >= 2, samples_per_class >= 1, input_dim >= 2")


def _prototypes(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    dim = cfg.input_dim
    n_active = max(1, dim // 2)
    protos = np.zeros((cfg.n_classes, dim))
    a, b = cfg.confusable_pair

    bits_a = rng.choice(dim, size=n_active, replace=False)
    n_shared = int(round(cfg.pair_overlap * n_active))
    shared = rng.choice(bits_a, size=n_shared, replace=False)
    pool = np.setdiff1d(np.arange(dim), bits_a)
    fresh = rng.choice(pool, size=n_active - n_shared, replace=False)
    protos[a, bits_a] = 1.0
    protos[b, np.concatenate([shared, fresh]).astype(np.int64)] = 1.0

    seen = {tuple(protos[a]), tuple(protos[b])}
    for k in range(cfg.n_classes):
        if k in (a, b):
            continue
        for _ in range(1000):
            bits = rng.choice(dim, size=n_active, replace=False)
            candidate = np.zeros(dim)
            candidate[bits] = 1.0
            key = tuple(candidate)
            if key not in seen:
                seen.add(key)
                protos[k] = candidate
                break
        else:
            raise ValueError("could not draw distinct class prototypes; "
                             "increase input_dim")
    return protos


def synth_ambiguous(cfg: SynthConfig) -> tuple[Dataset, Dataset]:
    """Generate the corpus and return a stratified 80/20 (train, test) split.

    ``confusable_pair = (a, b)`` relabels a ``disagreement_rate`` fraction of
    the samples generated from a's prototype as class b (one direction, the
    dominant annotator-confusion pattern).
    """
    rng = np.random.default_rng(cfg.seed)
    protos = _prototypes(cfg, rng)

    blocks = []
    for k in range(cfg.n_classes):
        flips = rng.random((cfg.samples_per_class, cfg.input_dim)) < cfg.noise
        blocks.append(np.abs(protos[k] - flips.astype(np.float64)))
    features = np.vstack(blocks)
    labels = np.repeat(np.arange(cfg.n_classes), cfg.samples_per_class)

    a, b = cfg.confusable_pair
    generated_a = np.flatnonzero(labels == a)
    n_flip = int(round(cfg.disagreement_rate * generated_a.size))
    if n_flip:
        relabel = rng.choice(generated_a, size=n_flip, replace=False)
        labels = labels.copy()
        labels[relabel] = b

    train_idx: list[int] = []
    test_idx: list[int] = []
    for k in range(cfg.n_classes):
        idx = np.flatnonzero(labels == k)
        idx = idx[rng.permutation(idx.size)]
        n_train = int(round(0.8 * idx.size))
        train_idx.extend(idx[:n_train].tolist())
        test_idx.extend(idx[n_train:].tolist())
    train_idx.sort()
    test_idx.sort()

    class_names = [f"class_{k}" for k in range(cfg.n_classes)]
    provenance = (f"synth_ambiguous(seed={cfg.seed}, n_classes={cfg.n_classes}, "
                  f"samples_per_class={cfg.samples_per_class}, input_dim={cfg.input_dim}, "
                  f"pair={cfg.confusable_pair}, overlap={cfg.pair_overlap}, "
                  f"disagreement={cfg.disagreement_rate}, noise={cfg.noise})")
    train = Dataset(features[train_idx], labels[train_idx], class_names,
                    provenance + " [train]")
    test = Dataset(features[test_idx], labels[test_idx], class_names,
                   provenance + " [test]")
    return train, test


# -- IDX ---------------------------------------------------------------------

def read_idx_images(path) -> np.ndarray:
    """Images file: big-endian magic 0x00000803, dims, then bytes scaled to [0,1]."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16:
        raise DataFormatError(
            f"truncated IDX header in {path}: expected 16 bytes, got {len(raw)}"
        )
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(
            f"bad IDX magic 0x{magic:08x} at {path} byte 0 (expected 0x{IDX_IMAGES_MAGIC:08x})"
        )
    expected = 16 + n * rows * cols
    if len(raw) != expected:
        raise DataFormatError(
            f"IDX data in {path}: expected {expected} bytes, got {len(raw)}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16)
    return pixels.reshape(n, rows * cols).astype(np.float64) / 255.0


def read_idx_labels(path) -> np.ndarray:
    """Labels file: big-endian magic 0x00000801, count, then one byte per label."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 8:
        raise DataFormatError(
            f"truncated IDX header in {path}: expected 8 bytes, got {len(raw)}"
        )
    magic, n = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise DataFormatError(
            f"bad IDX magic 0x{magic:08x} at {path} byte 0 (expected 0x{IDX_LABELS_MAGIC:08x})"
        )
    expected = 8 + n
    if len(raw) != expected:
        raise DataFormatError(
            f"IDX data in {path}: expected {expected} bytes, got {len(raw)}"
        )
    return np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)


def write_idx_images(path, features, rows: int | None = None,
                     cols: int | None = None) -> None:
    """Quantize [0,1] features to bytes and write the images layout."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a matrix")
    if rows is None or cols is None:
        rows, cols = X.shape[1], 1
    if rows * cols != X.shape[1]:
        raise ValueError(f"rows*cols = {rows * cols} != feature width {X.shape[1]}")
    body = np.round(X * 255.0).astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, X.shape[0], rows, cols))
        fh.write(body)


def write_idx_labels(path, labels) -> None:
    y = np.asarray(labels, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() > 255):
        raise ValueError("IDX labels must fit one byte")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, y.size))
        fh.write(y.astype(np.uint8).tobytes())


def load_idx(images_path, labels_path, class_names: list[str] | None = None) -> Dataset:
    """Pair an IDX images file with an IDX labels file."""
    features = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if features.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"{images_path} holds {features.shape[0]} images but {labels_path} "
            f"holds {labels.shape[0]} labels"
        )
    if class_names is None:
        top = int(labels.max()) if labels.size else 0
        class_names = [f"class_{k}" for k in range(top + 1)]
    return Dataset(features, labels, class_names,
                   provenance=f"idx:{images_path}+{labels_path}")


# -- CSV ---------------------------------------------------------------------

def load_csv(path, label_column: str = "label") -> Dataset:
    """Header-row CSV; the named label column plus numeric [0,1] feature columns."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"no samples in {path}: file is empty") from None
        if label_column not in header:
            raise DataFormatError(
                f"label column {label_column!r} not in header {header} of {path}"
            )
        label_pos = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_pos]
        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"row at line {lineno} of {path} has {len(row)} fields, "
                    f"expected {len(header)}"
                )
            values = []
            for pos, cell in enumerate(row):
                if pos == label_pos:
                    continue
                name = header[pos]
                try:
                    value = float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"non-numeric value {cell!r} at line {lineno}, column "
                        f"{name!r} of {path}"
                    ) from None
                if not 0.0 <= value <= 1.0:
                    raise DataFormatError(
                        f"value {value} outside [0, 1] at line {lineno}, column "
                        f"{name!r} of {path}"
                    )
                values.append(value)
            rows.append(values)
            raw_labels.append(row[label_pos])
    if not rows:
        raise DataFormatError(f"no samples in {path}")

    try:
        numeric = [int(v) for v in raw_labels]
        if any(v < 0 for v in numeric):
            raise DataFormatError(f"negative label in {path}")
        labels = np.asarray(numeric, dtype=np.int64)
        class_names = [f"class_{k}" for k in range(int(labels.max()) + 1)]
    except ValueError:
        class_names = sorted(set(raw_labels))
        index = {name: k for k, name in enumerate(class_names)}
        labels = np.asarray([index[v] for v in raw_labels], dtype=np.int64)

    features = np.asarray(rows, dtype=np.float64)
    return Dataset(features, labels, class_names,
                   provenance=f"csv:{path} (features: {', '.join(feature_names)})")
