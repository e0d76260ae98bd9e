"""Versioned binary model container.

Layout: magic ``ADBN`` | format_version (u32 LE) | header length (u64 LE) |
header JSON (UTF-8, sorted keys) | raw little-endian float64 array payload |
SHA-256 trailer over everything before it. Saving a freshly loaded model
reproduces the file byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .adaptive import StructureEvent
from .dbn import Dbn, SoftmaxHead
from .rbm import Rbm

MAGIC = b"ADBN"
FORMAT_VERSION = 1
_TRAILER = hashlib.sha256().digest_size


class ArchiveError(ValueError):
    """Unreadable or corrupted model archive."""


def _model_arrays(m: Dbn) -> list[tuple[str, np.ndarray]]:
    arrays = []
    for l, layer in enumerate(m.layers):
        arrays.append((f"layers.{l}.W", layer.W))
        arrays.append((f"layers.{l}.b", layer.b))
        arrays.append((f"layers.{l}.c", layer.c))
    arrays.append(("head.U", m.head.U))
    arrays.append(("head.d", m.head.d))
    return arrays


def save_model(m: Dbn, path) -> None:
    """Write the model, its event log and its meta dict to one archive file."""
    arrays = _model_arrays(m)
    header = {
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays],
        "events": [asdict(e) for e in m.events],
        "meta": m.meta,
        "n_layers": len(m.layers),
        "n_classes": m.n_classes,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":"),
                              ensure_ascii=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes()
                       for _, arr in arrays)
    body = (MAGIC + struct.pack("<I", FORMAT_VERSION)
            + struct.pack("<Q", len(header_bytes)) + header_bytes + payload)
    digest = hashlib.sha256(body).digest()
    Path(path).write_bytes(body + digest)


def load_model(path) -> Dbn:
    """Read an archive back into a Dbn; verifies magic, version and checksum."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 + _TRAILER:
        raise ArchiveError(f"{path} is too short to be an ADBN archive")
    if raw[:4] != MAGIC:
        raise ArchiveError(f"{path} is not an ADBN archive (magic {raw[:4]!r})")
    version = struct.unpack("<I", raw[4:8])[0]
    if version > FORMAT_VERSION:
        raise ArchiveError(
            f"{path} has format_version {version}, newer than supported {FORMAT_VERSION}"
        )
    body, digest = raw[:-_TRAILER], raw[-_TRAILER:]
    if hashlib.sha256(body).digest() != digest:
        raise ArchiveError(f"archive checksum mismatch in {path}")

    header_len = struct.unpack("<Q", raw[8:16])[0]
    header_end = 16 + header_len
    if header_end > len(body):
        raise ArchiveError(f"{path} header length {header_len} exceeds file size")
    try:
        header = json.loads(body[16:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"unreadable header in {path}: {exc}") from None

    offset = header_end
    loaded: dict[str, np.ndarray] = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(body):
            raise ArchiveError(f"{path} payload truncated at array {spec['name']!r}")
        loaded[spec["name"]] = np.frombuffer(body[offset:end],
                                             dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(body):
        raise ArchiveError(f"{path} has {len(body) - offset} trailing payload bytes")

    layers = []
    for l in range(header["n_layers"]):
        try:
            W = loaded[f"layers.{l}.W"]
            b = loaded[f"layers.{l}.b"]
            c = loaded[f"layers.{l}.c"]
        except KeyError as exc:
            raise ArchiveError(f"{path} is missing array {exc}") from None
        rbm = object.__new__(Rbm)
        rbm._Wt = np.ascontiguousarray(W.T)
        rbm.b = b
        rbm.c = c
        layers.append(rbm)
    head = SoftmaxHead(loaded["head.U"], loaded["head.d"])
    events = [StructureEvent(**e) for e in header["events"]]
    return Dbn(layers, head, events=events, meta=header["meta"])
