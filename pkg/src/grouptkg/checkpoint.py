"""Single-file checkpoint container.

Layout: 8-byte magic, little-endian uint32 format version, uint64 header
length, a UTF-8 JSON header, then the raw little-endian tensor payloads.
The header lists ``name``, ``dtype``, ``shape`` and byte ``offset`` (from
the start of the payload) for every tensor.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .model import Model, parameter_shapes
from .tensor import ShapeError

MAGIC = b"GRPTKGCK"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: Config
    n_entities: int
    n_types: int
    tensors: dict[str, np.ndarray]
    adam: dict[str, np.ndarray] | None = None
    best_val_loss: float | None = None
    epoch: int = 0
    history: list[dict] = field(default_factory=list)
    version: int = FORMAT_VERSION

    @classmethod
    def from_model(cls, model: Model, **kw) -> "Checkpoint":
        return cls(model.config, model.n_entities, model.n_types, model.arrays(), **kw)

    def to_model(self) -> Model:
        return Model(self.config, self.n_entities, self.n_types, self.tensors)


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    entries = [(name, arr) for name, arr in ckpt.tensors.items()]
    if ckpt.adam is not None:
        entries += [(f"adam.{name}", arr) for name, arr in ckpt.adam.items()]
    index, blobs, offset = [], [], 0
    for name, arr in entries:
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        blob = le.tobytes()
        index.append({"name": name, "dtype": arr.dtype.name, "shape": list(arr.shape),
                      "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = {
        "version": ckpt.version,
        "config": ckpt.config.to_dict(),
        "n_entities": ckpt.n_entities,
        "n_types": ckpt.n_types,
        "best_val_loss": ckpt.best_val_loss,
        "epoch": ckpt.epoch,
        "history": ckpt.history,
        "payload_bytes": offset,
        "tensors": index,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_PREFIX.pack(MAGIC, ckpt.version, len(hbytes)))
        f.write(hbytes)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _PREFIX.size:
        raise CheckpointError(f"{path}: truncated checkpoint (no header)")
    magic, version, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: checkpoint format version {version}, "
                              f"this library reads version {FORMAT_VERSION}")
    start = _PREFIX.size + hlen
    if len(raw) < start:
        raise CheckpointError(f"{path}: truncated checkpoint header")
    header = json.loads(raw[_PREFIX.size:start].decode("utf-8"))
    payload = memoryview(raw)[start:]
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError(f"{path}: truncated checkpoint payload "
                              f"({len(payload)} of {header['payload_bytes']} bytes)")
    tensors, adam = {}, {}
    for entry in header["tensors"]:
        dt = np.dtype(entry["dtype"]).newbyteorder("<")
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype=dt, count=count, offset=entry["offset"])
        arr = arr.astype(dt.newbyteorder("="), copy=True).reshape(entry["shape"])
        name = entry["name"]
        if name.startswith("adam."):
            adam[name[len("adam."):]] = arr
        else:
            tensors[name] = arr
    config = Config.from_dict(header["config"])
    expected = parameter_shapes(config, header["n_entities"], header["n_types"])
    for name, shape in expected.items():
        if name not in tensors:
            raise CheckpointError(f"{path}: missing tensor {name!r}")
        if tensors[name].shape != shape:
            raise ShapeError(f"tensor {name!r}: stored shape {tensors[name].shape}, "
                             f"config expects {shape}")
    return Checkpoint(config, header["n_entities"], header["n_types"], tensors,
                      adam or None, header["best_val_loss"], header["epoch"],
                      header["history"], version)
