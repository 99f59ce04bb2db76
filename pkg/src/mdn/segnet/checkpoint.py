"""Versioned binary checkpoint container.

Layout: an 8-byte magic, little-endian uint32 format version, little-endian
uint64 JSON header length, the UTF-8 JSON header, then the raw parameter
bytes. The header carries the model/train configs, epoch, history, and a
parameter index (name, shape, dtype, offset) in model parameter order.
Writing the same model twice yields byte-identical files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..errors import ConfigMismatchError, IoFailureError, VersionMismatchError
from .model import SegModelConfig, UNet, build_model
from .train import TrainConfig

MAGIC = b"MDNCKPT\x00"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Checkpoint:
    """Deserialized checkpoint contents."""

    weights: dict  # layer name -> numpy array
    model_config: SegModelConfig
    train_config: TrainConfig | None
    epoch: int
    history: tuple
    format_version: int


def save_checkpoint(model: UNet, path, train_config: TrainConfig | None = None,
                    epoch: int = 0, history=()) -> None:
    """Serialize the model weights plus provenance to ``path``."""
    params = []
    blobs = []
    offset = 0
    for name, tensor in model.named_parameters():
        arr = tensor.detach().numpy()
        arr = arr.astype(arr.dtype.newbyteorder("<"))
        blob = arr.tobytes()
        params.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": arr.dtype.str,
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)
    header = {
        "model_config": model.config.to_dict(),
        "train_config": train_config.to_dict() if train_config is not None else None,
        "epoch": int(epoch),
        "history": list(history),
        "params": params,
        "data_bytes": offset,
    }
    header_bytes = json.dumps(header).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", CHECKPOINT_VERSION))
            fh.write(struct.pack("<Q", len(header_bytes)))
            fh.write(header_bytes)
            for blob in blobs:
                fh.write(blob)
    except OSError as exc:
        raise IoFailureError(f"cannot write checkpoint {path}: {exc}") from exc


def read_checkpoint(path) -> Checkpoint:
    """Parse a checkpoint file without instantiating a model."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailureError(f"cannot read checkpoint {path}: {exc}") from exc
    prefix_len = len(MAGIC) + 4 + 8
    if len(raw) < prefix_len or raw[:len(MAGIC)] != MAGIC:
        raise IoFailureError(f"{path} is not a checkpoint file (bad magic or truncated)")
    version = struct.unpack_from("<I", raw, len(MAGIC))[0]
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(
            f"checkpoint format version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )
    header_len = struct.unpack_from("<Q", raw, len(MAGIC) + 4)[0]
    data_start = prefix_len + header_len
    if len(raw) < data_start:
        raise IoFailureError(f"{path} is truncated inside the header")
    try:
        header = json.loads(raw[prefix_len:data_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IoFailureError(f"{path} has a corrupt header: {exc}") from exc
    if len(raw) - data_start < header["data_bytes"]:
        raise IoFailureError(f"{path} is truncated inside the parameter data")
    weights = {}
    for rec in header["params"]:
        start = data_start + rec["offset"]
        arr = np.frombuffer(raw[start:start + rec["nbytes"]], dtype=np.dtype(rec["dtype"]))
        weights[rec["name"]] = arr.reshape(rec["shape"]).copy()
    train_config = header["train_config"]
    return Checkpoint(
        weights=weights,
        model_config=SegModelConfig.from_dict(header["model_config"]),
        train_config=TrainConfig.from_dict(train_config) if train_config is not None else None,
        epoch=int(header["epoch"]),
        history=tuple(header["history"]),
        format_version=version,
    )


def load_checkpoint(path, expected_model_config: SegModelConfig | None = None
                    ) -> tuple[UNet, Checkpoint]:
    """Rebuild the model from a checkpoint; forward outputs match bit for bit.

    When ``expected_model_config`` is given, a differing stored config raises
    ConfigMismatchError before any weights are touched.
    """
    ckpt = read_checkpoint(path)
    if expected_model_config is not None and ckpt.model_config != expected_model_config:
        raise ConfigMismatchError(
            f"checkpoint config {ckpt.model_config} != expected {expected_model_config}"
        )
    first = next(iter(ckpt.weights.values())) if ckpt.weights else None
    dtype = torch.float64 if first is not None and first.dtype == np.float64 else torch.float32
    model = build_model(ckpt.model_config, seed=0, dtype=dtype)
    state = model.state_dict()
    if set(state) != set(ckpt.weights):
        raise ConfigMismatchError("checkpoint parameter names do not match the model")
    for name, arr in ckpt.weights.items():
        if tuple(state[name].shape) != tuple(arr.shape):
            raise ConfigMismatchError(
                f"parameter {name} has shape {arr.shape}, model expects {tuple(state[name].shape)}"
            )
        state[name] = torch.from_numpy(np.ascontiguousarray(arr)).to(dtype)
    model.load_state_dict(state)
    model.eval()
    return model, ckpt
