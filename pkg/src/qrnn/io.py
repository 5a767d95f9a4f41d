"""Checkpoint and metrics file formats.

Checkpoint layout:

    8 bytes   magic ``QRNNCKP1``
    4 bytes   header length (unsigned little-endian)
    N bytes   JSON header, UTF-8, keys sorted
    ...       raw float64 little-endian tensor data, concatenated in
              the order listed under ``tensors`` in the header

The header records the model architecture, the training configuration,
progress counters, and the shape of every tensor, so a checkpoint is
self-describing: loading rebuilds the model and the Adam state without
any other inputs.  Optimizer moments are stored so a resumed run
continues bit-for-bit identically to an uninterrupted one.

Metrics files are plain CSV with the header
``epoch,loss,accuracy_recall,accuracy_full`` and floats written with
17 significant digits (round-trip exact for float64).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .copy_task import CopyTaskModel, CopyTaskSpec, build_copy_model
from .training import Adam, AnnealConfig, MetricsRecord, TrainConfig

__all__ = [
    "MAGIC",
    "CheckpointError",
    "CheckpointBundle",
    "save_checkpoint",
    "load_checkpoint",
    "write_metrics",
    "read_metrics",
    "append_metrics",
]

MAGIC = b"QRNNCKP1"
_FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Raised when a checkpoint file is malformed or inconsistent."""


def _train_config_dict(cfg: TrainConfig) -> dict:
    anneal = None
    if cfg.anneal is not None:
        anneal = {"halving_factor": cfg.anneal.halving_factor,
                  "patience": cfg.anneal.patience}
    return {
        "learning_rate": cfg.learning_rate,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "beta1": cfg.beta1,
        "beta2": cfg.beta2,
        "epsilon": cfg.epsilon,
        "seed": cfg.seed,
        "anneal": anneal,
        "grad_clip": cfg.grad_clip,
        "early_stop_accuracy": cfg.early_stop_accuracy,
    }


def _train_config_from_dict(d: dict) -> TrainConfig:
    anneal = None
    if d.get("anneal") is not None:
        anneal = AnnealConfig(halving_factor=d["anneal"]["halving_factor"],
                              patience=d["anneal"]["patience"])
    return TrainConfig(
        learning_rate=d["learning_rate"], epochs=d["epochs"],
        batch_size=d["batch_size"], beta1=d["beta1"], beta2=d["beta2"],
        epsilon=d["epsilon"], seed=d["seed"], anneal=anneal,
        grad_clip=d.get("grad_clip"),
        early_stop_accuracy=d.get("early_stop_accuracy"),
    )


@dataclass
class CheckpointBundle:
    model: CopyTaskModel
    optimizer: Adam
    config: TrainConfig
    spec: CopyTaskSpec
    epoch: int
    anneal_state: dict


def save_checkpoint(path, model: CopyTaskModel, optimizer: Adam,
                    config: TrainConfig, epoch: int,
                    anneal_state: dict | None = None) -> None:
    named = list(model.parameters())
    tensors: list[tuple[str, np.ndarray]] = [(name, p.data) for name, p in named]
    tensors += [(f"adam.m:{name}", m) for (name, _), m in zip(named, optimizer.m)]
    tensors += [(f"adam.v:{name}", v) for (name, _), v in zip(named, optimizer.v)]
    header = {
        "format": _FORMAT_VERSION,
        "layout": "split",
        "endianness": "little",
        "scalar_width": 64,
        "model": {
            "kind": model.kind,
            "quaternion": model.kind == "qlstm",
            "hidden": model.hidden,
            "seq_len": model.spec.seq_len,
            "blank_len": model.spec.blank_len,
        },
        "train": _train_config_dict(config),
        "progress": {
            "epoch": epoch,
            "adam_step": optimizer.step_count,
            "lr": optimizer.lr,
        },
        "anneal_state": dict(anneal_state or {}),
        "tensors": [{"name": name, "shape": list(arr.shape)}
                    for name, arr in tensors],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> CheckpointBundle:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}; not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError("unreadable checkpoint header") from exc
        if header.get("format") != _FORMAT_VERSION:
            raise CheckpointError(f"unsupported format {header.get('format')!r}")
        if header.get("layout") != "split" or header.get("endianness") != "little":
            raise CheckpointError("unsupported tensor layout or endianness")
        arrays: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise CheckpointError(f"truncated tensor data for {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise CheckpointError("trailing bytes after tensor data")

    spec = CopyTaskSpec(seq_len=header["model"]["seq_len"],
                        blank_len=header["model"]["blank_len"])
    config = _train_config_from_dict(header["train"])
    model = build_copy_model(header["model"]["kind"], spec,
                             hidden=header["model"]["hidden"],
                             rng=np.random.default_rng(0))
    named = list(model.parameters())
    for name, p in named:
        if name not in arrays:
            raise CheckpointError(f"checkpoint is missing tensor {name!r}")
        if arrays[name].shape != p.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: file {arrays[name].shape}, "
                f"model {p.data.shape}")
        np.copyto(p.data, arrays[name])
    optimizer = Adam([p for _, p in named], lr=header["progress"]["lr"],
                     beta1=config.beta1, beta2=config.beta2,
                     epsilon=config.epsilon)
    optimizer.step_count = header["progress"]["adam_step"]
    for i, (name, _) in enumerate(named):
        for prefix, dest in (("adam.m:", optimizer.m), ("adam.v:", optimizer.v)):
            key = prefix + name
            if key not in arrays:
                raise CheckpointError(f"checkpoint is missing tensor {key!r}")
            np.copyto(dest[i], arrays[key])
    return CheckpointBundle(model=model, optimizer=optimizer, config=config,
                            spec=spec, epoch=header["progress"]["epoch"],
                            anneal_state=dict(header.get("anneal_state", {})))


_METRICS_HEADER = "epoch,loss,accuracy_recall,accuracy_full"


def _format_record(rec: MetricsRecord) -> str:
    return (f"{rec.epoch},{rec.loss:.17g},{rec.accuracy_recall:.17g},"
            f"{rec.accuracy_full:.17g}")


def write_metrics(path, records: list[MetricsRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_METRICS_HEADER + "\n")
        for rec in records:
            fh.write(_format_record(rec) + "\n")


def append_metrics(path, records: list[MetricsRecord]) -> None:
    """Extend an existing metrics file (used when resuming a run)."""
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(_format_record(rec) + "\n")


def read_metrics(path) -> list[MetricsRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != _METRICS_HEADER:
            raise ValueError(f"unexpected metrics header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            epoch, loss, recall, full = line.split(",")
            records.append(MetricsRecord(epoch=int(epoch), loss=float(loss),
                                         accuracy_recall=float(recall),
                                         accuracy_full=float(full)))
    return records
