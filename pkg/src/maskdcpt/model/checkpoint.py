"""Self-describing checkpoint files.

Layout::

    b"MDCPTCKP"                magic
    uint64 (little endian)     header length in bytes
    header                     UTF-8 JSON: format_version, kind, encoder_config,
                               meta, tensors=[{name, dtype, shape, offset, nbytes}]
    payload                    raw little-endian tensor bytes, in header order

The header is written with sorted keys and tensors keep their insertion
order, so saving a loaded checkpoint reproduces the file byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import CheckpointError, ShapeMismatchError
from .decoders import MaskDCPTModel, RestorationModel
from .encoder import Encoder, EncoderConfig

MAGIC = b"MDCPTCKP"
FORMAT_VERSION = 1


def _to_numpy(t) -> np.ndarray:
    if isinstance(t, torch.Tensor):
        t = t.detach().cpu().numpy()
    arr = np.asarray(t)
    return np.ascontiguousarray(arr.astype(arr.dtype.newbyteorder("<"), copy=False))


@dataclass
class Checkpoint:
    kind: str
    encoder_config: dict
    tensors: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def to_bytes(self) -> bytes:
        specs, chunks, offset = [], [], 0
        for name, arr in self.tensors.items():
            arr = _to_numpy(arr)
            raw = arr.tobytes()
            specs.append(
                {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
            )
            chunks.append(raw)
            offset += len(raw)
        header = json.dumps(
            {
                "format_version": self.version,
                "kind": self.kind,
                "encoder_config": self.encoder_config,
                "meta": self.meta,
                "tensors": specs,
            },
            sort_keys=True,
        ).encode()
        return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(chunks)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(self.to_bytes())
        tmp.replace(path)
        return path

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if data[: len(MAGIC)] != MAGIC:
            raise CheckpointError("not a checkpoint file (bad magic)")
        (n,) = struct.unpack_from("<Q", data, len(MAGIC))
        start = len(MAGIC) + 8
        try:
            header = json.loads(data[start : start + n])
        except json.JSONDecodeError as exc:
            raise CheckpointError("corrupt checkpoint header") from exc
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version!r}")
        base = start + n
        tensors = {}
        for spec in header["tensors"]:
            lo = base + spec["offset"]
            buf = data[lo : lo + spec["nbytes"]]
            if len(buf) != spec["nbytes"]:
                raise CheckpointError(f"truncated tensor {spec['name']}")
            tensors[spec["name"]] = np.frombuffer(buf, dtype=np.dtype(spec["dtype"])).reshape(spec["shape"]).copy()
        return cls(header["kind"], header["encoder_config"], tensors, header["meta"], version)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        try:
            data = Path(path).read_bytes()
        except FileNotFoundError as exc:
            raise CheckpointError(f"checkpoint not found: {path}") from exc
        return cls.from_bytes(data)

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def prefixed(self, prefix: str) -> dict[str, np.ndarray]:
        return {k[len(prefix) :]: v for k, v in self.tensors.items() if k.startswith(prefix)}


def state_digest(module: torch.nn.Module) -> str:
    h = hashlib.sha256()
    for name, t in module.state_dict().items():
        h.update(name.encode())
        h.update(_to_numpy(t).tobytes())
    return h.hexdigest()


def load_state_strict(module: torch.nn.Module, tensors: dict[str, np.ndarray], what: str = "") -> None:
    """Copy named arrays into ``module``, reporting every name/shape problem."""
    own = module.state_dict()
    bad = []
    for name, t in own.items():
        if name not in tensors:
            bad.append(name)
        elif tuple(tensors[name].shape) != tuple(t.shape):
            bad.append(name)
    extra = [n for n in tensors if n not in own]
    if bad or extra:
        first = (bad + extra)[0]
        detail = f"{what}{first}: expected {tuple(own[first].shape) if first in own else 'absent'}"
        if first in tensors:
            detail += f", got {tuple(tensors[first].shape)}"
        raise ShapeMismatchError(bad + extra, detail)
    module.load_state_dict({k: torch.from_numpy(np.array(v)) for k, v in tensors.items()})


def export_encoder(source, path, meta: dict | None = None) -> Path:
    """Write only the encoder of a pre-trained model (or checkpoint file) to ``path``."""
    if isinstance(source, (str, Path)):
        ck = Checkpoint.load(source)
        tensors = {f"encoder.{k}": v for k, v in ck.prefixed("encoder.").items()}
        cfg = ck.encoder_config
        meta = {**ck.meta, **(meta or {})}
    else:
        tensors = {f"encoder.{k}": v for k, v in source.encoder.state_dict().items()}
        cfg = source.cfg.to_dict()
    if not tensors:
        raise CheckpointError("source holds no encoder parameters")
    return Checkpoint("encoder", cfg, tensors, meta or {}).save(path)


def import_encoder(path, target: RestorationModel) -> RestorationModel:
    """Transplant encoder weights from a checkpoint; the target's head is left fresh."""
    ck = Checkpoint.load(path)
    tensors = ck.prefixed("encoder.")
    if not tensors:
        raise CheckpointError(f"{path} holds no encoder parameters")
    load_state_strict(target.encoder, tensors, "encoder.")
    return target


def model_from_checkpoint(ck: Checkpoint):
    """Rebuild the model a checkpoint was written from (optimizer state ignored)."""
    cfg = EncoderConfig.from_dict(ck.encoder_config)
    params = {k: v for k, v in ck.tensors.items() if not k.startswith("optim.")}
    if ck.kind == "restoration":
        model = RestorationModel(cfg)
    elif ck.kind == "pretrain":
        model = MaskDCPTModel(
            cfg, num_classes=int(ck.meta.get("num_classes", 5)), cls_width=int(ck.meta.get("cls_width", 16))
        )
    else:
        model = Encoder(cfg)
        params = ck.prefixed("encoder.")
    load_state_strict(model, params)
    return model


def encoder_from_checkpoint(path) -> Encoder:
    ck = Checkpoint.load(path)
    enc = Encoder(EncoderConfig.from_dict(ck.encoder_config))
    load_state_strict(enc, ck.prefixed("encoder."), "encoder.")
    return enc
