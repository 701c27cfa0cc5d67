"""Self-describing binary checkpoint container.

Layout: magic "AQCK", little-endian uint64 header length, UTF-8 JSON header,
raw little-endian tensor bytes. The header carries the full experiment
config, its hash, the epoch counter, and a manifest of tensor names /
dtypes / shapes / offsets. Content is fully determined by the saved state,
so identical states produce byte-identical files and round-trips are
bit-exact. Loading under a different config fails loudly on the hash.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import ExperimentConfig, config_from_dict
from .errors import CheckpointError
from .model import AQAModel, build_model

MAGIC = b"AQCK"
FORMAT_VERSION = 1

_DTYPES = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.int64: "<i8",
    torch.int32: "<i4",
    torch.uint8: "|u1",
    torch.bool: "|b1",
}
_TORCH_DTYPES = {v: k for k, v in _DTYPES.items()}


@dataclass
class CheckpointBundle:
    config: ExperimentConfig
    epoch: int
    model_state: dict[str, torch.Tensor]
    optimizer_state: dict[str, torch.Tensor]
    optimizer_steps: dict[str, int]

    def build_model(self) -> AQAModel:
        model = build_model(self.config.model, seed=0)
        model.load_state_dict(self.model_state)
        model.eval()
        return model


def _tensor_bytes(t: torch.Tensor) -> tuple[bytes, str]:
    if t.dtype not in _DTYPES:
        raise CheckpointError(f"unsupported tensor dtype {t.dtype}")
    dtype = _DTYPES[t.dtype]
    arr = t.detach().cpu().contiguous().numpy()
    return np.ascontiguousarray(arr).astype(dtype).tobytes(), dtype


def save_checkpoint(
    path: Path,
    model: AQAModel,
    config: ExperimentConfig,
    epoch: int,
    optimizer: torch.optim.Optimizer | None = None,
) -> None:
    entries = []
    payload = bytearray()

    def add(name: str, tensor: torch.Tensor) -> None:
        data, dtype = _tensor_bytes(tensor)
        entries.append(
            {
                "name": name,
                "dtype": dtype,
                "shape": list(tensor.shape),
                "offset": len(payload),
                "nbytes": len(data),
            }
        )
        payload.extend(data)

    for name, tensor in model.state_dict().items():
        add(f"model.{name}", tensor)

    steps: dict[str, int] = {}
    if optimizer is not None:
        param_names = {id(p): n for n, p in model.named_parameters()}
        for group in optimizer.param_groups:
            for param in group["params"]:
                state = optimizer.state.get(param)
                if not state:
                    continue
                pname = param_names[id(param)]
                for key, value in sorted(state.items()):
                    if isinstance(value, torch.Tensor) and value.ndim > 0:
                        add(f"optim.{pname}.{key}", value)
                    else:
                        steps[f"{pname}.{key}"] = int(value)

    header = {
        "version": FORMAT_VERSION,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "epoch": int(epoch),
        "optimizer_steps": steps,
        "tensors": entries,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(bytes(payload))


def load_checkpoint(
    path: Path, expected: ExperimentConfig | None = None
) -> CheckpointBundle:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (header_len,) = struct.unpack("<Q", raw[4:12])
    try:
        header = json.loads(raw[12 : 12 + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('version')}")

    config = config_from_dict(header["config"])
    if header["config_hash"] != config.config_hash():
        raise CheckpointError(f"{path}: header hash does not match embedded config")
    if expected is not None and expected.config_hash() != header["config_hash"]:
        raise CheckpointError(
            f"{path}: checkpoint config hash {header['config_hash'][:12]}... does not "
            f"match the supplied config {expected.config_hash()[:12]}..."
        )

    payload = raw[12 + header_len :]
    model_state: dict[str, torch.Tensor] = {}
    optim_state: dict[str, torch.Tensor] = {}
    for entry in header["tensors"]:
        start, n = entry["offset"], entry["nbytes"]
        if start + n > len(payload):
            raise CheckpointError(f"{path}: truncated payload at {entry['name']}")
        arr = np.frombuffer(payload[start : start + n], dtype=entry["dtype"]).reshape(
            entry["shape"]
        )
        tensor = torch.from_numpy(arr.astype(arr.dtype.newbyteorder("="))).to(
            _TORCH_DTYPES[entry["dtype"]]
        )
        name = entry["name"]
        if name.startswith("model."):
            model_state[name[len("model.") :]] = tensor
        else:
            optim_state[name[len("optim.") :]] = tensor

    return CheckpointBundle(
        config=config,
        epoch=int(header["epoch"]),
        model_state=model_state,
        optimizer_state=optim_state,
        optimizer_steps={k: int(v) for k, v in header.get("optimizer_steps", {}).items()},
    )


def restore_optimizer(
    optimizer: torch.optim.Optimizer, model: AQAModel, bundle: CheckpointBundle
) -> None:
    """Reinstate Adam moment buffers and step counters by parameter name."""
    by_name = dict(model.named_parameters())
    for key, tensor in bundle.optimizer_state.items():
        pname, state_key = key.rsplit(".", 1)
        param = by_name[pname]
        optimizer.state[param][state_key] = tensor.clone()
    for key, value in bundle.optimizer_steps.items():
        pname, state_key = key.rsplit(".", 1)
        param = by_name[pname]
        optimizer.state[param][state_key] = torch.tensor(float(value))
