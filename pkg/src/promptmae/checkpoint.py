"""Flat parameter archives with a manifest; round-trips are bit-exact.

Layout: a ZIP file holding exactly two members.

  manifest.json  {"format_version": 1,
                  "config_hash": str, "step_count": int,
                  "freeze": {group: bool},
                  "extra": {...},                       # e.g. framework tag
                  "tensors": [{"name": "group/i", "shape": [...],
                               "offset": int, "nbytes": int}, ...]}
  tensors.bin    concatenation of each tensor's row-major little-endian
                 float64 bytes at the recorded offsets, manifest order.

Files are written to a temp sibling and renamed, so partially written
checkpoints are never observed.
"""

from __future__ import annotations

import json
import os
import tempfile
import zipfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .tensor import Tensor

FORMAT_VERSION = 1
_PAYLOAD_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    arrays: dict[str, np.ndarray]
    freeze: dict[str, bool]
    config_hash: str
    step_count: int
    extra: dict = field(default_factory=dict)

    def group_arrays(self, group: str) -> list[np.ndarray]:
        prefix = group + "/"
        named = [(name, a) for name, a in self.arrays.items() if name.startswith(prefix)]
        named.sort(key=lambda item: int(item[0].rsplit("/", 1)[1]))
        return [a for _, a in named]


def save_checkpoint(path: str, groups: dict[str, list[Tensor]],
                    freeze: dict[str, bool], config_hash: str = "",
                    step_count: int = 0, extra: dict | None = None) -> None:
    entries = []
    blob = bytearray()
    for gname, tensors in groups.items():
        for i, t in enumerate(tensors):
            payload = np.ascontiguousarray(t.data, dtype=_PAYLOAD_DTYPE).tobytes()
            entries.append({
                "name": f"{gname}/{i}",
                "shape": list(t.data.shape),
                "offset": len(blob),
                "nbytes": len(payload),
            })
            blob += payload
    manifest = {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash,
        "step_count": int(step_count),
        "freeze": {k: bool(v) for k, v in freeze.items()},
        "extra": extra or {},
        "tensors": entries,
    }
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".ckpt.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            with zipfile.ZipFile(fh, "w", compression=zipfile.ZIP_STORED) as zf:
                zf.writestr("manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
                zf.writestr("tensors.bin", bytes(blob))
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def load_checkpoint(path: str) -> Checkpoint:
    with zipfile.ZipFile(path, "r") as zf:
        manifest = json.loads(zf.read("manifest.json"))
        blob = zf.read("tensors.bin")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContractError(f"unsupported checkpoint format {manifest.get('format_version')!r}")
    arrays: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        start = entry["offset"]
        raw = blob[start:start + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=_PAYLOAD_DTYPE).reshape(entry["shape"])
        arrays[entry["name"]] = arr.astype(np.float64)
    return Checkpoint(
        arrays=arrays,
        freeze={k: bool(v) for k, v in manifest["freeze"].items()},
        config_hash=manifest["config_hash"],
        step_count=manifest["step_count"],
        extra=manifest.get("extra", {}),
    )
