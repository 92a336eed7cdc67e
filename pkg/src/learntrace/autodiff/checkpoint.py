"""Checkpoint container: JSON header + flat little-endian arrays.

Layout: 8-byte magic, u64-LE header length, UTF-8 JSON header, then the raw
array buffers concatenated in header order. Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, Mapping, Tuple

import numpy as np

from ..errors import IngestionError

MAGIC = b"LTCKPT01"

_DTYPES = {"float64": "<f8", "float32": "<f4"}


def save_checkpoint(path, arrays: Mapping[str, np.ndarray], meta: dict) -> None:
    """Write named arrays plus a free-form JSON metadata block."""
    entries = []
    buffers = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        key = str(arr.dtype)
        if key not in _DTYPES:
            raise IngestionError(f"checkpoint array '{name}' has unsupported dtype {key}")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": key})
        buffers.append(np.ascontiguousarray(arr, dtype=_DTYPES[key]).tobytes())
    header = json.dumps({"meta": meta, "arrays": entries}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for buf in buffers:
            fh.write(buf)


def load_checkpoint(path) -> Tuple[Dict[str, np.ndarray], dict]:
    """Read back (arrays, meta); raises IngestionError on malformed files."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IngestionError(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[: len(MAGIC)] != MAGIC:
        raise IngestionError(f"{path} is not a checkpoint file (bad magic)")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
    offset = 16 + hlen
    arrays: Dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        dt = np.dtype(_DTYPES[entry["dtype"]])
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * dt.itemsize
        buf = raw[offset : offset + nbytes]
        if len(buf) != nbytes:
            raise IngestionError(f"{path}: truncated checkpoint at array '{entry['name']}'")
        arrays[entry["name"]] = (
            np.frombuffer(buf, dtype=dt).reshape(entry["shape"]).astype(entry["dtype"])
        )
        offset += nbytes
    return arrays, header["meta"]
