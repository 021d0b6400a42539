"""Binary parameter checkpoints.

Layout (all integers little-endian)::

    magic      8 bytes   b"MASSCKPT"
    version    uint32    currently 1
    meta_len   uint32    length of the UTF-8 JSON metadata blob
    meta       bytes     JSON object (model config, step, ...)
    n_tensors  uint32
    per tensor:
        name_len uint16, name (UTF-8)
        ndim     uint8,  dims (uint32 * ndim)
        data     float64 * prod(dims), C order
"""

from __future__ import annotations

import json
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

MAGIC = b"MASSCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(tensors, meta=None) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    blob = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    parts += [struct.pack("<I", len(blob)), blob, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads(buf: bytes):
    """Return ``(OrderedDict name -> array, meta dict)``."""
    if buf[:8] != MAGIC:
        raise CheckpointError("not a MASS checkpoint (bad magic)")
    (version,) = struct.unpack_from("<I", buf, 8)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 12
    (meta_len,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    meta = json.loads(buf[pos : pos + meta_len].decode("utf-8"))
    pos += meta_len
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    tensors = OrderedDict()
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", buf, pos)
            pos += 4 * ndim
            size = int(np.prod(shape)) * 8
            if pos + size > len(buf):
                raise CheckpointError(f"truncated tensor {name!r}")
            tensors[name] = np.frombuffer(buf, dtype="<f8", count=size // 8, offset=pos).reshape(shape).copy()
            pos += size
    except struct.error as exc:
        raise CheckpointError("truncated checkpoint") from exc
    return tensors, meta


def save(path, module, meta=None):
    arrays = OrderedDict((k, v.data) for k, v in module.named_parameters().items())
    Path(path).write_bytes(dumps(arrays, meta))


def load_into(path, module):
    """Copy tensors from ``path`` into ``module`` in place; return the metadata."""
    tensors, meta = loads(Path(path).read_bytes())
    params = module.named_parameters()
    missing = set(params) ^ set(tensors)
    if missing:
        raise CheckpointError(f"parameter names differ: {sorted(missing)[:5]}")
    for name, p in params.items():
        if p.data.shape != tensors[name].shape:
            raise CheckpointError(f"shape mismatch for {name}: {tensors[name].shape} vs {p.data.shape}")
        p.data = tensors[name]
    return meta
