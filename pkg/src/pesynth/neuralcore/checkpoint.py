"""Binary checkpoint files: header record plus raw little-endian float32 tensors."""
from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"PESYNCK\x00"
FORMAT_VERSION = 1


class VersionError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict, hparams: dict) -> None:
    header = json.dumps(hparams, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        f.write(header)
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            raw = name.encode()
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_checkpoint(path, expected: dict | None = None) -> tuple[dict, dict]:
    """Return ``(hparams, tensors)``; ``expected`` maps name -> shape to validate."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)
    version, hlen = struct.unpack_from("<II", data, pos)
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    pos += 8
    hparams = json.loads(data[pos:pos + hlen].decode())
    pos += hlen
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + nlen].decode()
        pos += nlen
        (rank,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        n = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=pos).reshape(shape)
        pos += 4 * n
        tensors[name] = arr.astype(np.float32)
    if expected is not None:
        for name, shape in expected.items():
            if name not in tensors:
                raise CheckpointError(f"{path}: missing tensor {name!r}")
            if tuple(tensors[name].shape) != tuple(shape):
                raise CheckpointError(f"{path}: {name} has shape {tensors[name].shape}, expected {tuple(shape)}")
    return hparams, tensors
