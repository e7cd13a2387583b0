"""Binary tensor exchange format and multi-tensor checkpoints.

One tensor record is:

    magic "PGSC" | version u32 | ndims u32 | dims u32 * ndims | data f32

All integers and floats are little-endian; data is row-major float32.

A multi-tensor file is a sequence of records; a sidecar text manifest
(path + ".manifest") lists one tensor per line as

    <name>\t<dim0>x<dim1>x...\t<byte offset of the record>

which is the exchange format for datasets and training checkpoints.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import IoFailure

MAGIC = b"PGSC"
VERSION = 1


def write_tensor(fh, array: np.ndarray) -> None:
    """Append one tensor record to a binary stream."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    fh.write(MAGIC)
    fh.write(struct.pack("<I", VERSION))
    fh.write(struct.pack("<I", arr.ndim))
    for dim in arr.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(arr.tobytes())


def read_tensor(fh) -> np.ndarray:
    """Read one tensor record from a binary stream."""
    magic = fh.read(4)
    if magic != MAGIC:
        raise IoFailure(f"bad magic {magic!r}, expected {MAGIC!r}")
    (version,) = struct.unpack("<I", fh.read(4))
    if version != VERSION:
        raise IoFailure(f"unsupported tensor format version {version}")
    (ndims,) = struct.unpack("<I", fh.read(4))
    dims = struct.unpack(f"<{ndims}I", fh.read(4 * ndims))
    count = int(np.prod(dims)) if dims else 1
    raw = fh.read(4 * count)
    if len(raw) != 4 * count:
        raise IoFailure("truncated tensor data")
    return np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float64)


def save_tensors(path: str, tensors: dict) -> None:
    """Write named tensors as concatenated records plus a text manifest."""
    try:
        with open(path, "wb") as fh:
            offsets = {}
            for name in sorted(tensors):
                offsets[name] = fh.tell()
                write_tensor(fh, tensors[name])
        with open(path + ".manifest", "w", encoding="utf-8") as mh:
            for name in sorted(tensors):
                shape = "x".join(str(d) for d in np.shape(tensors[name]))
                mh.write(f"{name}\t{shape}\t{offsets[name]}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write tensors to {path}: {exc}") from exc


def load_tensors(path: str) -> dict:
    """Read back a save_tensors file via its manifest."""
    tensors = {}
    try:
        with open(path + ".manifest", "r", encoding="utf-8") as mh:
            entries = [line.rstrip("\n").split("\t") for line in mh if line.strip()]
        with open(path, "rb") as fh:
            for name, _, offset in entries:
                fh.seek(int(offset))
                tensors[name] = read_tensor(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read tensors from {path}: {exc}") from exc
    return tensors
