"""Single-file binary checkpoints.

Layout: 8-byte magic "REFER01\n", a little-endian uint32 byte length, a UTF-8
JSON header, then each array's raw bytes in the order of the header's
manifest. Arrays are stored little-endian (float64/int64/uint8); the manifest
records name, dtype, and shape so loading is a sequence of frombuffer calls.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

MAGIC = b"REFER01\n"
class CheckpointError(RuntimeError):
    """The file is not a readable checkpoint."""
_DTYPES = {"float64": "<f8", "int64": "<i8", "uint8": "|u1"}


def save_checkpoint(path, header: dict, arrays: dict) -> None:
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.bool_:
            arr = arr.astype(np.uint8)
        if arr.dtype.name not in _DTYPES:
            raise TypeError(f"array {name!r} has unsupported dtype {arr.dtype}")
        arr = arr.astype(_DTYPES[arr.dtype.name], copy=False)
        manifest.append([name, arr.dtype.name, list(arr.shape)])
        blobs.append(arr.tobytes())
    header = dict(header)
    header["format"] = "REFER01"
    header["arrays"] = manifest
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Returns (header, arrays). Rejects wrong magic and truncated files."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    off = len(MAGIC)
    (head_len,) = struct.unpack_from("<I", data, off)
    off += 4
    if off + head_len > len(data):
        raise CheckpointError(f"{path} is truncated (header)")
    header = json.loads(data[off : off + head_len].decode("utf-8"))
    off += head_len
    arrays = {}
    for name, dtype, shape in header["arrays"]:
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = n * np.dtype(_DTYPES[dtype]).itemsize
        if off + nbytes > len(data):
            raise CheckpointError(f"{path} is truncated (array {name!r})")
        arrays[name] = np.frombuffer(data[off : off + nbytes], dtype=_DTYPES[dtype]).reshape(shape).copy()
        off += nbytes
    if off != len(data):
        raise CheckpointError(f"{path} has {len(data) - off} trailing bytes")
    return header, arrays


def describe_checkpoint(header: dict) -> str:
    """Human-readable header summary for the inspect subcommand."""
    cfg = header.get("config", {})
    lines = [
        f"format       {header.get('format')}",
        f"algo         {cfg.get('algo')}",
        f"env          {cfg.get('env')}",
        f"replay       {cfg.get('replay')}",
        f"time_step    {header.get('t')}",
        f"grad_step    {header.get('k')}",
        f"beta         {header.get('beta')}",
        f"sigma_r      {header.get('sigma_r')}",
        f"digest       {header.get('digest')}",
    ]
    counts = header.get("param_counts", {})
    total = sum(counts.values())
    lines.append(f"parameters   {total}")
    for name in sorted(counts):
        lines.append(f"  {name:<24} {counts[name]}")
    lines.append(f"arrays       {len(header.get('arrays', []))}")
    return "\n".join(lines)
