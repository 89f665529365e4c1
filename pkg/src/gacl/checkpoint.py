"""``GACLCKPT v1`` checkpoints.

Layout::

    GACLCKPT v1\\n
    <count>\\n
    <name> <rows> <cols> <offset>\\n      (count lines; offset in bytes into the payload)
    \\n
    <payload: little-endian float64 arrays, row-major, back to back>

Vectors are stored as one row.  Loading returns 2-D arrays; callers reshape into
their own parameter shapes via :func:`assign`.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

MAGIC = b"GACLCKPT v1\n"


def save_checkpoint(path, arrays: dict[str, np.ndarray]) -> None:
    lines, blobs, offset = [], [], 0
    for name, arr in arrays.items():
        if any(ch.isspace() for ch in name):
            raise ValueError(f"checkpoint names cannot contain whitespace: {name!r}")
        a = np.asarray(arr, dtype="<f8")
        a2 = a.reshape(1, -1) if a.ndim <= 1 else a.reshape(a.shape[0], -1)
        lines.append(f"{name} {a2.shape[0]} {a2.shape[1]} {offset}\n")
        blob = np.ascontiguousarray(a2).tobytes()
        blobs.append(blob)
        offset += len(blob)
    header = MAGIC + f"{len(lines)}\n".encode() + "".join(lines).encode() + b"\n"
    Path(path).write_bytes(header + b"".join(blobs))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a GACLCKPT v1 file")
    pos = len(MAGIC)
    nl = data.index(b"\n", pos)
    count = int(data[pos:nl])
    pos = nl + 1
    entries = []
    for _ in range(count):
        nl = data.index(b"\n", pos)
        name, rows, cols, off = data[pos:nl].decode().split()
        entries.append((name, int(rows), int(cols), int(off)))
        pos = nl + 1
    if data[pos : pos + 1] != b"\n":
        raise ValueError(f"{path}: manifest not terminated")
    base = pos + 1
    out = {}
    for name, rows, cols, off in entries:
        n = rows * cols
        out[name] = np.frombuffer(data, dtype="<f8", count=n, offset=base + off).reshape(rows, cols).astype(np.float64)
    return out


def assign(targets: dict[str, np.ndarray], loaded: dict[str, np.ndarray], prefix: str = "") -> None:
    """Copy loaded arrays into existing parameter arrays in place."""
    for name, arr in targets.items():
        key = prefix + name
        if key not in loaded:
            raise KeyError(f"checkpoint missing {key}")
        src = loaded[key]
        if src.size != arr.size:
            raise ValueError(f"{key}: size {src.size} != {arr.size}")
        arr[...] = src.reshape(arr.shape)
