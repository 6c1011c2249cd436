"""PTNS1 tensor files and checkpoint directories.

File layout: magic ``PTNS1\\x00``, u8 dtype tag (0 = f32, 1 = f64), u32
little-endian rank, rank x u64 little-endian dims, then the row-major
payload, little-endian.

A checkpoint is a directory of PTNS1 files plus ``manifest.json`` mapping
parameter names to files and shapes, with the optimizer step counter.

All reads funnel through ``_audit`` so tests can verify that pipeline
stages touch only their declared inputs.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import TensorFormatError

MAGIC = b"PTNS1\x00"
_TAG_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_TO_TAG = {np.dtype("float32"): 0, np.dtype("float64"): 1}

_read_audit_hook = None


def set_read_audit_hook(hook):
    """Install a callable invoked with every path this module reads.

    Returns the previous hook so tests can restore it.
    """
    global _read_audit_hook
    previous = _read_audit_hook
    _read_audit_hook = hook
    return previous


def _audit(path: Path):
    if _read_audit_hook is not None:
        _read_audit_hook(Path(path))


def write_tensor(path, array: np.ndarray):
    array = np.ascontiguousarray(array)
    tag = _DTYPE_TO_TAG.get(array.dtype)
    if tag is None:
        raise TensorFormatError(f"unsupported dtype {array.dtype}, use f32 or f64")
    header = [MAGIC, struct.pack("<B", tag), struct.pack("<I", array.ndim)]
    header.extend(struct.pack("<Q", d) for d in array.shape)
    payload = array.astype(array.dtype.newbyteorder("<"), copy=False).tobytes(order="C")
    Path(path).write_bytes(b"".join(header) + payload)


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    _audit(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 5 or raw[: len(MAGIC)] != MAGIC:
        raise TensorFormatError(f"{path}: missing PTNS1 magic")
    offset = len(MAGIC)
    (tag,) = struct.unpack_from("<B", raw, offset)
    offset += 1
    dtype = _TAG_TO_DTYPE.get(tag)
    if dtype is None:
        raise TensorFormatError(f"{path}: unknown dtype tag {tag}")
    (rank,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if rank > 32:
        raise TensorFormatError(f"{path}: implausible rank {rank}")
    dims = struct.unpack_from(f"<{rank}Q", raw, offset)
    offset += 8 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    expected = offset + count * dtype.itemsize
    if len(raw) != expected:
        raise TensorFormatError(
            f"{path}: payload size {len(raw) - offset}, expected {count * dtype.itemsize}"
        )
    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    return flat.reshape(dims).astype(dtype.newbyteorder("="), copy=True)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path):
    path = Path(path)
    _audit(path)
    return json.loads(path.read_text())


def save_checkpoint(dirpath, arrays: dict, step: int = 0, extra: dict | None = None):
    """Write named arrays into `dirpath` as PTNS1 files plus a manifest."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    entries = {}
    for index, (name, array) in enumerate(sorted(arrays.items())):
        filename = f"p{index:04d}.ptns"
        write_tensor(dirpath / filename, array)
        entries[name] = {
            "file": filename,
            "shape": list(array.shape),
            "dtype": "f64" if array.dtype == np.float64 else "f32",
        }
    manifest = {
        "format": "PTNS1-checkpoint",
        "version": 1,
        "step": int(step),
        "params": entries,
    }
    if extra is not None:
        manifest["extra"] = extra
    write_json(dirpath / "manifest.json", manifest)


def load_checkpoint(dirpath):
    """Returns (arrays, step, extra)."""
    dirpath = Path(dirpath)
    manifest = read_json(dirpath / "manifest.json")
    if manifest.get("format") != "PTNS1-checkpoint":
        raise TensorFormatError(f"{dirpath}: not a checkpoint directory")
    arrays = {}
    for name, entry in manifest["params"].items():
        array = read_tensor(dirpath / entry["file"])
        if list(array.shape) != entry["shape"]:
            raise TensorFormatError(f"{dirpath}: shape mismatch for '{name}'")
        arrays[name] = array
    return arrays, int(manifest["step"]), manifest.get("extra")
