"""Versioned binary records for enumerated group balls.

Layout of a record file:

    magic (8 bytes)  b"ISOLABB1"
    header length    uint32 little-endian
    header           JSON, utf-8; carries format version, model data and an
                     ordered list of array descriptors {name, dtype, shape}
    arrays           raw C-order bytes, in header order
    digest           sha256 over everything above (32 bytes)

Records are rejected on any mismatch: magic, version, digest, or truncation.
The cache directory comes from ISOLAB_CACHE_DIR, default ./.isolab_cache.
"""

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ISOLABB1"
FORMAT_VERSION = 1


def cache_root() -> Path:
    root = Path(os.environ.get("ISOLAB_CACHE_DIR", ".isolab_cache"))
    root.mkdir(parents=True, exist_ok=True)
    return root


def record_path(name: str) -> Path:
    return cache_root() / name


def save_record(path, header: dict, arrays: dict) -> Path:
    path = Path(path)
    header = dict(header)
    header["format"] = FORMAT_VERSION
    header["arrays"] = [
        {"name": k, "dtype": str(v.dtype), "shape": list(v.shape)} for k, v in arrays.items()
    ]
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(blob)), blob]
    for k in arrays:
        parts.append(np.ascontiguousarray(arrays[k]).tobytes())
    body = b"".join(parts)
    digest = hashlib.sha256(body).digest()
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(body + digest)
    tmp.replace(path)
    return path


class RecordError(ValueError):
    pass


def load_record(path):
    """Return (header, arrays) or raise RecordError on any integrity failure."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4 + 32:
        raise RecordError("truncated record")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise RecordError("digest mismatch")
    if body[: len(MAGIC)] != MAGIC:
        raise RecordError("bad magic")
    (hlen,) = struct.unpack("<I", body[len(MAGIC) : len(MAGIC) + 4])
    off = len(MAGIC) + 4
    header = json.loads(body[off : off + hlen].decode("utf-8"))
    if header.get("format") != FORMAT_VERSION:
        raise RecordError(f"format version {header.get('format')} != {FORMAT_VERSION}")
    off += hlen
    arrays = {}
    for desc in header["arrays"]:
        dt = np.dtype(desc["dtype"])
        count = int(np.prod(desc["shape"], dtype=np.int64)) if desc["shape"] else 1
        nbytes = dt.itemsize * count
        chunk = body[off : off + nbytes]
        if len(chunk) != nbytes:
            raise RecordError("array payload truncated")
        arrays[desc["name"]] = np.frombuffer(chunk, dtype=dt).reshape(desc["shape"]).copy()
        off += nbytes
    if off != len(body):
        raise RecordError("trailing bytes after arrays")
    return header, arrays


def verify_record(path):
    """Integrity report for one file: {"path", "ok", "detail", ...header bits}."""
    out = {"path": str(path), "ok": False}
    try:
        header, arrays = load_record(path)
    except (RecordError, OSError) as exc:
        out["detail"] = str(exc)
        return out
    out["ok"] = True
    out["detail"] = "ok"
    for key in ("model", "radius", "count"):
        if key in header:
            out[key] = header[key]
    return out


def list_records(prefix: str = ""):
    root = cache_root()
    return sorted(p for p in root.glob(f"{prefix}*.ball") if p.is_file())


def purge_records(prefix: str = "") -> int:
    n = 0
    for p in list_records(prefix):
        p.unlink()
        n += 1
    return n
