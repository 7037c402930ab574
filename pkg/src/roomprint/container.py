"""Versioned binary container for model files.

Layout: 7-byte magic, 1-byte format version, uint32 little-endian header
length, UTF-8 JSON header, then the raw array payloads. Arrays are float64,
little-endian, C-order; the header records name, shape and byte offset of
each.
"""

import json
import struct

import numpy as np

from .errors import CorruptFileError, UnsupportedFormatError

FORMAT_VERSION = 1


def write_container(path, magic: bytes, arrays: dict, meta: dict) -> None:
    """Write named float64 arrays plus a JSON metadata block."""
    if len(magic) != 7:
        raise ValueError("magic must be exactly 7 bytes")
    entries = []
    offset = 0
    payloads = []
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(data.shape), "offset": offset})
        payloads.append(data.tobytes())
        offset += data.nbytes
    header = json.dumps({"meta": meta, "arrays": entries}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<B", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for payload in payloads:
            fh.write(payload)


def read_container(path, magic: bytes) -> tuple[dict, dict]:
    """Read back (arrays, meta); validates magic and structure."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12:
        raise CorruptFileError(f"corrupt file: {path}: too short")
    if blob[:7] != magic:
        raise UnsupportedFormatError(
            f"unsupported format: {path}: expected magic {magic!r}, got {blob[:7]!r}"
        )
    version = blob[7]
    if version != FORMAT_VERSION:
        raise UnsupportedFormatError(f"unsupported format: {path}: version {version}")
    (header_len,) = struct.unpack("<I", blob[8:12])
    try:
        header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
        body = blob[12 + header_len :]
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            start = entry["offset"]
            data = np.frombuffer(body, dtype="<f8", count=count, offset=start)
            if data.size != count:
                raise ValueError(f"array {entry['name']} truncated")
            arrays[entry["name"]] = data.reshape(shape).astype(np.float64)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CorruptFileError(f"corrupt file: {path}: {exc}") from exc
    return arrays, header["meta"]
