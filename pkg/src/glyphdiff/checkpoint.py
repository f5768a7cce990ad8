"""GDIF checkpoint format.

Layout:
    bytes 0-3    magic ``GDIF``
    bytes 4-7    format version, u32 little-endian (currently 1)
    bytes 8-11   header length in bytes, u32 little-endian
    then         UTF-8 JSON header (canonical: sorted keys, no spaces)
    then         float32 little-endian payload

The header carries ``configs`` (model / train / schedule dicts), ``step``,
``rng_state`` and an ``arrays`` table of ``{name, shape, offset}`` entries
whose offsets are in float32 units and must exactly tile the payload.
Parameter arrays are named ``p.<name>``; optimizer moments ``m.<name>`` /
``v.<name>``; EMA shadows ``ema.<name>``.  save(load(path)) reproduces the
file bytes exactly.
"""

import json
import struct

import numpy as np

MAGIC = b"GDIF"
VERSION = 1


def save(path, arrays, configs, step, rng_state, extra=None):
    """arrays: ordered {name: float32 ndarray}. Returns the header dict."""
    table = []
    offset = 0
    blobs = []
    for name, a in arrays.items():
        a = np.ascontiguousarray(a, dtype=np.float32)
        table.append({"name": name, "shape": list(a.shape), "offset": offset})
        offset += a.size
        blobs.append(a.tobytes())
    header = {
        "format_version": VERSION,
        "configs": configs,
        "step": step,
        "rng_state": rng_state,
        "arrays": table,
        "payload_floats": offset,
    }
    if extra:
        header["extra"] = extra
    hjson = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(hjson)))
        f.write(hjson)
        for b in blobs:
            f.write(b)
    return header


def load(path):
    """Returns (arrays {name: ndarray}, header dict)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a GDIF checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    payload = np.frombuffer(data[12 + hlen:], dtype="<f4")
    if payload.size != header["payload_floats"]:
        raise ValueError(
            f"{path}: payload holds {payload.size} floats, header expects "
            f"{header['payload_floats']}"
        )
    arrays = {}
    end_check = 0
    for entry in header["arrays"]:
        n = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        if start != end_check:
            raise ValueError(f"{path}: array table does not tile the payload at {entry['name']}")
        end_check = start + n
        arrays[entry["name"]] = payload[start:start + n].reshape(entry["shape"]).copy()
    if end_check != payload.size:
        raise ValueError(f"{path}: array table does not cover the payload")
    return arrays, header
