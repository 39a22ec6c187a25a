"""Binary checkpoint / prepared-store files and flat key=value configs.

Both file kinds share one framing::

    b"KGE1" | uint32 little-endian header length | UTF-8 JSON header | payload

Checkpoint payloads are float64 little-endian arrays concatenated in
manifest order.  Store payloads hold, for each split in train/valid/test
order, three uint32 little-endian columns (subjects, relations, objects).
"""

import json
import struct
from pathlib import Path

import numpy as np

from .data import SPLITS, TripleStore
from .models import ModelParams

MAGIC = b"KGE1"


class FormatError(ValueError):
    """File does not follow the expected framing."""


def _write(path, header, payload):
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)


def _read(path):
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 8:
        raise FormatError(f"{path}: truncated header")
    (n,) = struct.unpack("<I", data[4:8])
    try:
        header = json.loads(data[8:8 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header ({exc})") from None
    return header, data[8 + n:]


def save_checkpoint(path, params, reciprocal=False, extra=None):
    header = {
        "format": "checkpoint",
        "model": params.kind,
        "n_e": params.n_e,
        "n_r": params.n_r,
        "curvature": params.settings.get("curvature"),
        "settings": params.settings,
        "reciprocal": bool(reciprocal),
        "manifest": params.manifest(),
    }
    if extra:
        header["extra"] = extra
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.arrays.values()
    )
    _write(path, header, payload)


def load_checkpoint(path):
    """Return ``(params, header)``."""
    header, payload = _read(path)
    if header.get("format") != "checkpoint":
        raise FormatError(f"{path}: not a checkpoint file")
    expected = 8 * sum(int(np.prod(m["shape"])) for m in header["manifest"])
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, manifest needs {expected}")
    arrays, offset = {}, 0
    for m in header["manifest"]:
        count = int(np.prod(m["shape"]))
        arrays[m["name"]] = (
            np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
            .astype(np.float64)
            .reshape(m["shape"])
        )
        offset += 8 * count
    return ModelParams(header["model"], arrays, header["settings"]), header


def save_store(path, store):
    header = {
        "format": "store",
        "entities": list(store.entities),
        "relations": list(store.relations),
        "reciprocal": store.reciprocal,
        "splits": {name: len(store.split(name)) for name in SPLITS},
    }
    payload = b"".join(
        np.ascontiguousarray(store.split(name).T, dtype="<u4").tobytes() for name in SPLITS
    )
    _write(path, header, payload)


def load_store(path):
    header, payload = _read(path)
    if header.get("format") != "store":
        raise FormatError(f"{path}: not a prepared-store file")
    expected = 12 * sum(header["splits"][name] for name in SPLITS)
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, split sizes need {expected}")
    splits, offset = {}, 0
    for name in SPLITS:
        n = header["splits"][name]
        cols = np.frombuffer(payload, dtype="<u4", count=3 * n, offset=offset)
        splits[name] = cols.reshape(3, n).T.astype(np.int64)
        offset += 12 * n
    return TripleStore(
        entities=tuple(header["entities"]),
        relations=tuple(header["relations"]),
        reciprocal=header["reciprocal"],
        **splits,
    )


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key] = value
    return out
