"""Binary model checkpoints.

Layout (little endian)::

    8 bytes   magic b"FGCKPT01"
    u16 + n   kind tag (utf-8, e.g. "rf")
    u32 + n   config block: JSON with "hyper" and "meta"
    u32       number of parameter blocks
    per block:
      u16 + n name (utf-8)
      u8      dtype code (0 = float64, 1 = int64)
      u8      ndim, then ndim x u32 dims
      data    row-major values
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from . import ModelKind, TrainedModel

MAGIC = b"FGCKPT01"
_DTYPES = {0: "<f8", 1: "<i8"}


def _pack_str(fmt: str, text: str) -> bytes:
    raw = text.encode()
    return struct.pack(fmt, len(raw)) + raw


def dumps(model: TrainedModel) -> bytes:
    out = [MAGIC, _pack_str("<H", model.kind.value),
           _pack_str("<I", json.dumps({"hyper": model.hyper, "meta": model.meta}, sort_keys=True)),
           struct.pack("<I", len(model.params))]
    for name in sorted(model.params):
        arr = np.asarray(model.params[name])
        code = 1 if np.issubdtype(arr.dtype, np.integer) else 0
        out.append(_pack_str("<H", name))
        out.append(struct.pack("<BB", code, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    return b"".join(out)


def loads(data: bytes) -> TrainedModel:
    if data[:8] != MAGIC:
        raise ValueError("not a flowguard checkpoint")
    off = 8

    def take(fmt):
        nonlocal off
        vals = struct.unpack_from(fmt, data, off)
        off += struct.calcsize(fmt)
        return vals

    def take_str(fmt):
        nonlocal off
        (n,) = take(fmt)
        s = data[off:off + n].decode()
        off += n
        return s

    kind = ModelKind(take_str("<H"))
    config = json.loads(take_str("<I"))
    (n_blocks,) = take("<I")
    params = {}
    for _ in range(n_blocks):
        name = take_str("<H")
        code, ndim = take("<BB")
        shape = take(f"<{ndim}I") if ndim else ()
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(data, dtype=_DTYPES[code], count=count, offset=off)
        off += arr.nbytes
        params[name] = arr.reshape(shape).astype(_DTYPES[code][1:])
    return TrainedModel(kind, params, config["hyper"], config["meta"])


def save(model: TrainedModel, path: str | Path) -> None:
    path = Path(path)
    path.write_bytes(dumps(model))
    path.with_suffix(".txt").write_text(summary(model))


def load(path: str | Path) -> TrainedModel:
    return loads(Path(path).read_bytes())


def summary(model: TrainedModel) -> str:
    lines = [f"kind: {model.kind.name}"]
    lines += [f"hyper.{k}: {v}" for k, v in sorted(model.hyper.items())]
    for k in ("seed", "n_train", "epochs", "iterations", "final_loss"):
        if k in model.meta:
            lines.append(f"{k}: {model.meta[k]}")
    n_params = sum(np.asarray(p).size for p in model.params.values())
    lines.append(f"parameters: {n_params}")
    return "\n".join(lines) + "\n"
