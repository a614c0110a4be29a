"""Lossless text checkpoints.

Layout::

    faithkit-ckpt v1
    dims <V> <d> <h> <C>
    param <name> <rows> <cols>
    <row-major values, one matrix row per line>
    ...
    end

Reals are written with ``repr`` (shortest round-tripping decimal), so
``load_checkpoint(save_checkpoint(m))`` reproduces every bit.
"""

from __future__ import annotations

import os

import numpy as np

from faithkit.errors import DimensionError, ParseError, VersionError
from faithkit.model import N_CLASSES, PARAM_NAMES, ClassifierModel

MAGIC = "faithkit-ckpt"
VERSION = "v1"


def dumps(model: ClassifierModel) -> str:
    lines = [f"{MAGIC} {VERSION}", f"dims {model.vocab_size} {model.dim} {model.hidden} {N_CLASSES}"]
    for name, arr in model.params().items():
        mat = arr.reshape(1, -1) if arr.ndim == 1 else arr
        lines.append(f"param {name} {mat.shape[0]} {mat.shape[1]}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in mat)
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_checkpoint(model: ClassifierModel, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(model))
    os.replace(tmp, path)


def loads(text: str, vocab_size: int | None = None) -> ClassifierModel:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty checkpoint", line=1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise ParseError(f"missing '{MAGIC}' header", line=1)
    if head[1] != VERSION:
        raise VersionError(f"unsupported checkpoint version {head[1]!r}", line=1)
    if len(lines) < 2 or not lines[1].startswith("dims "):
        raise ParseError("missing dims line", line=2)
    try:
        V, d, h, C = (int(tok) for tok in lines[1].split()[1:])
    except ValueError:
        raise ParseError("dims line needs four integers", line=2) from None
    if vocab_size is not None and V != vocab_size:
        raise DimensionError(f"checkpoint vocabulary size {V} != declared vocabulary {vocab_size}")
    if C != N_CLASSES:
        raise DimensionError(f"checkpoint has {C} classes; only {N_CLASSES} supported")
    expected = {
        "embedding": (V, d), "W1": (h, d), "b1": (1, h), "W2": (h, h),
        "b2": (1, h), "W3": (C, h), "b3": (1, C),
    }

    params = {}
    pos = 2
    while True:
        if pos >= len(lines):
            raise ParseError("truncated checkpoint: no 'end' marker", line=pos + 1)
        header = lines[pos].split()
        if header == ["end"]:
            break
        if len(header) != 4 or header[0] != "param":
            raise ParseError(f"expected 'param <name> <rows> <cols>', got {lines[pos]!r}", line=pos + 1)
        name = header[1]
        if name not in expected or name in params:
            raise ParseError(f"unexpected or repeated parameter {name!r}", line=pos + 1)
        rows, cols = int(header[2]), int(header[3])
        if (rows, cols) != expected[name]:
            raise DimensionError(f"{name} declared {rows}x{cols}, dims imply {expected[name]}")
        body = lines[pos + 1 : pos + 1 + rows]
        if len(body) != rows:
            raise ParseError(f"truncated block for {name}", line=len(lines))
        mat = np.empty((rows, cols))
        for r, line in enumerate(body):
            fields = line.split()
            if len(fields) != cols:
                raise ParseError(f"{name} row {r} has {len(fields)} values, expected {cols}", line=pos + 2 + r)
            try:
                mat[r] = [float(v) for v in fields]
            except ValueError:
                raise ParseError(f"bad number in {name} row {r}", line=pos + 2 + r) from None
        params[name] = mat[0] if name.startswith("b") else mat
        pos += 1 + rows
    missing = set(PARAM_NAMES) - set(params)
    if missing:
        raise ParseError(f"missing parameters: {sorted(missing)}")
    return ClassifierModel(**params)


def load_checkpoint(path, vocab_size: int | None = None) -> ClassifierModel:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), vocab_size=vocab_size)
