"""Text formats for tensors.

COO: a ``shape n1 ... nd`` header followed by ``i1 ... id value`` lines
with 1-based indices. Dense slabs: the same header followed by
``n1 * ... * n_{d-1}`` rows of ``n_d`` values in row-major order (blank
lines between slabs are allowed). ``#`` starts a comment in both.
"""
from __future__ import annotations

from math import prod
from pathlib import Path

import numpy as np

from .tensor_core import SparseObservations, as_dense


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _data_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _read_header(lines):
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise ParseError("empty file") from None
    if tokens[0] != "shape" or len(tokens) < 3:
        raise ParseError("expected 'shape n1 n2 ...' header", lineno)
    try:
        shape = tuple(int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError("non-integer extent in header", lineno) from None
    if any(n < 1 for n in shape):
        raise ParseError("extents must be positive", lineno)
    return shape


def _looks_like_coo(rows, shape):
    d = len(shape)
    for _, tokens in rows:
        if len(tokens) != d + 1:
            return False
        try:
            idx = [int(t) for t in tokens[:d]]
        except ValueError:
            return False
        if any(not 1 <= i <= n for i, n in zip(idx, shape)):
            return False
    return True


def parse_tensor_text(text: str, fmt: str = "auto"):
    """Parse COO or dense-slab text.

    Returns ``SparseObservations`` for COO input and a dense array for
    dense input. ``fmt`` is ``"coo"``, ``"dense"`` or ``"auto"``.
    """
    lines = _data_lines(text)
    shape = _read_header(lines)
    rows = list(lines)
    if fmt == "auto":
        dense_ok = len(rows) == prod(shape[:-1]) and all(len(t) == shape[-1] for _, t in rows)
        coo_ok = _looks_like_coo(rows, shape)
        if dense_ok and coo_ok:
            raise ParseError("ambiguous layout; pass an explicit format")
        fmt = "dense" if dense_ok else "coo"
    if fmt == "coo":
        return _parse_coo(rows, shape)
    if fmt == "dense":
        return _parse_dense(rows, shape)
    raise ValueError(f"unknown format {fmt!r}")


def _parse_coo(rows, shape):
    d = len(shape)
    indices = np.empty((len(rows), d), dtype=np.int64)
    values = np.empty(len(rows))
    seen = {}
    for n, (lineno, tokens) in enumerate(rows):
        if len(tokens) != d + 1:
            raise ParseError(f"expected {d} indices and a value", lineno)
        try:
            idx = tuple(int(t) - 1 for t in tokens[:d])
            val = float(tokens[d])
        except ValueError:
            raise ParseError("malformed entry", lineno) from None
        for i, ext in zip(idx, shape):
            if not 0 <= i < ext:
                raise ParseError(f"index {i + 1} outside extent {ext}", lineno)
        if idx in seen:
            raise ParseError(f"duplicate entry, first seen on line {seen[idx]}", lineno)
        seen[idx] = lineno
        indices[n] = idx
        values[n] = val
    return SparseObservations(shape, indices, values)


def _parse_dense(rows, shape):
    expected = prod(shape[:-1])
    if len(rows) != expected:
        raise ParseError(f"expected {expected} rows of {shape[-1]} values, got {len(rows)} rows")
    out = np.empty((expected, shape[-1]))
    for n, (lineno, tokens) in enumerate(rows):
        if len(tokens) != shape[-1]:
            raise ParseError(f"expected {shape[-1]} values", lineno)
        try:
            out[n] = [float(t) for t in tokens]
        except ValueError:
            raise ParseError("malformed value", lineno) from None
    return as_dense(out.reshape(shape))


def read_tensor(path, fmt: str = "auto"):
    return parse_tensor_text(Path(path).read_text(encoding="utf-8"), fmt)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def format_coo(obs: SparseObservations) -> str:
    lines = ["shape " + " ".join(str(n) for n in obs.shape)]
    for idx, val in zip(obs.indices, obs.values):
        lines.append(" ".join(str(int(i) + 1) for i in idx) + " " + _fmt(val))
    return "\n".join(lines) + "\n"


def format_dense(tensor) -> str:
    tensor = as_dense(tensor)
    lines = ["shape " + " ".join(str(n) for n in tensor.shape)]
    slabs = tensor.reshape(tensor.shape[0], -1, tensor.shape[-1])
    for s, slab in enumerate(slabs):
        if s:
            lines.append("")
        lines.extend(" ".join(_fmt(v) for v in row) for row in slab)
    return "\n".join(lines) + "\n"


def write_tensor(path, data):
    text = format_coo(data) if isinstance(data, SparseObservations) else format_dense(data)
    Path(path).write_text(text, encoding="utf-8")
