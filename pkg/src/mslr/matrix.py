"""Dense matrix helpers and file IO.

Matrices are plain 2-D ``float64`` numpy arrays in C (row-major) order.
Two on-disk formats are supported:

``csv``
    One row per line, ``,`` separated, ``.`` decimal point, no header.
``mslr-binary``
    4-byte ASCII magic ``MSLR``, little-endian ``u32`` rows and cols, then
    ``rows * cols`` little-endian ``f64`` values in row-major order.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"MSLR"
_HEADER = struct.Struct("<4sII")


class MatrixFormatError(ValueError):
    """Raised when a matrix file cannot be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def as_matrix(X, name="X"):
    """Return `X` as a finite, row-major 2-D float64 array."""
    A = np.ascontiguousarray(X, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def infer_format(path):
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".csv":
        return "csv"
    if ext in (".bin", ".mslr"):
        return "mslr-binary"
    raise ValueError(f"cannot infer matrix format from extension of {path!r}")


def load_matrix(path, format=None):
    """Load a matrix from `path`.

    `format` is ``"csv"`` or ``"mslr-binary"``; inferred from the file
    extension (``.csv``, ``.bin``) when omitted.
    """
    format = format or infer_format(path)
    if format == "csv":
        return _load_csv(path)
    if format == "mslr-binary":
        return _load_binary(path)
    raise ValueError(f"unknown matrix format {format!r}")


def save_matrix(X, path, format=None):
    format = format or infer_format(path)
    X = as_matrix(X)
    if format == "csv":
        with open(path, "w") as f:
            for row in X:
                # repr() of a python float is the shortest exact round-trip form
                f.write(",".join(repr(float(v)) for v in row))
                f.write("\n")
    elif format == "mslr-binary":
        rows, cols = X.shape
        with open(path, "wb") as f:
            f.write(_HEADER.pack(MAGIC, rows, cols))
            f.write(X.astype("<f8", copy=False).tobytes(order="C"))
    else:
        raise ValueError(f"unknown matrix format {format!r}")


def _load_csv(path):
    rows = []
    width = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise MatrixFormatError(str(exc), line=lineno) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise MatrixFormatError(
                    f"expected {width} columns, found {len(values)}", line=lineno
                )
            if not all(np.isfinite(values)):
                raise ValueError(f"line {lineno}: non-finite value")
            rows.append(values)
    if not rows:
        raise MatrixFormatError("empty matrix file")
    return np.array(rows, dtype=np.float64)


def _load_binary(path):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise MatrixFormatError("truncated header")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MatrixFormatError(f"bad magic {magic!r}")
    if rows < 1 or cols < 1:
        raise MatrixFormatError(f"invalid dimensions {rows}x{cols}")
    payload = raw[_HEADER.size:]
    if len(payload) != 8 * rows * cols:
        raise MatrixFormatError(
            f"payload holds {len(payload)} bytes, expected {8 * rows * cols}"
        )
    X = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix file contains non-finite values")
    return X


def axpby(a, X, b, Y):
    """Entrywise ``a*X + b*Y``."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    return a * X + b * Y


def inner(X, Y):
    """Frobenius inner product."""
    return float(np.vdot(X, Y))
