"""On-disk interchange formats: tagged float32 matrices, labels, manifest.

The downstream streaming classifier consumes exactly three kinds of files —
a magic-tagged binary matrix ("ONZ1"), plain-text integer labels (one per
line), and a JSON manifest naming the pieces.  This module reimplements the
writers from the published byte layout so the extractor has no import
dependency on the consumer; the layout is pinned bit-for-bit by the tests.

Matrix layout: bytes ``b"ONZ1"``, then row and column counts as little-endian
uint32, then the row-major float32 payload, little-endian.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "MAGIC",
    "NORM_TOLERANCE",
    "MatrixFormatError",
    "write_matrix",
    "read_matrix",
    "write_labels",
    "require_unit_rows",
    "write_manifest",
]

MAGIC = b"ONZ1"
NORM_TOLERANCE = 1e-3
_HEADER = struct.Struct("<4sII")


class MatrixFormatError(ValueError):
    """Raised for malformed matrix files (bad magic, bad sizes)."""


def write_matrix(rows, path) -> None:
    """Write a matrix to ``path`` in the ONZ1 format (float32 payload)."""
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {rows.shape}")
    if rows.shape[0] == 0 or rows.shape[1] == 0:
        raise ValueError(f"refusing to write an empty matrix of shape {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ValueError("matrix contains non-finite values")
    rows = np.ascontiguousarray(rows, dtype="<f4")
    n, d = rows.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, d))
        fh.write(rows.tobytes(order="C"))


def read_matrix(path) -> np.ndarray:
    """Read an ONZ1 matrix back, bit-exact, as float32.

    This reader exists for self-verification; consumers have their own.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise MatrixFormatError(f"{path}: file shorter than the header")
    magic, n, d = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = n * d * 4
    actual = len(data) - _HEADER.size
    if actual != expected:
        raise MatrixFormatError(
            f"{path}: payload holds {actual} bytes, header promises {expected}"
        )
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n, d).copy()


def write_labels(labels, path) -> None:
    """Write integer class ids, one per line, aligned with embedding rows."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"labels must be a vector, got shape {labels.shape}")
    with open(path, "w") as fh:
        for value in labels:
            fh.write(f"{int(value)}\n")


def require_unit_rows(rows, what: str, tol: float = NORM_TOLERANCE) -> None:
    """Fail loudly if any row of ``rows`` strays from unit L2 norm by > tol."""
    norms = np.linalg.norm(np.asarray(rows, dtype=np.float64), axis=1)
    deviation = np.abs(norms - 1.0)
    worst = int(np.argmax(deviation))
    if deviation[worst] > tol:
        raise ValueError(
            f"{what}: row {worst} has norm {norms[worst]:.6f}, "
            f"more than {tol} from 1"
        )


def write_manifest(
    path,
    *,
    embeddings_path: str,
    proxies_path: str,
    class_names: list,
    n_declared: int,
    labels_path: str | None = None,
    notes: str = "",
) -> None:
    """Write the JSON manifest tying one extracted dataset together.

    Keys are sorted and the file ends with a newline, matching the consumer's
    own writer byte-for-byte for identical field values.
    """
    if len(class_names) == 0:
        raise ValueError("manifest needs at least one class name")
    if n_declared < 1:
        raise ValueError(f"n_declared must be >= 1, got {n_declared}")
    payload = {
        "embeddings_path": embeddings_path,
        "proxies_path": proxies_path,
        "class_names": list(class_names),
        "n_declared": int(n_declared),
        "labels_path": labels_path,
        "notes": notes,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
