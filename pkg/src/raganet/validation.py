"""Small input-validation helpers shared across the package."""
from __future__ import annotations

import numpy as np


def ensure_positive(name, value):
    """Raise ValueError unless ``value`` is a finite number > 0."""
    v = float(value)
    if not np.isfinite(v) or v <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return v


def ensure_at_least(name, value, minimum):
    v = int(value)
    if v < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")
    return v


def as_id_matrix(sequences, length=None):
    """Stack equal-length token-id sequences into an int32 matrix.

    Accepts a 2D array, or an iterable of 1D sequences (lists, arrays, or
    TokenSequence-like objects exposing ``.ids``).
    """
    rows = []
    for seq in sequences:
        ids = getattr(seq, "ids", seq)
        rows.append(np.asarray(ids, dtype=np.int32))
    if not rows:
        raise ValueError("no sequences given")
    want = length if length is not None else rows[0].shape[0]
    for i, row in enumerate(rows):
        if row.ndim != 1 or row.shape[0] != want:
            raise ValueError(
                f"sequence {i} has length {row.shape}, expected ({want},)"
            )
    return np.stack(rows)


def check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
