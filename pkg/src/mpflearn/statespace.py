"""Binary/continuous state representations, datasets and their text file format.

States over ``{0,1}^d`` are indexed little-endian: bit ``k`` of the index is
dimension ``k``, so ``[1, 0, 1] -> 5``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

MAX_ENUM_DIM = 20
MAX_INDEX_DIM = 30


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""


def _check_enum_dim(d, cap=MAX_ENUM_DIM):
    if d > cap:
        raise ValueError(f"d={d} exceeds the enumeration cap of {cap}")


def encode_state(x):
    """Return the integer index of a binary state (or of each row of a 2-D array)."""
    x = np.asarray(x)
    d = x.shape[-1]
    _check_enum_dim(d, MAX_INDEX_DIM)
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("states must contain only 0 and 1")
    powers = np.left_shift(np.int64(1), np.arange(d, dtype=np.int64))
    idx = x.astype(np.int64) @ powers
    return int(idx) if np.ndim(idx) == 0 else idx


def decode_state(i, d):
    """Return the binary state with index ``i`` as an int8 vector of length ``d``.

    ``i`` may also be an integer array, in which case one row per index is returned.
    """
    _check_enum_dim(d, MAX_INDEX_DIM)
    i_arr = np.asarray(i, dtype=np.int64)
    if np.any(i_arr < 0) or np.any(i_arr >= (1 << d)):
        raise ValueError(f"index out of range for d={d}")
    bits = (i_arr[..., None] >> np.arange(d, dtype=np.int64)) & 1
    return bits.astype(np.int8)


def all_states(d):
    """All ``2**d`` states in index order, shape ``(2**d, d)``."""
    _check_enum_dim(d)
    return decode_state(np.arange(1 << d), d)


def bit_flip(x, n):
    """Toggle dimension ``n`` of ``x``; works row-wise on 2-D input."""
    x = np.array(x, copy=True)
    d = x.shape[-1]
    if not 0 <= n < d:
        raise IndexError(f"dimension {n} out of range for d={d}")
    x[..., n] = 1 - x[..., n]
    return x


@dataclass(frozen=True)
class Dataset:
    """A collection of observations with optional normalized weights.

    Parameters
    ----------
    rows : ndarray of shape (n, d)
        Binary (int8) or real (float64) observations.
    kind : {"binary", "continuous"}
    weights : ndarray of shape (n,), optional
        Nonnegative, summing to one. When absent every row has weight ``1/n``.
    """

    rows: np.ndarray
    kind: str = "binary"
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.kind not in ("binary", "continuous"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        rows = np.asarray(self.rows)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-D array")
        if self.kind == "binary":
            if not np.all((rows == 0) | (rows == 1)):
                raise ValueError("binary dataset rows must contain only 0 and 1")
            rows = rows.astype(np.int8)
        else:
            rows = rows.astype(np.float64)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (rows.shape[0],):
                raise ValueError("weights must have one entry per row")
            if np.any(w < 0):
                raise ValueError("weights must be nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def d(self):
        return self.rows.shape[1]

    @property
    def n(self):
        return self.rows.shape[0]

    def row_weights(self):
        """Per-row weights, filling in the uniform default."""
        if self.weights is None:
            return np.full(self.n, 1.0 / self.n)
        return self.weights

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.kind != other.kind or self.rows.shape != other.rows.shape:
            return False
        if not np.array_equal(self.rows, other.rows):
            return False
        if (self.weights is None) != (other.weights is None):
            return False
        return self.weights is None or np.array_equal(self.weights, other.weights)

    __hash__ = None


@dataclass(frozen=True)
class TabularDistribution:
    """Probabilities over all ``2**d`` states, indexed by :func:`encode_state`."""

    d: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (1 << self.d,):
            raise ValueError(f"expected {1 << self.d} probabilities, got {p.shape}")
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


def empirical_distribution(dataset):
    """Histogram of a binary dataset over all states (weights respected)."""
    if dataset.kind != "binary":
        raise ValueError("empirical distribution requires binary data")
    _check_enum_dim(dataset.d)
    idx = encode_state(dataset.rows)
    probs = np.bincount(np.atleast_1d(idx), weights=dataset.row_weights(),
                        minlength=1 << dataset.d)
    # renormalize away accumulated rounding
    return TabularDistribution(dataset.d, probs / probs.sum())


def dataset_from_distribution(dist, support_only=True):
    """Weighted dataset reproducing ``dist`` exactly (one row per state)."""
    idx = np.arange(1 << dist.d)
    w = np.asarray(dist.probs)
    if support_only:
        idx = idx[w > 0]
        w = w[w > 0]
    return Dataset(decode_state(idx, dist.d), weights=w / w.sum())


# ---------------------------------------------------------------------------
# file IO

_HEADERS = {"MPFDATA": ("binary", False), "MPFWDATA": ("binary", True),
            "MPFCONT": ("continuous", False)}


def write_dataset(path, dataset):
    """Write ``dataset`` in the MPFDATA / MPFWDATA / MPFCONT text format."""
    d, n = dataset.d, dataset.n
    lines = []
    if dataset.kind == "continuous":
        if dataset.weights is not None:
            raise ValueError("weighted continuous datasets have no file format")
        lines.append(f"MPFCONT 1 {d} {n}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in dataset.rows)
    elif dataset.weights is None:
        lines.append(f"MPFDATA 1 {d} {n}")
        lines.extend("".join("1" if b else "0" for b in row) for row in dataset.rows)
    else:
        lines.append(f"MPFWDATA 1 {d} {n}")
        for row, w in zip(dataset.rows, dataset.weights):
            lines.append("".join("1" if b else "0" for b in row) + " " + repr(float(w)))
    with open(os.fspath(path), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset(path):
    """Parse a dataset file; errors name the offending line number (1-based)."""
    with open(os.fspath(path)) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError("line 1: empty file")
    head = lines[0].split()
    if len(head) != 4 or head[0] not in _HEADERS or head[1] != "1":
        raise DatasetFormatError(f"line 1: malformed header {lines[0]!r}")
    kind, weighted = _HEADERS[head[0]]
    try:
        d, n = int(head[2]), int(head[3])
    except ValueError:
        raise DatasetFormatError(f"line 1: malformed header {lines[0]!r}") from None
    body = lines[1:]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != n:
        raise DatasetFormatError(f"header declares {n} rows, found {len(body)}")

    weights = np.empty(n) if weighted else None
    if kind == "continuous":
        rows = np.empty((n, d))
    else:
        rows = np.empty((n, d), dtype=np.int8)
    for k, line in enumerate(body):
        lineno = k + 2
        if kind == "continuous":
            parts = line.split()
            if len(parts) != d:
                raise DatasetFormatError(
                    f"line {lineno}: expected {d} values, found {len(parts)}")
            try:
                rows[k] = [float(p) for p in parts]
            except ValueError:
                raise DatasetFormatError(f"line {lineno}: non-numeric value") from None
            continue
        bits = line
        if weighted:
            parts = line.split()
            if len(parts) != 2:
                raise DatasetFormatError(f"line {lineno}: expected '<bits> <weight>'")
            bits = parts[0]
            try:
                weights[k] = float(parts[1])
            except ValueError:
                raise DatasetFormatError(f"line {lineno}: bad weight {parts[1]!r}") from None
        if len(bits) != d:
            raise DatasetFormatError(
                f"line {lineno}: expected {d} characters, found {len(bits)}")
        if set(bits) - {"0", "1"}:
            raise DatasetFormatError(f"line {lineno}: characters other than 0/1")
        rows[k] = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    try:
        return Dataset(rows, kind=kind, weights=weights)
    except ValueError as exc:
        raise DatasetFormatError(str(exc)) from None
