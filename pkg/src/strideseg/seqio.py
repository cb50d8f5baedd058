"""Sequence access with exact read accounting.

Two accessors share one interface: read_at(positions) for scattered reads
and read_range(lo, hi) for contiguous ones, positions 1-based. Every
materialized element is recorded, and distinct_touched() reports how many
distinct positions were read over the accessor's lifetime (the sub-linearity
metric). FileSeries never scans the whole file: scattered reads seek per
element, or read one covering block when the positions are packed tightly
enough that the block costs at most twice the payload.
"""

from __future__ import annotations

import os

import numpy as np

from .model import StridesegError

__all__ = ["MemorySeries", "FileSeries", "write_raw", "read_csv_column", "open_series"]

_ITEM = 8  # float64 little-endian


class _Accounting:
    def __init__(self) -> None:
        self._chunks: list[np.ndarray] = []
        self.bytes_read = 0
        self.elements_read = 0

    def record(self, positions: np.ndarray, payload_bytes: int) -> None:
        self._chunks.append(np.asarray(positions, dtype=np.int64))
        self.bytes_read += int(payload_bytes)
        self.elements_read += int(positions.size)

    def distinct_touched(self) -> int:
        if not self._chunks:
            return 0
        if len(self._chunks) > 64:
            merged = np.unique(np.concatenate(self._chunks))
            self._chunks = [merged]
        return int(np.unique(np.concatenate(self._chunks)).size)

    def reset(self) -> None:
        self._chunks = []
        self.bytes_read = 0
        self.elements_read = 0


class _SeriesBase:
    n: int

    def __init__(self) -> None:
        self._acct = _Accounting()

    def _check_positions(self, pos: np.ndarray) -> None:
        if pos.size == 0:
            return
        lo = int(pos.min())
        hi = int(pos.max())
        if lo < 1 or hi > self.n:
            raise StridesegError(f"positions outside [1, {self.n}]: [{lo}, {hi}]")

    @property
    def bytes_read(self) -> int:
        return self._acct.bytes_read

    @property
    def elements_read(self) -> int:
        return self._acct.elements_read

    def distinct_touched(self) -> int:
        return self._acct.distinct_touched()

    def reset_accounting(self) -> None:
        self._acct.reset()


class MemorySeries(_SeriesBase):
    """In-memory accessor; counts elements but no I/O bytes."""

    def __init__(self, values) -> None:
        super().__init__()
        v = np.ascontiguousarray(values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise StridesegError("values must be a nonempty 1-d array")
        self._v = v
        self.n = int(v.size)

    def read_at(self, positions) -> np.ndarray:
        pos = np.asarray(positions, dtype=np.int64)
        self._check_positions(pos)
        self._acct.record(pos, 0)
        return self._v[pos - 1]

    def read_range(self, lo: int, hi: int) -> np.ndarray:
        if not 1 <= lo <= hi <= self.n:
            raise StridesegError(f"bad range [{lo}, {hi}] for n={self.n}")
        self._acct.record(np.arange(lo, hi + 1, dtype=np.int64), 0)
        return self._v[lo - 1 : hi]


class FileSeries(_SeriesBase):
    """Raw little-endian float64 file accessor, headerless, n = size / 8."""

    def __init__(self, path) -> None:
        super().__init__()
        self.path = os.fspath(path)
        size = os.path.getsize(self.path)
        if size == 0 or size % _ITEM:
            raise StridesegError(
                f"{self.path}: size {size} is not a positive multiple of {_ITEM}"
            )
        self.n = size // _ITEM
        self._fh = open(self.path, "rb")

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self) -> "FileSeries":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def read_at(self, positions) -> np.ndarray:
        pos = np.asarray(positions, dtype=np.int64)
        self._check_positions(pos)
        if pos.size == 0:
            return np.empty(0)
        lo = int(pos.min())
        hi = int(pos.max())
        span = hi - lo + 1
        if span <= 2 * pos.size:
            # packed tightly: one covering read costs at most 2x the payload
            self._fh.seek((lo - 1) * _ITEM)
            block = np.frombuffer(self._fh.read(span * _ITEM), dtype="<f8")
            out = block[pos - lo].astype(np.float64)
            self._acct.record(pos, span * _ITEM)
            return out
        out = np.empty(pos.size, dtype=np.float64)
        fh = self._fh
        for i, p in enumerate(pos):
            fh.seek((int(p) - 1) * _ITEM)
            out[i] = np.frombuffer(fh.read(_ITEM), dtype="<f8")[0]
        self._acct.record(pos, pos.size * _ITEM)
        return out

    def read_range(self, lo: int, hi: int) -> np.ndarray:
        if not 1 <= lo <= hi <= self.n:
            raise StridesegError(f"bad range [{lo}, {hi}] for n={self.n}")
        self._fh.seek((lo - 1) * _ITEM)
        count = hi - lo + 1
        out = np.frombuffer(self._fh.read(count * _ITEM), dtype="<f8").astype(
            np.float64
        )
        if out.size != count:
            raise StridesegError(f"{self.path}: short read at [{lo}, {hi}]")
        self._acct.record(np.arange(lo, hi + 1, dtype=np.int64), count * _ITEM)
        return out


def write_raw(path, values) -> None:
    """Write float64 little-endian, headerless."""
    v = np.ascontiguousarray(values, dtype="<f8")
    with open(path, "wb") as fh:
        v.tofile(fh)


def read_csv_column(path) -> np.ndarray:
    """Single-column CSV interchange: one float per line, no header."""
    try:
        v = np.loadtxt(path, dtype=np.float64, ndmin=1)
    except ValueError as exc:
        raise StridesegError(f"{path}: not a single-column numeric CSV: {exc}") from exc
    if v.ndim != 1:
        raise StridesegError(f"{path}: expected exactly one column")
    return v


def open_series(path):
    """Open by extension: .csv loads fully (interchange), anything else is raw."""
    p = os.fspath(path)
    if not os.path.exists(p):
        raise StridesegError(f"no such data file: {p}")
    if p.endswith(".csv"):
        return MemorySeries(read_csv_column(p))
    return FileSeries(p)
