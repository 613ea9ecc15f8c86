"""I/O records, block-Hankel data matrices and the sliding update column."""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from rilqr.errors import DimensionError, NonFiniteError, RilqrError


@dataclass
class SignalRecord:
    """Time-indexed input/output samples, one row per time step.

    Outputs are the measured states (``C = I``).
    """

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float).T).T
        self.outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float).T).T
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise DimensionError(
                f"inputs ({self.inputs.shape[0]}) and outputs ({self.outputs.shape[0]}) differ in length")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.outputs))):
            raise NonFiniteError("record contains non-finite samples")

    @property
    def length(self) -> int:
        return self.inputs.shape[0]

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    @property
    def n(self) -> int:
        return self.outputs.shape[1]

    def __len__(self):
        return self.length

    def to_csv(self, path) -> None:
        """Write ``u1..um,y1..yn`` with one sample per line."""
        header = [f"u{i + 1}" for i in range(self.m)] + [f"y{i + 1}" for i in range(self.n)]
        data = np.hstack([self.inputs, self.outputs])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([repr(float(x)) for x in row] for row in data)

    @classmethod
    def from_csv(cls, path) -> "SignalRecord":
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
        cols = [h.strip() for h in header]
        m = sum(c.startswith("u") for c in cols)
        n = sum(c.startswith("y") for c in cols)
        if m + n != len(cols) or m == 0 or n == 0 or cols != sorted(cols, key=lambda c: (c[0] != "u", int(c[1:]))):
            raise RilqrError(f"{Path(path).name}: expected header u1..um,y1..yn, got {header}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, :m], data[:, m:])


def build_hankel(samples, start: int, depth: int, width: int) -> np.ndarray:
    """Block Hankel matrix whose ``(j, c)`` block is ``samples[start + j + c]``.

    Parameters
    ----------
    samples : array_like, shape (N_t,) or (N_t, d)
    start, depth, width : int
        First sample index, number of block rows, number of columns.

    Returns
    -------
    ndarray, shape (depth * d, width)
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    nt, d = x.shape
    last = start + depth + width - 2
    if start < 0 or depth < 1 or width < 1 or last > nt - 1:
        raise DimensionError(
            f"Hankel window needs sample {last} (start={start}, depth={depth}, width={width}) "
            f"but the record ends at index {nt - 1}")
    # windows[c] = samples[start + c : start + c + depth] as (d, depth)
    windows = sliding_window_view(x[start:last + 1], depth, axis=0)
    return np.ascontiguousarray(windows.transpose(2, 1, 0).reshape(depth * d, width))


@dataclass
class HankelStack:
    """Past/future Hankel blocks of one record, stacked as ``[Uf; Up; Yp; Yf]``."""

    uf: np.ndarray
    up: np.ndarray
    yp: np.ndarray
    yf: np.ndarray
    k: int
    m: int
    n: int

    @property
    def N(self) -> int:
        return self.uf.shape[1]

    @property
    def s(self) -> int:
        return 2 * self.k * (self.m + self.n)

    @property
    def wp(self) -> np.ndarray:
        return np.vstack([self.up, self.yp])

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([self.uf, self.up, self.yp, self.yf])

    def column(self, c: int) -> np.ndarray:
        return np.concatenate([self.uf[:, c], self.up[:, c], self.yp[:, c], self.yf[:, c]])


def stack_width(length: int, k: int) -> int:
    """Column count ``N_t - 2k + 1`` of the stack built from ``length`` samples."""
    return length - 2 * k + 1


def assemble_stack(record: SignalRecord, k: int) -> HankelStack:
    """Build ``H = [Uf; Up; Yp; Yf]`` with block depth ``k``.

    The past blocks start at sample 0 and the future blocks at sample
    ``k``; all blocks share ``N = N_t - 2k + 1`` columns so the last
    column ends on the final recorded sample.
    """
    if k < 1:
        raise DimensionError(f"depth must be positive, got {k}")
    if record.length < 2 * k + 1:
        raise DimensionError(f"record of {record.length} samples too short for depth {k} (needs {2 * k + 1})")
    N = stack_width(record.length, k)
    return HankelStack(
        uf=build_hankel(record.inputs, k, k, N),
        up=build_hankel(record.inputs, 0, k, N),
        yp=build_hankel(record.outputs, 0, k, N),
        yf=build_hankel(record.outputs, k, k, N),
        k=k, m=record.m, n=record.n,
    )


class UpdateColumnBuilder:
    """Sliding ``2k``-sample window over the historical tail followed by online samples.

    Each call to :meth:`next_column` appends one ``(u, y)`` pair and
    returns the newest stack column ``[u_f; u_p; y_p; y_f]``.
    """

    def __init__(self, k: int, m: int, n: int):
        self.k, self.m, self.n = k, m, n
        self._u = deque(maxlen=2 * k - 1)
        self._y = deque(maxlen=2 * k - 1)
        self.t = -1
        self._ready = False

    @classmethod
    def from_record(cls, record: SignalRecord, k: int) -> "UpdateColumnBuilder":
        """Initialize from the final ``2k`` samples (the last stack column)."""
        if record.length < 2 * k:
            raise DimensionError(f"need at least {2 * k} samples, record has {record.length}")
        b = cls(k, record.m, record.n)
        b._u.extend(record.inputs[-(2 * k - 1):])
        b._y.extend(record.outputs[-(2 * k - 1):])
        b._last = _window_column(record.inputs[-2 * k:], record.outputs[-2 * k:], k)
        b._ready = True
        return b

    @property
    def column(self) -> np.ndarray:
        """The most recently emitted column (``h_{-1}`` right after initialization)."""
        if not self._ready:
            raise RilqrError("column builder used before initialization")
        return self._last

    @property
    def online_count(self) -> int:
        """Number of online samples inside the current window."""
        return min(self.t + 1, 2 * self.k)

    def next_column(self, new_input, new_output) -> np.ndarray:
        if not self._ready:
            raise RilqrError("column builder used before initialization")
        u = np.asarray(new_input, dtype=float).reshape(self.m)
        y = np.asarray(new_output, dtype=float).reshape(self.n)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise NonFiniteError("non-finite online sample")
        us = np.vstack([*self._u, u])
        ys = np.vstack([*self._y, y])
        self._u.append(u)
        self._y.append(y)
        self.t += 1
        self._last = _window_column(us, ys, self.k)
        return self._last


def _window_column(us, ys, k):
    # us, ys: the 2k samples of one column, oldest first
    return np.concatenate([us[k:].ravel(), us[:k].ravel(), ys[:k].ravel(), ys[k:].ravel()])
