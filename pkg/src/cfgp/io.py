"""Dataset CSV persistence with a provenance header and unit-cube rescaling."""

from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ConfigError, InvalidArgumentError
from .gp import Dataset


def fmt(v) -> str:
    """Decimal text with 17 significant digits (round-trips a double)."""
    return format(float(v), ".17g")


@dataclass(frozen=True)
class Rescaling:
    """Affine map of raw inputs onto the unit cube and a multiplicative fidelity scale.

    ``x_unit = (x - lo) / (hi - lo)`` and ``t_unit = t / t_scale``. Fidelity is
    scaled multiplicatively so that ``t = 0`` stays the exact-solution limit.
    """

    x_lo: np.ndarray
    x_hi: np.ndarray
    t_scale: np.ndarray

    @classmethod
    def identity(cls, d, m) -> "Rescaling":
        return cls(np.zeros(d), np.ones(d), np.ones(m))

    @classmethod
    def from_config(cls, x_bounds, t_scale, d, m) -> "Rescaling":
        if x_bounds is None:
            lo, hi = np.zeros(d), np.ones(d)
        else:
            b = np.asarray(x_bounds, dtype=float)
            if b.shape != (d, 2):
                raise ConfigError(f"data.x_bounds must be {d} pairs [lo, hi]")
            lo, hi = b[:, 0], b[:, 1]
        ts = np.broadcast_to(np.asarray(t_scale, dtype=float), (m,)).copy()
        if np.any(hi <= lo) or np.any(ts <= 0):
            raise ConfigError("rescaling needs hi > lo and a positive t_scale")
        return cls(lo, hi, ts)

    def forward(self, X, T):
        return (X - self.x_lo) / (self.x_hi - self.x_lo), T / self.t_scale

    def inverse(self, U, S):
        return self.x_lo + U * (self.x_hi - self.x_lo), S * self.t_scale

    def describe(self) -> str:
        lo = ",".join(fmt(v) for v in self.x_lo)
        hi = ",".join(fmt(v) for v in self.x_hi)
        ts = ",".join(fmt(v) for v in self.t_scale)
        return f"rescaling x=x_lo+u*(x_hi-x_lo) x_lo=[{lo}] x_hi=[{hi}] t=s*t_scale t_scale=[{ts}]"


def _columns(d, m, with_y=True):
    cols = [f"x_{r + 1}" for r in range(d)] + [f"t_{j + 1}" for j in range(m)]
    return cols + ["y"] if with_y else cols


def write_header(fh, lines):
    for line in lines:
        fh.write(f"# {line}\n")


def write_table(path, header_lines, columns, rows):
    """CSV with '# ' provenance lines; floats formatted by :func:`fmt`."""
    with open(path, "w", newline="") as fh:
        write_header(fh, header_lines)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_points(path, X, T, y=None, header_lines=()):
    X, T = np.atleast_2d(X), np.atleast_2d(T)
    d, m = X.shape[1], T.shape[1]
    cols = _columns(d, m, y is not None)
    rows = []
    for i in range(X.shape[0]):
        row = [float(v) for v in X[i]] + [float(v) for v in T[i]]
        if y is not None:
            row.append(float(y[i]))
        rows.append(row)
    write_table(path, header_lines, cols, rows)


def write_dataset(path, data: Dataset, header_lines=(), rescaling: Optional[Rescaling] = None):
    """Write ``data`` in raw units (the inverse of ``rescaling`` is applied)."""
    X, T = data.X, data.T
    lines = list(header_lines)
    if rescaling is not None:
        X, T = rescaling.inverse(X, T)
        lines.append(rescaling.describe())
    write_points(path, X, T, data.y, lines)


def read_table(path):
    """Return ``(header_lines, columns, float array)`` from a provenance CSV."""
    with open(path, newline="") as fh:
        text = fh.read()
    header = []
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            header.append(line[1:].strip())
        elif line.strip():
            body.append(line)
    if not body:
        raise InvalidArgumentError(f"{path}: no column header")
    reader = csv.reader(_io.StringIO("\n".join(body)))
    cols = next(reader)
    try:
        vals = np.array([[float(v) for v in row] for row in reader], dtype=float)
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: non-numeric entry ({exc})") from exc
    return header, cols, vals.reshape(-1, len(cols))


def read_dataset(path, rescaling: Optional[Rescaling] = None) -> tuple:
    """Load ``x_1..x_d, t_1..t_m, y`` and map it into model units.

    Returns ``(Dataset, Rescaling)``. Without an explicit rescaling the data
    must already lie in the unit cube.
    """
    _, cols, vals = read_table(path)
    xc = [c for c in cols if c.startswith("x_")]
    tc = [c for c in cols if c.startswith("t_")]
    want = _columns(len(xc), len(tc))
    if cols != want or not xc or not tc:
        raise InvalidArgumentError(f"{path}: expected columns {want}, got {cols}")
    d, m = len(xc), len(tc)
    X, T, y = vals[:, :d], vals[:, d:d + m], vals[:, -1]
    resc = rescaling or Rescaling.identity(d, m)
    U, S = resc.forward(X, T)
    return Dataset(U, S, y), resc
