"""Checkpoint and time-series persistence.

Checkpoint layout (little endian)::

    8s   magic "DDPSIM1\\0"
    i4   dim
    i4   N
    f8   L, t, epsilon, alpha
    f8   n[N^dim], p[N^dim], psi[N^dim]   (x index fastest)
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import CarrierState
from .grid import Grid

MAGIC = b"DDPSIM1\x00"
_HEADER = struct.Struct("<8sii4d")

CSV_COLUMNS = ("t", "mass_n", "mass_p", "charge", "linf_n", "linf_p", "l2_n", "l2_p",
               "entropy", "dissipation", "l1_dist_n", "l1_dist_p")
_REPORT_FIELDS = ("t", "mass_n", "mass_p", "charge", "linf_n", "linf_p", "l2_n", "l2_p",
                  "e", "diss", "l1_dist_n", "l1_dist_p")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    dim: int
    N: int
    L: float
    t: float
    epsilon: float
    alpha: float
    n: np.ndarray
    p: np.ndarray
    psi: np.ndarray

    @property
    def grid(self) -> Grid:
        return Grid(self.dim, self.L, self.N)


def checkpoint_save(s: CarrierState, grid: Grid, path, epsilon: float = 1.0,
                    alpha: float | None = None) -> None:
    """Write ``s`` bit-exactly; ``alpha`` defaults to ``int (n - p)``."""
    for name in ("n", "p", "psi"):
        grid.check(getattr(s, name), name)
    if alpha is None:
        alpha = grid.integrate(s.n - s.p)
    header = _HEADER.pack(MAGIC, grid.dim, grid.N, grid.L, float(s.t), float(epsilon), float(alpha))
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for a in (s.n, s.p, s.psi):
                fh.write(np.asarray(a, dtype="<f8").ravel(order="F").tobytes())
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc


def read_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, dim, N, L, t, eps, alpha = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if dim not in (2, 3) or N < 1:
        raise CheckpointError(f"{path}: corrupt header (dim={dim}, N={N})")
    cells = N ** dim
    expected = _HEADER.size + 3 * 8 * cells
    if len(raw) != expected:
        kind = "truncated" if len(raw) < expected else "oversized"
        raise CheckpointError(f"{path}: {kind} file ({len(raw)} bytes, expected {expected})")
    arrays = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(3, cells)
    shape = (N,) * dim
    n, p, psi = (a.reshape(shape, order="F").astype(float) for a in arrays)
    return Checkpoint(dim, N, L, t, eps, alpha, n, p, psi)


def checkpoint_load(path, grid: Grid | None = None) -> CarrierState:
    """Load a state; ``grid`` (if given) must match the stored dimension and size."""
    ck = read_checkpoint(path)
    if grid is not None:
        if grid.dim != ck.dim:
            raise CheckpointError(f"{path}: dimension mismatch (file {ck.dim}D, run {grid.dim}D)")
        if grid.N != ck.N or grid.L != ck.L:
            raise CheckpointError(
                f"{path}: grid mismatch (file N={ck.N} L={ck.L}, run N={grid.N} L={grid.L})")
    return CarrierState(t=ck.t, n=ck.n, p=ck.p, psi=ck.psi)


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def emit_timeseries(reports, path) -> None:
    """Write one CSV row per report with 17 significant digits."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to write")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_timeseries(reports, fh)
    except OSError as exc:
        raise OSError(f"cannot write time series {path}: {exc}") from exc


def write_timeseries(reports, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([format_float(getattr(r, f)) for f in _REPORT_FIELDS])
