"""Uniform cell-centred rectangular grids and the stencils built on them.

Fields are plain numpy arrays: a scalar field has shape ``grid.shape`` and a
vector field has shape ``(grid.dim, *grid.shape)``.  Homogeneous Neumann
boundaries are realised with mirror ghost cells.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

SNAPSHOT_MAGIC = b"ACFLOW-SNAPSHOT 1\n"


class DegenerateSamplingWarning(UserWarning):
    """A ball is too small to be resolved by the grid."""


@dataclass(frozen=True)
class Grid:
    """Rectangular domain ``origin + [0, extent]`` split into equal cubic cells."""

    extent: tuple[float, ...]
    cells: tuple[int, ...]
    origin: tuple[float, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        extent = tuple(float(e) for e in self.extent)
        cells = tuple(int(c) for c in self.cells)
        origin = (0.0,) * len(extent) if self.origin is None else tuple(float(o) for o in self.origin)
        if len(extent) not in (1, 2, 3):
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(extent)}")
        if len(cells) != len(extent) or len(origin) != len(extent):
            raise ValueError("extent, cells and origin must have the same length")
        if min(cells) < 4:
            raise ValueError(f"every axis needs at least 4 cells, got {cells}")
        if min(extent) <= 0:
            raise ValueError(f"extents must be positive, got {extent}")
        spacings = [e / c for e, c in zip(extent, cells)]
        if max(spacings) - min(spacings) > 1e-12 * max(spacings):
            raise ValueError(f"grid spacing must be equal on all axes, got {spacings}")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float], cells: Sequence[int]) -> "Grid":
        return cls(
            extent=tuple(b - a for a, b in zip(lower, upper)),
            cells=tuple(cells),
            origin=tuple(lower),
        )

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def h(self) -> float:
        return self.extent[0] / self.cells[0]

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def volume(self) -> float:
        return math.prod(self.extent)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.extent)

    def axes(self) -> list[np.ndarray]:
        """Cell-centre coordinates along each axis."""
        return [o + (np.arange(n) + 0.5) * self.h for o, n in zip(self.origin, self.cells)]

    def coords(self) -> np.ndarray:
        """Cell centres as a read-only array of shape ``(dim, *shape)``."""
        return self._coords

    @cached_property
    def _coords(self) -> np.ndarray:
        x = np.stack(np.meshgrid(*self.axes(), indexing="ij"))
        x.flags.writeable = False
        return x

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))


def _shifted(padded: np.ndarray, axis: int, offset: int) -> np.ndarray:
    # view of the padded array displaced by ``offset`` along ``axis``
    index = [slice(1, -1)] * padded.ndim
    stop = padded.shape[axis] - 1 + offset
    index[axis] = slice(1 + offset, stop if stop != 0 else None)
    return padded[tuple(index)]


def laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Five/seven point Laplacian with mirror ghosts (``u_{-1} = u_0``).

    The stencil telescopes, so the discrete integral of the result is zero.
    """
    p = np.pad(f, 1, mode="edge")
    out = -2.0 * grid.dim * f
    for axis in range(grid.dim):
        out = out + _shifted(p, axis, 1) + _shifted(p, axis, -1)
    return out / grid.h**2


def gradient(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Centred differences; the ghost reflection ``u_{-1} = u_1`` zeroes the
    normal component in boundary cells."""
    p = np.pad(f, 1, mode="reflect")
    return np.stack(
        [(_shifted(p, axis, 1) - _shifted(p, axis, -1)) / (2.0 * grid.h) for axis in range(grid.dim)]
    )


def divergence(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Centred divergence of a vector field (``gradient`` applied per component)."""
    out = np.zeros(v.shape[1:])
    for axis in range(grid.dim):
        p = np.pad(v[axis], 1, mode="reflect")
        out += (_shifted(p, axis, 1) - _shifted(p, axis, -1)) / (2.0 * grid.h)
    return out


def face_gradient_sq(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Cell value of ``|grad f|^2`` built from squared face differences.

    Each cell takes the mean of the squared differences across its two faces
    on every axis; boundary faces carry zero flux.  Integrated over the grid this
    is the quadratic form of ``-laplacian``, i.e.
    ``integrate(face_gradient_sq(f)) == -integrate(f * laplacian(f))``.
    """
    out = np.zeros(f.shape)
    for axis in range(grid.dim):
        d = np.diff(f, axis=axis) / grid.h
        sq = d * d
        pad = [(0, 0)] * f.ndim
        pad[axis] = (1, 0)
        left = np.pad(sq, pad)
        pad[axis] = (0, 1)
        right = np.pad(sq, pad)
        out += 0.5 * (left + right)
    return out


def integrate(f: np.ndarray, grid: Grid) -> float:
    """Midpoint rule.  numpy's pairwise summation is deterministic for a
    fixed shape, so repeated runs reproduce bit-identical sums."""
    return float(np.sum(f)) * grid.cell_volume


def ball_mass(density: np.ndarray, grid: Grid, center: Sequence[float], radius: float) -> float:
    """Mass of ``density`` over cells whose centres lie in the closed ball."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if radius < grid.h:
        warnings.warn(
            f"ball radius {radius:g} is below the grid spacing {grid.h:g}; mass is unreliable",
            DegenerateSamplingWarning,
            stacklevel=2,
        )
    dist2 = np.zeros(grid.shape)
    for axis, x in enumerate(grid.axes()):
        shape = [1] * grid.dim
        shape[axis] = -1
        dist2 = dist2 + ((x - center[axis]) ** 2).reshape(shape)
    return float(np.sum(density[dist2 <= radius * radius])) * grid.cell_volume


def save_snapshot(path: str | Path, grid: Grid, field_: np.ndarray, t: float, eps: float) -> None:
    """Write a field as magic line + one-line JSON header + raw little-endian float64 (C order)."""
    field_ = np.asarray(field_, dtype="<f8")
    if field_.shape[-grid.dim :] != grid.shape:
        raise ValueError(f"field shape {field_.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(field_)):
        raise ValueError("refusing to write a non-finite field")
    header = {
        "dim": grid.dim,
        "cells": list(grid.cells),
        "extent": list(grid.extent),
        "origin": list(grid.origin),
        "components": 1 if field_.ndim == grid.dim else int(field_.shape[0]),
        "time": float(t),
        "epsilon": float(eps),
    }
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(field_).tobytes())


def load_snapshot(path: str | Path) -> tuple[Grid, np.ndarray, dict]:
    with open(path, "rb") as fh:
        if fh.readline() != SNAPSHOT_MAGIC:
            raise ValueError(f"{path} is not a field snapshot")
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8")
    grid = Grid(tuple(header["extent"]), tuple(header["cells"]), tuple(header["origin"]))
    shape = grid.shape if header["components"] == 1 else (header["components"], *grid.shape)
    if data.size != math.prod(shape):
        raise ValueError(f"{path}: expected {math.prod(shape)} samples, found {data.size}")
    return grid, data.reshape(shape).astype(float), header
