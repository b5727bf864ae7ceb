"""Structured rectangular grids, nodal fields, and snapshot files."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple

import numpy as np

__all__ = ["Grid", "GridField", "write_snapshot", "read_snapshot", "face_names"]


def face_names(dim: int):
    return [f"{side}{ax}" for ax in range(dim) for side in ("lo", "hi")]


@dataclass(frozen=True)
class Grid:
    """Box [0, L_1] x ... x [0, L_n] with a uniform cell count per axis."""

    dim: int
    extents: Tuple[float, ...]
    cells: Tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("supported dimensions are 1, 2, 3")
        ext = tuple(float(L) for L in np.atleast_1d(self.extents))
        cel = tuple(int(c) for c in np.atleast_1d(self.cells))
        if len(ext) != self.dim or len(cel) != self.dim:
            raise ValueError("extents/cells must have one entry per axis")
        if any(L <= 0 for L in ext):
            raise ValueError("extents must be positive")
        if any(c < 1 for c in cel):
            raise ValueError("need at least one cell per axis")
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "cells", cel)

    @property
    def h(self):
        return tuple(L / c for L, c in zip(self.extents, self.cells))

    @property
    def node_shape(self):
        return tuple(c + 1 for c in self.cells)

    @property
    def n_nodes(self):
        return int(np.prod(self.node_shape))

    @property
    def n_cells(self):
        return int(np.prod(self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    @cached_property
    def node_coords(self):
        axes = [np.linspace(0.0, L, c + 1) for L, c in zip(self.extents, self.cells)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def corner_index(self):
        """Flat node indices of the 2^dim corners of every cell,
        shape (n_cells, 2^dim); corner k has offset bits of k."""
        n = self.dim
        shape = self.node_shape
        cell_axes = [np.arange(c) for c in self.cells]
        base = np.meshgrid(*cell_axes, indexing="ij")
        base = np.stack([b.ravel() for b in base], axis=-1)  # (n_cells, n)
        out = np.empty((self.n_cells, 2 ** n), dtype=np.int64)
        for k in range(2 ** n):
            bits = [(k >> (n - 1 - ax)) & 1 for ax in range(n)]
            out[:, k] = np.ravel_multi_index(
                tuple(base[:, ax] + bits[ax] for ax in range(n)), shape
            )
        return out

    @cached_property
    def corner_weights(self):
        """D[k, j]: contribution of corner k to the Q1 gradient along axis
        j at the cell center; exact for affine fields."""
        n = self.dim
        h = self.h
        D = np.empty((2 ** n, n))
        for k in range(2 ** n):
            for ax in range(n):
                bit = (k >> (n - 1 - ax)) & 1
                D[k, ax] = (2 * bit - 1) / (2 ** (n - 1) * h[ax])
        return D

    @cached_property
    def cell_centers(self):
        idx = self.corner_index
        return self.node_coords[idx].mean(axis=1)

    def face_mask(self, name: str):
        """Boolean node mask for a whole face, e.g. 'lo0' or 'hi2'."""
        if name not in face_names(self.dim):
            raise ValueError(f"unknown face {name!r} for dim {self.dim}")
        side, ax = name[:2], int(name[2:])
        grids = np.unravel_index(np.arange(self.n_nodes), self.node_shape)
        layer = 0 if side == "lo" else self.cells[ax]
        return grids[ax] == layer


@dataclass
class GridField:
    """Nodal displacement u, phase field v, and the Dirichlet pin data."""

    grid: Grid
    u: np.ndarray
    v: np.ndarray
    dirichlet_u_mask: np.ndarray = None
    dirichlet_u_values: np.ndarray = None
    dirichlet_v_mask: np.ndarray = None

    def __post_init__(self):
        N, n = self.grid.n_nodes, self.grid.dim
        self.u = np.asarray(self.u, dtype=float).reshape(N, n)
        self.v = np.asarray(self.v, dtype=float).reshape(N)
        if self.dirichlet_u_mask is None:
            self.dirichlet_u_mask = np.zeros(N, dtype=bool)
        if self.dirichlet_u_values is None:
            self.dirichlet_u_values = np.zeros((N, n))
        if self.dirichlet_v_mask is None:
            self.dirichlet_v_mask = np.zeros(N, dtype=bool)
        self.dirichlet_u_mask = np.asarray(self.dirichlet_u_mask, dtype=bool).reshape(N)
        self.dirichlet_u_values = np.asarray(self.dirichlet_u_values, dtype=float).reshape(N, n)
        self.dirichlet_v_mask = np.asarray(self.dirichlet_v_mask, dtype=bool).reshape(N)
        self.apply_pins()
        self.validate()

    def apply_pins(self):
        m = self.dirichlet_u_mask
        self.u[m] = self.dirichlet_u_values[m]
        self.v[self.dirichlet_v_mask] = 1.0

    def validate(self):
        if not np.all(np.isfinite(self.u)) or not np.all(np.isfinite(self.v)):
            raise ValueError("field values must be finite")
        if self.v.min() < -1e-12 or self.v.max() > 1.0 + 1e-12:
            raise ValueError("phase field must satisfy 0 <= v <= 1")
        np.clip(self.v, 0.0, 1.0, out=self.v)

    def copy(self):
        return GridField(
            self.grid,
            self.u.copy(),
            self.v.copy(),
            self.dirichlet_u_mask.copy(),
            self.dirichlet_u_values.copy(),
            self.dirichlet_v_mask.copy(),
        )


# ---------------------------------------------------------------------------
# Snapshot files: plain text, exact round trip via shortest-repr decimals
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_snapshot(path, grid: Grid, fieldv: GridField):
    n = grid.dim
    shape = grid.node_shape
    lines = [
        f"# phasefrac snapshot",
        f"dim {n}",
        "extents " + " ".join(_fmt(L) for L in grid.extents),
        "cells " + " ".join(str(c) for c in grid.cells),
        f"nodes {grid.n_nodes}",
    ]
    multi = np.unravel_index(np.arange(grid.n_nodes), shape)
    ijk = np.zeros((grid.n_nodes, 3), dtype=int)
    for ax in range(n):
        ijk[:, ax] = multi[ax]
    for a in range(grid.n_nodes):
        vals = " ".join(_fmt(x) for x in fieldv.u[a]) + " " + _fmt(fieldv.v[a])
        lines.append(f"{ijk[a,0]} {ijk[a,1]} {ijk[a,2]} {vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path):
    """Returns (grid, u, v); pin masks are scenario data, not snapshot data."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    header = {}
    body_start = 0
    for i, ln in enumerate(lines):
        key = ln.split()[0]
        if key in ("dim", "extents", "cells", "nodes"):
            header[key] = ln.split()[1:]
            body_start = i + 1
        else:
            break
    n = int(header["dim"][0])
    grid = Grid(n, tuple(float(x) for x in header["extents"]),
                tuple(int(x) for x in header["cells"]))
    count = int(header["nodes"][0])
    u = np.zeros((grid.n_nodes, n))
    v = np.zeros(grid.n_nodes)
    shape = grid.node_shape
    for ln in lines[body_start:body_start + count]:
        parts = ln.split()
        idx = tuple(int(p) for p in parts[:n])
        flat = np.ravel_multi_index(idx, shape)
        u[flat] = [float(p) for p in parts[3:3 + n]]
        v[flat] = float(parts[3 + n])
    return grid, u, v
