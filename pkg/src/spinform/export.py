"""Mesh and field writers.  Only unmasked nodes are emitted, in row-major order."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cquat import H2Point
from .weierstrass import PlanarGrid

FMT = "%.17g"


def poincare_vertices(F1: H2Point, h: np.ndarray, height_scale: float = 1.0) -> np.ndarray:
    """(x2/(1+x0), x3/(1+x0), s h) for surfaces in H^2 x R."""
    u, v = F1.poincare()
    return np.stack([u, v, height_scale * np.asarray(h, dtype=float)], axis=-1)


def minkowski_vertices(F: np.ndarray) -> np.ndarray:
    """(x2, x3, x0) for surfaces in R^(1,2); the timelike axis becomes vertical."""
    return F[..., [1, 2, 0]]


def triangles(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """1-based vertex numbers of active nodes, and two triangles per fully active grid quad."""
    index = np.zeros(mask.shape, dtype=np.int64)
    index[mask] = np.arange(1, int(mask.sum()) + 1)
    a, b = index[:-1, :-1], index[:-1, 1:]
    c, d = index[1:, 1:], index[1:, :-1]
    full = mask[:-1, :-1] & mask[:-1, 1:] & mask[1:, 1:] & mask[1:, :-1]
    quads = np.stack([a[full], b[full], c[full], d[full]], axis=-1)
    faces = np.concatenate([quads[:, [0, 1, 2]], quads[:, [0, 2, 3]]], axis=0)
    return index, faces


def write_obj(path: str | Path, vertices: np.ndarray, mask: np.ndarray, comment: str = "") -> int:
    """Write an ASCII OBJ; returns the vertex count."""
    verts = vertices[mask]
    if not np.all(np.isfinite(verts)):
        raise ValueError("non-finite vertex at an active node")
    _, faces = triangles(mask)
    lines = [f"# {line}" for line in comment.splitlines()]
    lines += ["v " + " ".join(FMT % c for c in row) for row in verts]
    lines += [f"f {i} {j} {k}" for i, j, k in faces]
    Path(path).write_text("\n".join(lines) + "\n")
    return len(verts)


def write_field_csv(path: str | Path, grid: PlanarGrid, fields: dict[str, np.ndarray]) -> None:
    """CSV with header ``z_re,z_im,<names>`` and one row per active node."""
    m = grid.mask
    z = grid.z[m]
    cols = [z.real, z.imag] + [np.asarray(a, dtype=float)[m] for a in fields.values()]
    header = ",".join(["z_re", "z_im", *fields])
    np.savetxt(path, np.column_stack(cols), fmt=FMT, delimiter=",", header=header, comments="")


def read_field_csv(path: str | Path, grid: PlanarGrid) -> dict[str, np.ndarray]:
    """Inverse of ``write_field_csv``: fields back on the grid, NaN at nodes the file omits."""
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    if names[:2] != ["z_re", "z_im"]:
        raise ValueError(f"{path}: header must start with z_re,z_im")
    rows = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    iy = np.rint((rows[:, 1] - grid.origin.imag) / grid.hy).astype(int)
    ix = np.rint((rows[:, 0] - grid.origin.real) / grid.hx).astype(int)
    if np.any((iy < 0) | (iy >= grid.ny) | (ix < 0) | (ix >= grid.nx)):
        raise ValueError(f"{path}: rows fall outside the configured grid")
    if np.max(np.abs(grid.z[iy, ix] - (rows[:, 0] + 1j * rows[:, 1])), initial=0.0) > 1e-9 * max(1.0, grid.h):
        raise ValueError(f"{path}: node coordinates do not match the configured grid")
    out = {}
    for k, name in enumerate(names[2:], start=2):
        a = np.full(grid.shape, np.nan)
        a[iy, ix] = rows[:, k]
        out[name] = a
    return out
