"""Integration of first-order systems along spanning trees of a planar grid.

A flow right-hand side is a callable ``rhs(z, y, dz) -> dy`` acting on a batch:
``z`` (n,) complex base points, ``y`` (n, d) real states and ``dz`` (n,) complex
displacements.  It returns the increment ``A(z, y) dz + B(z, y) conj(dz)``
contracted into real components, so the same signature covers complex-linear
and conjugate-linear parts.  States are real to keep conjugations explicit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import stencil
from .weierstrass import PlanarGrid, WeierstrassData, compatibility

Rhs = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

BLOWUP_NORM = 1e12


class FlowBlowUp(RuntimeError):
    def __init__(self, message: str, node: tuple[int, int], z: complex):
        super().__init__(f"{message} at node (ix={node[1]}, iy={node[0]}), z={z.real:.6g}{z.imag:+.6g}j")
        self.node = node
        self.z = z


class IncompatibleData(RuntimeError):
    pass


class HeightDrift(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# path plans

@dataclass(frozen=True)
class PathPlan:
    """Spanning tree of the active grid, grouped into batches of independent edges.

    Each level is a pair ``(src, dst)`` of flat node indices; every source was
    reached in an earlier level, so a level can be integrated in one vector
    operation with the same result as edge-by-edge execution.
    """

    name: str
    seed: tuple[int, int]
    shape: tuple[int, int]
    levels: tuple[tuple[np.ndarray, np.ndarray], ...]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(int(s), int(d)) for src, dst in self.levels for s, d in zip(src, dst)]

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s, _ in self.levels)

    def validate(self, grid: PlanarGrid) -> "PathPlan":
        """Check that the edges form a spanning tree of the active 4-neighbour graph."""
        if self.shape != grid.shape:
            raise ValueError(f"plan shape {self.shape} does not match grid {grid.shape}")
        mask = grid.mask.ravel()
        nx = grid.nx
        seed = self.seed[0] * nx + self.seed[1]
        if not mask[seed]:
            raise ValueError("plan seed is a masked node")
        reached = np.zeros(mask.size, dtype=bool)
        reached[seed] = True
        for src, dst in self.levels:
            if not np.all(reached[src]):
                raise ValueError(f"plan {self.name!r} uses an edge from an unreached node")
            if np.any(reached[dst]) or len(np.unique(dst)) != len(dst):
                raise ValueError(f"plan {self.name!r} reaches a node twice")
            if not np.all(mask[dst]):
                raise ValueError(f"plan {self.name!r} enters a masked node")
            dy, dx = np.abs(src // nx - dst // nx), np.abs(src % nx - dst % nx)
            if np.any(dy + dx != 1):
                raise ValueError(f"plan {self.name!r} has an edge between non-neighbours")
            reached[dst] = True
        if np.any(mask & ~reached):
            raise ValueError(f"plan {self.name!r} misses {(mask & ~reached).sum()} active nodes "
                             "(active region not connected along the sweep)")
        return self


def _sweep(mask: np.ndarray, seed: tuple[int, int], name: str, transpose: bool) -> PathPlan:
    ny, nx = mask.shape
    m = mask.T if transpose else mask
    sy, sx = (seed[1], seed[0]) if transpose else seed
    n_rows, n_cols = m.shape

    def flat(r, c):
        r, c = np.asarray(r), np.asarray(c)
        return (c * nx + r) if transpose else (r * nx + c)

    levels = []
    # seed column, outward both ways
    for direction in (1, -1):
        r = sy + direction
        while 0 <= r < n_rows and m[r, sx]:
            levels.append((flat([r - direction], [sx]), flat([r], [sx])))
            r += direction
    col_rows = [r for r in range(n_rows) if m[r, sx]]
    col_rows = _contiguous(col_rows, sy)
    rows = np.array(col_rows, dtype=int)
    # row sweeps, one column step at a time for all rows together
    for direction in (1, -1):
        active = rows.copy()
        c = sx
        while active.size:
            nxt = c + direction
            if not 0 <= nxt < n_cols:
                break
            active = active[m[active, nxt]]
            if active.size:
                levels.append((flat(active, np.full(active.size, c)), flat(active, np.full(active.size, nxt))))
            c = nxt
    levels = [(np.asarray(s, int), np.asarray(d, int)) for s, d in levels]
    levels += _complete(mask, seed, levels)
    return PathPlan(name, seed, (ny, nx), tuple(levels))


def _complete(mask: np.ndarray, seed: tuple[int, int], levels) -> list[tuple[np.ndarray, np.ndarray]]:
    """Breadth-first levels attaching active nodes the sweeps did not reach (off-centre seeds)."""
    ny, nx = mask.shape
    reached = np.zeros(mask.size, dtype=bool)
    reached[seed[0] * nx + seed[1]] = True
    for _, dst in levels:
        reached[dst] = True
    flat_mask = mask.ravel()
    extra = []
    while True:
        src, dst = [], []
        for k in np.flatnonzero(flat_mask & ~reached):
            iy, ix = divmod(int(k), nx)
            for dy, dx in ((0, -1), (0, 1), (-1, 0), (1, 0)):
                jy, jx = iy + dy, ix + dx
                if 0 <= jy < ny and 0 <= jx < nx and reached[jy * nx + jx]:
                    src.append(jy * nx + jx)
                    dst.append(int(k))
                    break
        if not dst:
            return extra
        reached[dst] = True
        extra.append((np.array(src, dtype=int), np.array(dst, dtype=int)))


def _contiguous(rows: list[int], start: int) -> list[int]:
    """Rows connected to ``start`` without gaps."""
    s = set(rows)
    lo = hi = start
    while lo - 1 in s:
        lo -= 1
    while hi + 1 in s:
        hi += 1
    return list(range(lo, hi + 1))


def column_rows(grid: PlanarGrid, seed: tuple[int, int] | None = None) -> PathPlan:
    """Serial column through the seed, then row sweeps (the default plan).

    Nodes no row sweep reaches, which happens for off-centre seeds on a disk,
    are attached afterwards breadth-first.
    """
    seed = grid.default_seed() if seed is None else seed
    return _sweep(grid.mask, seed, "column_rows", transpose=False).validate(grid)


def row_columns(grid: PlanarGrid, seed: tuple[int, int] | None = None) -> PathPlan:
    """Serial row through the seed, then column sweeps."""
    seed = grid.default_seed() if seed is None else seed
    return _sweep(grid.mask, seed, "row_columns", transpose=True).validate(grid)


def bfs_plan(grid: PlanarGrid, seed: tuple[int, int] | None = None) -> PathPlan:
    """Breadth-first tree; its staircase paths differ from both sweeps."""
    seed = grid.default_seed() if seed is None else seed
    mask = grid.mask
    ny, nx = mask.shape
    reached = np.zeros_like(mask)
    reached[seed] = True
    frontier = [seed]
    levels = []
    while frontier:
        src, dst, new = [], [], []
        for (iy, ix) in frontier:
            for dy, dx in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                jy, jx = iy + dy, ix + dx
                if 0 <= jy < ny and 0 <= jx < nx and mask[jy, jx] and not reached[jy, jx]:
                    reached[jy, jx] = True
                    src.append(iy * nx + ix)
                    dst.append(jy * nx + jx)
                    new.append((jy, jx))
        if src:
            levels.append((np.array(src), np.array(dst)))
        frontier = new
    return PathPlan("bfs", seed, (ny, nx), tuple(levels)).validate(grid)


PLANS = {"column_rows": column_rows, "row_columns": row_columns, "bfs": bfs_plan}


# ---------------------------------------------------------------------------
# integration

def rk4_step(rhs: Rhs, z: np.ndarray, y: np.ndarray, dz: np.ndarray, substeps: int = 4) -> np.ndarray:
    """Classical RK4 along the straight segments z -> z + dz, split into ``substeps`` pieces."""
    step = dz / substeps
    for k in range(substeps):
        z0 = z + k * step
        k1 = rhs(z0, y, step)
        k2 = rhs(z0 + step / 2, y + k1 / 2, step)
        k3 = rhs(z0 + step / 2, y + k2 / 2, step)
        k4 = rhs(z0 + step, y + k3, step)
        y = y + (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return y


def integrate_flow(rhs: Rhs, grid: PlanarGrid, plan: PathPlan, init, *, substeps: int = 4,
                   monitor: Optional[Callable[[np.ndarray, np.ndarray], None]] = None) -> np.ndarray:
    """Transport ``init`` from the plan seed along every plan edge.

    Returns an array of shape ``(ny, nx, d)``, NaN on masked nodes.  ``monitor``
    is called as ``monitor(dst_flat_indices, new_states)`` after each level and
    may raise to abort.
    """
    init = np.atleast_1d(np.asarray(init, dtype=float))
    d = init.shape[-1]
    zf = grid.z.ravel()
    out = np.full((zf.size, d), np.nan)
    seed = plan.seed[0] * grid.nx + plan.seed[1]
    out[seed] = init
    for src, dst in plan.levels:
        y = rk4_step(rhs, zf[src], out[src], zf[dst] - zf[src], substeps)
        norms = np.linalg.norm(y, axis=-1)
        bad = ~np.isfinite(norms) | (norms > BLOWUP_NORM)
        if bad.any():
            k = int(dst[np.argmax(bad)])
            raise FlowBlowUp("flow state blew up", (k // grid.nx, k % grid.nx), complex(zf[k]))
        if monitor is not None:
            monitor(dst, y)
        out[dst] = y
    return out.reshape(grid.shape + (d,))


def holonomy_residual(field_: np.ndarray, rhs: Rhs, grid: PlanarGrid, substeps: int = 4) -> np.ndarray:
    """Per-plaquette norm of (counter-clockwise loop transport - start value).

    Shape ``(ny - 1, nx - 1)``; NaN where a plaquette has a masked corner.
    """
    m = grid.mask
    ok = m[:-1, :-1] & m[:-1, 1:] & m[1:, :-1] & m[1:, 1:]
    z = grid.z[:-1, :-1][ok]
    y0 = field_[:-1, :-1][ok]
    y = y0
    for step in (grid.hx, 1j * grid.hy, -grid.hx, -1j * grid.hy):
        dz = np.full(z.shape, step, dtype=complex)
        y = rk4_step(rhs, z, y, dz, substeps)
        z = z + dz
    out = np.full(ok.shape, np.nan)
    out[ok] = np.linalg.norm(y - y0, axis=-1)
    return out


# ---------------------------------------------------------------------------
# the h_z system

def hz_coefficients(data: WeierstrassData, z: np.ndarray, hz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(A, B) with d(h_z) = A dz + B conj(dz)."""
    tau = np.asarray(data.tau0(z), dtype=float)
    Q = np.asarray(data.Q0(z), dtype=complex)
    log_tau_z = 2.0 * np.asarray(data.logsqrt_tau_z(z), dtype=complex)
    s = tau + 4.0 * np.abs(hz) ** 2
    A = log_tau_z * hz - Q * np.sqrt(s / tau)
    B = 0.25 * np.sqrt(tau * s)
    return A, B


def hz_rhs(data: WeierstrassData) -> Rhs:
    def rhs(z, y, dz):
        hz = y[:, 0] + 1j * y[:, 1]
        A, B = hz_coefficients(data, z, hz)
        d = A * dz + B * np.conj(dz)
        return np.stack([d.real, d.imag], axis=-1)

    return rhs


@dataclass(frozen=True)
class HzField:
    hz: np.ndarray
    hz_z: np.ndarray
    hz_zbar: np.ndarray
    mixed_residual: np.ndarray
    seed: tuple[int, int]
    theta0: complex
    compat: dict = field(default_factory=dict)

    @property
    def mixed_residual_max(self) -> float:
        r = self.mixed_residual
        return float(np.nanmax(r)) if np.any(np.isfinite(r)) else 0.0


def require_compatible(data: WeierstrassData, grid: PlanarGrid, strict: bool) -> dict:
    """Evaluate the compatibility residuals; warn, or raise when ``strict``."""
    c = compatibility(data, grid)
    if not c.compatible:
        msg = (f"data {data.name!r} look incompatible: residuals "
               f"({c.holomorphic:.3e}, {c.vortex:.3e}) exceed {c.threshold:.3e}")
        if strict:
            raise IncompatibleData(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return c.to_dict()


def solve_hz(data: WeierstrassData, grid: PlanarGrid, plan: PathPlan | None = None,
             theta0: complex = 0j, *, strict: bool = False, substeps: int = 4) -> HzField:
    """Integrate the h_z system from h_z(seed) = theta0."""
    plan = column_rows(grid) if plan is None else plan
    compat = require_compatible(data, grid, strict)
    data = data.on_grid(grid)
    y = integrate_flow(hz_rhs(data), grid, plan, [complex(theta0).real, complex(theta0).imag],
                       substeps=substeps)
    hz = y[..., 0] + 1j * y[..., 1]
    m = grid.mask
    A = np.full(grid.shape, np.nan + 0j)
    B = np.full(grid.shape, np.nan + 0j)
    A[m], B[m] = hz_coefficients(data, grid.z[m], hz[m])
    # d/dzbar of A must equal d/dz of B
    dA = 0.5 * (stencil.centred(A, m, grid.hx, 1) + 1j * stencil.centred(A, m, grid.hy, 0))
    dB = 0.5 * (stencil.centred(B, m, grid.hx, 1) - 1j * stencil.centred(B, m, grid.hy, 0))
    return HzField(hz, A, B, np.abs(dA - dB), plan.seed, complex(theta0), compat)


# ---------------------------------------------------------------------------
# height

@dataclass(frozen=True)
class HeightField:
    h: np.ndarray
    imag_drift: float


def integrate_height(hz: np.ndarray, grid: PlanarGrid, plan: PathPlan, h0: float = 0.0,
                     hz_z: np.ndarray | None = None, hz_zbar: np.ndarray | None = None,
                     drift_tol: float = 1e-6) -> HeightField:
    """Integrate dh = h_z dz + conj(h_z dz) along the plan.

    Each edge uses the trapezoid rule; when the derivatives of h_z are given the
    endpoint (Euler-Maclaurin) correction makes it fourth order.  The complex
    line integral is accumulated alongside and its imaginary part is the drift.
    """
    zf = grid.z.ravel()
    w = np.asarray(hz, dtype=complex).ravel()
    have_d = hz_z is not None and hz_zbar is not None
    if have_d:
        A, B = np.asarray(hz_z).ravel(), np.asarray(hz_zbar).ravel()
    acc = np.full(zf.size, np.nan + 0j)
    seed = plan.seed[0] * grid.nx + plan.seed[1]
    acc[seed] = h0
    for src, dst in plan.levels:
        dz = zf[dst] - zf[src]
        f0 = w[src] * dz + np.conj(w[src]) * np.conj(dz)
        f1 = w[dst] * dz + np.conj(w[dst]) * np.conj(dz)
        inc = 0.5 * (f0 + f1)
        if have_d:
            # d/dt of (h_z dz + c.c.) along the edge
            g0 = (A[src] * dz + B[src] * np.conj(dz)) * dz
            g1 = (A[dst] * dz + B[dst] * np.conj(dz)) * dz
            inc = inc - ((g1 + np.conj(g1)) - (g0 + np.conj(g0))) / 12.0
        acc[dst] = acc[src] + inc
    active = grid.mask.ravel()
    if not np.all(np.isfinite(acc[active])):
        raise ValueError("h_z field is not finite on the active region")
    drift = float(np.max(np.abs(acc[active].imag), initial=0.0))
    if drift > drift_tol:
        raise HeightDrift(f"imaginary drift {drift:.3e} exceeds {drift_tol:.1e}")
    h = acc.real.reshape(grid.shape)
    h[~grid.mask] = np.nan
    return HeightField(h, drift)


def height_loop_residual(hz: np.ndarray, grid: PlanarGrid) -> np.ndarray:
    """Trapezoid loop integral of dh around each plaquette."""
    w = np.asarray(hz, dtype=complex)

    def edge(wa, wb, dz):
        return 0.5 * ((wa + wb) * dz + np.conj(wa + wb) * np.conj(dz)).real

    loop = (edge(w[:-1, :-1], w[:-1, 1:], grid.hx) + edge(w[:-1, 1:], w[1:, 1:], 1j * grid.hy)
            + edge(w[1:, 1:], w[1:, :-1], -grid.hx) + edge(w[1:, :-1], w[:-1, :-1], -1j * grid.hy))
    return np.abs(loop)
