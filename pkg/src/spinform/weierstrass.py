"""Weierstrass data (Q0, tau0), planar grids and the two compatibility residuals.

The data are compatible when Q0 is holomorphic and

    (log sqrt tau0)_{z zbar} = -|Q0|^2 / tau0 + tau0 / 16.

Closures are functions of a complex array ``z`` returning arrays of the same
shape.  Throughout, ``z = x + i y`` is a Python complex number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator
from scipy.ndimage import distance_transform_edt

from . import stencil

Field = Callable[[np.ndarray], np.ndarray]


class DataError(ValueError):
    """Invalid Weierstrass data or data file; carries an optional node location."""

    def __init__(self, message: str, node: tuple[int, int] | None = None, z: complex | None = None):
        if node is not None:
            message = f"{message} at node (ix={node[1]}, iy={node[0]})"
            if z is not None:
                message += f", z={z.real:.6g}{z.imag:+.6g}j"
        super().__init__(message)
        self.node = node
        self.z = z


# ---------------------------------------------------------------------------
# grid

@dataclass(frozen=True)
class PlanarGrid:
    """Regular grid of nodes ``origin + ix*hx + 1j*iy*hy``, arrays indexed ``[iy, ix]``.

    With ``radius`` set, only nodes with ``|z - center| <= radius`` are active.
    """

    origin: complex
    hx: float
    hy: float
    nx: int
    ny: int
    radius: Optional[float] = None
    center: Optional[complex] = None

    def __post_init__(self) -> None:
        if not (self.hx > 0 and self.hy > 0) or not (math.isfinite(self.hx) and math.isfinite(self.hy)):
            raise DataError(f"grid spacing must be positive, got ({self.hx}, {self.hy})")
        if self.nx < 2 or self.ny < 2:
            raise DataError(f"grid needs at least 2 nodes per axis, got {self.nx}x{self.ny}")
        object.__setattr__(self, "origin", complex(self.origin))
        if self.radius is not None:
            if not self.radius > 0:
                raise DataError(f"mask radius must be positive, got {self.radius}")
            c = self.origin + 0.5 * ((self.nx - 1) * self.hx + 1j * (self.ny - 1) * self.hy)
            object.__setattr__(self, "center", complex(c if self.center is None else self.center))

    @classmethod
    def disk(cls, radius: float, resolution: int, center: complex = 0j) -> "PlanarGrid":
        """Square grid of spacing 2R/resolution with resolution + 1 nodes per axis, masked to the disk."""
        if resolution < 2:
            raise DataError(f"resolution must be >= 2, got {resolution}")
        h = 2.0 * radius / resolution
        center = complex(center)
        return cls(center - radius * (1 + 1j), h, h, resolution + 1, resolution + 1, radius, center)

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float, nx: int, ny: int) -> "PlanarGrid":
        return cls(complex(x0, y0), (x1 - x0) / (nx - 1), (y1 - y0) / (ny - 1), nx, ny)

    @property
    def x(self) -> np.ndarray:
        return self.origin.real + self.hx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin.imag + self.hy * np.arange(self.ny)

    @property
    def z(self) -> np.ndarray:
        return self.x[None, :] + 1j * self.y[:, None]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def mask(self) -> np.ndarray:
        if self.radius is None:
            return np.ones(self.shape, dtype=bool)
        # tolerance keeps boundary nodes exactly on the circle
        return np.abs(self.z - self.center) <= self.radius * (1 + 1e-12)

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())

    def refine(self, levels: int = 1) -> "PlanarGrid":
        """Halve the spacing ``levels`` times over the same domain."""
        g = self
        for _ in range(levels):
            g = replace(g, hx=g.hx / 2, hy=g.hy / 2, nx=2 * g.nx - 1, ny=2 * g.ny - 1)
        return g

    def nearest_node(self, z0: complex) -> tuple[int, int]:
        """Active node closest to ``z0`` as ``(iy, ix)``."""
        d = np.abs(self.z - z0)
        d[~self.mask] = np.inf
        iy, ix = np.unravel_index(int(np.argmin(d)), self.shape)
        return int(iy), int(ix)

    def default_seed(self) -> tuple[int, int]:
        c = self.center if self.center is not None else self.origin + 0.5 * (
            (self.nx - 1) * self.hx + 1j * (self.ny - 1) * self.hy)
        return self.nearest_node(c)

    def to_dict(self) -> dict:
        d = {"kind": "nodes", "origin": [self.origin.real, self.origin.imag],
             "hx": self.hx, "hy": self.hy, "nx": self.nx, "ny": self.ny}
        if self.radius is not None:
            d["radius"] = self.radius
            d["center"] = [self.center.real, self.center.imag]
        return d


def grid_from_dict(spec: dict) -> PlanarGrid:
    """Build a grid from its JSON description (kinds ``disk``, ``rectangle``, ``nodes``)."""
    try:
        kind = spec.get("kind", "disk")
        if kind == "disk":
            c = spec.get("center", [0.0, 0.0])
            return PlanarGrid.disk(float(spec["radius"]), int(spec["resolution"]), complex(c[0], c[1]))
        if kind == "rectangle":
            (x0, x1), (y0, y1) = spec["x_range"], spec["y_range"]
            return PlanarGrid.rectangle(float(x0), float(x1), float(y0), float(y1),
                                        int(spec["nx"]), int(spec["ny"]))
        if kind == "nodes":
            o = spec["origin"]
            c = spec.get("center")
            return PlanarGrid(complex(o[0], o[1]), float(spec["hx"]), float(spec["hy"]),
                              int(spec["nx"]), int(spec["ny"]), spec.get("radius"),
                              None if c is None else complex(c[0], c[1]))
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed grid description: {exc!r}") from exc
    raise DataError(f"unknown grid kind {kind!r}")


# ---------------------------------------------------------------------------
# data

@dataclass(frozen=True)
class WeierstrassData:
    """Weierstrass data with optional analytic derivative closures.

    ``logsqrt_tau_z`` is (log sqrt tau0)_z, ``Q0_zbar`` is dQ0/dzbar and
    ``logsqrt_tau_zzbar`` is (log sqrt tau0)_{z zbar}.
    """

    name: str
    Q0: Field
    tau0: Field
    logsqrt_tau_z: Optional[Field] = None
    Q0_zbar: Optional[Field] = None
    logsqrt_tau_zzbar: Optional[Field] = None
    params: dict = field(default_factory=dict)

    def sample(self, grid: PlanarGrid) -> tuple[np.ndarray, np.ndarray]:
        """(Q0, tau0) on active nodes, NaN elsewhere."""
        m = grid.mask
        z = grid.z[m]
        Q = np.full(grid.shape, np.nan + 0j)
        t = np.full(grid.shape, np.nan)
        Q[m] = np.asarray(self.Q0(z), dtype=complex) * np.ones(z.shape)
        t[m] = np.asarray(self.tau0(z), dtype=float) * np.ones(z.shape)
        return Q, t

    def check_positive(self, grid: PlanarGrid) -> np.ndarray:
        """Return sampled tau0, raising ``DataError`` at the first node with tau0 <= 0."""
        _, t = self.sample(grid)
        bad = grid.mask & ~(t > 0)
        if bad.any():
            iy, ix = (int(v) for v in np.argwhere(bad)[0])
            raise DataError(f"tau0 = {t[iy, ix]:.6g} is not positive", (iy, ix), complex(grid.z[iy, ix]))
        return t

    def on_grid(self, grid: PlanarGrid) -> "WeierstrassData":
        """Copy with (log sqrt tau0)_z filled in from grid-line splines when no closure exists."""
        if self.logsqrt_tau_z is not None:
            return self
        t = self.check_positive(grid)
        grad = _line_spline_gradient(grid, 0.5 * np.log(t))

        def lz(z):
            gx, gy = grad(z)
            return 0.5 * (gx - 1j * gy)

        return replace(self, logsqrt_tau_z=lz)


def _segment_splines(values: np.ndarray, mask: np.ndarray, coord: np.ndarray):
    """Cubic splines through each active run of every row of ``values``.

    Returns per-interval derivative coefficients ``(ny, nx - 1, 3)`` for
    ``3 c0 t^2 + 2 c1 t + c2`` and the node derivatives ``(ny, nx)``; both NaN
    where a row has no run of at least two nodes.
    """
    ny, nx = values.shape
    coef = np.full((ny, nx - 1, 3), np.nan)
    node = np.full((ny, nx), np.nan)
    for r in range(ny):
        idx = np.flatnonzero(mask[r])
        if idx.size < 2:
            continue
        for run in np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1):
            if run.size < 2:
                continue
            sp = CubicSpline(coord[run], values[r, run])
            coef[r, run[:-1]] = np.stack([3 * sp.c[0], 2 * sp.c[1], sp.c[2]], axis=-1)
            node[r, run] = sp(coord[run], 1)
    return coef, node


def _line_spline_gradient(grid: PlanarGrid, f: np.ndarray):
    """Gradient of ``f`` that is exact-interpolation consistent along grid lines.

    On a grid row the x-derivative is that of the cubic spline through the
    row's active nodes, so integrating it along the row reproduces the node
    values of ``f``; the transverse derivative is interpolated linearly between
    spline derivatives at the two neighbouring nodes.  Columns are symmetric.
    Off the grid lines both components are bilinear in the node derivatives.
    """
    m = grid.mask
    cx, nodex = _segment_splines(f, m, grid.x)
    cyT, nodeyT = _segment_splines(f.T, m.T, grid.y)
    cy, nodey = cyT.transpose(1, 0, 2), nodeyT.T
    nodex, nodey = _fill_nearest(nodex, m), _fill_nearest(nodey, m)
    bil_x, bil_y = _interpolator(grid, nodex), _interpolator(grid, nodey)
    tol = 1e-9

    def locate(z):
        z = np.asarray(z, dtype=complex).ravel()
        fx = (z.real - grid.origin.real) / grid.hx
        fy = (z.imag - grid.origin.imag) / grid.hy
        ix = np.clip(np.floor(fx + tol).astype(int), 0, grid.nx - 2)
        iy = np.clip(np.floor(fy + tol).astype(int), 0, grid.ny - 2)
        return z, fx - ix, fy - iy, ix, iy

    def along(c, t, h):
        u = t * h
        return (c[..., 0] * u + c[..., 1]) * u + c[..., 2]

    def grad(z):
        shape = np.shape(z)
        z, tx, ty, ix, iy = locate(z)
        on_row = (ty < tol) | (ty > 1 - tol)
        on_col = (tx < tol) | (tx > 1 - tol)
        r = np.where(ty > 0.5, iy + 1, iy)
        c = np.where(tx > 0.5, ix + 1, ix)
        gx, gy = bil_x(z), bil_y(z)
        # rows: spline along x, linear across
        sx = along(cx[r, ix], tx, grid.hx)
        sx = np.where(np.isfinite(sx), sx, (1 - tx) * nodex[r, ix] + tx * nodex[r, ix + 1])
        tyr = (1 - tx) * nodey[r, ix] + tx * nodey[r, ix + 1]
        gx, gy = np.where(on_row, sx, gx), np.where(on_row & ~on_col, tyr, gy)
        # columns: spline along y, linear across
        sy = along(cy[iy, c], ty, grid.hy)
        sy = np.where(np.isfinite(sy), sy, (1 - ty) * nodey[iy, c] + ty * nodey[iy + 1, c])
        txc = (1 - ty) * nodex[iy, c] + ty * nodex[iy + 1, c]
        gy, gx = np.where(on_col, sy, gy), np.where(on_col & ~on_row, txc, gx)
        return gx.real.reshape(shape), gy.real.reshape(shape)

    return grad


def _fill_nearest(table: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Copy of ``table`` where entries off ``mask`` or non-finite take the nearest valid value."""
    table = np.asarray(table)
    valid = mask & np.isfinite(table)
    if not valid.any():
        raise DataError("table has no finite entry on the active region")
    idx = distance_transform_edt(~valid, return_distances=False, return_indices=True)
    return table[tuple(idx)]


def _interpolator(grid: PlanarGrid, table: np.ndarray) -> Field:
    """Bilinear interpolation of a node table (real or complex).

    Entries off the mask are replaced by their nearest active value, so cells
    straddling the disk boundary interpolate finite numbers.
    """
    table = _fill_nearest(table, grid.mask)
    parts = [table.real] + ([table.imag] if np.iscomplexobj(table) else [])
    interps = [RegularGridInterpolator((grid.y, grid.x), p, method="linear",
                                       bounds_error=False, fill_value=None) for p in parts]

    def f(z):
        z = np.asarray(z, dtype=complex)
        pts = np.stack([z.imag.ravel(), z.real.ravel()], axis=-1)
        vals = interps[0](pts)
        if len(interps) == 2:
            vals = vals + 1j * interps[1](pts)
        return vals.reshape(z.shape)

    return f


def family_constant(theta: float = 0.0) -> WeierstrassData:
    """tau0 = 4, Q0 = exp(i theta): flat data with |Q0| = tau0 / 4."""
    q = complex(np.exp(1j * theta))

    def const(v):
        return lambda z: np.full(np.shape(z), v)

    return WeierstrassData(
        name="constant", Q0=const(q), tau0=const(4.0), logsqrt_tau_z=const(0j),
        Q0_zbar=const(0j), logsqrt_tau_zzbar=const(0.0), params={"theta": float(theta)},
    )


ROTATIONAL_LIMIT = 0.9


def family_rotational() -> WeierstrassData:
    """Q0 = 0, tau0 = 16 / (1 - |z|^2)^2, valid for |z| <= 0.9."""

    def guard(z):
        z = np.asarray(z, dtype=complex)
        if np.any(np.abs(z) > ROTATIONAL_LIMIT + 1e-12):
            raise DataError(f"rotational family evaluated outside |z| <= {ROTATIONAL_LIMIT}")
        return z, 1.0 - np.abs(z) ** 2

    def tau0(z):
        _, d = guard(z)
        return 16.0 / d**2

    def lz(z):
        z, d = guard(z)
        return np.conj(z) / d

    def lzz(z):
        _, d = guard(z)
        return 1.0 / d**2

    return WeierstrassData(
        name="rotational", Q0=lambda z: np.zeros(np.shape(z), complex), tau0=tau0,
        logsqrt_tau_z=lz, Q0_zbar=lambda z: np.zeros(np.shape(z), complex),
        logsqrt_tau_zzbar=lzz,
    )


def family_strip(theta: float = 0.0, shift: float = -2.0) -> WeierstrassData:
    """Q0 = exp(i theta), tau0 = 4 exp(u(x)) with u = 4 artanh(exp(2x + shift)).

    u solves u'' = 4 sinh u, so the data are compatible for x < -shift/2.
    Unlike the constant family, |Q0| differs from tau0/4 and the Gauss map
    has full rank.
    """
    q = complex(np.exp(1j * theta))

    def w_of(z):
        x = np.real(np.asarray(z, dtype=complex))
        w = np.exp(2 * x + shift)
        if np.any(w >= 1):
            raise DataError(f"strip family evaluated outside x < {-shift / 2}")
        return w

    def u(z):
        return 4.0 * np.arctanh(w_of(z))

    def du(z):
        w = w_of(z)
        return 8.0 * w / (1 - w**2)

    return WeierstrassData(
        name="strip", Q0=lambda z: np.full(np.shape(z), q), tau0=lambda z: 4.0 * np.exp(u(z)),
        logsqrt_tau_z=lambda z: du(z) / 4 + 0j, Q0_zbar=lambda z: np.zeros(np.shape(z), complex),
        logsqrt_tau_zzbar=lambda z: 0.5 * np.sinh(u(z)),
        params={"theta": float(theta), "shift": float(shift)},
    )


def tabulated(grid: PlanarGrid, Q0_table, tau0_table, name: str = "tabulated") -> WeierstrassData:
    """Data sampled on every node of ``grid``; values between nodes are bilinear."""
    Q = np.asarray(Q0_table, dtype=complex)
    t = np.asarray(tau0_table, dtype=float)
    if Q.shape != grid.shape or t.shape != grid.shape:
        raise DataError(f"tables must have shape {grid.shape}, got {Q.shape} and {t.shape}")
    m = grid.mask
    if not (np.all(np.isfinite(Q[m])) and np.all(np.isfinite(t[m]))):
        iy, ix = (int(v) for v in np.argwhere(m & ~(np.isfinite(Q) & np.isfinite(t)))[0])
        raise DataError("non-finite table entry", (iy, ix), complex(grid.z[iy, ix]))
    data = WeierstrassData(name=name, Q0=_interpolator(grid, Q), tau0=_interpolator(grid, t))
    data.check_positive(grid)
    return data


# ---------------------------------------------------------------------------
# residuals

def _check_grid(grid: PlanarGrid) -> None:
    if grid.nx < 3 or grid.ny < 3:
        raise DataError(f"residuals need at least 3 nodes per axis, got {grid.nx}x{grid.ny}")


def _mode(mode: str, closure) -> str:
    if mode not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown residual mode {mode!r}")
    if mode == "analytic" and closure is None:
        raise ValueError("analytic mode needs the corresponding closure")
    if mode == "auto":
        return "analytic" if closure is not None else "fd"
    return mode


def residual_holomorphic(data: WeierstrassData, grid: PlanarGrid, mode: str = "auto") -> np.ndarray:
    """|dQ0/dzbar| per node (NaN on masked nodes)."""
    _check_grid(grid)
    m = grid.mask
    out = np.full(grid.shape, np.nan)
    if _mode(mode, data.Q0_zbar) == "analytic":
        out[m] = np.abs(np.asarray(data.Q0_zbar(grid.z[m])) * np.ones(m.sum()))
        return out
    Q, _ = data.sample(grid)
    out[m] = np.abs(stencil.d_zbar(Q, m, grid.hx, grid.hy))[m]
    return out


def residual_vortex(data: WeierstrassData, grid: PlanarGrid, mode: str = "auto") -> np.ndarray:
    """|(log sqrt tau0)_{z zbar} + |Q0|^2/tau0 - tau0/16| per node."""
    _check_grid(grid)
    m = grid.mask
    Q, t = data.sample(grid)
    data.check_positive(grid)
    if _mode(mode, data.logsqrt_tau_zzbar) == "analytic":
        lzz = np.full(grid.shape, np.nan)
        lzz[m] = np.asarray(data.logsqrt_tau_zzbar(grid.z[m])) * np.ones(m.sum())
    else:
        lzz = 0.25 * stencil.laplacian(0.5 * np.log(t), m, grid.hx, grid.hy)
    out = np.abs(lzz + np.abs(Q) ** 2 / t - t / 16.0)
    out[~m] = np.nan
    return out


@dataclass(frozen=True)
class Compatibility:
    holomorphic: float
    vortex: float
    threshold: float
    mode_holomorphic: str
    mode_vortex: str

    @property
    def compatible(self) -> bool:
        return max(self.holomorphic, self.vortex) < self.threshold

    def to_dict(self) -> dict:
        return {"holomorphic_max": self.holomorphic, "vortex_max": self.vortex,
                "threshold": self.threshold, "compatible": self.compatible,
                "mode_holomorphic": self.mode_holomorphic, "mode_vortex": self.mode_vortex}


def compatibility(data: WeierstrassData, grid: PlanarGrid, mode: str = "auto") -> Compatibility:
    """Max residuals against the threshold 10 h^2 max(tau0)."""
    t = data.check_positive(grid)
    rh = residual_holomorphic(data, grid, mode)
    rv = residual_vortex(data, grid, mode)
    return Compatibility(
        holomorphic=float(np.nanmax(rh)), vortex=float(np.nanmax(rv)),
        threshold=10.0 * grid.h**2 * float(np.nanmax(t)),
        mode_holomorphic=_mode(mode, data.Q0_zbar), mode_vortex=_mode(mode, data.logsqrt_tau_zzbar),
    )


def residual_convergence(data: WeierstrassData, grid: PlanarGrid, levels: int = 3,
                         which: str = "vortex") -> tuple[list[float], list[float]]:
    """Finite-difference residual maxima on ``levels`` successively halved grids, and their ratios.

    Maxima are taken over the interior nodes of the coarsest grid, which every
    refinement shares, so the sampled region does not creep outwards.
    """
    fn = {"vortex": residual_vortex, "holomorphic": residual_holomorphic}[which]
    common = stencil.interior(grid.mask)
    errs = []
    for k in range(levels):
        r = fn(data, grid.refine(k), "fd")[:: 2**k, :: 2**k]
        errs.append(float(np.nanmax(np.where(common, r, np.nan))))
    ratios = [errs[k] / errs[k + 1] if errs[k + 1] > 0 else math.inf for k in range(levels - 1)]
    return errs, ratios


# ---------------------------------------------------------------------------
# data files

FAMILIES = ("constant", "rotational", "strip", "tabulated")


def data_from_dict(spec: dict, grid: PlanarGrid | None = None) -> tuple[WeierstrassData, PlanarGrid]:
    """Parse the data-file schema; an explicit ``grid`` overrides ``spec['grid']``."""
    if not isinstance(spec, dict):
        raise DataError("data description must be a JSON object")
    if grid is None:
        if "grid" not in spec:
            raise DataError("data description lacks a 'grid' entry")
        grid = grid_from_dict(spec["grid"])
    family = spec.get("family")
    try:
        theta = float(spec.get("theta", 0.0))
        if family == "constant":
            return family_constant(theta), grid
        if family == "rotational":
            return family_rotational(), grid
        if family == "strip":
            return family_strip(theta, float(spec.get("shift", -2.0))), grid
        if family == "tabulated":
            tables = spec["tables"]
            Q = np.asarray(tables["Q0_re"], float) + 1j * np.asarray(tables.get("Q0_im", 0.0), float)
            t = np.asarray(tables["tau0"], float)
            return tabulated(grid, np.broadcast_to(Q, grid.shape), np.broadcast_to(t, grid.shape)), grid
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed data description: {exc!r}") from exc
    raise DataError(f"unknown family {family!r}; expected one of {FAMILIES}")
