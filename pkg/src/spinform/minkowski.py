"""Spacelike H = 1/2 surfaces in R^(1,2) and their correspondence with H^2 x R.

Spin(1,2) sits inside the complex quaternions as
``a0 1 + a1 I + i a2 J + i a3 K`` with real a_k, and R^(1,2) as the span of
i1, J and JI.  Points of R^(1,2) are stored as arrays (x0, x2, x3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cquat import (PROJ_PLUS, QI, QJ, ComplexQuaternion, H2Point, IdealElement, cq_H, cq_bar,
                    cq_hat, cq_mul, iota, nan_quiet)
from .fieldsolve import FlowBlowUp, PathPlan, column_rows, integrate_flow, require_compatible
from .spinsurface import (InvariantBreach, SpinorComponentField, _nanmax, fundamental_forms,
                          g1_rhs, shape_entries)
from .weierstrass import PlanarGrid, WeierstrassData

ETA3 = np.array([-1.0, 1.0, 1.0])
QJI = cq_mul(QJ, QI)

PATTERN_TOL = 1e-6


class PatternDrift(FlowBlowUp):
    """The Spin(1,2) coefficient pattern was lost during integration."""


def pattern_defect(c: np.ndarray) -> np.ndarray:
    """Size of the parts that vanish on Spin(1,2): Im of the 1, I parts and Re of the J, K parts."""
    return np.max(np.abs(np.stack([c[..., 0].imag, c[..., 1].imag, c[..., 2].real, c[..., 3].real])), axis=0)


def _decode3(q: ComplexQuaternion) -> np.ndarray:
    """(x0, x2, x3) from i x0 + x2 J + x3 JI."""
    return np.stack([q.c[..., 0].imag, q.c[..., 2].real, -q.c[..., 3].real], axis=-1)


def v_rhs(data: WeierstrassData):
    """dv' = {iota(L dz) + i iota(w) J} v' on 8 real components."""

    def rhs(z, y, dz):
        v = ComplexQuaternion(y[:, 0::2] + 1j * y[:, 1::2])
        tau = np.asarray(data.tau0(z), dtype=float)
        Q = np.asarray(data.Q0(z), dtype=complex)
        L = np.asarray(data.logsqrt_tau_z(z), dtype=complex)
        w = (Q * dz + 0.25 * tau * np.conj(dz)) / np.sqrt(tau)
        gen = iota(L * dz) + 1j * cq_mul(iota(w), QJ)
        dv = cq_mul(gen, v).c
        out = np.empty_like(y)
        out[:, 0::2], out[:, 1::2] = dv.real, dv.imag
        return out

    return rhs


def _to_real(q: ComplexQuaternion) -> np.ndarray:
    out = np.empty(q.shape + (8,))
    out[..., 0::2], out[..., 1::2] = q.c.real, q.c.imag
    return out


@dataclass(frozen=True)
class SpinFrameField:
    grid: PlanarGrid
    vp: ComplexQuaternion
    provenance: dict = field(default_factory=dict)

    @property
    def norm(self) -> np.ndarray:
        """H(v', v'), real and equal to sqrt(tau0) = mu."""
        return cq_H(self.vp).real

    @property
    @nan_quiet
    def v(self) -> ComplexQuaternion:
        return self.vp / np.sqrt(self.norm)

    def pattern_defect(self) -> float:
        return _nanmax(pattern_defect(self.vp.c))


def flow_v(data: WeierstrassData, grid: PlanarGrid, plan: PathPlan | None = None,
           init: ComplexQuaternion | None = None, *, phase_sign: int = 1, strict: bool = False,
           norm_tol: float = 1e-4, substeps: int = 4) -> SpinFrameField:
    plan = column_rows(grid) if plan is None else plan
    require_compatible(data, grid, strict)
    data = data.on_grid(grid)
    z0 = grid.z[plan.seed]
    t0 = float(np.asarray(data.tau0(np.array([z0])))[0])
    if init is None:
        init = ComplexQuaternion([phase_sign * t0**0.25, 0, 0, 0])
    if pattern_defect(init.c) > 1e-12:
        raise ValueError("initial value lacks the Spin(1,2) coefficient pattern")
    n0 = float(cq_H(init).real)
    if abs(n0 - np.sqrt(t0)) > 1e-10 * max(1.0, np.sqrt(t0)):
        raise ValueError(f"initial H(v',v') = {n0:.12g} differs from sqrt(tau0) = {np.sqrt(t0):.12g}")
    zf = grid.z.ravel()

    def monitor(dst, y):
        d = pattern_defect(y[:, 0::2] + 1j * y[:, 1::2])
        if np.any(d > PATTERN_TOL):
            k = int(dst[np.argmax(d)])
            raise PatternDrift(f"Spin(1,2) pattern drift {d.max():.3e}", (k // grid.nx, k % grid.nx),
                               complex(zf[k]))

    y = integrate_flow(v_rhs(data), grid, plan, _to_real(init), substeps=substeps, monitor=monitor)
    vp = ComplexQuaternion(y[..., 0::2] + 1j * y[..., 1::2])
    out = SpinFrameField(grid, vp, {"data": data.name, "plan": plan.name, "seed": list(plan.seed)})
    _, t = data.sample(grid)
    err = _nanmax(np.abs(out.norm - np.sqrt(t)))
    if err > norm_tol:
        raise InvariantBreach(f"norm law drift {err:.3e} exceeds {norm_tol:.1e}")
    return out


@nan_quiet
def mink_gauss(v: ComplexQuaternion) -> H2Point:
    """G = i bar(v) hat(v) for normalised v."""
    return H2Point.from_quaternion(1j * cq_mul(cq_bar(v), cq_hat(v)))


# ---------------------------------------------------------------------------
# immersion

@dataclass(frozen=True)
class MinkSurface:
    grid: PlanarGrid
    F: np.ndarray  # (ny, nx, 3): (x0, x2, x3)
    closedness: float
    H_meas: np.ndarray
    metric_factor: np.ndarray
    conformality: np.ndarray
    normal: np.ndarray

    def summary(self) -> dict:
        fin = np.isfinite(self.H_meas)
        return {"closedness": self.closedness,
                "H_meas_min": float(self.H_meas[fin].min()) if fin.any() else None,
                "H_meas_max": float(self.H_meas[fin].max()) if fin.any() else None,
                "H_error_max": float(np.abs(self.H_meas[fin] - 0.5).max()) if fin.any() else None,
                "conformality_max": _nanmax(self.conformality)}


def xi_forms(vp: ComplexQuaternion) -> tuple[np.ndarray, np.ndarray]:
    """xi(d/dx) = bar(v') J hat(v') and xi(d/dy) = bar(v') JI hat(v') as (x0, x2, x3)."""
    bv, hv = cq_bar(vp), cq_hat(vp)
    return _decode3(cq_mul(cq_mul(bv, QJ), hv)), _decode3(cq_mul(cq_mul(bv, QJI), hv))


@nan_quiet
def mink_immerse(frame: SpinFrameField, plan: PathPlan | None = None, F0=(0.0, 0.0, 0.0),
                 closed_tol: float | None = None) -> MinkSurface:
    """Primitive of xi by the trapezoid rule along the plan, F(seed) = F0.

    The plaquette loop integral of a closed xi is O(h^3 |xi|), which is the
    default ``closed_tol``; a form that is not closed leaves O(h^2).
    """
    grid = frame.grid
    plan = column_rows(grid) if plan is None else plan
    xx, xy = xi_forms(frame.vp)
    zf = grid.z.ravel()
    fx, fy = xx.reshape(-1, 3), xy.reshape(-1, 3)
    F = np.full((zf.size, 3), np.nan)
    F[plan.seed[0] * grid.nx + plan.seed[1]] = np.asarray(F0, dtype=float)
    for src, dst in plan.levels:
        dz = zf[dst] - zf[src]
        avg_x = 0.5 * (fx[src] + fx[dst])
        avg_y = 0.5 * (fy[src] + fy[dst])
        F[dst] = F[src] + dz.real[:, None] * avg_x + dz.imag[:, None] * avg_y
    F = F.reshape(grid.shape + (3,))
    # trapezoid loop integral of xi around each plaquette
    loop = (0.5 * grid.hx * (xx[:-1, :-1] + xx[:-1, 1:]) + 0.5 * grid.hy * (xy[:-1, 1:] + xy[1:, 1:])
            - 0.5 * grid.hx * (xx[1:, 1:] + xx[1:, :-1]) - 0.5 * grid.hy * (xy[1:, :-1] + xy[:-1, :-1]))
    closed = _nanmax(np.max(np.abs(loop), axis=-1))
    if closed_tol is None:
        closed_tol = grid.h**3 * _nanmax(np.linalg.norm(xx, axis=-1))
    if closed > closed_tol:
        raise InvariantBreach(f"xi is not closed: plaquette residual {closed:.3e}")
    m = grid.mask
    Px, Py, Pxx, Pxy, Pyy = fundamental_forms(F, m, grid.hx, grid.hy)
    n = _lorentz_cross3(Px, Py)
    n = n / np.sqrt(np.abs(np.sum(n * n * ETA3, axis=-1)))[..., None]
    n = n * np.sign(n[..., 0])[..., None]  # future pointing
    E, Fm, G, L, M, N, H = shape_entries(Px, Py, Pxx, Pxy, Pyy, n, ETA3)
    mu2 = 0.5 * (E + G)
    conf = np.maximum(np.abs(E - G), 2 * np.abs(Fm)) / mu2
    return MinkSurface(grid, F, closed, H, np.sqrt(mu2), conf, n)


def _lorentz_cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """n with <n, v>_eta = det[v, a, b]."""
    return np.cross(a, b) / ETA3


# ---------------------------------------------------------------------------
# correspondence

def correspondence_residual(frame: SpinFrameField, data: WeierstrassData) -> np.ndarray:
    """max over dz in {1, i} of |P(dv') - RHS_g1(P v')| per node, with P = (1 + iI)/2."""
    grid = frame.grid
    data = data.on_grid(grid)
    m = grid.mask
    z = grid.z[m]
    vp = frame.vp[m]
    g = IdealElement.from_quaternion(cq_mul(PROJ_PLUS, vp))
    out = np.full(grid.shape, np.nan)
    worst = np.zeros(z.shape)
    for dz in (1.0 + 0j, 1j):
        d = np.full(z.shape, dz)
        dv = v_rhs(data)(z, _to_real(vp), d)
        pdv = cq_mul(PROJ_PLUS, ComplexQuaternion(dv[:, 0::2] + 1j * dv[:, 1::2]))
        dg = g1_rhs(data)(z, g.as_real(), d)
        target = IdealElement.from_real(dg).quaternion
        worst = np.maximum(worst, np.max(np.abs(pdv.c - target.c), axis=-1))
    out[m] = worst
    return out


@nan_quiet
def correspond_to_h2r(frame: SpinFrameField, data: WeierstrassData | None = None,
                      tol: float = 1e-8) -> SpinorComponentField:
    """g1' = (1/2)(1 + iI) v'; with ``data`` the flow residual is checked against ``tol``."""
    g = IdealElement.from_quaternion(cq_mul(PROJ_PLUS, frame.vp), atol=1e-10)
    prov = {**frame.provenance, "from": "v'"}
    if data is not None:
        res = _nanmax(correspondence_residual(frame, data))
        prov["flow_residual"] = res
        if res > tol:
            raise InvariantBreach(f"g1' = P v' misses its equation by {res:.3e}")
    return SpinorComponentField(frame.grid, g, prov)


@nan_quiet
def correspond_from_g1(g1: SpinorComponentField, tol: float = 1e-10) -> SpinFrameField:
    """The unique v' = a0 + a1 I + i a2 J + i a3 K with (1/2)(1 + iI) v' = g1'."""
    a, b = g1.g1p.a, g1.g1p.b
    vp = ComplexQuaternion.from_parts(a.real, -a.imag, 1j * b.imag, 1j * b.real)
    back = IdealElement.from_quaternion(cq_mul(PROJ_PLUS, vp), atol=1e-10)
    err = _nanmax(np.maximum(np.abs(back.a - a), np.abs(back.b - b)))
    if err > tol * max(1.0, _nanmax(np.abs(a))):
        raise InvariantBreach(f"no pattern-consistent preimage (defect {err:.3e})")
    return SpinFrameField(g1.grid, vp, {**g1.provenance, "from": "g1'"})
