"""H = 1/2 surfaces in H^2 x R from Weierstrass data.

Pipeline: ``solve_hz`` -> ``flow_g1`` -> ``product_structure`` -> ``reconstruct_g2``
-> ``assemble_spinor`` -> ``immerse``, with ``gauss_map`` and ``diagnose`` on the
side.  ``build_surface`` chains them.

Convention: a Python complex number c = u + v j enters quaternion formulas as
``iota(c) = u + v I``.  On the ideal (1 + iI)/2 H^C left multiplication by I is
multiplication by -i, so ``iota(c)`` acts on the coordinates (a, b) as conj(c).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import stencil
from .cquat import (PROJ_PLUS, QI, QJ, ComplexQuaternion, H2Point, IdealElement, cq_H, cq_bar,
                    cq_hat, cq_mul, ideal_norm, iota, minkowski_inner3, nan_quiet,
                    pi_project)
from .fieldsolve import (HeightField, HzField, PathPlan, column_rows, integrate_flow,
                         integrate_height, require_compatible, solve_hz)
from .weierstrass import PlanarGrid, WeierstrassData

ETA4 = np.array([-1.0, 1.0, 1.0, 1.0])  # (x0, x2, x3, h)


class InvariantBreach(RuntimeError):
    """A pointwise invariant of the construction failed beyond tolerance."""


def _nanmax(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.nanmax(a)) if np.any(np.isfinite(a)) else 0.0


# ---------------------------------------------------------------------------
# g1' flow

def g1_coefficients(data: WeierstrassData, z, dz):
    """(conj(L dz), conj(w)) with L = (log sqrt tau0)_z and w = (Q0 dz + tau0/4 conj dz)/sqrt tau0."""
    tau = np.asarray(data.tau0(z), dtype=float)
    Q = np.asarray(data.Q0(z), dtype=complex)
    L = np.asarray(data.logsqrt_tau_z(z), dtype=complex)
    w = (Q * dz + 0.25 * tau * np.conj(dz)) / np.sqrt(tau)
    return np.conj(L * dz), np.conj(w)


def g1_rhs(data: WeierstrassData):
    """dg = iota(L dz) g + iota(w) J hat(g) I, written on the coordinates (a, b).

    Since J hat(g) I = i (1 + iI)/2 (conj b + conj a J), the system reads
    da = conj(L dz) a + i conj(w) conj(b),  db = conj(L dz) b + i conj(w) conj(a).
    """

    def rhs(z, y, dz):
        a = y[:, 0] + 1j * y[:, 1]
        b = y[:, 2] + 1j * y[:, 3]
        cl, cw = g1_coefficients(data, z, dz)
        da = cl * a + 1j * cw * np.conj(b)
        db = cl * b + 1j * cw * np.conj(a)
        return np.stack([da.real, da.imag, db.real, db.imag], axis=-1)

    return rhs


@dataclass(frozen=True)
class SpinorComponentField:
    grid: PlanarGrid
    g1p: IdealElement
    provenance: dict = field(default_factory=dict)

    def norm_error(self, data: WeierstrassData) -> np.ndarray:
        """| |g1'|^2 - sqrt(tau0) | per node."""
        _, t = data.sample(self.grid)
        return np.abs(ideal_norm(self.g1p) - np.sqrt(t))

    def negated(self) -> "SpinorComponentField":
        return SpinorComponentField(self.grid, -self.g1p, {**self.provenance, "negated": True})


def default_init(data: WeierstrassData, grid: PlanarGrid, seed: tuple[int, int],
                 phase_sign: int = 1) -> IdealElement:
    """a = phase_sign * tau0(z0)^(1/4), b = 0."""
    if phase_sign not in (1, -1):
        raise ValueError("phase_sign must be +1 or -1")
    t0 = float(np.asarray(data.tau0(np.array([grid.z[seed]])))[0])
    return IdealElement(phase_sign * t0**0.25, 0j)


def flow_g1(data: WeierstrassData, grid: PlanarGrid, plan: PathPlan | None = None,
            init: IdealElement | None = None, *, phase_sign: int = 1, norm_tol: float = 1e-4,
            strict: bool = False, substeps: int = 4) -> SpinorComponentField:
    """Integrate g1' from the plan seed; the norm law |g1'|^2 = sqrt(tau0) is checked."""
    plan = column_rows(grid) if plan is None else plan
    require_compatible(data, grid, strict)
    data = data.on_grid(grid)
    if init is None:
        init = default_init(data, grid, plan.seed, phase_sign)
    t0 = float(np.asarray(data.tau0(np.array([grid.z[plan.seed]])))[0])
    n0 = float(ideal_norm(init))
    if abs(n0 - np.sqrt(t0)) > 1e-10 * max(1.0, np.sqrt(t0)):
        raise ValueError(f"initial |g1'|^2 = {n0:.12g} differs from sqrt(tau0) = {np.sqrt(t0):.12g}")
    y = integrate_flow(g1_rhs(data), grid, plan, IdealElement(init.a, init.b).as_real(), substeps=substeps)
    out = SpinorComponentField(grid, IdealElement.from_real(y),
                               {"data": data.name, "plan": plan.name, "seed": list(plan.seed),
                                "init": [complex(init.a), complex(init.b)]})
    err = _nanmax(out.norm_error(data))
    if err > norm_tol:
        raise InvariantBreach(f"norm law drift {err:.3e} exceeds {norm_tol:.1e}")
    return out


# ---------------------------------------------------------------------------
# product structure and the full spinor

@dataclass(frozen=True)
class ProductStructureField:
    hz: np.ndarray
    mu: np.ndarray
    nu: np.ndarray


@nan_quiet
def product_structure(data: WeierstrassData, hz, grid: PlanarGrid) -> ProductStructureField:
    """mu = sqrt(tau0 + 4|h_z|^2), nu = sqrt(tau0 / (tau0 + 4|h_z|^2))."""
    hz = hz.hz if isinstance(hz, HzField) else np.asarray(hz, dtype=complex)
    _, t = data.sample(grid)
    s = t + 4.0 * np.abs(hz) ** 2
    return ProductStructureField(hz, np.sqrt(s), np.sqrt(t / s))


@nan_quiet
def reconstruct_g2(g1p: IdealElement, ps: ProductStructureField, atol: float = 1e-10) -> ComplexQuaternion:
    """g2' = -(1/nu) I hat(g1') I + (2i/(mu nu)) iota(h_z) J g1', in the opposite ideal."""
    g = g1p.quaternion
    first = cq_mul(cq_mul(QI, cq_hat(g)), QI) * (-1.0 / ps.nu)
    second = cq_mul(cq_mul(iota(ps.hz), QJ), g) * (2j / (ps.mu * ps.nu))
    g2 = first + second
    leak = cq_mul(PROJ_PLUS, g2).c
    scale = np.maximum(1.0, np.abs(g2.c).max(axis=-1, initial=0.0))
    bad = np.abs(leak).max(axis=-1) / scale
    if _nanmax(bad) > atol:
        raise InvariantBreach(f"g2' leaves the opposite ideal by {_nanmax(bad):.3e}")
    return g2


@nan_quiet
def assemble_spinor(g1p: IdealElement, g2p: ComplexQuaternion, mu: np.ndarray,
                    tol: float = 1e-6) -> ComplexQuaternion:
    """g = (g1' + g2') / sqrt(mu), with H(g, g) = 1 asserted."""
    g = (g1p.quaternion + g2p) / np.sqrt(mu)
    err = _nanmax(np.abs(cq_H(g) - 1.0))
    if err > tol:
        raise InvariantBreach(f"|H(g,g) - 1| = {err:.3e} exceeds {tol:.1e}")
    return g


@dataclass(frozen=True)
class SurfaceSample:
    grid: PlanarGrid
    F1: H2Point
    h: np.ndarray
    diagnostics: Optional["Diagnostics"] = None

    def coords(self) -> np.ndarray:
        """(x0, x2, x3, h) per node."""
        return np.concatenate([self.F1.as_array(), self.h[..., None]], axis=-1)


@nan_quiet
def immerse(g: ComplexQuaternion, h: np.ndarray, grid: PlanarGrid, tol: float = 1e-6) -> SurfaceSample:
    """F = (i bar(g) hat(g), h)."""
    q = 1j * cq_mul(cq_bar(g), cq_hat(g))
    F1 = H2Point.from_quaternion(q)
    # parts that must vanish: Re of the 1-part, the I-part, Im of J and K parts
    stray = np.stack([q.c[..., 0].real, np.abs(q.c[..., 1]), q.c[..., 2].imag, q.c[..., 3].imag], -1)
    err = max(_nanmax(np.abs(F1.constraint())), _nanmax(np.abs(stray)))
    if err > tol:
        raise InvariantBreach(f"F1 leaves the hyperboloid model by {err:.3e}")
    return SurfaceSample(grid, F1, np.asarray(h, dtype=float))


# ---------------------------------------------------------------------------
# Gauss map

def gauss_map(g1p: IdealElement) -> H2Point:
    return pi_project(g1p)


@nan_quiet
def gauss_frame(g1p: IdealElement, data: WeierstrassData, grid: PlanarGrid,
                singular_tol: float = 1e-8) -> tuple[ComplexQuaternion, ComplexQuaternion, np.ndarray]:
    """Orthonormal frame (u1, u2) of T_G H^2 adapted to dG, and the mask where it is defined.

        u1 = (i/sqrt tau0) (bar g J g I + I hat(bar g) J hat g)
        u2 = (1/sqrt tau0) (bar g J g I - I hat(bar g) J hat g)

    Nodes with |Q0| < singular_tol * tau0 are singular points of G; the frame
    is set to NaN there.
    """
    Q, t = data.sample(grid)
    g = g1p.quaternion
    p = cq_mul(cq_mul(cq_mul(cq_bar(g), QJ), g), QI)
    r = cq_mul(cq_mul(cq_mul(QI, cq_hat(cq_bar(g))), QJ), cq_hat(g))
    s = 1.0 / np.sqrt(t)
    u1 = (p + r) * (1j * s)
    u2 = (p - r) * s
    ok = grid.mask & (np.abs(Q) >= singular_tol * t)
    nan = np.where(ok, 1.0, np.nan)
    return u1 * nan, u2 * nan, ok


def frame_orthonormality(u1: ComplexQuaternion, u2: ComplexQuaternion) -> float:
    """max of |H(u1,u1) - 1|, |H(u2,u2) - 1|, |H(u1,u2)|."""
    e = np.stack([np.abs(cq_H(u1) - 1), np.abs(cq_H(u2) - 1), np.abs(cq_H(u1, u2))])
    return _nanmax(e)


@nan_quiet
def gauss_quadratic(G: H2Point, grid: PlanarGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients of H(dG, dG) = c dz^2 + e dz dzbar + conj(c) dzbar^2 from centred differences."""
    P = G.as_array()
    m = grid.mask
    Gx = stencil.centred(P, m, grid.hx, 1)
    Gy = stencil.centred(P, m, grid.hy, 0)
    E, F, Gg = minkowski_inner3(Gx, Gx), minkowski_inner3(Gx, Gy), minkowski_inner3(Gy, Gy)
    c = (E - Gg - 2j * F) / 4
    return c, (E + Gg) / 2, np.conj(c)


def quadratic_closed_form(data: WeierstrassData, grid: PlanarGrid):
    """(Q0, tau0/4 + 4|Q0|^2/tau0, conj Q0) on the grid."""
    Q, t = data.sample(grid)
    return Q, t / 4 + 4 * np.abs(Q) ** 2 / t, np.conj(Q)


# ---------------------------------------------------------------------------
# diagnostics

def _lorentz_cross4(a, b, c, eta=ETA4):
    """Vector n with <n, v>_eta = det[v, a, b, c] for every v."""
    M = np.stack([a, b, c], axis=-2)  # (..., 3, 4)
    cof = np.empty(a.shape)
    cols = [0, 1, 2, 3]
    for i in range(4):
        rest = [j for j in cols if j != i]
        cof[..., i] = (-1) ** i * np.linalg.det(M[..., rest])
    return cof / eta


def fundamental_forms(P: np.ndarray, mask: np.ndarray, hx: float, hy: float):
    """Centred first and second derivatives of a vector field P[iy, ix, :]."""
    Px = stencil.centred(P, mask, hx, 1)
    Py = stencil.centred(P, mask, hy, 0)
    Pxx = stencil.centred2(P, mask, hx, 1)
    Pyy = stencil.centred2(P, mask, hy, 0)
    Pxy = stencil.centred_mixed(P, mask, hx, hy)
    return Px, Py, Pxx, Pxy, Pyy


def shape_entries(Px, Py, Pxx, Pxy, Pyy, n, eta):
    """(E, F, G, L, M, N, H) with II_ij = <P_ij, n>/<n, n> and H = (1/2) trace."""
    def ip(u, v):
        return np.sum(u * v * eta, axis=-1)

    nn = ip(n, n)
    E, F, G = ip(Px, Px), ip(Px, Py), ip(Py, Py)
    L, M, N = ip(Pxx, n) / nn, ip(Pxy, n) / nn, ip(Pyy, n) / nn
    H = (L * G - 2 * M * F + N * E) / (2 * (E * G - F**2))
    return E, F, G, L, M, N, H


@dataclass(frozen=True)
class Diagnostics:
    H_meas: np.ndarray
    nu_meas: np.ndarray
    mu_meas: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    Q0_recomputed: np.ndarray
    Q0_error: np.ndarray
    nu_error: np.ndarray
    mu2_rel_error: np.ndarray
    gauss_normal_error: np.ndarray
    hyperboloid_error: np.ndarray

    def summary(self) -> dict:
        def stats(a):
            a = np.asarray(a, dtype=float)
            fin = np.isfinite(a)
            if not fin.any():
                return {"max": None, "mean": None, "min": None}
            return {"max": float(a[fin].max()), "mean": float(a[fin].mean()), "min": float(a[fin].min())}

        return {
            "H_meas": stats(self.H_meas), "H_error": stats(np.abs(self.H_meas - 0.5)),
            "nu_error": stats(self.nu_error), "mu2_rel_error": stats(self.mu2_rel_error),
            "Q0_error": stats(self.Q0_error), "gauss_normal_error": stats(self.gauss_normal_error),
            "hyperboloid_error": stats(self.hyperboloid_error),
            "alpha": stats(self.alpha), "beta": stats(self.beta),
        }


@nan_quiet
def diagnose(surface: SurfaceSample, ps: ProductStructureField, data: WeierstrassData,
             gauss: H2Point | None = None) -> Diagnostics:
    """Finite-difference geometry of F = (F1, h) in R^(1,2) x R (boundary ring is NaN)."""
    grid = surface.grid
    m = grid.mask
    P = surface.coords()
    Px, Py, Pxx, Pxy, Pyy = fundamental_forms(P, m, grid.hx, grid.hy)
    nu1 = np.concatenate([surface.F1.as_array(), np.zeros(grid.shape + (1,))], axis=-1)
    n = _lorentz_cross4(Px, Py, nu1)
    n = n / np.sqrt(np.abs(np.sum(n * n * ETA4, axis=-1)))[..., None]
    n = n * np.sign(n[..., 3])[..., None]  # angle function nu = <N, d/dh> > 0
    E, F, G, L, M, N, H = shape_entries(Px, Py, Pxx, Pxy, Pyy, n, ETA4)
    mu2 = 0.5 * (E + G)
    alpha = (L - N) / (2 * mu2)
    beta = M / mu2
    hx_, hy_ = Px[..., 3], Py[..., 3]
    hz_meas = 0.5 * (hx_ - 1j * hy_)
    Q_rec = -(mu2 / 2) * (alpha - 1j * beta) - hz_meas**2
    Q, t = data.sample(grid)
    scale = np.where(np.abs(Q) > 1e-8 * t, np.abs(Q), t / 4)
    nu_meas = n[..., 3]
    G_normal = (n[..., :3] + surface.F1.as_array()) / nu_meas[..., None]
    if gauss is None:
        gerr = np.full(grid.shape, np.nan)
    else:
        gerr = np.max(np.abs(G_normal - gauss.as_array()), axis=-1)
    inner = np.isfinite(H)
    hyp = np.where(m, np.abs(surface.F1.constraint()), np.nan)
    return Diagnostics(
        H_meas=H, nu_meas=nu_meas, mu_meas=np.sqrt(mu2), alpha=alpha, beta=beta,
        Q0_recomputed=Q_rec, Q0_error=np.abs(Q_rec - Q) / scale,
        nu_error=np.where(inner, np.abs(nu_meas - ps.nu), np.nan),
        mu2_rel_error=np.abs(mu2 - ps.mu**2) / ps.mu**2,
        gauss_normal_error=gerr, hyperboloid_error=hyp,
    )


@nan_quiet
def parallel_section_residual(g1p: IdealElement, data: WeierstrassData, grid: PlanarGrid) -> np.ndarray:
    """Norm of the pulled-back connection form -conj(L dz) + <dg, g>/|g|^2 on both axes.

    Fourth-order centred differences; NaN within two nodes of the boundary.
    """
    data = data.on_grid(grid)
    m = grid.mask
    z = grid.z
    L = np.full(grid.shape, np.nan + 0j)
    L[m] = np.asarray(data.logsqrt_tau_z(z[m])) * np.ones(m.sum())
    a, b = g1p.a, g1p.b
    n = ideal_norm(g1p)
    out = np.zeros(grid.shape)
    for axis, h, dz in ((1, grid.hx, 1.0), (0, grid.hy, 1j)):
        da = stencil.centred(a, m, h, axis, order=4)
        db = stencil.centred(b, m, h, axis, order=4)
        form = -np.conj(L * dz) + (da * np.conj(a) - db * np.conj(b)) / n
        out = out + np.abs(form) ** 2
    return np.sqrt(out)


# ---------------------------------------------------------------------------
# the whole pipeline

@dataclass(frozen=True)
class SurfaceResult:
    data: WeierstrassData
    grid: PlanarGrid
    plan: PathPlan
    hz: HzField
    height: HeightField
    g1: SpinorComponentField
    ps: ProductStructureField
    g: ComplexQuaternion
    surface: SurfaceSample
    gauss: H2Point

    def invariants(self) -> dict:
        m = self.grid.mask
        return {
            "norm_law": _nanmax(self.g1.norm_error(self.data)),
            "unit_spinor": _nanmax(np.abs(cq_H(self.g) - 1.0)),
            "hyperboloid": _nanmax(np.abs(self.surface.F1.constraint()[m])),
            "gauss_hyperboloid": _nanmax(np.abs(self.gauss.constraint()[m])),
            "height_imag_drift": self.height.imag_drift,
            "hz_mixed_partial": self.hz.mixed_residual_max,
        }


@nan_quiet
def build_surface(data: WeierstrassData, grid: PlanarGrid, *, theta0: complex = 0j, h0: float = 0.0,
                  plan: PathPlan | None = None, phase_sign: int = 1,
                  g1: SpinorComponentField | None = None, strict: bool = False,
                  with_diagnostics: bool = True) -> SurfaceResult:
    """Run the full construction; ``g1`` reuses an existing g1' field."""
    plan = column_rows(grid) if plan is None else plan
    require_compatible(data, grid, strict)
    data = data.on_grid(grid)
    hz = solve_hz(data, grid, plan, theta0)
    height = integrate_height(hz.hz, grid, plan, h0, hz.hz_z, hz.hz_zbar)
    if g1 is None:
        g1 = flow_g1(data, grid, plan, phase_sign=phase_sign)
    ps = product_structure(data, hz, grid)
    g2 = reconstruct_g2(g1.g1p, ps)
    g = assemble_spinor(g1.g1p, g2, ps.mu)
    surf = immerse(g, height.h, grid)
    G = gauss_map(g1.g1p)
    if with_diagnostics:
        surf = SurfaceSample(surf.grid, surf.F1, surf.h, diagnose(surf, ps, data, G))
    return SurfaceResult(data, grid, plan, hz, height, g1, ps, g, surf, G)
