"""Complex quaternions as a model of Cl0(1,3), plus the H^2 and ideal models.

All types are array-valued: a ``ComplexQuaternion`` holds coefficients of shape
``(..., 4)`` on the basis (1, I, J, K), so a whole grid is one object.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, wraps

import numpy as np

from .clifford import Multivector, Signature, _grades


def nan_quiet(fn):
    """Silence invalid-value warnings: masked grid nodes carry NaN by design."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        with np.errstate(invalid="ignore", divide="ignore"):
            return fn(*args, **kwargs)

    return wrapper


class ComplexQuaternion:
    __slots__ = ("c",)
    __array_ufunc__ = None  # make ndarray * ComplexQuaternion defer to __rmul__

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=complex)
        if c.ndim == 0 or c.shape[-1] != 4:
            raise ValueError(f"complex quaternion needs trailing axis of length 4, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    def __setattr__(self, name, value):
        raise AttributeError("ComplexQuaternion is immutable")

    @classmethod
    def from_parts(cls, a0, a1, a2, a3) -> "ComplexQuaternion":
        return cls(np.stack(np.broadcast_arrays(*(np.asarray(x, complex) for x in (a0, a1, a2, a3))), axis=-1))

    @classmethod
    def scalar(cls, value) -> "ComplexQuaternion":
        value = np.asarray(value, dtype=complex)
        z = np.zeros_like(value)
        return cls.from_parts(value, z, z, z)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[:-1]

    def __getitem__(self, idx) -> "ComplexQuaternion":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return ComplexQuaternion(self.c[idx + (slice(None),)])

    def __add__(self, other):
        return ComplexQuaternion(self.c + _coerce(other).c)

    __radd__ = __add__

    def __sub__(self, other):
        return ComplexQuaternion(self.c - _coerce(other).c)

    def __rsub__(self, other):
        return ComplexQuaternion(_coerce(other).c - self.c)

    def __neg__(self):
        return ComplexQuaternion(-self.c)

    def __mul__(self, other):
        if isinstance(other, ComplexQuaternion):
            return cq_mul(self, other)
        return ComplexQuaternion(self.c * np.asarray(other, dtype=complex)[..., None])

    def __rmul__(self, other):
        return ComplexQuaternion(np.asarray(other, dtype=complex)[..., None] * self.c)

    def __truediv__(self, other):
        return ComplexQuaternion(self.c / np.asarray(other, dtype=complex)[..., None])

    def hat(self) -> "ComplexQuaternion":
        return cq_hat(self)

    def bar(self) -> "ComplexQuaternion":
        return cq_bar(self)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.c), initial=0.0))

    def __repr__(self) -> str:
        return f"ComplexQuaternion({self.c!r})"


def _coerce(x) -> ComplexQuaternion:
    return x if isinstance(x, ComplexQuaternion) else ComplexQuaternion.scalar(x)


ONE = ComplexQuaternion([1, 0, 0, 0])
QI = ComplexQuaternion([0, 1, 0, 0])
QJ = ComplexQuaternion([0, 0, 1, 0])
QK = ComplexQuaternion([0, 0, 0, 1])


def cq_mul(a: ComplexQuaternion, b: ComplexQuaternion) -> ComplexQuaternion:
    a0, a1, a2, a3 = np.moveaxis(a.c, -1, 0)
    b0, b1, b2, b3 = np.moveaxis(b.c, -1, 0)
    return ComplexQuaternion.from_parts(
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    )


def cq_hat(a: ComplexQuaternion) -> ComplexQuaternion:
    """Complex conjugation of the four coefficients."""
    return ComplexQuaternion(np.conj(a.c))


_BAR = np.array([1, -1, -1, -1])


def cq_bar(a: ComplexQuaternion) -> ComplexQuaternion:
    """Quaternionic conjugation; coefficients are not conjugated."""
    return ComplexQuaternion(a.c * _BAR)


def cq_H(a: ComplexQuaternion, b: ComplexQuaternion | None = None) -> np.ndarray:
    """Complex bilinear form H(a, b) = sum a_k b_k."""
    b = a if b is None else b
    return np.sum(a.c * b.c, axis=-1)


def iota(z) -> ComplexQuaternion:
    """Embed a Python complex number u + v j as u 1 + v I (complex structure given by I)."""
    z = np.asarray(z, dtype=complex)
    zero = np.zeros(z.shape)
    return ComplexQuaternion.from_parts(z.real, z.imag, zero, zero)


def minkowski_embed(x) -> ComplexQuaternion:
    """(x0, x1, x2, x3) -> i x0 1 + x1 I + x2 J + x3 JI, with JI = -K."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 4:
        raise ValueError(f"R^(1,3) vector needs 4 components, got {x.shape}")
    return ComplexQuaternion.from_parts(1j * x[..., 0], x[..., 1], x[..., 2], -x[..., 3])


# ---------------------------------------------------------------------------
# hyperboloid model

@dataclass(frozen=True)
class H2Point:
    """Point(s) i x0 1 + x2 J + x3 JI of the upper sheet -x0^2 + x2^2 + x3^2 = -1."""

    x0: np.ndarray
    x2: np.ndarray
    x3: np.ndarray

    def __post_init__(self) -> None:
        for name in ("x0", "x2", "x3"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def constraint(self) -> np.ndarray:
        """-x0^2 + x2^2 + x3^2 + 1, zero on the hyperboloid."""
        return -self.x0**2 + self.x2**2 + self.x3**2 + 1.0

    def check(self, atol: float = 1e-10) -> "H2Point":
        """Raise unless every finite entry lies on the upper sheet within ``atol``."""
        err = self.constraint()
        fin = np.isfinite(err)
        if np.any(np.abs(err[fin]) > atol) or np.any(self.x0[fin] <= 0):
            worst = float(np.max(np.abs(err[fin]), initial=0.0))
            raise ValueError(f"point off the hyperboloid (max deviation {worst:.3e})")
        return self

    def as_array(self) -> np.ndarray:
        return np.stack([self.x0, self.x2, self.x3], axis=-1)

    @property
    def quaternion(self) -> ComplexQuaternion:
        z = np.zeros(self.x0.shape)
        return ComplexQuaternion.from_parts(1j * self.x0, z, self.x2, -self.x3)

    @classmethod
    def from_quaternion(cls, q: ComplexQuaternion) -> "H2Point":
        """Read (x0, x2, x3) from i x0 + x2 J - x3 K; other parts are ignored."""
        return cls(q.c[..., 0].imag, q.c[..., 2].real, -q.c[..., 3].real)

    def poincare(self) -> tuple[np.ndarray, np.ndarray]:
        return self.x2 / (1.0 + self.x0), self.x3 / (1.0 + self.x0)


def minkowski_inner3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Lorentz product on (x0, x2, x3) arrays with trailing axis 3."""
    return -a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


# ---------------------------------------------------------------------------
# the ideal (1 + iI)/2 H^C

@dataclass(frozen=True)
class IdealElement:
    """g = (1/2)(1 + iI)(a + bJ), stored by its two complex coordinates."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        a, b = np.broadcast_arrays(np.asarray(self.a, complex), np.asarray(self.b, complex))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.a.shape

    @property
    def quaternion(self) -> ComplexQuaternion:
        a, b = self.a, self.b
        return ComplexQuaternion.from_parts(a / 2, 1j * a / 2, b / 2, 1j * b / 2)

    @classmethod
    def from_quaternion(cls, q: ComplexQuaternion, atol: float = 1e-10) -> "IdealElement":
        """Inverse of ``quaternion``; raises if ``q`` is not fixed by (1 + iI)/2."""
        proj = cq_mul(PROJ_PLUS, q)
        if (proj - q).max_abs() > atol * max(1.0, q.max_abs()):
            raise ValueError("quaternion does not lie in the ideal (1 + iI)/2 H^C")
        return cls(2 * q.c[..., 0], 2 * q.c[..., 2])

    def __getitem__(self, idx) -> "IdealElement":
        return IdealElement(self.a[idx], self.b[idx])

    def __neg__(self) -> "IdealElement":
        return IdealElement(-self.a, -self.b)

    def scale(self, factor) -> "IdealElement":
        return IdealElement(self.a * factor, self.b * factor)

    def as_real(self) -> np.ndarray:
        """Real state vector (Re a, Im a, Re b, Im b) along a trailing axis."""
        return np.stack([self.a.real, self.a.imag, self.b.real, self.b.imag], axis=-1)

    @classmethod
    def from_real(cls, y: np.ndarray) -> "IdealElement":
        return cls(y[..., 0] + 1j * y[..., 1], y[..., 2] + 1j * y[..., 3])


PROJ_PLUS = ComplexQuaternion([0.5, 0.5j, 0, 0])
PROJ_MINUS = ComplexQuaternion([0.5, -0.5j, 0, 0])


def ideal_inner(g: IdealElement, h: IdealElement) -> np.ndarray:
    return g.a * np.conj(h.a) - g.b * np.conj(h.b)


def ideal_norm(g: IdealElement) -> np.ndarray:
    return np.abs(g.a) ** 2 - np.abs(g.b) ** 2


@nan_quiet
def pi_project(g1p: IdealElement, atol: float = 1e-10) -> H2Point:
    """Hyperbolic Gauss map: (2i/|g|^2) bar(g) hat(g) = G + I, returned as G."""
    n = ideal_norm(g1p)
    fin = np.isfinite(n)
    if np.any(n[fin] <= 0):
        raise ValueError("pi_project needs positive hermitian norm")
    q = g1p.quaternion
    img = (2j / n) * cq_mul(cq_bar(q), cq_hat(q))
    p = H2Point.from_quaternion(img)
    return p.check(atol)


# ---------------------------------------------------------------------------
# Cl0(1,3) -> H^C

CL13 = Signature(1, 3)


@lru_cache(maxsize=None)
def _even_blade_images() -> dict[int, np.ndarray]:
    gens = [minkowski_embed(row) for row in np.eye(4)]
    images = {}
    for mask in range(16):
        if _grades(4)[mask] % 2:
            continue
        q = ONE
        upper = True  # vector x -> [[0, X], [hat X, 0]]; even products stay block-diagonal
        for j in range(4):
            if mask >> j & 1:
                q = cq_mul(q, gens[j] if upper else cq_hat(gens[j]))
                upper = not upper
        images[mask] = q.c
    return images


def even_iso(a: Multivector, atol: float = 0.0) -> ComplexQuaternion:
    """Upper-left block of the image of an even element of Cl(1,3)."""
    if a.sig != CL13:
        raise ValueError(f"even_iso acts on Cl(1,3), got {a.sig}")
    if not a.is_even(atol):
        raise ValueError("even_iso needs an even-grade element")
    out = np.zeros(4, dtype=complex)
    for mask, img in _even_blade_images().items():
        out = out + a.coeffs[mask] * img
    return ComplexQuaternion(out)
