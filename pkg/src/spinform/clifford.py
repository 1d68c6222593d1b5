"""Dense real Clifford algebras Cl(r, s).

Sign convention: for vectors v, w we have ``v*w + w*v = -2<v, w>``, where the
metric has ``r`` timelike directions (<e,e> = -1, so e*e = +1) followed by ``s``
spacelike ones (<e,e> = +1, so e*e = -1).  Generator ``e_i`` is bit ``i`` of
the blade bitmask; blade coefficients are stored in bitmask order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 8


@dataclass(frozen=True)
class Signature:
    r: int
    s: int

    def __post_init__(self) -> None:
        if self.r < 0 or self.s < 0:
            raise ValueError(f"negative signature counts ({self.r}, {self.s})")
        if self.r + self.s > MAX_DIM:
            raise ValueError(f"dimension {self.r + self.s} exceeds cap {MAX_DIM}")

    @property
    def dim(self) -> int:
        return self.r + self.s

    @property
    def size(self) -> int:
        return 1 << self.dim

    def metric(self) -> np.ndarray:
        """Diagonal of the bilinear form <e_i, e_i>."""
        return np.array([-1.0] * self.r + [1.0] * self.s)


def _popcount(x: int) -> int:
    return bin(x).count("1")


@lru_cache(maxsize=None)
def _tables(r: int, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(perm, sign)`` with ``(a*b)[k] = sum_i a[i] b[perm[k,i]] sign[k,i]``."""
    n = r + s
    size = 1 << n
    squares = [1.0] * r + [-1.0] * s
    blade_sign = np.empty((size, size))
    for a in range(size):
        for b in range(size):
            # transpositions needed to move each generator of b past the larger ones of a
            swaps = sum(_popcount(a >> (j + 1)) for j in range(n) if b >> j & 1)
            sgn = -1.0 if swaps & 1 else 1.0
            common = a & b
            for j in range(n):
                if common >> j & 1:
                    sgn *= squares[j]
            blade_sign[a, b] = sgn
    idx = np.arange(size)
    perm = idx[None, :] ^ idx[:, None]
    sign = blade_sign[idx[None, :], perm]
    perm.setflags(write=False)
    sign.setflags(write=False)
    return perm, sign


@lru_cache(maxsize=None)
def _grades(n: int) -> np.ndarray:
    g = np.array([_popcount(i) for i in range(1 << n)])
    g.setflags(write=False)
    return g


class Multivector:
    """Immutable element of Cl(r, s); ``coeffs[mask]`` multiplies the blade ``mask``."""

    __slots__ = ("sig", "coeffs")

    def __init__(self, sig: Signature, coeffs: Iterable[float]):
        arr = np.array(coeffs, dtype=float)
        if arr.shape != (sig.size,):
            raise ValueError(f"expected {sig.size} coefficients, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "sig", sig)
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Multivector is immutable")

    # constructors
    @classmethod
    def zero(cls, sig: Signature) -> "Multivector":
        return cls(sig, np.zeros(sig.size))

    @classmethod
    def scalar(cls, sig: Signature, value: float) -> "Multivector":
        c = np.zeros(sig.size)
        c[0] = value
        return cls(sig, c)

    @classmethod
    def blade(cls, sig: Signature, indices: Sequence[int], value: float = 1.0) -> "Multivector":
        """Product ``e_{i1} * ... * e_{ik}`` (any order, repeats allowed)."""
        out = cls.scalar(sig, value)
        for i in indices:
            out = out * cls.vector(sig, np.eye(sig.dim)[i])
        return out

    @classmethod
    def vector(cls, sig: Signature, v: Sequence[float]) -> "Multivector":
        v = np.asarray(v, dtype=float)
        if v.shape != (sig.dim,):
            raise ValueError(f"vector needs {sig.dim} components, got {v.shape}")
        c = np.zeros(sig.size)
        c[1 << np.arange(sig.dim)] = v
        return cls(sig, c)

    # arithmetic
    def _check(self, other: "Multivector") -> None:
        if self.sig != other.sig:
            raise ValueError(f"signature mismatch: {self.sig} vs {other.sig}")

    def __add__(self, other):
        if isinstance(other, Multivector):
            self._check(other)
            return Multivector(self.sig, self.coeffs + other.coeffs)
        return self + Multivector.scalar(self.sig, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Multivector(self.sig, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        return Multivector(self.sig, self.coeffs * float(other))

    def __rmul__(self, other):
        return Multivector(self.sig, self.coeffs * float(other))

    def __truediv__(self, other):
        return Multivector(self.sig, self.coeffs / float(other))

    def __repr__(self) -> str:
        terms = []
        for mask in np.flatnonzero(self.coeffs):
            name = "".join(f"e{j}" for j in range(self.sig.dim) if mask >> j & 1) or "1"
            terms.append(f"{self.coeffs[mask]:+.6g}*{name}")
        return f"Multivector(Cl{self.sig.r, self.sig.s}: {' '.join(terms) or '0'})"

    # queries
    def grade(self, k: int) -> "Multivector":
        return grade_project(self, k)

    def reverse(self) -> "Multivector":
        return reversion(self)

    def is_even(self, atol: float = 0.0) -> bool:
        odd = _grades(self.sig.dim) % 2 == 1
        return bool(np.all(np.abs(self.coeffs[odd]) <= atol))

    def vector_part(self) -> np.ndarray:
        """Grade-1 components as a length-``dim`` array."""
        return self.coeffs[1 << np.arange(self.sig.dim)].copy()

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs)))


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    a._check(b)
    perm, sign = _tables(a.sig.r, a.sig.s)
    out = (sign * a.coeffs[None, :] * b.coeffs[perm]).sum(axis=1)
    return Multivector(a.sig, out)


def commutator(a: Multivector, b: Multivector) -> Multivector:
    return a * b - b * a


def reversion(a: Multivector) -> Multivector:
    k = _grades(a.sig.dim)
    sign = np.where((k * (k - 1) // 2) % 2 == 1, -1.0, 1.0)
    return Multivector(a.sig, a.coeffs * sign)


def pairing(phi: Multivector, phi2: Multivector) -> Multivector:
    """The spinor pairing <<phi, phi2>> = tau(phi2) * phi."""
    phi._check(phi2)
    return reversion(phi2) * phi


def grade_project(a: Multivector, k: int) -> Multivector:
    if not 0 <= k <= a.sig.dim:
        raise ValueError(f"grade {k} outside 0..{a.sig.dim}")
    return Multivector(a.sig, np.where(_grades(a.sig.dim) == k, a.coeffs, 0.0))


def is_unit_spinor(g: Multivector, atol: float = 1e-12) -> bool:
    """Necessary condition for Spin membership: even and tau(g) g = 1."""
    if not g.is_even(atol):
        return False
    return (pairing(g, g) - 1.0).max_abs() <= atol


@dataclass(frozen=True)
class SkewOperator:
    """Antisymmetric N x N matrix; column j is the image of e_j."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"skew operator must be square, got {m.shape}")
        if not np.array_equal(m, -m.T):
            raise ValueError("matrix is not antisymmetric")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, m, atol: float = 1e-12) -> "SkewOperator":
        """Accept a numerically antisymmetric matrix and store its exact skew part."""
        m = np.asarray(m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"skew operator must be square, got {m.shape}")
        if np.max(np.abs(m + m.T), initial=0.0) > atol:
            raise ValueError("matrix is not antisymmetric within tolerance")
        return cls(0.5 * (m - m.T))

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        return self.matrix @ xi


def _euclidean(n: int) -> Signature:
    return Signature(0, n)


def _vectors_times_images(sig: Signature, images: np.ndarray, rows: range) -> Multivector:
    """sum_j e_j * w_j for the vectors ``w_j = images[:, j]``, j in ``rows``."""
    eye = np.eye(sig.dim)
    out = Multivector.zero(sig)
    for j in rows:
        out = out + Multivector.vector(sig, eye[j]) * Multivector.vector(sig, images[:, j])
    return out


def bivector_of_skew(u) -> Multivector:
    """Bivector ``(1/4) sum_j e_j * u(e_j)`` in Cl(0, N), so that [u_, xi] = u(xi)."""
    if not isinstance(u, SkewOperator):
        u = SkewOperator(u)
    sig = _euclidean(u.dim)
    return 0.25 * _vectors_times_images(sig, u.matrix, range(u.dim))


def bivector_of_map(u, symmetrized: bool = False) -> Multivector:
    """Bivector of a map u: R^p -> R^q inside Cl(0, p+q).

    ``u`` has shape (q, p).  The result represents [[0, -u*], [u, 0]]; with
    ``symmetrized`` it is assembled from both u and its adjoint.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise ValueError(f"map must be a (q, p) matrix, got shape {u.shape}")
    q, p = u.shape
    n = p + q
    sig = _euclidean(n)
    full = np.zeros((n, n))
    full[p:, :p] = u
    if not symmetrized:
        return 0.5 * _vectors_times_images(sig, full, range(p))
    full[:p, p:] = -u.T
    return 0.25 * _vectors_times_images(sig, full, range(n))


def wedge_bivector(U: Multivector, V: Multivector) -> Multivector:
    """(1/4)(U V - V U), representing W -> <U,W> V - <V,W> U."""
    U._check(V)
    return 0.25 * (U * V - V * U)


def ideal_split(a: Multivector, omega: Multivector, atol: float = 1e-12):
    """Return ``(a * (1 - omega)/2, a * (1 + omega)/2)``; requires omega^2 = 1."""
    a._check(omega)
    if (omega * omega - 1.0).max_abs() > atol:
        raise ValueError("ideal_split needs omega * omega = 1")
    one = Multivector.scalar(a.sig, 1.0)
    return a * (0.5 * (one - omega)), a * (0.5 * (one + omega))
