"""Pointwise check of the Gauss, Ricci and Codazzi equations for immersions in S^m x S^n.

Everything lives in orthonormal frames: TM has basis e_1..e_p, E has n_1..n_q,
and TM (+) E is identified with R^(p+q), TM first.  Tensor layouts:

========  ==============  ==================================================
field     shape           meaning
========  ==============  ==================================================
B         (p, p, q)       B[x, y, r] = <B(e_x, e_y), n_r>
f h s t   (p,p) (q,p)     blocks of the product structure, column = image
          (p,q) (q,q)
dB        (p, p, p, q)    dB[k, i, j, r] = <(D_{e_k} B)(e_i, e_j), n_r>
df ...    (p, *, *)       df[y] = (D_{e_y} f) as a matrix, likewise dh ds dt
RT        (p, p, p, p)    RT[x, y, i, j] = <R^T(e_x, e_y) e_j, e_i>
RN        (p, p, q, q)    RN[x, y, r, s] = <R^N(e_x, e_y) n_s, n_r>
========  ==============  ==================================================

Two printed signs are corrected here (see ``ricci_rhs`` and ``codazzi_rhs``):
with them the equations are exactly the block decomposition of A + B + C.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .clifford import MAX_DIM, Multivector, Signature, commutator

_BLOCKS = ("f", "h", "s", "t")
_DERIVS = ("dB", "df", "dh", "ds", "dt")


class InvalidPointData(ValueError):
    pass


def wedge(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Matrix of W -> <U,W> V - <V,W> U (column j is the image of e_j)."""
    return np.outer(V, U) - np.outer(U, V)


@dataclass(frozen=True)
class PointData:
    p: int
    q: int
    c1: float
    c2: float
    B: np.ndarray
    f: np.ndarray
    h: np.ndarray
    s: np.ndarray
    t: np.ndarray
    dB: np.ndarray
    df: np.ndarray
    dh: np.ndarray
    ds: np.ndarray
    dt: np.ndarray
    RT: np.ndarray
    RN: np.ndarray

    def __post_init__(self) -> None:
        p, q = self.p, self.q
        shapes = {"B": (p, p, q), "f": (p, p), "h": (q, p), "s": (p, q), "t": (q, q),
                  "dB": (p, p, p, q), "df": (p, p, p), "dh": (p, q, p), "ds": (p, p, q),
                  "dt": (p, q, q), "RT": (p, p, p, p), "RN": (p, p, q, q)}
        for name, shape in shapes.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.size != int(np.prod(shape)):
                raise InvalidPointData(f"{name} must have shape {shape}, got {arr.shape}")
            arr = arr.reshape(shape)  # empty blocks (q = 0) arrive from JSON as bare []
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def validate(self, atol: float = 1e-10) -> "PointData":
        """Raise ``InvalidPointData`` unless the structural invariants hold."""
        if self.p < 1 or self.q < 0:
            raise InvalidPointData(f"bad dimensions p={self.p}, q={self.q}")
        if self.c1 == 0 or self.c2 == 0 or np.sign(self.c1) != np.sign(self.c2):
            raise InvalidPointData("c1 and c2 must be nonzero with a common sign")
        checks = {
            "B symmetric": self.B - self.B.transpose(1, 0, 2),
            "dB symmetric": self.dB - self.dB.transpose(0, 2, 1, 3),
            "RT antisymmetric in (X,Y)": self.RT + self.RT.transpose(1, 0, 2, 3),
            "RN antisymmetric in (X,Y)": self.RN + self.RN.transpose(1, 0, 2, 3),
        }
        P = self.product_structure()
        checks["P^2 = id"] = P @ P - np.eye(self.p + self.q)
        checks["P symmetric"] = P - P.T
        for name, defect in checks.items():
            err = float(np.max(np.abs(defect), initial=0.0))
            if err > atol:
                raise InvalidPointData(f"invariant '{name}' violated by {err:.3e}")
        return self

    def product_structure(self) -> np.ndarray:
        return np.block([[self.f, self.s], [self.h, self.t]])

    def to_dict(self) -> dict:
        out = {"p": self.p, "q": self.q, "c1": self.c1, "c2": self.c2}
        for name in ("B",) + _BLOCKS + _DERIVS + ("RT", "RN"):
            out[name] = getattr(self, name).tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PointData":
        try:
            return cls(int(d["p"]), int(d["q"]), float(d["c1"]), float(d["c2"]),
                       **{k: d[k] for k in ("B",) + _BLOCKS + _DERIVS + ("RT", "RN")})
        except KeyError as exc:
            raise InvalidPointData(f"missing field {exc.args[0]!r}") from None


def bstar(B: np.ndarray) -> np.ndarray:
    """B*[x, r, j] = <B*(e_x, n_r), e_j>, the adjoint with <B(X,Y), N> = <Y, B*(X,N)>."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 3 or B.shape[0] != B.shape[1]:
        raise ValueError(f"B must have shape (p, p, q), got {B.shape}")
    return B.transpose(0, 2, 1)


# ---------------------------------------------------------------------------
# right-hand sides, per pair (x, y)

def _blocks(d: PointData, x: int, y: int) -> dict[str, np.ndarray]:
    """The operators of the lemma on A, B and C for X = e_x, Y = e_y."""
    eye = np.eye(d.p)
    X, Y = eye[x], eye[y]
    fX, fY, hX, hY = d.f[:, x], d.f[:, y], d.h[:, x], d.h[:, y]
    Bx, By = d.B[x], d.B[y]
    cp, cm = 0.25 * (d.c1 + d.c2), 0.25 * (d.c1 - d.c2)
    return {
        "A": (d.dB[y, x] - d.dB[x, y]).T,               # TM -> E
        "B1": Bx @ By.T - By @ Bx.T,                    # TM -> TM
        "B2": Bx.T @ By - By.T @ Bx,                    # E -> E
        "C1": -cp * (wedge(X, Y) + wedge(fX, fY)),
        "C2": -cp * wedge(hX, hY),
        "C3": cp * (np.outer(hX, fY) - np.outer(hY, fX)),
        "C4": -cm * (wedge(fX, Y) + wedge(X, fY)),
        "C5": cm * (np.outer(hX, Y) - np.outer(hY, X)),
    }


def gauss_rhs(d: PointData) -> np.ndarray:
    out = np.zeros_like(d.RT)
    for x in range(d.p):
        for y in range(d.p):
            b = _blocks(d, x, y)
            out[x, y] = b["B1"] + b["C1"] + b["C4"]
    return out


def ricci_rhs(d: PointData) -> np.ndarray:
    """B(X,B*(Y,N)) - B(Y,B*(X,N)) - (c1+c2)/4 (hX ^ hY) N.

    The h-term carries a minus sign: that is what the E-block of A + B + C gives.
    """
    out = np.zeros_like(d.RN)
    for x in range(d.p):
        for y in range(d.p):
            b = _blocks(d, x, y)
            out[x, y] = b["B2"] + b["C2"]
    return out


def codazzi_lhs(d: PointData) -> np.ndarray:
    """L[x, y, z, r] = (D_X B)(Y, Z) - (D_Y B)(X, Z)."""
    return d.dB - d.dB.transpose(1, 0, 2, 3)


def codazzi_rhs(d: PointData) -> np.ndarray:
    """(c1+c2)/4 (<fY,Z> hX - <fX,Z> hY) + (c1-c2)/4 (<Y,Z> hX - <X,Z> hY).

    The second term enters with a plus sign, so that A + C3 + C5 = 0.
    """
    out = np.zeros(d.dB.shape)
    for x in range(d.p):
        for y in range(d.p):
            b = _blocks(d, x, y)
            out[x, y] = (b["C3"] + b["C5"]).T
    return out


def fhst_rhs(d: PointData) -> tuple[np.ndarray, ...]:
    f, h, s, t = d.f, d.h, d.s, d.t
    r1 = np.stack([s @ d.B[y].T + d.B[y] @ h for y in range(d.p)])
    r2 = np.stack([t @ d.B[y].T - d.B[y].T @ f for y in range(d.p)])
    r3 = np.stack([-f @ d.B[y] + d.B[y] @ t for y in range(d.p)])
    r4 = np.stack([-h @ d.B[y] - d.B[y].T @ s for y in range(d.p)])
    return r1, r2, r3, r4


# ---------------------------------------------------------------------------
# residuals

@dataclass(frozen=True)
class Residuals:
    gauss: float
    ricci: float
    codazzi: float
    fhst1: float
    fhst2: float
    fhst3: float
    fhst4: float
    frobenius: dict = field(default_factory=dict)

    def max(self) -> float:
        return max(self.gauss, self.ricci, self.codazzi, self.fhst1, self.fhst2, self.fhst3, self.fhst4)

    def to_dict(self) -> dict:
        return asdict(self)


def _mx(a: np.ndarray) -> float:
    return float(np.max(np.abs(a), initial=0.0))


def fundamental_residuals(d: PointData, validate: bool = True) -> Residuals:
    if validate:
        d.validate()
    diffs = {"gauss": d.RT - gauss_rhs(d), "ricci": d.RN - ricci_rhs(d),
             "codazzi": codazzi_lhs(d) - codazzi_rhs(d)}
    for k, (lhs, rhs) in enumerate(zip((d.df, d.dh, d.ds, d.dt), fhst_rhs(d)), start=1):
        diffs[f"fhst{k}"] = lhs - rhs
    return Residuals(**{k: _mx(v) for k, v in diffs.items()},
                     frobenius={k: float(np.linalg.norm(v)) for k, v in diffs.items()})


# ---------------------------------------------------------------------------
# manufactured data

def _random_product_structure(rng: np.random.Generator, p: int, q: int) -> np.ndarray:
    n = p + q
    m = int(rng.integers(0, n + 1))
    D = np.diag([1.0] * m + [-1.0] * (n - m))
    O, _ = np.linalg.qr(rng.standard_normal((n, n)))
    P = O @ D @ O.T
    return 0.5 * (P + P.T)


def random_point_data(rng: np.random.Generator, p: int, q: int, c1: float = 1.0, c2: float = 1.0,
                      consistent: bool = True) -> PointData:
    """Random PointData; ``consistent`` fills RT, RN, dB and the block derivatives from the equations."""
    P = _random_product_structure(rng, p, q)
    B = rng.standard_normal((p, p, q))
    B = 0.5 * (B + B.transpose(1, 0, 2))
    base = dict(p=p, q=q, c1=c1, c2=c2, B=B, f=P[:p, :p], h=P[p:, :p], s=P[:p, p:], t=P[p:, p:])
    S = rng.standard_normal((p, p, p, q))
    S = sum(S.transpose(perm + (3,)) for perm in
            ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))) / 6.0
    if not consistent:
        RT = rng.standard_normal((p, p, p, p))
        RN = rng.standard_normal((p, p, q, q))
        return PointData(**base, dB=S, df=rng.standard_normal((p, p, p)), dh=rng.standard_normal((p, q, p)),
                         ds=rng.standard_normal((p, p, q)), dt=rng.standard_normal((p, q, q)),
                         RT=RT - RT.transpose(1, 0, 2, 3), RN=RN - RN.transpose(1, 0, 2, 3))
    zeros = dict(dB=np.zeros((p, p, p, q)), df=np.zeros((p, p, p)), dh=np.zeros((p, q, p)),
                 ds=np.zeros((p, p, q)), dt=np.zeros((p, q, q)), RT=np.zeros((p, p, p, p)),
                 RN=np.zeros((p, p, q, q)))
    d0 = PointData(**base, **zeros)
    K = codazzi_rhs(d0)  # antisymmetric in (x, y) and cyclic, so this symmetrisation solves Codazzi
    dB = (K + K.transpose(0, 2, 1, 3)) / 3.0 + S
    r1, r2, r3, r4 = fhst_rhs(d0)
    return PointData(**base, dB=dB, df=r1, dh=r2, ds=r3, dt=r4, RT=gauss_rhs(d0), RN=ricci_rhs(d0))


# ---------------------------------------------------------------------------
# Clifford cross-check

@dataclass(frozen=True)
class CliffordCheck:
    commutator: float    # max_xi |[A+B+C, xi] - expected image of xi|
    A_discrepancy: float
    B_discrepancy: float
    C_discrepancy: float
    abc_residual: float  # A + B + C against the curvature bivector of RT and RN

    def worst(self) -> float:
        return max(self.commutator, self.A_discrepancy, self.B_discrepancy, self.C_discrepancy,
                   self.abc_residual)


def _bivector_lower(sig: Signature, M: np.ndarray, offset: int) -> Multivector:
    """(1/2) sum_{j<k} <M e_j, e_k> e_j e_k on the coordinate block starting at ``offset``."""
    out = Multivector.zero(sig)
    n = M.shape[0]
    for j in range(n):
        for k in range(j + 1, n):
            out = out + Multivector.blade(sig, (offset + j, offset + k), 0.5 * M[k, j])
    return out


def _sum_e_times(sig: Signature, M: np.ndarray, p: int) -> Multivector:
    """(1/2) sum_j e_j * M(e_j) for M: TM -> E (q x p)."""
    out = Multivector.zero(sig)
    eye = np.eye(sig.dim)
    for j in range(p):
        w = np.concatenate([np.zeros(p), M[:, j]])
        out = out + 0.5 * (Multivector.vector(sig, eye[j]) * Multivector.vector(sig, w))
    return out


def curvature_clifford_check(d: PointData, x: int, y: int) -> CliffordCheck:
    """Build A, B, C for X = e_x, Y = e_y in Cl(0, p+q) two ways and compare."""
    p, q = d.p, d.q
    if p + q + 2 > MAX_DIM:
        raise ValueError(f"p + q + 2 = {p + q + 2} exceeds the dimension cap {MAX_DIM}")
    if not (0 <= x < p and 0 <= y < p):
        raise IndexError(f"basis indices ({x}, {y}) out of range for p={p}")
    sig = Signature(0, p + q)
    b = _blocks(d, x, y)

    def V(t_part, e_part=None):
        e_part = np.zeros(q) if e_part is None else e_part
        return Multivector.vector(sig, np.concatenate([t_part, e_part]))

    eye = np.eye(p)

    # lemma expressions: coefficient sums over the frame
    A_lem = _sum_e_times(sig, b["A"], p)
    B_lem = _bivector_lower(sig, b["B1"], 0) + _bivector_lower(sig, b["B2"], p)
    C_lem = (_bivector_lower(sig, b["C1"] + b["C4"], 0) + _bivector_lower(sig, b["C2"], p)
             + _sum_e_times(sig, b["C3"] + b["C5"], p))

    # direct Clifford products
    def Bcl(k):
        return sum((V(eye[j]) * V(np.zeros(p), d.B[k, j]) for j in range(p)), Multivector.zero(sig))

    def dBcl(k, i):
        return sum((V(eye[j]) * V(np.zeros(p), d.dB[k, i, j]) for j in range(p)), Multivector.zero(sig))

    A_dir = 0.5 * (dBcl(y, x) - dBcl(x, y))
    BX, BY = Bcl(x), Bcl(y)
    B_dir = 0.25 * (BY * BX - BX * BY)
    X, Y = V(eye[x]), V(eye[y])
    fX, fY = V(d.f[:, x]), V(d.f[:, y])
    hX, hY = V(np.zeros(p), d.h[:, x]), V(np.zeros(p), d.h[:, y])
    X1, X2 = 0.5 * (X + fX + hX), 0.5 * (X - fX - hX)
    Y1, Y2 = 0.5 * (Y + fY + hY), 0.5 * (Y - fY - hY)
    C_dir = 0.25 * (d.c1 * (Y1 * X1 - X1 * Y1) + d.c2 * (Y2 * X2 - X2 * Y2))
    cp, cm = d.c1 + d.c2, d.c1 - d.c2
    C_parts = (cp / 16 * ((Y * X - X * Y) + (fY * fX - fX * fY)) + cp / 16 * (hY * hX - hX * hY)
               + cp / 8 * (fY * hX - fX * hY)
               + cm / 16 * (Y * fX - fX * Y - X * fY + fY * X) + cm / 8 * (Y * hX - X * hY))

    total = A_dir + B_dir + C_dir
    M = b["A"] + b["C3"] + b["C5"]
    expected = np.block([[b["B1"] + b["C1"] + b["C4"], -M.T], [M, b["B2"] + b["C2"]]])
    comm = 0.0
    for i in range(p + q):
        xi = np.eye(p + q)[i]
        got = commutator(total, Multivector.vector(sig, xi))
        stray = (got - Multivector.vector(sig, got.vector_part())).max_abs()
        comm = max(comm, float(np.max(np.abs(got.vector_part() - expected[:, i]))), stray)
    curv = _bivector_lower(sig, d.RT[x, y], 0) + _bivector_lower(sig, d.RN[x, y], p)
    return CliffordCheck(
        commutator=comm,
        A_discrepancy=(A_lem - A_dir).max_abs(),
        B_discrepancy=(B_lem - B_dir).max_abs(),
        C_discrepancy=max((C_lem - C_dir).max_abs(), (C_parts - C_dir).max_abs()),
        abc_residual=(total - curv).max_abs(),
    )


def clifford_check_all(d: PointData) -> CliffordCheck:
    """Worst case of ``curvature_clifford_check`` over all pairs x < y."""
    pairs = [(x, y) for x in range(d.p) for y in range(x + 1, d.p)] or [(0, 0)]
    checks = [curvature_clifford_check(d, x, y) for x, y in pairs]
    return CliffordCheck(*(max(getattr(c, f) for c in checks) for f in
                           ("commutator", "A_discrepancy", "B_discrepancy", "C_discrepancy", "abc_residual")))


# ---------------------------------------------------------------------------
# batch JSON

def load_batch(path: str | Path) -> list[PointData]:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise InvalidPointData("compat input must be a JSON array of point records")
    return [PointData.from_dict(item) for item in raw]


def evaluate_batch(items: list[PointData]) -> list[dict]:
    """One report entry per instance; invalid instances are reported, not raised."""
    out = []
    for k, d in enumerate(items):
        try:
            out.append({"index": k, "valid": True, **fundamental_residuals(d).to_dict()})
        except InvalidPointData as exc:
            out.append({"index": k, "valid": False, "error": str(exc)})
    return out
