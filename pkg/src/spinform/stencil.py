"""Mask-aware finite-difference stencils on node arrays indexed ``[iy, ix]``.

Two flavours are provided.  ``d1``/``d2`` fall back to one-sided second-order
forms where a centred stencil would touch a masked or missing node.  The
``centred*`` helpers never fall back: they return NaN wherever the full centred
stencil is unavailable, which is how the geometric diagnostics exclude the
boundary ring.
"""

from __future__ import annotations

import numpy as np


def _shift(a: np.ndarray, k: int, axis: int, fill) -> np.ndarray:
    """``out[i] = a[i + k]`` along ``axis``; out-of-range entries are ``fill``."""
    out = np.full_like(a, fill)
    n = a.shape[axis]
    if abs(k) >= n:
        return out
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k >= 0:
        src[axis], dst[axis] = slice(k, n), slice(0, n - k)
    else:
        src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _avail(mask: np.ndarray, k: int, axis: int) -> np.ndarray:
    return _shift(mask, k, axis, False)


def _bcast(mask: np.ndarray, f: np.ndarray) -> np.ndarray:
    return mask.reshape(mask.shape + (1,) * (f.ndim - mask.ndim))


def d1(f: np.ndarray, mask: np.ndarray, h: float, axis: int) -> np.ndarray:
    """First derivative along ``axis`` (0 = y, 1 = x), second order everywhere."""
    fp1, fm1 = _shift(f, 1, axis, np.nan), _shift(f, -1, axis, np.nan)
    fp2, fm2 = _shift(f, 2, axis, np.nan), _shift(f, -2, axis, np.nan)
    ok_c = mask & _avail(mask, 1, axis) & _avail(mask, -1, axis)
    ok_f = mask & _avail(mask, 1, axis) & _avail(mask, 2, axis)
    ok_b = mask & _avail(mask, -1, axis) & _avail(mask, -2, axis)
    with np.errstate(invalid="ignore"):
        centred = (fp1 - fm1) / (2 * h)
        fwd = (-3 * f + 4 * fp1 - fp2) / (2 * h)
        bwd = (3 * f - 4 * fm1 + fm2) / (2 * h)
    return np.where(_bcast(ok_c, f), centred,
                    np.where(_bcast(ok_f, f), fwd, np.where(_bcast(ok_b, f), bwd, np.nan)))


def d2(f: np.ndarray, mask: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second derivative along ``axis``, second order everywhere."""
    sh = {k: _shift(f, k, axis, np.nan) for k in (-3, -2, -1, 1, 2, 3)}
    ok_c = mask & _avail(mask, 1, axis) & _avail(mask, -1, axis)
    ok_f = mask & _avail(mask, 1, axis) & _avail(mask, 2, axis) & _avail(mask, 3, axis)
    ok_b = mask & _avail(mask, -1, axis) & _avail(mask, -2, axis) & _avail(mask, -3, axis)
    with np.errstate(invalid="ignore"):
        centred = (sh[1] - 2 * f + sh[-1]) / h**2
        fwd = (2 * f - 5 * sh[1] + 4 * sh[2] - sh[3]) / h**2
        bwd = (2 * f - 5 * sh[-1] + 4 * sh[-2] - sh[-3]) / h**2
    return np.where(_bcast(ok_c, f), centred,
                    np.where(_bcast(ok_f, f), fwd, np.where(_bcast(ok_b, f), bwd, np.nan)))


def d_zbar(f, mask, hx, hy):
    """Wirtinger derivative (d/dx + i d/dy)/2 with one-sided fallbacks."""
    return 0.5 * (d1(f, mask, hx, 1) + 1j * d1(f, mask, hy, 0))


def d_z(f, mask, hx, hy):
    return 0.5 * (d1(f, mask, hx, 1) - 1j * d1(f, mask, hy, 0))


def laplacian(f, mask, hx, hy):
    return d2(f, mask, hx, 1) + d2(f, mask, hy, 0)


# ---------------------------------------------------------------------------
# strict centred stencils (NaN where the stencil leaves the active region)

def _need(mask: np.ndarray, axis: int, reach: int) -> np.ndarray:
    ok = mask.copy()
    for k in range(1, reach + 1):
        ok &= _avail(mask, k, axis) & _avail(mask, -k, axis)
    return ok


def centred(f: np.ndarray, mask: np.ndarray, h: float, axis: int, order: int = 2) -> np.ndarray:
    """Centred first derivative of order 2 or 4."""
    if order == 2:
        val = (_shift(f, 1, axis, np.nan) - _shift(f, -1, axis, np.nan)) / (2 * h)
        ok = _need(mask, axis, 1)
    elif order == 4:
        val = (-_shift(f, 2, axis, np.nan) + 8 * _shift(f, 1, axis, np.nan)
               - 8 * _shift(f, -1, axis, np.nan) + _shift(f, -2, axis, np.nan)) / (12 * h)
        ok = _need(mask, axis, 2)
    else:
        raise ValueError(f"unsupported stencil order {order}")
    return np.where(_bcast(ok, f), val, np.nan)


def centred2(f: np.ndarray, mask: np.ndarray, h: float, axis: int) -> np.ndarray:
    val = (_shift(f, 1, axis, np.nan) - 2 * f + _shift(f, -1, axis, np.nan)) / h**2
    return np.where(_bcast(_need(mask, axis, 1), f), val, np.nan)


def centred_mixed(f: np.ndarray, mask: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """d^2 f / dx dy from the four diagonal neighbours."""
    def s(dy, dx):
        return _shift(_shift(f, dy, 0, np.nan), dx, 1, np.nan)

    def m(dy, dx):
        return _shift(_shift(mask, dy, 0, False), dx, 1, False)

    val = (s(1, 1) - s(1, -1) - s(-1, 1) + s(-1, -1)) / (4 * hx * hy)
    ok = mask & m(1, 1) & m(1, -1) & m(-1, 1) & m(-1, -1)
    return np.where(_bcast(ok, f), val, np.nan)


def interior(mask: np.ndarray, ring: int = 1) -> np.ndarray:
    """Active nodes whose full (2 ring + 1)^2 neighbourhood is active."""
    ok = mask.copy()
    for dy in range(-ring, ring + 1):
        for dx in range(-ring, ring + 1):
            ok &= _shift(_shift(mask, dy, 0, False), dx, 1, False)
    return ok
