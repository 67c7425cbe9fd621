"""Hot numeric kernels with numba-jitted loop implementations and pure-numpy
vectorized fallbacks.

Each kernel exists twice: a scalar-loop version (compiled with ``@njit`` when
numba is enabled) and a vectorized numpy version. Both consume the same
counter-based RNG stream (splitmix64, one stream per sample), so the two
paths agree to floating-point noise and are individually deterministic given
a seed. Dispatch is decided once at import time by
``backend.NUMBA_ENABLED`` (env var ``SARDESPECKLE_NUMBA``).
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .backend import NUMBA_ENABLED, njit_or_none

# splitmix64 constants
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_C1 = 0xBF58476D1CE4E5B9
_SM_C2 = 0x94D049BB133111EB

_PROX_GTOL = 1e-10
_PROX_MAX_ITERS = 100


# ---------------------------------------------------------------------------
# Gamma sampling (Marsaglia-Tsang squeeze method, per-sample splitmix64 stream)
# ---------------------------------------------------------------------------

def _gamma_field_loop(seed, n, shape):
    GAMMA = np.uint64(_SM_GAMMA)
    C1 = np.uint64(_SM_C1)
    C2 = np.uint64(_SM_C2)
    S30 = np.uint64(30)
    S27 = np.uint64(27)
    S31 = np.uint64(31)
    S11 = np.uint64(11)
    TWO_PI = 6.283185307179586
    U_SCALE = 2.0 ** -53

    boost = shape < 1.0
    a = shape + 1.0 if boost else shape
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)

    out = np.empty(n, dtype=np.float64)
    base = np.uint64(seed)
    for i in range(n):
        s = base + np.uint64(i + 1) * GAMMA
        while True:
            s += GAMMA
            z = s
            z = (z ^ (z >> S30)) * C1
            z = (z ^ (z >> S27)) * C2
            z = z ^ (z >> S31)
            u1 = (float(z >> S11) + 0.5) * U_SCALE
            s += GAMMA
            z = s
            z = (z ^ (z >> S30)) * C1
            z = (z ^ (z >> S27)) * C2
            z = z ^ (z >> S31)
            u2 = (float(z >> S11) + 0.5) * U_SCALE
            s += GAMMA
            z = s
            z = (z ^ (z >> S30)) * C1
            z = (z ^ (z >> S27)) * C2
            z = z ^ (z >> S31)
            u3 = (float(z >> S11) + 0.5) * U_SCALE

            x = math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)
            t = 1.0 + c * x
            if t <= 0.0:
                continue
            v = t * t * t
            x2 = x * x
            if u3 < 1.0 - 0.0331 * x2 * x2:
                break
            if math.log(u3) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
                break
        g = d * v
        if boost:
            s += GAMMA
            z = s
            z = (z ^ (z >> S30)) * C1
            z = (z ^ (z >> S27)) * C2
            z = z ^ (z >> S31)
            u4 = (float(z >> S11) + 0.5) * U_SCALE
            g *= u4 ** (1.0 / shape)
        out[i] = g
    return out


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_SM_C1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_SM_C2)
    return z ^ (z >> np.uint64(31))


def _u01(z):
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def _gamma_field_numpy(seed, n, shape):
    GAMMA = np.uint64(_SM_GAMMA)
    TWO_PI = 6.283185307179586

    boost = shape < 1.0
    a = shape + 1.0 if boost else shape
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)

    idx = np.arange(1, n + 1, dtype=np.uint64)
    s = np.uint64(seed) + idx * GAMMA
    out = np.empty(n, dtype=np.float64)
    active = np.arange(n)
    while active.size:
        sa = s[active]
        sa = sa + GAMMA
        u1 = _u01(_mix64(sa))
        sa = sa + GAMMA
        u2 = _u01(_mix64(sa))
        sa = sa + GAMMA
        u3 = _u01(_mix64(sa))
        s[active] = sa

        x = np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)
        t = 1.0 + c * x
        pos = t > 0.0
        v = t * t * t
        x2 = x * x
        squeeze = u3 < 1.0 - 0.0331 * x2 * x2
        full = np.log(u3) < 0.5 * x2 + d * (1.0 - np.where(pos, v, 1.0)
                                            + np.log(np.where(pos, v, 1.0)))
        acc = pos & (squeeze | full)
        out[active[acc]] = d * v[acc]
        active = active[~acc]
    if boost:
        s = s + GAMMA
        out *= _u01(_mix64(s)) ** (1.0 / shape)
    return out


# ---------------------------------------------------------------------------
# Fisher-Tippett data proximal operator (safeguarded Newton per pixel)
# ---------------------------------------------------------------------------

def _prox_field_loop(v, y, L, beta):
    n = v.size
    x = np.empty(n, dtype=np.float64)
    iters = np.empty(n, dtype=np.int64)
    margin = 40.0 / L
    for i in range(n):
        vi = v[i]
        yi = y[i]
        lo = min(vi, yi) - margin
        hi = max(vi, yi) + margin
        xi = vi
        k = 0
        while k < _PROX_MAX_ITERS:
            e = L * math.exp(yi - xi)
            g = beta * (xi - vi) + L - e
            if abs(g) <= _PROX_GTOL:
                break
            if g > 0.0:
                hi = xi
            else:
                lo = xi
            xn = xi - g / (beta + e)
            if xn <= lo or xn >= hi:
                xn = 0.5 * (lo + hi)
            if xn == xi:
                break
            xi = xn
            k += 1
        x[i] = xi
        iters[i] = k
    return x, iters


def _prox_field_numpy(v, y, L, beta):
    margin = 40.0 / L
    lo = np.minimum(v, y) - margin
    hi = np.maximum(v, y) + margin
    x = v.astype(np.float64).copy()
    iters = np.zeros(v.size, dtype=np.int64)
    active = np.arange(v.size)
    for k in range(_PROX_MAX_ITERS):
        xa = x[active]
        va = v[active]
        ya = y[active]
        e = L * np.exp(ya - xa)
        g = beta * (xa - va) + L - e
        conv = np.abs(g) <= _PROX_GTOL
        if conv.all():
            active = active[~conv]
            break
        pos = g > 0.0
        hi[active[pos]] = xa[pos]
        neg = ~pos & ~conv
        lo[active[neg]] = xa[neg]
        xn = xa - g / (beta + e)
        bad = (xn <= lo[active]) | (xn >= hi[active])
        xn = np.where(bad, 0.5 * (lo[active] + hi[active]), xn)
        stalled = xn == xa
        done = conv | stalled
        keep = ~done
        x[active[keep]] = xn[keep]
        iters[active[keep]] = k + 1
        active = active[keep]
        if active.size == 0:
            break
    return x, iters


# ---------------------------------------------------------------------------
# 3x3 convolution over channel stacks (zero padding, "same" output size)
# ---------------------------------------------------------------------------

def _conv3x3_loop(x, w, b):
    co = w.shape[0]
    ci, h, wid = x.shape
    out = np.empty((co, h, wid), dtype=np.float64)
    for o in range(co):
        for r in range(h):
            for ccol in range(wid):
                acc = b[o]
                for i in range(ci):
                    for dy in range(3):
                        rr = r + dy - 1
                        if rr < 0 or rr >= h:
                            continue
                        for dx in range(3):
                            cc = ccol + dx - 1
                            if 0 <= cc < wid:
                                acc += w[o, i, dy, dx] * x[i, rr, cc]
                out[o, r, ccol] = acc
    return out


def _conv3x3_numpy(x, w, b):
    ci, h, wid = x.shape
    xp = np.zeros((ci, h + 2, wid + 2), dtype=np.float64)
    xp[:, 1:-1, 1:-1] = x
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (ci, h, wid, 3, 3)
    out = np.einsum("oiyx,ihwyx->ohw", w, win, optimize=True)
    return out + b[:, None, None]


_gamma_field_jit = njit_or_none(_gamma_field_loop)
_prox_field_jit = njit_or_none(_prox_field_loop)
_conv3x3_jit = njit_or_none(_conv3x3_loop)


def gamma_unit_field(n: int, shape: float, seed: int) -> np.ndarray:
    """Draw n i.i.d. Gamma(shape, rate=1) samples, deterministic given seed."""
    seed_u = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    if NUMBA_ENABLED:
        return _gamma_field_jit(seed_u, n, float(shape))
    with np.errstate(over="ignore"):
        return _gamma_field_numpy(seed_u, n, float(shape))


def prox_field(v: np.ndarray, y: np.ndarray, L: float, beta: float):
    """Pixelwise argmin_x beta/2 (x-v)^2 + L(x-y) + L e^(y-x).

    Returns (x, iters) as flat float64 / int64 arrays matching v's size.
    """
    v = np.ascontiguousarray(v, dtype=np.float64).ravel()
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    if NUMBA_ENABLED:
        return _prox_field_jit(v, y, float(L), float(beta))
    return _prox_field_numpy(v, y, float(L), float(beta))


def conv3x3(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-size 3x3 convolution of a (C_in, H, W) stack with zero padding."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if NUMBA_ENABLED:
        return _conv3x3_jit(x, w, b)
    return _conv3x3_numpy(x, w, b)
