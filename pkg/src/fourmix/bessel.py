"""Modified Bessel functions of the second kind for orders 0 and 1/2.

Only the two orders needed by the elliptical Laplace kernel in d = 2 and
d = 3 are provided (d = 1 uses the closed form directly).

K_0 uses the ascending series

    K_0(x) = -(ln(x/2) + gamma) I_0(x) + sum_k (x^2/4)^k / (k!)^2 * H_k

for x <= 2, and Temme's continued fraction (evaluated with Steed's
algorithm) for x > 2, which returns the scaled value e^x K_0(x) without
overflow or underflow.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import InvalidArgument

EULER_GAMMA = 0.57721566490153286060651209
_SERIES_CUTOFF = 2.0
_EPS = 1e-17
_MAXIT = 10000


@njit(cache=True)
def _k0_series(x):
    q = 0.25 * x * x
    term = 1.0
    i0 = 1.0
    tail = 0.0
    harmonic = 0.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        harmonic += 1.0 / k
        i0 += term
        tail += term * harmonic
        if term < 1e-18 * i0:
            break
    return -(math.log(0.5 * x) + EULER_GAMMA) * i0 + tail


@njit(cache=True)
def _k0e_continued_fraction(x):
    """e^x * K_0(x) for x >= 2 (order nu = 0 of Temme's CF2)."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    return math.sqrt(math.pi / (2.0 * x)) / s


@njit(cache=True)
def _scalar_k0(x):
    if x <= _SERIES_CUTOFF:
        return _k0_series(x)
    return _k0e_continued_fraction(x) * math.exp(-x)


@njit(cache=True)
def _scalar_k0e(x):
    if x <= _SERIES_CUTOFF:
        return _k0_series(x) * math.exp(x)
    return _k0e_continued_fraction(x)


@njit(cache=True)
def _k0_array(x, scaled):
    out = np.empty_like(x)
    for i in range(x.size):
        out[i] = _scalar_k0e(x[i]) if scaled else _scalar_k0(x[i])
    return out


def _apply(x, scaled):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise InvalidArgument("modified Bessel K requires x > 0")
    out = _k0_array(np.ascontiguousarray(arr.ravel()), scaled).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def k0(x):
    """K_0(x) for x > 0 (scalar or array)."""
    return _apply(x, False)


def k0e(x):
    """Exponentially scaled e^x K_0(x)."""
    return _apply(x, True)


def k_half(x):
    """K_{1/2}(x) = sqrt(pi / (2x)) e^{-x}."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise InvalidArgument("modified Bessel K requires x > 0")
    out = np.sqrt(np.pi / (2.0 * arr)) * np.exp(-arr)
    return float(out) if out.ndim == 0 else out


def bessel_k(order: float, x):
    """Dispatch on ``order`` in {0, 1/2}; other orders are not implemented."""
    if order == 0:
        return k0(x)
    if order in (0.5, -0.5):
        return k_half(x)
    raise InvalidArgument(f"bessel_k supports orders 0 and 1/2, got {order}")
