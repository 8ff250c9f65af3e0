"""Hankel function of the first kind, order zero, for positive real argument.

Small arguments use the ascending series of J0 and Y0; large arguments use
the Hankel asymptotic expansion. Both branches are vectorized over numpy
arrays.
"""

import numpy as np

from .errors import DomainError

#: Below this argument the ascending series is used.
SWITCHOVER = 12.0
#: Terms kept in the ascending series (tail < 1e-17 for t < 12).
SERIES_TERMS = 48
#: Terms kept in the asymptotic expansion (optimal truncation is ~2t).
ASYMPTOTIC_TERMS = 20

_EULER_GAMMA = 0.57721566490153286061


def _series(t):
    z = 0.25 * t * t
    term = np.ones_like(t)
    j0 = np.ones_like(t)
    tail = np.zeros_like(t)
    harmonic = 0.0
    for k in range(1, SERIES_TERMS):
        term = term * (-z / (k * k))
        harmonic += 1.0 / k
        j0 = j0 + term
        tail = tail - harmonic * term
    y0 = (2.0 / np.pi) * ((np.log(0.5 * t) + _EULER_GAMMA) * j0 + tail)
    return j0 + 1j * y0


def _asymptotic_coefficients(n):
    # a_k = (-1)^k [1^2 3^2 ... (2k-1)^2] / (k! 8^k), multiplied by i^k
    coeffs = np.empty(n, dtype=complex)
    a = 1.0
    for k in range(n):
        coeffs[k] = a * 1j**k
        a *= -((2 * k + 1) ** 2) / (8.0 * (k + 1))
    return coeffs


_ASYM = _asymptotic_coefficients(ASYMPTOTIC_TERMS)


def _asymptotic(t):
    inv = 1.0 / t
    acc = np.full(t.shape, _ASYM[-1], dtype=complex)
    for c in _ASYM[-2::-1]:
        acc = acc * inv + c
    return np.sqrt(2.0 / (np.pi * t)) * np.exp(1j * (t - 0.25 * np.pi)) * acc


def hankel_h1_0(t):
    """Evaluate ``H0^(1)(t) = J0(t) + i Y0(t)`` for ``t > 0``.

    Accepts a scalar or an array; returns ``complex`` or a complex array of
    the same shape. Relative accuracy is about 1e-11 or better on (0, inf).
    """
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("hankel_h1_0 requires finite t > 0")
    flat = arr.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    small = flat < SWITCHOVER
    if np.any(small):
        out[small] = _series(flat[small])
    if np.any(~small):
        out[~small] = _asymptotic(flat[~small])
    if arr.ndim == 0:
        return complex(out[0])
    return out.reshape(arr.shape)
