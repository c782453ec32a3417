"""Vectorized double-double (compensated) arithmetic.

A value is a pair of float64 arrays (hi, lo) with value = hi + lo and
|lo| <= ulp(hi)/2, giving ~31 significant digits.  Only the handful of
operations the Airy Maclaurin series needs are provided.  Algorithms are the
classical error-free transformations (Knuth two-sum, Dekker split/product);
no FMA is assumed.
"""
from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a, b):
    # requires |a| >= |b| elementwise
    s = a + b
    err = b - (s - a)
    return s, err


def two_prod(a, b):
    p = a * b
    t = _SPLITTER * a
    ahi = t - (t - a)
    alo = a - ahi
    t = _SPLITTER * b
    bhi = t - (t - b)
    blo = b - bhi
    err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, err


def dd(hi, lo=None):
    hi = np.asarray(hi, dtype=np.float64)
    if lo is None:
        lo = np.zeros_like(hi)
    return hi, np.asarray(lo, dtype=np.float64)


def dd_add(x, y):
    s, e = two_sum(x[0], y[0])
    e = e + x[1] + y[1]
    return quick_two_sum(s, e)


def dd_mul(x, y):
    p, e = two_prod(x[0], y[0])
    e = e + x[0] * y[1] + x[1] * y[0]
    return quick_two_sum(p, e)


def dd_mul_d(x, d):
    p, e = two_prod(x[0], d)
    e = e + x[1] * d
    return quick_two_sum(p, e)


def dd_div_d(x, d):
    # d is an exact scalar (product of small integers)
    q1 = x[0] / d
    p, e = two_prod(q1, d)
    r = ((x[0] - p) - e + x[1]) / d
    return quick_two_sum(q1, r)


def dd_to_float(x):
    return x[0] + x[1]
