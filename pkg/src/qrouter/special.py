"""Zeroth-order Bessel function of the first kind and its zeros.

Three regimes keep the absolute error below 1e-12 on the whole real line:

* ``|x| <= 8``: the ascending power series,
* ``8 < |x| <= 25``: Miller's backward recurrence normalised with
  ``J0 + 2 * sum(J_2k) = 1``,
* ``|x| > 25``: the Hankel asymptotic expansion, truncated at its smallest term.

The asymptotic series alone cannot reach 1e-12 just above ``x = 8`` (its
smallest term there is ~1e-7), which is why the middle regime exists.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = ["bessel_j0", "bessel_j1", "j0_zeros", "XI0", "nearest_j0_zero"]

_SERIES_LIMIT = 8.0
_ASYMPTOTIC_LIMIT = 25.0


def _j0_series(x: float) -> float:
    q = 0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= -q / (k * k)
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)) and k > q:
            return total


def _j1_series(x: float) -> float:
    q = 0.25 * x * x
    term = 0.5 * x
    total = term
    k = 0
    while True:
        k += 1
        term *= -q / (k * (k + 1))
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)) and k > q:
            return total


def _miller(x: float) -> tuple[float, float]:
    """J0 and J1 by downward recurrence from an order well above ``x``."""
    top = 2 * ((int(x) + 40) // 2)
    j_next, j_cur = 0.0, 1e-30
    norm = 0.0
    j1 = 0.0
    for k in range(top, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        # j_cur now holds the unnormalised J_{k-1}
        if k - 1 == 1:
            j1 = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        if abs(j_cur) > 1e200:
            j_next *= 1e-200
            j_cur *= 1e-200
            norm *= 1e-200
            j1 *= 1e-200
    norm += j_cur
    return j_cur / norm, j1 / norm


def _hankel_pq(x: float, order: int) -> tuple[float, float]:
    mu = 4.0 * order * order
    p = 0.0
    q = 0.0
    a = 1.0
    k = 0
    last = math.inf
    while True:
        term = a / x**k
        if abs(term) >= last or abs(term) < 1e-18:
            break
        last = abs(term)
        sign = (-1) ** (k // 2)
        if k % 2 == 0:
            p += sign * term
        else:
            q += sign * term
        k += 1
        a *= (mu - (2 * k - 1) ** 2) / (k * 8.0)
    return p, q


def _j_asymptotic(x: float, order: int) -> float:
    p, q = _hankel_pq(x, order)
    chi = x - (0.5 * order + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def _j0_scalar(x: float) -> float:
    ax = abs(float(x))
    if not math.isfinite(ax):
        raise ValueError(f"bessel_j0 needs a finite argument, got {x!r}")
    if ax <= _SERIES_LIMIT:
        return _j0_series(ax)
    if ax <= _ASYMPTOTIC_LIMIT:
        return _miller(ax)[0]
    return _j_asymptotic(ax, 0)


def _j1_scalar(x: float) -> float:
    ax = abs(float(x))
    sign = -1.0 if x < 0 else 1.0
    if ax <= _SERIES_LIMIT:
        return sign * _j1_series(ax)
    if ax <= _ASYMPTOTIC_LIMIT:
        return sign * _miller(ax)[1]
    return sign * _j_asymptotic(ax, 1)


def bessel_j0(x):
    """Zeroth-order Bessel function of the first kind.

    Accepts a scalar or an array; returns the same shape. Even in ``x``.
    """
    if np.ndim(x) == 0:
        return _j0_scalar(x)
    arr = np.asarray(x, dtype=float)
    return np.array([_j0_scalar(v) for v in arr.ravel()]).reshape(arr.shape)


def bessel_j1(x):
    """First-order Bessel function of the first kind (odd in ``x``)."""
    if np.ndim(x) == 0:
        return _j1_scalar(x)
    arr = np.asarray(x, dtype=float)
    return np.array([_j1_scalar(v) for v in arr.ravel()]).reshape(arr.shape)


def _newton_zero(seed: float) -> float:
    x = seed
    for _ in range(50):
        step = _j0_scalar(x) / _j1_scalar(x)  # d/dx J0 = -J1
        x += step
        if abs(step) < 1e-15 * x:
            break
    return x


def j0_zeros(count: int) -> np.ndarray:
    """The first ``count`` positive zeros of J0, Newton-polished from McMahon seeds."""
    out = np.empty(count)
    for k in range(1, count + 1):
        beta = (k - 0.25) * math.pi
        seed = beta + 1.0 / (8.0 * beta)
        out[k - 1] = _newton_zero(seed)
    return out


def nearest_j0_zero(x: float) -> float:
    """The zero of J0 closest to ``|x|``."""
    ax = abs(x)
    zeros = j0_zeros(int(ax / math.pi) + 3)
    return float(zeros[np.argmin(np.abs(zeros - ax))])


XI0: float = _newton_zero(2.4048)
"""Smallest positive zero of J0 (2.404825557695773...)."""
