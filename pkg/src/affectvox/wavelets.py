"""Orthogonal Daubechies filters and a periodic pyramid DWT."""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np


@lru_cache(maxsize=None)
def daubechies_lowpass(n_taps: int = 12) -> np.ndarray:
    """Minimum-phase Daubechies scaling filter with ``n_taps`` coefficients.

    Built by spectral factorisation of the half-band product filter, the
    same construction used by the classic ``daub`` routine. Coefficients
    sum to sqrt(2) and are orthonormal under even shifts.
    """
    if n_taps < 2 or n_taps % 2:
        raise ValueError("Daubechies filters have an even number of taps >= 2")
    p = n_taps // 2
    if p == 1:
        return np.array([1.0, 1.0]) / np.sqrt(2.0)
    P = [comb(p - 1 + k, k) for k in range(p)][::-1]
    yj = np.roots(P)
    c = np.poly1d([1, 1]) ** p
    q = np.poly1d([1])
    for k in range(p - 1):
        y = yj[k]
        part = 2 * np.sqrt(y * (y - 1))
        const = 1 - 2 * y
        z1 = const + part
        if abs(z1) < 1:
            z1 = const - part
        q = q * [1, -z1]
    q = c * np.real(q)
    q = q / np.sum(q) * np.sqrt(2)
    return np.asarray(q.c[::-1], dtype=float)


@lru_cache(maxsize=None)
def quadrature_mirror(n_taps: int = 12) -> np.ndarray:
    h = daubechies_lowpass(n_taps)
    L = h.size
    return np.array([(-1) ** n * h[L - 1 - n] for n in range(L)])


def _analysis_step(a: np.ndarray, h: np.ndarray, g: np.ndarray):
    n = a.size
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(h.size)[None, :]) % n
    win = a[idx]
    return win @ h, win @ g


def periodic_dwt(x: np.ndarray, max_level: int | None = None, n_taps: int = 12):
    """Detail coefficients per level, finest first.

    Decomposition continues while the approximation has even length and the
    next level would still hold at least two detail coefficients, so level j
    carries exactly ``len(x) / 2**j`` coefficients.
    """
    h = daubechies_lowpass(n_taps)
    g = quadrature_mirror(n_taps)
    a = np.asarray(x, dtype=float)
    details = []
    while a.size % 2 == 0 and a.size >= 4:
        if max_level is not None and len(details) >= max_level:
            break
        a, d = _analysis_step(a, h, g)
        details.append(d)
    return details, a
