"""Empirical mode decomposition (EMD) and its noise-assisted ensemble (EEMD)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np
from scipy.interpolate import PPoly
from scipy.linalg import solve_banded

log = logging.getLogger(__name__)


class TooFewExtrema(ValueError):
    """The series is (close to) monotonic; sifting cannot build envelopes."""


@dataclass(frozen=True)
class SiftConfig:
    max_imfs: int = 6
    max_sift_iters: int = 50
    sd_threshold: float = 0.2
    ensemble_trials: int = 100
    noise_std: float = 0.01
    rng_seed: int = 0
    # stop once the residual carries less than this fraction of the input energy
    resid_energy_tol: float = 1e-6

    def __post_init__(self):
        if self.max_imfs < 1:
            raise ValueError("max_imfs must be >= 1")
        if self.sd_threshold <= 0:
            raise ValueError("sd_threshold must be > 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.ensemble_trials < 1:
            raise ValueError("ensemble_trials must be >= 1")
        if self.max_sift_iters < 1:
            raise ValueError("max_sift_iters must be >= 1")


@dataclass
class ImfSet:
    """Modes ordered fastest first, zero-padded to a fixed count.

    ``n_natural`` counts the modes the decomposition actually produced; the
    remaining rows of ``modes`` are all-zero padding.
    """

    modes: np.ndarray
    residual: np.ndarray
    n_natural: int

    @property
    def input_len(self) -> int:
        return self.residual.size

    def reconstruct(self) -> np.ndarray:
        return self.modes.sum(axis=0) + self.residual

    def is_padding(self, m: int) -> bool:
        return m >= self.n_natural or not np.any(self.modes[m])


# --------------------------------------------------------------------------
# extrema and envelopes


def local_extrema(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Indices of interior minima and maxima; a flat run counts once, at its middle."""
    d = np.diff(x)
    nz = np.flatnonzero(d)
    if nz.size < 2:
        return np.empty(0, int), np.empty(0, int)
    s = np.sign(d[nz])
    turn = np.flatnonzero(s[:-1] != s[1:])
    # extremum sits between sample nz[k] + 1 and nz[k + 1]
    pos = (nz[turn] + 1 + nz[turn + 1]) // 2
    is_max = s[turn] > 0
    return pos[~is_max], pos[is_max]


def count_zero_crossings(x: np.ndarray) -> int:
    s = np.signbit(x[x != 0])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def is_imf(x: np.ndarray) -> bool:
    imin, imax = local_extrema(x)
    return abs(imin.size + imax.size - count_zero_crossings(x)) <= 1


def refine_extrema(x: np.ndarray, idx: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sub-sample position and value of extrema from a three-point parabola."""
    idx = idx[(idx > 0) & (idx < x.size - 1)]
    ym, y0, yp = x[idx - 1], x[idx], x[idx + 1]
    den = ym - 2 * y0 + yp
    safe = np.where(den != 0, den, 1.0)
    delta = np.where(den != 0, 0.5 * (ym - yp) / safe, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    return idx + delta, y0 - 0.25 * (ym - yp) * delta


def _left_mirror(tmin, zmin, tmax, zmax, x0, nbsym):
    """Mirror the nearest extrema across the left boundary (t = 0).

    The symmetry axis is the first extremum when the end sample lies
    inside the envelopes, the end sample itself otherwise.
    """
    if tmax[0] < tmin[0]:
        if x0 > zmin[0]:
            lmax = slice(1, nbsym + 1), None
            lmin = slice(0, nbsym), None
            lsym = tmax[0]
        else:
            lmax = slice(0, nbsym), None
            lmin = slice(0, nbsym - 1), "end"
            lsym = 0.0
    else:
        if x0 < zmax[0]:
            lmax = slice(0, nbsym), None
            lmin = slice(1, nbsym + 1), None
            lsym = tmin[0]
        else:
            lmax = slice(0, nbsym - 1), "end"
            lmin = slice(0, nbsym), None
            lsym = 0.0

    def pick(t, z, sel):
        sl, end = sel
        tt, zz = t[sl][::-1], z[sl][::-1]
        if end:
            tt, zz = np.append(tt, 0.0), np.append(zz, x0)
        return tt, zz

    tl_min, zl_min = pick(tmin, zmin, lmin)
    tl_max, zl_max = pick(tmax, zmax, lmax)
    mtmin, mtmax = 2 * lsym - tl_min, 2 * lsym - tl_max
    # mirrored knots must reach past the boundary, else fall back to the end sample
    if (mtmin.size and mtmin[0] > 0) or (mtmax.size and mtmax[0] > 0):
        if lsym == tmax[0]:
            tl_max, zl_max = pick(tmax, zmax, (slice(0, nbsym), None))
        else:
            tl_min, zl_min = pick(tmin, zmin, (slice(0, nbsym), None))
        mtmin, mtmax = -tl_min, -tl_max
    return mtmin, zl_min, mtmax, zl_max


def envelope_knots(x: np.ndarray, nbsym: int = 2):
    imin, imax = local_extrema(x)
    if imin.size < 1 or imax.size < 1:
        raise TooFewExtrema("too few extrema")
    n = x.size
    tmin, zmin = refine_extrema(x, imin)
    tmax, zmax = refine_extrema(x, imax)
    lt_min, lz_min, lt_max, lz_max = _left_mirror(tmin, zmin, tmax, zmax, x[0], nbsym)
    # right boundary: same rule on the time-reversed knots
    r = n - 1
    rt_min, rz_min, rt_max, rz_max = _left_mirror(
        r - tmin[::-1], zmin[::-1], r - tmax[::-1], zmax[::-1], x[-1], nbsym)
    knots_min = (np.concatenate([lt_min, tmin, (r - rt_min)[::-1]]),
                 np.concatenate([lz_min, zmin, rz_min[::-1]]))
    knots_max = (np.concatenate([lt_max, tmax, (r - rt_max)[::-1]]),
                 np.concatenate([lz_max, zmax, rz_max[::-1]]))
    return knots_min, knots_max


def _spline(t, z, n):
    t, idx = np.unique(t, return_index=True)
    z = z[idx]
    if t.size < 2:
        raise TooFewExtrema("too few extrema")
    if t.size == 2:
        # natural spline through two knots is the straight line
        return z[0] + (z[1] - z[0]) * (np.arange(n) - t[0]) / (t[1] - t[0])
    return natural_spline(t, z)(np.arange(n))


def natural_spline(t: np.ndarray, z: np.ndarray) -> PPoly:
    """Natural cubic spline through strictly increasing knots ``t``.

    Equals ``CubicSpline(t, z, bc_type="natural")``; building the
    piecewise polynomial directly skips input validation that otherwise
    dominates the sifting loop.
    """
    h = np.diff(t)
    slope = np.diff(z) / h
    m = np.zeros(t.size)  # second derivatives, zero at both ends
    ab = np.zeros((3, t.size - 2))
    ab[0, 1:] = h[1:-1]
    ab[1] = 2.0 * (h[:-1] + h[1:])
    ab[2, :-1] = h[1:-1]
    m[1:-1] = solve_banded((1, 1), ab, 6.0 * np.diff(slope), check_finite=False)
    coef = np.vstack([np.diff(m) / (6.0 * h), m[:-1] / 2.0,
                      slope - h * (2.0 * m[:-1] + m[1:]) / 6.0, z[:-1]])
    return PPoly.construct_fast(coef, t)


def sift_once(x) -> Tuple[np.ndarray, np.ndarray]:
    """One sifting step: returns (detail, trend) with trend the envelope mean."""
    x = np.asarray(x, dtype=float)
    if x.size < 4:
        raise TooFewExtrema("series shorter than 4 samples")
    (tmin, zmin), (tmax, zmax) = envelope_knots(x)
    e_lo = _spline(tmin, zmin, x.size)
    e_up = _spline(tmax, zmax, x.size)
    trend = 0.5 * (e_up + e_lo)
    return x - trend, trend


# --------------------------------------------------------------------------
# decompositions


def _sift_imf(r: np.ndarray, cfg: SiftConfig) -> np.ndarray:
    h = r
    for _ in range(cfg.max_sift_iters):
        try:
            new, _ = sift_once(h)
        except TooFewExtrema:
            break
        denom = np.sum(h * h)
        sd = np.sum((h - new) ** 2) / denom if denom > 0 else 0.0
        h = new
        if sd < cfg.sd_threshold and is_imf(h):
            break
    return h


def emd_decompose(x, cfg: SiftConfig = SiftConfig()) -> ImfSet:
    """Sift out up to ``cfg.max_imfs`` modes; missing ones are zero rows."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    if x.size < 16:
        raise ValueError("EMD needs at least 16 samples")
    modes = np.zeros((cfg.max_imfs, x.size))
    r = x.copy()
    energy = np.sum(x * x)
    n = 0
    while n < cfg.max_imfs:
        if np.sum(r * r) <= cfg.resid_energy_tol * energy:
            break
        imin, imax = local_extrema(r)
        if imin.size < 1 or imax.size < 1 or imin.size + imax.size < 2:
            break
        imf = _sift_imf(r, cfg)
        modes[n] = imf
        r = r - imf
        n += 1
    return ImfSet(modes, r, n)


def eemd_decompose(x, cfg: SiftConfig = SiftConfig()) -> ImfSet:
    """Average the modes of ``ensemble_trials`` noise-perturbed decompositions.

    Trial i adds white Gaussian noise of std ``noise_std * std(x)`` drawn
    from the i-th child of ``SeedSequence(rng_seed)``. The residual is the
    complement ``x - sum(modes)``. Averaged modes are not individually
    guaranteed to pass the IMF test.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    if cfg.ensemble_trials == 1 and cfg.noise_std == 0:
        return emd_decompose(x, cfg)
    sigma = cfg.noise_std * np.std(x)
    acc = np.zeros((cfg.max_imfs, x.size))
    n_nat = 0
    for child in np.random.SeedSequence(cfg.rng_seed).spawn(cfg.ensemble_trials):
        w = np.random.default_rng(child).standard_normal(x.size) * sigma
        trial = emd_decompose(x + w, cfg)
        acc += trial.modes
        n_nat = max(n_nat, trial.n_natural)
    modes = acc / cfg.ensemble_trials
    return ImfSet(modes, x - modes.sum(axis=0), n_nat)


def decompose(x, cfg: SiftConfig = SiftConfig(), use_eemd: bool = True) -> ImfSet:
    return eemd_decompose(x, cfg) if use_eemd else emd_decompose(x, cfg)


def with_seed(cfg: SiftConfig, seed: int) -> SiftConfig:
    return replace(cfg, rng_seed=int(seed))
