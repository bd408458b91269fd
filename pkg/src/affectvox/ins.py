"""Index of non-stationarity (INS) against phase-randomised surrogates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy import stats

from .emd import ImfSet

log = logging.getLogger(__name__)

KL_FLOOR = 1e-12
CONFIDENCE = 0.95
DEFAULT_SCALES = tuple(np.geomspace(0.0015, 0.5, 10))
MIN_WINDOW = 8


class UntestableSeries(ValueError):
    """Surrogate dispersion is zero, so no stationarity test is possible."""


@dataclass
class InsResult:
    ins: float
    gamma: float
    nonstationary: bool
    theta1: float
    theta0_mean: float
    window_len: int
    n_windows: int

    @property
    def verdict(self) -> str:
        return "non-stationary" if self.nonstationary else "stationary"


@dataclass
class InsProfile:
    scales: List[float]
    ins_values: List[float]
    gamma_thresholds: List[float]
    verdicts: List[str]
    surrogate_count: int
    theta1: List[float] = field(default_factory=list)
    theta0_mean: List[float] = field(default_factory=list)
    skipped_scales: List[float] = field(default_factory=list)
    untestable: bool = False

    def summary(self, how: str = "median") -> float:
        if not self.ins_values:
            return 0.0
        fn = {"median": np.median, "mean": np.mean, "max": np.max}[how]
        return float(fn(self.ins_values))


def _surrogate_spectra(x: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    n = x.size
    X = np.fft.rfft(x)
    phases = rng.uniform(-np.pi, np.pi, size=(count, X.size))
    S = np.abs(X)[None, :] * np.exp(1j * phases)
    # DC and (even-length) Nyquist bins must stay real; keep them as they are
    S[:, 0] = X[0]
    if n % 2 == 0:
        S[:, -1] = X[-1]
    return S


def make_surrogates(x, count: int, seed=None) -> np.ndarray:
    """``count`` phase-randomised copies of ``x`` as rows (same periodogram)."""
    x = np.asarray(x, dtype=float)
    if x.size < 4:
        raise ValueError("surrogates need at least 4 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    rng = np.random.default_rng(seed)
    return np.fft.irfft(_surrogate_spectra(x, rng, count), n=x.size, axis=-1)


def make_surrogate(x, seed=None) -> np.ndarray:
    return make_surrogates(x, 1, seed)[0]


def n_windows_for(length: int, window_len: int) -> int:
    return max(2, (2 * length) // window_len - 1)


def _unit_spectrum(spec: np.ndarray) -> np.ndarray:
    """Unit-sum spectrum with an epsilon floor per bin.

    Normalising before flooring keeps the result independent of signal
    level; an all-zero window becomes the uniform distribution.
    """
    tot = spec.sum(axis=-1, keepdims=True)
    p = np.divide(spec, tot, out=np.zeros_like(spec), where=tot > 0) + KL_FLOOR
    return p / p.sum(axis=-1, keepdims=True)


def spectral_kl_series(x, window_len: int, n_windows: int | None = None,
                       symmetric: bool = False) -> np.ndarray:
    """KL divergence of each short-time spectrum from the time-averaged one.

    ``x`` may be 2-D, in which case each row is an independent series and
    the result has one row of KL values per input row.
    """
    x = np.asarray(x, dtype=float)
    one_d = x.ndim == 1
    x = np.atleast_2d(x)
    length = x.shape[1]
    if window_len > length:
        raise ValueError(f"window of {window_len} samples exceeds series length {length}")
    if n_windows is None:
        n_windows = n_windows_for(length, window_len)
    if n_windows < 2:
        raise ValueError("at least two windows are required")
    starts = np.round(np.linspace(0, length - window_len, n_windows)).astype(int)
    idx = starts[:, None] + np.arange(window_len)[None, :]
    frames = x[:, idx] * np.hanning(window_len)
    spec = np.abs(np.fft.rfft(frames, axis=-1)) ** 2
    p = _unit_spectrum(spec)
    q = _unit_spectrum(spec.mean(axis=1, keepdims=True))
    kl = np.sum(p * np.log(p / q), axis=-1)
    if symmetric:
        kl = kl + np.sum(q * np.log(q / p), axis=-1)
    kl = np.maximum(kl, 0.0)
    return kl[0] if one_d else kl


def gamma_threshold(theta0: np.ndarray, confidence: float = CONFIDENCE) -> float:
    """sqrt of the upper quantile of a moment-fitted Gamma on normalised Theta0."""
    z = theta0 / theta0.mean()
    v = np.var(z, ddof=1)
    if not v > 0:
        return 1.0
    shape, scale = 1.0 / v, v  # mean of z is exactly one
    return float(np.sqrt(stats.gamma.ppf(confidence, shape, scale=scale)))


def compute_ins(x, scale: float, n_surrogates: int = 50, seed=None,
                confidence: float = CONFIDENCE, symmetric: bool = False) -> InsResult:
    """INS of ``x`` at window ratio ``scale`` and its Gamma-based threshold.

    INS = sqrt(Theta1 / <Theta0>), Theta being the variance over time of
    the spectral KL series of the signal (1) or of a surrogate (0).
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    window_len = int(round(scale * x.size))
    if window_len < MIN_WINDOW:
        raise ValueError(f"window of {window_len} samples is below the minimum of {MIN_WINDOW}")
    if n_surrogates < 8:
        raise ValueError("at least 8 surrogates are required")
    n_win = n_windows_for(x.size, window_len)
    surr = make_surrogates(x, n_surrogates, seed)
    kl = spectral_kl_series(np.vstack([x[None, :], surr]), window_len, n_win, symmetric)
    theta = kl.var(axis=1)
    theta1, theta0 = theta[0], theta[1:]
    t0 = theta0.mean()
    if not t0 > 1e-30:
        raise UntestableSeries("surrogate KL dispersion is zero")
    ins = float(np.sqrt(theta1 / t0))
    gam = gamma_threshold(theta0, confidence)
    return InsResult(ins, gam, ins > gam, float(theta1), float(t0), window_len, n_win)


def _seed_seq(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def ins_profile(x, scales: Sequence[float] = DEFAULT_SCALES, n_surrogates: int = 50,
                seed=None, symmetric: bool = False) -> InsProfile:
    """Sweep ``compute_ins`` over window ratios; infeasible ratios are skipped."""
    x = np.asarray(x, dtype=float)
    scales = sorted(float(s) for s in scales)
    seeds = _seed_seq(seed).spawn(len(scales))
    prof = InsProfile([], [], [], [], n_surrogates)
    for s, ss in zip(scales, seeds):
        if int(round(s * x.size)) < MIN_WINDOW:
            prof.skipped_scales.append(s)
            continue
        try:
            r = compute_ins(x, s, n_surrogates, ss, symmetric=symmetric)
        except UntestableSeries:
            prof.untestable = True
            r = InsResult(0.0, 1.0, False, 0.0, 0.0, int(round(s * x.size)), 0)
        prof.scales.append(s)
        prof.ins_values.append(r.ins)
        prof.gamma_thresholds.append(r.gamma)
        prof.verdicts.append(r.verdict if not prof.untestable else "untestable")
        prof.theta1.append(r.theta1)
        prof.theta0_mean.append(r.theta0_mean)
    if prof.skipped_scales:
        log.debug("skipped %d infeasible INS scales for length %d", len(prof.skipped_scales), x.size)
    return prof


def ins_vector_for_imfs(imfs: ImfSet, scales: Sequence[float] = DEFAULT_SCALES,
                        n_surrogates: int = 50, seed=None) -> List[InsProfile]:
    """One INS profile per mode slot; padded (all-zero) modes are untestable with INS 0."""
    seeds = _seed_seq(seed).spawn(imfs.modes.shape[0])
    out = []
    for m, ss in enumerate(seeds):
        mode = imfs.modes[m]
        if not np.any(mode):
            feasible = [s for s in sorted(scales) if int(round(s * mode.size)) >= MIN_WINDOW]
            skipped = [s for s in sorted(scales) if s not in feasible]
            n = len(feasible)
            out.append(InsProfile(feasible, [0.0] * n, [1.0] * n, ["untestable"] * n,
                                  n_surrogates, [0.0] * n, [0.0] * n, skipped, untestable=True))
            continue
        out.append(ins_profile(mode, scales, n_surrogates, ss))
    return out
