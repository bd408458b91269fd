"""Wavelet-based Hurst exponent estimation and the frame-wise pH feature."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .signal_io import FeatureMatrix, Signal, frame_signal
from .wavelets import periodic_dwt

log = logging.getLogger(__name__)

H_MIN, H_MAX = 0.01, 0.99


@dataclass
class ScaleVariance:
    j: int
    n_coeffs: int
    variance: float

    @property
    def log2_variance(self) -> float:
        return float(np.log2(self.variance)) if self.variance > 0 else -np.inf


@dataclass
class HurstEstimate:
    h: float
    theta: float
    scales_used: Tuple[int, int] | None
    log_variances: List[Tuple[int, int, float]] = field(default_factory=list)
    valid: bool = True
    clamped: bool = False


def wavelet_log_variances(x, j_min: int = 1, j_max: int = 12, n_taps: int = 12) -> List[ScaleVariance]:
    """Mean squared detail coefficient at each dyadic scale in [j_min, j_max].

    Scales the periodic pyramid cannot reach with at least two
    coefficients are silently left out, so the returned range may stop
    short of ``j_max``.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2 ** (j_min + 1):
        raise ValueError(f"series of length {x.size} is too short for scale {j_min}")
    details, _ = periodic_dwt(x, max_level=j_max, n_taps=n_taps)
    out = []
    for j, d in enumerate(details, start=1):
        if j < j_min or d.size < 2:
            continue
        out.append(ScaleVariance(j, d.size, float(np.mean(d ** 2))))
    if out and out[-1].j < j_max and log.isEnabledFor(logging.DEBUG):
        log.debug("length %d: scales truncated to %d..%d (requested up to %d)",
                  x.size, out[0].j, out[-1].j, j_max)
    return out


def estimate_hurst(variances: Sequence[ScaleVariance]) -> HurstEstimate:
    """Weighted regression of log2 variance on scale; H = (1 + slope) / 2.

    Weights are the coefficient counts. Fewer than two scales with
    positive variance gives ``valid=False`` and H = 0.5.
    """
    pts = [v for v in variances if v.variance > 0 and np.isfinite(v.variance)]
    diag = [(v.j, v.n_coeffs, v.log2_variance) for v in variances]
    if len(pts) < 2:
        return HurstEstimate(0.5, 0.0, None, diag, valid=False)
    j = np.array([v.j for v in pts], dtype=float)
    y = np.array([v.log2_variance for v in pts])
    w = np.array([v.n_coeffs for v in pts], dtype=float)
    jm = np.sum(w * j) / w.sum()
    ym = np.sum(w * y) / w.sum()
    sjj = np.sum(w * (j - jm) ** 2)
    if sjj == 0:
        return HurstEstimate(0.5, 0.0, None, diag, valid=False)
    theta = float(np.sum(w * (j - jm) * (y - ym)) / sjj)
    h = (1.0 + theta) / 2.0
    clamped = not (H_MIN <= h <= H_MAX)
    return HurstEstimate(float(np.clip(h, H_MIN, H_MAX)), theta,
                         (int(j.min()), int(j.max())), diag, valid=True, clamped=clamped)


def hurst(x, j_min: int = 3, j_max: int = 12) -> HurstEstimate:
    """Convenience wrapper: variances then regression."""
    return estimate_hurst(wavelet_log_variances(x, j_min, j_max))


def frame_hurst(frames: np.ndarray, j_min: int, j_max: int = 12) -> np.ndarray:
    """Hurst estimate per row; NaN where the estimate is invalid."""
    out = np.full(frames.shape[0], np.nan)
    for i, fr in enumerate(frames):
        est = hurst(fr, j_min, j_max)
        if est.valid:
            out[i] = est.h
    return out


def extract_ph(signal: Signal, frame_ms: float = 50.0, hop_ms: float = 10.0,
               j_min: int = 2, j_max: int = 12, source: str = "") -> FeatureMatrix:
    """pH baseline: one Hurst exponent per 50 ms frame taken every 10 ms."""
    rate = signal.sample_rate_hz
    flen = int(round(frame_ms * rate / 1000))
    hop = int(round(hop_ms * rate / 1000))
    if len(signal) < flen:
        raise ValueError(f"signal of {len(signal)} samples is shorter than one {frame_ms} ms frame")
    frames = frame_signal(signal.samples, flen, hop)
    h = frame_hurst(frames, j_min, j_max)
    ids = []
    for i, v in enumerate(h):
        tag = f"{source}#{i}"
        if np.isnan(v):
            tag += ";invalid"
        ids.append(tag)
    h = np.where(np.isnan(h), 0.5, h)
    return FeatureMatrix(h[:, None], ["pH"], ids)
