"""Synthetic signal generators: fractional Gaussian noise and test corpora."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy import signal as sps

from .signal_io import CorpusManifest, ManifestEntry, Signal, write_manifest, write_wav

log = logging.getLogger(__name__)


def fgn_autocovariance(h: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    return 0.5 * (np.abs(k + 1) ** (2 * h) - 2 * np.abs(k) ** (2 * h) + np.abs(k - 1) ** (2 * h))


def fgn(n: int, h: float, rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Unit-variance fractional Gaussian noise by circulant embedding of its autocovariance."""
    if not 0 < h < 1:
        raise ValueError("Hurst exponent must lie in (0, 1)")
    rng = np.random.default_rng(rng)
    m = 2 * n
    gam = fgn_autocovariance(h, n + 1)
    row = np.concatenate([gam, gam[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise ArithmeticError("circulant embedding is not non-negative definite")
    lam = np.clip(lam, 0.0, None)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    w = np.fft.fft(np.sqrt(lam / m) * z)
    return w.real[:n]


@dataclass
class LabelSpec:
    """Generative recipe for one synthetic emotion label."""

    hurst: float
    am_rate_hz: float = 0.0      # amplitude-modulation rate
    am_depth: float = 0.0        # 0 = steady, 1 = fully gated bursts
    tones: Tuple[Tuple[float, float], ...] = ()  # (freq Hz, amplitude re carrier std)
    level: float = 0.25


DEFAULT_LABELS: Dict[str, LabelSpec] = {
    "high_arousal": LabelSpec(hurst=0.3, am_rate_hz=6.0, am_depth=0.8,
                              tones=((220.0, 0.2), (440.0, 0.1))),
    "low_arousal": LabelSpec(hurst=0.8, am_rate_hz=1.5, am_depth=0.2,
                             tones=((120.0, 0.2),)),
}


def am_envelope(n: int, rate: int, spec: LabelSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.am_depth <= 0 or spec.am_rate_hz <= 0:
        return np.ones(n)
    t = np.arange(n) / rate
    phase = rng.uniform(0, 2 * np.pi)
    m = 0.5 * (1 + np.sin(2 * np.pi * spec.am_rate_hz * t + phase))
    return 1.0 - spec.am_depth + spec.am_depth * m ** 2


def render_label(spec: LabelSpec, seconds: float, rate: int, rng: np.random.Generator,
                 gain: float = 1.0, tilt: float = 0.0) -> np.ndarray:
    n = int(round(seconds * rate))
    carrier = fgn(n, spec.hurst, rng)
    t = np.arange(n) / rate
    x = carrier.copy()
    for f, a in spec.tones:
        x += a * np.sqrt(2) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    x *= am_envelope(n, rate, spec, rng)
    if tilt:
        # first-order spectral tilt, unit DC gain
        x = sps.lfilter([1.0, tilt], [1.0 + tilt], x)
    x *= spec.level * gain / max(np.std(x), 1e-12)
    return np.clip(x, -0.999, 0.999)


def synth_corpus(out_dir, labels: Dict[str, LabelSpec] | None = None, n_speakers: int = 4,
                 seconds_per_label: float = 60.0, seed: int = 0, rate: int = 8000,
                 gain_range: Tuple[float, float] = (0.6, 1.4), max_tilt: float = 0.2) -> CorpusManifest:
    """Write one WAV per (speaker, label) plus ``manifest.csv`` under ``out_dir``.

    Each pseudo-speaker gets a random gain and first-order filter tilt so
    that classes are not separable by level alone.
    """
    labels = dict(DEFAULT_LABELS if labels is None else labels)
    if len(labels) < 2:
        raise ValueError("a corpus needs at least two labels")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(seed)
    spk_seqs = root.spawn(n_speakers)
    entries = []
    for s, sseq in enumerate(spk_seqs):
        srng = np.random.default_rng(sseq)
        gain = float(srng.uniform(*gain_range))
        tilt = float(srng.uniform(-max_tilt, max_tilt))
        label_seqs = sseq.spawn(len(labels))
        for (name, spec), lseq in zip(sorted(labels.items()), label_seqs):
            x = render_label(spec, seconds_per_label, rate, np.random.default_rng(lseq), gain, tilt)
            path = out / f"spk{s:02d}_{name}.wav"
            write_wav(path, Signal(x, rate))
            entries.append(ManifestEntry(str(path.resolve()), name, f"spk{s:02d}"))
    manifest = CorpusManifest(entries)
    write_manifest(manifest, out / "manifest.csv", relative_to=out.resolve())
    return manifest
