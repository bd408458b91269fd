"""HHHC feature extraction: per-segment EMD/EEMD, per-mode Hurst, optional INS."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

from .emd import ImfSet, SiftConfig, decompose
from .hurst import frame_hurst
from .ins import DEFAULT_SCALES, ins_vector_for_imfs
from .signal_io import FeatureMatrix, Signal, frame_signal

log = logging.getLogger(__name__)

SEGMENT_MS = 80.0
SEGMENT_HOP_MS = 40.0
HURST_FRAME_MS = 20.0
HURST_J_MIN = 3
HURST_J_MAX = 12
MISSING_H = 0.5


@dataclass(frozen=True)
class InsConfig:
    scales: Tuple[float, ...] = DEFAULT_SCALES
    n_surrogates: int = 50
    summary: str = "median"
    full: bool = False


def hhhc_schema(n_imfs: int) -> List[str]:
    return [f"H_imf{m + 1}" for m in range(n_imfs)]


def ins_schema(n_imfs: int, ins_cfg: InsConfig) -> List[str]:
    if ins_cfg.full:
        return [f"INS_imf{m + 1}_s{k + 1}" for m in range(n_imfs) for k in range(len(ins_cfg.scales))]
    return [f"INS_imf{m + 1}" for m in range(n_imfs)]


def segment_bounds(n: int, rate: int) -> List[Tuple[int, int]]:
    seg = int(round(SEGMENT_MS * rate / 1000))
    hop = int(round(SEGMENT_HOP_MS * rate / 1000))
    if n < seg:
        return []
    return [(s, s + seg) for s in range(0, n - seg + 1, hop)]


def _segment_seeds(seed: int, count: int) -> List[int]:
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(count)]


def imf_hurst(imfs: ImfSet, frame_len: int) -> Tuple[np.ndarray, List[int]]:
    """Mean Hurst exponent over the valid frames of each mode slot.

    Slots with no valid frame (padding, or too flat to regress) get 0.5 and
    are listed in the returned ``missing`` indices.
    """
    h = np.empty(imfs.modes.shape[0])
    missing = []
    for m, mode in enumerate(imfs.modes):
        if not np.any(mode):
            h[m] = MISSING_H
            missing.append(m)
            continue
        vals = frame_hurst(frame_signal(mode, frame_len, frame_len), HURST_J_MIN, HURST_J_MAX)
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            h[m] = MISSING_H
            missing.append(m)
        else:
            h[m] = vals.mean()
    return h, missing


def _segment_row(args):
    seg, rate, cfg, use_eemd, ins_cfg, ins_seed = args
    imfs = decompose(seg, cfg, use_eemd)
    h, missing = imf_hurst(imfs, int(round(HURST_FRAME_MS * rate / 1000)))
    row = list(h)
    if ins_cfg is not None:
        profiles = ins_vector_for_imfs(imfs, ins_cfg.scales, ins_cfg.n_surrogates, ins_seed)
        for prof in profiles:
            if ins_cfg.full:
                by_scale = dict(zip(prof.scales, prof.ins_values))
                # infeasible window ratios are recorded as 0
                row.extend(by_scale.get(s, 0.0) for s in sorted(ins_cfg.scales))
            else:
                row.append(prof.summary(ins_cfg.summary))
    return row, missing


def _extract(signal: Signal, cfg: SiftConfig, use_eemd: bool, ins_cfg: InsConfig | None,
             source: str, jobs: int) -> FeatureMatrix:
    bounds = segment_bounds(len(signal), signal.sample_rate_hz)
    if not bounds:
        raise ValueError(f"signal of {len(signal)} samples is shorter than one {SEGMENT_MS:g} ms segment")
    seeds = _segment_seeds(cfg.rng_seed, len(bounds))
    tasks = [(signal.samples[a:b], signal.sample_rate_hz, replace(cfg, rng_seed=s), use_eemd,
              ins_cfg, s) for (a, b), s in zip(bounds, seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_segment_row, tasks, chunksize=8))
    else:
        results = [_segment_row(t) for t in tasks]
    schema = hhhc_schema(cfg.max_imfs)
    if ins_cfg is not None:
        schema += ins_schema(cfg.max_imfs, ins_cfg)
    ids = []
    for k, (_, missing) in enumerate(results):
        tag = f"{source}#{k}"
        if missing:
            tag += ";default_h=" + "|".join(f"imf{m + 1}" for m in missing)
        ids.append(tag)
    return FeatureMatrix(np.array([r for r, _ in results]), schema, ids)


def extract_hhhc(signal: Signal, cfg: SiftConfig = SiftConfig(), use_eemd: bool = True,
                 source: str = "", jobs: int = 1) -> FeatureMatrix:
    """Six Hurst means (one per mode) for each 80 ms segment, hop 40 ms.

    Each segment is decomposed independently; within a mode the exponent
    is estimated on non-overlapping 20 ms frames (scales from 3 up to what
    the frame length allows) and averaged.
    """
    return _extract(signal, cfg, use_eemd, None, source, jobs)


def extract_hhhc_ins(signal: Signal, cfg: SiftConfig = SiftConfig(),
                     ins_cfg: InsConfig = InsConfig(), use_eemd: bool = True,
                     source: str = "", jobs: int = 1) -> FeatureMatrix:
    """HHHC columns followed by per-mode INS summaries (or all per-scale values)."""
    return _extract(signal, cfg, use_eemd, ins_cfg, source, jobs)


def column_means(fm: FeatureMatrix, columns: Sequence[str] | None = None) -> np.ndarray:
    cols = fm.schema if columns is None else list(columns)
    idx = [fm.schema.index(c) for c in cols]
    return fm.rows[:, idx].mean(axis=0)
