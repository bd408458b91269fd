"""WAV ingestion, 8 kHz resampling, voiced-frame selection and CSV persistence."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np
from scipy import signal as sps

TARGET_RATE = 8000

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class AudioFormatError(ValueError):
    """Unreadable or unsupported WAV data."""


class NoVoicedFramesError(ValueError):
    """Voiced-frame selection kept nothing; callers may relax the quantiles."""


class SchemaError(ValueError):
    """Feature CSV whose rows do not match its header."""


@dataclass
class Signal:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.samples.size < 1:
            raise ValueError("signal is empty")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("signal contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class FeatureMatrix:
    """Per-segment feature vectors with named columns.

    ``source_ids`` carries one free-text provenance tag per row (file and
    segment index, plus quality flags when a slot had to be defaulted).
    """

    rows: np.ndarray
    schema: List[str]
    source_ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if self.rows.size == 0:
            self.rows = self.rows.reshape(0, len(self.schema))
        self.schema = list(self.schema)
        if self.rows.shape[1] != len(self.schema):
            raise SchemaError(
                f"row length {self.rows.shape[1]} does not match schema length {len(self.schema)}")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("feature matrix contains non-finite entries")
        if not self.source_ids:
            self.source_ids = [""] * self.rows.shape[0]
        if len(self.source_ids) != self.rows.shape[0]:
            raise SchemaError("one source id per row is required")

    @property
    def dim(self) -> int:
        return len(self.schema)

    def __len__(self):
        return self.rows.shape[0]

    @classmethod
    def concat(cls, mats: Sequence["FeatureMatrix"]) -> "FeatureMatrix":
        if not mats:
            raise ValueError("nothing to concatenate")
        schema = mats[0].schema
        for m in mats[1:]:
            if m.schema != schema:
                raise SchemaError("cannot concatenate matrices with different schemas")
        rows = np.vstack([m.rows for m in mats])
        ids = [s for m in mats for s in m.source_ids]
        return cls(rows, schema, ids)


@dataclass
class ManifestEntry:
    path: str
    label: str
    speaker: str


@dataclass
class CorpusManifest:
    entries: List[ManifestEntry]

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if not e.label or not e.speaker:
                raise ValueError(f"manifest entry {e.path!r} lacks a label or speaker")
            if e.path in seen:
                raise ValueError(f"duplicate manifest path {e.path!r}")
            seen.add(e.path)

    @property
    def labels(self) -> List[str]:
        return sorted({e.label for e in self.entries})

    @property
    def speakers(self) -> List[str]:
        return sorted({e.speaker for e in self.entries})

    def __len__(self):
        return len(self.entries)


# --------------------------------------------------------------------------
# WAV


def _parse_fmt(chunk: bytes, path) -> tuple:
    if len(chunk) < 16:
        raise AudioFormatError(f"{path}: truncated fmt chunk")
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", chunk[:16])
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(chunk) < 40:
            raise AudioFormatError(f"{path}: truncated WAVE_FORMAT_EXTENSIBLE header")
        # the first two bytes of the subformat GUID hold the real format tag
        tag = struct.unpack("<H", chunk[24:26])[0]
    return tag, channels, rate, block_align, bits


def load_wav(path) -> Signal:
    """Read a RIFF/WAVE file and return a mono signal in [-1, 1].

    Integer PCM (8/16/24/32 bit) is scaled by its full-scale value
    (8-bit data is unsigned with offset 128); 32/64-bit IEEE float is
    taken as is. Multichannel frames are averaged.
    """
    path = Path(path)
    raw = path.read_bytes()  # OSError propagates: I/O, not format, failure
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        cid, size = struct.unpack("<4sI", raw[pos:pos + 8])
        body = raw[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            fmt = _parse_fmt(body, path)
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise AudioFormatError(f"{path}: missing fmt or data chunk")

    tag, channels, rate, block_align, bits = fmt
    if channels < 1:
        raise AudioFormatError(f"{path}: invalid channel count {channels}")
    width = bits // 8
    if tag == WAVE_FORMAT_PCM:
        if bits == 8:
            x = (np.frombuffer(data, dtype=np.uint8).astype(float) - 128.0) / 128.0
        elif bits == 16:
            x = np.frombuffer(data[:len(data) // 2 * 2], dtype="<i2") / 32768.0
        elif bits == 24:
            b = np.frombuffer(data[:len(data) // 3 * 3], dtype=np.uint8).reshape(-1, 3)
            v = (b[:, 0].astype(np.int32) | (b[:, 1].astype(np.int32) << 8)
                 | (b[:, 2].astype(np.int32) << 16))
            v = np.where(v >= 1 << 23, v - (1 << 24), v)
            x = v / float(1 << 23)
        elif bits == 32:
            x = np.frombuffer(data[:len(data) // 4 * 4], dtype="<i4") / 2147483648.0
        else:
            raise AudioFormatError(f"{path}: unsupported PCM bit depth {bits}")
    elif tag == WAVE_FORMAT_IEEE_FLOAT:
        if bits == 32:
            x = np.frombuffer(data[:len(data) // 4 * 4], dtype="<f4").astype(float)
        elif bits == 64:
            x = np.frombuffer(data[:len(data) // 8 * 8], dtype="<f8").astype(float)
        else:
            raise AudioFormatError(f"{path}: unsupported float bit depth {bits}")
    else:
        raise AudioFormatError(f"{path}: unsupported WAV encoding (format tag 0x{tag:04X})")

    n_frames = x.size // channels
    if n_frames < 1:
        raise AudioFormatError(f"{path}: no audio frames")
    x = x[:n_frames * channels].reshape(n_frames, channels).mean(axis=1)
    if width and block_align and block_align != width * channels:
        raise AudioFormatError(f"{path}: inconsistent block alignment {block_align}")
    return Signal(x, int(rate))


def write_wav(path, signal: Signal) -> None:
    """Write a 16-bit PCM mono WAV (samples are clipped to [-1, 1))."""
    import wave

    q = np.clip(np.round(signal.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(signal.sample_rate_hz)
        w.writeframes(q.tobytes())


# --------------------------------------------------------------------------
# resampling


def design_lowpass(up: int, down: int, cutoff_hz: float, out_rate: int,
                   half_taps: int = 32, beta: float = 8.0) -> np.ndarray:
    """Kaiser-windowed sinc prototype for an ``up``/``down`` polyphase resampler."""
    phases = max(up, down)
    numtaps = 2 * half_taps * phases + 1
    fs_up = out_rate * down  # rate of the virtual upsampled stream
    h = sps.firwin(numtaps, cutoff_hz, window=("kaiser", beta), fs=fs_up)
    return h * up


def resample_to_8k(signal: Signal, half_taps: int = 32, beta: float = 8.0) -> Signal:
    """Down-sample to 8 kHz with a 3.6 kHz windowed-sinc anti-alias filter."""
    rate = signal.sample_rate_hz
    if rate == TARGET_RATE:
        return signal
    if rate < TARGET_RATE:
        raise ValueError(f"refusing to upsample from {rate} Hz to {TARGET_RATE} Hz")
    ratio = Fraction(TARGET_RATE, rate)
    up, down = ratio.numerator, ratio.denominator
    h = design_lowpass(up, down, 0.45 * TARGET_RATE, TARGET_RATE, half_taps, beta)
    y = sps.resample_poly(signal.samples, up, down, window=h)
    return Signal(y, TARGET_RATE)


# --------------------------------------------------------------------------
# voiced-frame selection


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Frames as rows of a (n_frames, frame_len) view; trailing remainder dropped."""
    x = np.ascontiguousarray(x)
    if x.size < frame_len:
        return np.empty((0, frame_len))
    n = 1 + (x.size - frame_len) // hop
    return np.lib.stride_tricks.as_strided(
        x, shape=(n, frame_len), strides=(x.strides[0] * hop, x.strides[0]), writeable=False)


def short_time_energy(frames: np.ndarray) -> np.ndarray:
    return np.mean(frames ** 2, axis=1)


def zero_crossing_rate(frames: np.ndarray) -> np.ndarray:
    """Sign changes per sample pair; zeros count as positive."""
    s = np.signbit(frames)
    return np.count_nonzero(s[:, 1:] != s[:, :-1], axis=1) / (frames.shape[1] - 1)


def voiced_mask(signal: Signal, frame_ms: float = 16.0, energy_quantile: float = 0.5,
                zcr_quantile: float = 0.5) -> np.ndarray:
    frame_len = int(round(frame_ms * signal.sample_rate_hz / 1000.0))
    if frame_len < 2 or len(signal) < frame_len:
        raise ValueError("signal shorter than one voicing frame")
    frames = frame_signal(signal.samples, frame_len, frame_len)
    energy = short_time_energy(frames)
    zcr = zero_crossing_rate(frames)
    keep = (energy >= np.quantile(energy, energy_quantile)) & (zcr <= np.quantile(zcr, zcr_quantile))
    return keep & (energy > 0)


def select_voiced(signal: Signal, frame_ms: float = 16.0, energy_quantile: float = 0.5,
                  zcr_quantile: float = 0.5) -> Signal:
    """Keep non-overlapping frames with high energy and low zero-crossing rate.

    Thresholds are per-file quantiles of the frame energies and ZCRs; kept
    frames are concatenated in temporal order.
    """
    frame_len = int(round(frame_ms * signal.sample_rate_hz / 1000.0))
    keep = voiced_mask(signal, frame_ms, energy_quantile, zcr_quantile)
    if not keep.any():
        raise NoVoicedFramesError("no voiced frames")
    frames = frame_signal(signal.samples, frame_len, frame_len)
    return Signal(frames[keep].ravel().copy(), signal.sample_rate_hz)


# --------------------------------------------------------------------------
# persistence


def write_features(matrix: FeatureMatrix, path, include_source: bool = False) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((["source_id"] if include_source else []) + matrix.schema)
        for sid, row in zip(matrix.source_ids, matrix.rows):
            vals = [repr(float(v)) for v in row]
            w.writerow(([sid] if include_source else []) + vals)


def read_features(path) -> FeatureMatrix:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty feature file") from None
        has_source = bool(header) and header[0] == "source_id"
        schema = header[1:] if has_source else header
        rows, ids = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise SchemaError(
                    f"{path}:{lineno}: row has {len(rec)} fields, header has {len(header)}")
            if has_source:
                ids.append(rec[0])
                rec = rec[1:]
            rows.append([float(v) for v in rec])
    arr = np.array(rows, dtype=float).reshape(len(rows), len(schema))
    return FeatureMatrix(arr, schema, ids)


def persist_roundtrip(matrix: FeatureMatrix, path) -> FeatureMatrix:
    write_features(matrix, path)
    back = read_features(path)
    back.source_ids = list(matrix.source_ids)
    return back


def read_manifest(path) -> CorpusManifest:
    """Parse a ``path,label,speaker`` CSV; relative paths resolve against its folder."""
    path = Path(path)
    entries = []
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if [h.strip() for h in header] != ["path", "label", "speaker"]:
            raise ValueError(f"{path}: manifest header must be 'path,label,speaker'")
        for line in fh:
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}: malformed manifest line {line!r}")
            p, label, spk = (s.strip() for s in parts)
            if not Path(p).is_absolute():
                p = str((path.parent / p).resolve())
            entries.append(ManifestEntry(p, label, spk))
    return CorpusManifest(entries)


def write_manifest(manifest: CorpusManifest, path, relative_to=None) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("path,label,speaker\n")
        for e in manifest.entries:
            p = e.path
            if relative_to is not None:
                try:
                    p = str(Path(p).relative_to(relative_to))
                except ValueError:
                    pass
            fh.write(f"{p},{e.label},{e.speaker}\n")


def iter_chunks(x: np.ndarray, chunk_len: int) -> Iterable[np.ndarray]:
    """Non-overlapping chunks; a trailing remainder shorter than ``chunk_len`` is dropped."""
    for start in range(0, x.size - chunk_len + 1, chunk_len):
        yield x[start:start + chunk_len]
