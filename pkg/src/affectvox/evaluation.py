"""Leave-one-speaker-out evaluation of alpha-GMM emotion classifiers."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from .alpha_gmm import AlphaGmmModel, classify_sequence, train_alpha_gmm
from .emd import SiftConfig
from .features import InsConfig, extract_hhhc, extract_hhhc_ins
from .hurst import extract_ph
from .signal_io import (CorpusManifest, FeatureMatrix, ManifestEntry, NoVoicedFramesError,
                        Signal, iter_chunks, load_wav, resample_to_8k, select_voiced)

log = logging.getLogger(__name__)

FEATURE_MODES = ("hhhc", "hhhc+ins", "ph")
TRAIN_SECONDS = 32.0
TEST_SEGMENT_S = 0.8


@dataclass(frozen=True)
class FeatureConfig:
    mode: str = "hhhc"
    sift: SiftConfig = SiftConfig()
    use_eemd: bool = True
    ins: InsConfig = InsConfig()
    frame_ms: float = 16.0
    energy_quantile: float = 0.5
    zcr_quantile: float = 0.5

    def __post_init__(self):
        if self.mode not in FEATURE_MODES:
            raise ValueError(f"unknown feature mode {self.mode!r}; choose from {FEATURE_MODES}")


@dataclass(frozen=True)
class ClassifierConfig:
    alpha: float = -4.0
    mixtures: int = 32
    max_iters: int = 200
    tol: float = 1e-5
    train_seconds: float = TRAIN_SECONDS
    segment_seconds: float = TEST_SEGMENT_S


@dataclass
class ConfusionMatrix:
    labels: List[str]
    counts: np.ndarray  # rows: actual, columns: classified

    @classmethod
    def empty(cls, labels: Sequence[str]) -> "ConfusionMatrix":
        return cls(list(labels), np.zeros((len(labels), len(labels)), dtype=int))

    def add(self, actual: str, predicted: str) -> None:
        self.counts[self.labels.index(actual), self.labels.index(predicted)] += 1

    @property
    def per_class_accuracy(self) -> np.ndarray:
        rows = self.counts.sum(axis=1)
        diag = np.diag(self.counts).astype(float)
        return np.where(rows > 0, 100.0 * diag / np.maximum(rows, 1), np.nan)

    @property
    def average(self) -> float:
        """Unweighted mean of per-class accuracies (classes with tests only)."""
        acc = self.per_class_accuracy
        return float(np.nanmean(acc)) if np.any(~np.isnan(acc)) else float("nan")

    @property
    def uar(self) -> float:
        return self.average

    def write_counts(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["actual"] + self.labels)
            for lbl, row in zip(self.labels, self.counts):
                w.writerow([lbl] + [int(v) for v in row])

    def write_summary(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label", "n_test", "accuracy_pct"])
            for lbl, n, acc in zip(self.labels, self.counts.sum(axis=1), self.per_class_accuracy):
                w.writerow([lbl, int(n), f"{acc:.4f}"])
            w.writerow(["average", int(self.counts.sum()), f"{self.average:.4f}"])
            w.writerow(["uar", int(self.counts.sum()), f"{self.uar:.4f}"])


@dataclass
class Fold:
    test_speaker: str
    train: List[ManifestEntry]
    test: List[ManifestEntry]


@dataclass
class EvaluationResult:
    confusion: ConfusionMatrix
    per_fold: List[dict] = field(default_factory=list)
    scores: List[dict] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def write(self, out_dir) -> Dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {name: out / f"{name}.csv" for name in ("confusion", "summary", "per_fold", "scores")}
        self.confusion.write_counts(paths["confusion"])
        self.confusion.write_summary(paths["summary"])
        _write_dicts(paths["per_fold"], self.per_fold)
        _write_dicts(paths["scores"], self.scores)
        return paths


def _write_dicts(path, rows: List[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def build_loso_folds(manifest: CorpusManifest) -> List[Fold]:
    """One fold per speaker; that speaker's files are excluded from training."""
    speakers = manifest.speakers
    if len(speakers) < 2:
        raise ValueError("leave-one-speaker-out needs at least two speakers")
    folds = []
    for spk in speakers:
        train = [e for e in manifest.entries if e.speaker != spk]
        test = [e for e in manifest.entries if e.speaker == spk]
        folds.append(Fold(spk, train, test))
    return folds


# --------------------------------------------------------------------------
# feature cache


def _chunk_features(chunk: np.ndarray, cfg: FeatureConfig, seed: int, source: str) -> FeatureMatrix:
    sig = Signal(chunk, 8000)
    sift = replace(cfg.sift, rng_seed=seed)
    if cfg.mode == "hhhc":
        return extract_hhhc(sig, sift, cfg.use_eemd, source=source)
    if cfg.mode == "hhhc+ins":
        return extract_hhhc_ins(sig, sift, cfg.ins, cfg.use_eemd, source=source)
    return extract_ph(sig, source=source)


def _file_features(args):
    """Voiced 800 ms chunks of one file and their feature matrices."""
    entry, cfg, seg_s, file_seed = args
    sig = resample_to_8k(load_wav(entry.path))
    try:
        voiced = select_voiced(sig, cfg.frame_ms, cfg.energy_quantile, cfg.zcr_quantile)
    except NoVoicedFramesError:
        return entry.path, [], f"{entry.path}: no voiced frames, file skipped"
    chunk_len = int(round(seg_s * 8000))
    chunks = list(iter_chunks(voiced.samples, chunk_len))
    seeds = [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(file_seed).spawn(len(chunks))]
    mats = [_chunk_features(c, cfg, s, f"{Path(entry.path).name}@{k}")
            for k, (c, s) in enumerate(zip(chunks, seeds))]
    note = None if mats else f"{entry.path}: voiced audio shorter than one test segment"
    return entry.path, mats, note


def extract_corpus_features(manifest: CorpusManifest, cfg: FeatureConfig, seed: int,
                            segment_seconds: float = TEST_SEGMENT_S, jobs: int = 1):
    """Map path -> list of per-chunk FeatureMatrix, plus any warnings."""
    file_seeds = np.random.SeedSequence([seed, 1]).spawn(len(manifest.entries))
    tasks = [(e, cfg, segment_seconds, int(s.generate_state(1)[0]))
             for e, s in zip(manifest.entries, file_seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_file_features, tasks))
    else:
        results = [_file_features(t) for t in tasks]
    feats, notes = {}, []
    for path, mats, note in results:
        feats[path] = mats
        if note:
            log.warning(note)
            notes.append(note)
    return feats, notes


# --------------------------------------------------------------------------
# protocol


def draw_training_chunks(chunks: List[FeatureMatrix], n_needed: int, rng: np.random.Generator):
    """Uniform draw of whole chunks without replacement, up to ``n_needed``."""
    order = rng.permutation(len(chunks))
    return [chunks[i] for i in order[:n_needed]]


def run_evaluation(manifest: CorpusManifest, feature_cfg: FeatureConfig = FeatureConfig(),
                   classifier_cfg: ClassifierConfig = ClassifierConfig(), seed: int = 0,
                   jobs: int = 1, features=None) -> EvaluationResult:
    """LOSO protocol: 32 s of training audio per label, 800 ms test segments.

    ``features`` may carry a precomputed ``extract_corpus_features`` result
    for the same manifest and feature configuration.
    """
    labels = manifest.labels
    if len(labels) < 2:
        raise ValueError("classification needs at least two labels")
    folds = build_loso_folds(manifest)
    if features is None:
        features, notes = extract_corpus_features(manifest, feature_cfg, seed,
                                                  classifier_cfg.segment_seconds, jobs)
    else:
        notes = []
    result = EvaluationResult(ConfusionMatrix.empty(labels), warnings=list(notes))
    n_needed = int(np.ceil(classifier_cfg.train_seconds / classifier_cfg.segment_seconds - 1e-9))
    fold_seeds = np.random.SeedSequence([seed, 2]).spawn(len(folds))

    for f, (fold, fseed) in enumerate(zip(folds, fold_seeds)):
        rng = np.random.default_rng(fseed)
        models: List[AlphaGmmModel] = []
        train_info = {}
        for lbl in labels:
            pool = [m for e in fold.train if e.label == lbl for m in features[e.path]]
            drawn = draw_training_chunks(pool, n_needed, rng)
            secs = len(drawn) * classifier_cfg.segment_seconds
            train_info[lbl] = secs
            if not drawn:
                msg = f"fold {f} ({fold.test_speaker}): no training audio for label {lbl!r}"
                log.warning(msg)
                result.warnings.append(msg)
                continue
            if len(drawn) < n_needed:
                msg = (f"fold {f} ({fold.test_speaker}): label {lbl!r} has {secs:.1f} s of voiced "
                       f"training audio, {classifier_cfg.train_seconds - secs:.1f} s short")
                log.warning(msg)
                result.warnings.append(msg)
            X = FeatureMatrix.concat(drawn)
            models.append(train_alpha_gmm(X, classifier_cfg.mixtures, classifier_cfg.alpha,
                                          classifier_cfg.max_iters, classifier_cfg.tol,
                                          seed=int(rng.integers(2 ** 31)), label=lbl))
        n_test = n_ok = 0
        for e in fold.test:
            for k, chunk in enumerate(features[e.path]):
                pred, scores = classify_sequence(chunk, models)
                result.confusion.add(e.label, pred)
                n_test += 1
                n_ok += pred == e.label
                for lbl, sc in sorted(scores.items()):
                    result.scores.append({"fold": f, "segment": chunk.source_ids[0].split("#")[0],
                                          "actual": e.label, "predicted": pred,
                                          "model": lbl, "score": repr(sc)})
        row = {"fold": f, "test_speaker": fold.test_speaker, "n_test": n_test, "n_correct": n_ok,
               "accuracy_pct": f"{100.0 * n_ok / n_test:.4f}" if n_test else "nan"}
        for lbl in labels:
            row[f"train_s_{lbl}"] = f"{train_info.get(lbl, 0.0):.1f}"
        result.per_fold.append(row)
    return result
