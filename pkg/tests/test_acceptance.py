"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (collected again in
the pytest terminal summary) and then asserts the same condition.

    python3 tests/test_acceptance.py      # or: pytest tests/test_acceptance.py
"""

import shutil
import time
import warnings

import numpy as np
import pytest
from sklearn.exceptions import ConvergenceWarning

from affectvox.alpha_gmm import AlphaGmmModel, frame_log_likelihoods, train_alpha_gmm
from affectvox.cli import main as cli_main, read_config
from affectvox.emd import SiftConfig, emd_decompose
from affectvox.evaluation import ClassifierConfig, FeatureConfig, extract_corpus_features, run_evaluation
from affectvox.features import InsConfig, column_means, extract_hhhc
from affectvox.hurst import hurst
from affectvox.ins import DEFAULT_SCALES, compute_ins, ins_profile
from affectvox.signal_io import FeatureMatrix, Signal
from affectvox.synth import fgn, synth_corpus

from conftest import record
from test_alpha_gmm import component_logs, random_model, sklearn_twin
from test_ins import gated_harmonic, silence_tone_silence, step_tone

FS = 8000
EMD_ONLY = SiftConfig(ensemble_trials=1, noise_std=0.0)


def test_c1_emd_completeness():
    rng = np.random.default_rng(2024)
    signals = [rng.standard_normal(int(rng.integers(256, 8193))) for _ in range(100)]
    t0 = time.perf_counter()
    worst = 0.0
    for x in signals:
        imfs = emd_decompose(x, EMD_ONLY)
        worst = max(worst, np.max(np.abs(x - imfs.reconstruct())) / np.max(np.abs(x)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 5.0
    record("1 EMD completeness", ok, f"max rel error {worst:.2e} (<= 1e-8), {dt:.2f} s (< 5 s)")
    assert ok


def test_c2_emd_separation():
    t = np.arange(FS) / FS
    hi, lo = np.sin(2 * np.pi * 300 * t), np.sin(2 * np.pi * 40 * t)
    t0 = time.perf_counter()
    imfs = emd_decompose(hi + lo, EMD_ONLY)
    dt = time.perf_counter() - t0
    inner = slice(400, -400)
    c1 = np.corrcoef(imfs.modes[0][inner], hi[inner])[0, 1]
    c2 = np.corrcoef(imfs.modes[1][inner], lo[inner])[0, 1]
    ok = c1 >= 0.95 and c2 >= 0.95 and dt < 1.0
    record("2 EMD separation", ok, f"corr 300 Hz {c1:.5f}, 40 Hz {c2:.5f} (>= 0.95), {dt:.3f} s (< 1 s)")
    assert ok


def test_c3_hurst_bias():
    t0 = time.perf_counter()
    parts, ok = [], True
    for h in (0.3, 0.5, 0.8):
        est = np.array([hurst(fgn(4096, h, 1000 * int(10 * h) + s), 3, 8).h for s in range(100)])
        bias, sd = abs(est.mean() - h), est.std()
        ok &= bias <= 0.05 and sd <= 0.1
        parts.append(f"H={h}: mean {est.mean():.3f} std {sd:.3f}")
    dt = time.perf_counter() - t0
    ok &= dt < 30
    record("3 Hurst estimator bias", ok, "; ".join(parts) + f" (|bias| <= 0.05, std <= 0.1), {dt:.1f} s")
    assert ok


def test_c4_ins_calibration():
    t0 = time.perf_counter()
    n = 6400
    alarms = np.zeros(len(DEFAULT_SCALES))
    for s in range(100):
        prof = ins_profile(np.random.default_rng(s).standard_normal(n), DEFAULT_SCALES, 50, s)
        assert not prof.skipped_scales
        alarms += np.array([v == "non-stationary" for v in prof.verdicts])
    burst = sum(compute_ins(silence_tone_silence(n, seed=s), 0.05, 50, s).nonstationary for s in range(100))
    step = sum(compute_ins(step_tone(n, seed=s, noise_std=1.0), 0.05, 50, s).nonstationary for s in range(100))
    dt = time.perf_counter() - t0
    ok = alarms.max() <= 12 and burst >= 95 and step >= 95 and dt < 120
    record("4 INS calibration", ok,
           f"white-noise false alarms per scale {alarms.astype(int).tolist()} % (<= 12); "
           f"burst detected {burst}/100, noisy step tone {step}/100 (>= 95); {dt:.1f} s (< 120 s)")
    assert ok


def test_c5_ins_scale_invariance():
    x = silence_tone_silence(seed=11)
    base = compute_ins(x, 0.05, 50, 99).ins
    diffs = [abs(compute_ins(c * x, 0.05, 50, 99).ins - base) for c in (0.1, 10.0)]
    ok = max(diffs) <= 1e-6
    record("5 INS scale invariance", ok, f"|INS(cx) - INS(x)| = {diffs[0]:.1e}, {diffs[1]:.1e} (<= 1e-6)")
    assert ok


def test_c6_alpha_gmm():
    rng = np.random.default_rng(6)
    m = random_model(rng, M=4, D=5)
    X = rng.normal(0, 2.5, (1000, 5))
    dev = np.max(np.abs(frame_log_likelihoods(X, m) - sklearn_twin(m).score_samples(X)))

    data = np.concatenate([rng.normal(0, 1, (400, 3)), rng.normal(3, 0.6, (400, 3))])
    _, hist = train_alpha_gmm(data, M=4, alpha=-1, tol=0.0, max_iters=80, seed=1, return_history=True)
    drop = float(np.min(np.diff(hist)))

    base = random_model(rng, M=2, D=3)
    P = rng.normal(0, 3, (1000, 3))
    vals = [frame_log_likelihoods(P, AlphaGmmModel("x", a, base.weights, base.means, base.variances))
            for a in (-1.0, -2.0, -4.0, -6.0, -8.0)]
    mono = all(np.all(b >= a - 1e-12) for a, b in zip(vals, vals[1:]))
    bound = bool(np.all(vals[-1] <= component_logs(P, base).max(axis=1) + 1e-12))

    ok = dev <= 1e-9 and drop >= -1e-9 and mono and bound
    record("6 alpha-GMM correctness", ok,
           f"(a) max |ll - reference| {dev:.1e} (<= 1e-9); (b) min EM step {drop:.1e} (>= -1e-9); "
           f"(c) power-mean order {mono}, upper bound {bound}")
    assert ok


def test_c7_end_to_end(tmp_path):
    t0 = time.perf_counter()
    seed = 7
    manifest = synth_corpus(tmp_path / "corpus", n_speakers=4, seconds_per_label=40, seed=seed)
    sift = SiftConfig(ensemble_trials=5, noise_std=0.01)
    ins_cfg = FeatureConfig("hhhc+ins", sift, use_eemd=True, ins=InsConfig(n_surrogates=20))
    hhhc_cfg = FeatureConfig("hhhc", sift, use_eemd=True)
    clf = ClassifierConfig(alpha=-4, mixtures=8)
    feats, _ = extract_corpus_features(manifest, ins_cfg, seed)
    # the first six HHHC+INS columns are the HHHC features of the same segments
    hhhc_feats = {p: [FeatureMatrix(c.rows[:, :6], c.schema[:6], c.source_ids) for c in mats]
                  for p, mats in feats.items()}
    acc_h = run_evaluation(manifest, hhhc_cfg, clf, seed=seed, features=hhhc_feats).confusion.average
    acc_i = run_evaluation(manifest, ins_cfg, clf, seed=seed, features=feats).confusion.average
    dt = time.perf_counter() - t0
    ok = acc_h >= 90 and acc_i >= acc_h - 2 and dt < 600
    record("7 end-to-end synthetic classification", ok,
           f"HHHC {acc_h:.2f}% (>= 90), HHHC+INS {acc_i:.2f}% (>= HHHC - 2), {dt:.0f} s (< 600 s)")
    assert ok


def test_c8_qualitative_analogs():
    cfg = SiftConfig(rng_seed=1)
    high = column_means(extract_hhhc(Signal(fgn(6400, 0.3, 5), FS), cfg))
    low = column_means(extract_hhhc(Signal(fgn(6400, 0.8, 5), FS), cfg))
    ordered = int(np.sum(low > high))

    ratios = []
    for s in range(5):
        strong = ins_profile(gated_harmonic(1.0, s), DEFAULT_SCALES, 50, s)
        weak = ins_profile(gated_harmonic(0.1, s), DEFAULT_SCALES, 50, s)
        common = max(set(strong.scales) & set(weak.scales))
        ratios.append(strong.ins_values[strong.scales.index(common)] /
                      weak.ins_values[weak.scales.index(common)])
    ok_order, ok_contrast = ordered >= 4, min(ratios) >= 5
    record("8 qualitative analogs", ok_order and ok_contrast,
           f"arousal ordering {ordered}/6 slots (>= 4) [H=0.3 means {np.round(high, 3).tolist()}, "
           f"H=0.8 means {np.round(low, 3).tolist()}]; burst INS contrast min {min(ratios):.0f}x (>= 5x)")
    assert ok_order and ok_contrast


def test_c9_protocol_conformance(tmp_path):
    synth_corpus(tmp_path / "corpus", n_speakers=3, seconds_per_label=16, seed=9)
    manifest = tmp_path / "corpus" / "manifest.csv"
    problems = []
    for alpha in (-1, -2, -4, -6, -8):
        out = tmp_path / f"a{-alpha}"
        rc = cli_main(["evaluate", "--manifest", str(manifest), "--feature", "hhhc", "--alpha", str(alpha),
                       "--mixtures", "32", "--seed", "9", "--no-eemd", "--out-dir", str(out)])
        if rc != 0:
            problems.append(f"alpha {alpha}: exit {rc}")
            continue
        conf = (out / "confusion.csv").read_text().splitlines()
        if conf[0] != "actual,high_arousal,low_arousal" or len(conf) != 3:
            problems.append(f"alpha {alpha}: confusion layout")
        if not all(v.isdigit() for row in conf[1:] for v in row.split(",")[1:]):
            problems.append(f"alpha {alpha}: non-integer counts")
        summary = [r.split(",")[0] for r in (out / "summary.csv").read_text().splitlines()]
        if summary != ["label", "high_arousal", "low_arousal", "average", "uar"]:
            problems.append(f"alpha {alpha}: summary layout")
        if len((out / "per_fold.csv").read_text().splitlines()) != 4:
            problems.append(f"alpha {alpha}: per-fold rows")
        cfg = read_config(out / "run_config.txt")
        want = {"alpha": str(float(alpha)), "mixtures": "32", "train-seconds": "32.0",
                "segment-seconds": "0.8", "seed": "9", "feature": "hhhc"}
        bad = {k: cfg.get(k) for k, v in want.items() if cfg.get(k) != v}
        if bad:
            problems.append(f"alpha {alpha}: sidecar {bad}")
    # the sidecar alone reproduces the run
    again = tmp_path / "again"
    cli_main(["evaluate", "--config", str(tmp_path / "a4" / "run_config.txt"), "--out-dir", str(again)])
    if (again / "confusion.csv").read_bytes() != (tmp_path / "a4" / "confusion.csv").read_bytes():
        problems.append("sidecar rerun differs")
    ok = not problems
    record("9 protocol conformance", ok,
           "alpha sweep {-1,-2,-4,-6,-8}, M=32, 32 s training, 800 ms tests: "
           + ("confusion/summary/per-fold CSVs and sidecar conform" if ok else "; ".join(problems)))
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
