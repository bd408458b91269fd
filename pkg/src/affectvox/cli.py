"""Command-line entry point: ``affectvox <subcommand> ...``.

Every artifact-producing run writes a ``key = value`` sidecar next to its
output holding the effective configuration; passing that file back with
``--config`` reproduces the run. Exit status is 0 on success, 1 on usage
errors and 2 on data errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .alpha_gmm import classify_sequence, read_model, train_alpha_gmm, write_model
from .emd import SiftConfig, decompose
from .evaluation import ClassifierConfig, FeatureConfig, run_evaluation
from .features import InsConfig, extract_hhhc, extract_hhhc_ins
from .hurst import extract_ph
from .ins import ins_profile, ins_vector_for_imfs
from .signal_io import (FeatureMatrix, Signal, load_wav, read_features, read_manifest,
                        resample_to_8k, select_voiced, write_features)
from .synth import synth_corpus

log = logging.getLogger("affectvox")

SIDECAR_SKIP = {"command", "config", "func", "verbose"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def scale_grid(n: int, lo: float = 0.0015, hi: float = 0.5):
    return tuple(np.geomspace(lo, hi, n)) if n > 1 else (hi,)


# --------------------------------------------------------------------------
# shared option groups


def _add_sift(p):
    g = p.add_argument_group("decomposition")
    g.add_argument("--max-imfs", type=int, default=6)
    g.add_argument("--max-sift-iters", type=int, default=50)
    g.add_argument("--sd-threshold", type=float, default=0.2)
    g.add_argument("--trials", type=int, default=100, help="EEMD ensemble size")
    g.add_argument("--noise-std", type=float, default=0.01, help="EEMD noise std relative to segment std")
    g.add_argument("--no-eemd", action="store_true", help="plain EMD instead of EEMD")


def _add_voicing(p):
    g = p.add_argument_group("voiced-frame selection")
    g.add_argument("--voiced", action="store_true", help="keep only voiced frames before analysis")
    g.add_argument("--voicing-frame-ms", type=float, default=16.0)
    g.add_argument("--energy-quantile", type=float, default=0.5)
    g.add_argument("--zcr-quantile", type=float, default=0.5)


def _add_ins(p, scales_default=10):
    g = p.add_argument_group("index of non-stationarity")
    g.add_argument("--scales", type=int, default=scales_default,
                   help="number of log-spaced window ratios in [0.0015, 0.5]")
    g.add_argument("--surrogates", type=int, default=50)


def _sift_cfg(a) -> SiftConfig:
    return SiftConfig(max_imfs=a.max_imfs, max_sift_iters=a.max_sift_iters,
                      sd_threshold=a.sd_threshold, ensemble_trials=a.trials,
                      noise_std=a.noise_std, rng_seed=a.seed)


def _load(a) -> Signal:
    sig = resample_to_8k(load_wav(a.input))
    if getattr(a, "voiced", False):
        sig = select_voiced(sig, a.voicing_frame_ms, a.energy_quantile, a.zcr_quantile)
    return sig


def write_sidecar(path, args) -> Path:
    path = Path(path)
    lines = [f"# affectvox {__version__} {args.command}"]
    for key, val in sorted(vars(args).items()):
        if key in SIDECAR_SKIP or val is None:
            continue
        if isinstance(val, list):
            val = " ".join(str(v) for v in val)
        lines.append(f"{key.replace('_', '-')} = {val}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_config(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def _sidecar_for(out: Path) -> Path:
    return out.with_name(out.name + ".config.txt")


# --------------------------------------------------------------------------
# subcommands


def cmd_decompose(a):
    sig = _load(a)
    imfs = decompose(sig.samples, _sift_cfg(a), use_eemd=not a.no_eemd)
    t = np.arange(len(sig)) / sig.sample_rate_hz
    cols = np.column_stack([t, imfs.modes.T, imfs.residual])
    header = ",".join(["t"] + [f"imf{m + 1}" for m in range(imfs.modes.shape[0])] + ["residual"])
    np.savetxt(a.out, cols, delimiter=",", header=header, comments="", fmt="%.17g")
    write_sidecar(_sidecar_for(Path(a.out)), a)


def cmd_hurst(a):
    sig = _load(a)
    fm = extract_ph(sig, a.frame_ms, a.hop_ms, a.j_min, a.j_max, source=Path(a.input).name)
    write_features(fm, a.out)
    write_sidecar(_sidecar_for(Path(a.out)), a)


def cmd_hhhc(a):
    sig = _load(a)
    src = Path(a.input).name
    if a.ins or a.ins_full:
        ins_cfg = InsConfig(scale_grid(a.scales), a.surrogates, a.ins_summary, a.ins_full)
        fm = extract_hhhc_ins(sig, _sift_cfg(a), ins_cfg, not a.no_eemd, source=src, jobs=a.jobs)
    else:
        fm = extract_hhhc(sig, _sift_cfg(a), not a.no_eemd, source=src, jobs=a.jobs)
    write_features(fm, a.out, include_source=a.with_source)
    write_sidecar(_sidecar_for(Path(a.out)), a)


def cmd_ins(a):
    sig = _load(a)
    scales = scale_grid(a.scales)
    out = Path(a.out)
    if a.per_imf:
        imfs = decompose(sig.samples, _sift_cfg(a), use_eemd=not a.no_eemd)
        profiles = ins_vector_for_imfs(imfs, scales, a.surrogates, a.seed)
        with out.open("w", encoding="utf-8") as fh:
            fh.write("imf,scale,ins,gamma,verdict\n")
            for m, prof in enumerate(profiles, start=1):
                for s, v, g, d in zip(prof.scales, prof.ins_values, prof.gamma_thresholds, prof.verdicts):
                    fh.write(f"{m},{s!r},{v!r},{g!r},{d}\n")
    else:
        prof = ins_profile(sig.samples, scales, a.surrogates, a.seed)
        with out.open("w", encoding="utf-8") as fh:
            fh.write("scale,ins,gamma,verdict\n")
            for s, v, g, d in zip(prof.scales, prof.ins_values, prof.gamma_thresholds, prof.verdicts):
                fh.write(f"{s!r},{v!r},{g!r},{d}\n")
        for s in prof.skipped_scales:
            log.warning("window ratio %.5f is too short for %d samples; skipped", s, len(sig))
    write_sidecar(_sidecar_for(out), a)


def cmd_synth(a):
    out = Path(a.out)
    manifest = synth_corpus(out, n_speakers=a.speakers, seconds_per_label=a.seconds,
                            seed=a.seed, max_tilt=a.max_tilt)
    write_sidecar(out / "synth.config.txt", a)
    print(f"wrote {len(manifest)} files and {out / 'manifest.csv'}")


def cmd_train(a):
    mats = [read_features(p) for p in a.features]
    X = FeatureMatrix.concat(mats)
    model = train_alpha_gmm(X, a.mixtures, a.alpha, a.max_iters, a.tol, seed=a.seed, label=a.label)
    write_model(model, a.out)
    write_sidecar(_sidecar_for(Path(a.out)), a)


def cmd_classify(a):
    X = read_features(a.features)
    models = [read_model(p) for p in a.models]
    label, scores = classify_sequence(X, models)
    lines = ["label,score"] + [f"{lbl},{sc!r}" for lbl, sc in sorted(scores.items())]
    if a.out:
        Path(a.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        write_sidecar(_sidecar_for(Path(a.out)), a)
    print(label)


def cmd_evaluate(a):
    manifest = read_manifest(a.manifest)
    ins_cfg = InsConfig(scale_grid(a.scales), a.surrogates)
    fcfg = FeatureConfig(a.feature, _sift_cfg(a), not a.no_eemd, ins_cfg, a.voicing_frame_ms,
                         a.energy_quantile, a.zcr_quantile)
    ccfg = ClassifierConfig(a.alpha, a.mixtures, a.max_iters, a.tol, a.train_seconds,
                            a.segment_seconds)
    result = run_evaluation(manifest, fcfg, ccfg, seed=a.seed, jobs=a.jobs)
    paths = result.write(a.out_dir)
    write_sidecar(Path(a.out_dir) / "run_config.txt", a)
    print(f"average accuracy {result.confusion.average:.2f}% (UAR {result.confusion.uar:.2f}%)")
    for name, p in paths.items():
        print(f"{name}: {p}")


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="affectvox", description="HHHC / INS features and alpha-GMM emotion classification")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--config", help="key = value file; command-line flags take precedence")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("-v", "--verbose", action="store_true")
        return sp

    sp = add("decompose", cmd_decompose, "EMD/EEMD of a WAV file to CSV")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    _add_sift(sp)
    _add_voicing(sp)

    sp = add("hurst", cmd_hurst, "pH feature: frame-wise Hurst exponents")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--frame-ms", type=float, default=50.0)
    sp.add_argument("--hop-ms", type=float, default=10.0)
    sp.add_argument("--j-min", type=int, default=2)
    sp.add_argument("--j-max", type=int, default=12)
    _add_voicing(sp)

    sp = add("hhhc", cmd_hhhc, "HHHC (optionally +INS) feature matrix")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--ins", action="store_true", help="append one INS summary per mode")
    sp.add_argument("--ins-full", action="store_true", help="append every per-scale INS value")
    sp.add_argument("--ins-summary", choices=("median", "mean", "max"), default="median")
    sp.add_argument("--with-source", action="store_true", help="prepend a source_id column")
    _add_sift(sp)
    _add_voicing(sp)
    _add_ins(sp)

    sp = add("ins", cmd_ins, "INS profile with stationarity verdicts")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--per-imf", action="store_true", help="analyse each mode instead of the raw signal")
    _add_ins(sp)
    _add_sift(sp)
    _add_voicing(sp)

    sp = add("synth", cmd_synth, "write a synthetic labelled corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--speakers", type=int, default=4)
    sp.add_argument("--seconds", type=float, default=60.0)
    sp.add_argument("--max-tilt", type=float, default=0.2)

    sp = add("train", cmd_train, "train one alpha-GMM from feature CSVs")
    sp.add_argument("--features", nargs="+", required=True)
    sp.add_argument("--label", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--alpha", type=float, default=-4.0)
    sp.add_argument("--mixtures", type=int, default=32)
    sp.add_argument("--max-iters", type=int, default=200)
    sp.add_argument("--tol", type=float, default=1e-5)

    sp = add("classify", cmd_classify, "score a feature CSV against trained models")
    sp.add_argument("--features", required=True)
    sp.add_argument("--models", nargs="+", required=True)
    sp.add_argument("--out")

    sp = add("evaluate", cmd_evaluate, "leave-one-speaker-out evaluation over a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out-dir", default="results")
    sp.add_argument("--feature", choices=("hhhc", "hhhc+ins", "ph"), default="hhhc")
    sp.add_argument("--alpha", type=float, default=-4.0)
    sp.add_argument("--mixtures", type=int, default=32)
    sp.add_argument("--max-iters", type=int, default=200)
    sp.add_argument("--tol", type=float, default=1e-5)
    sp.add_argument("--train-seconds", type=float, default=32.0)
    sp.add_argument("--segment-seconds", type=float, default=0.8)
    _add_sift(sp)
    _add_ins(sp)
    g = sp.add_argument_group("voiced-frame selection")
    g.add_argument("--voicing-frame-ms", type=float, default=16.0)
    g.add_argument("--energy-quantile", type=float, default=0.5)
    g.add_argument("--zcr-quantile", type=float, default=0.5)
    return p


def _apply_config(sub_parser, config_path, command):
    """Install config-file values as subcommand defaults so explicit flags still win."""
    cfg = read_config(config_path)
    actions = {a.dest: a for a in sub_parser._actions}
    defaults = {}
    for key, raw in cfg.items():
        dest = key.replace("-", "_")
        if dest in SIDECAR_SKIP:
            continue
        act = actions.get(dest)
        if act is None:
            raise UsageError(f"{config_path}: unknown key {key!r} for '{command}'")
        try:
            if isinstance(act, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                val = raw.lower() in ("1", "true", "yes", "on")
            elif act.nargs in ("+", "*"):
                val = [act.type(v) if act.type else v for v in raw.split()]
            else:
                val = act.type(raw) if act.type else raw
        except ValueError as exc:
            raise UsageError(f"{config_path}: bad value for {key!r}: {exc}") from None
        if act.choices is not None and val not in act.choices:
            raise UsageError(f"{config_path}: {key} must be one of {sorted(act.choices)}")
        defaults[dest] = val
        # a required option supplied by the file no longer needs a flag
        act.required = False
    sub_parser.set_defaults(**defaults)


def _prescan(argv):
    """(subcommand, --config path) found without a full parse."""
    command = next((tok for tok in argv if not tok.startswith("-")), None)
    config = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
    return command, config


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        command, config = _prescan(argv)
        subparsers = parser._subparsers._group_actions[0].choices
        if config and command in subparsers:
            _apply_config(subparsers[command], config, command)
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"affectvox: cannot read config: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"affectvox {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
