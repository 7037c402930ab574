"""Command-line interface for the roomprint pipeline.

Exit codes: 0 success, 2 invalid input, 3 degraded (some files skipped).
"""

import argparse
import json
import sys
from pathlib import Path

from . import bands, channel, classify, dataset, gmm, pipeline
from .audio import read_wav, resample, write_wav
from .dsp import FrameConfig
from .errors import RoomprintError
from .filters import fit_minimum_phase_filter, minimum_phase_target, write_coefficients_csv

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DEGRADED = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sample-rate", type=int, default=16000)
    parser.add_argument("--frame-ms", type=float, default=128.0)
    parser.add_argument("--overlap", type=float, default=0.5)
    parser.add_argument("--mfcc", type=int, default=12)
    parser.add_argument("--seed", type=int, default=0)


def _add_roomprint_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--octave-fraction", type=int, default=4)
    parser.add_argument("--alpha", type=float, default=1.5)
    parser.add_argument("--orders", default="384,384", help="n_b,n_a filter orders")
    parser.add_argument("--target-refine", type=int, default=2, help="fit-grid densification")
    parser.add_argument("--band-range", default="100,8000", help="f_min,f_max in Hz")
    parser.add_argument("--log-transform", action="store_true")


def _frame_config(args) -> FrameConfig:
    return FrameConfig(
        sample_rate_hz=args.sample_rate,
        frame_ms=args.frame_ms,
        overlap=args.overlap,
        n_mfcc=args.mfcc,
    )


def _orders(args) -> tuple[int, int]:
    n_b, n_a = (int(v) for v in args.orders.split(","))
    return n_b, n_a


def _band_range(args) -> tuple[float, float]:
    lo, hi = (float(v) for v in args.band_range.split(","))
    return lo, hi


def _iter_wavs(root: str):
    paths = sorted(Path(root).rglob("*.wav"))
    if not paths:
        raise RoomprintError(f"no WAV files under {root}")
    return paths


def cmd_train_gmm(args) -> int:
    cfg = _frame_config(args)

    def corpus():
        for path in _iter_wavs(args.speech_dir):
            audio = read_wav(path)
            if audio.sample_rate_hz != cfg.sample_rate_hz:
                audio = resample(audio, cfg.sample_rate_hz)
            yield audio

    cepstra, spectra = gmm.extract_training_features(corpus(), cfg)
    model = gmm.train_speech_model(
        cepstra, spectra, args.mixtures, seed=args.seed, frame_config=cfg
    )
    gmm.save_model(args.out, model)
    print(
        f"trained {model.n_mixtures}-mixture model on {cepstra.values.shape[0]} frames "
        f"-> {args.out}"
    )
    return EXIT_OK


def cmd_synth_dataset(args) -> int:
    manifest = dataset.load_manifest(args.manifest, sample_rate_hz=args.sample_rate)
    report = dataset.synth_dataset(manifest, args.out_dir)
    print(json.dumps({k: v for k, v in report.items() if k != "paths"}, indent=2))
    return EXIT_OK


def cmd_estimate_channel(args) -> int:
    model = gmm.load_model(args.model)
    recording = read_wav(args.input)
    estimate = channel.estimate_channel(recording, model)
    channel.save_estimate(args.out, estimate)
    if args.csv:
        channel.write_csv(args.csv, estimate)
    print(f"channel estimate over {estimate.n_frames_used} frames -> {args.out}")
    return EXIT_OK


def cmd_extract_roomprint(args) -> int:
    n_b, n_a = _orders(args)
    lo, hi = _band_range(args)
    if args.channel:
        estimate = channel.load_estimate(args.channel)
        sample_rate = int(round(estimate.bin_hz * 2 * (estimate.n_bins - 1)))
    elif args.model and args.input:
        model = gmm.load_model(args.model)
        recording = read_wav(args.input)
        estimate = channel.estimate_channel(recording, model)
        sample_rate = recording.sample_rate_hz
    else:
        raise RoomprintError("need either --channel or both --model and --input")
    rir = pipeline.rir_estimate_from_channel(
        estimate, sample_rate, n_b, n_a, args.target_refine
    )
    bank = bands.design_filterbank(args.octave_fraction, lo, hi, sample_rate)
    rp = bands.compute_roomprint(rir, bank, args.alpha, args.log_transform)
    extra = {"label": args.label} if args.label else None
    bands.write_roomprint_json(args.out, rp, extra)
    if args.csv:
        bands.write_roomprint_csv(args.csv, rp)
    if args.rir_wav:
        write_wav(args.rir_wav, rir)
    if args.filter_csv:
        target = minimum_phase_target(estimate, refine=args.target_refine)
        write_coefficients_csv(args.filter_csv, fit_minimum_phase_filter(target, n_b, n_a))
    status = "ok" if rp.valid else f"degraded bands {list(rp.failed_bands)}"
    print(f"roomprint ({len(rp.rt60_s)} bands, {status}) -> {args.out}")
    return EXIT_OK if rp.valid else EXIT_DEGRADED


def _load_labeled_roomprints(roomprint_dir, manifest=None, conditions=("near", "far"), split=None):
    prints, labels, stems = [], [], {}
    if manifest is not None:
        entries = [e for e in manifest.entries if e.condition in conditions]
        if split:
            entries = [e for e in entries if e.split == split]
        stems = {f"{Path(e.speech_path).stem}_{e.condition}": e.room for e in entries}
    for path in sorted(Path(roomprint_dir).glob("*.json")):
        rp, payload = bands.read_roomprint_json(path)
        label = payload.get("label")
        if label is None:
            label = stems.get(path.stem)
        if label is None:
            continue
        prints.append(rp)
        labels.append(label)
    return prints, labels


def cmd_train_classifier(args) -> int:
    manifest = (
        dataset.load_manifest(args.manifest, sample_rate_hz=args.sample_rate)
        if args.manifest
        else None
    )
    conditions = ("near", "far") if args.condition == "mixed" else (args.condition,)
    prints, labels = _load_labeled_roomprints(
        args.roomprint_dir, manifest, conditions, split="train" if manifest else None
    )
    grid = tuple(10.0**k for k in range(-4, 4))
    model = classify.train_classifier(
        prints, labels, grid_c=grid, grid_gamma=grid, folds=args.folds, seed=args.seed
    )
    classify.save_classifier(args.out, model)
    print(
        f"trained on {len(labels)} roomprints, {model.n_classes} rooms, "
        f"cv accuracy {model.cv_accuracy * 100:.1f}%, c={model.c:g} gamma={model.gamma:g} "
        f"-> {args.out}"
    )
    return EXIT_OK


def cmd_classify(args) -> int:
    model = classify.load_classifier(args.model)
    rp, _ = bands.read_roomprint_json(args.roomprint)
    print(classify.predict(model, rp))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = classify.load_classifier(args.model)
    manifest = (
        dataset.load_manifest(args.manifest, sample_rate_hz=args.sample_rate)
        if args.manifest
        else None
    )
    conditions = ("near", "far") if args.condition == "mixed" else (args.condition,)
    prints, labels = _load_labeled_roomprints(
        args.roomprint_dir, manifest, conditions, split="test" if manifest else None
    )
    if not prints:
        raise RoomprintError("no labeled roomprints found to evaluate")
    metrics = classify.evaluate(model, prints, labels)
    if args.json_out:
        Path(args.json_out).write_text(metrics.to_json())
    print(metrics.to_table())
    return EXIT_OK


def cmd_sweep(args) -> int:
    model = gmm.load_model(args.model)
    manifest = dataset.load_manifest(args.manifest, sample_rate_hz=args.sample_rate)
    n_b, n_a = _orders(args)
    lo, hi = _band_range(args)
    fractions = [int(v) for v in args.octave_fractions.split(",")]
    alphas = [float(v) for v in args.alphas.split(",")]
    rows = []
    degraded = False
    for fraction in fractions:
        for alpha in alphas:
            config = pipeline.ExperimentConfig(
                octave_fraction=fraction,
                alpha=alpha,
                n_b=n_b,
                n_a=n_a,
                target_refine=args.target_refine,
                folds=args.folds,
                seed=args.seed,
                train_condition=args.condition,
                test_condition=args.test_condition or args.condition,
                band_range_hz=(lo, hi),
            )
            result = pipeline.run_experiment(
                config, manifest, args.recordings_dir, model, cache_dir=args.cache_dir
            )
            degraded = degraded or bool(result.skipped)
            m = result.metrics
            rows.append(
                {
                    "octave_fraction": fraction,
                    "alpha": alpha,
                    "precision": round(m.precision, 1),
                    "recall": round(m.recall, 1),
                    "accuracy": round(m.accuracy, 1),
                    "n_train": result.n_train,
                    "n_test": result.n_test,
                    "skipped": len(result.skipped),
                }
            )
            print(
                f"1/{fraction}-octave alpha={alpha:<4g} "
                f"{m.precision:5.1f} {m.recall:5.1f} {m.accuracy:5.1f}"
                + (f"  ({len(result.skipped)} skipped)" if result.skipped else "")
            )
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(rows, indent=2))
    return EXIT_DEGRADED if degraded else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roomprint",
        description="Blind multi-band RT60 roomprints from speech, with room classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-gmm", help="train the speech model on dry speech WAVs")
    p.add_argument("--speech-dir", required=True)
    p.add_argument("--mixtures", type=int, default=1024)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_train_gmm)

    p = sub.add_parser("synth-dataset", help="convolve a manifest into reverberant WAVs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_synth_dataset)

    p = sub.add_parser("estimate-channel", help="blind channel estimate for one WAV")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output .npz")
    p.add_argument("--csv", help="optional CSV dump (freq_hz, log_magnitude)")
    _add_common(p)
    p.set_defaults(func=cmd_estimate_channel)

    p = sub.add_parser("extract-roomprint", help="roomprint from a WAV or channel estimate")
    p.add_argument("--model", help="speech model (required with --input)")
    p.add_argument("--input", help="reverberant WAV")
    p.add_argument("--channel", help="channel-estimate .npz from estimate-channel")
    p.add_argument("--out", required=True, help="output roomprint JSON")
    p.add_argument("--csv", help="optional roomprint CSV")
    p.add_argument("--rir-wav", help="optional synthesized RIR WAV dump")
    p.add_argument("--filter-csv", help="optional filter coefficient dump")
    p.add_argument("--label", help="room label to embed")
    _add_roomprint_params(p)
    _add_common(p)
    p.set_defaults(func=cmd_extract_roomprint)

    p = sub.add_parser("train-classifier", help="grid-searched RBF SVM over roomprints")
    p.add_argument("--roomprint-dir", required=True)
    p.add_argument("--manifest", help="manifest supplying labels by file stem")
    p.add_argument("--condition", default="near", choices=["near", "far", "mixed"])
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("classify", help="label one roomprint JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--roomprint", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="metrics for a labeled roomprint set")
    p.add_argument("--model", required=True)
    p.add_argument("--roomprint-dir", required=True)
    p.add_argument("--manifest")
    p.add_argument("--condition", default="near", choices=["near", "far", "mixed"])
    p.add_argument("--json-out")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run the experiment grid over a synthesized dataset")
    p.add_argument("--model", required=True, help="speech model file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--recordings-dir", required=True)
    p.add_argument("--octave-fractions", default="4")
    p.add_argument("--alphas", default="1.5")
    p.add_argument("--condition", default="near", choices=["near", "far", "mixed"])
    p.add_argument("--test-condition", choices=["near", "far", "mixed"])
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--cache-dir")
    p.add_argument("--json-out")
    _add_roomprint_params(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RoomprintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
