"""Command-line entry point.

Exit status: 0 success, 1 usage error, 2 data or model error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from myoinc.config import load_config, read_config_file
from myoinc.dsp import design_bandpass, design_notch, window_view
from myoinc.errors import MyoincError
from myoinc.features import feature_header, feature_matrix
from myoinc.labels import MotionLabel, resolve_label
from myoinc.lda import CLASSIFIER_KINDS, POOLING_MODES, complexity_report
from myoinc.model_io import load_model, save_model
from myoinc.recording import load_recording, write_recording, write_recording_csv
from myoinc.session import (
    RecordingPipeline,
    Session,
    SessionScript,
    build_report,
    profile_latency,
    report_text,
    run_session,
)
from myoinc.synth import default_synth_spec, synth_generate

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key = value stream configuration file")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--model", help="model file (MYOM)")
    p.add_argument("--efficacy-mode", choices=["literal", "speed-weighted", "speed_weighted"],
                   default="literal")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="myoinc", description=__doc__.splitlines()[0])
    parser.add_argument("--dump-filters", action="store_true",
                        help="print designed filter sections and exit")
    parser.add_argument("--config", dest="top_config", help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic recording")
    p.add_argument("--out", required=True, help="output path (.csv for CSV, else binary)")
    p.add_argument("--trials", type=int, default=30, help="trials per class")

    p = sub.add_parser("features", parents=[common], help="dump per-window features as CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("train", parents=[common], help="fit an initial model")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True, help="comma-separated label names or ids")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--pooling", choices=POOLING_MODES, default=None)

    p = sub.add_parser("add-class", parents=[common], help="extend a model by one class")
    p.add_argument("--data", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--out", help="output model path (default: overwrite --model)")

    p = sub.add_parser("test", parents=[common], help="score a model on held-out trials")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--confusion-csv", help="also write the confusion matrix as CSV")

    p = sub.add_parser("session", parents=[common], help="replay a session script")
    p.add_argument("--script", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--model-out", help="save the final model")
    p.add_argument("--confusion-csv")
    p.add_argument("--pooling", choices=POOLING_MODES, default=None)

    p = sub.add_parser("profile", parents=[common], help="per-stage latency report")
    p.add_argument("--data", required=True)
    p.add_argument("--max-windows", type=int)
    p.add_argument("--out")

    p = sub.add_parser("complexity", parents=[common], help="classifier operation counts")
    p.add_argument("--classifier", required=True, choices=CLASSIFIER_KINDS)
    p.add_argument("--w", type=int, required=True, help="feature dimension")
    p.add_argument("--q", type=int, help="support vectors (SVM)")
    p.add_argument("--s", type=int, help="training samples (k-NN)")

    sub.add_parser("dump-filters", parents=[common], help="print designed filter sections")
    return parser


# --------------------------------------------------------------------------


def _calib_path(model_path) -> Path:
    return Path(str(model_path) + ".calib")


def _save_calibration(calibration: dict[MotionLabel, float], model_path) -> None:
    data = {str(lab.id): ref for lab, ref in sorted(calibration.items())}
    _calib_path(model_path).write_text(json.dumps(data, sort_keys=True) + "\n", encoding="utf-8")


def _load_calibration(model, model_path) -> dict[MotionLabel, float]:
    path = _calib_path(model_path)
    if not path.exists():
        logging.getLogger("myoinc").warning("no calibration file %s; speeds use test amplitudes", path)
        return {}
    raw = json.loads(path.read_text(encoding="utf-8"))
    return {lab: float(raw[str(lab.id)]) for lab in model.labels if str(lab.id) in raw}


def _pooling(args) -> str:
    if getattr(args, "pooling", None):
        return args.pooling
    if args.config:
        return read_config_file(args.config).get("pooling", "sum")
    return "sum"


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _labels(tokens: str, available) -> list[MotionLabel]:
    out = []
    for tok in (t for t in tokens.split(",") if t):
        try:
            out.append(resolve_label(tok, available))
        except KeyError:
            raise MyoincError(f"label {tok!r} not present in the data") from None
    return out


def _need_model(args) -> str:
    if not args.model:
        raise UsageError("--model is required for this command")
    return args.model


def _dump_filters(config) -> str:
    bp, nt = config.bandpass, config.notch
    lines = ["# band-pass sections: b0 b1 b2 a1 a2"]
    lines += design_bandpass(config.sample_rate, bp.low_hz, bp.high_hz, bp.order).format_sections()
    lines.append("# notch sections: b0 b1 b2 a1 a2")
    lines += design_notch(config.sample_rate, nt.center_hz, nt.q).format_sections()
    return "\n".join(lines) + "\n"


def cmd_synth(args, config) -> None:
    spec = default_synth_spec(args.seed, sample_rate=int(round(config.sample_rate)))
    if spec.channel_count != config.channel_count:
        raise MyoincError(
            f"default synthetic set has {spec.channel_count} channels, config asks for {config.channel_count}"
        )
    rec = synth_generate(spec, args.trials)
    if args.out.lower().endswith(".csv"):
        write_recording_csv(rec, args.out)
    else:
        write_recording(rec, args.out)


def cmd_features(args, config) -> None:
    rec = load_recording(args.data)
    pipe = RecordingPipeline(rec, config)
    L, s = config.window_len, config.window_shift
    wins = window_view(pipe.filtered, L, s)
    starts = np.arange(len(wins)) * s
    label_at = {}
    for t in rec.trials:
        for st in pipe.trial_starts(t):
            label_at[int(st)] = t.label.name
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start", "label"] + feature_header(config.channel_count))
        for i in range(0, len(wins), 1024):
            feats, _ = feature_matrix(wins[i:i + 1024])
            for st, row in zip(starts[i:i + 1024], feats):
                w.writerow([int(st), label_at.get(int(st), "")] + [f"{v:.9g}" for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_train(args, config) -> None:
    model_path = _need_model(args)
    rec = load_recording(args.data)
    session = Session(RecordingPipeline(rec, config), _pooling(args), args.efficacy_mode)
    labels = _labels(args.labels, rec.labels)
    if len(labels) < 2:
        raise UsageError("train needs at least 2 labels")
    for lab in labels:
        session.train(lab, args.trials)
    save_model(session.model, model_path)
    _save_calibration(session.calibration, model_path)


def cmd_add_class(args, config) -> None:
    model_path = _need_model(args)
    rec = load_recording(args.data)
    model = load_model(model_path)
    calibration = _load_calibration(model, model_path)
    session = Session(RecordingPipeline(rec, config), model.pooling, args.efficacy_mode,
                      model=model, calibration=calibration)
    (label,) = _labels(args.label, rec.labels)
    session.add(label, args.trials)
    out = args.out or model_path
    save_model(session.model, out)
    _save_calibration(session.calibration, out)


def cmd_test(args, config) -> None:
    model_path = _need_model(args)
    rec = load_recording(args.data)
    model = load_model(model_path)
    session = Session(RecordingPipeline(rec, config), model.pooling, args.efficacy_mode,
                      model=model, calibration=_load_calibration(model, model_path))
    result = session.test(_labels(args.labels, rec.labels), args.trials)
    report = build_report(config, model, [result], session.efficacy_mode)
    _emit(report_text(report), args.out)
    if args.confusion_csv:
        Path(args.confusion_csv).write_text(result.confusion.to_csv(), encoding="utf-8")


def cmd_session(args, config) -> None:
    script = SessionScript.load(args.script)
    rec = load_recording(args.data)
    result = run_session(script, rec, config, _pooling(args), args.efficacy_mode)
    _emit(result.report_text(), args.out)
    model_out = args.model_out or args.model
    if model_out and result.model is not None:
        save_model(result.model, model_out)
        _save_calibration(result.calibration, model_out)
    if args.confusion_csv and result.confusion is not None:
        Path(args.confusion_csv).write_text(result.confusion.to_csv(), encoding="utf-8")


def cmd_profile(args, config) -> None:
    rec = load_recording(args.data)
    model = load_model(args.model) if args.model else None
    report = profile_latency(config, rec, model, args.max_windows)
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)


def cmd_complexity(args, config) -> None:
    try:
        counts = complexity_report(args.classifier, args.w, args.q, args.s)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(" ".join(f"{k}={v}" for k, v in counts.items()))


COMMANDS = {
    "synth": cmd_synth,
    "features": cmd_features,
    "train": cmd_train,
    "add-class": cmd_add_class,
    "test": cmd_test,
    "session": cmd_session,
    "profile": cmd_profile,
    "complexity": cmd_complexity,
    "dump-filters": lambda args, config: sys.stdout.write(_dump_filters(config)),
}


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if not argv:
            raise UsageError("no command given")
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.dump_filters and args.command is None:
            sys.stdout.write(_dump_filters(load_config(args.top_config)))
            return EXIT_OK
        if args.command is None:
            raise UsageError("no command given")
        config = load_config(args.config)
        COMMANDS[args.command](args, config)
        return EXIT_OK
    except UsageError as exc:
        parser.print_help(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (MyoincError, OSError, ValueError, AssertionError) as exc:
        print(f"myoinc: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
