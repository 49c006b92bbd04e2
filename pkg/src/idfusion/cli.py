"""Command-line entry point.

Subcommands:
  simulate   generate a calibrated synthetic dataset and run the k-fold experiment
  evaluate   run the k-fold experiment on score CSVs exported from real models
  fuse       one fused prediction from two confidence vectors and a saved model
  prep-ecg   condition a raw ECG recording into the fixed-length window
  calibrate  fit the simulator noise level to a target rank-1 accuracy

Exit codes: 0 success, 1 usage, 2 data validation, 3 runtime failure.
Every failure prints a single ``error: ...`` line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core import ValidationError
from .ecg import PeakDetectorConfig, preprocess, read_signal, write_signal
from .evaluation import EvalConfig, run_experiment, train_fusion_model
from .fusion import predict_fused
from .io import (
    dump_dataset_scores,
    load_fusion_model,
    load_paired_dataset,
    parse_config_file,
    render_report_text,
    report_to_dict,
    save_fusion_model,
    write_report,
)
from .simulator import (
    DEFAULT_CLEAN_TARGETS,
    DEFAULT_DEGRADED_TARGETS,
    DESK_PRESET,
    FULL_PRESET,
    CalibrationError,
    DegradationScenario,
    GeneratorParams,
    SubjectRule,
    calibrate,
    calibrate_clean_regime,
    calibrate_degraded_regime,
    generate_dataset,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; route through our codes instead
    def error(self, message):
        raise _UsageError(message)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_divisors(text: str) -> tuple[int, ...]:
    t = text.strip().lower()
    if t in ("", "none"):
        return ()
    return tuple(int(x) for x in t.split(","))


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.asarray([float(x) for x in text.split(",")], dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"not a comma-separated float vector: {text!r}") from exc


# config-file keys per subcommand: flag name -> (args attribute, converter)
_CONFIG_KEYS = {
    "simulate": {
        "preset": ("preset", str),
        "subjects": ("subjects", int),
        "samples": ("samples", int),
        "scenario": ("scenario", str),
        "face-rule": ("face_rule", _parse_divisors),
        "ecg-rule": ("ecg_rule", _parse_divisors),
        "face-target": ("face_target", float),
        "ecg-target": ("ecg_target", float),
        "face-overall": ("face_overall", float),
        "ecg-overall": ("ecg_overall", float),
        "trials": ("trials", int),
        "seed": ("seed", int),
        "folds": ("folds", int),
        "bound": ("bound", float),
        "rank-depth": ("rank_depth", int),
        "threads": ("threads", int),
        "out": ("out", str),
        "format": ("format", str),
        "dump-scores": ("dump_scores", str),
        "save-model": ("save_model", str),
    },
    "evaluate": {
        "face": ("face", str),
        "ecg": ("ecg", str),
        "no-normalize": ("no_normalize", _parse_bool),
        "scenario": ("scenario", str),
        "seed": ("seed", int),
        "folds": ("folds", int),
        "bound": ("bound", float),
        "rank-depth": ("rank_depth", int),
        "threads": ("threads", int),
        "out": ("out", str),
        "format": ("format", str),
        "save-model": ("save_model", str),
    },
}

_DEFAULTS = {
    "simulate": {
        "preset": "desk",
        "scenario": "clean",
        "face_target": DEFAULT_CLEAN_TARGETS[0],
        "ecg_target": DEFAULT_CLEAN_TARGETS[1],
        "face_overall": DEFAULT_DEGRADED_TARGETS[0],
        "ecg_overall": DEFAULT_DEGRADED_TARGETS[1],
        "trials": 100_000,
        "seed": 0,
        "folds": 10,
        "bound": 0.20,
        "rank_depth": 5,
        "threads": 1,
        "format": "text",
    },
    "evaluate": {
        "no_normalize": False,
        "scenario": "unspecified",
        "seed": 0,
        "folds": 10,
        "bound": 0.20,
        "rank_depth": 5,
        "threads": 1,
        "format": "text",
    },
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="idfusion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("simulate", help="calibrated synthetic experiment", parents=[])
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--preset", choices=["desk", "full"])
    p.add_argument("--subjects", type=int)
    p.add_argument("--samples", type=int, help="samples per subject")
    p.add_argument("--scenario", choices=["clean", "degraded"])
    p.add_argument("--face-rule", type=_parse_divisors, help="degraded-subject divisors, e.g. 2,3")
    p.add_argument("--ecg-rule", type=_parse_divisors)
    p.add_argument("--face-target", type=float, help="clean rank-1 accuracy target")
    p.add_argument("--ecg-target", type=float)
    p.add_argument("--face-overall", type=float, help="degraded-regime overall accuracy target")
    p.add_argument("--ecg-overall", type=float)
    p.add_argument("--trials", type=int, help="Monte-Carlo trials per calibration")
    p.add_argument("--seed", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--bound", type=float)
    p.add_argument("--rank-depth", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="report path (default: print to stdout)")
    p.add_argument("--format", choices=["text", "structured"])
    p.add_argument("--dump-scores", help="directory for exported score CSVs")
    p.add_argument("--save-model", help="path for the fusion model trained on all samples")

    p = sub.add_parser("evaluate", help="k-fold experiment from score CSVs")
    p.add_argument("--config")
    p.add_argument("--face", help="face score CSV")
    p.add_argument("--ecg", help="ecg score CSV")
    p.add_argument("--no-normalize", action="store_const", const=True,
                   help="trust the files to already be in [0, 1]")
    p.add_argument("--scenario", help="label echoed into the report")
    p.add_argument("--seed", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--bound", type=float)
    p.add_argument("--rank-depth", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=["text", "structured"])
    p.add_argument("--save-model")

    p = sub.add_parser("fuse", help="single fused prediction from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--face", required=True, help="comma-separated confidence vector")
    p.add_argument("--ecg", required=True)

    p = sub.add_parser("prep-ecg", help="condition a raw ECG recording")
    p.add_argument("--in", dest="input", required=True, help=".txt (one value/line) or .csv (time,value)")
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=float, help="sample rate in Hz (default 512; inferred for CSV)")
    p.add_argument("--duration", type=float, default=4.0, help="gate length in seconds")
    p.add_argument("--threshold-fraction", type=float, default=0.8)
    p.add_argument("--search-window", type=float, default=1.5, help="peak search window in seconds")

    p = sub.add_parser("calibrate", help="fit a noise sigma to a target accuracy")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--classes", type=int, default=87)
    p.add_argument("--samples", type=int, default=100, help="samples per subject (echoed in params)")
    p.add_argument("--mean", type=float, default=1.0, help="true-class logit offset")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma-min", type=float, default=1e-4)
    p.add_argument("--sigma-max", type=float, default=1e4)
    p.add_argument("--out", help="write the result JSON here instead of stdout")

    return parser


def _merge_config(args, command: str) -> None:
    """Fill unset flags from the config file, then apply the hard defaults."""
    if getattr(args, "config", None):
        keys = _CONFIG_KEYS[command]
        for key, value in parse_config_file(args.config).items():
            if key not in keys:
                raise _UsageError(f"unknown config key {key!r} for {command}")
            dest, conv = keys[key]
            if getattr(args, dest) is None:
                try:
                    setattr(args, dest, conv(value))
                except (ValueError, ValidationError) as exc:
                    raise _UsageError(f"config key {key!r}: {exc}") from exc
    for dest, value in _DEFAULTS[command].items():
        if getattr(args, dest) is None:
            setattr(args, dest, value)


def _eval_config(args) -> EvalConfig:
    return EvalConfig(
        bound=args.bound,
        rank_depth=args.rank_depth,
        scenario=args.scenario,
        threads=args.threads,
    )


def _emit_report(report, args) -> None:
    if args.out:
        write_report(report, args.out, fmt=args.format)
    elif args.format == "structured":
        sys.stdout.write(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(render_report_text(report))


def _cmd_simulate(args) -> int:
    _merge_config(args, "simulate")
    if args.preset not in ("desk", "full"):
        raise _UsageError(f"unknown preset {args.preset!r}")
    if args.scenario not in ("clean", "degraded"):
        raise _UsageError(f"unknown scenario {args.scenario!r}")
    subjects, samples = {"desk": DESK_PRESET, "full": FULL_PRESET}[args.preset]
    if args.subjects is not None:
        subjects = args.subjects
    if args.samples is not None:
        samples = args.samples
    if args.scenario == "clean" and (args.face_rule is not None or args.ecg_rule is not None):
        raise _UsageError("--face-rule/--ecg-rule require --scenario degraded")

    cal_seed, data_seed = np.random.SeedSequence(args.seed).spawn(2)
    clean_cal = calibrate_clean_regime(
        num_classes=subjects,
        samples_per_class=samples,
        face_target=args.face_target,
        ecg_target=args.ecg_target,
        trials=args.trials,
        seed=cal_seed,
    )
    if args.scenario == "degraded":
        default = DegradationScenario.default_degraded()
        scenario = DegradationScenario(
            face_rule=SubjectRule(args.face_rule) if args.face_rule is not None else default.face_rule,
            ecg_rule=SubjectRule(args.ecg_rule) if args.ecg_rule is not None else default.ecg_rule,
            name="degraded",
        )
        regime = calibrate_degraded_regime(
            clean_cal,
            face_overall_target=args.face_overall,
            ecg_overall_target=args.ecg_overall,
            scenario=scenario,
            trials=args.trials,
            seed=cal_seed.spawn(1)[0],
        )
    else:
        regime = clean_cal

    dataset = generate_dataset(regime.face, regime.ecg, regime.scenario, data_seed)
    cfg = _eval_config(args)
    report = run_experiment(dataset, k=args.folds, seed=args.seed, cfg=cfg)

    if args.dump_scores:
        dump_dataset_scores(dataset, args.dump_scores)
    if args.save_model:
        model = train_fusion_model(dataset.face, dataset.ecg, dataset.labels, cfg)
        save_fusion_model(model, args.save_model)
    _emit_report(report, args)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    _merge_config(args, "evaluate")
    if not args.face or not args.ecg:
        raise _UsageError("evaluate requires --face and --ecg score files")
    dataset = load_paired_dataset(args.face, args.ecg, normalize=not args.no_normalize)
    cfg = _eval_config(args)
    report = run_experiment(dataset, k=args.folds, seed=args.seed, cfg=cfg)
    if args.save_model:
        model = train_fusion_model(dataset.face, dataset.ecg, dataset.labels, cfg)
        save_fusion_model(model, args.save_model)
    _emit_report(report, args)
    return EXIT_OK


def _cmd_fuse(args) -> int:
    model = load_fusion_model(args.model)
    c_face = _parse_vector(args.face)
    c_ecg = _parse_vector(args.ecg)
    sys.stdout.write(f"{predict_fused(c_face, c_ecg, model)}\n")
    return EXIT_OK


def _cmd_prep_ecg(args) -> int:
    sig = read_signal(args.input, sample_rate=args.rate)
    detector = PeakDetectorConfig(
        threshold_fraction=args.threshold_fraction,
        search_window_seconds=args.search_window,
    )
    write_signal(preprocess(sig, detector, duration_seconds=args.duration), args.out)
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    template = GeneratorParams(
        num_classes=args.classes,
        samples_per_class=args.samples,
        true_class_mean=args.mean,
    )
    result = calibrate(
        args.target,
        template,
        trials=args.trials,
        seed=args.seed,
        sigma_range=(args.sigma_min, args.sigma_max),
    )
    doc = {
        "target": result.target,
        "sigma": result.sigma,
        "achieved": result.achieved,
        "trials": result.trials,
        "num_classes": args.classes,
        "true_class_mean": args.mean,
    }
    payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "evaluate": _cmd_evaluate,
    "fuse": _cmd_fuse,
    "prep-ecg": _cmd_prep_ecg,
    "calibrate": _cmd_calibrate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required (see --help)")
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        sys.stderr.write(f"error: usage: {exc}\n")
        return EXIT_USAGE
    except ValidationError as exc:
        sys.stderr.write(f"error: invalid data: {exc}\n")
        return EXIT_DATA
    except CalibrationError as exc:
        sys.stderr.write(f"error: runtime: {exc}\n")
        return EXIT_RUNTIME
    except OSError as exc:
        sys.stderr.write(f"error: runtime: {exc}\n")
        return EXIT_RUNTIME
    except Exception as exc:  # keep the contract: any failure is one line + code 3
        sys.stderr.write(f"error: runtime: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
