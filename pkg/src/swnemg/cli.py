"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigurationError, DataError, DomainError, TrainingError
from .features import FEATURES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

log = logging.getLogger("swnemg")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", type=Path, default=default, help="TOML experiment config")
    parser.add_argument("--seed", type=int, default=default)
    parser.add_argument("--data-root", type=Path, default=default,
                        help="dataset directory (subject_<id>/...); synthetic cohort if omitted")
    parser.add_argument("--out", type=Path, default=argparse.SUPPRESS if suppress else Path("out"),
                        help="output directory for reports (default: ./out)")
    parser.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--normalization", choices=["SWN", "None"])
    p.add_argument("--feature", choices=list(FEATURES))
    p.add_argument("--norm-ms", type=int)
    p.add_argument("--feature-ms", type=int)
    p.add_argument("--weighting")
    p.add_argument("--dividing")
    p.add_argument("--subjects", type=int, dest="n_subjects", help="synthetic cohort size")
    p.add_argument("--sessions", type=int)
    p.add_argument("--shuffle-labels", action="store_true", default=None,
                   help="train on scrambled labels (chance-level control)")
    p.add_argument("--shuffle-scheme", choices=["relabel", "permute"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swnemg", description="Sliding-window normalisation experiments on EMG.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        return p

    p = add("synth", "generate a synthetic cohort into --data-root")
    p.add_argument("--subjects", type=int, dest="n_subjects", default=10)
    p.add_argument("--sessions", type=int, default=10)
    p.add_argument("--gain-spread", type=float, nargs=2, metavar=("LOW", "HIGH"),
                   default=(0.2, 5.0))

    p = add("run-own", "train and test on each subject's own data")
    _experiment_flags(p)

    p = add("run-other", "train on other subjects, test on each subject")
    _experiment_flags(p)
    p.add_argument("--train-subjects", type=int, dest="n_train_subjects")
    p.add_argument("--all-counts", action="store_true",
                   help="repeat for every number of training subjects")

    p = add("sweep", "normalisation x feature window length grid")
    _experiment_flags(p)
    p.add_argument("--model-type", choices=["OWN", "OTHER"])

    p = add("window-funcs", "weighting and dividing window comparison")
    _experiment_flags(p)
    p.add_argument("--model-type", choices=["OWN", "OTHER"])
    p.add_argument("--features", nargs="+", choices=list(FEATURES))

    p = add("correlate", "window std vs MAV correlation under SWN and None")
    _experiment_flags(p)
    p.add_argument("--trial-stride", type=int, default=1)

    p = add("bench", "per-tick latency of preprocessing + normalisation")
    p.add_argument("--ticks", type=int, default=1000)
    p.add_argument("--channels", type=int, default=12)
    p.add_argument("--norm-ms", type=int, default=500)

    p = add("report", "SWN/None x OWN/OTHER comparison with significance tests, "
                      "or re-render saved reports")
    _experiment_flags(p)
    p.add_argument("--features", nargs="+", choices=list(FEATURES))
    p.add_argument("--sweep", action="store_true", help="use the best window cell per group")
    p.add_argument("--from", dest="inputs", nargs="+", type=Path,
                   help="saved report JSON files to re-render instead of running")
    return parser


_CONFIG_KEYS = ("normalization", "feature", "norm_ms", "feature_ms", "weighting", "dividing",
                "n_subjects", "sessions", "shuffle_labels", "shuffle_scheme", "n_train_subjects",
                "model_type")


def make_config(args):
    from .harness import ExperimentConfig, read_toml
    data = read_toml(args.config) if args.config is not None else {}
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if args.seed is not None:
        data["seed"] = args.seed
    if args.data_root is not None:
        data["data_root"] = str(args.data_root)
    return ExperimentConfig.from_dict(data)


def _emit(report, out: Path, stem: str) -> None:
    from .report import emit_report
    paths = emit_report(report, out, stem)
    for p in paths:
        log.info("wrote %s", p)
    print(json.dumps({"report": stem, "summary": report.summary, "files": [str(p) for p in paths]},
                     indent=1, default=str))


def cmd_synth(args) -> None:
    from .dataio import write_dataset
    from .synth import generate_cohort
    if args.data_root is None:
        raise ConfigurationError("synth needs --data-root")
    seed = 0 if args.seed is None else args.seed
    try:
        cohort = generate_cohort(args.n_subjects, tuple(args.gain_spread), master_seed=seed,
                                 sessions=args.sessions)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    manifest = {"master_seed": seed, "gain_spread": list(args.gain_spread),
                "subjects": [s.spec.to_dict() for s in cohort], "code_version": __version__}
    try:
        write_dataset(args.data_root, cohort, manifest)
    except OSError as exc:
        raise DataError(f"cannot write dataset to {args.data_root}: {exc}") from exc
    print(json.dumps({"data_root": str(args.data_root), "subjects": len(cohort),
                      "trials_per_subject": len(cohort[0])}))


def cmd_run_own(args) -> None:
    from .harness import run_own
    _emit(run_own(make_config(args).replace(model_type="OWN")), args.out, "run-own")


def cmd_run_other(args) -> None:
    from .harness import run_other, subject_count_study
    config = make_config(args).replace(model_type="OTHER")
    if args.all_counts:
        _emit(subject_count_study(config), args.out, "subject-count")
    else:
        _emit(run_other(config), args.out, "run-other")


def cmd_sweep(args) -> None:
    from .harness import sweep_windows
    _emit(sweep_windows(make_config(args)), args.out, "sweep")


def cmd_window_funcs(args) -> None:
    from .harness import window_functions
    config = make_config(args)
    _emit(window_functions(config, features=args.features or FEATURES), args.out, "window-funcs")


def cmd_correlate(args) -> None:
    from .harness import correlation_analysis
    if args.trial_stride < 1:
        raise ConfigurationError("--trial-stride must be >= 1")
    _emit(correlation_analysis(make_config(args), trial_stride=args.trial_stride),
          args.out, "correlate")


def cmd_bench(args) -> None:
    from .bench import latency_bench
    try:
        report = latency_bench(args.ticks, args.channels, args.norm_ms,
                               seed=0 if args.seed is None else args.seed)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    _emit(report, args.out, "bench")


def cmd_report(args) -> None:
    from .report import load_report
    if args.inputs:
        for path in args.inputs:
            _emit(load_report(path), args.out, path.stem)
        return
    from .harness import compare_normalizations
    config = make_config(args)
    _emit(compare_normalizations(config, features=args.features, sweep=args.sweep),
          args.out, "report")


COMMANDS = {
    "synth": cmd_synth, "run-own": cmd_run_own, "run-other": cmd_run_other,
    "sweep": cmd_sweep, "window-funcs": cmd_window_funcs, "correlate": cmd_correlate,
    "bench": cmd_bench, "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DomainError, TrainingError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
