"""Command line entry point: ``moocsd {synth,prep,mine,bench}``.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines; keys
are flag names (dashes or underscores) and explicit flags win over the file.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

from .bench import run_benchmark
from .exceptions import ConfigError, DataError, InvariantError, MoocSDError
from .pipeline import OUTPUT_FORMATS, PipelineConfig, default_workers, encode_courses, load_inputs, run_pipeline
from .postprocess import REDUNDANCY_MODES
from .prep import save_dataset
from .synth import generate_synthetic, synthetic_tables

logger = logging.getLogger("moocsd")


def _csv_list(text: str) -> list[str]:
    return [t for t in re.split(r"[,\s]+", text.strip()) if t]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from exc


def _course_counts(text: str) -> list[int]:
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.|-)\s*(\d+)\s*", text)
    if m:
        return list(range(int(m.group(1)), int(m.group(2)) + 1))
    return _int_list(text)


def _allow_entry(text: str) -> tuple[str, list[str]]:
    target, sep, attrs = text.partition("=")
    if not sep or not target.strip():
        raise argparse.ArgumentTypeError(f"expected TARGET=attr,attr, got {text!r}")
    return target.strip(), _csv_list(attrs)


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in parser._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None:
            raise ConfigError(f"unknown config key: {key}")
        if isinstance(action, argparse._StoreTrueAction):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"{key} must be a boolean, got {raw!r}")
            defaults[key] = raw.lower() in ("true", "1", "yes")
        elif isinstance(action, argparse._AppendAction):
            defaults[key] = [action.type(tok) if action.type else tok for tok in raw.split(";") if tok.strip()]
        elif action.nargs in ("+", "*"):
            defaults[key] = _csv_list(raw)
        else:
            try:
                defaults[key] = action.type(raw) if action.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
            if action.choices is not None and defaults[key] not in action.choices:
                raise ConfigError(f"{key} must be one of {list(action.choices)}, got {raw!r}")
    parser.set_defaults(**defaults)


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-confidence", type=float, default=0.8)
    p.add_argument("--min-support-target", type=float, default=0.01)
    p.add_argument("--min-courses", type=int, default=None, help="default: every input course")
    p.add_argument("--max-antecedent", type=int, default=3)
    p.add_argument("--bins", type=int, default=3)
    p.add_argument("--targets", type=_csv_list, default=None, help="comma list, default all four")
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--partitions", type=int, default=1)
    p.add_argument("--redundancy", choices=REDUNDANCY_MODES, default="mean")
    p.add_argument("--attribute-allowlist", type=_allow_entry, action="append", default=None,
                   metavar="TARGET=ATTR,...", help="repeatable; replaces the built-in allowlist")
    p.add_argument("--no-default-allowlist", action="store_true",
                   help="let OnlyRegistered rules use activity attributes too")
    p.add_argument("--missing-tokens", type=_csv_list, default=[],
                   help="extra cell values read as missing, e.g. NA")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moocsd", description="Subgroup discovery over MOOC course data.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic course files")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--courses", type=int, default=16)
    p.add_argument("--rows-per-course", type=int, default=1000)
    p.add_argument("--output", required=True, help="output directory")

    p = sub.add_parser("prep", help="discretize and encode course files")
    p.add_argument("--config")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--bins", type=int, default=3)
    p.add_argument("--missing-tokens", type=_csv_list, default=[])
    p.add_argument("--output", required=True, help="output directory")

    p = sub.add_parser("mine", help="mine, post-process and write rule tables")
    p.add_argument("--config")
    p.add_argument("inputs", nargs="*", help="raw CSV files or prepared .json sidecars")
    _add_engine_flags(p)
    p.add_argument("--format", choices=OUTPUT_FORMATS, default="tsv")
    p.add_argument("--output", required=True, help="output directory")

    p = sub.add_parser("bench", help="time single-worker against multi-worker mining")
    p.add_argument("--config")
    p.add_argument("inputs", nargs="*", help="course files; synthetic data when omitted")
    _add_engine_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--courses", type=int, default=16)
    p.add_argument("--rows-per-course", type=int, default=62_500)
    p.add_argument("--course-counts", type=_course_counts, default=None, help="e.g. 1..16 or 1,4,16")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--output", default=None, help="file for the timing table (default stdout)")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # first pass only locates the subcommand and its --config file
    pre, _ = parser.parse_known_args(argv)
    config_path = getattr(pre, "config", None)
    if config_path:
        subparser = parser._subparsers._group_actions[0].choices[pre.command]
        _apply_config(subparser, read_config_file(config_path))
    return parser.parse_args(argv)


def _pipeline_config(args) -> PipelineConfig:
    if args.attribute_allowlist is not None:
        allow = {}
        for target, attrs in args.attribute_allowlist:
            allow.setdefault(target, set()).update(attrs)
    elif args.no_default_allowlist:
        allow = {}
    else:
        allow = None
    return PipelineConfig(
        inputs=tuple(getattr(args, "inputs", ()) or ()),
        output=getattr(args, "output", None) or "out",
        min_confidence=args.min_confidence,
        min_support_target=args.min_support_target,
        min_courses=args.min_courses,
        max_antecedent=args.max_antecedent,
        bins=args.bins,
        targets=args.targets,
        workers=args.workers,
        partitions=args.partitions,
        format=getattr(args, "format", "tsv"),
        seed=getattr(args, "seed", 0),
        redundancy=args.redundancy,
        attribute_allowlist=allow,
        missing_tokens=tuple(args.missing_tokens),
    )


def _safe_name(course_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", course_id)


def cmd_synth(args) -> int:
    if args.courses < 1 or args.rows_per_course < 1:
        raise ConfigError("courses and rows-per-course must be >= 1")
    for path in generate_synthetic(args.seed, args.courses, args.rows_per_course, args.output):
        print(path)
    return 0


def cmd_prep(args) -> int:
    cfg = PipelineConfig(inputs=tuple(args.inputs), bins=args.bins, missing_tokens=tuple(args.missing_tokens))
    cfg.validate()
    datasets = encode_courses(load_inputs(cfg.inputs, cfg.missing_tokens), cfg.discretizer_spec())
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for ds in datasets:
        _, meta = save_dataset(ds, out / _safe_name(ds.course_id))
        print(meta)
    return 0


def cmd_mine(args) -> int:
    result = run_pipeline(_pipeline_config(args))
    for msg in result.diagnostics:
        print(f"note: {msg}", file=sys.stderr)
    for path in result.files:
        print(path)
    return 0


def cmd_bench(args) -> int:
    cfg = _pipeline_config(args)
    if cfg.inputs:
        cfg.validate()
        datasets = encode_courses(load_inputs(cfg.inputs, cfg.missing_tokens), cfg.discretizer_spec())
    else:
        if args.courses < 1 or args.rows_per_course < 1:
            raise ConfigError("courses and rows-per-course must be >= 1")
        datasets = encode_courses(synthetic_tables(args.seed, args.courses, args.rows_per_course),
                                  cfg.discretizer_spec())
    counts = args.course_counts or [len(datasets)]
    report = run_benchmark(datasets, cfg, counts, args.repetitions, cfg.workers)
    text = report.table()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(report.verdict())
    return 0


COMMANDS = {"synth": cmd_synth, "prep": cmd_prep, "mine": cmd_mine, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except MoocSDError as exc:
        print(f"moocsd: {exc.stage} error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:  # argparse usage errors already exit with 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except MoocSDError as exc:
        print(f"moocsd: {exc.stage} error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"moocsd: data error: {exc}", file=sys.stderr)
        return DataError.exit_code
    except AssertionError as exc:
        print(f"moocsd: invariant violated: {exc}", file=sys.stderr)
        return InvariantError.exit_code


if __name__ == "__main__":
    sys.exit(main())
