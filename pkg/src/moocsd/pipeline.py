"""End-to-end runner: load courses, encode, mine, post-process, write reports."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import Executor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import _validation as v
from .exceptions import ConfigError, DataError
from .ingest import RawCourseTable, load_course_table, select_and_rename
from .mine import MiningConfig, mine_courses
from .postprocess import REDUNDANCY_MODES, postprocess
from .prep import (DEMOGRAPHIC_ATTRIBUTES, Category, CourseDataset, DiscretizerSpec,
                   ItemVocabulary, load_dataset, prepare_courses)

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("tsv", "json")
TSV_COLUMNS = ("rule", "antecedent", "target", "support_target", "confidence", "courses_matched")


def default_workers() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return max(1, os.cpu_count() or 1)


def default_allowlist() -> dict:
    # registration-only learners have no activity, so only demographics can describe them
    return {Category.ONLY_REGISTERED: DEMOGRAPHIC_ATTRIBUTES}


@dataclass
class PipelineConfig:
    """Settings for one pipeline run.

    ``inputs`` are raw CSV files (split by ``course_id``) or ``.json`` sidecars
    written by the ``prep`` stage. ``min_courses=None`` means every course.
    ``attribute_allowlist=None`` applies :func:`default_allowlist`; pass an
    empty dict to let every target use every attribute.
    """

    inputs: Sequence[str] = ()
    output: str = "out"
    min_confidence: float = 0.8
    min_support_target: float = 0.01
    min_courses: Optional[int] = None
    max_antecedent: int = 3
    bins: int = 3
    targets: Optional[Sequence] = None
    workers: int = field(default_factory=default_workers)
    partitions: int = 1
    format: str = "tsv"
    seed: int = 0
    redundancy: str = "mean"
    attribute_allowlist: Optional[dict] = None
    missing_tokens: tuple = ()

    def mining_config(self) -> MiningConfig:
        allow = default_allowlist() if self.attribute_allowlist is None else self.attribute_allowlist
        return MiningConfig(
            min_support_target=v.check_fraction("min_support_target", self.min_support_target),
            min_confidence=v.check_fraction("min_confidence", self.min_confidence),
            max_antecedent=v.check_positive_int("max_antecedent", self.max_antecedent),
            targets=v.check_targets(self.targets),
            per_target_attribute_allowlist=v.check_allowlist(allow) or None,
            partitions=v.check_positive_int("partitions", self.partitions),
        ).validate()

    def validate(self) -> "PipelineConfig":
        if not self.inputs:
            raise ConfigError("at least one input path is required")
        if self.format not in OUTPUT_FORMATS:
            raise ConfigError(f"format must be one of {OUTPUT_FORMATS}, got {self.format!r}")
        if self.redundancy not in REDUNDANCY_MODES:
            raise ConfigError(f"redundancy must be one of {REDUNDANCY_MODES}, got {self.redundancy!r}")
        v.check_positive_int("bins", self.bins)
        v.check_positive_int("workers", self.workers)
        self.mining_config()
        return self

    def discretizer_spec(self) -> DiscretizerSpec:
        return DiscretizerSpec(bins=int(self.bins)).validate()

    def echo(self) -> dict:
        """Result-affecting settings; execution knobs are in :meth:`execution`."""
        d = asdict(self)
        for key in ("workers", "partitions", "output"):
            d.pop(key)
        d["inputs"] = [str(p) for p in self.inputs]
        d["targets"] = [c.value for c in v.check_targets(self.targets)]
        allow = default_allowlist() if self.attribute_allowlist is None else self.attribute_allowlist
        d["attribute_allowlist"] = {
            c.value: sorted(a) for c, a in (v.check_allowlist(allow) or {}).items()}
        d["missing_tokens"] = list(self.missing_tokens)
        return d

    def execution(self) -> dict:
        return {"workers": int(self.workers), "partitions": int(self.partitions)}


def load_inputs(paths: Sequence, missing_tokens: tuple = ()) -> list:
    """Raw tables from CSV files and prepared datasets from ``.json`` sidecars.

    A course id seen twice, in one file or across files, is a data error.
    """
    courses, seen = [], set()
    vocab = ItemVocabulary()
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise DataError(f"input not found: {path}")
        if path.suffix == ".json":
            found = [load_dataset(path, vocab)]
        else:
            found = list(load_course_table(path, missing_tokens=missing_tokens).values())
        for c in found:
            if c.course_id in seen:
                raise DataError(f"course {c.course_id!r} appears in more than one input")
            seen.add(c.course_id)
            courses.append(c)
    return courses


def encode_courses(courses: Sequence, spec: DiscretizerSpec) -> list[CourseDataset]:
    """Encode raw tables against the vocabulary shared with any prepared inputs."""
    vocab = next((c.vocabulary for c in courses if isinstance(c, CourseDataset)), ItemVocabulary())
    raw = [select_and_rename(c) for c in courses if isinstance(c, RawCourseTable)]
    encoded = iter(prepare_courses(raw, spec, vocab))
    return [c if isinstance(c, CourseDataset) else next(encoded) for c in courses]


@dataclass
class PipelineResult:
    datasets: list
    course_rules: dict
    rules: dict
    unpruned: dict
    min_courses: int
    diagnostics: list
    files: list = field(default_factory=list)


def run_stages(datasets: Sequence[CourseDataset], cfg: PipelineConfig,
               executor: Optional[Executor] = None) -> PipelineResult:
    """Mine and post-process already-encoded courses."""
    mcfg = cfg.mining_config()
    min_courses = v.check_min_courses(cfg.min_courses, len(datasets))
    course_rules = mine_courses(datasets, mcfg, cfg.workers, executor)
    rules, unpruned = postprocess(course_rules, mcfg.min_confidence, min_courses, cfg.redundancy)
    diagnostics = []
    for t in mcfg.targets:
        if not rules[t]:
            msg = f"no rule for {t.value} reached confidence {mcfg.min_confidence} in {min_courses} course(s)"
            logger.warning(msg)
            diagnostics.append(msg)
    return PipelineResult(list(datasets), course_rules, rules, unpruned, min_courses, diagnostics)


def _fmt(x) -> str:
    return f"{float(x):.6f}"


def write_rule_tables(result: PipelineResult, targets: Sequence[Category], out_dir: Path, fmt: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = [{"target": t.value, "rules": [r.to_dict() for r in result.rules[t]]} for t in targets]
        path = out_dir / "rules.json"
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        return [path]
    paths = []
    for t in targets:
        path = out_dir / f"rules_{t.value}.tsv"
        lines = ["\t".join(TSV_COLUMNS)]
        for r in result.rules[t]:
            lines.append("\t".join((
                r.render(), " AND ".join(str(it) for it in r.antecedent), t.rule_label,
                _fmt(r.mean_support_target), _fmt(r.mean_confidence), str(r.courses_matched))))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths.append(path)
    return paths


def build_manifest(result: PipelineResult, cfg: PipelineConfig) -> dict:
    targets = v.check_targets(cfg.targets)
    return {
        "config": cfg.echo(),
        "execution": cfg.execution(),
        "min_courses": result.min_courses,
        "courses": [
            {
                "course_id": ds.course_id,
                "rows": len(ds),
                "target_totals": {c.value: n for c, n in ds.target_totals.items()},
                "bin_edges": {k: list(e) for k, e in sorted(ds.bin_edges.items())},
            }
            for ds in result.datasets
        ],
        "rule_counts": {
            t.value: {"joined": len(result.unpruned[t]), "non_redundant": len(result.rules[t])}
            for t in targets
        },
        "diagnostics": list(result.diagnostics),
    }


def run_pipeline(cfg: PipelineConfig, executor: Optional[Executor] = None) -> PipelineResult:
    """Load, encode, mine, post-process and write rule tables plus ``manifest.json``."""
    cfg.validate()
    datasets = encode_courses(load_inputs(cfg.inputs, tuple(cfg.missing_tokens)), cfg.discretizer_spec())
    v.check_min_courses(cfg.min_courses, len(datasets))
    result = run_stages(datasets, cfg, executor)
    out_dir = Path(cfg.output)
    result.files = write_rule_tables(result, v.check_targets(cfg.targets), out_dir, cfg.format)
    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps(build_manifest(result, cfg), indent=2) + "\n", encoding="utf-8")
    result.files.append(manifest)
    return result
