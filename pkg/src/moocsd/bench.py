"""Single-worker versus multi-worker timing of the mining engine."""

from __future__ import annotations

import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import mean
from typing import Sequence

from . import _validation as v
from .exceptions import ConfigError, EngineMismatchError
from .pipeline import PipelineConfig, run_stages


@dataclass
class BenchmarkReport:
    workers: int
    rows: list = field(default_factory=list)  # (n_courses, n_rows, single_mean, multi_mean, repetitions)

    @property
    def speedup_ok(self) -> bool:
        """Multi-worker mean strictly below single-worker mean at the largest count."""
        if not self.rows:
            return False
        last = max(self.rows, key=lambda r: r[0])
        return last[3] < last[2]

    def table(self, sep: str = "\t") -> str:
        out = io.StringIO()
        out.write(sep.join(("courses", "rows", "single_mean_s", f"multi{self.workers}_mean_s",
                            "speedup", "repetitions")) + "\n")
        for n, rows, single, multi, reps in self.rows:
            out.write(sep.join((str(n), str(rows), f"{single:.4f}", f"{multi:.4f}",
                                f"{single / multi:.3f}" if multi > 0 else "inf", str(reps))) + "\n")
        return out.getvalue()

    def verdict(self) -> str:
        if not self.rows:
            return "FAIL speedup: no measurements"
        n, _, single, multi, _ = max(self.rows, key=lambda r: r[0])
        status = "PASS" if self.speedup_ok else "FAIL"
        return (f"{status} speedup: {self.workers} workers {multi:.4f}s vs single {single:.4f}s "
                f"at {n} courses")


def _signature(result) -> tuple:
    """Everything a report shows, in comparable form."""
    return (
        {cid: {t: [(r.antecedent, r.joint, r.ant_total, r.target_total) for r in rs]
               for t, rs in per.items()} for cid, per in result.course_rules.items()},
        {t: [(r.antecedent, tuple(r.per_course)) for r in rs] for t, rs in result.rules.items()},
    )


def run_benchmark(datasets: Sequence, cfg: PipelineConfig, course_counts: Sequence[int],
                  repetitions: int = 1, workers: int | None = None) -> BenchmarkReport:
    """Time count, mine and post-process on the first ``k`` courses for each ``k``.

    Parsing and encoding are outside the timed region, and so is the start-up
    of the worker pool. Every multi-worker result is compared with the
    single-worker one and a difference raises :class:`EngineMismatchError`.
    """
    repetitions = v.check_positive_int("repetitions", repetitions)
    workers = v.check_positive_int("workers", workers if workers is not None else cfg.workers)
    counts = [v.check_positive_int("course count", k) for k in course_counts]
    if not counts or max(counts) > len(datasets):
        raise ConfigError(f"course counts must lie in [1, {len(datasets)}], got {list(course_counts)}")
    single_cfg = replace(cfg, workers=1)
    multi_cfg = replace(cfg, workers=workers)
    report = BenchmarkReport(workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # warm the pool so process start-up stays out of the timings
        list(pool.map(abs, range(workers)))
        for k in counts:
            subset = list(datasets[:k])
            rows = sum(len(d) for d in subset)
            single_times, multi_times = [], []
            for _ in range(repetitions):
                t0 = time.perf_counter()
                ref = run_stages(subset, single_cfg)
                single_times.append(time.perf_counter() - t0)
                t0 = time.perf_counter()
                got = run_stages(subset, multi_cfg, pool)
                multi_times.append(time.perf_counter() - t0)
                if _signature(got) != _signature(ref):
                    raise EngineMismatchError(f"multi-worker output differs from single-worker at {k} courses")
            report.rows.append((k, rows, mean(single_times), mean(multi_times), repetitions))
    return report
