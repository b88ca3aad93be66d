"""Estimator front-ends over the mining and post-processing functions.

Both classes follow scikit-learn conventions: hyper-parameters are stored
verbatim by ``__init__`` (so ``get_params``/``set_params``/``clone`` work),
validation happens in ``fit``, and learned state ends with an underscore.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _validation as v
from .ingest import RawCourseTable, select_and_rename
from .mine import MiningConfig, mine_courses
from .postprocess import REDUNDANCY_MODES, postprocess
from .prep import Category, CourseDataset, DiscretizerSpec, ItemVocabulary, build_transactions
from .exceptions import ConfigError


def _as_datasets(courses, spec=None) -> list[CourseDataset]:
    vocab = None
    out = []
    for c in courses:
        if isinstance(c, RawCourseTable):
            if vocab is None:
                vocab = ItemVocabulary()
            c = build_transactions(select_and_rename(c), spec, vocab)
        out.append(c)
    return out


class SubgroupMiner(BaseEstimator):
    """Mine scored subgroups of a single course.

    ``fit`` stores ``rules_``: target -> list of :class:`~moocsd.rules.CourseRule`
    meeting ``min_support_target``, unfiltered by confidence.
    """

    def __init__(self, min_support_target=0.01, max_antecedent=3, targets=None,
                 attribute_allowlist=None, partitions=1, n_jobs=1):
        self.min_support_target = min_support_target
        self.max_antecedent = max_antecedent
        self.targets = targets
        self.attribute_allowlist = attribute_allowlist
        self.partitions = partitions
        self.n_jobs = n_jobs

    def _config(self) -> MiningConfig:
        return MiningConfig(
            min_support_target=v.check_fraction("min_support_target", self.min_support_target),
            min_confidence=0.0,
            max_antecedent=v.check_positive_int("max_antecedent", self.max_antecedent),
            targets=v.check_targets(self.targets),
            per_target_attribute_allowlist=v.check_allowlist(self.attribute_allowlist),
            partitions=v.check_positive_int("partitions", self.partitions),
        ).validate()

    def fit(self, X, y=None, executor=None):
        courses = v.check_courses(X)
        if len(courses) != 1:
            raise ConfigError("SubgroupMiner fits exactly one course; use SubgroupDiscovery for several")
        (dataset,) = _as_datasets(courses)
        workers = v.check_positive_int("n_jobs", self.n_jobs)
        self.rules_ = mine_courses([dataset], self._config(), workers, executor)[dataset.course_id]
        self.course_id_ = dataset.course_id
        return self


class SubgroupDiscovery(BaseEstimator):
    """Multi-course subgroup discovery with redundancy pruning.

    Parameters
    ----------
    min_support_target : float, default 0.01
        Per-course lower bound on the share of a target's records covered.
    min_confidence : float, default 0.8
        Per-course confidence filter applied before joining courses.
    min_courses : int or None
        Number of courses a rule must pass in; ``None`` means all of them.
    max_antecedent : int, default 3
    targets : iterable of Category or str, optional
        Defaults to all four categories.
    attribute_allowlist : dict, optional
        ``target -> attribute names`` usable in that target's antecedents.
    partitions : int, default 1
        Record partitions for the counting phase.
    n_jobs : int, default 1
        Worker processes; 1 runs everything in-process.
    redundancy : {"mean", "per_course"}, default "mean"

    Attributes
    ----------
    rules_ : dict
        Target -> ranked, non-redundant :class:`~moocsd.rules.Rule` list.
    unpruned_rules_ : dict
        Target -> ranked joined rules before redundancy removal.
    course_rules_ : dict
        Course id -> target -> mined :class:`~moocsd.rules.CourseRule` list.
    """

    def __init__(self, min_support_target=0.01, min_confidence=0.8, min_courses=None, max_antecedent=3,
                 targets=None, attribute_allowlist=None, partitions=1, n_jobs=1, redundancy="mean"):
        self.min_support_target = min_support_target
        self.min_confidence = min_confidence
        self.min_courses = min_courses
        self.max_antecedent = max_antecedent
        self.targets = targets
        self.attribute_allowlist = attribute_allowlist
        self.partitions = partitions
        self.n_jobs = n_jobs
        self.redundancy = redundancy

    def fit(self, X, y=None, executor=None, spec: DiscretizerSpec | None = None):
        courses = v.check_courses(X)
        min_courses = v.check_min_courses(self.min_courses, len(courses))
        if self.redundancy not in REDUNDANCY_MODES:
            raise ConfigError(f"redundancy must be one of {REDUNDANCY_MODES}, got {self.redundancy!r}")
        cfg = MiningConfig(
            min_support_target=v.check_fraction("min_support_target", self.min_support_target),
            min_confidence=v.check_fraction("min_confidence", self.min_confidence),
            max_antecedent=v.check_positive_int("max_antecedent", self.max_antecedent),
            targets=v.check_targets(self.targets),
            per_target_attribute_allowlist=v.check_allowlist(self.attribute_allowlist),
            partitions=v.check_positive_int("partitions", self.partitions),
        ).validate()
        datasets = _as_datasets(courses, spec)
        workers = v.check_positive_int("n_jobs", self.n_jobs)
        self.course_rules_ = mine_courses(datasets, cfg, workers, executor)
        self.rules_, self.unpruned_rules_ = postprocess(
            self.course_rules_, cfg.min_confidence, min_courses, self.redundancy)
        self.n_courses_ = len(datasets)
        self.min_courses_ = min_courses
        return self

    def get_rules(self, target=None):
        """Ranked rules of one target, or all rules ranked per target in category order."""
        check_is_fitted(self, "rules_")
        if target is None:
            return [r for t in self.rules_ for r in self.rules_[t] if t in self._targets()]
        t = target if isinstance(target, Category) else Category.parse(target)
        return list(self.rules_.get(t, []))

    def _targets(self):
        return v.check_targets(self.targets)
