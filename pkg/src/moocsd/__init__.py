"""Subgroup discovery over MOOC learner tables.

Courses are discretized into items, mined per target category with a
partition-parallel FP-Tree engine, and the rules found in enough courses are
filtered, pruned of redundant specialisations and ranked.
"""

from .estimator import SubgroupDiscovery, SubgroupMiner
from .exceptions import ConfigError, DataError, InvariantError, MoocSDError
from .ingest import RawCourseTable, load_course_table, select_and_rename
from .mine import MiningConfig, mine_course, mine_courses
from .pipeline import PipelineConfig, run_pipeline
from .postprocess import cross_course_join, filter_confidence, postprocess, prune_redundant, rank
from .prep import (Category, CourseDataset, CourseDiscretizer, DiscretizerSpec, Item, ItemVocabulary,
                   Transaction, build_transactions, prepare_courses)
from .rules import CourseRule, Rule

__version__ = "0.1.0"

__all__ = [
    "Category", "ConfigError", "CourseDataset", "CourseDiscretizer", "CourseRule", "DataError",
    "DiscretizerSpec", "InvariantError", "Item", "ItemVocabulary", "MiningConfig", "MoocSDError",
    "PipelineConfig", "RawCourseTable", "Rule", "SubgroupDiscovery", "SubgroupMiner", "Transaction",
    "build_transactions", "cross_course_join", "filter_confidence", "load_course_table", "mine_course",
    "mine_courses", "postprocess", "prepare_courses", "prune_redundant", "rank", "run_pipeline",
    "select_and_rename",
]
