"""SQL frontend: parser, planner, dependency extraction, and evaluator."""

from .ast import Statement, print_statement
from .catalog import CatalogSnapshot, ResolvedObject, resolve_write_target
from .deps import DependencySet, extract_dependencies
from .executor import ExecResult, Executor, StorageAdapter, cast_value
from .parser import parse
from .planner import PlannedStatement, PredicateStat, plan_statement, serialize_plan

__all__ = [
    "Statement",
    "print_statement",
    "CatalogSnapshot",
    "ResolvedObject",
    "resolve_write_target",
    "DependencySet",
    "extract_dependencies",
    "ExecResult",
    "Executor",
    "StorageAdapter",
    "cast_value",
    "parse",
    "PlannedStatement",
    "PredicateStat",
    "plan_statement",
    "serialize_plan",
]
