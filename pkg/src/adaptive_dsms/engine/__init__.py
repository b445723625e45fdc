"""Stream engine: tuples, bounded queues, operators, query plans and the scheduler."""

from .core import (
    Engine,
    Mode,
    Query,
    QueryConflictError,
    QueryState,
    QuantumResult,
    RoundReport,
    RunReport,
)
from .operators import (
    AggregateFunction,
    Comparison,
    Filter,
    PlanError,
    Project,
    QueryPlan,
    WindowAggregate,
    check_plan,
    eval_operator,
)
from .params import PARAM_NAMES, CostModel, EngineParams, default_bounds
from .queues import Admission, BoundedQueue, enqueue
from .tuples import STREAM_WIDTHS, Tuple

__all__ = [
    "Engine",
    "Mode",
    "Query",
    "QueryConflictError",
    "QueryState",
    "QuantumResult",
    "RoundReport",
    "RunReport",
    "AggregateFunction",
    "Comparison",
    "Filter",
    "PlanError",
    "Project",
    "QueryPlan",
    "WindowAggregate",
    "check_plan",
    "eval_operator",
    "PARAM_NAMES",
    "CostModel",
    "EngineParams",
    "default_bounds",
    "Admission",
    "BoundedQueue",
    "enqueue",
    "STREAM_WIDTHS",
    "Tuple",
]
