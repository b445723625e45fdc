"""Relational operators and continuous-query plans.

Every operator maps one input tuple to at most one output tuple, which keeps
the per-tuple path of a plan a simple chain.
"""

from __future__ import annotations

import enum
import operator as _op
from dataclasses import dataclass, field
from typing import Sequence, Union

from .tuples import STREAM_WIDTHS, Tuple

__all__ = [
    "PlanError",
    "Comparison",
    "Filter",
    "Project",
    "WindowAggregate",
    "Operator",
    "QueryPlan",
    "eval_operator",
    "check_plan",
]


class PlanError(ValueError):
    """A query plan whose operators do not fit its input schema."""


class Comparison(enum.Enum):
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    EQ = "=="
    NE = "!="


_CMP = {
    Comparison.LT: _op.lt,
    Comparison.LE: _op.le,
    Comparison.GT: _op.gt,
    Comparison.GE: _op.ge,
    Comparison.EQ: _op.eq,
    Comparison.NE: _op.ne,
}


@dataclass
class Filter:
    attr: int
    cmp: Comparison
    value: int
    cost_ms: float | None = None

    kind = "filter"

    def __post_init__(self) -> None:
        self.cmp = Comparison(self.cmp)
        self._fn = _CMP[self.cmp]

    def out_width(self, width: int) -> int:
        if not 0 <= self.attr < width:
            raise PlanError(f"filter attribute {self.attr} outside a {width}-attribute schema")
        return width

    def apply(self, t: Tuple) -> Tuple | None:
        return t if self._fn(t.attrs[self.attr], self.value) else None

    def reset(self) -> None:
        pass


@dataclass
class Project:
    keep: tuple[int, ...]
    cost_ms: float | None = None

    kind = "project"

    def __post_init__(self) -> None:
        self.keep = tuple(self.keep)
        if not self.keep:
            raise PlanError("project must keep at least one attribute")
        get = _op.itemgetter(*self.keep)
        self._get = get if len(self.keep) > 1 else (lambda a: (get(a),))

    def out_width(self, width: int) -> int:
        bad = [i for i in self.keep if not 0 <= i < width]
        if bad:
            raise PlanError(f"project keeps attribute(s) {bad} outside a {width}-attribute schema")
        return len(self.keep)

    def apply(self, t: Tuple) -> Tuple:
        return t.derive(self._get(t.attrs))

    def reset(self) -> None:
        pass


class AggregateFunction(enum.Enum):
    COUNT = "count"
    SUM = "sum"
    AVG = "avg"
    MAX = "max"


@dataclass
class WindowAggregate:
    """Tumbling count window: one output per ``size`` inputs.

    ``avg`` is reported as the floor of the mean so outputs stay integral.
    """

    func: AggregateFunction
    attr: int
    size: int
    cost_ms: float | None = None
    _n: int = field(default=0, init=False, repr=False)
    _acc: int = field(default=0, init=False, repr=False)

    kind = "window"

    def __post_init__(self) -> None:
        self.func = AggregateFunction(self.func)
        if self.size < 1:
            raise PlanError(f"window size must be >= 1, got {self.size}")
        self.reset()

    def out_width(self, width: int) -> int:
        if not 0 <= self.attr < width:
            raise PlanError(f"aggregate attribute {self.attr} outside a {width}-attribute schema")
        return 1

    def reset(self) -> None:
        self._n = 0
        self._acc = 0 if self.func is not AggregateFunction.MAX else None  # type: ignore[assignment]

    def apply(self, t: Tuple) -> Tuple | None:
        v = t.attrs[self.attr]
        f = self.func
        if f is AggregateFunction.MAX:
            self._acc = v if self._acc is None or v > self._acc else self._acc
        elif f is not AggregateFunction.COUNT:
            self._acc += v
        self._n += 1
        if self._n < self.size:
            return None
        if f is AggregateFunction.COUNT:
            value = self._n
        elif f is AggregateFunction.AVG:
            value = self._acc // self._n
        else:
            value = self._acc
        self.reset()
        return t.derive((value,))


Operator = Union[Filter, Project, WindowAggregate]


@dataclass
class QueryPlan:
    query_id: str
    stream: str
    operators: Sequence[Operator]
    priority: int = 0

    def __post_init__(self) -> None:
        self.operators = list(self.operators)


def check_plan(plan: QueryPlan, widths: dict[str, int] = STREAM_WIDTHS) -> int:
    """Validate operator chaining and return the output width."""
    if not plan.operators:
        raise PlanError(f"query {plan.query_id!r} has no operators")
    if plan.stream not in widths:
        raise PlanError(f"query {plan.query_id!r} reads unknown stream {plan.stream!r}")
    width = widths[plan.stream]
    for k, op in enumerate(plan.operators):
        try:
            width = op.out_width(width)
        except PlanError as exc:
            raise PlanError(f"query {plan.query_id!r}, operator {k}: {exc}") from None
    return width


def eval_operator(op: Operator, t: Tuple) -> list[Tuple]:
    needed = getattr(op, "attr", None)
    idx = [needed] if needed is not None else list(getattr(op, "keep", ()))
    if any(not 0 <= i < t.attr_count for i in idx):
        raise ValueError(f"{op.kind} operator does not fit a {t.attr_count}-attribute tuple")
    out = op.apply(t)
    return [] if out is None else [out]
