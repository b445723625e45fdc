"""Tunable engine parameters, their clamp bounds, and the virtual cost model."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

__all__ = ["PARAM_NAMES", "INTEGER_PARAMS", "EngineParams", "CostModel", "default_bounds"]

PARAM_NAMES = ("q_rr", "n_p", "n_q", "s_b")
INTEGER_PARAMS = frozenset({"n_p", "n_q", "s_b"})

# Hard floors every bound must respect.
_FLOORS = {"q_rr": 1.0, "n_p": 1, "n_q": 0, "s_b": 1}


def default_bounds(n_queries: int | None = None) -> dict[str, tuple[float, float]]:
    return {
        "q_rr": (10.0, 2000.0),
        "n_p": (1, 16),
        "n_q": (0, n_queries if n_queries is not None else 64),
        "s_b": (10, 10000),
    }


@dataclass(frozen=True)
class EngineParams:
    """Round-robin quantum (ms), worker count, active-query budget and buffer size (tuples)."""

    q_rr: float = 500.0
    n_p: int = 4
    n_q: int = 8
    s_b: int = 500
    bounds: dict[str, tuple[float, float]] = field(default_factory=default_bounds, compare=False)

    def __post_init__(self) -> None:
        for name, (lo, hi) in self.bounds.items():
            if name not in PARAM_NAMES:
                raise ValueError(f"unknown parameter {name!r} in bounds")
            if lo > hi:
                raise ValueError(f"inverted bounds for {name}: min {lo} > max {hi}")
            if lo < _FLOORS[name]:
                raise ValueError(f"lower bound of {name} must be >= {_FLOORS[name]}, got {lo}")

    def values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def clamp_value(self, name: str, value: float) -> float:
        lo, hi = self.bounds.get(name, (_FLOORS[name], float("inf")))
        if name in INTEGER_PARAMS:
            value = int(round(value))
            lo, hi = int(round(lo)), int(round(hi))
        else:
            value = float(value)
        return min(max(value, lo), hi)

    def clamped(self) -> "EngineParams":
        return replace(self, **{name: self.clamp_value(name, getattr(self, name)) for name in PARAM_NAMES})

    def with_values(self, **values: float) -> "EngineParams":
        """Copy with some fields replaced, clamped into bounds."""
        return replace(self, **values).clamped()

    def in_bounds(self) -> bool:
        return all(self.clamp_value(n, getattr(self, n)) == getattr(self, n) for n in PARAM_NAMES)


@dataclass(frozen=True)
class CostModel:
    """Modelled service times for virtual-time execution, in milliseconds.

    A dequeued tuple costs ``dispatch_ms`` plus the cost of each operator it
    reaches (a filter that rejects it stops the chain).  Every quantum that
    finds work pays ``switch_ms`` before its first tuple.  Buffer memory is
    not free: each dequeue also costs ``memory_ms_per_kslot`` per thousand
    slots of the queue's capacity.  Changing any parameter stalls the engine
    for ``reconfig_ms``.
    """

    filter_ms: float = 0.02
    project_ms: float = 0.02
    window_ms: float = 0.05
    dispatch_ms: float = 0.01
    switch_ms: float = 0.5
    memory_ms_per_kslot: float = 0.0
    reconfig_ms: float = 0.0

    def __post_init__(self) -> None:
        for name in ("filter_ms", "project_ms", "window_ms", "dispatch_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if min(self.switch_ms, self.memory_ms_per_kslot, self.reconfig_ms) < 0:
            raise ValueError("switch, memory and reconfiguration costs must be non-negative")

    def operator_cost(self, op) -> float:
        if op.cost_ms is not None:
            return op.cost_ms
        return {"filter": self.filter_ms, "project": self.project_ms, "window": self.window_ms}[op.kind]
