"""Mini stream engine: continuous queries, round-robin scheduling, virtual time.

In virtual mode the engine is a deterministic discrete-time simulation.  Each
round visits the Active queries in registration order and gives each one
quantum of ``q_rr`` ms of modelled work.  The ``n_p`` logical machines are an
ideal worker pool: every unit of modelled cost advances the clock by
``1 / n_p``.  Arrivals are admitted to the per-query input queues whenever the
clock passes their arrival time; the controller hook runs each time the clock
crosses a period boundary, between two quanta.
"""

from __future__ import annotations

import copy
import enum
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional

from ..qc_metrics import MetricsAccumulator, MetricsSample, snapshot
from .operators import QueryPlan, check_plan
from .params import PARAM_NAMES, CostModel, EngineParams
from .queues import BoundedQueue
from .tuples import STREAM_WIDTHS, Tuple

__all__ = [
    "Mode",
    "QueryState",
    "QueryConflictError",
    "Query",
    "QuantumResult",
    "RoundReport",
    "RunReport",
    "Engine",
    "Controller",
    "Observer",
]

log = logging.getLogger(__name__)

Controller = Callable[["Engine", MetricsSample], None]
Observer = Callable[[str, str, Tuple], None]


class Mode(enum.Enum):
    VIRTUAL = "virtual"
    REALTIME = "realtime"


class QueryState(enum.Enum):
    ACTIVE = "active"
    SUSPENDED = "suspended"


class QueryConflictError(ValueError):
    """A query id is already registered."""


class Query:
    """Runtime wrapper: a registered plan, its input queue and its state."""

    __slots__ = ("plan", "queue", "active", "order", "chain", "outputs", "latency_sum")

    def __init__(self, plan: QueryPlan, capacity: int, order: int, cost: CostModel):
        self.plan = plan
        self.queue = BoundedQueue(capacity)
        self.active = True
        self.order = order
        self.chain = [(op.apply, cost.operator_cost(op)) for op in plan.operators]
        self.outputs = 0
        self.latency_sum = 0.0

    @property
    def query_id(self) -> str:
        return self.plan.query_id

    @property
    def state(self) -> QueryState:
        return QueryState.ACTIVE if self.active else QueryState.SUSPENDED

    def __repr__(self) -> str:
        return f"Query({self.query_id!r}, {self.state.value}, queued={len(self.queue)})"


class QuantumResult(NamedTuple):
    processed: int
    outputs: int
    cost_ms: float


class RoundReport(NamedTuple):
    executions: int
    processed: int
    cost_ms: float
    clock_ms: float


@dataclass
class RunReport:
    inputs: int = 0
    outputs: int = 0
    drops: int = 0
    consumed: int = 0
    resident: int = 0
    latency_sum: float = 0.0
    duration_ms: float = 0.0
    truncated: bool = False
    samples: list[MetricsSample] = field(default_factory=list)
    final_params: Optional[dict[str, float]] = None
    learned: dict = field(default_factory=dict)
    files: list[str] = field(default_factory=list)

    @property
    def mean_Rt(self) -> float:
        return self.latency_sum / self.outputs if self.outputs else 0.0

    @property
    def Th(self) -> float:
        return self.outputs / (self.duration_ms / 1000.0) if self.duration_ms > 0 else 0.0

    @property
    def T_loss(self) -> float:
        return self.drops / self.inputs if self.inputs else 0.0

    @property
    def balanced(self) -> bool:
        return self.inputs == self.consumed + self.drops + self.resident

    def summary(self) -> dict:
        return {
            "inputs": self.inputs,
            "outputs": self.outputs,
            "drops": self.drops,
            "consumed": self.consumed,
            "resident": self.resident,
            "duration_ms": self.duration_ms,
            "truncated": self.truncated,
            "periods": len(self.samples),
            "mean_response_time_ms": self.mean_Rt,
            "throughput_tps": self.Th,
            "tuple_loss": self.T_loss,
            "final_params": self.final_params,
            "learned": self.learned,
            "files": list(self.files),
        }

    def to_json(self) -> str:
        d = self.summary()
        d["samples"] = [asdict(s) for s in self.samples]
        return json.dumps(d, sort_keys=True, indent=2)


class Engine:
    """Executable continuous-query engine.

    Parameters take effect at well-defined points: ``q_rr`` from the next
    quantum, ``n_p`` from the next clock advance, buffer and query-budget
    changes immediately.
    """

    def __init__(
        self,
        params: EngineParams | None = None,
        cost: CostModel | None = None,
        widths: dict[str, int] | None = None,
        observer: Observer | None = None,
        period_ms: float = 500.0,
    ):
        self.params = (params or EngineParams()).clamped()
        self.cost = cost or CostModel()
        self.widths = dict(STREAM_WIDTHS if widths is None else widths)
        self.observer = observer
        self.queries: list[Query] = []
        self._by_id: dict[str, Query] = {}
        self._subs: dict[str, list[Query]] = {}
        self._active: list[Query] = []
        self._next_tick = float("inf")
        self.clock = 0.0
        self.period_ms = period_ms
        self.buckets: dict[int, MetricsAccumulator] = {}
        self.totals = {"inputs": 0, "outputs": 0, "drops": 0, "latency_sum": 0.0}
        self._arrivals: list[Tuple] = []
        self._next_arrival = 0
        self._end = float("inf")
        self.idle_step_ms = 1.0

    # -- registration and parameters -------------------------------------------------

    def register_query(self, plan: QueryPlan) -> str:
        if plan.query_id in self._by_id:
            raise QueryConflictError(f"query {plan.query_id!r} already registered")
        check_plan(plan, self.widths)
        plan = copy.deepcopy(plan)
        for op in plan.operators:
            op.reset()
        q = Query(plan, self.params.s_b, len(self.queries), self.cost)
        self.queries.append(q)
        self._by_id[plan.query_id] = q
        self._rebalance()
        return plan.query_id

    def query(self, query_id: str) -> Query:
        return self._by_id[query_id]

    @property
    def active_queries(self) -> list[Query]:
        return list(self._active)

    def _rebalance(self) -> None:
        """Keep the ``n_q`` highest-priority queries Active (earlier registration wins ties)."""
        ranked = sorted(self.queries, key=lambda q: (-q.plan.priority, q.order))
        keep = {id(q) for q in ranked[: self.params.n_q]}
        for q in self.queries:
            q.active = id(q) in keep
        subs: dict[str, list[Query]] = {}
        for q in self.queries:
            if q.active:
                subs.setdefault(q.plan.stream, []).append(q)
        self._subs = subs
        self._active = [q for q in self.queries if q.active]

    def apply_params(self, new: EngineParams) -> EngineParams:
        applied = new.clamped()
        old = self.params
        self.params = applied
        if applied.s_b != old.s_b:
            for q in self.queries:
                evicted = q.queue.resize(applied.s_b)
                if evicted:
                    self._bucket(self.clock).tuples_dropped += len(evicted)
                    self.totals["drops"] += len(evicted)
                    if self.observer is not None:
                        for t in evicted:
                            self.observer("evict", q.query_id, t)
        if applied.n_q != old.n_q:
            self._rebalance()
        if self.cost.reconfig_ms and applied.values() != old.values():
            self.clock += self.cost.reconfig_ms
        return applied

    # -- accounting -------------------------------------------------------------------

    def _bucket(self, t_ms: float) -> MetricsAccumulator:
        k = int(t_ms // self.period_ms)
        acc = self.buckets.get(k)
        if acc is None:
            acc = self.buckets[k] = MetricsAccumulator()
        return acc

    def _add_outputs(self, key: int, n: int, latency: float) -> None:
        acc = self.buckets.get(key)
        if acc is None:
            acc = self.buckets[key] = MetricsAccumulator()
        acc.outputs_emitted += n
        acc.latency_sum += latency

    def resident(self) -> int:
        return sum(len(q.queue) for q in self.queries)

    def consumed(self) -> int:
        return sum(q.queue.dequeued for q in self.queries)

    # -- arrivals ---------------------------------------------------------------------

    def attach(self, tuples: Iterable[Tuple], end_ms: float = float("inf")) -> None:
        self._arrivals = list(tuples)
        self._next_arrival = 0
        self._end = end_ms

    def offer(self, t: Tuple) -> int:
        """Offer ``t`` to every Active query on its stream; returns the number of drops."""
        subs = self._subs.get(t.stream)
        if not subs:
            return 0
        drops = 0
        obs = self.observer
        for q in subs:
            ok = q.queue.offer(t)
            if not ok:
                drops += 1
            if obs is not None:
                obs("accept" if ok else "drop", q.query_id, t)
        acc = self._bucket(t.arrival)
        acc.inputs_seen += len(subs)
        acc.tuples_dropped += drops
        self.totals["inputs"] += len(subs)
        self.totals["drops"] += drops
        return drops

    def _ingest(self, upto: float) -> None:
        arr = self._arrivals
        i = self._next_arrival
        n = len(arr)
        end = self._end
        while i < n:
            t = arr[i]
            if t.arrival > upto or t.arrival >= end:
                break
            self.offer(t)
            i += 1
        self._next_arrival = i

    def _next_event_time(self) -> float:
        if self._next_arrival < len(self._arrivals):
            return self._arrivals[self._next_arrival].arrival
        return self.clock + self.idle_step_ms

    # -- execution --------------------------------------------------------------------

    def execute_quantum(self, query: Query, budget_ms: float) -> QuantumResult:
        """Serve ``query`` FIFO until its modelled cost reaches ``budget_ms`` or the queue empties.

        Starts at the current clock without advancing it; the tuple in
        progress when the budget runs out is completed.
        """
        queue = query.queue
        res = queue.resident
        if not res:
            return QuantumResult(0, 0, 0.0)
        cm = self.cost
        n_p = self.params.n_p
        start = self.clock + cm.switch_ms / n_p
        per_tuple = cm.dispatch_ms + cm.memory_ms_per_kslot * queue.capacity / 1000.0
        chain = query.chain
        period = self.period_ms
        obs = self.observer
        qid = query.query_id

        cost = 0.0
        processed = 0
        outputs = 0
        lat_sum = 0.0
        # outputs are attributed to the period in which they complete
        b_key = -1
        b_outs = 0
        b_lat = 0.0
        while res and cost < budget_ms:
            t = res.popleft()
            c = per_tuple
            x = t
            for apply, oc in chain:
                c += oc
                x = apply(x)
                if x is None:
                    break
            cost += c
            processed += 1
            if obs is not None:
                obs("dequeue", qid, t)
            if x is not None:
                done = start + cost / n_p
                lat = done - x.arrival
                k = int(done // period)
                if k != b_key:
                    if b_outs:
                        self._add_outputs(b_key, b_outs, b_lat)
                    b_key, b_outs, b_lat = k, 0, 0.0
                b_outs += 1
                b_lat += lat
                outputs += 1
                lat_sum += lat
                if obs is not None:
                    obs("output", qid, x)
        if b_outs:
            self._add_outputs(b_key, b_outs, b_lat)
        queue.dequeued += processed
        query.outputs += outputs
        query.latency_sum += lat_sum
        self.totals["outputs"] += outputs
        self.totals["latency_sum"] += lat_sum
        return QuantumResult(processed, outputs, cost + cm.switch_ms)

    def _rounds(self, after_quantum: Callable[[], None] | None = None) -> RoundReport:
        executions = processed = 0
        total_cost = 0.0
        arr = self._arrivals
        n_arr = len(arr)
        end = self._end
        for q in self._active:
            if self.clock >= end:
                break
            if not q.active:
                # suspended by a controller tick earlier in this round
                continue
            executions += 1
            i = self._next_arrival
            if i < n_arr and arr[i].arrival <= self.clock:
                self._ingest(self.clock)
            if not q.queue.resident:
                continue
            res = self.execute_quantum(q, self.params.q_rr)
            processed += res.processed
            total_cost += res.cost_ms
            self.clock += res.cost_ms / self.params.n_p
            if after_quantum is not None and self.clock >= self._next_tick:
                after_quantum()
        if not processed:
            self.clock = max(self.clock, min(self._next_event_time(), self._next_tick, end))
            if after_quantum is not None and self.clock >= self._next_tick:
                after_quantum()
        return RoundReport(executions, processed, total_cost, self.clock)

    def scheduler_round(self) -> RoundReport:
        """One round-robin pass over the Active queries in registration order."""
        return self._rounds()

    # -- running ----------------------------------------------------------------------

    def run(
        self,
        workload,
        duration_ms: float,
        mode: Mode | str = Mode.VIRTUAL,
        controller: Controller | None = None,
        period_ms: float | None = None,
    ) -> RunReport:
        """Run until the clock reaches ``duration_ms``.

        ``workload`` is a :class:`~adaptive_dsms.trace_io.Workload`, or any
        arrival-ordered iterable of tuples.  If the workload's horizon ends
        before ``duration_ms`` the run stops at the horizon and is flagged as
        truncated.
        """
        mode = Mode(mode)
        if period_ms is not None:
            self.period_ms = float(period_ms)
        if self.period_ms <= 0:
            raise ValueError("period must be positive")
        tuples = getattr(workload, "tuples", workload)
        horizon = getattr(workload, "horizon_ms", float("inf"))
        truncated = horizon < duration_ms
        end = min(float(duration_ms), horizon)
        if mode is Mode.REALTIME:
            from .realtime import run_realtime

            return run_realtime(self, tuples, end, controller, truncated)
        return self._run_virtual(tuples, end, controller, truncated)

    def _run_virtual(self, tuples, end: float, controller: Controller | None, truncated: bool) -> RunReport:
        self.attach(tuples, end)
        period = self.period_ms
        samples: list[MetricsSample] = []
        state = {"n": 0}

        def tick_due() -> None:
            self._ingest(min(self.clock, end))
            while (state["n"] + 1) * period <= min(self.clock, end):
                n = state["n"]
                acc = self.buckets.pop(n, None) or MetricsAccumulator()
                sample = snapshot(acc, period, n)
                samples.append(sample)
                state["n"] = n + 1
                self._next_tick = (n + 2) * period
                if controller is not None:
                    controller(self, sample)

        self._next_tick = period
        while self.clock < end:
            self._rounds(tick_due)
        tick_due()
        self._next_tick = float("inf")
        return self._report(min(self.clock, end) if end > 0 else 0.0, truncated, samples)

    def _report(self, duration: float, truncated: bool, samples: list[MetricsSample]) -> RunReport:
        return RunReport(
            inputs=self.totals["inputs"],
            outputs=self.totals["outputs"],
            drops=self.totals["drops"],
            consumed=self.consumed(),
            resident=self.resident(),
            latency_sum=self.totals["latency_sum"],
            duration_ms=duration,
            truncated=truncated,
            samples=samples,
            final_params={n: getattr(self.params, n) for n in PARAM_NAMES},
        )
