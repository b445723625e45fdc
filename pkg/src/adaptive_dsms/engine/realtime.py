"""Wall-clock execution with ``n_p`` worker threads.

The main thread admits arrivals when their (scaled) arrival time has passed
and runs the controller at period boundaries.  Workers serve disjoint subsets
of the Active queries round-robin, each quantum bounded by measured time.
Before every tick the workers are stopped and joined, so the snapshot sees a
consistent cut and parameters are applied between rounds.
"""

from __future__ import annotations

import threading
import time
from typing import TYPE_CHECKING

from ..qc_metrics import MetricsAccumulator, MetricsSample, snapshot

if TYPE_CHECKING:
    from .core import Controller, Engine, Query, RunReport

__all__ = ["run_realtime"]


class _Clock:
    def __init__(self) -> None:
        self.t0 = time.perf_counter()

    def now_ms(self) -> float:
        return (time.perf_counter() - self.t0) * 1000.0


def _serve(queries: list["Query"], engine: "Engine", clock: _Clock, acc: MetricsAccumulator, stop: threading.Event) -> None:
    while not stop.is_set():
        busy = False
        for q in queries:
            if stop.is_set():
                break
            res = q.queue.resident
            if not q.active or not res:
                continue
            busy = True
            deadline = clock.now_ms() + engine.params.q_rr
            outs = 0
            lat = 0.0
            n = 0
            while res:
                try:
                    t = res.popleft()
                except IndexError:
                    break
                n += 1
                x = t
                for apply, _ in q.chain:
                    x = apply(x)
                    if x is None:
                        break
                now = clock.now_ms()
                if x is not None:
                    outs += 1
                    lat += max(0.0, now - x.arrival)
                if now >= deadline or stop.is_set():
                    break
            q.queue.dequeued += n
            q.outputs += outs
            q.latency_sum += lat
            with acc._lock:
                acc.outputs_emitted += outs
                acc.latency_sum += lat
        if not busy:
            stop.wait(0.0005)


def run_realtime(engine: "Engine", tuples, end_ms: float, controller: "Controller | None", truncated: bool) -> "RunReport":
    period = engine.period_ms
    arrivals = list(tuples)
    acc = MetricsAccumulator()
    samples: list[MetricsSample] = []
    clock = _Clock()
    i = 0
    n = 0

    def start() -> tuple[threading.Event, list[threading.Thread]]:
        stop = threading.Event()
        active = engine.active_queries
        k = max(1, engine.params.n_p)
        threads = []
        for w in range(min(k, len(active))):
            mine = active[w::k]
            th = threading.Thread(target=_serve, args=(mine, engine, clock, acc, stop), daemon=True)
            th.start()
            threads.append(th)
        return stop, threads

    def halt(stop: threading.Event, threads: list[threading.Thread]) -> None:
        stop.set()
        for th in threads:
            th.join()

    stop, threads = start()
    try:
        while True:
            now = clock.now_ms()
            engine.clock = min(now, end_ms)
            while i < len(arrivals) and arrivals[i].arrival <= now and arrivals[i].arrival < end_ms:
                t = arrivals[i]
                subs = engine._subs.get(t.stream, ())
                drops = sum(0 if q.queue.offer(t) else 1 for q in subs)
                with acc._lock:
                    acc.inputs_seen += len(subs)
                    acc.tuples_dropped += drops
                engine.totals["inputs"] += len(subs)
                engine.totals["drops"] += drops
                i += 1
            boundary = (n + 1) * period
            if boundary <= min(now, end_ms):
                halt(stop, threads)
                dropped_before = engine.totals["drops"]
                sample = snapshot(acc, period, n)
                samples.append(sample)
                n += 1
                if controller is not None:
                    controller(engine, sample)
                # shrink drops from apply_params land in the next period
                shrink = engine.totals["drops"] - dropped_before
                if shrink:
                    engine.buckets.clear()
                    acc.tuples_dropped += shrink
                stop, threads = start()
                continue
            if now >= end_ms:
                break
            nxt = min(boundary, end_ms)
            if i < len(arrivals):
                nxt = min(nxt, arrivals[i].arrival)
            time.sleep(max(0.0, min(nxt - now, 5.0)) / 1000.0)
    finally:
        halt(stop, threads)
    engine.clock = end_ms
    report = engine._report(end_ms, truncated, samples)
    report.outputs = sum(q.outputs for q in engine.queries)
    report.latency_sum = sum(q.latency_sum for q in engine.queries)
    return report
