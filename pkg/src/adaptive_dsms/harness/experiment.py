"""Run one configured experiment, or a baseline/learning pair, and write CSVs."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from ..engine.core import Engine, RunReport
from ..learning_unit import LearningUnit, TickRecord, snapshot_learned
from ..trace_io import TraceParseError, Workload, generate_synthetic, load_trace, merge_streams
from .config import ExperimentConfig

__all__ = [
    "WorkloadError",
    "InvalidComparisonError",
    "Comparison",
    "build_workload",
    "run_experiment",
    "compare",
    "METRICS_HEADER",
    "PARAMS_HEADER",
    "PROBS_HEADER",
]

log = logging.getLogger(__name__)

METRICS_HEADER = ("n", "R_t", "Th", "T_loss", "avg_Rt", "avg_Tloss", "avg_Th", "f", "avg_f")
PARAMS_HEADER = ("n", "q_rr", "n_p", "n_q", "s_b")
PROBS_HEADER = ("n", "p_all_hold", "p_max", "argmax")


class WorkloadError(RuntimeError):
    """The workload could not be loaded or generated."""


class InvalidComparisonError(ValueError):
    """Two configs do not share workload, queries, duration and seed."""


def _seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def build_workload(cfg: ExperimentConfig) -> Workload:
    spec = cfg.workload
    try:
        if spec.kind == "trace":
            return load_trace(spec.path, spec.time_scale)
        seeds = _seeds(cfg.seed, len(spec.streams) + 1)[1:]
        parts = [generate_synthetic(s.synthetic(seed), cfg.duration_ms) for s, seed in zip(spec.streams, seeds)]
        return merge_streams(parts)
    except TraceParseError as exc:
        raise WorkloadError(str(exc)) from exc
    except OSError as exc:
        raise WorkloadError(f"cannot read trace {spec.path}: {exc.strerror or exc}") from exc


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _metrics_row(r: TickRecord):
    s = r.sample
    return (r.n, s.R_t, s.Th, s.T_loss, r.avg_Rt, r.avg_Tloss, r.avg_Th, r.f, r.avg_f)


def _params_row(r: TickRecord):
    p = r.params
    return (r.n, float(p.q_rr), p.n_p, p.n_q, p.s_b)


def _probs_row(r: TickRecord):
    return (r.n, r.p_all_hold, r.p_max, r.argmax)


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None) -> RunReport:
    """Run ``cfg`` and write metrics.csv, params.csv, probs.csv and summary.json into ``out_dir``."""
    out_dir = out_dir or cfg.output_dir
    workload = build_workload(cfg) if cfg.duration_ms > 0 else Workload([], 0.0)
    engine = Engine(cfg.params, cfg.cost, period_ms=cfg.learning.period_ms)
    for plan in cfg.queries:
        engine.register_query(plan)
    unit = LearningUnit(cfg.learning, seed=_seeds(cfg.seed, 1)[0], enabled=cfg.learning_enabled)
    log.info("running %s: %s mode, %.0f ms, learning %s", cfg.name, cfg.mode.value, cfg.duration_ms, "on" if cfg.learning_enabled else "off")
    report = engine.run(workload, cfg.duration_ms, cfg.mode, controller=unit, period_ms=cfg.learning.period_ms)
    report.learned = snapshot_learned(unit, engine.params).to_dict()
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        files = {
            "metrics.csv": (METRICS_HEADER, map(_metrics_row, unit.records)),
            "params.csv": (PARAMS_HEADER, map(_params_row, unit.records)),
            "probs.csv": (PROBS_HEADER, map(_probs_row, unit.records)),
        }
        for name, (header, rows) in files.items():
            path = os.path.join(out_dir, name)
            _write_csv(path, header, rows)
            report.files.append(path)
        summary_path = os.path.join(out_dir, "summary.json")
        report.files.append(summary_path)
        with open(summary_path, "w", encoding="utf-8") as fh:
            # file names relative to out_dir so the summary does not depend on where it was written
            summary = dict(report.summary(), files=[os.path.basename(f) for f in report.files])
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


@dataclass(frozen=True)
class Comparison:
    baseline: RunReport
    learning: RunReport

    @staticmethod
    def change(before: float, after: float) -> float:
        if before == 0:
            return 0.0 if after == 0 else float("inf") if after > 0 else float("-inf")
        return (after - before) / before * 100.0

    def rows(self) -> list[tuple[str, float, float, float]]:
        b, l = self.baseline, self.learning
        out = []
        for label, x, y in (
            ("response_time_ms", b.mean_Rt, l.mean_Rt),
            ("throughput_tps", b.Th, l.Th),
            ("tuple_loss", b.T_loss, l.T_loss),
        ):
            out.append((label, x, y, self.change(x, y)))
        return out

    def table(self) -> str:
        lines = [f"{'metric':<18} {'baseline':>14} {'learning':>14} {'change %':>10}"]
        for label, x, y, pct in self.rows():
            lines.append(f"{label:<18} {x:>14.4f} {y:>14.4f} {pct:>+10.2f}")
        return "\n".join(lines)


def compare(cfg_baseline: ExperimentConfig, cfg_learning: ExperimentConfig, out_dir: str | None = None) -> Comparison:
    """Run both configs on the same workload and report relative changes (learning vs baseline)."""
    if cfg_baseline.comparable_key() != cfg_learning.comparable_key():
        diffs = [
            name
            for name, x, y in zip(
                ("workload", "queries", "duration_ms", "seed"),
                cfg_baseline.comparable_key(),
                cfg_learning.comparable_key(),
            )
            if x != y
        ]
        raise InvalidComparisonError(f"configs differ in {', '.join(diffs)}; both runs must share workload, queries, duration and seed")
    sub = (lambda name: os.path.join(out_dir, name)) if out_dir else (lambda name: None)
    base = run_experiment(cfg_baseline, sub("baseline"))
    learn = run_experiment(cfg_learning, sub("learning"))
    result = Comparison(base, learn)
    if out_dir:
        _write_csv(
            os.path.join(out_dir, "comparison.csv"),
            ("metric", "baseline", "learning", "change_pct"),
            result.rows(),
        )
    return result
