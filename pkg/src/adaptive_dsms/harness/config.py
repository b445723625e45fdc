"""Experiment configuration: YAML schema, parsing and validation.

A config file fully determines a run.  Top-level keys::

    name, seed, duration_ms, mode, output_dir
    workload:  {kind: synthetic, streams: [...]} | {kind: trace, path, time_scale}
    queries:   [{id, stream, priority, operators: [{kind, ...}]}]
    engine:    {params: {...}, bounds: {...}, cost: {...}}
    learning:  {enabled, period_ms, a, b, gamma, tunables: [...], desirability: {...}}

Relative trace paths are resolved against the config file's directory.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from ..automaton import LearningParams
from ..engine.core import Mode
from ..engine.operators import AggregateFunction, Comparison, Filter, PlanError, Project, QueryPlan, WindowAggregate, check_plan
from ..engine.params import PARAM_NAMES, CostModel, EngineParams, default_bounds
from ..engine.tuples import STREAM_WIDTHS
from ..learning_unit import LearningUnitConfig, StepMode, TunableParamSpec
from ..qc_metrics import DesirabilityConfig
from ..trace_io import ArrivalProcess, Burst, SyntheticConfig

__all__ = [
    "ConfigError",
    "Diagnostic",
    "ExperimentConfig",
    "StreamSpec",
    "WorkloadSpec",
    "load_config",
    "parse_config",
    "validate_config",
    "shipped_config",
    "shipped_config_names",
]


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}" if self.path else self.message


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic], source: str | None = None):
        self.diagnostics = list(diagnostics)
        self.source = source
        head = f"invalid config {source}" if source else "invalid config"
        super().__init__(head + ":\n" + "\n".join(f"  {d}" for d in self.diagnostics))


@dataclass(frozen=True)
class StreamSpec:
    stream: str
    rate: float
    process: ArrivalProcess = ArrivalProcess.POISSON
    burst: Burst | None = None
    attr_ranges: tuple[tuple[int, int], ...] | None = None

    def synthetic(self, seed: int) -> SyntheticConfig:
        return SyntheticConfig(
            rate=self.rate,
            process=self.process,
            burst=self.burst,
            stream=self.stream,
            attr_ranges=self.attr_ranges,
            seed=seed,
        )


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    streams: tuple[StreamSpec, ...] = ()
    path: str | None = None
    time_scale: float = 1.0


@dataclass
class ExperimentConfig:
    name: str
    seed: int
    duration_ms: float
    mode: Mode
    workload: WorkloadSpec
    queries: list[QueryPlan]
    params: EngineParams
    cost: CostModel
    learning_enabled: bool
    learning: LearningUnitConfig
    output_dir: str | None = None
    source: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def with_overrides(
        self,
        seed: int | None = None,
        duration_ms: float | None = None,
        mode: str | Mode | None = None,
        output_dir: str | None = None,
    ) -> "ExperimentConfig":
        cfg = copy.deepcopy(self)
        if seed is not None:
            cfg.seed = int(seed)
            cfg.raw["seed"] = cfg.seed
        if duration_ms is not None:
            if duration_ms < 0:
                raise ConfigError([Diagnostic("duration_ms", "must be >= 0")])
            cfg.duration_ms = float(duration_ms)
            cfg.raw["duration_ms"] = cfg.duration_ms
        if mode is not None:
            cfg.mode = Mode(mode)
        if output_dir is not None:
            cfg.output_dir = output_dir
        return cfg

    def comparable_key(self) -> tuple:
        """Everything two runs must share to be compared."""
        raw = self.raw
        return (
            _canon(raw.get("workload")),
            _canon(raw.get("queries")),
            self.duration_ms,
            self.seed,
        )


def _canon(x: Any) -> Any:
    if isinstance(x, dict):
        return tuple(sorted((k, _canon(v)) for k, v in x.items()))
    if isinstance(x, (list, tuple)):
        return tuple(_canon(v) for v in x)
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, (int, float)):
        return float(x)
    return repr(x)


class _Collector:
    """Collects diagnostics while walking the raw document."""

    def __init__(self) -> None:
        self.diags: list[Diagnostic] = []

    def err(self, path: str, message: str) -> None:
        self.diags.append(Diagnostic(path, message))

    def mapping(self, node: Any, path: str, allowed: set[str]) -> dict:
        if node is None:
            return {}
        if not isinstance(node, dict):
            self.err(path, f"expected a mapping, got {type(node).__name__}")
            return {}
        for key in node:
            if key not in allowed:
                self.err(_join(path, str(key)), "unknown key")
        return node

    def number(self, node: dict, key: str, path: str, default=None, *, integer=False, minimum=None, exclusive=False):
        value = node.get(key, default)
        p = _join(path, key)
        if value is None:
            if default is None:
                self.err(p, "required")
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.err(p, f"expected a number, got {value!r}")
            return default
        if integer and float(value) != int(value):
            self.err(p, f"expected an integer, got {value!r}")
            return default
        if minimum is not None and (value <= minimum if exclusive else value < minimum):
            self.err(p, f"must be {'>' if exclusive else '>='} {minimum}, got {value!r}")
            return default
        return int(value) if integer else float(value)

    def choice(self, node: dict, key: str, path: str, enum_cls, default):
        value = node.get(key, default)
        try:
            return enum_cls(value)
        except ValueError:
            allowed = ", ".join(str(m.value) for m in enum_cls)
            self.err(_join(path, key), f"unknown value {value!r} (expected one of: {allowed})")
            return enum_cls(default) if default is not None else None


def _join(path: str, key: str | int) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


_TOP_KEYS = {"name", "seed", "duration_ms", "mode", "output_dir", "workload", "queries", "engine", "learning"}


def _parse_burst(c: _Collector, node: Any, path: str) -> Burst | None:
    if node is None:
        return None
    node = c.mapping(node, path, {"start_ms", "duration_ms", "multiplier", "every_ms"})
    start = c.number(node, "start_ms", path, 0.0, minimum=0)
    dur = c.number(node, "duration_ms", path, minimum=0, exclusive=True)
    mult = c.number(node, "multiplier", path, minimum=1)
    every = node.get("every_ms")
    if every is not None:
        every = c.number(node, "every_ms", path, minimum=0, exclusive=True)
    if dur is None or mult is None:
        return None
    try:
        return Burst(start, dur, mult, every)
    except ValueError as exc:
        c.err(path, str(exc))
        return None


def _parse_workload(c: _Collector, node: Any, base_dir: str | None) -> WorkloadSpec | None:
    path = "workload"
    if node is None:
        c.err(path, "required")
        return None
    node = c.mapping(node, path, {"kind", "streams", "path", "time_scale"})
    kind = node.get("kind", "synthetic")
    if kind == "trace":
        tpath = node.get("path")
        if not isinstance(tpath, str) or not tpath:
            c.err(_join(path, "path"), "trace workload needs a file path")
            return None
        if base_dir and not os.path.isabs(tpath):
            tpath = os.path.join(base_dir, tpath)
        scale = c.number(node, "time_scale", path, 1.0, minimum=0, exclusive=True)
        return WorkloadSpec(kind="trace", path=tpath, time_scale=scale or 1.0)
    if kind != "synthetic":
        c.err(_join(path, "kind"), f"unknown workload kind {kind!r} (expected synthetic or trace)")
        return None
    streams_node = node.get("streams")
    if not isinstance(streams_node, list) or not streams_node:
        c.err(_join(path, "streams"), "synthetic workload needs a non-empty list of streams")
        return None
    streams = []
    for i, sn in enumerate(streams_node):
        sp = _join(_join(path, "streams"), i)
        sn = c.mapping(sn, sp, {"stream", "rate", "process", "burst", "attr_ranges"})
        name = sn.get("stream", "tcp")
        if name not in STREAM_WIDTHS:
            c.err(_join(sp, "stream"), f"unknown stream {name!r}")
            continue
        rate = c.number(sn, "rate", sp, minimum=0, exclusive=True)
        proc = c.choice(sn, "process", sp, ArrivalProcess, "poisson")
        burst = _parse_burst(c, sn.get("burst"), _join(sp, "burst"))
        ranges = sn.get("attr_ranges")
        if ranges is not None:
            ok = (
                isinstance(ranges, list)
                and len(ranges) == STREAM_WIDTHS[name]
                and all(isinstance(r, list) and len(r) == 2 and all(isinstance(v, int) for v in r) and 0 <= r[0] <= r[1] for r in ranges)
            )
            if not ok:
                c.err(_join(sp, "attr_ranges"), f"expected {STREAM_WIDTHS[name]} [lo, hi] integer pairs with 0 <= lo <= hi")
                ranges = None
            else:
                ranges = tuple((int(lo), int(hi)) for lo, hi in ranges)
        if rate is not None:
            streams.append(StreamSpec(name, rate, proc, burst, ranges))
    return WorkloadSpec(kind="synthetic", streams=tuple(streams))


def _parse_operator(c: _Collector, node: Any, path: str):
    if not isinstance(node, dict):
        c.err(path, "expected a mapping")
        return None
    kind = node.get("kind")
    cost = node.get("cost_ms")
    if cost is not None and (isinstance(cost, bool) or not isinstance(cost, (int, float)) or cost <= 0):
        c.err(_join(path, "cost_ms"), "must be a positive number")
        cost = None
    try:
        if kind == "filter":
            c.mapping(node, path, {"kind", "attr", "cmp", "value", "cost_ms"})
            cmp = c.choice(node, "cmp", path, Comparison, None)
            attr = c.number(node, "attr", path, integer=True, minimum=0)
            value = c.number(node, "value", path, integer=True)
            if None in (cmp, attr, value):
                return None
            return Filter(attr, cmp, value, cost)
        if kind == "project":
            c.mapping(node, path, {"kind", "keep", "cost_ms"})
            keep = node.get("keep")
            if not isinstance(keep, list) or not keep or not all(isinstance(k, int) and not isinstance(k, bool) for k in keep):
                c.err(_join(path, "keep"), "expected a non-empty list of attribute indices")
                return None
            return Project(tuple(keep), cost)
        if kind == "window":
            c.mapping(node, path, {"kind", "func", "attr", "size", "cost_ms"})
            func = c.choice(node, "func", path, AggregateFunction, None)
            attr = c.number(node, "attr", path, integer=True, minimum=0)
            size = c.number(node, "size", path, integer=True, minimum=1)
            if None in (func, attr, size):
                return None
            return WindowAggregate(func, attr, size, cost)
    except PlanError as exc:
        c.err(path, str(exc))
        return None
    c.err(_join(path, "kind"), f"unknown operator kind {kind!r} (expected filter, project or window)")
    return None


def _parse_queries(c: _Collector, node: Any) -> list[QueryPlan]:
    if not isinstance(node, list) or not node:
        c.err("queries", "expected a non-empty list of queries")
        return []
    plans = []
    seen = set()
    for i, qn in enumerate(node):
        qp = _join("queries", i)
        qn = c.mapping(qn, qp, {"id", "stream", "priority", "operators"})
        qid = qn.get("id")
        if not isinstance(qid, str) or not qid:
            c.err(_join(qp, "id"), "required string")
            continue
        if qid in seen:
            c.err(_join(qp, "id"), f"duplicate query id {qid!r}")
            continue
        seen.add(qid)
        stream = qn.get("stream", "tcp")
        prio = c.number(qn, "priority", qp, 0, integer=True)
        ops_node = qn.get("operators")
        if not isinstance(ops_node, list) or not ops_node:
            c.err(_join(qp, "operators"), "expected a non-empty operator list")
            continue
        ops = [_parse_operator(c, on, _join(_join(qp, "operators"), k)) for k, on in enumerate(ops_node)]
        if any(op is None for op in ops):
            continue
        plan = QueryPlan(qid, stream, ops, prio or 0)
        try:
            check_plan(plan)
        except PlanError as exc:
            c.err(qp, str(exc))
            continue
        plans.append(plan)
    return plans


def _parse_bounds(c: _Collector, node: Any, path: str, n_queries: int) -> dict[str, tuple[float, float]]:
    bounds = default_bounds(n_queries)
    node = c.mapping(node, path, set(PARAM_NAMES))
    for name, pair in node.items():
        if name not in PARAM_NAMES:
            continue
        p = _join(path, name)
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)):
            c.err(p, "expected [min, max]")
            continue
        lo, hi = pair
        if lo > hi:
            c.err(p, f"inverted bounds: min {lo} > max {hi}")
            continue
        bounds[name] = (lo, hi)
    return bounds


def _parse_engine(c: _Collector, node: Any, n_queries: int) -> tuple[EngineParams | None, CostModel | None]:
    node = c.mapping(node, "engine", {"params", "bounds", "cost"})
    bounds = _parse_bounds(c, node.get("bounds"), "engine.bounds", n_queries)
    pn = c.mapping(node.get("params"), "engine.params", set(PARAM_NAMES))
    values = {}
    defaults = EngineParams()
    for name in PARAM_NAMES:
        integer = name != "q_rr"
        default = getattr(defaults, name) if name != "n_q" else n_queries
        v = c.number(pn, name, "engine.params", default, integer=integer)
        values[name] = default if v is None else v
    params = None
    try:
        params = EngineParams(bounds=bounds, **values)
        for name in PARAM_NAMES:
            lo, hi = bounds[name]
            if not lo <= values[name] <= hi:
                c.err(_join("engine.params", name), f"initial value {values[name]} outside bounds [{lo}, {hi}]")
    except ValueError as exc:
        c.err("engine.bounds", str(exc))
    cn = c.mapping(node.get("cost"), "engine.cost", set(CostModel.__dataclass_fields__))
    cost_values = {}
    for key in cn:
        if key in CostModel.__dataclass_fields__:
            v = c.number(cn, key, "engine.cost", minimum=0)
            if v is not None:
                cost_values[key] = v
    cost = None
    try:
        cost = CostModel(**cost_values)
    except ValueError as exc:
        c.err("engine.cost", str(exc))
    return params, cost


def _parse_learning(c: _Collector, node: Any) -> tuple[bool, LearningUnitConfig | None]:
    path = "learning"
    node = c.mapping(
        node,
        path,
        {"enabled", "period_ms", "a", "b", "gamma", "tunables", "desirability", "update_before_compare"},
    )
    enabled = node.get("enabled", True)
    if not isinstance(enabled, bool):
        c.err(_join(path, "enabled"), "expected true or false")
        enabled = True
    period = c.number(node, "period_ms", path, 500.0, minimum=0, exclusive=True)
    a = c.number(node, "a", path, 0.05)
    b = c.number(node, "b", path, 0.05)
    gamma = c.number(node, "gamma", path, 0.9)
    learning = None
    try:
        learning = LearningParams(a, b)
    except ValueError as exc:
        c.err(path, str(exc))
    if gamma is not None and not 0.0 <= gamma <= 1.0:
        c.err(_join(path, "gamma"), f"must lie in [0, 1], got {gamma}")
    dn = c.mapping(node.get("desirability"), _join(path, "desirability"), {"w1", "w2", "w3", "epsilon", "k_cap"})
    dvals = {k: c.number(dn, k, _join(path, "desirability")) for k in dn if k in ("w1", "w2", "w3", "epsilon", "k_cap")}
    desirability = None
    try:
        desirability = DesirabilityConfig(**{k: v for k, v in dvals.items() if v is not None})
    except ValueError as exc:
        c.err(_join(path, "desirability"), str(exc))
    tn = node.get("tunables", [{"param": "q_rr"}, {"param": "s_b"}])
    specs = []
    if not isinstance(tn, list) or not tn:
        c.err(_join(path, "tunables"), "expected a non-empty list")
    else:
        for i, sn in enumerate(tn):
            sp = _join(_join(path, "tunables"), i)
            sn = c.mapping(sn, sp, {"param", "factor", "k_up", "k_down", "mode", "bounds"})
            bounds = sn.get("bounds")
            try:
                specs.append(
                    TunableParamSpec(
                        param=sn.get("param"),
                        factor=sn.get("factor"),
                        k_up=sn.get("k_up", 1),
                        k_down=sn.get("k_down", 1),
                        mode=StepMode(sn.get("mode", "additive")),
                        bounds=tuple(bounds) if bounds is not None else None,
                    )
                )
            except (ValueError, TypeError) as exc:
                c.err(sp, str(exc))
    unit = None
    if learning is not None and desirability is not None and specs and len(specs) == len(tn):
        try:
            unit = LearningUnitConfig(
                period_ms=period or 500.0,
                tunables=tuple(specs),
                learning=learning,
                desirability=desirability,
                gamma=gamma if gamma is not None else 0.9,
                update_before_compare=bool(node.get("update_before_compare", False)),
            )
        except ValueError as exc:
            c.err(path, str(exc))
    return enabled, unit


def parse_config(raw: Any, source: str | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed YAML document or raise :class:`ConfigError`."""
    c = _Collector()
    base_dir = os.path.dirname(os.path.abspath(source)) if source else None
    doc = c.mapping(raw, "", _TOP_KEYS)
    if raw is None or not isinstance(raw, dict):
        if not c.diags:
            c.err("", "empty config")
        raise ConfigError(c.diags, source)
    name = str(doc.get("name", Path(source).stem if source else "experiment"))
    seed = c.number(doc, "seed", "", 0, integer=True, minimum=0)
    duration = c.number(doc, "duration_ms", "", minimum=0, exclusive=True)
    mode = c.choice(doc, "mode", "", Mode, "virtual")
    output_dir = doc.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        c.err("output_dir", "expected a path string")
        output_dir = None
    workload = _parse_workload(c, doc.get("workload"), base_dir)
    queries = _parse_queries(c, doc.get("queries"))
    if workload is not None and workload.kind == "synthetic":
        fed = {s.stream for s in workload.streams}
        for i, q in enumerate(queries):
            if q.stream not in fed:
                c.err(_join(_join("queries", i), "stream"), f"stream {q.stream!r} is not produced by the workload")
    n_q = len(doc.get("queries") or []) if isinstance(doc.get("queries"), list) else 0
    params, cost = _parse_engine(c, doc.get("engine"), n_q)
    enabled, unit = _parse_learning(c, doc.get("learning"))
    if c.diags:
        raise ConfigError(c.diags, source)
    return ExperimentConfig(
        name=name,
        seed=seed,
        duration_ms=duration,
        mode=mode,
        workload=workload,
        queries=queries,
        params=params,
        cost=cost,
        learning_enabled=enabled,
        learning=unit,
        output_dir=output_dir,
        source=source,
        raw=copy.deepcopy(doc),
    )


def _read_yaml(path: str | os.PathLike) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([Diagnostic("", f"cannot read config: {exc.strerror or exc}")], os.fspath(path)) from None
    except yaml.YAMLError as exc:
        raise ConfigError([Diagnostic("", f"YAML syntax error: {exc}")], os.fspath(path)) from None


def shipped_config_names() -> list[str]:
    root = resources.files("adaptive_dsms") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def shipped_config(name: str) -> str:
    """Filesystem path of a config shipped with the package."""
    path = resources.files("adaptive_dsms") / "configs" / f"{name}.yaml"
    if not path.is_file():
        raise FileNotFoundError(f"no shipped config named {name!r}; available: {', '.join(shipped_config_names())}")
    return str(path)


def _resolve(path: str | os.PathLike) -> str:
    p = os.fspath(path)
    if not os.path.exists(p) and os.sep not in p and not p.endswith((".yaml", ".yml")):
        try:
            return shipped_config(p)
        except FileNotFoundError:
            pass
    return p


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Load a config file; a bare name such as ``default`` picks a shipped config."""
    p = _resolve(path)
    return parse_config(_read_yaml(p), p)


def validate_config(path: str | os.PathLike) -> list[Diagnostic]:
    """Check a config without running anything; an empty list means OK."""
    try:
        load_config(path)
    except ConfigError as exc:
        return exc.diagnostics
    return []
