"""Workload sources: packet-trace text files and seeded synthetic streams.

Trace grammar, one record per line::

    ts src dst sport dport [len]

``ts`` is in seconds (decimal fraction allowed), the rest are non-negative
decimal integers.  Six fields make a TCP record, five (no length) a UDP
record.  Fields are separated by spaces or tabs; ``#`` starts a comment.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .engine.tuples import Tuple

__all__ = [
    "TraceParseError",
    "TraceRecord",
    "ArrivalProcess",
    "Burst",
    "SyntheticConfig",
    "Workload",
    "parse_trace_line",
    "format_trace_line",
    "load_trace",
    "records_to_tuples",
    "generate_synthetic",
    "merge_streams",
]

TCP = "tcp"
UDP = "udp"

DEFAULT_ATTR_RANGES = {
    TCP: ((0, 65535), (0, 65535), (0, 65535), (0, 65535), (40, 1500)),
    UDP: ((0, 65535), (0, 65535), (0, 65535), (0, 65535)),
}


class TraceParseError(ValueError):
    def __init__(self, message: str, line_no: int | None = None, path: str | None = None):
        self.reason = message
        self.line_no = line_no
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line_no is not None:
            where += f"{line_no}: "
        elif where:
            where += " "
        super().__init__(where + message)


@dataclass(frozen=True)
class TraceRecord:
    ts: float
    src: int
    dst: int
    sport: int
    dport: int
    len: int | None = None

    @property
    def stream(self) -> str:
        return UDP if self.len is None else TCP

    @property
    def attrs(self) -> tuple[int, ...]:
        base = (self.src, self.dst, self.sport, self.dport)
        return base if self.len is None else base + (self.len,)


def _parse_int(tok: str, name: str, line_no: int | None) -> int:
    try:
        value = int(tok, 10)
    except ValueError:
        raise TraceParseError(f"field {name!r} is not a decimal integer: {tok!r}", line_no) from None
    if value < 0:
        raise TraceParseError(f"field {name!r} must be non-negative: {tok!r}", line_no)
    return value


def parse_trace_line(line: str, line_no: int | None = None) -> TraceRecord:
    fields = line.split("#", 1)[0].split()
    if len(fields) not in (5, 6):
        raise TraceParseError(f"expected 5 or 6 fields, got {len(fields)}", line_no)
    try:
        ts = float(fields[0])
    except ValueError:
        raise TraceParseError(f"timestamp is not a number: {fields[0]!r}", line_no) from None
    if not np.isfinite(ts) or ts < 0:
        raise TraceParseError(f"timestamp must be finite and non-negative: {fields[0]!r}", line_no)
    names = ("src", "dst", "sport", "dport", "len")
    ints = [_parse_int(tok, name, line_no) for tok, name in zip(fields[1:], names)]
    return TraceRecord(ts, *ints)


def format_trace_line(rec: TraceRecord) -> str:
    parts = [repr(float(rec.ts)), *map(str, rec.attrs)]
    return " ".join(parts)


def _is_blank(line: str) -> bool:
    return not line.split("#", 1)[0].strip()


def read_trace(path: str | os.PathLike) -> list[TraceRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if _is_blank(line):
                continue
            try:
                records.append(parse_trace_line(line, line_no))
            except TraceParseError as exc:
                raise TraceParseError(exc.reason, line_no, os.fspath(path)) from None
    records.sort(key=lambda r: r.ts)
    return records


def records_to_tuples(records: Iterable[TraceRecord], time_scale: float = 1.0) -> list[Tuple]:
    """Turn trace seconds into engine milliseconds, compressed by ``time_scale``."""
    out = []
    for rec in records:
        ts_ms = rec.ts * 1000.0
        out.append(Tuple(ts=ts_ms, arrival=ts_ms * time_scale, attrs=rec.attrs, stream=rec.stream))
    return out


@dataclass
class Workload:
    """Arrival-ordered tuples plus the time up to which the source is defined."""

    tuples: list[Tuple]
    horizon_ms: float

    def __len__(self) -> int:
        return len(self.tuples)

    @property
    def streams(self) -> set[str]:
        return {t.stream for t in self.tuples}


def load_trace(path: str | os.PathLike, time_scale: float = 1.0) -> Workload:
    if time_scale <= 0:
        raise ValueError(f"time_scale must be positive, got {time_scale}")
    tuples = records_to_tuples(read_trace(path), time_scale)
    horizon = tuples[-1].arrival if tuples else 0.0
    return Workload(tuples, horizon)


class ArrivalProcess(enum.Enum):
    CONSTANT = "constant"
    POISSON = "poisson"


@dataclass(frozen=True)
class Burst:
    """Rate multiplier applied for ``duration_ms`` from ``start_ms``.

    With ``every_ms`` set the burst repeats with that period.
    """

    start_ms: float
    duration_ms: float
    multiplier: float
    every_ms: float | None = None

    def __post_init__(self) -> None:
        if self.multiplier < 1:
            raise ValueError("burst multiplier must be >= 1")
        if self.duration_ms <= 0 or self.start_ms < 0:
            raise ValueError("burst needs start >= 0 and duration > 0")
        if self.every_ms is not None and self.every_ms < self.duration_ms:
            raise ValueError("burst period shorter than burst duration")

    def segments(self, duration_ms: float) -> list[tuple[float, float]]:
        """Half-open [start, end) windows inside [0, duration_ms)."""
        out = []
        start = self.start_ms
        while start < duration_ms:
            out.append((start, min(start + self.duration_ms, duration_ms)))
            if self.every_ms is None:
                break
            start += self.every_ms
        return out


@dataclass(frozen=True)
class SyntheticConfig:
    rate: float
    process: ArrivalProcess = ArrivalProcess.POISSON
    burst: Burst | None = None
    stream: str = TCP
    attr_ranges: Sequence[tuple[int, int]] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    @property
    def ranges(self) -> Sequence[tuple[int, int]]:
        if self.attr_ranges is not None:
            return self.attr_ranges
        return DEFAULT_ATTR_RANGES.get(self.stream, DEFAULT_ATTR_RANGES[TCP])


def _rate_segments(cfg: SyntheticConfig, duration_ms: float) -> list[tuple[float, float, float]]:
    """Piecewise-constant (start, end, rate per ms) over [0, duration_ms)."""
    cuts = {0.0, float(duration_ms)}
    bursts = cfg.burst.segments(duration_ms) if cfg.burst else []
    for s, e in bursts:
        cuts.update((s, e))
    edges = sorted(cuts)
    segs = []
    for s, e in zip(edges, edges[1:]):
        mult = cfg.burst.multiplier if any(bs <= s < be for bs, be in bursts) else 1.0
        segs.append((s, e, cfg.rate * mult / 1000.0))
    return segs


def _arrival_times(cfg: SyntheticConfig, duration_ms: float, rng: np.random.Generator) -> np.ndarray:
    chunks = []
    for start, end, lam in _rate_segments(cfg, duration_ms):
        if cfg.process is ArrivalProcess.CONSTANT:
            gap = 1.0 / lam
            n = int(np.ceil((end - start) / gap - 1e-9))
            times = start + gap * np.arange(n)
            chunks.append(times[times < end])
        else:
            # memoryless: restarting the exponential clock at a rate change is exact
            t = start
            pieces = []
            while True:
                expect = max(16, int((end - t) * lam * 1.2) + 16)
                gaps = rng.exponential(1.0 / lam, size=expect)
                times = t + np.cumsum(gaps)
                pieces.append(times[times < end])
                if times[-1] >= end:
                    break
                t = times[-1]
            chunks.append(np.concatenate(pieces))
    return np.concatenate(chunks) if chunks else np.empty(0)


def generate_synthetic(cfg: SyntheticConfig, duration_ms: float) -> Workload:
    if duration_ms <= 0:
        raise ValueError(f"duration must be positive, got {duration_ms}")
    rng = np.random.default_rng(cfg.seed)
    times = _arrival_times(cfg, duration_ms, rng)
    ranges = cfg.ranges
    cols = [rng.integers(lo, hi, size=times.size, endpoint=True) for lo, hi in ranges]
    attrs = list(zip(*(c.tolist() for c in cols))) if cols else [()] * times.size
    stream = cfg.stream
    tuples = [Tuple(ts=t, arrival=t, attrs=a, stream=stream) for t, a in zip(times.tolist(), attrs)]
    return Workload(tuples, float(duration_ms))


def merge_streams(workloads: Sequence[Workload]) -> Workload:
    """Interleave several workloads by arrival time; ties keep input order."""
    tagged = [(t.arrival, k, i, t) for k, w in enumerate(workloads) for i, t in enumerate(w.tuples)]
    tagged.sort(key=lambda x: (x[0], x[1], x[2]))
    horizon = min((w.horizon_ms for w in workloads), default=0.0)
    return Workload([x[3] for x in tagged], horizon)
