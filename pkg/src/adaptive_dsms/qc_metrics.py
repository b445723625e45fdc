"""Quality-control unit: per-period metrics, moving averages and desirability.

Per period the engine reports inputs, outputs (with latency) and drops to a
:class:`MetricsAccumulator`.  :func:`snapshot` turns the counters into a
:class:`MetricsSample` (mean latency, throughput, loss ratio).  The learning
unit compares each sample with exponential moving averages of the previous
ones and folds the three ratios into a single desirability score.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field

__all__ = [
    "MetricsSample",
    "RunningAverages",
    "DesirabilityConfig",
    "MetricsAccumulator",
    "Verdict",
    "record_input",
    "record_output",
    "record_drop",
    "snapshot",
    "update_average",
    "compute_k",
    "compute_f",
    "classify",
]


@dataclass(frozen=True)
class MetricsSample:
    """Metrics of one period: latency in ms, throughput in tuples/s, loss ratio."""

    R_t: float
    Th: float
    T_loss: float
    period_index: int = 0

    def __post_init__(self) -> None:
        if self.R_t < 0 or self.Th < 0 or not 0.0 <= self.T_loss <= 1.0:
            raise ValueError(f"metrics out of range: {self}")


@dataclass
class RunningAverages:
    gamma: float = 0.9
    avg_Rt: float = 0.0
    avg_Tloss: float = 0.0
    avg_Th: float = 0.0
    avg_f: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    def absorb(self, sample: MetricsSample) -> None:
        """Fold one period's metrics into the three metric averages."""
        g = self.gamma
        self.avg_Rt = update_average(self.avg_Rt, sample.R_t, g)
        self.avg_Tloss = update_average(self.avg_Tloss, sample.T_loss, g)
        self.avg_Th = update_average(self.avg_Th, sample.Th, g)

    def absorb_f(self, f: float) -> None:
        self.avg_f = update_average(self.avg_f, f, self.gamma)


@dataclass(frozen=True)
class DesirabilityConfig:
    """Importance weights of the latency, loss and throughput ratios.

    ``epsilon`` replaces any denominator smaller than itself; every ratio is
    capped at ``k_cap``.
    """

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    epsilon: float = 1e-6
    k_cap: float = 10.0

    def __post_init__(self) -> None:
        for name in ("w1", "w2", "w3"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {w}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.k_cap <= 1:
            raise ValueError("k_cap must exceed 1")

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.w1, self.w2, self.w3)


@dataclass
class MetricsAccumulator:
    """Event counters for the current period.

    Safe to feed from several worker threads: every hook takes the same lock,
    and :func:`snapshot` reads and resets under it.
    """

    inputs_seen: int = 0
    outputs_emitted: int = 0
    tuples_dropped: int = 0
    latency_sum: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def reset(self) -> None:
        self.inputs_seen = 0
        self.outputs_emitted = 0
        self.tuples_dropped = 0
        self.latency_sum = 0.0


def record_input(acc: MetricsAccumulator, n: int = 1) -> MetricsAccumulator:
    with acc._lock:
        acc.inputs_seen += n
    return acc


def record_output(acc: MetricsAccumulator, latency_ms: float) -> MetricsAccumulator:
    if latency_ms < 0:
        raise ValueError(f"latency must be non-negative, got {latency_ms}")
    with acc._lock:
        acc.outputs_emitted += 1
        acc.latency_sum += latency_ms
    return acc


def record_drop(acc: MetricsAccumulator, n: int = 1) -> MetricsAccumulator:
    with acc._lock:
        acc.tuples_dropped += n
    return acc


def snapshot(acc: MetricsAccumulator, period_ms: float, period_index: int = 0) -> MetricsSample:
    """Close the period and reset the counters.

    No traffic yields zeros rather than NaN so the averages stay usable.
    """
    if period_ms <= 0:
        raise ValueError(f"period must be positive, got {period_ms}")
    with acc._lock:
        outs, ins, drops, lat = acc.outputs_emitted, acc.inputs_seen, acc.tuples_dropped, acc.latency_sum
        acc.reset()
    r_t = lat / outs if outs else 0.0
    th = outs / (period_ms / 1000.0)
    loss = min(1.0, drops / ins) if ins else 0.0
    return MetricsSample(R_t=r_t, Th=th, T_loss=loss, period_index=period_index)


def update_average(prev_avg: float, observation: float, gamma: float) -> float:
    # (obs - gamma*obs) rather than (1 - gamma)*obs: 1 - 0.9 is not exact in binary
    return gamma * prev_avg + (observation - gamma * observation)


def _ratio(num: float, den: float, cfg: DesirabilityConfig) -> float:
    return min(num / max(den, cfg.epsilon), cfg.k_cap)


def compute_k(sample: MetricsSample, avgs: RunningAverages, cfg: DesirabilityConfig) -> tuple[float, float, float]:
    """Latency, loss and throughput ratios; each is >1 when the period beat its average.

    The loss ratio is average/current (same orientation as latency) so that
    lower loss raises desirability.
    """
    k1 = _ratio(avgs.avg_Rt, sample.R_t, cfg)
    k2 = _ratio(avgs.avg_Tloss, sample.T_loss, cfg)
    k3 = _ratio(sample.Th, avgs.avg_Th, cfg)
    return k1, k2, k3


def compute_f(k: tuple[float, float, float], cfg: DesirabilityConfig) -> float:
    return cfg.w1 * k[0] + cfg.w2 * k[1] + cfg.w3 * k[2]


class Verdict(enum.Enum):
    DESIRABLE = "desirable"
    UNDESIRABLE = "undesirable"

    def __bool__(self) -> bool:
        return self is Verdict.DESIRABLE


def classify(f: float, avg_f: float) -> Verdict:
    return Verdict.DESIRABLE if f >= avg_f else Verdict.UNDESIRABLE
