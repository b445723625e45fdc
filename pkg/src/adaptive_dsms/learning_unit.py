"""Adaptive controller: turns per-period metrics into parameter moves.

Every period the unit scores the finished period against the running
averages, rewards or penalizes the action that governed it, samples the next
action and applies it to the engine.  An action assigns Up, Down or Hold to
each tuned parameter; the step rule of each parameter is a
:class:`TunableParamSpec`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .automaton import (
    LearningParams,
    Move,
    build_action_space,
    new_automaton,
    penalty,
    reward,
    select_action,
)
from .engine.params import PARAM_NAMES, EngineParams
from .qc_metrics import (
    DesirabilityConfig,
    MetricsSample,
    RunningAverages,
    Verdict,
    classify,
    compute_f,
    compute_k,
)

__all__ = [
    "StepMode",
    "TunableParamSpec",
    "LearningUnitConfig",
    "TickRecord",
    "LearnedValues",
    "LearningUnit",
    "DEFAULT_FACTORS",
    "apply_action",
    "snapshot_learned",
]

DEFAULT_FACTORS = {"q_rr": 50.0, "n_p": 1.0, "n_q": 1.0, "s_b": 20.0}


class StepMode(enum.Enum):
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"


@dataclass(frozen=True)
class TunableParamSpec:
    """Step rule for one tuned parameter.

    Up moves by ``k_up`` steps of ``factor`` (added or multiplied), Down by
    ``k_down`` steps.  Optional ``bounds`` narrow the engine's clamp range.
    """

    param: str
    factor: float | None = None
    k_up: int = 1
    k_down: int = 1
    mode: StepMode = StepMode.ADDITIVE
    bounds: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.param not in PARAM_NAMES:
            raise ValueError(f"unknown tunable parameter {self.param!r}")
        object.__setattr__(self, "mode", StepMode(self.mode))
        if self.factor is None:
            object.__setattr__(self, "factor", DEFAULT_FACTORS[self.param])
        if self.k_up < 1 or self.k_down < 1:
            raise ValueError("step counts must be >= 1")
        if self.factor <= 0:
            raise ValueError("step factor must be positive")
        if self.mode is StepMode.MULTIPLICATIVE and self.factor <= 1:
            raise ValueError("multiplicative steps need factor > 1")
        if self.bounds is not None and self.bounds[0] > self.bounds[1]:
            raise ValueError(f"inverted bounds for {self.param}: min > max")

    def step(self, value: float, move: Move) -> float:
        if move is Move.HOLD:
            return value
        k = self.k_up if move is Move.UP else self.k_down
        if self.mode is StepMode.ADDITIVE:
            delta = k * self.factor
            value = value + delta if move is Move.UP else value - delta
        else:
            scale = self.factor**k
            value = value * scale if move is Move.UP else value / scale
        if self.bounds is not None:
            value = min(max(value, self.bounds[0]), self.bounds[1])
        return value


def _default_tunables() -> tuple[TunableParamSpec, ...]:
    return (TunableParamSpec("q_rr"), TunableParamSpec("s_b"))


@dataclass(frozen=True)
class LearningUnitConfig:
    period_ms: float = 500.0
    tunables: tuple[TunableParamSpec, ...] = field(default_factory=_default_tunables)
    learning: LearningParams = field(default_factory=LearningParams)
    desirability: DesirabilityConfig = field(default_factory=DesirabilityConfig)
    gamma: float = 0.9
    # Score each period against averages that already include it.
    update_before_compare: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "tunables", tuple(self.tunables))
        if self.period_ms <= 0:
            raise ValueError("period_ms must be positive")
        if not 1 <= len(self.tunables) <= len(PARAM_NAMES):
            raise ValueError(f"between 1 and {len(PARAM_NAMES)} tunables required")
        names = [s.param for s in self.tunables]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate tunable parameters: {names}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")

    @property
    def m(self) -> int:
        return len(self.tunables)


@dataclass(frozen=True)
class TickRecord:
    n: int
    action: int | None
    f: float
    verdict: Verdict
    params: EngineParams
    p_all_hold: float
    p_max: float
    argmax: int
    sample: MetricsSample
    k: tuple[float, float, float]
    avg_Rt: float
    avg_Tloss: float
    avg_Th: float
    avg_f: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_all_hold <= 1.0:
            raise ValueError("probability outside [0, 1]")


def apply_action(action, params: EngineParams, specs) -> EngineParams:
    """Move each tuned parameter by its step rule, then clamp into engine bounds."""
    action = tuple(action)
    specs = tuple(specs)
    if len(action) != len(specs):
        raise ValueError(f"action has {len(action)} components for {len(specs)} tunables")
    changes = {}
    for move, spec in zip(action, specs):
        move = Move(move)
        if move is not Move.HOLD:
            changes[spec.param] = spec.step(getattr(params, spec.param), move)
    if not changes:
        return params
    return params.with_values(**changes)


@dataclass(frozen=True)
class LearnedValues:
    params: EngineParams
    p: np.ndarray
    ticks: int

    @property
    def p_all_hold(self) -> float:
        return float(self.p[-1])

    def to_dict(self) -> dict:
        return {
            "params": self.params.values(),
            "p_all_hold": self.p_all_hold,
            "argmax": int(np.argmax(self.p)),
            "ticks": self.ticks,
        }


class LearningUnit:
    """Controller hook for :meth:`Engine.run`.

    With ``enabled=False`` the unit only scores periods; the automaton is
    never updated and the engine parameters are left alone.
    """

    def __init__(self, config: LearningUnitConfig | None = None, seed: int | None = None, enabled: bool = True):
        self.config = config or LearningUnitConfig()
        self.enabled = enabled
        self.space = build_action_space(self.config.m)
        self.automaton = new_automaton(self.space, self.config.learning, seed)
        self.averages = RunningAverages(gamma=self.config.gamma)
        self.prev_action: int | None = None
        self.records: list[TickRecord] = []
        self.initial_params: EngineParams | None = None
        self.params: EngineParams | None = None

    def __call__(self, engine, sample: MetricsSample) -> None:
        self.tick(sample, engine)

    def _score(self, sample: MetricsSample) -> tuple[tuple[float, float, float], float, Verdict]:
        cfg = self.config
        avgs = self.averages
        if cfg.update_before_compare:
            avgs.absorb(sample)
            k = compute_k(sample, avgs, cfg.desirability)
        else:
            k = compute_k(sample, avgs, cfg.desirability)
            avgs.absorb(sample)
        f = compute_f(k, cfg.desirability)
        verdict = classify(f, avgs.avg_f)
        avgs.absorb_f(f)
        return k, f, verdict

    def tick(self, sample: MetricsSample, engine) -> TickRecord:
        if self.initial_params is None:
            self.initial_params = engine.params
        k, f, verdict = self._score(sample)
        action = None
        if self.enabled:
            auto = self.automaton
            if self.prev_action is not None:
                if verdict is Verdict.DESIRABLE:
                    reward(auto, self.prev_action)
                else:
                    penalty(auto, self.prev_action)
            action = select_action(auto)
            new = apply_action(self.space.actions[action], engine.params, self.config.tunables)
            if new is not engine.params:
                engine.apply_params(new)
            self.prev_action = action
        self.params = engine.params
        p = self.automaton.p
        am = int(np.argmax(p))
        avgs = self.averages
        rec = TickRecord(
            n=sample.period_index,
            action=action,
            f=f,
            verdict=verdict,
            params=engine.params,
            p_all_hold=float(p[-1]),
            p_max=float(p[am]),
            argmax=am,
            sample=sample,
            k=k,
            avg_Rt=avgs.avg_Rt,
            avg_Tloss=avgs.avg_Tloss,
            avg_Th=avgs.avg_Th,
            avg_f=avgs.avg_f,
        )
        self.records.append(rec)
        return rec


def snapshot_learned(unit: LearningUnit, initial: EngineParams | None = None) -> LearnedValues:
    """Final parameters and probability vector; before any tick, the initial parameters."""
    params = unit.params or unit.initial_params or initial
    if params is None:
        raise ValueError("unit has not ticked and no initial parameters were given")
    return LearnedValues(params=params, p=unit.automaton.p.copy(), ticks=len(unit.records))
