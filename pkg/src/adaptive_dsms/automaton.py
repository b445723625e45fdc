"""Variable-structure learning automaton with the linear reward-penalty scheme.

The automaton keeps a probability vector over a finite action set, samples an
action from it, and is told afterwards whether the action was favourable
(reward) or not (penalty).  A synthetic P-model environment is included for
testing the update rules in isolation.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Move",
    "ActionSpace",
    "LearningParams",
    "Automaton",
    "PModelEnvironment",
    "build_action_space",
    "new_automaton",
    "select_action",
    "reward",
    "penalty",
    "environment_respond",
    "REWARD",
    "PENALTY",
]

MAX_PARAMS = 8
_RENORM_TOL = 1e-12

# P-model environment responses.
REWARD = 0
PENALTY = 1


class Move(enum.IntEnum):
    """Per-parameter component of an action vector."""

    UP = 0
    DOWN = 1
    HOLD = 2

    def __str__(self) -> str:
        return {Move.UP: "up", Move.DOWN: "down", Move.HOLD: "hold"}[self]


@dataclass(frozen=True)
class ActionSpace:
    """Every {Up, Down, Hold}^m combination in base-3 order.

    The first parameter is the most significant digit and Hold is the
    highest digit value, so the all-Hold vector is always the last action.
    """

    m: int
    actions: tuple[tuple[Move, ...], ...]

    @property
    def r(self) -> int:
        return len(self.actions)

    @property
    def hold_index(self) -> int:
        return self.r - 1

    def index_of(self, action: tuple[Move, ...]) -> int:
        idx = 0
        for move in action:
            idx = idx * 3 + int(move)
        return idx


def build_action_space(m: int) -> ActionSpace:
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or not 1 <= m <= MAX_PARAMS:
        raise ValueError(f"parameter count must be in [1, {MAX_PARAMS}], got {m!r}")
    actions = tuple(itertools.product(tuple(Move), repeat=int(m)))
    return ActionSpace(m=int(m), actions=actions)


@dataclass(frozen=True)
class LearningParams:
    """Reward step ``a`` in (0, 1) and penalty step ``b`` in [0, 1)."""

    a: float = 0.05
    b: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"reward rate a must lie in (0, 1), got {self.a}")
        if not 0.0 <= self.b < 1.0:
            raise ValueError(f"penalty rate b must lie in [0, 1), got {self.b}")


@dataclass
class Automaton:
    space: ActionSpace | None
    params: LearningParams
    p: np.ndarray
    rng_seed: int | None = None
    step: int = 0
    rng: np.random.Generator = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.rng is None:
            self.rng = np.random.default_rng(self.rng_seed)

    @property
    def r(self) -> int:
        return self.p.shape[0]

    @property
    def p_hold(self) -> float:
        if self.space is None:
            raise ValueError("automaton over bare actions has no all-Hold action")
        return float(self.p[self.space.hold_index])


def new_automaton(
    space: ActionSpace | int, params: LearningParams | None = None, seed: int | None = None
) -> Automaton:
    """Uniform start: every action has probability 1/r.

    ``space`` may also be a plain action count r >= 2, for automata whose
    actions are not parameter moves (e.g. against a P-model environment).
    """
    params = params or LearningParams()
    if isinstance(space, ActionSpace):
        r = space.r
    else:
        if isinstance(space, bool) or not isinstance(space, (int, np.integer)) or space < 2:
            raise ValueError(f"need an ActionSpace or an action count >= 2, got {space!r}")
        r, space = int(space), None
    p = np.full(r, 1.0 / r)
    return Automaton(space=space, params=params, p=p, rng_seed=seed)


def select_action(automaton: Automaton) -> int:
    u = automaton.rng.random()
    idx = int(np.searchsorted(np.cumsum(automaton.p), u, side="right"))
    # cumsum can land a hair under 1.0
    return min(idx, automaton.r - 1)


def reward(automaton: Automaton, i: int) -> np.ndarray:
    """p_i += a(1 - p_i); every other p_j shrinks by the factor (1 - a)."""
    p = automaton.p
    if not 0 <= i < p.shape[0]:
        raise ValueError(f"action index {i} outside [0, {p.shape[0]})")
    a = automaton.params.a
    pi = p[i]
    p *= 1.0 - a
    p[i] = pi + a * (1.0 - pi)
    total = sum(p.tolist())
    if abs(total - 1.0) > _RENORM_TOL:
        p /= total
    automaton.step += 1
    return p


def penalty(automaton: Automaton, i: int) -> np.ndarray:
    """p_i shrinks by (1 - b); the freed mass is spread evenly over the others."""
    p = automaton.p
    r = p.shape[0]
    if not 0 <= i < r:
        raise ValueError(f"action index {i} outside [0, {r})")
    if r < 2:
        raise ValueError("penalty needs at least two actions")
    b = automaton.params.b
    if b:
        pi = p[i]
        p *= 1.0 - b
        p += b / (r - 1)
        p[i] = (1.0 - b) * pi
        total = sum(p.tolist())
        if abs(total - 1.0) > _RENORM_TOL:
            p /= total
    automaton.step += 1
    return p


@dataclass(frozen=True)
class PModelEnvironment:
    """Stationary environment answering 1 (penalty) with probability c_i."""

    c: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(not 0.0 <= ci <= 1.0 for ci in self.c):
            raise ValueError("penalty probabilities must lie in [0, 1]")


def environment_respond(env: PModelEnvironment, i: int, rng: np.random.Generator) -> int:
    if not 0 <= i < len(env.c):
        raise ValueError(f"action index {i} outside [0, {len(env.c)})")
    return PENALTY if rng.random() < env.c[i] else REWARD
