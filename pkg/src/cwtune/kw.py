"""Two-point Kiefer-Wolfowitz gradient estimation in the log-odds CW domain.

Each agent owns one scalar ``y``: the log-odds of its attempt probability.
It probes ``y + eps*delta`` and ``y - eps*delta`` for one measurement slot
each, forms the two-point estimate and takes a projected ascent step on the
measured utility. Everything here is environment-agnostic; the agents module
binds it to the simulator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable

from cwtune import ParameterError

CW_MIN = 15
CW_MAX = 1023

# Roundoff slack so that an exact preimage of an integer CW does not ceil upwards.
_CEIL_SLACK = 1e-9


def cw_to_logy(cw: float) -> float:
    """``L(CW)``: ``lambda = 2/(CW+1)``, ``y = ln(lambda / (1 - lambda))``."""
    if cw < 1:
        raise ParameterError(f"contention window must be >= 1, got {cw!r}")
    if cw == 1:
        return math.inf
    return math.log(2.0 / (cw - 1.0))


def logy_to_cw(y: float, cw_min: int = CW_MIN, cw_max: int = CW_MAX) -> int:
    """``ceil(L^-1(y))`` clamped to ``[cw_min, cw_max]``.

    ``L^-1(y) = 2/lambda - 1`` with ``lambda = e^y / (1 + e^y)``, i.e. ``2 e^-y + 1``.
    """
    if math.isnan(y):
        raise ParameterError("log-domain value is NaN")
    if y > 700:
        return cw_min
    if y < -700:
        return cw_max
    real_cw = 2.0 * math.exp(-y) + 1.0
    cw = math.ceil(real_cw - _CEIL_SLACK * real_cw)
    return int(min(max(cw, cw_min), cw_max))


LOGY_MIN = cw_to_logy(CW_MAX)
LOGY_MAX = cw_to_logy(CW_MIN)


class Stage(enum.Enum):
    AWAIT_PLUS = "plus"
    AWAIT_MINUS = "minus"


@dataclass(frozen=True)
class KwConfig:
    delta: float = 0.3
    eta: float = 0.1
    tau: float = 0.2
    phase: float = 0.0
    lower: float = LOGY_MIN
    upper: float = LOGY_MAX
    alpha: float | None = None  # defaults to delta, so probes never leave [lower, upper]

    def __post_init__(self):
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        if not self.eta > 0:
            raise ParameterError("eta must be positive")
        if not self.tau > 0:
            raise ParameterError("tau must be positive")
        if not self.lower < self.upper:
            raise ParameterError("lower bound must be below upper bound")
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.delta)
        if not 0 <= self.alpha <= (self.upper - self.lower) / 2:
            raise ParameterError("alpha must lie in [0, (upper - lower) / 2]")
        if not 0 <= self.phase <= self.tau:
            raise ParameterError("phase must lie in [0, tau]")

    @property
    def decision_set(self) -> tuple[float, float]:
        return self.lower + self.alpha, self.upper - self.alpha


@dataclass(frozen=True)
class KwState:
    y: float
    epsilon: int = 1
    k: int = 0
    stage: Stage = Stage.AWAIT_PLUS
    g_plus: float | None = None
    g_minus: float | None = None


def initial_state(y0: float, config: KwConfig) -> KwState:
    return KwState(y=project(y0, *config.decision_set))


def draw_perturbation(state: KwState, rng) -> KwState:
    """Fresh ``eps`` in {-1, +1}; ``rng`` is anything with a ``random()`` method."""
    eps = 1 if rng.random() < 0.5 else -1
    return replace(state, epsilon=eps, stage=Stage.AWAIT_PLUS, g_plus=None, g_minus=None)


def probe_points(state: KwState, config: KwConfig) -> tuple[float, float]:
    step = state.epsilon * config.delta
    return state.y + step, state.y - step


def gradient_estimate(g_plus: float, g_minus: float, epsilon: int, delta: float) -> float:
    if delta == 0:
        raise ParameterError("perturbation size must be non-zero")
    if epsilon not in (-1, 1):
        raise ParameterError(f"epsilon must be -1 or +1, got {epsilon!r}")
    return (g_plus - g_minus) / (2.0 * epsilon * delta)


def project(x: float, a: float, b: float) -> float:
    if a > b:
        raise ParameterError(f"empty interval [{a}, {b}]")
    return max(min(b, x), a)


def ascend_update(state: KwState, g_tilde: float, config: KwConfig) -> KwState:
    """Projected ascent step onto ``[lower + alpha, upper - alpha]``."""
    y = project(state.y + config.eta * g_tilde, *config.decision_set)
    return KwState(y=y, epsilon=state.epsilon, k=state.k + 1, stage=Stage.AWAIT_PLUS)


def record_sample(state: KwState, g: float) -> KwState:
    """Store a utility sample for the current stage and advance the stage."""
    if state.stage is Stage.AWAIT_PLUS:
        return replace(state, g_plus=g, stage=Stage.AWAIT_MINUS)
    return replace(state, g_minus=g)


def kw_maximize(f: Callable[[float], float], y0: float, config: KwConfig, rng,
                iterations: int) -> list[float]:
    """Single-agent loop on a directly evaluable objective; returns the iterates."""
    state = initial_state(y0, config)
    history = [state.y]
    for _ in range(iterations):
        state = draw_perturbation(state, rng)
        plus, minus = probe_points(state, config)
        state = record_sample(state, f(plus))
        state = record_sample(state, f(minus))
        g = gradient_estimate(state.g_plus, state.g_minus, state.epsilon, config.delta)
        state = ascend_update(state, g, config)
        history.append(state.y)
    return history
