"""Learning agents that tune each station's CW inside the simulator.

Every agent runs the two-slot probe/probe/update cycle of :mod:`cwtune.kw`
against the utility it measures by overhearing: the sum of log-throughputs
of the stations it can hear plus its own acknowledged throughput. The phase
offsets decide how synchronised the agents are.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cwtune import ParameterError
from cwtune.fairness import THROUGHPUT_FLOOR
from cwtune.kw import (CW_MAX, CW_MIN, KwConfig, KwState, Stage, ascend_update, cw_to_logy,
                       draw_perturbation, gradient_estimate, initial_state, logy_to_cw,
                       probe_points, record_sample)
from cwtune.sim.engine import Simulator, to_ns
from cwtune.sim.trace import NS


class Coordination(enum.Enum):
    COORDINATED = "coordinated"
    SLOTTED = "slotted"
    UNCOORDINATED = "uncoordinated"


class UtilityScope(enum.Enum):
    LOCAL = "local"
    GLOBAL = "global"


@dataclass(frozen=True)
class AgentConfig:
    kw: KwConfig = field(default_factory=KwConfig)
    coordination: Coordination = Coordination.COORDINATED
    utility_scope: UtilityScope = UtilityScope.LOCAL
    throughput_floor: float = THROUGHPUT_FLOOR
    cw_min: int = CW_MIN
    cw_max: int = CW_MAX

    def __post_init__(self):
        if not self.throughput_floor > 0:
            raise ParameterError("throughput_floor must be positive")
        if not 1 <= self.cw_min <= self.cw_max <= CW_MAX:
            raise ParameterError("need 1 <= cw_min <= cw_max <= 1023")
        if (self.utility_scope is UtilityScope.GLOBAL
                and self.coordination is not Coordination.COORDINATED):
            raise ParameterError("a shared global utility needs coordinated measurement windows")


def assign_phases(n: int, coordination: Coordination, tau: float, rng) -> list[float]:
    """Start offsets in seconds; ``rng`` is a ``random.Random``-like generator."""
    if n < 1:
        raise ParameterError("need at least one agent")
    if coordination is Coordination.COORDINATED:
        return [0.0] * n
    if coordination is Coordination.SLOTTED:
        return [tau if rng.random() < 0.5 else 0.0 for _ in range(n)]
    return [rng.random() * tau for _ in range(n)]


def utility_from_observation(bits: Sequence[float], tau: float, floor: float = THROUGHPUT_FLOOR,
                             stations: Sequence[int] | None = None) -> float:
    """``sum_j log(max(bits_j / tau, floor))`` over ``stations`` (default: all)."""
    if not tau > 0:
        raise ParameterError("tau must be positive")
    idx = range(len(bits)) if stations is None else stations
    return float(sum(math.log(max(bits[j] / tau, floor)) for j in idx))


def share_global_utility(local: dict[int, float], hub_value: float) -> dict[int, float]:
    """Replace every agent's utility for one window by the hub's global value."""
    return {agent: hub_value for agent in local}


def find_hub(visible: Sequence[Sequence[int]]) -> int | None:
    """Lowest-index node whose observations cover every station, if any."""
    n = len(visible)
    for i, seen in enumerate(visible):
        if len(set(seen)) == n:
            return i
    return None


@dataclass
class MeasurementWindow:
    agent: int
    start: int  # ns
    end: int  # ns
    stage: Stage
    cw: int
    bits: np.ndarray
    g: float
    g_local: float
    g_tilde: float | None
    y: float


class LearningAgent:
    def __init__(self, station: int, config: AgentConfig, phase: float, rng, cw0: int,
                 visible: Sequence[int]):
        self.station = station
        self.config = config
        self.phase = phase
        self.rng = rng
        self.visible = tuple(visible)
        self.state: KwState = initial_state(cw_to_logy(cw0), config.kw)
        self.cw = cw0
        self.window_start: int | None = None
        self.snapshot: list[float] | None = None
        self.hub_snapshot: list[float] | None = None

    def command(self, y: float) -> int:
        return logy_to_cw(y, self.config.cw_min, self.config.cw_max)

    def begin_iteration(self) -> int:
        self.state = draw_perturbation(self.state, self.rng)
        plus, _ = probe_points(self.state, self.config.kw)
        self.cw = self.command(plus)
        return self.cw

    def begin_minus(self) -> int:
        _, minus = probe_points(self.state, self.config.kw)
        self.cw = self.command(minus)
        return self.cw

    def close_window(self, g: float) -> float | None:
        """Store the window's utility; returns the gradient estimate after the minus window."""
        stage = self.state.stage
        self.state = record_sample(self.state, g)
        if stage is Stage.AWAIT_PLUS:
            return None
        s = self.state
        g_tilde = gradient_estimate(s.g_plus, s.g_minus, s.epsilon, self.config.kw.delta)
        self.state = ascend_update(s, g_tilde, self.config.kw)
        return g_tilde


class LearningController:
    """Attaches one :class:`LearningAgent` per listed station to a simulator."""

    def __init__(self, sim: Simulator, stations: Sequence[int], config: AgentConfig,
                 rngs: Sequence, phase_rng):
        self.sim = sim
        self.config = config
        topo = sim.topology
        self.hub = None
        if config.utility_scope is UtilityScope.GLOBAL:
            self.hub = find_hub([topo.visible(i) for i in range(topo.n)])
            if self.hub is None:
                raise ParameterError("no node observes every station; cannot share a global utility")
        phases = assign_phases(len(stations), config.coordination, config.kw.tau, phase_rng)
        self.agents = [
            LearningAgent(s, config, p, rng, sim.nodes[s].cw, topo.visible(s))
            for s, p, rng in zip(stations, phases, rngs)
        ]
        self.windows: list[MeasurementWindow] = []
        self.tau_ns = to_ns(config.kw.tau)

    def attach(self) -> None:
        for agent in self.agents:
            self.sim.call_at(to_ns(agent.phase), lambda t, a=agent: self._boundary(a, t, first=True))

    def _open(self, agent: LearningAgent, t: int, cw: int) -> None:
        self.sim.set_cw(agent.station, cw)
        agent.window_start = t
        agent.snapshot = self.sim.observed_bits(agent.station)
        if self.hub is not None:
            agent.hub_snapshot = self.sim.observed_bits(self.hub)

    def _measure(self, agent: LearningAgent, t: int) -> tuple[np.ndarray, float, float]:
        now = self.sim.observed_bits(agent.station)
        bits = np.array(now) - np.array(agent.snapshot)
        tau = (t - agent.window_start) / NS
        floor = self.config.throughput_floor
        g_local = utility_from_observation(bits, tau, floor, agent.visible)
        g = g_local
        if self.hub is not None:
            hub_bits = np.array(self.sim.observed_bits(self.hub)) - np.array(agent.hub_snapshot)
            hub_g = utility_from_observation(hub_bits, tau, floor)
            g = share_global_utility({agent.station: g_local}, hub_g)[agent.station]
        return bits, g, g_local

    def _boundary(self, agent: LearningAgent, t: int, first: bool = False) -> None:
        if not first:
            stage = agent.state.stage
            bits, g, g_local = self._measure(agent, t)
            y_before = agent.state.y
            g_tilde = agent.close_window(g)
            self.windows.append(MeasurementWindow(
                agent.station, agent.window_start, t, stage, agent.cw, bits, g, g_local, g_tilde,
                agent.state.y if g_tilde is not None else y_before))
        if agent.state.stage is Stage.AWAIT_MINUS:
            cw = agent.begin_minus()
        else:
            cw = agent.begin_iteration()
        self._open(agent, t, cw)
        self.sim.call_at(t + self.tau_ns, lambda tt, a=agent: self._boundary(a, tt))

    def log_rows(self) -> list[tuple]:
        """``(window_end_s, agent, stage, cw_applied, g_value, g_tilde, y)`` per closed window."""
        return [(w.end / NS, w.agent, w.stage.value, w.cw, w.g,
                 "" if w.g_tilde is None else w.g_tilde, w.y) for w in self.windows]
