"""Event-driven CSMA/CA over an arbitrary carrier-sense graph.

Time is integer nanoseconds. A node counts down its back-off in idle slots
while every neighbour it hears is silent and freezes when one starts; it
transmits once the counter is exhausted. Frame durations already contain the
trailing DIFS, so countdown restarts as soon as the sensed medium clears. A
busy period counts as one virtual slot for the frozen counters, which keeps
the per-slot attempt probability at ``2 / (CW + 1)``.

Simultaneous events are ordered by (time, kind, node, insertion order), with
kinds ordered control < end < arrival < attempt < resolve.
"""

from __future__ import annotations

import heapq
import math
import random
from typing import Callable, Sequence

import numpy as np

from cwtune import ParameterError
from cwtune.sim.station import Beb, ConstantRate, StationConfig
from cwtune.sim.topology import Topology
from cwtune.sim.trace import NS, Outcome, SimTrace, TransmissionRecord
from cwtune.timing import DEFAULT_TIMING, FrameSpec, MacTiming, failure_duration, success_duration

_CONTROL, _END, _ARRIVAL, _ATTEMPT, _RESOLVE = range(5)


def to_ns(seconds: float) -> int:
    return int(round(seconds * NS))


def stream_seed(seed: int, *key: int) -> int:
    """Independent integer seed for a named sub-stream of a run."""
    return int(np.random.SeedSequence([seed, *key]).generate_state(2, np.uint64)[0])


class _Node:
    __slots__ = ("id", "nbrs", "bits", "ts", "tu", "p_err", "beb", "cw", "cw_min", "cw_max",
                 "saturated", "queue", "capacity", "interval", "transmitting", "busy", "counter",
                 "resume", "attempt_at", "version", "origin", "rng", "err_rng", "outcome",
                 "channel")

    def __init__(self, idx: int, cfg: StationConfig, nbrs, timing: MacTiming, seed: int):
        self.id = idx
        self.nbrs = nbrs
        self.p_err = cfg.channel_error_prob
        self.set_frame(cfg.frame, timing)
        self.beb = isinstance(cfg.policy, Beb)
        self.cw = cfg.initial_cw
        if self.beb:
            self.cw_min, self.cw_max = cfg.policy.cw_min, cfg.policy.cw_max
        self.saturated = not isinstance(cfg.traffic, ConstantRate)
        self.queue = 0
        self.capacity = cfg.queue_capacity
        self.interval = 0 if self.saturated else to_ns(1.0 / cfg.traffic.rate)
        self.transmitting = False
        self.busy = 0
        self.counter = None
        self.resume = None
        self.attempt_at = None
        self.version = 0
        self.origin = 0
        self.rng = random.Random(stream_seed(seed, 0, idx))
        self.err_rng = random.Random(stream_seed(seed, 1, idx))
        self.outcome = Outcome.SUCCESS
        self.channel = 0

    def set_frame(self, frame: FrameSpec, timing: MacTiming) -> None:
        self.bits = frame.payload_bits
        self.ts = to_ns(success_duration(frame, timing))
        self.tu = to_ns(failure_duration(frame, timing))


class Simulator:
    def __init__(self, topology: Topology, stations: Sequence[StationConfig],
                 timing: MacTiming = DEFAULT_TIMING, duration: float = 60.0, seed: int = 0):
        if len(stations) != topology.n:
            raise ParameterError(f"{len(stations)} stations for a {topology.n}-node topology")
        if duration < 0:
            raise ParameterError("duration must be non-negative")
        self.topology = topology
        self.timing = timing
        self.seed = seed
        self.horizon = to_ns(duration)
        self.slot = to_ns(timing.slot_time)
        self.now = 0
        self._heap: list = []
        self._seq = 0
        self._starters: list[_Node] = []
        self._resolve_pending = False
        self.nodes = [_Node(i, cfg, None, timing, seed) for i, cfg in enumerate(stations)]
        for node in self.nodes:
            node.nbrs = tuple(self.nodes[j] for j in topology.neighbors(node.id))
        n = topology.n
        # obs[k][j]: cumulative delivered bits of station j as accounted for by node k
        self._obs = [[0.0] * n for _ in range(n)]
        self._watchers = [tuple(topology.visible(j)) for j in range(n)]
        self.trace = SimTrace(n=n, horizon=self.horizon,
                              visible=tuple(topology.visible(i) for i in range(n)),
                              cw_timeline=[[(0, node.cw)] for node in self.nodes],
                              offered=[0] * n, delivered=[0] * n, dropped=[0] * n)
        self._started = False

    # -- control surface -------------------------------------------------------------

    def call_at(self, t: int, fn: Callable[[int], None]) -> None:
        """Run ``fn(t)`` at ``t`` ns, before any channel event at the same instant."""
        if t < self.now:
            raise ParameterError("cannot schedule in the past")
        self._push(t, _CONTROL, -1, fn)

    def set_cw(self, station: int, cw: int) -> None:
        """Change the CW; it takes effect at the station's next back-off draw."""
        node = self.nodes[station]
        if cw != node.cw:
            node.cw = cw
            self.trace.cw_timeline[station].append((self.now, cw))

    def set_frame(self, station: int, frame: FrameSpec) -> None:
        self.nodes[station].set_frame(frame, self.timing)

    def observed_bits(self, node: int) -> list[float]:
        """Cumulative delivered bits per station as accounted for by ``node``."""
        return list(self._obs[node])

    def delivered_bits(self) -> list[float]:
        """Cumulative delivered bits per station (ground truth)."""
        return [self._obs[j][j] for j in range(len(self.nodes))]

    # -- event loop -------------------------------------------------------------------

    def _push(self, t: int, kind: int, nid: int, payload) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, kind, nid, self._seq, payload))

    def run(self) -> SimTrace:
        if self._started:
            raise RuntimeError("a Simulator instance runs once")
        self._started = True
        for node in self.nodes:
            node.counter = node.rng.randrange(node.cw)
            if not node.saturated:
                offset = int(node.rng.random() * node.interval)
                self._push(offset, _ARRIVAL, node.id, None)
            self._resume(node, 0)

        heap = self._heap
        horizon = self.horizon
        nodes = self.nodes
        while heap:
            t, kind, nid, _, payload = heapq.heappop(heap)
            if t >= horizon:
                break
            self.now = t
            if kind == _ATTEMPT:
                node = nodes[nid]
                if payload == node.version:
                    self._attempt(node, t)
            elif kind == _END:
                self._end(nodes[nid], t)
            elif kind == _RESOLVE:
                self._resolve(t)
            elif kind == _ARRIVAL:
                self._arrival(nodes[nid], t)
            else:
                payload(t)
        self.now = horizon
        self.trace.records.sort(key=lambda r: (r.start, r.station))
        return self.trace

    def _resume(self, node: _Node, t: int) -> None:
        if node.transmitting:
            return
        if node.counter is None:
            node.origin = t
            return
        node.resume = t
        node.attempt_at = t + node.counter * self.slot
        node.version += 1
        self._push(node.attempt_at, _ATTEMPT, node.id, node.version)

    def _freeze(self, node: _Node, t: int) -> None:
        if node.transmitting or node.resume is None or node.attempt_at == t:
            return
        elapsed = (t - node.resume) // self.slot
        node.counter -= elapsed + 1
        node.resume = None
        node.attempt_at = None
        node.version += 1

    def _attempt(self, node: _Node, t: int) -> None:
        node.counter = 0
        node.resume = None
        node.attempt_at = None
        if node.saturated or node.queue > 0:
            node.counter = None
            node.transmitting = True
            self._starters.append(node)
            for m in node.nbrs:
                m.busy += 1
                if m.busy == 1:
                    self._freeze(m, t)
            if not self._resolve_pending:
                self._resolve_pending = True
                self._push(t, _RESOLVE, -1, None)
        else:
            node.counter = None
            node.origin = t

    def _resolve(self, t: int) -> None:
        starting = {n.id for n in self._starters}
        records = self.trace.records
        for node in self._starters:
            rivals = [m for m in node.nbrs if m.id in starting]
            if rivals:
                node.outcome = Outcome.COLLISION
                duration = node.tu
                node.channel = max(duration, *(m.tu for m in rivals))
            elif node.p_err > 0 and node.err_rng.random() < node.p_err:
                node.outcome = Outcome.CHANNEL_ERROR
                duration = node.channel = node.tu
            else:
                node.outcome = Outcome.SUCCESS
                duration = node.channel = node.ts
            records.append(TransmissionRecord(t, node.id, duration, node.outcome, node.bits, node.channel))
            self._push(t + duration, _END, node.id, None)
        self._starters.clear()
        self._resolve_pending = False

    def _end(self, node: _Node, t: int) -> None:
        node.transmitting = False
        for m in node.nbrs:
            m.busy -= 1
            if m.busy == 0:
                self._resume(m, t)
        trace = self.trace
        if node.outcome == Outcome.SUCCESS:
            trace.delivered[node.id] += 1
            if not node.saturated:
                node.queue -= 1
            for k in self._watchers[node.id]:
                self._obs[k][node.id] += node.bits
            if node.beb and node.cw != node.cw_min:
                self.set_cw(node.id, node.cw_min)
        elif node.beb:
            grown = min(2 * (node.cw + 1) - 1, node.cw_max)
            if grown != node.cw:
                self.set_cw(node.id, grown)
        node.counter = node.rng.randrange(node.cw)
        if node.busy == 0:
            self._resume(node, t)

    def _arrival(self, node: _Node, t: int) -> None:
        self._push(t + node.interval, _ARRIVAL, node.id, None)
        self.trace.offered[node.id] += 1
        if node.queue >= node.capacity:
            self.trace.dropped[node.id] += 1
            return
        node.queue += 1
        if node.queue == 1 and node.counter is None and not node.transmitting:
            if node.busy == 0:
                # Back-off already finished on an idle medium: go at the next slot boundary.
                k = -((node.origin - t) // self.slot)
                node.counter = k
                node.resume = node.origin
                node.attempt_at = node.origin + k * self.slot
                node.version += 1
                self._push(node.attempt_at, _ATTEMPT, node.id, node.version)
            else:
                node.counter = node.rng.randrange(node.cw)


def run(topology: Topology, stations: Sequence[StationConfig], timing: MacTiming = DEFAULT_TIMING,
        duration: float = 60.0, seed: int = 0,
        schedule: Sequence[tuple[float, int, FrameSpec]] = ()) -> SimTrace:
    """Simulate without any learning controller; ``schedule`` lists timed frame changes."""
    sim = Simulator(topology, stations, timing, duration, seed)
    for when, station, frame in schedule:
        sim.call_at(to_ns(when), lambda t, s=station, f=frame: sim.set_frame(s, f))
    return sim.run()
