"""Transmission log produced by the simulator, and the metrics derived from it."""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

NS = 1_000_000_000
CW_SENTINEL = 1 << 30


class Outcome(enum.IntEnum):
    SUCCESS = 0
    COLLISION = 1
    CHANNEL_ERROR = 2


class TransmissionRecord(NamedTuple):
    start: int  # ns
    station: int
    duration: int  # ns; success or failure duration of the station's own frame
    outcome: Outcome
    bits: float
    channel_time: int  # ns the event kept the channel busy; the longest participant for collisions

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass
class SimTrace:
    n: int
    horizon: int  # ns
    visible: tuple[tuple[int, ...], ...]
    records: list[TransmissionRecord] = field(default_factory=list)
    cw_timeline: list[list[tuple[int, int]]] = field(default_factory=list)
    offered: list[int] = field(default_factory=list)
    delivered: list[int] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)

    def arrays(self) -> dict[str, np.ndarray]:
        if not self.records:
            empty = np.zeros(0, dtype=np.int64)
            return dict(start=empty, station=empty, duration=empty, outcome=empty,
                        bits=np.zeros(0), channel_time=empty)
        cols = list(zip(*self.records))
        return dict(start=np.array(cols[0], dtype=np.int64), station=np.array(cols[1], dtype=np.int64),
                    duration=np.array(cols[2], dtype=np.int64), outcome=np.array(cols[3], dtype=np.int64),
                    bits=np.array(cols[4], dtype=float), channel_time=np.array(cols[5], dtype=np.int64))

    def cw_at(self, station: int, t: int) -> int:
        """Contention window in force at ``t`` (ns); changes at exactly ``t`` count."""
        timeline = self.cw_timeline[station]
        i = bisect.bisect_right(timeline, (t, CW_SENTINEL))
        return timeline[max(i - 1, 0)][1]

    def success_counts(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=np.int64)
        for r in self.records:
            if r.outcome == Outcome.SUCCESS:
                counts[r.station] += 1
        return counts


def observe(trace: SimTrace, node: int, window_start: int, window_end: int) -> np.ndarray:
    """Bits per station that ``node`` accounts for in ``[window_start, window_end)``.

    A success is attributed to the window containing its completion time; stations
    outside the node's carrier-sense range stay at zero.
    """
    bits = np.zeros(trace.n)
    visible = set(trace.visible[node])
    for r in trace.records:
        if r.outcome == Outcome.SUCCESS and r.station in visible and window_start <= r.end < window_end:
            bits[r.station] += r.bits
    return bits


def _busy_cumulative(starts: np.ndarray, spans: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Busy time within ``[0, p]`` for one station whose busy spans do not overlap."""
    if starts.size == 0:
        return np.zeros(points.size)
    order = np.argsort(starts, kind="stable")
    starts, spans = starts[order], spans[order]
    ends = starts + spans
    csum = np.concatenate(([0], np.cumsum(spans)))
    idx = np.searchsorted(starts, points, side="right")  # spans starting at or before p
    full = csum[np.maximum(idx - 1, 0)]
    last = np.maximum(idx - 1, 0)
    partial = np.where(idx > 0, np.minimum(points, ends[last]) - starts[last], 0)
    return np.where(idx > 0, full + partial, 0).astype(float)


def airtime_measure(trace: SimTrace, window_start: int, window_end: int) -> np.ndarray:
    """Share of ``[window_start, window_end)`` each station kept the channel busy."""
    if window_end <= window_start:
        raise ValueError("window must be non-empty")
    return windowed_airtime(trace, np.array([window_start, window_end]))[0]


def windowed_airtime(trace: SimTrace, edges: np.ndarray) -> np.ndarray:
    """Airtime share per window (rows) and station (columns) for window ``edges`` in ns."""
    a = trace.arrays()
    edges = np.asarray(edges, dtype=np.int64)
    out = np.zeros((edges.size - 1, trace.n))
    widths = np.diff(edges).astype(float)
    for s in range(trace.n):
        m = a["station"] == s
        cum = _busy_cumulative(a["start"][m], a["channel_time"][m], edges)
        out[:, s] = np.diff(cum) / widths
    return out


def windowed_delivery(trace: SimTrace, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Delivered bits and packets per window and station, by completion time."""
    a = trace.arrays()
    edges = np.asarray(edges, dtype=np.int64)
    nwin = edges.size - 1
    bits = np.zeros((nwin, trace.n))
    pkts = np.zeros((nwin, trace.n))
    ok = a["outcome"] == Outcome.SUCCESS
    ends = (a["start"] + a["duration"])[ok]
    win = np.searchsorted(edges, ends, side="right") - 1
    keep = (win >= 0) & (win < nwin)
    np.add.at(bits, (win[keep], a["station"][ok][keep]), a["bits"][ok][keep])
    np.add.at(pkts, (win[keep], a["station"][ok][keep]), 1)
    return bits, pkts


@dataclass
class WindowMetrics:
    window_end: np.ndarray  # seconds
    cw: np.ndarray
    airtime_share: np.ndarray
    throughput_bps: np.ndarray
    pkts_per_s: np.ndarray


def window_metrics(trace: SimTrace, width: float) -> WindowMetrics:
    """Per-window CW, airtime share, throughput and packet rate; ``width`` in seconds."""
    step = int(round(width * NS))
    edges = np.arange(0, trace.horizon + 1, step, dtype=np.int64)
    if edges.size < 2:
        edges = np.array([0, trace.horizon], dtype=np.int64)
    secs = np.diff(edges) / NS
    air = windowed_airtime(trace, edges)
    bits, pkts = windowed_delivery(trace, edges)
    cw = np.array([[trace.cw_at(s, int(e) - 1) for s in range(trace.n)] for e in edges[1:]])
    return WindowMetrics(edges[1:] / NS, cw, air, bits / secs[:, None], pkts / secs[:, None])
