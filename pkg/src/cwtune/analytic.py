"""Closed-form saturation throughput model of a single collision domain.

Stations attempt a transmission in each virtual slot independently with
probability ``lambda_i``. A collision occupies the channel for the failure
duration of its longest participant, so outcomes are labelled by the
participating station with the longest frame. Two equivalent evaluations
are provided: the slot-probability form (:func:`evaluate_slot_model`) and
the transformed-variable form with ``y_i = lambda_i / (1 - lambda_i)``
(:func:`evaluate_transformed_model`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cwtune import ParameterError
from cwtune.timing import DEFAULT_TIMING, FrameSpec, MacTiming, failure_duration, success_duration


@dataclass(frozen=True)
class StationParams:
    id: int
    frame: FrameSpec
    channel_error_prob: float
    t_success: float
    t_failure: float

    def __post_init__(self):
        if not 0.0 <= self.channel_error_prob <= 1.0:
            raise ParameterError(f"channel_error_prob must be in [0, 1], got {self.channel_error_prob!r}")
        if not (self.t_success > 0 and self.t_failure > 0):
            raise ParameterError("transmission durations must be positive")

    @classmethod
    def from_frame(cls, id: int, frame: FrameSpec, timing: MacTiming = DEFAULT_TIMING,
                   channel_error_prob: float = 0.0) -> "StationParams":
        return cls(id, frame, channel_error_prob,
                   success_duration(frame, timing), failure_duration(frame, timing))

    @property
    def success_prob_factor(self) -> float:
        """``z_i = 1 - p_n,i``."""
        return 1.0 - self.channel_error_prob


def stations_from_frames(frames: Sequence[FrameSpec], timing: MacTiming = DEFAULT_TIMING,
                         channel_error_probs: Sequence[float] | None = None) -> list[StationParams]:
    if channel_error_probs is None:
        channel_error_probs = [0.0] * len(frames)
    return [StationParams.from_frame(i, f, timing, p)
            for i, (f, p) in enumerate(zip(frames, channel_error_probs))]


@dataclass(frozen=True)
class AttemptVector:
    """Per-station slot transmission probabilities, each strictly inside (0, 1)."""

    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ParameterError("attempt vector must be a non-empty 1-D sequence")
        if np.any(lam <= 0.0) or np.any(lam >= 1.0):
            raise ParameterError("attempt probabilities must lie strictly in (0, 1)")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def from_cw(cls, cws: Sequence[float]) -> "AttemptVector":
        return cls(np.array([lambda_from_cw(c) for c in cws]))

    @property
    def y(self) -> np.ndarray:
        return self.lam / (1.0 - self.lam)


@dataclass
class ModelOutput:
    throughput: np.ndarray
    airtime_share: np.ndarray
    p_collision: np.ndarray
    p_fail: np.ndarray
    p_success: np.ndarray
    p_unsuccess: np.ndarray
    P_e: float
    P_s: float
    P_u: float
    T_s: float
    T_u: float
    T_e: float
    Y: float
    order: np.ndarray = field(repr=False)


def lambda_from_cw(cw: float) -> float:
    """Attempt probability of a constant contention window: ``2 / (CW + 1)``."""
    if cw < 1:
        raise ParameterError(f"contention window must be >= 1, got {cw!r}")
    return 2.0 / (cw + 1.0)


def cw_from_lambda(lam: float) -> float:
    """Real-valued contention window ``(2 - lambda) / lambda``."""
    if not 0.0 < lam <= 1.0:
        raise ParameterError(f"attempt probability must lie in (0, 1], got {lam!r}")
    return (2.0 - lam) / lam


def transform_y(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0) or np.any(lam >= 1.0):
        raise ParameterError("transform requires attempt probabilities strictly in (0, 1)")
    y = lam / (1.0 - lam)
    return float(y) if y.ndim == 0 else y


def inverse_transform_y(y):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0) or not np.all(np.isfinite(y)):
        raise ParameterError("transformed variable must be positive and finite")
    lam = y / (1.0 + y)
    return float(lam) if lam.ndim == 0 else lam


def _prepare(stations: Sequence[StationParams], attempts):
    if len(stations) == 0:
        raise ParameterError("station list is empty")
    lam = attempts.lam if isinstance(attempts, AttemptVector) else np.asarray(attempts, dtype=float)
    if lam.shape != (len(stations),):
        raise ParameterError(f"attempt vector length {lam.shape} does not match {len(stations)} stations")
    if np.any(lam < 0.0) or np.any(lam >= 1.0):
        raise ParameterError("attempt probabilities must lie in [0, 1)")
    # Longest collision duration last: an outcome is charged to its highest-index participant.
    order = np.array(sorted(range(len(stations)),
                            key=lambda i: (stations[i].t_failure, stations[i].t_success, stations[i].id)))
    st = [stations[i] for i in order]
    ts = np.array([s.t_success for s in st])
    tu = np.array([s.t_failure for s in st])
    pn = np.array([s.channel_error_prob for s in st])
    bits = np.array([s.frame.payload_bits for s in st])
    return order, lam[order], ts, tu, pn, bits


def _unsort(order, values):
    out = np.empty_like(values)
    out[order] = values
    return out


def _slot_probabilities(lam, pn):
    n = lam.size
    q = 1.0 - lam
    others_idle = np.array([np.prod(np.delete(q, i)) for i in range(n)])
    lower_idle = np.concatenate(([1.0], np.cumprod(q)[:-1]))
    higher_idle = np.concatenate((np.cumprod(q[::-1])[::-1][1:], [1.0]))
    p_col = 1.0 - others_idle
    p_fail = 1.0 - (1.0 - pn) * (1.0 - p_col)
    p_succ = lam * (1.0 - p_fail)
    p_unsucc = lam * pn * others_idle + lam * (1.0 - lower_idle) * higher_idle
    return p_col, p_fail, p_succ, p_unsucc, higher_idle


def evaluate_slot_model(stations: Sequence[StationParams], attempts,
                        timing: MacTiming = DEFAULT_TIMING) -> ModelOutput:
    """Throughputs from per-slot success/failure probabilities.

    ``S_i = p_s,i D_i / (P_e T_e + P_s T_s + P_u T_u)`` with ``T_s`` and
    ``T_u`` the probability-weighted mean success and failure durations.
    """
    order, lam, ts, tu, pn, bits = _prepare(stations, attempts)
    p_col, p_fail, p_succ, p_unsucc, higher_idle = _slot_probabilities(lam, pn)
    P_e = float(np.prod(1.0 - lam))
    P_s = float(p_succ.sum())
    P_u = float(p_unsucc.sum())
    T_s = float(p_succ @ ts / P_s) if P_s > 0 else 0.0
    T_u = float(p_unsucc @ tu / P_u) if P_u > 0 else 0.0
    slot = P_e * timing.slot_time + P_s * T_s + P_u * T_u
    throughput = p_succ * bits / slot

    # Station i occupies the channel for its own frame when alone, and for the
    # longest participant's failure duration when colliding.
    n = lam.size
    occupancy = lam * (1.0 - pn) * (1.0 - p_col) * ts + lam * pn * (1.0 - p_col) * tu
    for i in range(n):
        occupancy[i] += lam[i] * (1.0 - np.prod(1.0 - lam[:i])) * higher_idle[i] * tu[i]
        for j in range(i + 1, n):
            occupancy[i] += lam[i] * lam[j] * higher_idle[j] * tu[j]
    airtime = occupancy / slot

    return ModelOutput(
        throughput=_unsort(order, throughput), airtime_share=_unsort(order, airtime),
        p_collision=_unsort(order, p_col), p_fail=_unsort(order, p_fail),
        p_success=_unsort(order, p_succ), p_unsuccess=_unsort(order, p_unsucc),
        P_e=P_e, P_s=P_s, P_u=P_u, T_s=T_s, T_u=T_u, T_e=timing.slot_time,
        Y=slot / P_e if P_e > 0 else math.inf, order=order,
    )


def evaluate_transformed_model(stations: Sequence[StationParams], attempts,
                               timing: MacTiming = DEFAULT_TIMING) -> ModelOutput:
    """Throughputs ``S_i = z_i y_i D_i / Y`` in the transformed variables.

    ``Y = T_e + sum_i y_i [z_i T_s,i + p_n,i T_u,i + (prod_{k<i}(1+y_k) - 1) T_u,i]``,
    which reduces to ``T_e + sum_i y_i T_s,i prod_{k<i}(1+y_k)`` when failed
    and successful frames last equally long.
    """
    order, lam, ts, tu, pn, bits = _prepare(stations, attempts)
    y = lam / (1.0 - lam)
    z = 1.0 - pn
    lower = np.concatenate(([1.0], np.cumprod(1.0 + y)[:-1]))
    per_station = z * ts + pn * tu + (lower - 1.0) * tu
    Y = timing.slot_time + float(y @ per_station)
    throughput = z * y * bits / Y

    # y_i dY/dy_i: the channel time of every outcome in which i transmits.
    n = y.size
    marginal = y * per_station
    for i in range(n):
        for j in range(i + 1, n):
            marginal[i] += y[j] * tu[j] * lower[j] * y[i] / (1.0 + y[i])
    airtime = marginal / Y

    p_col, p_fail, p_succ, p_unsucc, _ = _slot_probabilities(lam, pn)
    P_e = float(np.prod(1.0 - lam))
    P_s = float(p_succ.sum())
    P_u = float(p_unsucc.sum())
    return ModelOutput(
        throughput=_unsort(order, throughput), airtime_share=_unsort(order, airtime),
        p_collision=_unsort(order, p_col), p_fail=_unsort(order, p_fail),
        p_success=_unsort(order, p_succ), p_unsuccess=_unsort(order, p_unsucc),
        P_e=P_e, P_s=P_s, P_u=P_u,
        T_s=float(p_succ @ ts / P_s) if P_s > 0 else 0.0,
        T_u=float(p_unsucc @ tu / P_u) if P_u > 0 else 0.0,
        T_e=timing.slot_time, Y=Y, order=order,
    )


def airtime_shares(stations: Sequence[StationParams], attempts,
                   timing: MacTiming = DEFAULT_TIMING) -> np.ndarray:
    """Fraction of channel time each station keeps busy, collisions included."""
    return evaluate_slot_model(stations, attempts, timing).airtime_share
