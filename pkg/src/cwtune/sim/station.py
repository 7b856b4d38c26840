"""Per-station simulator configuration: traffic source and CW policy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from cwtune import ParameterError
from cwtune.kw import CW_MAX
from cwtune.timing import FrameSpec


@dataclass(frozen=True)
class Saturated:
    kind: str = field(default="saturated", init=False)


@dataclass(frozen=True)
class ConstantRate:
    """CBR arrivals at ``rate`` packets per second."""

    rate: float
    kind: str = field(default="cbr", init=False)

    def __post_init__(self):
        if not self.rate > 0:
            raise ParameterError("constant-rate traffic needs a positive rate")


TrafficModel = Union[Saturated, ConstantRate]


@dataclass(frozen=True)
class Beb:
    cw_min: int = 15
    cw_max: int = 1023
    kind: str = field(default="beb", init=False)

    def __post_init__(self):
        _check_cw(self.cw_min)
        _check_cw(self.cw_max)
        if self.cw_min > self.cw_max:
            raise ParameterError("cw_min must not exceed cw_max")


@dataclass(frozen=True)
class Fixed:
    cw: int
    kind: str = field(default="fixed", init=False)

    def __post_init__(self):
        _check_cw(self.cw)


@dataclass(frozen=True)
class External:
    """CW driven by a controller; ``cw`` is the value in force at time zero."""

    cw: int = 15
    kind: str = field(default="external", init=False)

    def __post_init__(self):
        _check_cw(self.cw)


CwPolicy = Union[Beb, Fixed, External]


def _check_cw(cw: int) -> None:
    if not (isinstance(cw, int) and 1 <= cw <= CW_MAX):
        raise ParameterError(f"contention window must be an integer in [1, {CW_MAX}], got {cw!r}")


@dataclass(frozen=True)
class StationConfig:
    frame: FrameSpec
    policy: CwPolicy = Beb()
    traffic: TrafficModel = Saturated()
    channel_error_prob: float = 0.0
    queue_capacity: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.channel_error_prob <= 1.0:
            raise ParameterError("channel_error_prob must be in [0, 1]")
        if self.queue_capacity < 1:
            raise ParameterError("queue_capacity must be >= 1")

    @property
    def initial_cw(self) -> int:
        return self.policy.cw_min if isinstance(self.policy, Beb) else self.policy.cw
