"""PHY/MAC timing constants and per-frame durations.

All durations are in seconds. The defaults are one frozen 802.11n-flavoured
set; only the idle slot (9 us) is pinned by the 802.11n standard, the rest
are plausible OFDM values. Both the analytic model and the simulator take
their durations from here, so they always agree with each other.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from cwtune import ParameterError

SLOT_TIME = 9e-6
DIFS = 34e-6
SIFS = 16e-6
PHY_PREAMBLE_AND_HEADER = 40e-6
CONTROL_RATE = 24e6
ACK_BITS = 14 * 8
ACK_DURATION = PHY_PREAMBLE_AND_HEADER + ACK_BITS / CONTROL_RATE


@dataclass(frozen=True)
class MacTiming:
    """Channel timing shared by every station in a scenario."""

    slot_time: float = SLOT_TIME
    difs: float = DIFS
    sifs: float = SIFS
    phy_preamble_and_header: float = PHY_PREAMBLE_AND_HEADER
    ack_duration: float = ACK_DURATION
    control_rate: float = CONTROL_RATE

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ParameterError(f"MacTiming.{name} must be positive, got {value!r}")
        if not self.difs > self.sifs:
            raise ParameterError("MacTiming.difs must exceed sifs")

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


DEFAULT_TIMING = MacTiming()


@dataclass(frozen=True)
class FrameSpec:
    """Payload size (bits, MAC header folded in) and PHY data rate (bit/s)."""

    payload_bits: float
    phy_rate: float

    def __post_init__(self):
        if not self.phy_rate > 0:
            raise ParameterError(f"phy_rate must be positive, got {self.phy_rate!r}")
        if self.payload_bits < 0:
            raise ParameterError(f"payload_bits must be >= 0, got {self.payload_bits!r}")

    @classmethod
    def from_bytes(cls, payload_bytes: float, rate_mbps: float) -> "FrameSpec":
        return cls(payload_bytes * 8.0, rate_mbps * 1e6)

    @property
    def payload_airtime(self) -> float:
        return self.payload_bits / self.phy_rate


def success_duration(frame: FrameSpec, timing: MacTiming = DEFAULT_TIMING) -> float:
    """Channel time of an acknowledged frame: data, SIFS, ACK, then DIFS."""
    return (timing.phy_preamble_and_header + frame.payload_airtime
            + timing.sifs + timing.ack_duration + timing.difs)


def failure_duration(frame: FrameSpec, timing: MacTiming = DEFAULT_TIMING) -> float:
    """Channel time of a frame that is not acknowledged (plain DIFS, no EIFS)."""
    return timing.phy_preamble_and_header + frame.payload_airtime + timing.difs
