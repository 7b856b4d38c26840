"""CSMA/CA simulator: topology, stations, engine and trace analysis."""

from cwtune.sim.engine import Simulator, run, stream_seed, to_ns
from cwtune.sim.station import Beb, ConstantRate, External, Fixed, Saturated, StationConfig
from cwtune.sim.topology import Topology
from cwtune.sim.trace import (NS, Outcome, SimTrace, TransmissionRecord, WindowMetrics,
                              airtime_measure, observe, window_metrics, windowed_airtime,
                              windowed_delivery)

__all__ = [
    "NS", "Beb", "ConstantRate", "External", "Fixed", "Outcome", "Saturated", "SimTrace",
    "Simulator", "StationConfig", "Topology", "TransmissionRecord", "WindowMetrics",
    "airtime_measure", "observe", "run", "stream_seed", "to_ns", "window_metrics",
    "windowed_airtime", "windowed_delivery",
]
