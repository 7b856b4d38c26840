"""Declarative experiment description and its scenario-file format.

Scenario files are TOML with a fixed set of keys. Connectivity is declared,
not derived from geometry. Minimal example::

    name = "homogeneous_n5"
    duration = 60.0
    seed = 1
    topology = "full"
    policy = "learn"

    [learning]
    tau = 0.2

    [[station]]
    count = 5
    rate_mbps = 26
    payload_bytes = 1000
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from cwtune import ParameterError
from cwtune.agents import AgentConfig, Coordination, UtilityScope
from cwtune.kw import CW_MAX, KwConfig
from cwtune.sim.station import Beb, ConstantRate, External, Fixed, Saturated, StationConfig
from cwtune.sim.topology import Topology
from cwtune.timing import FrameSpec, MacTiming

POLICIES = ("beb", "fixed", "learn")


class ScenarioError(ParameterError):
    """Malformed or inconsistent scenario description."""


TOP_KEYS = {"name", "duration", "seed", "topology", "adjacency", "policy", "metrics_window", "tail",
            "timing", "learning", "station", "schedule"}
TIMING_KEYS = set(MacTiming.__dataclass_fields__)
LEARNING_KEYS = {"tau", "delta", "eta", "alpha", "coordination", "utility", "throughput_floor",
                 "cw_min", "cw_max"}
STATION_KEYS = {"count", "rate_mbps", "payload_bytes", "p_n", "traffic", "load_pps", "cw", "cw_min",
                "cw_max", "policy", "queue_capacity"}
SCHEDULE_KEYS = {"time", "station", "rate_mbps", "payload_bytes"}


@dataclass(frozen=True)
class StationSpec:
    rate_mbps: float
    payload_bytes: float
    p_n: float = 0.0
    traffic: str = "saturated"
    load_pps: float | None = None
    policy: str = "beb"
    cw: int = 15
    cw_min: int = 15
    cw_max: int = CW_MAX
    queue_capacity: int = 1000

    @property
    def frame(self) -> FrameSpec:
        return FrameSpec.from_bytes(self.payload_bytes, self.rate_mbps)

    def station_config(self) -> StationConfig:
        if self.policy == "beb":
            policy = Beb(self.cw_min, self.cw_max)
        elif self.policy == "fixed":
            policy = Fixed(self.cw)
        else:
            policy = External(self.cw)
        traffic = Saturated() if self.traffic == "saturated" else ConstantRate(self.load_pps)
        return StationConfig(self.frame, policy, traffic, self.p_n, self.queue_capacity)


@dataclass(frozen=True)
class ScheduleEntry:
    time: float
    station: int
    rate_mbps: float | None = None
    payload_bytes: float | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    topology: Topology
    stations: tuple[StationSpec, ...]
    duration: float = 60.0
    seed: int = 0
    learning: AgentConfig | None = None
    schedule: tuple[ScheduleEntry, ...] = ()
    timing: MacTiming = field(default_factory=MacTiming)
    metrics_window: float = 1.0
    tail: float = 10.0
    topology_kind: str = "full"

    @property
    def learners(self) -> list[int]:
        return [i for i, s in enumerate(self.stations) if s.policy == "learn"]

    def schedule_frames(self) -> list[tuple[float, int, FrameSpec]]:
        """Timed frame changes, resolved against the running frame of each station."""
        current = {i: (s.rate_mbps, s.payload_bytes) for i, s in enumerate(self.stations)}
        out = []
        for e in sorted(self.schedule, key=lambda e: (e.time, e.station)):
            rate, size = current[e.station]
            rate = rate if e.rate_mbps is None else e.rate_mbps
            size = size if e.payload_bytes is None else e.payload_bytes
            current[e.station] = (rate, size)
            out.append((e.time, e.station, FrameSpec.from_bytes(size, rate)))
        return out

    def resolved(self) -> dict[str, Any]:
        """Complete configuration, enough to reproduce the run."""
        d = {
            "name": self.name, "duration": self.duration, "seed": self.seed,
            "topology": self.topology_kind,
            "adjacency": [[int(v) for v in row] for row in self.topology.adjacency],
            "metrics_window": self.metrics_window, "tail": self.tail,
            "timing": self.timing.as_dict(),
            "stations": [asdict(s) for s in self.stations],
            "schedule": [asdict(e) for e in self.schedule],
        }
        if self.learning is not None:
            lc = self.learning
            d["learning"] = {
                "tau": lc.kw.tau, "delta": lc.kw.delta, "eta": lc.kw.eta, "alpha": lc.kw.alpha,
                "lower": lc.kw.lower, "upper": lc.kw.upper,
                "coordination": lc.coordination.value, "utility": lc.utility_scope.value,
                "throughput_floor": lc.throughput_floor, "cw_min": lc.cw_min, "cw_max": lc.cw_max,
            }
        return d

    def header(self) -> str:
        return json.dumps(self.resolved(), sort_keys=True)


def _check_keys(table: dict, allowed: set[str], where: str, errors: list[str]) -> None:
    for key in table:
        if key not in allowed:
            errors.append(f"unknown field '{key}' in {where}")


def parse_scenario_text(text: str, source: str = "<scenario>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{source}: parse error: {exc}") from None


def build_scenario(data: dict, source: str = "<scenario>") -> ScenarioSpec:
    """Validate a parsed scenario table; all violations are reported together."""
    errors: list[str] = []
    _check_keys(data, TOP_KEYS, "scenario", errors)
    default_policy = data.get("policy", "beb")
    if default_policy not in POLICIES:
        errors.append(f"field 'policy' must be one of {POLICIES}, got {default_policy!r}")

    stations: list[StationSpec] = []
    raw_stations = data.get("station", [])
    if not isinstance(raw_stations, list) or not raw_stations:
        errors.append("at least one [[station]] table is required")
        raw_stations = []
    for k, raw in enumerate(raw_stations):
        where = f"station[{k}]"
        _check_keys(raw, STATION_KEYS, where, errors)
        count = raw.get("count", 1)
        if not isinstance(count, int) or count < 1:
            errors.append(f"{where}: field 'count' must be a positive integer")
            continue
        cws = raw.get("cw", 15)
        cws = cws if isinstance(cws, list) else [cws] * count
        if len(cws) != count:
            errors.append(f"{where}: field 'cw' lists {len(cws)} values for count = {count}")
            continue
        for field_name in ("rate_mbps", "payload_bytes"):
            if field_name not in raw:
                errors.append(f"{where}: missing field '{field_name}'")
        if any(f not in raw for f in ("rate_mbps", "payload_bytes")):
            continue
        traffic = raw.get("traffic", "saturated")
        if traffic not in ("saturated", "cbr"):
            errors.append(f"{where}: field 'traffic' must be 'saturated' or 'cbr'")
        if traffic == "cbr" and not raw.get("load_pps", 0) > 0:
            errors.append(f"{where}: cbr traffic needs a positive 'load_pps'")
        policy = raw.get("policy", default_policy)
        if policy not in POLICIES:
            errors.append(f"{where}: field 'policy' must be one of {POLICIES}")
        for cw in cws:
            if not (isinstance(cw, int) and 1 <= cw <= CW_MAX):
                errors.append(f"{where}: field 'cw' must be integers in [1, {CW_MAX}], got {cw!r}")
        for j in range(count):
            try:
                spec = StationSpec(
                    rate_mbps=float(raw["rate_mbps"]), payload_bytes=float(raw["payload_bytes"]),
                    p_n=float(raw.get("p_n", 0.0)), traffic=traffic,
                    load_pps=raw.get("load_pps"), policy=policy, cw=cws[j],
                    cw_min=raw.get("cw_min", 15), cw_max=raw.get("cw_max", CW_MAX),
                    queue_capacity=raw.get("queue_capacity", 1000))
                spec.station_config()
                stations.append(spec)
            except (ParameterError, TypeError, ValueError) as exc:
                errors.append(f"{where}: {exc}")
                break

    n = len(stations)
    kind = data.get("topology", "full")
    topology = None
    try:
        if kind == "full":
            topology = Topology.full(max(n, 1))
        elif kind == "fim":
            topology = Topology.flow_in_the_middle()
        elif kind == "explicit":
            if "adjacency" not in data:
                errors.append("topology 'explicit' needs an 'adjacency' matrix")
            else:
                topology = Topology.from_adjacency(data["adjacency"])
        else:
            errors.append(f"field 'topology' must be full, fim or explicit, got {kind!r}")
    except ParameterError as exc:
        errors.append(f"adjacency: {exc}")
    if topology is not None and n and topology.n != n:
        errors.append(f"topology has {topology.n} nodes but {n} stations are declared")

    timing = MacTiming()
    if "timing" in data:
        _check_keys(data["timing"], TIMING_KEYS, "timing", errors)
        try:
            timing = replace(timing, **{k: float(v) for k, v in data["timing"].items()
                                        if k in TIMING_KEYS})
        except ParameterError as exc:
            errors.append(f"timing: {exc}")

    duration = data.get("duration", 60.0)
    if not isinstance(duration, (int, float)) or duration < 0:
        errors.append("field 'duration' must be a non-negative number")
        duration = 0.0
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        errors.append("field 'seed' must be an integer")
        seed = 0

    schedule = []
    for k, raw in enumerate(data.get("schedule", [])):
        where = f"schedule[{k}]"
        _check_keys(raw, SCHEDULE_KEYS, where, errors)
        if "time" not in raw or "station" not in raw:
            errors.append(f"{where}: needs 'time' and 'station'")
            continue
        entry = ScheduleEntry(float(raw["time"]), int(raw["station"]), raw.get("rate_mbps"),
                              raw.get("payload_bytes"))
        if not 0 <= entry.time <= duration:
            errors.append(f"{where}: time {entry.time} outside [0, {duration}]")
        if not 0 <= entry.station < n:
            errors.append(f"{where}: station {entry.station} does not exist")
        schedule.append(entry)

    learning = None
    if any(s.policy == "learn" for s in stations):
        raw = data.get("learning", {})
        _check_keys(raw, LEARNING_KEYS, "learning", errors)
        try:
            kw = KwConfig(tau=float(raw.get("tau", 0.2)), delta=float(raw.get("delta", 0.3)),
                          eta=float(raw.get("eta", 0.1)), alpha=raw.get("alpha"))
            learning = AgentConfig(
                kw=kw, coordination=Coordination(raw.get("coordination", "coordinated")),
                utility_scope=UtilityScope(raw.get("utility", "local")),
                throughput_floor=float(raw.get("throughput_floor", 1000.0)),
                cw_min=raw.get("cw_min", 15), cw_max=raw.get("cw_max", CW_MAX))
        except (ParameterError, ValueError) as exc:
            errors.append(f"learning: {exc}")
    elif "learning" in data:
        _check_keys(data["learning"], LEARNING_KEYS, "learning", errors)

    metrics_window = float(data.get("metrics_window", 1.0))
    tail = float(data.get("tail", 10.0))
    if not metrics_window > 0:
        errors.append("field 'metrics_window' must be positive")
    if not 0 < tail:
        errors.append("field 'tail' must be positive")

    if errors:
        raise ScenarioError(f"{source}: invalid scenario:\n  " + "\n  ".join(errors))
    return ScenarioSpec(name=str(data.get("name", Path(source).stem)), topology=topology,
                        stations=tuple(stations), duration=float(duration), seed=seed,
                        learning=learning, schedule=tuple(schedule), timing=timing,
                        metrics_window=metrics_window, tail=tail, topology_kind=kind)


def load_raw(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        bundled = resources.files("cwtune.scenarios") / (path.name if path.suffix else f"{path.name}.scn")
        if bundled.is_file():
            return parse_scenario_text(bundled.read_text(), str(path))
        raise ScenarioError(f"{path}: no such scenario file")
    return parse_scenario_text(path.read_text(), str(path))


def apply_overrides(data: dict, policy: str | None = None, seed: int | None = None,
                    duration: float | None = None, coordination: str | None = None,
                    utility: str | None = None, **params: Any) -> dict:
    """Copy of a raw scenario table with command-line style overrides applied."""
    data = copy.deepcopy(data)
    if policy is not None:
        data["policy"] = policy
        for st in data.get("station", []):
            st.pop("policy", None)
    if seed is not None:
        data["seed"] = seed
    if duration is not None:
        data["duration"] = duration
    if coordination is not None:
        data.setdefault("learning", {})["coordination"] = coordination
    if utility is not None:
        data.setdefault("learning", {})["utility"] = utility
    for key, value in params.items():
        set_parameter(data, key, value)
    return data


def set_parameter(data: dict, path: str, value: Any) -> None:
    """Set a dotted parameter such as ``learning.tau`` or ``station.0.rate_mbps``."""
    parts = path.split(".")
    if len(parts) == 1 and parts[0] in TOP_KEYS - {"timing", "learning", "station", "schedule"}:
        data[parts[0]] = value
    elif len(parts) == 2 and parts[0] == "learning" and parts[1] in LEARNING_KEYS:
        data.setdefault("learning", {})[parts[1]] = value
    elif len(parts) == 2 and parts[0] == "timing" and parts[1] in TIMING_KEYS:
        data.setdefault("timing", {})[parts[1]] = value
    elif (len(parts) == 3 and parts[0] == "station" and parts[1].isdigit()
          and parts[2] in STATION_KEYS and int(parts[1]) < len(data.get("station", []))):
        data["station"][int(parts[1])][parts[2]] = value
    else:
        raise ScenarioError(f"parameter '{path}' is not addressable")


def load_scenario(path: str | Path, **overrides: Any) -> ScenarioSpec:
    data = apply_overrides(load_raw(path), **overrides)
    return build_scenario(data, str(path))


def bundled_scenarios() -> list[str]:
    root = resources.files("cwtune.scenarios")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))
