"""Run scenarios end to end and turn traces into CSV outputs and summaries."""

from __future__ import annotations

import csv
import io
import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from cwtune import ParameterError
from cwtune.agents import LearningController
from cwtune.scenario import ScenarioSpec, apply_overrides, build_scenario
from cwtune.sim.engine import Simulator, stream_seed, to_ns
from cwtune.sim.station import Fixed
from cwtune.sim.trace import (NS, Outcome, SimTrace, WindowMetrics, window_metrics, windowed_airtime,
                              windowed_delivery)


@dataclass
class RunResult:
    spec: ScenarioSpec
    trace: SimTrace
    controller: LearningController | None
    metrics: WindowMetrics

    @property
    def agent_rows(self) -> list[tuple]:
        return [] if self.controller is None else self.controller.log_rows()


def simulate(spec: ScenarioSpec) -> RunResult:
    """Deterministic run of one scenario, learning agents included."""
    sim = Simulator(spec.topology, [s.station_config() for s in spec.stations], spec.timing,
                    spec.duration, spec.seed)
    for when, station, frame in spec.schedule_frames():
        sim.call_at(to_ns(when), lambda t, s=station, f=frame: sim.set_frame(s, f))
    controller = None
    if spec.learners:
        rngs = [random.Random(stream_seed(spec.seed, 2, s)) for s in spec.learners]
        phase_rng = random.Random(stream_seed(spec.seed, 3))
        controller = LearningController(sim, spec.learners, spec.learning, rngs, phase_rng)
        controller.attach()
    trace = sim.run()
    return RunResult(spec, trace, controller, window_metrics(trace, spec.metrics_window))


class SimulatedUtility:
    """Scores a Fixed-CW vector by simulating ``spec`` with those windows.

    Throughput is measured over the final ``duration - warmup`` seconds. The
    object is picklable, so it can be handed to ``grid_oracle`` with workers.
    """

    def __init__(self, spec: ScenarioSpec, warmup: float = 2.0, floor: float = 1000.0):
        if not 0 <= warmup < spec.duration:
            raise ParameterError("warmup must lie in [0, duration)")
        self.spec = spec
        self.warmup = warmup
        self.floor = floor

    def __call__(self, cws: tuple[int, ...]) -> tuple[float, np.ndarray]:
        spec = self.spec
        if len(cws) != len(spec.stations):
            raise ParameterError(f"expected {len(spec.stations)} CW values, got {len(cws)}")
        stations = [replace(s.station_config(), policy=Fixed(int(c))) for s, c in zip(spec.stations, cws)]
        sim = Simulator(spec.topology, stations, spec.timing, spec.duration, spec.seed)
        tr = sim.run()
        edges = np.array([to_ns(self.warmup), to_ns(spec.duration)])
        thr = windowed_delivery(tr, edges)[0][0] / (spec.duration - self.warmup)
        air = windowed_airtime(tr, edges)[0]
        return float(np.sum(np.log(np.maximum(thr, self.floor)))), air


# -- summary metrics ---------------------------------------------------------------

def tail_mask(metrics: WindowMetrics, tail: float, end: float | None = None) -> np.ndarray:
    end = metrics.window_end[-1] if end is None else end
    return (metrics.window_end > end - tail + 1e-9) & (metrics.window_end <= end + 1e-9)


def tail_mean(values: np.ndarray, metrics: WindowMetrics, tail: float, end: float | None = None):
    m = tail_mask(metrics, tail, end)
    return values[m].mean(axis=0)


def convergence_time(metrics: WindowMetrics, band: float = 0.05, sliding: float = 5.0,
                     final: float = 10.0, start: float = 0.0, end: float | None = None) -> float:
    """First time after which every station's sliding-mean airtime stays near its final mean.

    The sliding mean over ``sliding`` seconds must remain within ``band`` of the
    mean over the last ``final`` seconds of ``[start, end]`` until ``end``.
    Returns ``nan`` when the criterion never holds.
    """
    t = metrics.window_end
    end = t[-1] if end is None else end
    sel = (t > start + 1e-9) & (t <= end + 1e-9)
    t, air = t[sel], metrics.airtime_share[sel]
    if t.size == 0:
        return math.nan
    width = t[1] - t[0] if t.size > 1 else t[0]
    k = max(1, int(round(sliding / width)))
    target = air[t > end - final + 1e-9].mean(axis=0)
    if t.size < k:
        return math.nan
    kernel = np.ones(k) / k
    smooth = np.stack([np.convolve(air[:, s], kernel, mode="valid") for s in range(air.shape[1])], 1)
    smooth_t = t[k - 1:]
    ok = np.all(np.abs(smooth - target) <= band, axis=1)
    if not ok[-1]:
        return math.nan
    bad = np.nonzero(~ok)[0]
    first = 0 if bad.size == 0 else bad[-1] + 1
    return float(smooth_t[first])


def summarize(result: RunResult) -> dict[str, Any]:
    spec, m, tr = result.spec, result.metrics, result.trace
    air = tail_mean(m.airtime_share, m, spec.tail)
    thr = tail_mean(m.throughput_bps, m, spec.tail)
    pkts = tail_mean(m.pkts_per_s, m, spec.tail)
    log2cw = np.log2(m.cw[tail_mask(m, spec.tail)])
    s: dict[str, Any] = {"name": spec.name, "seed": spec.seed, "duration": spec.duration,
                         "tail": spec.tail, "stations": len(spec.stations)}
    for i in range(len(spec.stations)):
        s[f"airtime_share.{i}"] = float(air[i])
        s[f"throughput_bps.{i}"] = float(thr[i])
        s[f"pkts_per_s.{i}"] = float(pkts[i])
        s[f"offered_pkts.{i}"] = tr.offered[i]
        s[f"delivered_pkts.{i}"] = tr.delivered[i]
        s[f"dropped_pkts.{i}"] = tr.dropped[i]
        s[f"log2_cw_mean.{i}"] = float(log2cw[:, i].mean())
        s[f"log2_cw_std.{i}"] = float(log2cw[:, i].std())
    s["total_throughput_bps"] = float(thr.sum())
    s["utility"] = float(np.sum(np.log(np.maximum(thr, 1000.0))))
    s["convergence_time_s"] = convergence_time(m)
    return s


# -- output files ------------------------------------------------------------------

def _header(spec: ScenarioSpec) -> str:
    return f"# config: {spec.header()}\n"


def _csv(rows: Sequence[Sequence], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 9)) if math.isfinite(v) else str(v)
    return v


def trace_rows(trace: SimTrace) -> list[tuple]:
    return [(r.start, r.station, r.duration, Outcome(r.outcome).name.lower(), int(r.bits))
            for r in trace.records]


def metrics_rows(m: WindowMetrics) -> list[tuple]:
    rows = []
    for w, end in enumerate(m.window_end):
        for s in range(m.cw.shape[1]):
            rows.append((float(end), s, int(m.cw[w, s]), float(m.airtime_share[w, s]),
                         float(m.throughput_bps[w, s]), float(m.pkts_per_s[w, s])))
    return rows


TRACE_COLUMNS = ("t_start_ns", "station", "duration_ns", "outcome", "bits")
METRICS_COLUMNS = ("window_end_s", "station", "cw", "airtime_share", "throughput_bps", "pkts_per_s")
AGENT_COLUMNS = ("window_end_s", "agent", "stage", "cw_applied", "g_value", "g_tilde", "y")


def write_outputs(result: RunResult, out: str | Path, with_trace: bool = True) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    head = _header(result.spec)
    if with_trace:
        (out / "trace.csv").write_text(head + _csv(trace_rows(result.trace), TRACE_COLUMNS))
    (out / "metrics.csv").write_text(head + _csv(metrics_rows(result.metrics), METRICS_COLUMNS))
    if result.controller is not None:
        (out / "agents.csv").write_text(head + _csv(result.agent_rows, AGENT_COLUMNS))
    write_summary(summarize(result), out / "summary.txt", result.spec)
    return out


def write_summary(summary: dict[str, Any], path: Path, spec: ScenarioSpec | None = None) -> None:
    lines = [] if spec is None else [_header(spec).rstrip("\n")]
    lines += [f"{k} = {_fmt(v)}" for k, v in summary.items()]
    path.write_text("\n".join(lines) + "\n")


def read_summary(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if path.is_dir():
        path = path / "summary.txt"
    out: dict[str, Any] = {}
    for line in path.read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" = ")
        try:
            out[key] = int(value)
        except ValueError:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def run_scenario(spec: ScenarioSpec, out: str | Path | None = None, with_trace: bool = True):
    result = simulate(spec)
    if out is not None:
        write_outputs(result, out, with_trace)
    return result


def compare(a: dict[str, Any], b: dict[str, Any]) -> dict[str, float]:
    """Ratios and deltas of run ``a`` relative to run ``b``."""
    if a.get("stations") != b.get("stations"):
        raise ParameterError(f"station sets differ: {a.get('stations')} vs {b.get('stations')}")
    n = int(a["stations"])
    out: dict[str, float] = {}
    for i in range(n):
        ta, tb = a[f"throughput_bps.{i}"], b[f"throughput_bps.{i}"]
        out[f"throughput_ratio.{i}"] = ta / tb if tb else math.inf
        out[f"airtime_delta.{i}"] = a[f"airtime_share.{i}"] - b[f"airtime_share.{i}"]
        sb = b[f"airtime_share.{i}"]
        out[f"airtime_ratio.{i}"] = a[f"airtime_share.{i}"] / sb if sb else math.inf
    tb = b["total_throughput_bps"]
    out["total_throughput_ratio"] = a["total_throughput_bps"] / tb if tb else math.inf
    out["utility_delta"] = a["utility"] - b["utility"]
    return out


# -- sweeps ------------------------------------------------------------------------

SWEEP_KEYS = ("airtime_share", "throughput_bps", "log2_cw_std")


def _sweep_one(job: tuple[dict, str, Any, str | None, bool]) -> dict[str, Any]:
    data, parameter, value, out, with_trace = job
    spec = build_scenario(apply_overrides(data, **{parameter: value}), str(data.get("name", "sweep")))
    result = run_scenario(spec, out, with_trace)
    return summarize(result)


def sweep(data: dict, parameter: str, values: Sequence[Any], out: str | Path | None = None,
          workers: int = 1, with_trace: bool = False) -> list[tuple[Any, dict[str, Any]]]:
    """One independent run per value of a dotted ``parameter``.

    Each run goes to ``out/<parameter>=<value>``; ``out/sweep.csv`` holds the
    comparative table. A sweep over ``seed`` also gets mean and spread rows.
    """
    if not values:
        raise ParameterError("sweep needs at least one value")
    apply_overrides(data, **{parameter: values[0]})  # fails early when not addressable
    root = None if out is None else Path(out)
    jobs = [(data, parameter, v, None if root is None else str(root / f"{parameter}={v}"), with_trace)
            for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_sweep_one, jobs))
    else:
        summaries = [_sweep_one(j) for j in jobs]
    rows = list(zip(values, summaries))
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        (root / "sweep.csv").write_text(sweep_table(parameter, rows))
    return rows


def sweep_table(parameter: str, rows: Sequence[tuple[Any, dict[str, Any]]]) -> str:
    n = int(rows[0][1]["stations"])
    cols = [f"{k}.{i}" for k in SWEEP_KEYS for i in range(n)]
    cols += ["total_throughput_bps", "utility", "convergence_time_s"]
    body = [[v] + [s[c] for c in cols] for v, s in rows]
    if parameter == "seed" and len(rows) > 1:
        mat = np.array([[float(s[c]) for c in cols] for _, s in rows])
        stats = [(float(c[np.isfinite(c)].mean()), float(c[np.isfinite(c)].std()))
                 if np.isfinite(c).any() else (math.nan, math.nan) for c in mat.T]
        body.append(["mean"] + [m for m, _ in stats])
        body.append(["spread"] + [sd for _, sd in stats])
    return "# sweep: " + json.dumps({"parameter": parameter}) + "\n" + _csv(body, [parameter] + cols)
