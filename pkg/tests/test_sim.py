import numpy as np
import pytest

from cwtune import ParameterError
from cwtune.analytic import evaluate_transformed_model, lambda_from_cw, stations_from_frames
from cwtune.sim import (NS, Beb, ConstantRate, External, Fixed, Outcome, Simulator, StationConfig,
                        Topology, airtime_measure, observe, run, window_metrics)
from cwtune.sim.engine import stream_seed, to_ns
from cwtune.timing import FrameSpec, failure_duration, success_duration

F1000 = FrameSpec.from_bytes(1000, 26)


def fixed(cw, n, frame=F1000, **kw):
    return [StationConfig(frame, Fixed(cw), **kw) for _ in range(n)]


def delivered_bps(trace, seconds):
    a = trace.arrays()
    ok = a["outcome"] == Outcome.SUCCESS
    return np.bincount(a["station"][ok], weights=a["bits"][ok], minlength=trace.n) / seconds


def test_single_node_matches_model():
    tr = run(Topology.full(1), fixed(15, 1), duration=30.0, seed=3)
    a = tr.arrays()
    assert np.all(a["outcome"] == Outcome.SUCCESS)
    model = evaluate_transformed_model(stations_from_frames([F1000]), [lambda_from_cw(15)])
    assert delivered_bps(tr, 30.0)[0] == pytest.approx(model.throughput[0], rel=0.01)
    share = airtime_measure(tr, 0, tr.horizon)[0]
    assert share == pytest.approx(model.airtime_share[0], rel=0.01)


@pytest.mark.parametrize("n, cw", [(2, 15), (3, 63), (5, 31)])
def test_fixed_cw_matches_model(n, cw):
    tr = run(Topology.full(n), fixed(cw, n), duration=20.0, seed=11)
    model = evaluate_transformed_model(stations_from_frames([F1000] * n), np.full(n, lambda_from_cw(cw)))
    np.testing.assert_allclose(delivered_bps(tr, 20.0), model.throughput, rtol=0.05)


def test_two_symmetric_nodes_equal_airtime():
    tr = run(Topology.full(2), fixed(31, 2), duration=60.0, seed=5)
    share = airtime_measure(tr, 0, tr.horizon)
    assert abs(share[0] - share[1]) / share.mean() < 0.02
    assert share.sum() <= 1.0 + 1e-9


def test_durations_and_no_self_overlap():
    tr = run(Topology.full(3), [StationConfig(F1000, Beb()) for _ in range(3)], duration=5.0, seed=2)
    ts, tu = to_ns(success_duration(F1000)), to_ns(failure_duration(F1000))
    for s in range(3):
        rec = [r for r in tr.records if r.station == s]
        for r in rec:
            assert r.duration == (ts if r.outcome == Outcome.SUCCESS else tu)
        for a, b in zip(rec, rec[1:]):
            assert a.end <= b.start
    starts = [r.start for r in tr.records]
    assert starts == sorted(starts)


def test_deterministic_and_seed_sensitive():
    cfg = [StationConfig(F1000, Beb()) for _ in range(4)]
    a = run(Topology.full(4), cfg, duration=3.0, seed=9)
    b = run(Topology.full(4), cfg, duration=3.0, seed=9)
    c = run(Topology.full(4), cfg, duration=3.0, seed=10)
    assert a.records == b.records and a.cw_timeline == b.cw_timeline
    assert a.records != c.records


def test_zero_horizon_is_empty():
    tr = run(Topology.full(2), fixed(15, 2), duration=0.0)
    assert tr.records == []
    assert np.all(airtime_measure(tr, 0, NS) == 0)


def overlaps(a, b):
    """Pairs of overlapping records from two start-sorted, self-disjoint lists."""
    out, j = [], 0
    for r in a:
        while j < len(b) and b[j].end <= r.start:
            j += 1
        k = j
        while k < len(b) and b[k].start < r.end:
            out.append((r, b[k]))
            k += 1
    return out


def test_fim_edges_reuse_space_and_middle_collides():
    tr = run(Topology.flow_in_the_middle(), fixed(15, 3), duration=10.0, seed=4)
    edge0, middle, edge2 = ([r for r in tr.records if r.station == s] for s in range(3))
    both = overlaps(edge0, edge2)
    assert both
    assert any(a.outcome == Outcome.SUCCESS and b.outcome == Outcome.SUCCESS for a, b in both)
    # the middle hears both edges, so the only overlaps it suffers are same-slot starts
    for e in (edge0, edge2):
        for m, r in overlaps(middle, e):
            assert m.start == r.start
            assert m.outcome == Outcome.COLLISION and r.outcome == Outcome.COLLISION
    share = airtime_measure(tr, 0, tr.horizon)
    assert share.sum() > 1.0
    assert share[1] < 0.2


def test_fim_beb_starves_middle():
    cfg = [StationConfig(FrameSpec.from_bytes(1500, 26), Beb()) for _ in range(3)]
    tr = run(Topology.flow_in_the_middle(), cfg, duration=30.0, seed=1)
    share = airtime_measure(tr, 0, tr.horizon)
    assert share[1] <= 0.15 and share[0] > 0.6 and share[2] > 0.6


def test_channel_errors_rate():
    tr = run(Topology.full(1), fixed(15, 1, channel_error_prob=0.2), duration=20.0, seed=8)
    out = tr.arrays()["outcome"]
    assert np.mean(out == Outcome.CHANNEL_ERROR) == pytest.approx(0.2, abs=0.015)
    assert not np.any(out == Outcome.COLLISION)


def test_beb_doubles_and_resets():
    tr = run(Topology.full(4), [StationConfig(F1000, Beb(15, 63)) for _ in range(4)], duration=5.0, seed=1)
    allowed = {15, 31, 63}
    for s in range(4):
        timeline = tr.cw_timeline[s]
        assert {cw for _, cw in timeline} <= allowed
        rec = {r.end: r.outcome for r in tr.records if r.station == s}
        for (t, cw), (_, prev) in zip(timeline[1:], timeline):
            if cw == 15:
                assert rec[t] == Outcome.SUCCESS
            else:
                assert cw == min(2 * (prev + 1) - 1, 63) and rec[t] != Outcome.SUCCESS


@pytest.mark.parametrize("n", [2, 5])
def test_beb_frame_fairness(n):
    tr = run(Topology.full(n), [StationConfig(F1000, Beb()) for _ in range(n)], duration=60.0, seed=1)
    counts = tr.success_counts()
    assert (counts.max() - counts.min()) / counts.mean() < 0.05


def test_performance_anomaly():
    cfg = [StationConfig(FrameSpec.from_bytes(1500, r), Beb()) for r in (6.5, 26, 65)]
    tr = run(Topology.full(3), cfg, duration=40.0, seed=2)
    thr = delivered_bps(tr, 40.0)
    assert (thr.max() - thr.min()) / thr.max() < 0.15


def test_cbr_conservation_and_drops():
    cfg = [StationConfig(F1000, Beb(), ConstantRate(r)) for r in (200, 400, 600)]
    tr = run(Topology.full(3), cfg, duration=20.0, seed=1)
    for s, r in enumerate((200, 400, 600)):
        assert tr.delivered[s] <= tr.offered[s]
        assert tr.delivered[s] == pytest.approx(r * 20, rel=0.02)
        assert tr.dropped[s] == 0
    heavy = [StationConfig(F1000, Fixed(15), ConstantRate(5000), queue_capacity=10)]
    tr = run(Topology.full(1), heavy, duration=2.0, seed=1)
    assert tr.dropped[0] > 0
    assert tr.delivered[0] + tr.dropped[0] <= tr.offered[0]


def test_observe_visibility():
    tr = run(Topology.flow_in_the_middle(), fixed(31, 3), duration=5.0, seed=6)
    seen_edge = observe(tr, 0, 0, tr.horizon)
    seen_mid = observe(tr, 1, 0, tr.horizon)
    assert seen_edge[2] == 0 and seen_edge[0] > 0 and seen_edge[1] > 0
    done = [r for r in tr.records if r.outcome == Outcome.SUCCESS and r.end < tr.horizon]
    truth = np.bincount([r.station for r in done], weights=[r.bits for r in done], minlength=3)
    np.testing.assert_array_equal(seen_mid, truth)
    assert np.all(observe(tr, 1, NS, NS) == 0)


def test_observe_full_graph_sees_truth():
    tr = run(Topology.full(3), fixed(31, 3), duration=3.0, seed=6)
    for k in range(3):
        np.testing.assert_array_equal(observe(tr, k, 0, tr.horizon), observe(tr, 0, 0, tr.horizon))


def test_live_accumulator_matches_trace():
    sim = Simulator(Topology.flow_in_the_middle(), fixed(31, 3), duration=4.0, seed=2)
    snaps = {}
    sim.call_at(to_ns(1.0), lambda t: snaps.__setitem__("a", sim.observed_bits(0)))
    sim.call_at(to_ns(3.0), lambda t: snaps.__setitem__("b", sim.observed_bits(0)))
    tr = sim.run()
    live = np.array(snaps["b"]) - np.array(snaps["a"])
    np.testing.assert_allclose(live, observe(tr, 0, to_ns(1.0), to_ns(3.0)))


def test_external_cw_applies_and_is_logged():
    sim = Simulator(Topology.full(2), [StationConfig(F1000, External(15))] * 2, duration=2.0, seed=1)
    sim.call_at(to_ns(1.0), lambda t: sim.set_cw(0, 255))
    tr = sim.run()
    assert tr.cw_at(0, to_ns(0.5)) == 15
    assert tr.cw_at(0, to_ns(1.0)) == 255
    a = tr.arrays()
    late = a["start"] > to_ns(1.1)
    n0, n1 = [np.sum((a["station"] == s) & late) for s in (0, 1)]
    assert n0 < n1 / 4


def test_window_metrics_shape():
    tr = run(Topology.full(2), fixed(15, 2), duration=3.0, seed=1)
    m = window_metrics(tr, 1.0)
    assert m.airtime_share.shape == (3, 2)
    np.testing.assert_allclose(m.window_end, [1.0, 2.0, 3.0])
    assert np.all(m.cw == 15)


def test_topology_validation():
    with pytest.raises(ParameterError):
        Topology.from_adjacency([[0, 1], [0, 0]])
    with pytest.raises(ParameterError):
        Topology.from_adjacency([[1]])
    assert Topology.flow_in_the_middle().visible(0) == (0, 1)
    assert not Topology.flow_in_the_middle().fully_connected and Topology.full(4).fully_connected


def test_config_validation():
    with pytest.raises(ParameterError):
        Fixed(0)
    with pytest.raises(ParameterError):
        Beb(63, 15)
    with pytest.raises(ParameterError):
        ConstantRate(0)
    with pytest.raises(ParameterError):
        StationConfig(F1000, channel_error_prob=1.5)
    with pytest.raises(ParameterError):
        Simulator(Topology.full(2), fixed(15, 3))


def test_stream_seeds_distinct():
    seeds = {stream_seed(1, k, i) for k in range(4) for i in range(10)}
    assert len(seeds) == 40
