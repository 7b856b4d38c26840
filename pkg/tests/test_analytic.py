import itertools

import numpy as np
import pytest

from cwtune import ParameterError
from cwtune.analytic import (AttemptVector, StationParams, airtime_shares, cw_from_lambda,
                             evaluate_slot_model, evaluate_transformed_model, inverse_transform_y,
                             lambda_from_cw, stations_from_frames, transform_y)
from cwtune.timing import DEFAULT_TIMING, FrameSpec


def enumerate_slots(stations, lam, te=DEFAULT_TIMING.slot_time):
    """Brute force over all 2^N attempt patterns of one virtual slot."""
    n = len(lam)
    thr, air, mean_slot = np.zeros(n), np.zeros(n), 0.0
    for pattern in itertools.product((0, 1), repeat=n):
        p = np.prod([l if a else 1 - l for l, a in zip(lam, pattern)])
        tx = [i for i in range(n) if pattern[i]]
        if not tx:
            mean_slot += p * te
        elif len(tx) == 1:
            s = stations[tx[0]]
            busy = (1 - s.channel_error_prob) * s.t_success + s.channel_error_prob * s.t_failure
            mean_slot += p * busy
            air[tx[0]] += p * busy
            thr[tx[0]] += p * (1 - s.channel_error_prob) * s.frame.payload_bits
        else:
            busy = max(stations[i].t_failure for i in tx)
            mean_slot += p * busy
            for i in tx:
                air[i] += p * busy
    return thr / mean_slot, air / mean_slot


def random_instance(rng, n):
    frames = [FrameSpec.from_bytes(float(rng.choice([250, 500, 1000, 1500])),
                                   float(rng.choice([6.5, 13, 26, 65]))) for _ in range(n)]
    pn = rng.uniform(0, 0.3, n) * (rng.random(n) < 0.5)
    return stations_from_frames(frames, channel_error_probs=list(pn)), rng.uniform(0.002, 0.5, n)


# frozen from enumerate_slots
HETERO_THR = [2192934.4241919164, 4078858.028996965, 9711566.73570706]
HETERO_AIR = [0.438847412945189, 0.2785078395932998, 0.3407581790964992]
N5_THR = 3087280.5903038615
N5_AIR = 0.20008714465996638
SINGLE_THR = 15830331.320716424


def test_hetero_golden():
    frames = [FrameSpec.from_bytes(1500, r) for r in (6.5, 26, 65)]
    st = stations_from_frames(frames, channel_error_probs=[0.0, 0.1, 0.0])
    out = evaluate_transformed_model(st, AttemptVector.from_cw([63, 31, 15]).lam)
    np.testing.assert_allclose(out.throughput, HETERO_THR, rtol=1e-12)
    np.testing.assert_allclose(out.airtime_share, HETERO_AIR, rtol=1e-12)


def test_homogeneous_golden(mcs3_1000):
    st = stations_from_frames([mcs3_1000] * 5)
    out = evaluate_slot_model(st, np.full(5, lambda_from_cw(44)))
    np.testing.assert_allclose(out.throughput, N5_THR, rtol=1e-12)
    np.testing.assert_allclose(out.airtime_share, N5_AIR, rtol=1e-12)


def test_single_station_golden(mcs3_1000):
    out = evaluate_transformed_model(stations_from_frames([mcs3_1000]), [lambda_from_cw(15)])
    assert out.throughput[0] == pytest.approx(SINGLE_THR, rel=1e-12)
    assert out.p_collision[0] == 0.0


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_matches_enumeration(rng, n):
    for _ in range(20):
        st, lam = random_instance(rng, n)
        thr, air = enumerate_slots(st, lam)
        for evaluate in (evaluate_slot_model, evaluate_transformed_model):
            out = evaluate(st, lam)
            np.testing.assert_allclose(out.throughput, thr, rtol=1e-10)
            np.testing.assert_allclose(out.airtime_share, air, rtol=1e-10)


def test_two_forms_agree(rng):
    for _ in range(300):
        st, lam = random_instance(rng, int(rng.integers(1, 7)))
        a = evaluate_slot_model(st, lam)
        b = evaluate_transformed_model(st, lam)
        np.testing.assert_allclose(a.throughput, b.throughput, rtol=1e-9)
        np.testing.assert_allclose(a.Y, b.Y, rtol=1e-9)


def test_permutation_equivariant(rng):
    st, lam = random_instance(rng, 5)
    perm = rng.permutation(5)
    a = evaluate_transformed_model(st, lam)
    b = evaluate_transformed_model([st[i] for i in perm], lam[perm])
    np.testing.assert_allclose(b.throughput, a.throughput[perm], rtol=1e-12)
    np.testing.assert_allclose(b.airtime_share, a.airtime_share[perm], rtol=1e-12)


def test_equal_durations_reduce_to_product_form():
    durations = [300e-6, 900e-6, 1500e-6]
    st = [StationParams(i, FrameSpec(8000, 26e6), 0.0, d, d) for i, d in enumerate(durations)]
    lam = np.array([0.05, 0.1, 0.2])
    y = lam / (1 - lam)
    expected = DEFAULT_TIMING.slot_time + sum(
        y[i] * durations[i] * np.prod(1 + y[:i]) for i in range(3))
    assert evaluate_transformed_model(st, lam).Y == pytest.approx(expected, rel=1e-12)


def test_shares_sum_to_busy_fraction(rng):
    st, lam = random_instance(rng, 4)
    out = evaluate_slot_model(st, lam)
    busy = 1 - out.P_e * out.T_e / (out.P_e * out.T_e + out.P_s * out.T_s + out.P_u * out.T_u)
    # collisions are counted once per participant
    assert out.airtime_share.sum() >= busy - 1e-12


def test_total_loss_station_has_zero_throughput(mcs3_1000):
    st = stations_from_frames([mcs3_1000] * 2, channel_error_probs=[1.0, 0.0])
    out = evaluate_transformed_model(st, [0.1, 0.1])
    assert out.throughput[0] == 0.0
    assert out.throughput[1] > 0.0
    assert out.airtime_share[0] > 0.0


def test_zero_attempt_station_is_silent(mcs3_1000):
    st = stations_from_frames([mcs3_1000] * 2)
    out = evaluate_transformed_model(st, [0.0, 0.1])
    assert out.throughput[0] == 0.0 and out.airtime_share[0] == 0.0


def test_airtime_shares_helper(hetero_rate_stations):
    lam = AttemptVector.from_cw([116, 35, 20]).lam
    np.testing.assert_allclose(airtime_shares(hetero_rate_stations, lam),
                               evaluate_transformed_model(hetero_rate_stations, lam).airtime_share,
                               rtol=1e-10)


def test_lambda_cw_round_trip():
    for cw in (1, 15, 63, 1023):
        assert cw_from_lambda(lambda_from_cw(cw)) == pytest.approx(cw, rel=1e-12)


def test_transform_round_trip(rng):
    lam = rng.uniform(1e-4, 0.99, 50)
    np.testing.assert_allclose(inverse_transform_y(transform_y(lam)), lam, rtol=1e-12)
    assert isinstance(transform_y(0.5), float)


@pytest.mark.parametrize("lam", [[0.0], [1.0], [0.5, 1.2], []])
def test_attempt_vector_rejects(lam):
    with pytest.raises(ParameterError):
        AttemptVector(np.array(lam))


def test_rejects_bad_inputs(mcs3_1000):
    st = stations_from_frames([mcs3_1000] * 2)
    with pytest.raises(ParameterError):
        evaluate_transformed_model(st, [0.1])
    with pytest.raises(ParameterError):
        evaluate_slot_model([], [])
    with pytest.raises(ParameterError):
        lambda_from_cw(0.5)
    with pytest.raises(ParameterError):
        StationParams(0, mcs3_1000, 1.5, 1e-4, 1e-4)
