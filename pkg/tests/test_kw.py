import math
import random
from types import SimpleNamespace

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cwtune import ParameterError
from cwtune.kw import (CW_MAX, CW_MIN, LOGY_MAX, LOGY_MIN, KwConfig, KwState, Stage, ascend_update,
                       cw_to_logy, draw_perturbation, gradient_estimate, initial_state, kw_maximize,
                       logy_to_cw, probe_points, project, record_sample)


def mp_inverse_cw(y):
    mpmath.mp.dps = 50
    lam = mpmath.e ** y / (1 + mpmath.e ** y)
    return int(mpmath.ceil(2 / lam - 1))


def test_logy_endpoints():
    assert cw_to_logy(15) == pytest.approx(math.log(1 / 7), abs=1e-12)
    assert cw_to_logy(15) == pytest.approx(-1.9459, abs=1e-4)
    assert cw_to_logy(1023) == pytest.approx(-6.2364, abs=1e-4)
    assert (LOGY_MIN, LOGY_MAX) == (cw_to_logy(CW_MAX), cw_to_logy(CW_MIN))


def test_inverse_golden():
    assert mp_inverse_cw(mpmath.mpf("-4.151")) == 128
    assert logy_to_cw(-4.151) == 128


def test_round_trip_every_cw():
    for c in range(CW_MIN, CW_MAX + 1):
        assert logy_to_cw(cw_to_logy(c)) == c


def test_inverse_matches_high_precision(rng):
    for y in rng.uniform(-6.3, -1.9, 2000):
        assert logy_to_cw(float(y)) == min(max(mp_inverse_cw(mpmath.mpf(float(y))), CW_MIN), CW_MAX)


def test_inverse_clamps():
    assert logy_to_cw(10.0) == CW_MIN
    assert logy_to_cw(-50.0) == CW_MAX
    assert logy_to_cw(1e6) == CW_MIN
    with pytest.raises(ParameterError):
        logy_to_cw(math.nan)


@given(st.integers(2, 1022))
def test_forward_strictly_decreasing(c):
    assert cw_to_logy(c + 1) < cw_to_logy(c)


@given(st.floats(-20, 20), st.floats(0, 5))
def test_inverse_non_increasing(y, d):
    assert logy_to_cw(y + d) <= logy_to_cw(y)


def test_perturbation_reproducible_and_balanced():
    def draws(seed, n):
        r, s = random.Random(seed), KwState(y=-4.0)
        out = []
        for _ in range(n):
            s = draw_perturbation(s, r)
            out.append(s.epsilon)
        return out

    a = draws(7, 10_000)
    assert a == draws(7, 10_000)
    assert set(a) == {-1, 1}
    assert 0.48 <= a.count(1) / len(a) <= 0.52
    assert draws(7, 100) != draws(8, 100)


def test_perturbation_resets_stage():
    s = KwState(y=-3.0, stage=Stage.AWAIT_MINUS, g_plus=1.0)
    s = draw_perturbation(s, random.Random(0))
    assert s.stage is Stage.AWAIT_PLUS and s.g_plus is None and s.g_minus is None


def test_probe_points():
    cfg = KwConfig(delta=0.5)
    assert probe_points(KwState(y=-4.0, epsilon=1), cfg) == (-3.5, -4.5)
    assert probe_points(KwState(y=-4.0, epsilon=-1), cfg) == (-4.5, -3.5)
    assert probe_points(KwState(y=-4.0), SimpleNamespace(delta=0.0)) == (-4.0, -4.0)


def test_gradient_estimate_arithmetic():
    assert gradient_estimate(3.0, 2.0, 1, 0.25) == 2.0
    assert gradient_estimate(2.0, 2.0, -1, 0.25) == 0.0
    assert gradient_estimate(3.0, 2.0, -1, 0.25) == -2.0
    with pytest.raises(ParameterError):
        gradient_estimate(1.0, 0.0, 1, 0.0)
    with pytest.raises(ParameterError):
        gradient_estimate(1.0, 0.0, 0, 0.1)


# dyadic inputs keep the floating-point arithmetic exact
@given(st.integers(-640, 640).map(lambda k: k / 64), st.sampled_from([0.5, 0.25, 0.125, 0.0625]),
       st.sampled_from([-1, 1]))
def test_quadratic_exactness(y, delta, eps):
    plus, minus = y + eps * delta, y - eps * delta
    assert gradient_estimate(plus ** 2, minus ** 2, eps, delta) == 2 * y


def test_project():
    assert project(0.0, -6.23, -1.94) == -1.94
    assert project(-7.0, -6.23, -1.94) == -6.23
    assert project(-3.0, -6.23, -1.94) == -3.0
    with pytest.raises(ParameterError):
        project(0.0, 1.0, 0.0)


@given(st.floats(-100, 100), st.floats(-10, 0), st.floats(0, 10))
def test_project_idempotent(x, a, w):
    once = project(x, a, a + w)
    assert project(once, a, a + w) == once
    assert a <= once <= a + w


def test_ascend_update():
    cfg = KwConfig(delta=0.3, eta=0.1)
    s = KwState(y=-4.0, k=3, stage=Stage.AWAIT_MINUS)
    assert ascend_update(s, 0.0, cfg).y == -4.0
    step = ascend_update(s, 2.0, cfg)
    assert step.y == pytest.approx(-3.8, abs=1e-15)
    assert step.k == 4 and step.stage is Stage.AWAIT_PLUS
    lo, hi = cfg.decision_set
    assert ascend_update(s, 1e3, cfg).y == hi
    assert ascend_update(s, -1e3, cfg).y == lo


def test_record_sample_stages():
    s = record_sample(KwState(y=-4.0), 1.5)
    assert s.stage is Stage.AWAIT_MINUS and s.g_plus == 1.5
    s = record_sample(s, 0.5)
    assert s.g_minus == 0.5


def test_config_validation():
    assert KwConfig(delta=0.2).alpha == 0.2
    assert KwConfig(delta=0.2, alpha=0.0).decision_set == (LOGY_MIN, LOGY_MAX)
    for bad in (dict(delta=0.0), dict(eta=-1.0), dict(tau=0.0), dict(lower=0.0, upper=-1.0),
                dict(alpha=3.0), dict(phase=0.5, tau=0.2)):
        with pytest.raises(ParameterError):
            KwConfig(**bad)


@pytest.mark.parametrize("y0", [-6.23, -5.0, -3.0, -1.94])
def test_single_agent_converges(y0):
    cfg = KwConfig(delta=0.1, eta=0.1, lower=-6.23, upper=-1.94)
    ys = kw_maximize(lambda y: -(y + 4.0) ** 2, y0, cfg, random.Random(1), 200)
    assert abs(ys[-1] + 4.0) <= 2 * cfg.delta
    lo, hi = cfg.decision_set
    assert all(lo <= y <= hi for y in ys)


def test_iterates_bit_reproducible():
    cfg = KwConfig(delta=0.3, eta=0.5)

    def noisy(seed):
        noise = random.Random(seed + 100)
        f = lambda y: -(y + 3.0) ** 2 + noise.gauss(0, 0.1)
        return kw_maximize(f, -5.0, cfg, random.Random(seed), 300)

    assert noisy(3) == noisy(3)
    assert noisy(3) != noisy(4)


def test_initial_state_projected():
    cfg = KwConfig()
    assert initial_state(0.0, cfg).y == cfg.decision_set[1]
