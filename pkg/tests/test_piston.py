import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from paylevel.piston import PIDGains, PistonState, actuate, pid_step, settle

from oracles import closed_loop_pid

DT = 0.02


def run_loop(state, gains, steps):
    lengths = []
    for _ in range(steps):
        u, state = pid_step(state, gains, DT)
        state, _, _ = actuate(state, u, DT)
        lengths.append(state.length)
    return np.array(lengths), state


def settling_time(lengths, target, start):
    band = 0.02 * abs(target - start)
    outside = np.flatnonzero(np.abs(lengths - target) > band)
    return 0.0 if outside.size == 0 else (outside[-1] + 1) * DT


def test_pid_examples():
    u, _ = pid_step(PistonState(0.1, 0.1), PIDGains(), DT)
    assert u == 0.0
    u, _ = pid_step(PistonState(0.0, 0.05), PIDGains(kp=2, ki=0, kd=0), DT)
    assert u == pytest.approx(0.1)


def test_actuate_examples():
    s = PistonState(0.1, 0.2)
    assert actuate(s, 0.0, DT)[0] == s
    out, slew, stroke = actuate(PistonState(0.124), 1.0, DT)
    assert out.length == pytest.approx(0.125)
    assert slew and not stroke
    out, _, stroke = actuate(PistonState(0.25), 0.01, DT)
    assert out.length == 0.25 and stroke


def test_step_response_matches_oracle():
    lengths, state = run_loop(PistonState(0.0, 0.125), PIDGains(), 3000)
    ref = closed_loop_pid(0.125, 8.0, 2.0, 0.1, 0.05, 0.25, DT, 3000)
    np.testing.assert_allclose(lengths, ref, atol=1e-15)
    # frozen from the oracle run: 2.48 s to the 2% band
    assert settling_time(lengths, 0.125, 0.0) == pytest.approx(2.48, abs=DT / 2)
    assert abs(state.error) < 1e-3 * 0.25


@pytest.mark.parametrize("start, target", [(0.0, 0.125), (0.2, 0.03), (0.125, 0.2499), (0.1, 0.0)])
def test_zero_steady_state_error(start, target):
    lengths, state = run_loop(PistonState(start, target), PIDGains(), 4000)
    tail = np.abs(lengths[-1000:] - target)
    assert tail.max() < 1e-3 * 0.25
    assert abs(state.integral) <= PIDGains().integral_cap(0.25)


@pytest.mark.parametrize("kp", [1.0, 4.0, 8.0, 20.0])
def test_proportional_path_is_monotone(kp):
    lengths, _ = run_loop(PistonState(0.0, 0.125), PIDGains(kp=kp, ki=0.0, kd=0.0), 2000)
    assert np.all(np.diff(lengths) >= 0)
    assert lengths.max() <= 0.125


def test_default_overshoot_is_small():
    # integral action on an integrating actuator must cross the target once
    lengths, _ = run_loop(PistonState(0.0, 0.125), PIDGains(), 3000)
    assert lengths.max() - 0.125 < 0.002 * 0.125


def test_antiwindup_recovery():
    nominal = settling_time(run_loop(PistonState(0.0, 0.125), PIDGains(), 3000)[0], 0.125, 0.0)
    state = PistonState(0.125, 0.4)
    _, state = run_loop(state, PIDGains(), int(10 / DT))
    assert state.length == 0.25
    lengths, _ = run_loop(replace(state, target=0.125), PIDGains(), 3000)
    assert settling_time(lengths, 0.125, 0.25) <= 2 * nominal


@given(st.floats(0, 1), st.floats(-1e6, 1e6, allow_nan=False), st.floats(1e-4, 1.0))
def test_stroke_invariant(frac, u, dt):
    out, _, _ = actuate(PistonState(frac * 0.25), u, dt)
    assert 0.0 <= out.length <= 0.25


@given(st.floats(-1.0, 1.0), st.floats(0, 1))
def test_integral_stays_capped(target, frac):
    state = PistonState(frac * 0.25, target)
    cap = PIDGains().integral_cap(0.25)
    for _ in range(200):
        u, state = pid_step(state, PIDGains(), DT)
        state, _, _ = actuate(state, u, DT)
        assert abs(state.integral) <= cap


def test_settle_helper_matches_loop():
    _, expected = run_loop(PistonState(0.0, 0.1), PIDGains(), 100)
    assert settle(PistonState(0.0, 0.1), PIDGains(), DT, 100) == expected


def test_concurrent_pistons_match_sequential():
    states = [PistonState(0.02 * i, 0.25 - 0.03 * i) for i in range(8)]
    seq = [settle(s, PIDGains(), DT, 50) for s in states]
    with ThreadPoolExecutor(4) as pool:
        par = list(pool.map(lambda s: settle(s, PIDGains(), DT, 50), states))
    assert seq == par


def test_validation():
    with pytest.raises(ValueError):
        PIDGains(0, 0, 0)
    with pytest.raises(ValueError):
        PIDGains(kp=-1)
    with pytest.raises(ValueError):
        PistonState(0.3)
    with pytest.raises(ValueError):
        pid_step(PistonState(), PIDGains(), 0.0)
    assert PIDGains(ki=0).integral_cap(0.25) == math.inf
