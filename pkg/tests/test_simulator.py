from __future__ import annotations

import math

import numpy as np
import pytest

from resetsg import _kernel_py
from resetsg.model import ResetSystem, r1_system
from resetsg.simulator import (
    BatterySpec,
    InputSpec,
    SimOptions,
    TailNotSettled,
    ZenoDetected,
    battery,
    battery_inputs,
    load_samples,
    run_battery,
    save_samples,
    sg_sample,
    simulate,
    simulate_sample,
)

from conftest import first_order_lag, static_gain, zeno_system

# exp(-t): sigmoid factor equal to one to double precision, decay rate 1
EXP_DECAY = InputSpec("sigmoid", "absolute", mu=1.0, a=0.0, nu=-60.0)


def r1_multisine(seed=0):
    return battery_inputs(1, BatterySpec(multisine=1, sigmoid_a=0, sigmoid_nu=0), seed)[0]


def test_lti_closed_form():
    tr = simulate(first_order_lag(), EXP_DECAY, SimOptions(record=True))
    assert tr.jumps == 0
    assert np.max(np.abs(tr.y[:, 0] - tr.t * np.exp(-tr.t))) <= 1e-6
    assert tr.u2 == pytest.approx(0.5, abs=1e-8)
    assert tr.y2 == pytest.approx(0.25, abs=1e-8)
    assert tr.uy == pytest.approx(0.25, abs=1e-8)
    s = sg_sample(tr)
    assert s.rho == pytest.approx(1 / math.sqrt(2), abs=1e-8)
    assert s.theta == pytest.approx(math.pi / 4, abs=1e-8)


def test_memoryless_samples():
    s = simulate_sample(static_gain(2.0), EXP_DECAY)
    assert s.rho == pytest.approx(2.0, abs=1e-8) and s.theta == pytest.approx(0.0, abs=1e-6)
    s = simulate_sample(static_gain(-1.0), EXP_DECAY)
    assert s.rho == pytest.approx(1.0, abs=1e-8) and s.theta == pytest.approx(math.pi, abs=1e-6)


def test_zero_input_stays_at_rest():
    zero = InputSpec("sigmoid", "absolute", a=1.0, nu=0.1, direction=(0.0,))
    tr = simulate(r1_system(), zero, SimOptions(record=True))
    assert tr.jumps == 0
    assert np.all(tr.x == 0.0)
    with pytest.raises(ValueError):
        sg_sample(tr)


def test_r1_jumps_are_accurate():
    r1 = r1_system()
    tr = simulate(r1, r1_multisine(), SimOptions(record=True))
    assert tr.jumps > 0
    for xp, xq in zip(tr.jump_states, tr.post_states):
        assert abs(xp @ r1.M @ xp) <= 1e-8 * (1 + xp @ xp)
        np.testing.assert_array_equal(xq, r1.R @ xp)
        np.testing.assert_array_equal(xq, [0.0, 0.0])


def test_timer_resets_at_jumps():
    inp = InputSpec("sigmoid", "timer_reset", mu=0.001, a=2.0, nu=1.0)
    tr = simulate(r1_system(), inp, SimOptions(record=True))
    assert tr.jumps > 0
    for tj in tr.jump_times[:20]:
        k = np.flatnonzero(tr.t == tj)
        assert np.any(tr.tau[k] == 0.0)


def test_zeno_guard():
    with pytest.raises(ZenoDetected):
        simulate(zeno_system(), r1_multisine())


def test_tail_not_settled():
    sluggish = ResetSystem(A=[[-1e-3]], B=[[1.0]], C=[[1.0]], D=[[0.0]], R=[[1.0]], M=[[1.0]])
    with pytest.raises(TailNotSettled):
        simulate_sample(sluggish, EXP_DECAY, SimOptions(t_max=100.0))


def test_sigmoid_initial_value():
    args = (0.0, 0.0, math.inf, _kernel_py.SIGMOID, _kernel_py.TIMER_RESET, 0.0, 0.001, 1.0, 0.1,
            np.zeros((1, 0)), np.zeros((1, 0)), np.zeros((1, 0)), np.ones(1))
    assert _kernel_py.input_value(*args)[0] == pytest.approx(1 / (1 + math.exp(0.1)), abs=1e-12)
    assert _kernel_py.input_value(*args)[0] == pytest.approx(0.4750, abs=1e-4)


def test_lti_sinusoid_approaches_frequency_response():
    w = 1.0
    inp = InputSpec("multisine", amplitudes=[[1.0]], frequencies=[[w]], phases=[[0.0]], eps=1e-9,
                    horizon=50 * 2 * math.pi / w)
    s = simulate_sample(first_order_lag(), inp)
    G = 1 / (1j * w + 1)
    assert min(abs(s.z - G), abs(s.z - G.conjugate())) <= 0.05


def test_cauchy_schwarz_and_angle_identity(r1_battery):
    _, res = r1_battery
    for s in res.samples:
        assert abs(s.inner) <= s.u_norm * s.y_norm * (1 + 1e-9)
        assert math.cos(s.theta) * s.rho * s.u_norm ** 2 == pytest.approx(s.inner, rel=1e-6, abs=1e-12)
        assert 0.0 <= s.theta <= math.pi


def test_refinement_changes_little():
    r1 = r1_system()
    inputs = battery_inputs(1, BatterySpec(multisine=3, sigmoid_a=2, sigmoid_nu=1), seed=5)
    fine = SimOptions().refined()
    for inp in inputs:
        a = simulate_sample(r1, inp)
        b = simulate_sample(r1, inp, fine)
        assert abs(a.rho - b.rho) <= 1e-5
        assert abs(a.theta - b.theta) <= 1e-5


def test_battery_deterministic():
    spec = BatterySpec(multisine=3, sigmoid_a=2, sigmoid_nu=2)
    assert battery_inputs(1, spec, 7) == battery_inputs(1, spec, 7)
    assert battery_inputs(1, spec, 7) != battery_inputs(1, spec, 8)
    a = battery(r1_system(), spec, 7)
    b = battery(r1_system(), spec, 7)
    assert [s.z for s in a] == [s.z for s in b]


def test_battery_composition():
    spec = BatterySpec(multisine=4, sigmoid_a=3, sigmoid_nu=2)
    inputs = battery_inputs(2, spec, 0)
    assert [i.kind for i in inputs] == ["multisine"] * 4 + ["sigmoid"] * 6
    for inp in inputs[:4]:
        amp = np.array(inp.amplitudes)
        assert amp.shape[0] == 2 and 1 <= amp.shape[1] <= 5
        assert np.linalg.norm(amp) == pytest.approx(1.0)
        assert np.all((np.array(inp.frequencies) >= 1e-2) & (np.array(inp.frequencies) <= 1e2))
    a = sorted({i.a for i in inputs[4:]})
    assert a[0] == pytest.approx(0.05) and a[-1] == pytest.approx(10.0)
    assert all(i.clock == "timer_reset" and i.mu == 0.001 for i in inputs[4:])


def test_battery_fails_only_when_all_fail():
    inputs = battery_inputs(1, BatterySpec(multisine=2, sigmoid_a=0, sigmoid_nu=0), 0)
    with pytest.raises(ZenoDetected):
        run_battery(zeno_system(), inputs)
    mixed = run_battery(r1_system(), inputs + [InputSpec("sigmoid", direction=(0.0,))])
    assert len(mixed.samples) == 2 and len(mixed.failures) == 1


def test_sigmoid_battery_reaches_gain_point(r1_battery):
    _, res = r1_battery
    sig = [s for s in res.samples if s.spec.kind == "sigmoid"]
    assert len(sig) >= 100
    assert min(abs(s.z - 0.81) for s in sig) <= 0.1
    # slow but not vanishing decay rates hug the positive real axis; see README on the full grid
    band = [s.theta for s in sig if 0.1 <= s.spec.a <= 0.6]
    assert np.median(band) < 0.2


def test_multisine_samples_positive(r1_battery):
    _, res = r1_battery
    ms = [s for s in res.samples if s.spec.kind == "multisine"]
    assert len(ms) >= 100 and all(s.rho > 0 for s in ms)


def test_samples_csv_round_trip(tmp_path, r1_battery):
    _, res = r1_battery
    save_samples(res.samples[:10], tmp_path / "s.csv", {"config_hash": "abc"})
    back = load_samples(tmp_path / "s.csv")
    assert [s.z for s in back] == [s.z for s in res.samples[:10]]
    assert [s.spec for s in back] == [s.spec for s in res.samples[:10]]
    assert (tmp_path / "s.csv").read_text().startswith("# config_hash: abc\n")


def test_trajectory_dump(tmp_path):
    tr = simulate(first_order_lag(), EXP_DECAY, SimOptions(record=True))
    tr.dump_csv(tmp_path / "t.csv")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "t,tau,x0,u0,y0" and len(rows) == len(tr.t) + 1


def test_input_spec_validation():
    with pytest.raises(ValueError):
        InputSpec("square")
    with pytest.raises(ValueError):
        InputSpec("multisine")
    with pytest.raises(ValueError):
        simulate(r1_system(), InputSpec("sigmoid", direction=(1.0, 0.0)))
