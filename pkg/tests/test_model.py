from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from resetsg.model import (
    ResetSystem,
    SingularResolvent,
    in_flow,
    in_jump,
    load_system,
    lti_gain_at,
    r1_system,
    r2_system,
    save_system,
    validate,
)

from conftest import first_order_lag, static_gain


def test_r1_validates():
    rep = validate(r1_system())
    assert rep.ok and rep.hurwitz and rep.symmetric and rep.dims_ok


def test_r2_validates():
    assert validate(r2_system()).ok


def test_unstable_scalar_is_a_warning():
    sys = ResetSystem(A=[[1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]], R=[[0.0]], M=[[1.0]])
    rep = validate(sys)
    assert not rep.hurwitz
    assert rep.ok
    assert any("Hurwitz" in m for m in rep.messages)


def test_asymmetric_m_rejected():
    sys = ResetSystem(A=-np.eye(2), B=[[1.0], [0.0]], C=[[0.0, 1.0]], D=[[0.0]], R=np.zeros((2, 2)),
                      M=[[0.0, 1.0], [0.0, 0.0]])
    assert not validate(sys).ok


def test_dimension_mismatch_reported():
    sys = ResetSystem(A=-np.eye(2), B=[[1.0], [0.0]], C=[[0.0, 1.0, 0.0]], D=[[0.0]], R=np.zeros((2, 2)),
                      M=np.eye(2))
    rep = validate(sys)
    assert not rep.dims_ok and not rep.ok


@pytest.mark.parametrize("x, flow", [((1.0, 0.0), True), ((0.0, 1.0), False), ((1.0, 0.9), True)])
def test_flow_membership(x, flow):
    r1 = r1_system()
    assert in_flow(r1, x) is flow
    assert in_jump(r1, x) is (not flow)


def test_in_flow_dimension_error():
    with pytest.raises(ValueError):
        in_flow(r1_system(), [1.0, 2.0, 3.0])


def test_origin_is_in_flow_set():
    assert in_flow(r1_system(), [0.0, 0.0])


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0.01, 100.0), st.sampled_from([-1.0, 1.0]))
def test_flow_set_is_a_cone(x1, x2, alpha, sign):
    r1 = r1_system()
    x = np.array([x1, x2])
    assert in_flow(r1, x) == in_flow(r1, sign * alpha * x) or abs(r1.g(x)) < 1e-9
    assert in_flow(r1, x) != in_jump(r1, x)


def test_lti_gain():
    lag = first_order_lag()
    assert lti_gain_at(lag, 0.0) == pytest.approx(1.0)
    assert lti_gain_at(lag, 1.0) == pytest.approx(1 / math.sqrt(2))
    gains = [lti_gain_at(lag, w) for w in (0.1, 1.0, 10.0, 100.0)]
    assert all(a > b for a, b in zip(gains, gains[1:]))
    assert lti_gain_at(lag, math.inf) == 0.0
    assert lti_gain_at(static_gain(), 3.0) == pytest.approx(2.0)


def test_singular_resolvent():
    sys = ResetSystem(A=[[0.0, 1.0], [-1.0, 0.0]], B=[[0.0], [1.0]], C=[[1.0, 0.0]], D=[[0.0]],
                      R=np.zeros((2, 2)), M=np.eye(2))
    with pytest.raises(SingularResolvent):
        lti_gain_at(sys, 1.0)


def test_round_trip(tmp_path):
    path = tmp_path / "r1.json"
    save_system(r1_system(), path)
    back = load_system(path)
    for key in "ABCDRM":
        np.testing.assert_array_equal(getattr(back, key), getattr(r1_system(), key))
    assert back.name == "R1"


def test_load_rejects_bad_system(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"A": [[-1]], "B": [[1]], "C": [[1]], "D": [[0]], "R": [[0]], "M": [[0, 1], [0, 0]]}')
    with pytest.raises(ValueError):
        load_system(path)


def test_missing_keys():
    with pytest.raises(ValueError):
        ResetSystem.from_dict({"A": [[1.0]]})
