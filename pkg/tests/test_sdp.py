from __future__ import annotations

import numpy as np
import pytest

from resetsg import lmi, sdp
from resetsg.model import r1_system
from resetsg.partition import common_quadratic_partition, trivial_partition


def lmax(prob, x):
    """Independent witness check: largest eigenvalue over the raw blocks."""
    return max(float(np.linalg.eigvalsh(b.const + sum(x[k] * c for k, c in zip(b.idx, b.coef)))[-1])
               for b in prob.blocks)


def unit_min_offdiag(scale=1.0):
    # [[-x, 1], [1, -x]] <= 0  iff  x >= 1
    p = sdp.SdpProblem(1, objective=("min", 0))
    p.add_block(scale * np.array([[0.0, 1.0], [1.0, 0.0]]), {0: -scale * np.eye(2)})
    return p


def unit_empty():
    p = sdp.SdpProblem(0)
    p.add_block(-np.eye(2))
    return p


def unit_sign(scale=1.0):
    # x I <= 0 with x >= 0 leaves x = 0
    p = sdp.SdpProblem(1, nonneg_idx=[0], objective=("min", 0))
    p.add_block(np.zeros((2, 2)), {0: scale * np.eye(2)}, drop_zero=False)
    return p


def scalar_blocks(*rows):
    """``a + b x <= 0`` for each ``(a, b)``."""
    p = sdp.SdpProblem(1)
    for a, b in rows:
        p.add_block(np.array([[a]]), {0: np.array([[b]])})
    return p


def test_unit_offdiag():
    p = unit_min_offdiag()
    sol = sdp.solve(p)
    assert sol.ok
    assert sol.objective == pytest.approx(1.0, abs=1e-6)
    assert lmax(p, sol.x) <= 1e-8


def test_unit_empty():
    sol = sdp.solve(unit_empty())
    assert sol.ok and sol.x.shape == (0,)


def test_unit_sign():
    p = unit_sign()
    sol = sdp.solve(p)
    assert sol.ok
    assert abs(sol.objective) <= 1e-6
    assert lmax(p, sol.x) <= 1e-8


def test_unbounded_without_sign_constraint():
    p = sdp.SdpProblem(1, objective=("min", 0))
    p.add_block(np.zeros((2, 2)), {0: np.eye(2)}, drop_zero=False)
    assert sdp.solve(p).status == sdp.UNBOUNDED


def test_feasible_witness():
    ok, x, sol = sdp.feasible(scalar_blocks((-2.0, 1.0)))
    assert ok and x[0] <= 2.0 + 1e-8


def test_infeasible_pair():
    ok, x, sol = sdp.feasible(scalar_blocks((-2.0, 1.0), (3.0, -1.0)))
    assert not ok and x is None
    assert sol.status == sdp.INFEASIBLE


def test_interval_is_feasible():
    # 2 <= x <= 3
    ok, x, _ = sdp.feasible(scalar_blocks((-3.0, 1.0), (2.0, -1.0)))
    assert ok and 2.0 - 1e-8 <= x[0] <= 3.0 + 1e-8


@pytest.mark.parametrize("factor", [1.0, 10.0, 0.1])
def test_status_scale_invariant(factor):
    assert sdp.feasible(scalar_blocks((-2.0 * factor, factor)))[0]
    assert not sdp.feasible(scalar_blocks((-2.0 * factor, factor), (3.0 * factor, -factor)))[0]
    assert sdp.solve(unit_min_offdiag(factor)).objective == pytest.approx(1.0, abs=1e-6)
    assert abs(sdp.solve(unit_sign(factor)).objective) <= 1e-6


def test_r1_flow_lmi_feasible_at_large_radius():
    r1 = r1_system()
    prob = lmi.assemble(r1, trivial_partition(2), lmi.BoundTask(-1, 0.0))
    rho = prob.meta["layout"].rho
    fixed = prob.fix(rho, 100.0)
    fixed.objective = None
    ok, x, _ = sdp.feasible(fixed)
    assert ok
    r, _ = lmi.bound_radius(r1, common_quadratic_partition(r1.M), -1, 0.0)
    assert r <= 10.0


def test_bisection_bracket():
    p = unit_min_offdiag()
    sol = sdp.bisect(p)
    assert sol.ok
    lo, hi = sol.bracket
    assert hi - lo <= 1e-6
    assert lo <= 1.0 + 1e-8 and hi >= 1.0 - 1e-8
    assert sdp.feasible(p.fix(0, hi))[0]
    assert not sdp.feasible(p.fix(0, lo - 1e-4))[0]


def test_bisection_max_sense():
    # maximise x subject to x <= 2.5
    p = scalar_blocks((-2.5, 1.0))
    p.objective = ("max", 0)
    sol = sdp.bisect(p, lo=0.0)
    assert sol.ok and sol.objective == pytest.approx(2.5, abs=1e-6)
    assert sol.bracket[1] - sol.bracket[0] <= 1e-6


def test_solution_passes_eigenvalue_check_for_r1_bound():
    r1 = r1_system()
    prob = lmi.assemble(r1, common_quadratic_partition(r1.M), lmi.BoundTask(-1, 0.5))
    sol = sdp.solve(prob)
    assert sol.ok
    assert prob.max_violation(sol.x) <= 1e-8
    assert np.all(sol.x[prob.nonneg_idx] >= -1e-8)


def test_fix_freezes_variable():
    p = unit_min_offdiag()
    f = p.fix(0, 1.5)
    assert f.max_violation(np.zeros(1), normalized=False) == pytest.approx(p.max_violation(np.array([1.5]), normalized=False))


def test_json_round_trip(tmp_path):
    r1 = r1_system()
    prob = lmi.assemble(r1, common_quadratic_partition(r1.M), lmi.BoundTask(1, 0.25))
    sdp.save_problem(prob, tmp_path / "p.json")
    back = sdp.load_problem(tmp_path / "p.json")
    assert back.m == prob.m and back.objective == prob.objective and back.nonneg_idx == prob.nonneg_idx
    x = np.random.default_rng(0).standard_normal(prob.m)
    assert back.max_violation(x) == pytest.approx(prob.max_violation(x))
    assert sdp.solve(back).objective == pytest.approx(sdp.solve(prob).objective, abs=1e-7)


def test_check_rejects_asymmetric():
    p = sdp.SdpProblem(1)
    p.add_block(np.array([[0.0, 1.0], [0.0, 0.0]]), {0: np.eye(2)})
    with pytest.raises(ValueError):
        p.check()


def test_check_rejects_bad_index():
    p = sdp.SdpProblem(1)
    p.blocks.append(sdp.Block(np.zeros((1, 1)), np.array([3]), np.ones((1, 1, 1))))
    with pytest.raises(ValueError):
        p.check()


def test_deterministic():
    r1 = r1_system()
    prob = lmi.assemble(r1, common_quadratic_partition(r1.M), lmi.BoundTask(-1, 1.0))
    a, b = sdp.solve(prob), sdp.solve(prob)
    np.testing.assert_array_equal(a.x, b.x)


def test_external_solver_agrees():
    pytest.importorskip("cvxpy")
    r1 = r1_system()
    prob = lmi.assemble(r1, common_quadratic_partition(r1.M), lmi.BoundTask(-1, 0.5))
    ext = sdp.solve_external(prob)
    own = sdp.solve(prob)
    assert ext.ok and own.ok
    assert own.objective == pytest.approx(ext.objective, abs=1e-5)
