import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plapshoot.errors import ContractError, SearchError
from plapshoot.ivp import EventKind, ProblemParams, StopReason, integrate
from plapshoot.shoot import (NodeSolution, ShootKind, approach_distance, asymptotic_limit,
                             classify, extend_compact_support, find_lambda_k, sweep)

# frozen from the bisection itself (lambda_tol = 1e-10 lambda); the bracket
# tests below tie them to independent zero counts
LAMBDA_K = [4.710796562762129, 15.132444798190672, 31.092503708017368, 52.54403422166136]


@pytest.fixture(scope="module")
def params():
    return ProblemParams(3.0, 2.0, 1.0, r_max=None)


def test_classify_below_threshold(params, ref_nl):
    c = classify(1.2, params, ref_nl)
    assert c.kind == ShootKind.UNDETERMINED and c.k == 0
    assert "below A" in c.note


@pytest.mark.parametrize("lam, k", [(2.0, 0), (4.0, 0), (6.0, 1), (10.0, 1), (20.0, 2)])
def test_classify_staircase_points(lam, k, params, ref_nl):
    c = classify(lam, params, ref_nl)
    assert c.kind == ShootKind.TRAPPED and c.k == k
    assert c.r_energy_zero is not None and c.r_support is None
    assert c.trajectory.E[-1] < 0


def test_openness_proxy(params, ref_nl):
    # shots near a trapped shot stay trapped with the same k
    for lam in (3.0, 12.0, 25.0):
        base = classify(lam, params, ref_nl)
        for d in (-1e-3, 1e-3):
            c = classify(lam + d, params, ref_nl)
            assert (c.kind, c.k) == (base.kind, base.k)


def test_sweep(params, ref_nl):
    out = sweep([2.0, 4.0, 6.0, 10.0, 20.0], params, ref_nl)
    assert [r["k"] for r in out["rows"]] == [0, 0, 1, 1, 2]
    assert out["flagged"] == []
    coarse = sweep([2.0, 40.0], params, ref_nl, refine_rounds=3)
    ks = [r["k"] for r in coarse["rows"]]
    assert ks == sorted(ks) and len(ks) > 2
    with pytest.raises(ValueError):
        sweep([3.0, 2.0], params, ref_nl)


@settings(max_examples=12, deadline=None)
@given(lam=st.floats(1.5, 55.0))
def test_count_matches_lambda_k_staircase(lam, params, ref_nl):
    c = classify(lam, params, ref_nl)
    if any(abs(lam - x) < 1e-6 * x for x in LAMBDA_K):
        return
    assert c.k == sum(x < lam for x in LAMBDA_K)


def test_node_solutions(node_solutions, ref_nl):
    lams = [s.lambda_k for s in node_solutions]
    assert lams == sorted(lams)
    np.testing.assert_allclose(lams, LAMBDA_K, rtol=1e-8)
    for k, sol in enumerate(node_solutions):
        traj = sol.trajectory
        assert sol.k == k and not sol.near_support
        assert traj.stop_reason == StopReason.DOUBLE_ZERO
        assert len(traj.zero_radii) == k
        assert sol.approach <= 1e-7
        assert traj.E[-1] <= 1e-9
        assert sol.bracket[0] <= sol.lambda_k <= sol.bracket[1]
    assert np.all(node_solutions[0].trajectory.u >= -1e-7)


def test_bracket_counts(node_solutions, params, ref_nl):
    for sol in node_solutions[:2]:
        lo, hi = sol.bracket
        assert hi - lo <= 1e-10 * lo * 1.0001
        lo_c = classify(lo, params, ref_nl, detect_double_zero=False)
        hi_c = classify(hi, params, ref_nl, detect_double_zero=False)
        assert lo_c.k == sol.k and hi_c.k == sol.k + 1


def test_bisection_convergence(params, ref_nl):
    coarse = find_lambda_k(0, params, ref_nl, lambda_tol=1e-7)
    fine = find_lambda_k(0, params, ref_nl, lambda_tol=1e-9)
    assert fine.midpoint_approach < coarse.midpoint_approach
    assert abs(fine.lambda_k - LAMBDA_K[0]) <= 1e-8


def test_find_errors(params, ref_nl):
    with pytest.raises(ValueError):
        find_lambda_k(-1, params, ref_nl)
    with pytest.raises(SearchError):
        find_lambda_k(3, params, ref_nl, lambda_cap=10.0)


def test_extend_compact_support(node_solutions):
    sol = node_solutions[1]
    ext = extend_compact_support(sol)
    t = ext.trajectory
    r_s = sol.trajectory.r_end
    assert ext.extended and t.r_end == max(2 * r_s, sol.trajectory.params.r_max)
    tail = t.r > sol.trajectory.r_end
    assert np.all(t.u[tail] == 0) and np.all(t.E[tail] == 0)
    assert t.dense_eval(0.5 * (sol.trajectory.r_end + t.r_end)).u == 0.0
    assert extend_compact_support(ext) is ext
    assert any("not unique" in n for n in t.notes)


def test_extend_requires_double_zero(ref_nl):
    traj = integrate(ProblemParams(3.0, 2.0, 10.0, r_max=20.0), ref_nl)
    sol = NodeSolution(k=1, lambda_k=10.0, bracket=(10.0, 10.0), r_support=None, trajectory=traj)
    with pytest.raises(ContractError):
        extend_compact_support(sol)


def test_approach_distance(node_solutions, ref_nl):
    traj = integrate(ProblemParams(3.0, 2.0, 10.0, r_max=20.0), ref_nl)
    assert approach_distance(traj) > 1e-3
    dz = node_solutions[0].trajectory.events_of(EventKind.DOUBLE_ZERO)
    assert dz and approach_distance(node_solutions[0].trajectory) <= 1e-7


def test_asymptotic_limit(ref_nl, node_solutions):
    traj = integrate(ProblemParams(3.0, 2.0, 3.0, r_max=300.0), ref_nl, stop_on_trapped=False)
    out = asymptotic_limit(traj, ref_nl)
    assert out["ell"] == 1.0
    assert out["u_residual"] < 1e-3
    out = asymptotic_limit(node_solutions[0].trajectory, ref_nl)
    assert out["ell"] is None and "compact support" in out["note"]
