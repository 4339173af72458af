"""Acceptance criteria 1-10, one test each.

Every test stores a PASS/FAIL line in ``conftest.ACCEPTANCE_LINES``; the
lines are printed in the terminal summary.
"""

import math
import time

import numpy as np
from scipy.integrate import solve_ivp

from conftest import ACCEPTANCE_LINES, TIMINGS
from plapshoot import cli
from plapshoot.bounds import barrier, measure_S, size_bounds, support_upper_check
from plapshoot.ivp import (EventKind, PhaseState, ProblemParams, dissipation_integral, energy,
                           integrate)
from plapshoot.model import landmarks, rotation_constants
from plapshoot.polar import check_rotation_bound, node_counts, track_angle
from plapshoot.ptrig import conjugate, half_period, sincos_q
from plapshoot.shoot import asymptotic_limit

from test_ptrig import ode_quarter_period


def report(n, title, ok, detail):
    ACCEPTANCE_LINES[n] = f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}"
    print(ACCEPTANCE_LINES[n])
    assert ok, ACCEPTANCE_LINES[n]


def test_criterion_01_ptrig_identity():
    t0 = time.perf_counter()
    t = np.linspace(-100.0, 100.0, 10_000)
    worst = 0.0
    for p in (1.5, 2.0, 2.5, 3.0):
        q = conjugate(p)
        s, c = sincos_q(t, p)
        err = np.abs(np.abs(c) ** p / p + np.abs(s) ** q / q - 1.0 / p)
        worst = max(worst, float(err.max()))
    err_pi2 = abs(half_period(2.0) - math.pi)
    err_pi3 = abs(half_period(3.0) - 2.0 * ode_quarter_period(3.0))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and err_pi2 <= 1e-12 and err_pi3 <= 1e-8 and elapsed < 10.0
    report(1, "p-trig identity", ok,
           f"max identity error {worst:.2e}, |pi_2 - pi| {err_pi2:.1e}, "
           f"|pi_3 - ODE| {err_pi3:.1e}, {elapsed:.2f} s")


ENERGY_LAMBDAS = [1.6, 2.0, 3.0, 4.71, 6.0, 10.0, 15.13, 20.0, 31.0, 52.5]


def test_criterion_02_energy_law(ref_nl, sec_nl):
    t0 = time.perf_counter()
    worst_increase, worst_rel = -math.inf, 0.0
    runs = 0
    for nl, p in ((ref_nl, 2.0), (sec_nl, 2.5)):
        for lam in ENERGY_LAMBDAS:
            params = ProblemParams(3.0, p, lam, r_max=40.0)
            traj = integrate(params, nl)
            worst_increase = max(worst_increase, float(np.max(np.diff(traj.E))))
            r, I = dissipation_integral(traj)
            u, v = traj.dense_eval(r)
            drop = energy(PhaseState(r, u, v), nl, p)
            drop = drop[0] - drop
            scale = max(float(np.max(np.abs(I))), 1e-300)
            worst_rel = max(worst_rel, float(np.max(np.abs(drop - I))) / scale)
            runs += 1
    elapsed = time.perf_counter() - t0
    ok = runs == 20 and worst_increase <= 1e-10 and worst_rel <= 1e-4 and elapsed < 30.0
    report(2, "energy law", ok,
           f"{runs} runs, max increase {worst_increase:.1e} (event_tol 1e-10), "
           f"dissipation mismatch {worst_rel:.1e} relative, {elapsed:.1f} s")


NODE_RUNS = ([(2.0, lam) for lam in (2, 3, 6, 10, 20, 25, 40, 45, 60, 70, 80, 100)]
             + [(2.5, lam) for lam in (2, 4, 7, 10, 12, 15, 16, 17)])


def test_criterion_03_node_count_equivalence(ref_nl, sec_nl):
    mismatches, samples, counts = 0, 0, set()
    for p, lam in NODE_RUNS:
        nl = ref_nl if p == 2.0 else sec_nl
        traj = integrate(ProblemParams(3.0, p, float(lam), r_max=60.0), nl)
        trace = track_angle(traj, nl)
        from_angle = node_counts(trace)
        from_events = np.searchsorted(traj.zero_radii, trace.r, side="right")
        mismatches += int(np.sum(from_angle != from_events))
        samples += len(trace.r)
        counts.add(int(len(traj.zero_radii)))
    ok = mismatches == 0 and len(NODE_RUNS) == 20 and counts == set(range(6))
    report(3, "node-count equivalence", ok,
           f"{len(NODE_RUNS)} runs, node counts {sorted(counts)}, "
           f"{mismatches} mismatches over {samples} samples")


def test_criterion_04_rotation_certificate(ref_nl):
    t0 = time.perf_counter()
    cert = rotation_constants(ref_nl, omega=1 / 16)
    violations, certified, empty = 0, 0, 0
    for lam in (1e5, 2e5, 3e5, 5e5, 1e6):
        traj = integrate(ProblemParams(3.0, 2.0, lam, r_max=cert.r0 + 10.0), ref_nl,
                         detect_double_zero=False, stop_on_trapped=False)
        trace = track_angle(traj, ref_nl)
        region = (trace.r >= cert.r0) & (trace.rho >= cert.sigma0 ** 2)
        certified += int(region.sum())
        empty += int(region.sum() == 0)
        violations += len(check_rotation_bound(trace, cert))
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and empty == 0 and elapsed < 60.0
    report(4, "rotation certificate", ok,
           f"r0={cert.r0:g}, sigma0={cert.sigma0:.4g}, 5 runs, {certified} certified samples, "
           f"{violations} violations, {elapsed:.1f} s")


def test_criterion_05_node_solutions(node_solutions):
    lams = [s.lambda_k for s in node_solutions]
    increasing = all(a < b for a, b in zip(lams, lams[1:]))
    nodes_ok = all(len(s.trajectory.zero_radii) == s.k and not s.near_support for s in node_solutions)
    at_support = [s.trajectory.events_of(EventKind.DOUBLE_ZERO)[-1] for s in node_solutions]
    on_support = all(e.r == s.r_support for e, s in zip(at_support, node_solutions))
    approach = max(abs(e.state.u) + abs(e.state.v) for e in at_support)  # p = 2: u' = v
    e_end = max(e.E for e in at_support)
    nonneg = float(np.min(node_solutions[0].trajectory.u))
    elapsed = TIMINGS.get("node_solutions", math.nan)
    ok = (increasing and nodes_ok and on_support and approach <= 1e-7 and e_end <= 1e-9
          and nonneg >= 0.0 and elapsed < 300.0)
    report(5, "node solutions", ok,
           "lambda_k = " + ", ".join(f"{x:.10g}" for x in lams)
           + f"; max |u|+|u'| {approach:.1e}, max E {e_end:.1e}, min u (k=0) {nonneg:.1e}, "
           f"{elapsed:.1f} s")


def test_criterion_06_compact_support(node_solutions, ref_nl):
    prof = barrier(ref_nl)
    reports = [support_upper_check(s, ref_nl, profile=prof) for s in node_solutions]
    margins = [r["margin"] for r in reports]
    ok = (all(r["passed"] and r["margin"] > 0 for r in reports)
          and prof.refinement_change < 1e-9)
    report(6, "compact-support principle", ok,
           f"A={prof.A_time:.12g}, B={prof.B_time:.12g}, refinement change "
           f"{prof.refinement_change:.1e}, margins " + ", ".join(f"{m:.3f}" for m in margins))


def test_criterion_07_size_bounds(ref_nl, node_solutions):
    bad = 0
    parts = []
    for lam in (10.0, 30.0, 100.0):
        sb = size_bounds(lam, 0.904, ref_nl)
        traj = integrate(ProblemParams(3.0, 2.0, lam, r_max=20.0), ref_nl)
        S = measure_S(traj, 0.904)
        bad += int(not sb.S_lo <= S <= sb.S_hi)
        parts.append(f"S({lam:g})={S:.4f} in [{sb.S_lo:.4f}, {sb.S_hi:.4f}]")
    for sol in node_solutions:
        lo = size_bounds(sol.lambda_k, 0.904, ref_nl).r_support_lo
        bad += int(not (math.isfinite(lo) and sol.r_support >= lo))
    parts.append("r_support >= bound for k=0..3")
    report(7, "size bounds", bad == 0, "; ".join(parts) + f"; {bad} violations")


def test_criterion_08_asymptotic_limits(ref_nl):
    lm = landmarks(ref_nl)
    rows = []
    ok = True
    for lam, k, target in ((3.0, 0, lm.a_plus), (10.0, 1, lm.b_minus)):
        traj = integrate(ProblemParams(3.0, 2.0, lam, r_max=1e3), ref_nl, stop_on_trapped=False)
        out = asymptotic_limit(traj, ref_nl, lm)
        du = abs(out["u_tail"] - target)
        dE = abs(out["E_tail"] - ref_nl.F_scalar(target))
        trapped = float(np.min(traj.E)) < 0
        ok &= (len(traj.zero_radii) == k and trapped and du <= 1e-3 and dE <= 1e-3
               and out["ell"] == target)
        rows.append(f"lambda={lam:g}: {k} nodes, |u_tail-{target:g}|={du:.1e}, |E_tail-F|={dE:.1e}")
    report(8, "asymptotic limits", ok, "; ".join(rows))


def test_criterion_09_oracle_cross_check(ref_nl):
    lam, r0, N = 10.0, 1e-4, 3.0
    params = ProblemParams(N, 2.0, lam, r_max=20.0)
    traj = integrate(params, ref_nl, stop_on_trapped=False)
    f0 = ref_nl.f_scalar(lam)
    fp = 3 * lam ** 2 - 0.5 * lam ** -0.5
    # series start: u = lam - f r^2/(2N) + f f' r^4/(8N(N+2))
    u0 = lam - f0 * r0 ** 2 / (2 * N) + f0 * fp * r0 ** 4 / (8 * N * (N + 2))
    v0 = -f0 * r0 / N + f0 * fp * r0 ** 3 / (2 * N * (N + 2))

    def rhs(r, y):
        return [y[1], -(N - 1) * y[1] / r - ref_nl.f_scalar(y[0])]

    grid = np.linspace(r0, 20.0, 4001)
    sol = solve_ivp(rhs, (r0, 20.0), [u0, v0], method="Radau", t_eval=grid,
                    rtol=params.rel_tol / 10, atol=params.abs_tol / 10)
    dev = float(np.max(np.abs(traj.dense_eval(grid)[0] - sol.y[0])))
    ok = sol.success and dev <= 1e-6
    report(9, "oracle cross-check (p=2, Radau)", ok,
           f"max |u - u_ref| on [0, 20] = {dev:.1e}")


def test_criterion_10_determinism(tmp_path):
    dirs = [tmp_path / "run1", tmp_path / "run2"]
    codes = [cli.main(["find-nodes", "--k", "1", "--out", str(d)]) for d in dirs]
    names = [sorted(x.name for x in d.iterdir() if x.name != "manifest.json") for d in dirs]
    same = names[0] == names[1] and all(
        (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names[0])
    ok = codes == [0, 0] and same and len(names[0]) >= 3
    report(10, "determinism", ok,
           f"exit codes {codes}, {len(names[0])} artifacts byte-identical: {same} "
           "(manifest.json carries wall time and is excluded)")
