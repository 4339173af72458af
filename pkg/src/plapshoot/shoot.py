"""Shot classification, sweeps and the search for k-node compactly supported solutions.

A shot ``lam >= A`` falls into one of two kinds:

* ``Trapped``: the orbit never reaches the origin of the phase plane; the
  energy turns negative after exactly ``k`` sign changes and stays trapped;
* ``CompactSupport``: the orbit hits a double zero ``u = u' = 0`` with ``k``
  sign changes before it, and can be continued by ``u = 0``.

The supremum of the trapped shots with ``k`` zeros is a compact-support shot.
It is found by bisection on the zero count between a trapped shot with ``k``
zeros and one with ``k + 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import default_r_max
from .errors import ContractError, SearchError
from .ivp import (EventKind, ProblemParams, StopReason, Trajectory, _Segment,
                  _zero_fn, integrate)
from .model import Landmarks, Nonlinearity, landmarks

__all__ = [
    "ShootKind",
    "ShootClass",
    "NodeSolution",
    "classify",
    "sweep",
    "find_lambda_k",
    "extend_compact_support",
    "asymptotic_limit",
    "approach_distance",
]


class ShootKind(str, enum.Enum):
    TRAPPED = "Trapped"
    SUPPORTED = "CompactSupport"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class ShootClass:
    lam: float
    kind: ShootKind
    k: int
    r_energy_zero: float | None
    r_support: float | None
    trajectory: Trajectory = field(repr=False)
    approach: float = math.inf
    note: str = ""
    non_unique_risk: bool = False

    def as_row(self) -> dict:
        return {"lambda": self.lam, "kind": self.kind.value, "k": self.k,
                "r_energy_zero": self.r_energy_zero, "r_support": self.r_support}


@dataclass(frozen=True)
class NodeSolution:
    k: int
    lambda_k: float
    bracket: tuple
    r_support: float | None
    trajectory: Trajectory = field(repr=False)
    near_support: bool = False
    approach: float = math.inf
    midpoint_approach: float = math.inf
    extended: bool = False
    notes: tuple = ()

    def as_record(self) -> dict:
        return {"k": self.k, "lambda_k": self.lambda_k, "bracket": list(self.bracket),
                "r_support": self.r_support, "near_support": self.near_support,
                "approach": self.approach, "midpoint_approach": self.midpoint_approach,
                "extended": self.extended, "notes": list(self.notes)}


def approach_distance(traj: Trajectory) -> float:
    """Smallest ``|u| + |u'|`` over zeros, critical points and double zeros."""
    q = traj.params.q
    vals = [abs(e.state.u) + abs(e.state.v) ** (q - 1.0) for e in traj.events
            if e.kind != EventKind.ENERGY_ZERO_CROSSING]
    return min(vals) if vals else math.inf


def _resolve(params: ProblemParams, lam: float, nl: Nonlinearity, lm: Landmarks) -> ProblemParams:
    pr = params.with_lambda(lam)
    if pr.r_max is None:
        pr = replace(pr, r_max=default_r_max(lam, nl, lm=lm))
    return pr


def _interior_F_maxima(lm: Landmarks, nl: Nonlinearity) -> list:
    out = []
    for z in lm.zeros:
        if z == 0.0:
            continue
        dz = 1e-6 * max(1.0, abs(z))
        if nl.f_scalar(z - dz) > 0 > nl.f_scalar(z + dz):
            out.append(z)
    return out


def classify(lam: float, params: ProblemParams, nl: Nonlinearity, *,
             detect_double_zero: bool = True, lm: Landmarks | None = None) -> ShootClass:
    """Integrate one shot and sort it into ``Trapped``, ``CompactSupport`` or ``Undetermined``.

    Shots below ``A`` are integrated but reported ``Undetermined``: their
    energy starts negative, so they are node-free and outside the shooting
    range.  Runs that reach ``r_max`` are ``Undetermined`` as well.
    """
    lm = landmarks(nl) if lm is None else lm
    pr = _resolve(params, lam, nl, lm)
    traj = integrate(pr, nl, detect_double_zero=detect_double_zero)
    k = int(len(traj.zero_radii))
    r_e0 = traj.first_energy_zero()
    approach = approach_distance(traj)
    risk = False
    for x0 in _interior_F_maxima(lm, nl):
        if any(e.kind == EventKind.CRITICAL_POINT and abs(e.state.u - x0) <= pr.double_zero_tol
               for e in traj.events):
            risk = True
    common = dict(lam=float(lam), k=k, trajectory=traj, approach=approach, non_unique_risk=risk)
    if lam < lm.A:
        return ShootClass(kind=ShootKind.UNDETERMINED, r_energy_zero=r_e0, r_support=None,
                          note="lambda below A: energy starts negative, no nodes", **common)
    if traj.stop_reason == StopReason.ENERGY_TRAPPED:
        return ShootClass(kind=ShootKind.TRAPPED, r_energy_zero=r_e0, r_support=None, **common)
    if traj.stop_reason == StopReason.DOUBLE_ZERO:
        r_dz = traj.events_of(EventKind.DOUBLE_ZERO)[-1].r
        return ShootClass(kind=ShootKind.SUPPORTED, r_energy_zero=r_dz if r_e0 is None else r_e0,
                          r_support=r_dz, **common)
    note = ("reached r_max before the energy turned negative"
            if traj.stop_reason == StopReason.REACHED_RMAX else "solution exceeded the a priori bound")
    return ShootClass(kind=ShootKind.UNDETERMINED, r_energy_zero=r_e0, r_support=None,
                      note=note, **common)


def sweep(lambda_grid, params: ProblemParams, nl: Nonlinearity, *, refine_rounds: int = 0,
          lm: Landmarks | None = None) -> dict:
    """Classify every grid point; flag neighbours whose counts differ by 2 or more.

    With ``refine_rounds > 0`` midpoints are inserted into flagged intervals
    and the sweep repeats.  Returns ``{"rows": [...], "flagged": [...]}``.
    """
    grid = [float(x) for x in lambda_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be strictly increasing")
    lm = landmarks(nl) if lm is None else lm
    results = {lam: classify(lam, params, nl, lm=lm) for lam in grid}
    for _ in range(refine_rounds + 1):
        lams = sorted(results)
        flagged = [(a, b) for a, b in zip(lams, lams[1:])
                   if abs(results[b].k - results[a].k) >= 2]
        if not flagged or _ == refine_rounds:
            break
        for a, b in flagged:
            mid = 0.5 * (a + b)
            if a < mid < b:
                results[mid] = classify(mid, params, nl, lm=lm)
    lams = sorted(results)
    rows = [results[x].as_row() for x in lams]
    flagged = [(a, b) for a, b in zip(lams, lams[1:]) if abs(results[b].k - results[a].k) >= 2]
    return {"rows": rows, "flagged": flagged, "classes": [results[x] for x in lams]}


def _count(lam, params, nl, lm):
    """Zero count of a shot integrated without double-zero detection."""
    c = classify(lam, params, nl, detect_double_zero=False, lm=lm)
    if c.kind == ShootKind.UNDETERMINED and lam >= lm.A:
        raise SearchError(f"shot lambda={lam!r} could not be classified: {c.note}")
    if c.non_unique_risk:
        raise SearchError(f"shot lambda={lam!r} passes a local maximum of F with zero slope")
    return c.k


def find_lambda_k(k: int, params: ProblemParams, nl: Nonlinearity, *,
                  lambda_tol: float | None = None, lambda_cap: float | None = None,
                  growth: float = 1.1, lm: Landmarks | None = None) -> NodeSolution:
    """Locate ``lambda_k``, the supremum of trapped shots with ``k`` zeros, and the compactly supported k-node solution.

    A geometric grid ``A * growth^j`` seeds a bracket ``[lo, hi]`` with ``k``
    zeros at ``lo`` and more at ``hi``.  Bisection on the zero count runs
    until the width is below ``lambda_tol`` (default ``1e-10 lo``); then each
    new midpoint is also integrated with double-zero detection, and
    bisection continues to floating-point resolution until one of them stops
    at a double zero.  Failing that, the closest approach is returned with
    ``near_support = True``.

    Raises
    ------
    SearchError
        If no bracket is found below ``lambda_cap`` (default ``1e6 A``).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    lm = landmarks(nl) if lm is None else lm
    cap = 1e6 * lm.A if lambda_cap is None else float(lambda_cap)

    lo, k_lo = lm.A, 0
    hi = None
    j = 1
    while True:
        lam = lm.A * growth ** j
        if lam > cap:
            raise SearchError(f"no shot with more than {k} zeros below lambda_cap={cap:g}")
        n = _count(lam, params, nl, lm)
        if n > k:
            hi, k_hi = lam, n
            break
        lo, k_lo = lam, n
        j += 1

    # narrow to a single-step transition k -> k+1
    while k_lo != k or k_hi != k + 1:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise SearchError(f"node count jumps from {k_lo} to {k_hi} at lambda={lo!r}")
        n = _count(mid, params, nl, lm)
        if n > k:
            hi, k_hi = mid, n
        else:
            lo, k_lo = mid, n

    tol = 1e-10 * lo if lambda_tol is None else float(lambda_tol)
    widths = [hi - lo]
    best = None
    first_mid = math.inf
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if hi - lo < tol:
            c = classify(mid, params, nl, detect_double_zero=True, lm=lm)
            if first_mid == math.inf:
                first_mid = c.approach
            if c.kind == ShootKind.SUPPORTED and c.k == k:
                best = c
                break
            if best is None or c.approach < best.approach:
                best = c
        n = _count(mid, params, nl, lm)
        if n > k:
            hi = mid
        else:
            lo = mid
        widths.append(hi - lo)

    notes = [f"bisection steps: {len(widths) - 1}", f"final width: {hi - lo!r}"]
    if best is None:
        best = classify(0.5 * (lo + hi), params, nl, detect_double_zero=True, lm=lm)
    if best.kind == ShootKind.SUPPORTED and best.k == k:
        return NodeSolution(k=k, lambda_k=best.lam, bracket=(lo, hi), r_support=best.r_support,
                            trajectory=best.trajectory, approach=best.approach,
                            midpoint_approach=first_mid, notes=tuple(notes))
    notes.append("double_zero_tol not met; closest approach reported")
    return NodeSolution(k=k, lambda_k=best.lam, bracket=(lo, hi), r_support=None,
                        trajectory=best.trajectory, near_support=True, approach=best.approach,
                        midpoint_approach=first_mid, notes=tuple(notes))


def extend_compact_support(sol: NodeSolution, r_end: float | None = None,
                           samples: int = 64) -> NodeSolution:
    """Continue a double-zero solution by ``u = 0`` up to ``r_end``.

    Past a double zero the continuation is not unique; the zero branch is
    the one selected here and this is recorded in the notes.
    """
    traj = sol.trajectory
    pr = traj.params
    if sol.r_support is None or traj.stop_reason != StopReason.DOUBLE_ZERO:
        raise ContractError("solution does not end at a double zero")
    if traj.E[-1] > pr.event_tol:
        raise ContractError(f"energy {traj.E[-1]:.3g} at the double zero exceeds event_tol")
    if sol.extended:
        return sol
    r_s = traj.r_end
    r_end = max(2.0 * r_s, pr.r_max or 0.0) if r_end is None else float(r_end)
    if not r_end > r_s:
        raise ContractError("r_end must exceed the support radius")
    r_new = np.linspace(r_s, r_end, samples + 1)[1:]
    zeros = np.zeros_like(r_new)
    ext = Trajectory(
        params=replace(pr, r_max=max(r_end, pr.r_max or r_end)),
        r=np.concatenate((traj.r, r_new)), u=np.concatenate((traj.u, zeros)),
        v=np.concatenate((traj.v, zeros)), E=np.concatenate((traj.E, zeros)),
        events=traj.events, stop_reason=traj.stop_reason, delta=traj.delta,
        segments=traj.segments + (_Segment(r_s, r_end, _zero_fn),),
        n_steps=traj.n_steps,
        notes=traj.notes + ("zero branch selected beyond the double zero (continuation not unique)",),
    )
    return replace(sol, trajectory=ext, extended=True,
                   notes=sol.notes + (f"extended by u = 0 on ({r_s!r}, {r_end!r}]",))


def asymptotic_limit(traj: Trajectory, nl: Nonlinearity, lm: Landmarks | None = None,
                     points: int = 20001) -> dict:
    """Tail averages of ``u`` and ``E`` over ``[r_end / 10, r_end]``.

    For runs ending at a double zero the limit report is suppressed: the
    solution continues by zero.
    """
    lm = landmarks(nl) if lm is None else lm
    r1 = traj.r_end
    r0 = r1 / 10.0
    rr = np.linspace(r0, r1, points)
    u, v = traj.dense_eval(rr)
    p = traj.params.p
    q = p / (p - 1.0)
    E = np.abs(v) ** q / q + nl.F(u)
    span = r1 - r0
    u_tail = float(np.trapezoid(u, rr) / span)
    E_tail = float(np.trapezoid(E, rr) / span)
    out = {"r_window": [r0, r1], "u_tail": u_tail, "E_tail": E_tail,
           "stop_reason": traj.stop_reason.value}
    if traj.stop_reason == StopReason.DOUBLE_ZERO:
        out.update(ell=None, u_residual=None, E_residual=abs(E_tail),
                   note="compact support: solution continues by zero")
        return out
    candidates = [z for z in lm.zeros if z != 0.0]
    ell = min(candidates, key=lambda z: abs(z - u_tail))
    out.update(ell=float(ell), u_residual=abs(u_tail - ell),
               E_residual=abs(E_tail - nl.F_scalar(ell)))
    return out
