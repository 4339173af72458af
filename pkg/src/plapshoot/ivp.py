"""Radial shooting problem for the p-Laplacian.

For ``u(0) = lam > 0`` and ``u'(0) = 0`` we integrate

    (r^(N-1) phi_p(u'))' + r^(N-1) f(u) = 0

as the first-order system in ``(u, v)`` with ``v = phi_p(u')``:

    u' = phi_q(v),   v' = -(N - 1) v / r - f(u).

The ``1/r`` coefficient rules out stepping from ``r = 0``.  A short Picard
iteration on ``[0, delta]`` supplies the state at ``delta``.  From there the
system is advanced with scipy's DOP853 stepper, driven one step at a time so
that sign changes of ``u``, ``v`` and the energy can be located on the dense
output and the stepper restarted exactly at zeros and critical points.
For ``p != 2`` critical points are crossed by a local Picard bridge instead
(see ``_Runner._bridge``), since ``phi_q`` is not smooth at 0.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.integrate import DOP853

from .errors import ConfigurationError, IntegrationError, StartupError
from .model import Nonlinearity

__all__ = [
    "ProblemParams",
    "PhaseState",
    "EventKind",
    "Event",
    "StopReason",
    "Trajectory",
    "startup",
    "default_delta",
    "integrate",
    "energy",
    "weighted_energy",
    "dissipation_integral",
    "write_trajectory_csv",
    "events_to_records",
    "write_events_json",
]

_EPS = np.finfo(float).eps
_SUBSAMPLES = 9


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, exponent, shooting amplitude, horizon and tolerances.

    ``r_max = None`` asks the caller (usually :mod:`plapshoot.shoot`) to
    supply a horizon; :func:`integrate` itself needs a finite value.
    """

    N: float
    p: float
    lam: float
    r_max: float | None = 200.0
    rel_tol: float = 1e-12
    abs_tol: float = 1e-13
    event_tol: float = 1e-10
    double_zero_tol: float = 1e-7
    zero_cap: int = 1000

    def __post_init__(self):
        for name in ("N", "p", "lam", "rel_tol", "abs_tol", "event_tol", "double_zero_tol"):
            val = getattr(self, name)
            if not isinstance(val, (int, float)) or not math.isfinite(val):
                raise ConfigurationError(f"{name} must be a finite number, got {val!r}")
        if not self.p > 1.0:
            raise ConfigurationError(f"need p > 1 (got p={self.p})")
        if not self.N > self.p:
            raise ConfigurationError(f"need N > p (got N={self.N}, p={self.p})")
        if not self.lam > 0.0:
            raise ConfigurationError(f"need lambda > 0 (got {self.lam})")
        for name in ("rel_tol", "abs_tol", "event_tol", "double_zero_tol"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"{name} must be > 0")
        if self.r_max is not None and not (math.isfinite(self.r_max) and self.r_max > 0):
            raise ConfigurationError(f"r_max must be finite and > 0 (got {self.r_max})")
        if self.zero_cap < 1:
            raise ConfigurationError("zero_cap must be >= 1")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def with_lambda(self, lam: float) -> "ProblemParams":
        return replace(self, lam=float(lam))


@dataclass(frozen=True)
class PhaseState:
    """Point ``(r, u, v)`` of the first-order system; ``u' = phi_q(v)``."""

    r: float
    u: float
    v: float

    def uprime(self, p: float):
        q = p / (p - 1.0)
        return np.sign(self.v) * np.abs(self.v) ** (q - 1.0)


class EventKind(str, enum.Enum):
    SIMPLE_ZERO = "SimpleZero"
    CRITICAL_POINT = "CriticalPoint"
    DOUBLE_ZERO = "DoubleZero"
    ENERGY_ZERO_CROSSING = "EnergyZeroCrossing"


class StopReason(str, enum.Enum):
    REACHED_RMAX = "ReachedRmax"
    ENERGY_TRAPPED = "EnergyTrapped"
    DOUBLE_ZERO = "DoubleZero"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    r: float
    state: PhaseState
    E: float

    def as_record(self) -> dict:
        return {"kind": self.kind.value, "r": self.r, "u": self.state.u,
                "v": self.state.v, "E": self.E}


@dataclass(frozen=True)
class _Segment:
    """Dense interpolant valid on ``[r0, r1]``; ``fn(r)`` returns ``(2, n)``."""

    r0: float
    r1: float
    fn: object


def _zero_fn(r):
    r = np.atleast_1d(r)
    return np.zeros((2, r.size))


@dataclass(frozen=True)
class Trajectory:
    """Samples, events and dense output of one shot.

    Arrays are read-only.  ``E`` holds the energy at each sample.
    """

    params: ProblemParams
    r: np.ndarray
    u: np.ndarray
    v: np.ndarray
    E: np.ndarray
    events: tuple
    stop_reason: StopReason
    delta: float
    segments: tuple = field(repr=False, default=())
    n_steps: int = 0
    notes: tuple = ()

    def __post_init__(self):
        for name in ("r", "u", "v", "E"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def uprime(self) -> np.ndarray:
        q = self.params.q
        return np.sign(self.v) * np.abs(self.v) ** (q - 1.0)

    @property
    def r_end(self) -> float:
        return float(self.r[-1])

    def events_of(self, kind: EventKind) -> list:
        return [e for e in self.events if e.kind == kind]

    @property
    def zero_radii(self) -> np.ndarray:
        return np.array([e.r for e in self.events if e.kind == EventKind.SIMPLE_ZERO])

    def first_energy_zero(self) -> float | None:
        ev = self.events_of(EventKind.ENERGY_ZERO_CROSSING)
        return ev[0].r if ev else None

    def dense_eval(self, r):
        """Interpolated ``(u, v)`` at radii ``r`` inside ``[0, r_end]``."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r_arr < 0) or np.any(r_arr > self.r_end * (1 + 4 * _EPS)):
            raise ValueError(f"radius outside [0, {self.r_end}]")
        starts = np.array([s.r0 for s in self.segments])
        order = np.argsort(r_arr, kind="stable")
        rs = r_arr[order]
        idx = np.clip(np.searchsorted(starts, rs, side="right") - 1, 0, len(starts) - 1)
        cuts = np.flatnonzero(np.diff(idx)) + 1
        out_sorted = np.empty((2, rs.size))
        for lo, hi in zip(np.r_[0, cuts], np.r_[cuts, rs.size]):
            seg = self.segments[idx[lo]]
            out_sorted[:, lo:hi] = np.asarray(seg.fn(rs[lo:hi])).reshape(2, -1)
        out = np.empty_like(out_sorted)
        out[:, order] = out_sorted
        if np.ndim(r) == 0:
            return PhaseState(float(r), float(out[0, 0]), float(out[1, 0]))
        return out[0], out[1]


# ---------------------------------------------------------------------------
# energy


def energy(state, nl: Nonlinearity, p: float):
    """``|u'|^p / q + F(u)`` with ``u' = phi_q(v)``, i.e. ``|v|^q / q + F(u)``."""
    q = p / (p - 1.0)
    u = np.asarray(state.u, dtype=float)
    v = np.asarray(state.v, dtype=float)
    out = np.abs(v) ** q / q + nl.F(u)
    return out if np.ndim(out) else float(out)


def weighted_energy(state, nl: Nonlinearity, p: float, N: float):
    """``r^(q (N-1)) E``; zero at ``r = 0``."""
    q = p / (p - 1.0)
    r = np.asarray(state.r, dtype=float)
    out = r ** (q * (N - 1.0)) * energy(state, nl, p)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# startup


def default_delta(params: ProblemParams, nl: Nonlinearity) -> float:
    """Startup radius where the leading correction to ``u`` is ``1e-6 lam``."""
    f0 = abs(nl.f_scalar(params.lam))
    if f0 == 0.0:
        return 1e-3
    q, N = params.q, params.N
    scale = (1e-6 * params.lam * q * N ** (q - 1.0) / f0 ** (q - 1.0)) ** (1.0 / q)
    return min(1e-3, scale)


def _phi(x, a):
    return np.sign(x) * np.abs(x) ** (a - 1.0)


def _local_root(s, y, j):
    """Zero of ``y`` in ``[s[j], s[j+1]]`` from a local cubic fit."""
    a, b = s[j], s[j + 1]
    lin = a - y[j] * (b - a) / (y[j + 1] - y[j])
    lo, hi = max(j - 1, 0), min(j + 3, len(s))
    if hi - lo < 4:
        return float(lin)
    roots = np.polynomial.Polynomial.fit(s[lo:hi], y[lo:hi], 3).roots()
    real = roots[np.abs(roots.imag) <= 1e-9 * (b - a)].real
    real = real[(real >= a) & (real <= b)]
    return float(real[np.argmin(np.abs(real - lin))]) if len(real) else float(lin)


def _cumtrapz(y, x):
    return np.concatenate(([0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))))


def _picard(params: ProblemParams, nl: Nonlinearity, delta: float, nodes: int = 401):
    """Fixed point of the integral operator on ``[0, delta]``; returns grid, u, v."""
    lam, N, q = params.lam, params.N, params.q
    r = np.linspace(0.0, delta, nodes)
    f0 = nl.f_scalar(lam)
    lead_g = f0 * r / N
    # exact integral of phi_q(f0 r / N)
    lead_u = math.copysign(abs(f0 / N) ** (q - 1.0), f0) * r ** q / q
    u = lam - lead_u
    tol = max(params.abs_tol / 10.0, 4 * _EPS * lam)
    rN1 = r ** (N - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(r > 0, r ** (1.0 - N), 0.0)
    for _ in range(100):
        resid = _cumtrapz(rN1 * (np.asarray(nl.f(u)) - f0), r)
        g = lead_g + inv * resid
        u_new = lam - lead_u - _cumtrapz(_phi(g, q) - _phi(lead_g, q), r)
        if not np.all(np.isfinite(u_new)):
            break
        change = float(np.max(np.abs(u_new - u)))
        u = u_new
        if change < tol:
            return r, u, -g
    raise StartupError(f"Picard iteration did not contract on [0, {delta:g}]; reduce delta")


def startup(params: ProblemParams, nl: Nonlinearity, delta: float | None = None) -> PhaseState:
    """State at ``r = delta`` from Picard iteration of the integral equation."""
    delta = default_delta(params, nl) if delta is None else float(delta)
    if not delta > 0:
        raise ConfigurationError("delta must be > 0")
    r, u, v = _picard(params, nl, delta)
    return PhaseState(float(r[-1]), float(u[-1]), float(v[-1]))


# ---------------------------------------------------------------------------
# integration


class _Runner:
    """Mutable integration state; :func:`integrate` wraps it."""

    def __init__(self, params: ProblemParams, nl: Nonlinearity, detect_double_zero: bool,
                 stop_on_trapped: bool, max_step: float):
        self.params, self.nl = params, nl
        self.detect_dz = detect_double_zero
        self.stop_on_trapped = stop_on_trapped
        self.max_step = max_step
        self.q = params.q
        self.p = params.p
        self.nm1 = params.N - 1.0
        self.rs, self.us, self.vs = [], [], []
        self.events: list[Event] = []
        self.segments: list[_Segment] = []
        self.energy_crossed = False
        self.n_steps = 0
        self.notes: list[str] = []
        self.bound = 10.0 * max(params.lam, self._A())

    def _A(self):
        F = self.nl.F_scalar
        hi = 1.0
        while F(hi) <= 0 and hi < 1e12:
            hi *= 2.0
        return hi

    def rhs(self, r, y):
        u, v = y[0], y[1]
        a = abs(v)
        up = math.copysign(a ** (self.q - 1.0), v) if a > 0 else 0.0
        return np.array([up, -self.nm1 * v / r - self.nl.f_scalar(u)])

    def E(self, u, v):
        return abs(v) ** self.q / self.q + self.nl.F_scalar(u)

    def uprime(self, v):
        return abs(v) ** (self.q - 1.0)

    def record(self, r, u, v):
        self.rs.append(r)
        self.us.append(u)
        self.vs.append(v)

    def add_event(self, kind, r, u, v):
        ev = Event(kind, float(r), PhaseState(float(r), float(u), float(v)), float(self.E(u, v)))
        self.events.append(ev)
        return ev

    def is_double_zero(self, u, v):
        pr = self.params
        return (self.detect_dz and abs(u) + self.uprime(v) <= pr.double_zero_tol
                and self.E(u, v) <= pr.event_tol)

    def new_solver(self, r, u, v, first_step=None):
        return DOP853(self.rhs, r, np.array([u, v]), self.params.r_max, first_step=first_step,
                      max_step=self.max_step, rtol=self.params.rel_tol, atol=self.params.abs_tol)

    # -- crossing critical points when q != 2 ------------------------------
    #
    # Near a critical point v is linear in r but u' = phi_q(v) ~ |r - rc|^(q-1)
    # is not smooth, and a Runge-Kutta step across (or away from) it loses
    # accuracy without the error estimate noticing.  Steps are therefore
    # shortened geometrically on approach, and the point itself is crossed
    # by a Picard iteration whose leading term is integrated in closed form.

    def _approach(self, r, u, v):
        """``(distance, half_width)`` to a predicted critical point, or None."""
        if v == 0.0 or abs(u) <= 1e3 * self.params.double_zero_tol:
            return None
        fu = self.nl.f_scalar(u)
        g = -self.nm1 * v / r - fu
        if fu == 0.0 or v * g >= 0.0:
            return None
        # half width where the leading change of u is 1e-6 |u|
        hb = (1e-6 * abs(u) * self.q / abs(fu) ** (self.q - 1.0)) ** (1.0 / self.q)
        return -v / g, min(hb, 1e-2 * r)

    def _bridge(self, r1, u1, v1, length, nodes=2001):
        """Picard solution on ``[r1, r1 + length]`` through one zero of ``v``.

        Returns ``(s, u, v, rc, fn)`` or None if no crossing is found.
        """
        q, nm1 = self.q, self.nm1
        s = r1 + length * np.linspace(0.0, 1.0, nodes)
        ratio = (s / r1) ** nm1
        u = u1 + _phi(v1, q) * (s - r1)
        tol = 4 * _EPS * max(abs(u1), 1.0)
        for _ in range(60):
            v = (v1 - _cumtrapz(ratio * np.asarray(self.nl.f(u)), s)) / ratio
            j = self._first_sign_change(v, False)
            if j is None:
                return None
            rc = _local_root(s, v, j)
            gc = -self.nl.f_scalar(float(np.interp(rc, s, u)))
            lead_v = gc * (s - rc)
            lead_u = u1 + (np.abs(lead_v) ** q - abs(gc * (r1 - rc)) ** q) / (q * gc)
            u_new = lead_u + _cumtrapz(_phi(v, q) - _phi(lead_v, q), s)
            change = float(np.max(np.abs(u_new - u)))
            u = u_new
            if change <= tol:
                break
        else:
            return None
        v = (v1 - _cumtrapz(ratio * np.asarray(self.nl.f(u)), s)) / ratio
        res_u = u - lead_u
        res_v = v - lead_v
        u0 = u1 - abs(gc * (r1 - rc)) ** q / (q * gc)

        def fn(r, rc=rc, gc=gc, u0=u0, s=s, ru=res_u, rv=res_v):
            r = np.atleast_1d(np.asarray(r, dtype=float))
            lv = gc * (r - rc)
            lu = u0 + np.abs(lv) ** q / (q * gc)
            return np.vstack((lu + np.interp(r, s, ru), lv + np.interp(r, s, rv)))

        return s, u, v, rc, fn

    def _cross(self, r, u, v, d, hb):
        """Bridge over a critical point; returns the end state or None."""
        pr = self.params
        out = self._bridge(r, u, v, min(d + hb, pr.r_max - r))
        if out is None:
            return None
        s, us, vs, rc, fn = out
        if not r < rc < s[-1]:
            return None
        uc = float(fn(rc)[0, 0])
        events = [(rc, EventKind.CRITICAL_POINT, uc, 0.0)]
        if not self.energy_crossed:
            es = np.abs(vs) ** self.q / self.q + self.nl.F(us)
            je = self._first_sign_change(es, False)
            if je is not None and es[je] >= 0 > es[je + 1]:
                re = self._root(lambda t: fn(t)[:, 0], 2, s[je], s[je + 1])
                ue, ve = (float(x) for x in fn(re)[:, 0])
                events.append((re, EventKind.ENERGY_ZERO_CROSSING, ue, ve))
                self.energy_crossed = True
        picks = np.unique(np.linspace(0, len(s) - 1, _SUBSAMPLES).astype(int))[1:]
        samples = [(float(s[i]), float(us[i]), float(vs[i])) for i in picks]
        samples.append((rc, uc, 0.0))
        for rr, uu, vv in sorted(samples):
            self.record(rr, uu, vv)
        for re, kind, ue, ve in sorted(events, key=lambda e: e[0]):
            self.add_event(kind, re, ue, ve)
        self.segments.append(_Segment(r, float(s[-1]), fn))
        return float(s[-1]), float(us[-1]), float(vs[-1]), rc

    @staticmethod
    def _first_sign_change(vals, skip_start):
        start = 1 if skip_start and vals[0] == 0.0 else 0
        s = np.sign(vals[start:])
        for j in range(len(s) - 1):
            if s[j] != 0 and s[j + 1] != s[j]:
                return start + j
        return None

    def _root(self, dense, comp, a, b):
        fn = (lambda t: dense(t)[comp]) if comp < 2 else (lambda t: self.E(*dense(t)))
        if fn(b) == 0.0:
            return b
        if fn(a) == 0.0:
            return a
        return optimize.brentq(fn, a, b, xtol=4 * _EPS * abs(b), rtol=4 * _EPS, maxiter=200)

    def run(self, start: PhaseState, picard_grid):
        pr = self.params
        r_grid, u_grid, v_grid = picard_grid
        self.segments.append(_Segment(0.0, start.r, lambda r, g=(r_grid, u_grid, v_grid):
                                      np.vstack((np.interp(r, g[0], g[1]), np.interp(r, g[0], g[2])))))
        self.record(0.0, pr.lam, 0.0)
        self.record(start.r, start.u, start.v)
        if self.E(pr.lam, 0.0) < 0:
            self.energy_crossed = True
        r, u, v = start.r, start.u, start.v
        solver = self.new_solver(r, u, v)
        zeros_seen = 0
        while True:
            if solver.status == "finished" or r >= pr.r_max:
                return StopReason.REACHED_RMAX
            near = self._approach(r, u, v) if self.q != 2.0 else None
            if near is not None:
                d, hb = near
                if d <= hb:
                    crossed = self._cross(r, u, v, d, hb)
                    if crossed is not None:
                        r, u, v, rc = crossed
                        if self.stop_on_trapped and self.E(u, v) < -10.0 * pr.event_tol:
                            return StopReason.ENERGY_TRAPPED
                        if r >= pr.r_max:
                            return StopReason.REACHED_RMAX
                        solver = self.new_solver(r, u, v, first_step=0.5 * (r - rc))
                        continue
                    solver.max_step = self.max_step
                else:
                    solver.max_step = min(self.max_step, 0.5 * d, d - 0.5 * hb)
            msg = solver.step()
            self.n_steps += 1
            if solver.status == "failed":
                raise IntegrationError(f"step failure at r={solver.t!r}: {msg}",
                                       state=PhaseState(r, u, v))
            r_old, r_new = solver.t_old, solver.t
            dense = solver.dense_output()
            ts = np.linspace(r_old, r_new, _SUBSAMPLES)
            ys = dense(ts)
            es = np.abs(ys[1]) ** self.q / self.q + self.nl.F(ys[0])

            # earliest restart event (zero of u or of v) in this step
            cut, kind = r_new, None
            ju = self._first_sign_change(ys[0], True)
            jv = self._first_sign_change(ys[1], True)
            if ju is not None:
                cut, kind = self._root(dense, 0, ts[ju], ts[ju + 1]), EventKind.SIMPLE_ZERO
            if jv is not None:
                rv = self._root(dense, 1, ts[jv], ts[jv + 1])
                if kind is None or rv < cut:
                    cut, kind = rv, EventKind.CRITICAL_POINT

            # energy crossing (recorded, no restart)
            if not self.energy_crossed:
                je = self._first_sign_change(es, False)
                if je is not None and es[je] >= 0 > es[je + 1]:
                    re = self._root(dense, 2, ts[je], ts[je + 1])
                    if re <= cut:
                        ue, ve = dense(re)
                        self.add_event(EventKind.ENERGY_ZERO_CROSSING, re, ue, ve)
                        self.energy_crossed = True

            # sample-level checks before the cut
            for t, (us, vs) in zip(ts[1:], ys.T[1:]):
                if t >= cut:
                    break
                if abs(us) > self.bound or not (math.isfinite(us) and math.isfinite(vs)):
                    self._close(dense, r_old, t)
                    return StopReason.DIVERGED
                if self.is_double_zero(us, vs):
                    self._close(dense, r_old, t)
                    self.add_event(EventKind.DOUBLE_ZERO, t, us, vs)
                    return StopReason.DOUBLE_ZERO

            if kind is None:
                u, v = float(ys[0, -1]), float(ys[1, -1])
                r = r_new
                self.segments.append(_Segment(r_old, r_new, dense))
                self.record(r, u, v)
                if abs(u) > self.bound:
                    return StopReason.DIVERGED
                if self.stop_on_trapped and self.E(u, v) < -10.0 * pr.event_tol:
                    return StopReason.ENERGY_TRAPPED
                continue

            ue, ve = (float(x) for x in dense(cut))
            if kind == EventKind.SIMPLE_ZERO:
                ue = 0.0
            else:
                ve = 0.0
            self.segments.append(_Segment(r_old, cut, dense))
            self.record(cut, ue, ve)
            if self.is_double_zero(ue, ve):
                self.add_event(EventKind.DOUBLE_ZERO, cut, ue, ve)
                return StopReason.DOUBLE_ZERO
            self.add_event(kind, cut, ue, ve)
            if kind == EventKind.SIMPLE_ZERO:
                zeros_seen += 1
                zr = self.zero_radii_tail()
                if len(zr) >= 2 and zr[-1] - zr[-2] < 10.0 * pr.event_tol:
                    raise IntegrationError(f"zeros accumulate near r={cut!r}",
                                           state=PhaseState(cut, ue, ve))
                if zeros_seen > pr.zero_cap:
                    raise IntegrationError(f"more than {pr.zero_cap} zeros before r={cut!r}",
                                           state=PhaseState(cut, ue, ve))
            r, u, v = cut, ue, ve
            if self.stop_on_trapped and self.E(u, v) < -10.0 * pr.event_tol:
                return StopReason.ENERGY_TRAPPED
            if r >= pr.r_max:
                return StopReason.REACHED_RMAX
            solver = self.new_solver(r, u, v)

    def zero_radii_tail(self):
        return [e.r for e in self.events[-3:] if e.kind == EventKind.SIMPLE_ZERO]

    def _close(self, dense, r_old, t):
        u, v = (float(x) for x in dense(t))
        self.segments.append(_Segment(r_old, t, dense))
        self.record(t, u, v)


def integrate(params: ProblemParams, nl: Nonlinearity, *, delta: float | None = None,
              detect_double_zero: bool = True, stop_on_trapped: bool = True,
              max_step: float = np.inf) -> Trajectory:
    """Integrate one shot from ``u(0) = params.lam`` until a stop condition.

    Parameters
    ----------
    params, nl
        Problem data and nonlinearity.
    delta
        Startup radius; defaults to :func:`default_delta`.
    detect_double_zero
        Stop at the first radius where ``|u| + |u'| <= double_zero_tol`` with
        ``E <= event_tol``.  Bisection turns this off so that near-misses are
        classified by where the orbit goes next.
    stop_on_trapped
        Stop once ``E < -10 event_tol``.  After that no further zero can
        occur, because zeros carry ``E = |u'|^p / q >= 0``.
    max_step
        Passed through to the stepper.

    Returns
    -------
    Trajectory

    Raises
    ------
    IntegrationError
        On step-size underflow, zero accumulation, or more than ``zero_cap``
        zeros.  ``err.trajectory`` holds the partial result.
    """
    if params.r_max is None:
        raise ConfigurationError("integrate needs a finite r_max")
    lo, hi = nl.domain
    if not lo <= params.lam <= hi:
        raise ConfigurationError(f"lambda={params.lam} outside the nonlinearity domain")
    delta = default_delta(params, nl) if delta is None else float(delta)
    if not 0 < delta < params.r_max:
        raise ConfigurationError("need 0 < delta < r_max")
    grid = _picard(params, nl, delta)
    start = PhaseState(float(grid[0][-1]), float(grid[1][-1]), float(grid[2][-1]))
    runner = _Runner(params, nl, detect_double_zero, stop_on_trapped, max_step)
    try:
        reason = runner.run(start, grid)
    except IntegrationError as exc:
        exc.trajectory = _assemble(runner, StopReason.DIVERGED, delta, ("integration error",))
        raise
    return _assemble(runner, reason, delta, ())


def _assemble(runner: _Runner, reason: StopReason, delta: float, notes: tuple) -> Trajectory:
    r = np.array(runner.rs)
    u = np.array(runner.us)
    v = np.array(runner.vs)
    # drop duplicate radii produced when an event falls on a step end
    keep = np.concatenate(([True], np.diff(r) > 0))
    r, u, v = r[keep], u[keep], v[keep]
    E = np.abs(v) ** runner.q / runner.q + runner.nl.F(u)
    return Trajectory(
        params=runner.params, r=r, u=u, v=v, E=E, events=tuple(runner.events),
        stop_reason=reason, delta=delta, segments=tuple(runner.segments),
        n_steps=runner.n_steps, notes=tuple(runner.notes) + notes,
    )


def dissipation_integral(traj: Trajectory, refine: int = 16):
    """Cumulative trapezoid of ``(N - 1) |u'|^p / r`` from ``delta``.

    Returns ``(r, I)`` on a grid refined ``refine`` times per sample
    interval using the dense output.  ``E(delta) - E(r)`` should match ``I``.
    """
    p, N = traj.params.p, traj.params.N
    q = p / (p - 1.0)
    r = traj.r[traj.r >= traj.delta]
    w = np.linspace(0.0, 1.0, refine + 1)[:-1]
    fine = np.concatenate([(a + w * (b - a)) for a, b in zip(r[:-1], r[1:])] + [r[-1:]])
    _, v = traj.dense_eval(fine)
    integrand = (N - 1.0) * np.abs(v) ** q / fine
    return fine, _cumtrapz(integrand, fine)


# ---------------------------------------------------------------------------
# export


def write_trajectory_csv(path, traj: Trajectory, nl: Nonlinearity, rho=None, theta=None):
    """Write ``r,u,uprime,v,E,rho,theta`` with round-trip float formatting."""
    p = traj.params.p
    q = traj.params.q
    if rho is None:
        rho = np.abs(traj.u) ** p + (p / q) * np.abs(traj.v) ** q
    if theta is None:
        theta = np.full(traj.r.shape, np.nan)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u", "uprime", "v", "E", "rho", "theta"])
        for row in zip(traj.r, traj.u, traj.uprime, traj.v, traj.E, rho, theta):
            w.writerow([repr(float(x)) for x in row])
    return path


def events_to_records(traj: Trajectory) -> list:
    return [e.as_record() for e in traj.events]


def write_events_json(path, traj: Trajectory):
    path = Path(path)
    path.write_text(json.dumps(events_to_records(traj), indent=2) + "\n")
    return path
