"""Barrier profile, compact-support check, support-size bounds, energy probe.

Barrier
    The one-dimensional profile ``ub`` solving ``|ub'|^p / q + F(ub) = 0``
    with ``ub(0) = a`` reaches zero, with zero slope, after the finite time

        A_time = int_0^a ds / [q (-F(s))]^(1/p).

    ``B_time`` is the same integral for ``s -> F(-s)`` on ``(0, -b)``.  Any
    solution that stays inside ``(b, a)`` from some radius ``R`` on vanishes
    beyond ``R + max(A_time, B_time)``.

Size bounds
    While ``u`` falls from ``lam`` to ``theta lam`` the nonlinearity is
    pinched between ``f(theta lam)`` and ``f(lam)``.  Integrating the radial
    equation twice brackets the radius ``S`` where ``u = theta lam``.  The
    weighted energy ``r^(q(N-1)) E`` then gives a lower bound for the radius
    at which the energy first vanishes, hence for the support radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicHermiteSpline

from .errors import BarrierError, ConfigurationError, DomainError
from .ivp import ProblemParams, StopReason, Trajectory, integrate
from .model import Landmarks, Nonlinearity, PowerNonlinearity, landmarks

__all__ = [
    "BarrierProfile",
    "SizeBounds",
    "barrier",
    "barrier_time",
    "support_upper_check",
    "size_bounds",
    "measure_S",
    "energy_growth_probe",
    "default_r_max",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class BarrierProfile:
    """Barrier times and the decreasing profile ``ub`` on ``[0, A_time]``."""

    A_time: float
    B_time: float
    a: float
    b: float
    r_nodes: np.ndarray = field(repr=False)
    u_nodes: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)
    refinement_change: float = math.nan

    @property
    def reach(self) -> float:
        return max(self.A_time, self.B_time)

    def profile(self, r):
        """``ub(r)`` for ``r`` in ``[0, A_time]``; zero beyond."""
        spline = CubicHermiteSpline(self.r_nodes, self.u_nodes, self.slopes)
        r = np.asarray(r, dtype=float)
        out = np.where(r >= self.A_time, 0.0, spline(np.clip(r, 0.0, self.A_time)))
        # cubic pieces undershoot by ~1e-9 where ub vanishes to high order
        out = np.clip(out, 0.0, self.a)
        return out if out.ndim else float(out)


def _small_u_exponent(G, span):
    """Exponent ``alpha`` with ``G(s) ~ c s^alpha`` as ``s -> 0+``."""
    e = 1e-6 * span
    return math.log(G(10 * e) / G(e)) / math.log(10.0)


def barrier_time(G, end: float, p: float, alpha: float, panels: int = 64,
                 return_nodes: bool = False):
    """``int_0^end ds / [q G(s)]^(1/p)`` for ``G > 0`` with ``G ~ s^alpha`` at 0.

    The substitution ``s = t^k`` with ``k = p / (p - alpha)`` makes the
    integrand bounded at ``t = 0``.
    """
    q = p / (p - 1.0)
    if not alpha < p:
        raise BarrierError(f"integrand ~ s^(-{alpha / p:.4g}) is not integrable at 0")
    k = p / (p - alpha)
    t_end = end ** (1.0 / k)
    knots = np.linspace(0.0, t_end, panels + 1)
    mid = 0.5 * (knots[:-1] + knots[1:])
    half = 0.5 * (knots[1:] - knots[:-1])
    t = mid[:, None] + half[:, None] * _GL_X
    s = t ** k
    g = np.asarray(G(s.ravel())).reshape(s.shape)
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise BarrierError("-F must be positive on the barrier interval")
    integrand = k * t ** (k - 1.0) * (q * g) ** (-1.0 / p)
    pieces = half * (integrand @ _GL_W)
    total = float(pieces.sum())
    if not math.isfinite(total):
        raise BarrierError("barrier quadrature diverged")
    if return_nodes:
        # elapsed time from s = end down to each knot
        cum = np.concatenate(([0.0], np.cumsum(pieces)))
        return total, knots ** k, total - cum
    return total


@lru_cache(maxsize=32)
def barrier(nl: Nonlinearity, p: float | None = None, lm: Landmarks | None = None,
            panels: int = 64) -> BarrierProfile:
    """Barrier times and profile for ``nl``.

    Raises
    ------
    BarrierError
        If ``-F`` is not positive on ``(0, a]`` or ``(b, 0)``, or the
        singularity at 0 is not integrable.
    """
    p = nl.p if p is None else float(p)
    q = p / (p - 1.0)
    lm = landmarks(nl) if lm is None else lm

    def G_pos(s):
        return -np.asarray(nl.F(s))

    def G_neg(s):
        return -np.asarray(nl.F(-np.asarray(s)))

    if isinstance(nl, PowerNonlinearity):
        alpha_pos = alpha_neg = nl.m
    else:
        alpha_pos = _small_u_exponent(lambda s: float(G_pos(s)), lm.a)
        alpha_neg = _small_u_exponent(lambda s: float(G_neg(s)), -lm.b)

    A_time, s_nodes, r_nodes = barrier_time(G_pos, lm.a, p, alpha_pos, panels, return_nodes=True)
    B_time = barrier_time(G_neg, -lm.b, p, alpha_neg, panels)
    A_fine = barrier_time(G_pos, lm.a, p, alpha_pos, 2 * panels)
    change = abs(A_fine - A_time) / A_time

    # r increases as u decreases; flip so nodes run along r
    r_nodes = r_nodes[::-1].copy()
    u_nodes = s_nodes[::-1].copy()
    r_nodes[0] = 0.0
    slopes = -(q * np.maximum(G_pos(u_nodes), 0.0)) ** (1.0 / p)
    for arr in (r_nodes, u_nodes, slopes):
        arr.setflags(write=False)
    return BarrierProfile(A_time=A_time, B_time=B_time, a=lm.a, b=lm.b,
                          r_nodes=r_nodes, u_nodes=u_nodes, slopes=slopes,
                          refinement_change=change)


def _last_exit(traj: Trajectory, a: float, b: float, r_end: float):
    """Largest radius below ``r_end`` where ``u`` is outside ``(b, a)``."""
    mask = (traj.r <= r_end) & ((traj.u >= a) | (traj.u <= b))
    idx = np.nonzero(mask)[0]
    if len(idx) == 0:
        return None
    i = int(idx[-1])
    if i + 1 >= len(traj.r) or traj.r[i + 1] > r_end:
        return float(traj.r[i])
    level = a if traj.u[i] >= a else b
    fn = lambda r: traj.dense_eval(r).u - level
    lo, hi = float(traj.r[i]), float(traj.r[i + 1])
    if fn(lo) * fn(hi) > 0:
        return lo
    return optimize.brentq(fn, lo, hi, xtol=1e-14)


def support_upper_check(sol, nl: Nonlinearity, R: float | None = None,
                        profile: BarrierProfile | None = None,
                        double_zero_tol: float | None = None) -> dict:
    """Check that ``u`` vanishes beyond ``R + max(A_time, B_time)``.

    ``sol`` is a :class:`plapshoot.shoot.NodeSolution` (anything with a
    ``trajectory`` and ``r_support``).  ``R`` defaults to the last exit of
    ``u`` from ``(b, a)`` before the support radius.
    """
    traj = sol.trajectory
    profile = barrier(nl, traj.params.p) if profile is None else profile
    tol = traj.params.double_zero_tol if double_zero_tol is None else double_zero_tol
    report = {"A_time": profile.A_time, "B_time": profile.B_time, "R": None,
              "bound_radius": None, "r_support": None, "margin": None,
              "max_abs_u_beyond": None, "passed": False, "conclusive": False}
    r_support = getattr(sol, "r_support", None)
    if r_support is None or traj.stop_reason != StopReason.DOUBLE_ZERO:
        report["note"] = "no double zero: u does not settle at 0, support bound does not apply"
        return report
    report["r_support"] = float(r_support)
    if R is None:
        R = _last_exit(traj, profile.a, profile.b, r_support)
        if R is None:
            report["note"] = "u never leaves (b, a); no valid R"
            return report
    tail = traj.r > R
    if np.any((traj.u[tail] >= profile.a) | (traj.u[tail] <= profile.b)):
        report["note"] = "u leaves (b, a) after R; R invalid"
        report["R"] = float(R)
        return report
    bound = R + profile.reach
    beyond = traj.r > bound
    max_u = float(np.max(np.abs(traj.u[beyond]))) if np.any(beyond) else 0.0
    report.update(R=float(R), bound_radius=float(bound), margin=float(bound - r_support),
                  max_abs_u_beyond=max_u, conclusive=True)
    report["passed"] = bool(max_u <= tol and bound - r_support > 0)
    return report


# ---------------------------------------------------------------------------
# size bounds


@dataclass(frozen=True)
class SizeBounds:
    lam: float
    theta_growth: float
    S_lo: float
    S_hi: float
    r_support_lo: float
    constant: float
    kappa: float
    chain: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "theta_growth": self.theta_growth, "S_lo": self.S_lo,
                "S_hi": self.S_hi, "r_support_lo": self.r_support_lo,
                "constant": self.constant, "kappa": self.kappa, "chain": dict(self.chain)}


def size_bounds(lam: float, theta_growth: float, nl: Nonlinearity, p: float | None = None,
                N: float | None = None, lm: Landmarks | None = None) -> SizeBounds:
    """Bracket ``[S_lo, S_hi]`` for the radius where ``u = theta lam``, and a
    lower bound on the support radius.

    The support bound is ``c (lam^(N(p-1)/(N-p)) / f(lam))^((N-p)/(p(N-1)))``
    with ``c = [N^(1/(p-1)) q (1 - theta) (kappa / F_bar)^(1/(N-1))]^(1/q)``
    and ``kappa = F(theta lam) / (lam f(lam))``.  If ``kappa <= 0`` the
    energy at ``S`` may be negative and no support bound follows
    (``r_support_lo`` is NaN).

    Raises
    ------
    DomainError
        If ``f(theta lam) <= 0``.
    """
    p = nl.p if p is None else float(p)
    N = nl.N if N is None else float(N)
    if not 0.0 < theta_growth < 1.0:
        raise ConfigurationError("theta_growth must lie in (0, 1)")
    q = p / (p - 1.0)
    lm = landmarks(nl) if lm is None else lm
    f_hi = nl.f_scalar(lam)
    f_lo = nl.f_scalar(theta_growth * lam)
    if not f_lo > 0:
        raise DomainError(f"f(theta*lambda) = {f_lo:.6g} <= 0; lambda too small")
    base = N ** (1.0 / (p - 1.0)) * q * (1.0 - theta_growth) * lam
    S_lo = (base / f_hi ** (1.0 / (p - 1.0))) ** (1.0 / q)
    S_hi = (base / f_lo ** (1.0 / (p - 1.0))) ** (1.0 / q)
    kappa = nl.F_scalar(theta_growth * lam) / (lam * f_hi)
    chain = {
        "N^(1/(p-1))": N ** (1.0 / (p - 1.0)), "q": q, "1-theta": 1.0 - theta_growth,
        "kappa": kappa, "F_bar": lm.F_bar, "exponent_outer": (N - p) / (p * (N - 1.0)),
        "exponent_lambda": N * (p - 1.0) / (N - p),
    }
    if kappa > 0:
        c = (N ** (1.0 / (p - 1.0)) * q * (1.0 - theta_growth)
             * (kappa / lm.F_bar) ** (1.0 / (N - 1.0))) ** (1.0 / q)
        growth = (lam ** (N * (p - 1.0) / (N - p)) / f_hi) ** ((N - p) / (p * (N - 1.0)))
        r_lo = c * growth
    else:
        c, r_lo = math.nan, math.nan
    chain["c"] = c
    return SizeBounds(lam=float(lam), theta_growth=float(theta_growth), S_lo=S_lo, S_hi=S_hi,
                      r_support_lo=r_lo, constant=c, kappa=kappa, chain=chain)


def measure_S(traj: Trajectory, theta_growth: float) -> float:
    """First radius where ``u = theta lam`` on a computed trajectory."""
    level = theta_growth * traj.params.lam
    below = np.nonzero(traj.u <= level)[0]
    if len(below) == 0:
        raise DomainError("trajectory never reaches theta * lambda")
    i = int(below[0])
    lo, hi = float(traj.r[i - 1]), float(traj.r[i])
    return optimize.brentq(lambda r: traj.dense_eval(r).u - level, lo, hi, xtol=1e-15)


def default_r_max(lam: float, nl: Nonlinearity, theta_growth: float = 0.904,
                  lm: Landmarks | None = None, profile: BarrierProfile | None = None) -> float:
    """Horizon ``4 r_support_lo + 10 A_time``; falls back to ``20 A_time``
    when the size bound is unavailable (small ``lam``)."""
    lm = landmarks(nl) if lm is None else lm
    profile = barrier(nl, nl.p, lm) if profile is None else profile
    try:
        r_lo = size_bounds(lam, theta_growth, nl, lm=lm).r_support_lo
    except DomainError:
        r_lo = math.nan
    if not math.isfinite(r_lo):
        return 20.0 * profile.reach
    return 4.0 * r_lo + 10.0 * profile.reach


# ---------------------------------------------------------------------------
# energy growth


def energy_growth_probe(R: float, lambdas, params: ProblemParams, nl: Nonlinearity,
                        threshold: float | None = None) -> list:
    """Minimum of the energy and of ``rho`` over ``[0, R]`` for each ``lam``.

    Rows carry ``increased`` (min energy above the previous row's) and, if
    ``threshold`` is given, ``exceeds``.  Decreases at moderate ``lam`` are
    reported, not raised: the growth statement is asymptotic.
    """
    lambdas = [float(x) for x in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ConfigurationError("lambdas must be strictly increasing")
    p = params.p
    qq = p / (p - 1.0)
    rows = []
    prev = None
    for lam in lambdas:
        pr = ProblemParams(N=params.N, p=p, lam=lam, r_max=float(R), rel_tol=params.rel_tol,
                           abs_tol=params.abs_tol, event_tol=params.event_tol,
                           double_zero_tol=params.double_zero_tol, zero_cap=params.zero_cap)
        traj = integrate(pr, nl, detect_double_zero=False, stop_on_trapped=False)
        rho = np.abs(traj.u) ** p + (p / qq) * np.abs(traj.v) ** qq
        row = {
            "lambda": lam, "min_E": float(traj.E.min()), "min_rho": float(rho.min()),
            "r_end": traj.r_end, "stop_reason": traj.stop_reason.value,
            "zeros": int(len(traj.zero_radii)),
            "increased": None if prev is None else bool(traj.E.min() > prev),
        }
        if threshold is not None:
            row["exceeds"] = bool(traj.E.min() > threshold)
        rows.append(row)
        prev = traj.E.min()
    return rows
