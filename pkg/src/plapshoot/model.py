"""Nonlinearities ``f``, their primitives ``F`` and derived landmark constants.

Two kinds of nonlinearity are supported:

* the built-in two-power family ``f(u) = |u|^(s-2) u - |u|^(m-2) u`` with
  ``1 < m < p < s < N p / (N - p)``;
* a tabulated ``(u, f(u))`` curve read from CSV, interpolated monotonically.

Landmarks (zeros of ``f`` and ``F``, the depth of ``F``) are found by
bracketed root solves so that both kinds go through the same code path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator

from .errors import ConfigurationError, HypothesisError, LandmarkError

__all__ = [
    "Nonlinearity",
    "PowerNonlinearity",
    "TabulatedNonlinearity",
    "Landmarks",
    "RotationCertificate",
    "HypothesisCheck",
    "make_power_family",
    "load_tabulated",
    "landmarks",
    "verify_hypotheses",
    "rotation_constants",
]


class Nonlinearity:
    """Interface: vectorized ``f``/``F`` plus a fast scalar ``f_scalar``.

    Subclasses set ``p`` and ``N`` (the exponent and dimension the
    nonlinearity was validated against) and ``domain`` (the closed interval
    where ``f`` is defined).
    """

    family = "generic"
    p: float
    N: float
    domain: tuple[float, float] = (-math.inf, math.inf)

    def f(self, u):
        raise NotImplementedError

    def F(self, u):
        raise NotImplementedError

    def f_scalar(self, u: float) -> float:
        return float(self.f(u))

    def F_scalar(self, u: float) -> float:
        return float(self.F(u))

    @property
    def is_odd(self) -> bool:
        return False

    def metadata(self) -> dict:
        return {"family": self.family, "p": self.p, "N": self.N}


@dataclass(frozen=True)
class PowerNonlinearity(Nonlinearity):
    """``f(u) = |u|^(s-2) u - |u|^(m-2) u``, ``F(u) = |u|^s/s - |u|^m/m``."""

    m: float
    s: float
    p: float
    N: float
    family = "power"

    def f(self, u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(a > 0, (a ** (self.s - 2.0) - a ** (self.m - 2.0)) * u, 0.0)
        return out if out.ndim else float(out)

    def F(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        out = a ** self.s / self.s - a ** self.m / self.m
        return out if out.ndim else float(out)

    def f_scalar(self, u: float) -> float:
        a = abs(u)
        if a == 0.0:
            return 0.0
        return (a ** (self.s - 2.0) - a ** (self.m - 2.0)) * u

    def F_scalar(self, u: float) -> float:
        a = abs(u)
        return a ** self.s / self.s - a ** self.m / self.m

    @property
    def is_odd(self) -> bool:
        return True

    def closed_form(self) -> dict:
        """Landmarks known in closed form for this family."""
        m, s = self.m, self.s
        A = (s / m) ** (1.0 / (s - m))
        a = ((m - 1.0) / (s - 1.0)) ** (1.0 / (s - m))
        return {
            "a_plus": 1.0, "b_minus": -1.0, "A": A, "B": -A,
            "a": a, "b": -a, "F_bar": 1.0 / m - 1.0 / s,
        }

    def metadata(self) -> dict:
        return {"family": self.family, "m": self.m, "s": self.s, "p": self.p, "N": self.N}


class TabulatedNonlinearity(Nonlinearity):
    """Monotone cubic (PCHIP) interpolant of tabulated ``(u, f(u))`` data."""

    family = "tabulated"

    def __init__(self, u_nodes, f_nodes, p: float, N: float, source: str | None = None):
        u_nodes = np.asarray(u_nodes, dtype=float)
        f_nodes = np.asarray(f_nodes, dtype=float)
        if u_nodes.ndim != 1 or u_nodes.shape != f_nodes.shape or len(u_nodes) < 4:
            raise ConfigurationError("table needs at least 4 matching (u, f) rows")
        if np.any(np.diff(u_nodes) <= 0):
            raise ConfigurationError("tabulated u values must be strictly increasing")
        if not (u_nodes[0] < 0.0 < u_nodes[-1]):
            raise ConfigurationError("tabulated u range must contain 0 in its interior")
        self.u_nodes, self.f_nodes = u_nodes, f_nodes
        self.p, self.N = float(p), float(N)
        self.source = source
        self.domain = (float(u_nodes[0]), float(u_nodes[-1]))
        self._f = PchipInterpolator(u_nodes, f_nodes, extrapolate=False)
        anti = self._f.antiderivative()
        offset = float(anti(0.0))
        self._F = lambda u: anti(u) - offset

    def _check(self, u):
        lo, hi = self.domain
        if np.any(u < lo) or np.any(u > hi):
            raise ConfigurationError(f"u outside tabulated range [{lo}, {hi}]")

    def f(self, u):
        u = np.asarray(u, dtype=float)
        self._check(u)
        out = self._f(u)
        return out if np.ndim(out) else float(out)

    def F(self, u):
        u = np.asarray(u, dtype=float)
        self._check(u)
        out = self._F(u)
        return out if np.ndim(out) else float(out)

    def metadata(self) -> dict:
        return {"family": self.family, "source": self.source, "p": self.p, "N": self.N}


def critical_exponent(p: float, N: float) -> float:
    """Sobolev critical exponent ``N p / (N - p)``."""
    return N * p / (N - p)


def make_power_family(m: float, s: float, p: float, N: float) -> PowerNonlinearity:
    """Build the two-power nonlinearity after checking the exponent ordering."""
    m, s, p, N = (float(x) for x in (m, s, p, N))
    for name, val in (("m", m), ("s", s), ("p", p), ("N", N)):
        if not math.isfinite(val):
            raise ConfigurationError(f"{name} must be finite")
    if not N > p:
        raise ConfigurationError(f"need N > p (got N={N}, p={p})")
    if not 1.0 < m:
        raise ConfigurationError(f"need 1 < m (got m={m})")
    if not m < p:
        raise ConfigurationError(f"need m < p (got m={m}, p={p})")
    if not p < s:
        raise ConfigurationError(f"need p < s (got p={p}, s={s})")
    pstar = critical_exponent(p, N)
    if not s < pstar:
        raise ConfigurationError(f"need s < Np/(N-p) = {pstar} (got s={s})")
    return PowerNonlinearity(m=m, s=s, p=p, N=N)


def load_tabulated(path, p: float, N: float) -> TabulatedNonlinearity:
    """Read a two-column CSV ``u,f`` (header row required)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigurationError(f"{path}: empty table")
    header = [h.strip().lower() for h in rows[0]]
    if header[:2] != ["u", "f"]:
        raise ConfigurationError(f"{path}: header must be 'u,f', got {rows[0]!r}")
    try:
        data = np.array([[float(x) for x in row[:2]] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != 2:
        raise ConfigurationError(f"{path}: expected two columns")
    return TabulatedNonlinearity(data[:, 0], data[:, 1], p, N, source=str(path))


# ---------------------------------------------------------------------------
# landmarks


@dataclass(frozen=True)
class Landmarks:
    a_plus: float
    b_minus: float
    a: float
    b: float
    A: float
    B: float
    F_bar: float
    p_star: float
    zeros: tuple = ()

    def as_dict(self) -> dict:
        return {
            "a_plus": self.a_plus, "b_minus": self.b_minus, "a": self.a, "b": self.b,
            "A": self.A, "B": self.B, "F_bar": self.F_bar, "p_star": self.p_star,
            "zeros": list(self.zeros),
        }


def _brent(fun, lo, hi):
    return optimize.brentq(fun, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def _search_grid(nl: Nonlinearity, sign: int, search_max: float, n: int = 6000):
    lo, hi = nl.domain
    limit = min(search_max, hi) if sign > 0 else min(search_max, -lo)
    return sign * np.geomspace(1e-9 * limit if limit < 1 else 1e-9, limit, n)


def _zeros_of_f(nl: Nonlinearity, search_max: float) -> list[float]:
    zeros = [0.0]
    for sign in (1, -1):
        grid = _search_grid(nl, sign, search_max)
        vals = nl.f(grid)
        for i in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
            zeros.append(_brent(nl.f_scalar, grid[i], grid[i + 1]))
        zeros.extend(float(g) for g, fv in zip(grid, vals) if fv == 0.0)
    return sorted(set(zeros))


def _first_local_min(nl: Nonlinearity, stop: float) -> float:
    """First local minimum of ``sign(stop) * f`` moving away from 0 towards ``stop``."""
    sign = 1.0 if stop > 0 else -1.0
    grid = sign * np.geomspace(abs(stop) * 1e-8, abs(stop), 4000)
    vals = sign * nl.f(grid)
    rising = np.nonzero(np.diff(vals) > 0)[0]
    i = int(rising[0]) if len(rising) else len(grid) - 1
    lo, hi = sorted((grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]))
    res = optimize.minimize_scalar(lambda x: sign * nl.f_scalar(x), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-14})
    return float(res.x)


@lru_cache(maxsize=32)
def landmarks(nl: Nonlinearity, search_max: float = 1e6) -> Landmarks:
    """Compute ``a+, b-, a, b, A, B, F_bar`` for ``nl``.

    Raises
    ------
    LandmarkError
        If ``f`` has no positive or negative zero, or ``F`` does not change
        sign beyond them, inside ``[-search_max, search_max]``.
    """
    zeros = _zeros_of_f(nl, search_max)
    pos = [z for z in zeros if z > 0]
    neg = [z for z in zeros if z < 0]
    if not pos or not neg:
        raise LandmarkError("f needs a positive and a negative zero within the search range")
    a_plus, b_minus = max(pos), min(neg)

    def root_of_F(start):
        grid = start * np.geomspace(1.0, search_max / abs(start), 4000)
        lo_dom, hi_dom = nl.domain
        grid = grid[(grid >= lo_dom) & (grid <= hi_dom)]
        vals = nl.F(grid)
        idx = np.nonzero(vals > 0)[0]
        if len(idx) == 0 or idx[0] == 0:
            raise LandmarkError(f"no sign change of F beyond {start}")
        i = idx[0]
        return _brent(nl.F_scalar, grid[i - 1], grid[i])

    A = root_of_F(a_plus)
    B = root_of_F(b_minus)

    grid = np.linspace(B, A, 20001)
    vals = nl.F(grid)
    i = int(np.argmin(vals))
    res = optimize.minimize_scalar(nl.F_scalar, bounds=(grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]),
                                   method="bounded", options={"xatol": 1e-14})
    candidates = [float(res.fun)] + [nl.F_scalar(z) for z in zeros if B <= z <= A]
    F_bar = -min(candidates)
    if not F_bar > 0:
        raise LandmarkError("min of F over [B, A] is not negative")

    if isinstance(nl, PowerNonlinearity):
        cf = nl.closed_form()
        a, b = cf["a"], cf["b"]
    else:
        a = _first_local_min(nl, a_plus)
        b = _first_local_min(nl, b_minus)
    return Landmarks(
        a_plus=a_plus, b_minus=b_minus, a=a, b=b, A=A, B=B, F_bar=F_bar,
        p_star=critical_exponent(nl.p, nl.N), zeros=tuple(zeros),
    )


# ---------------------------------------------------------------------------
# hypotheses


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    witness: float | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "witness": self.witness, "detail": self.detail}


def _log_slope(g, x1, x2):
    return math.log(abs(g(x2)) / abs(g(x1))) / math.log(abs(x2 / x1))


def verify_hypotheses(nl: Nonlinearity, p: float | None = None, N: float | None = None,
                      theta_growth: float = 0.9, u_max: float = 1e6,
                      ratio_bound: float = 1e3) -> dict[str, HypothesisCheck]:
    """Grid-based witnesses for the structural hypotheses on ``f``.

    Keys: ``f_regular``, ``f_decreasing``, ``integrable_near_zero``,
    ``F_negative_at_zeros``, ``superlinear`` and ``subcritical``.  Failures
    are entries, not errors.  For ``superlinear`` the condition
    ``liminf f/phi_p = inf`` is replaced by "the ratio ``f(u)/phi_p(u)`` is
    increasing on the tail of a geometric grid and exceeds ``ratio_bound``
    before ``u_max``".
    """
    p = nl.p if p is None else float(p)
    N = nl.N if N is None else float(N)
    if not 0.0 < theta_growth < 1.0:
        raise ConfigurationError("theta_growth must lie in (0, 1)")
    report: dict[str, HypothesisCheck] = {}
    lo, hi = nl.domain
    u_hi = min(u_max, hi)
    u_lo = max(-u_max, lo)

    grid = np.concatenate((-np.geomspace(-u_lo, 1e-8, 3000), [0.0], np.geomspace(1e-8, u_hi, 3000)))
    fv = nl.f(grid)
    ok1 = bool(np.all(np.isfinite(fv)) and nl.f_scalar(0.0) == 0.0)
    report["f_regular"] = HypothesisCheck("f_regular", ok1, float(nl.f_scalar(0.0)), "f finite on grid and f(0) = 0")

    try:
        lm = landmarks(nl, search_max=max(abs(u_lo), u_hi))
    except LandmarkError as exc:
        report["f_decreasing"] = HypothesisCheck("f_decreasing", False, None, f"landmarks unavailable: {exc}")
        lm = None
    if lm is not None:
        sub = np.linspace(lm.b, lm.a, 4001)
        ok2 = bool(np.all(np.diff(nl.f(sub)) < 0))
        report["f_decreasing"] = HypothesisCheck("f_decreasing", ok2, lm.a, f"f strictly decreasing on ({lm.b:.6g}, {lm.a:.6g})")

    # |F(u)| ~ c |u|^alpha near 0, integrable iff alpha / p < 1
    if isinstance(nl, PowerNonlinearity):
        alpha = nl.m
    else:
        eps = min(1e-6, 1e-3 * min(hi, -lo))
        alpha = min(_log_slope(nl.F_scalar, eps, 10 * eps), _log_slope(nl.F_scalar, -eps, -10 * eps))
    ok3 = alpha / p < 1.0
    detail = f"|F|^(-1/p) ~ |u|^(-{alpha / p:.6g}) near 0"
    if lm is not None:
        # interior local maxima of F away from 0: zeros where f goes from + to -
        for z in lm.zeros:
            if z == 0.0:
                continue
            dz = 1e-6 * max(1.0, abs(z))
            if nl.f_scalar(z - dz) > 0 > nl.f_scalar(z + dz):
                beta = min(_log_slope(lambda x: nl.F_scalar(z) - nl.F_scalar(z + x), dz, 10 * dz),
                           _log_slope(lambda x: nl.F_scalar(z) - nl.F_scalar(z + x), -dz, -10 * dz))
                ok3 = ok3 and beta / p < 1.0
                detail += f"; local max of F at {z:.6g} with exponent {beta:.6g}"
    report["integrable_near_zero"] = HypothesisCheck("integrable_near_zero", bool(ok3), alpha / p, detail)

    if lm is not None:
        worst = max(nl.F_scalar(z) for z in lm.zeros if z != 0.0)
        report["F_negative_at_zeros"] = HypothesisCheck("F_negative_at_zeros", worst < 0, worst, "max of F over nonzero zeros of f")

    ok5 = True
    witness5 = math.inf
    for sign, bound in ((1.0, u_hi), (-1.0, -u_lo)):
        g = np.geomspace(max(1.0, lm.A if lm else 1.0) * 1.01 if lm else 1.0, bound, 400)
        ratio = nl.f(sign * g) / (sign * g ** (p - 1.0))
        ok5 = ok5 and bool(np.all(np.diff(ratio) > 0) and ratio[-1] > ratio_bound)
        witness5 = min(witness5, float(ratio[-1]))
    report["superlinear"] = HypothesisCheck("superlinear", ok5, witness5,
                                   f"f/phi_p increasing and > {ratio_bound:g} before |u| = {u_max:g}")

    target = (N - p) / (N * p)
    if isinstance(nl, PowerNonlinearity):
        lim = theta_growth ** nl.s / nl.s
    else:
        xs = np.concatenate((np.geomspace(0.5 * u_hi, u_hi, 20), -np.geomspace(0.5 * -u_lo, -u_lo, 20)))
        lim = float(np.min(nl.F(theta_growth * xs) / (xs * nl.f(xs))))
    report["subcritical"] = HypothesisCheck("subcritical", lim > target, lim, f"liminf F(theta x)/(x f(x)) vs (N-p)/(Np) = {target:.6g}")
    return report


# ---------------------------------------------------------------------------
# rotation certificate


@dataclass(frozen=True)
class RotationCertificate:
    omega: float
    s0: float
    r0: float
    sigma0: float
    f_sup: float = field(default=math.nan)

    def as_dict(self) -> dict:
        return {"omega": self.omega, "s0": self.s0, "r0": self.r0,
                "sigma0": self.sigma0, "f_sup": self.f_sup}


def rotation_constants(nl: Nonlinearity, p: float | None = None, N: float | None = None,
                       omega: float = 1.0 / 16.0, s_cap: float = 1e8,
                       safety: float = 1.05) -> RotationCertificate:
    """Constants ``(s0, r0, sigma0)`` under which the phase angle turns at rate > omega.

    ``s0`` is the last point (over both signs) where ``|f(s)| < 4 omega |s|^(p-1)``,
    refined by a root solve and inflated by ``safety``.
    """
    p = nl.p if p is None else float(p)
    N = nl.N if N is None else float(N)
    if not 0.0 < omega < 0.125:
        raise ConfigurationError(f"omega must lie in (0, 1/8), got {omega}")
    q = p / (p - 1.0)

    def gap(s):
        return abs(nl.f_scalar(s)) - 4.0 * omega * abs(s) ** (p - 1.0)

    lo, hi = nl.domain
    s_root = 0.0
    for sign in (1.0, -1.0):
        bound = min(s_cap, hi if sign > 0 else -lo)
        grid = sign * np.geomspace(1e-8, bound, 8000)
        vals = np.abs(nl.f(grid)) - 4.0 * omega * np.abs(grid) ** (p - 1.0)
        bad = np.nonzero(vals < 0)[0]
        if len(bad) == 0:
            continue
        i = int(bad[-1])
        if i == len(grid) - 1:
            raise HypothesisError(f"|f(s)| >= 4 omega |s|^(p-1) fails up to |s| = {bound:g}")
        s_root = max(s_root, abs(_brent(gap, grid[i], grid[i + 1])))
    s0 = safety * s_root if s_root > 0 else 1e-8

    check = np.geomspace(s0, 1e3 * s0, 1000)
    for sign in (1.0, -1.0):
        pts = sign * check
        if nl.domain != (-math.inf, math.inf):
            pts = pts[(pts >= lo) & (pts <= hi)]
        if np.any(np.abs(nl.f(pts)) < 4.0 * omega * np.abs(pts) ** (p - 1.0)):
            raise HypothesisError("rotation inequality violated above s0 on the check grid")

    fine = np.linspace(-s0, s0, 40001)
    absf = np.abs(nl.f(fine))
    j = int(np.argmax(absf))
    res = optimize.minimize_scalar(lambda x: -abs(nl.f_scalar(x)),
                                   bounds=(fine[max(j - 1, 0)], fine[min(j + 1, len(fine) - 1)]),
                                   method="bounded", options={"xatol": 1e-14})
    f_sup = max(float(absf[j]), -float(res.fun))
    r0 = 2.0 * (N - 1.0) / (omega * (p - 1.0) ** (1.0 / q))
    sigma0 = max(2.0 ** (1.0 / p) * s0, (4.0 * f_sup) ** (1.0 / (p - 1.0)))
    return RotationCertificate(omega=omega, s0=s0, r0=r0, sigma0=sigma0, f_sup=f_sup)
