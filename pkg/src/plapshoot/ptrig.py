"""Generalized trigonometric functions and generalized polar coordinates.

The pair ``(cos_q, sin_q) = (x, y)`` is the solution of

    x' = -phi_q(y),   y' = phi_p(x),   x(0) = 1,  y(0) = 0,

with ``q = p / (p - 1)``.  Along it ``|x|^p / p + |y|^q / q = 1 / p``; the
motion is ``2 pi_p`` periodic, and ``pi_p = pi_q``.

Phase-plane points ``(u, v)`` are written as

    u = rho^(1/p) cos_q(theta),   v = rho^(1/q) sin_q(theta),
    rho = |u|^p + (p/q) |v|^q.

Evaluation works on one quarter period.  That quarter is split at the point
where ``|x|^p = 1/2``.  Before the split, time is tabulated as a function of
``y``; after it, the remaining time is tabulated as a function of ``x``.
Both integrands stay bounded, so composite Gauss-Legendre gives the table to
rounding error.  Inverse lookups use cubic Hermite interpolation with exact
slopes, then two Newton corrections against the same quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DomainError

__all__ = [
    "PExponent",
    "PolarState",
    "conjugate",
    "phi",
    "Phi",
    "half_period",
    "sincos_q",
    "polar_to_cartesian",
    "cartesian_to_polar",
]

TABLE_NODES = 4096
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class PExponent:
    """Exponent ``p > 1`` with its Hoelder conjugate ``q``."""

    p: float

    def __post_init__(self):
        _check_p(self.p)

    @property
    def q(self) -> float:
        return conjugate(self.p)


@dataclass(frozen=True)
class PolarState:
    """Generalized polar coordinates; fields may be scalars or arrays."""

    rho: float | np.ndarray
    theta: float | np.ndarray


def _check_p(p) -> float:
    if isinstance(p, PExponent):
        p = p.p
    p = float(p)
    if not math.isfinite(p) or p <= 1.0:
        raise DomainError(f"exponent p must be finite and > 1, got {p!r}")
    return p


def conjugate(p: float) -> float:
    """Hoelder conjugate ``q = p / (p - 1)``."""
    p = _check_p(p)
    return p / (p - 1.0)


def phi(s, p):
    """Odd power map ``|s|^(p-2) s`` (zero at zero)."""
    s = np.asarray(s, dtype=float)
    out = np.sign(s) * np.abs(s) ** (p - 1.0)
    return out if out.ndim else float(out)


def Phi(s, p):
    """Primitive of :func:`phi`: ``|s|^p / p``."""
    s = np.asarray(s, dtype=float)
    out = np.abs(s) ** p / p
    return out if out.ndim else float(out)


def half_period(p) -> float:
    """Return ``pi_p``, half the period of ``(cos_q, sin_q)``.

    The quarter period is ``int_0^{y_max} dy / (1 - (p/q) y^q)^(1/q)`` with
    ``y_max = (q/p)^(1/q)``.  After scaling ``z = y / y_max`` the integrand
    has an algebraic singularity ``(1 - z)^(-1/q)`` at the right end, which
    QUADPACK's QAWS rule integrates as a weight.
    """
    p = _check_p(p)
    return _half_period(p)


@lru_cache(maxsize=64)
def _half_period(p: float) -> float:
    q = p / (p - 1.0)

    def smooth_part(z):
        if z <= 0.0:
            return 1.0
        one_minus = 1.0 - z
        if one_minus <= 0.0:
            return q ** (-1.0 / q)
        # (1 - z^q) / (1 - z) without cancellation near z = 1
        num = -math.expm1(q * math.log1p(-one_minus))
        return (num / one_minus) ** (-1.0 / q)

    val, _ = integrate.quad(
        smooth_part, 0.0, 1.0, weight="alg", wvar=(0.0, -1.0 / q),
        epsabs=1e-15, epsrel=1e-14, limit=200,
    )
    return 2.0 * (q / p) ** (1.0 / q) * val


class _QuarterTable:
    """Tabulated first quarter period for one exponent ``p``."""

    def __init__(self, p: float, nodes: int = TABLE_NODES):
        q = p / (p - 1.0)
        self.p, self.q = p, q
        self.T = 0.5 * _half_period(p)
        self.y_switch = (0.5 * q / p) ** (1.0 / q)
        self.x_switch = 0.5 ** (1.0 / p)
        self.y_knots = np.linspace(0.0, self.y_switch, nodes + 1)
        self.x_knots = np.linspace(0.0, self.x_switch, nodes + 1)
        self.ty_knots = self._cumulative(self._g_y, self.y_knots)
        self.tx_knots = self._cumulative(self._g_x, self.x_knots)
        # time at which the quarter switches from y-tabulation to x-tabulation
        self.t_switch = self.ty_knots[-1]

    # dt/dy on the first half of the quarter, dt/dx (reversed time) on the second
    def _g_y(self, y):
        return (1.0 - (self.p / self.q) * np.abs(y) ** self.q) ** (-1.0 / self.q)

    def _g_x(self, x):
        return ((self.q / self.p) * (1.0 - np.abs(x) ** self.p)) ** (-1.0 / self.p)

    @staticmethod
    def _panel(g, a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid[..., None] + half[..., None] * _GL_X
        return half * (g(pts) @ _GL_W)

    def _cumulative(self, g, knots):
        pieces = self._panel(g, knots[:-1], knots[1:])
        return np.concatenate(([0.0], np.cumsum(pieces)))

    def _forward(self, g, knots, t_knots, s):
        """Time elapsed to reach coordinate value ``s`` (array)."""
        h = knots[1] - knots[0]
        j = np.clip((s / h).astype(int), 0, len(knots) - 2)
        return t_knots[j] + self._panel(g, knots[j], s)

    def _inverse(self, g, knots, t_knots, t):
        """Coordinate value reached after time ``t`` (array)."""
        j = np.clip(np.searchsorted(t_knots, t, side="right") - 1, 0, len(knots) - 2)
        t0, t1 = t_knots[j], t_knots[j + 1]
        s0, s1 = knots[j], knots[j + 1]
        d0, d1 = 1.0 / g(s0), 1.0 / g(s1)
        dt = t1 - t0
        w = (t - t0) / dt
        h00 = (1 + 2 * w) * (1 - w) ** 2
        h10 = w * (1 - w) ** 2
        h01 = w * w * (3 - 2 * w)
        h11 = w * w * (w - 1)
        s = h00 * s0 + h10 * dt * d0 + h01 * s1 + h11 * dt * d1
        s = np.clip(s, 0.0, knots[-1])
        for _ in range(2):
            resid = t0 + self._panel(g, s0, s) - t
            s = np.clip(s - resid / g(s), 0.0, knots[-1])
        return s

    def first_quarter(self, sigma):
        """``(cos_q, sin_q)`` for ``sigma`` in ``[0, T]``."""
        p, q, T = self.p, self.q, self.T
        sigma = np.clip(sigma, 0.0, T)
        early = sigma <= self.t_switch
        c = np.empty_like(sigma)
        s = np.empty_like(sigma)
        if early.any():
            y = self._inverse(self._g_y, self.y_knots, self.ty_knots, sigma[early])
            s[early] = y
            c[early] = np.maximum(1.0 - (p / q) * y ** q, 0.0) ** (1.0 / p)
        late = ~early
        if late.any():
            tau = np.clip(T - sigma[late], 0.0, self.tx_knots[-1])
            x = self._inverse(self._g_x, self.x_knots, self.tx_knots, tau)
            c[late] = x
            s[late] = np.maximum((q / p) * (1.0 - x ** p), 0.0) ** (1.0 / q)
        return c, s

    def quarter_time(self, ax, ay):
        """Time in ``[0, T]`` at which ``(cos_q, sin_q) = (ax, ay)``, both >= 0."""
        p, q = self.p, self.q
        use_y = (p / q) * ay ** q <= 0.5
        out = np.empty_like(ax)
        if use_y.any():
            y = np.minimum(ay[use_y], self.y_switch)
            out[use_y] = self._forward(self._g_y, self.y_knots, self.ty_knots, y)
        use_x = ~use_y
        if use_x.any():
            x = np.minimum(ax[use_x], self.x_switch)
            out[use_x] = self.T - self._forward(self._g_x, self.x_knots, self.tx_knots, x)
        return out


@lru_cache(maxsize=16)
def _table(p: float) -> _QuarterTable:
    return _QuarterTable(p)


def _unwrap_scalar(a, b, scalar):
    if scalar:
        return float(a[0]), float(b[0])
    return a, b


def sincos_q(t, p):
    """Return ``(sin_q(t), cos_q(t))``; ``t`` may be a scalar or an array."""
    p = _check_p(p)
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if not np.all(np.isfinite(t_arr)):
        raise DomainError("sincos_q requires finite arguments")
    tab = _table(p)
    T = tab.T
    tau = np.mod(t_arr, 4.0 * T)
    quad = np.minimum(np.floor(tau / T).astype(int), 3)
    local = tau - quad * T
    mirrored = (quad == 1) | (quad == 3)
    c, s = tab.first_quarter(np.where(mirrored, T - local, local))
    x = np.where((quad == 0) | (quad == 3), c, -c)
    y = np.where(quad <= 1, s, -s)
    return _unwrap_scalar(y, x, scalar)


def polar_to_cartesian(state: PolarState, p):
    """Map ``(rho, theta)`` to ``(u, v)``."""
    p = _check_p(p)
    q = p / (p - 1.0)
    rho = np.asarray(state.rho, dtype=float)
    if np.any(rho < 0):
        raise DomainError("rho must be non-negative")
    sn, cs = sincos_q(state.theta, p)
    return rho ** (1.0 / p) * cs, rho ** (1.0 / q) * sn


def cartesian_to_polar(u, v, p) -> PolarState:
    """Map ``(u, v)`` to ``(rho, theta)`` with ``theta`` in ``[0, 2 pi_p)``.

    The origin maps to ``rho = 0, theta = 0``.
    """
    p = _check_p(p)
    q = p / (p - 1.0)
    u_arr = np.asarray(u, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    scalar = u_arr.ndim == 0 and v_arr.ndim == 0
    u_arr, v_arr = np.broadcast_arrays(np.atleast_1d(u_arr), np.atleast_1d(v_arr))
    tab = _table(p)
    T = tab.T
    rho = np.abs(u_arr) ** p + (p / q) * np.abs(v_arr) ** q
    theta = np.zeros_like(rho)
    live = rho > 0
    if live.any():
        x = u_arr[live] / rho[live] ** (1.0 / p)
        y = v_arr[live] / rho[live] ** (1.0 / q)
        sigma = tab.quarter_time(np.abs(x), np.abs(y))
        th = np.where(
            (y >= 0) & (x > 0), sigma,
            np.where((y > 0) & (x <= 0), 2 * T - sigma,
                     np.where((y <= 0) & (x < 0), 2 * T + sigma, 4 * T - sigma)),
        )
        theta[live] = np.where(th >= 4 * T, th - 4 * T, th)
    if scalar:
        return PolarState(float(rho[0]), float(theta[0]))
    return PolarState(rho, theta)
