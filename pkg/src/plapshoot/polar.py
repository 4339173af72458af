"""Generalized polar angle along a trajectory, node counting and rotation checks.

The angle is tracked two ways.  The primary track inverts ``(u, v)`` pointwise
and unwraps by continuity (period ``2 pi_p``).  The check track integrates

    theta' = -(1/rho) [ (p/q) |v|^q + u f(u) + (N - 1) u v / r ]

between samples with Gauss-Legendre on the dense output.  The two must agree;
disagreements are attached to the trace as warnings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .ivp import PhaseState, Trajectory, energy
from .model import Nonlinearity, RotationCertificate
from .ptrig import cartesian_to_polar, half_period

__all__ = [
    "AngularTrace",
    "track_angle",
    "node_count",
    "node_counts",
    "check_rotation_bound",
    "energy_rho_link",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
# closed-interval slack when comparing theta against a zero level
NODE_SLACK = 1e-9


@dataclass(frozen=True)
class AngularTrace:
    """Unwrapped angle samples; ``theta_quad`` is the quadrature cross-check."""

    r: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    theta_quad: np.ndarray
    p: float
    warnings: tuple = ()
    omega_check: tuple = field(default=())

    @property
    def pi_p(self) -> float:
        return half_period(self.p)

    def theta_at(self, r):
        return np.interp(r, self.r, self.theta)


def _rho(u, v, p):
    q = p / (p - 1.0)
    return np.abs(u) ** p + (p / q) * np.abs(v) ** q


def _theta_rate(r, u, v, nl, p, N):
    q = p / (p - 1.0)
    rho = _rho(u, v, p)
    return -((p / q) * np.abs(v) ** q + u * nl.f(u) + (N - 1.0) * u * v / r) / rho


def _interval_integrals(traj, nl, p, N, a0, b0, panels):
    """Composite Gauss-Legendre integral of the angle rate over each ``[a0, b0]``."""
    owner = np.repeat(np.arange(len(a0)), panels)
    frac = np.concatenate([np.arange(k) / k for k in panels])
    span = (b0 - a0)[owner]
    width = span / panels[owner]
    mid = a0[owner] + frac * span + 0.5 * width
    nodes = (mid[:, None] + 0.5 * width[:, None] * _GL_X).ravel()
    un, vn = traj.dense_eval(nodes)
    rate = _theta_rate(nodes, un, vn, nl, p, N).reshape(len(mid), -1)
    return np.bincount(owner, weights=0.5 * width * (rate @ _GL_W), minlength=len(a0))


def _refine(traj: Trajectory, r: np.ndarray, p: float, pi_p: float, max_rounds: int = 6):
    """Insert dense samples wherever the wrapped angle jumps by more than pi_p / 4."""
    u, v = traj.dense_eval(r)
    for _ in range(max_rounds):
        theta = cartesian_to_polar(u, v, p).theta
        jump = np.abs(np.angle(np.exp(1j * np.pi * np.diff(theta) / pi_p))) * pi_p / np.pi
        bad = np.nonzero(jump > 0.25 * pi_p)[0]
        if len(bad) == 0:
            break
        extra = np.concatenate([np.linspace(r[i], r[i + 1], 9)[1:-1] for i in bad])
        r = np.union1d(r, extra)
        u, v = traj.dense_eval(r)
    return r, u, v


def track_angle(traj: Trajectory, nl: Nonlinearity, p: float | None = None,
                N: float | None = None, rho_floor: float | None = None,
                agree_tol: float = 1e-6) -> AngularTrace:
    """Unwrapped generalized polar angle at the trajectory samples.

    Tracking stops at the first sample with ``rho < rho_floor`` (default
    ``1e-12 lam^p``), where the angle is undefined.  Samples are refined
    with the dense output if consecutive angles are more than a quarter
    period apart.
    """
    p = traj.params.p if p is None else float(p)
    N = traj.params.N if N is None else float(N)
    lam = traj.params.lam
    rho_floor = 1e-12 * lam ** p if rho_floor is None else float(rho_floor)
    pi_p = half_period(p)

    rho_s = _rho(traj.u, traj.v, p)
    if rho_s[0] < rho_floor:
        raise DomainError("rho below rho_floor at the first sample")
    low = np.nonzero(rho_s < rho_floor)[0]
    stop = int(low[0]) if len(low) else len(rho_s)
    r = np.array(traj.r[:stop])
    u = np.array(traj.u[:stop])
    v = np.array(traj.v[:stop])
    if stop > 1:
        r_ref, u_ref, v_ref = _refine(traj, r, p, pi_p)
        if len(r_ref) != len(r):
            # keep exact sample values where they exist (events carry snapped zeros)
            pos = np.searchsorted(r_ref, r)
            u_ref[pos], v_ref[pos] = u, v
            r, u, v = r_ref, u_ref, v_ref

    polar = cartesian_to_polar(u, v, p)
    rho = np.asarray(polar.rho)
    theta = np.unwrap(np.atleast_1d(polar.theta), period=2.0 * pi_p)
    theta = theta - 2.0 * pi_p * np.round(theta[0] / (2.0 * pi_p))

    # quadrature track
    theta_quad = np.empty_like(theta)
    theta_quad[0] = theta[0]
    if len(r) > 1:
        # panels per sample interval grow with the angle swept, then double
        # where a coarser estimate disagrees
        panels = np.clip(np.ceil(np.abs(np.diff(theta)) / 0.02), 1, 256).astype(int)
        steps = _interval_integrals(traj, nl, p, N, r[:-1], r[1:], panels)
        todo = np.arange(len(steps))
        for _ in range(10):
            finer = _interval_integrals(traj, nl, p, N, r[:-1][todo], r[1:][todo], 2 * panels[todo])
            diff = np.abs(finer - steps[todo])
            steps[todo] = finer
            panels[todo] *= 2
            todo = todo[diff > 0.01 * agree_tol / len(steps) ** 0.5]
            if len(todo) == 0:
                break
        theta_quad[1:] = theta[0] + np.cumsum(steps)

    warnings = []
    diff = np.abs(theta - theta_quad)
    if len(diff) and float(diff.max()) > agree_tol:
        i = int(np.argmax(diff))
        warnings.append({"kind": "angle_mismatch", "r": float(r[i]), "difference": float(diff[i])})
    return AngularTrace(r=r, rho=rho, theta=theta, theta_quad=theta_quad, p=p,
                        warnings=tuple(warnings))


def node_count(trace: AngularTrace, r: float) -> int:
    """Nodes on ``(0, r]`` from the angle: ``floor((pi_p/2 - theta(r)) / pi_p)``.

    The interval is closed at ``r`` because event samples carry ``u = 0``
    exactly; ``NODE_SLACK`` absorbs rounding in the angle there.
    """
    if not trace.r[0] <= r <= trace.r[-1]:
        raise DomainError(f"r={r} outside trace range [{trace.r[0]}, {trace.r[-1]}]")
    pi_p = trace.pi_p
    theta = float(np.interp(r, trace.r, trace.theta))
    return int(math.floor((0.5 * pi_p - theta) / pi_p + NODE_SLACK))


def node_counts(trace: AngularTrace) -> np.ndarray:
    """:func:`node_count` at every trace sample."""
    pi_p = trace.pi_p
    return np.floor((0.5 * pi_p - trace.theta) / pi_p + NODE_SLACK).astype(int)


def check_rotation_bound(trace: AngularTrace, cert: RotationCertificate,
                         slack: float = 1e-4) -> list:
    """Samples in the certified region where ``theta' >= -omega + slack``.

    The derivative is a centered finite difference of the unwrapped trace.
    """
    if len(trace.r) < 3:
        return []
    dtheta = np.gradient(trace.theta, trace.r)
    region = (trace.r >= cert.r0) & (trace.rho >= cert.sigma0 ** trace.p)
    bad = np.nonzero(region & (dtheta >= -cert.omega + slack))[0]
    return [{"r": float(trace.r[i]), "rho": float(trace.rho[i]),
             "theta_prime": float(dtheta[i]), "bound": -cert.omega + slack} for i in bad]


def energy_rho_link(state: PhaseState, nl: Nonlinearity, p: float):
    """Return ``(E, rho)`` for one state."""
    E = energy(state, nl, p)
    rho = _rho(np.asarray(state.u, dtype=float), np.asarray(state.v, dtype=float), p)
    return E, (rho if np.ndim(rho) else float(rho))
