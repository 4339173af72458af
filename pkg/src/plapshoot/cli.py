"""Command-line interface.

Every run resolves a :class:`RunConfig` from an optional ``key = value``
file and command-line flags (flags win), writes its artifacts into the
output directory and finishes with ``manifest.json``.  Artifact file names
carry a short hash of the resolved configuration.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 search failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bounds import barrier, default_r_max, measure_S, size_bounds
from .errors import (BarrierError, ConfigurationError, ContractError, DomainError,
                     HypothesisError, IntegrationError, LandmarkError, SearchError,
                     StartupError)
from .ivp import PhaseState, ProblemParams, integrate, write_events_json, write_trajectory_csv
from .model import (load_tabulated, landmarks, make_power_family, rotation_constants,
                    verify_hypotheses)
from .polar import check_rotation_bound, energy_rho_link, track_angle
from .ptrig import PolarState, half_period, polar_to_cartesian
from .shoot import asymptotic_limit, classify, extend_compact_support, find_lambda_k, sweep

__all__ = ["RunConfig", "load_config", "run", "main"]

ENV_OUT = "PLAPSHOOT_OUT"
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_SEARCH = 0, 2, 3, 4
COMMANDS = ("solve", "sweep", "find-nodes", "certify-rotation", "barrier", "size-bounds", "limits")


@dataclass
class RunConfig:
    command: str = "solve"
    N: float = 3.0
    p: float = 2.0
    m: float | None = 1.5
    s: float | None = 4.0
    table: str | None = None
    lam: float | None = None
    lambda_grid: list | None = None
    k: int | None = None
    rel_tol: float = 1e-12
    abs_tol: float = 1e-13
    event_tol: float = 1e-10
    double_zero_tol: float = 1e-7
    lambda_tol: float | None = None
    omega: float = 1.0 / 16.0
    theta_growth: float = 0.904
    r_max: float | None = None
    out_dir: str | None = None
    seed: int = 0

    def canonical(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out_dir")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


# config keys as written in files; "lambda" maps to the ``lam`` field
_KEYS = {f.name: f.name for f in dataclasses.fields(RunConfig)}
_KEYS.pop("lam")
_KEYS["lambda"] = "lam"
_FLOATS = {"N", "p", "m", "s", "lam", "rel_tol", "abs_tol", "event_tol", "double_zero_tol",
           "lambda_tol", "omega", "theta_growth", "r_max"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if raw.lower() in ("", "none", "null"):
        return None
    try:
        if key in _FLOATS:
            return float(raw)
        if key in ("k", "seed"):
            return int(raw)
        if key == "lambda_grid":
            return [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw


def load_config(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment.  Unknown keys raise."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (x.strip() for x in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        out[_KEYS[key]] = _parse_value(_KEYS[key], raw)
    return out


def _validate(cfg: RunConfig):
    if cfg.command not in COMMANDS:
        raise ConfigurationError(f"unknown command {cfg.command!r}")
    if cfg.table is None and (cfg.m is None or cfg.s is None):
        raise ConfigurationError("give either m and s or a table path")
    for name in ("rel_tol", "abs_tol", "event_tol", "double_zero_tol"):
        if not getattr(cfg, name) > 0:
            raise ConfigurationError(f"{name} must be > 0")
    if not 0.0 < cfg.theta_growth < 1.0:
        raise ConfigurationError("theta_growth must lie in (0, 1)")
    if not 0.0 < cfg.omega < 0.125:
        raise ConfigurationError("omega must lie in (0, 1/8)")
    if cfg.command in ("solve", "limits") and cfg.lam is None:
        raise ConfigurationError(f"{cfg.command} needs lambda")
    if cfg.command == "sweep" and not cfg.lambda_grid:
        raise ConfigurationError("sweep needs lambda_grid")
    if cfg.command == "find-nodes" and (cfg.k is None or cfg.k < 0):
        raise ConfigurationError("find-nodes needs k >= 0")
    if cfg.command == "size-bounds" and cfg.lam is None and not cfg.lambda_grid:
        raise ConfigurationError("size-bounds needs lambda or lambda_grid")


# ---------------------------------------------------------------------------
# output helpers


def _clean(obj):
    """JSON-safe copy: non-finite floats become None, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Writer:
    def __init__(self, out_dir: Path, chash: str):
        self.out = out_dir
        self.tag = chash[:12]
        self.hash = chash
        self.files: list[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, stem: str, ext: str) -> Path:
        name = f"{stem}_{self.tag}.{ext}"
        self.files.append(name)
        return self.out / name

    def json(self, stem: str, obj) -> Path:
        payload = {"config_hash": self.hash, **_clean(obj)} if isinstance(obj, dict) else \
            {"config_hash": self.hash, "records": _clean(obj)}
        target = self.path(stem, "json")
        tmp = target.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, target)
        return target

    def csv(self, stem: str, header, rows) -> Path:
        target = self.path(stem, "csv")
        tmp = target.with_suffix(".csv.tmp")
        with tmp.open("w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join("" if x is None else repr(float(x)) if isinstance(x, (float, np.floating))
                                  else str(x) for x in row) + "\n")
        os.replace(tmp, target)
        return target


def _nonlinearity(cfg: RunConfig):
    if cfg.table is not None:
        return load_tabulated(cfg.table, cfg.p, cfg.N)
    return make_power_family(cfg.m, cfg.s, cfg.p, cfg.N)


def _params(cfg: RunConfig, lam: float = 1.0, r_max=None) -> ProblemParams:
    return ProblemParams(N=cfg.N, p=cfg.p, lam=lam, r_max=cfg.r_max if r_max is None else r_max,
                         rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, event_tol=cfg.event_tol,
                         double_zero_tol=cfg.double_zero_tol)


def _trajectory_artifacts(w: _Writer, stem: str, traj, nl):
    trace = track_angle(traj, nl)
    inside = traj.r <= trace.r[-1]
    theta = np.where(inside, np.interp(traj.r, trace.r, trace.theta), np.nan)
    target = w.path(f"{stem}_trajectory", "csv")
    write_trajectory_csv(target, traj, nl, theta=theta)
    target = w.path(f"{stem}_events", "json")
    write_events_json(target, traj)
    return trace


# ---------------------------------------------------------------------------
# commands


def _cmd_solve(cfg, nl, w):
    lm = landmarks(nl)
    r_max = cfg.r_max or default_r_max(cfg.lam, nl, cfg.theta_growth, lm=lm)
    c = classify(cfg.lam, _params(cfg, cfg.lam, r_max), nl, lm=lm)
    trace = _trajectory_artifacts(w, "solve", c.trajectory, nl)
    w.json("solve_summary", {
        "lambda": cfg.lam, "kind": c.kind.value, "k": c.k, "r_energy_zero": c.r_energy_zero,
        "r_support": c.r_support, "stop_reason": c.trajectory.stop_reason.value,
        "r_end": c.trajectory.r_end, "note": c.note, "angle_warnings": list(trace.warnings),
    })


def _cmd_sweep(cfg, nl, w):
    res = sweep(cfg.lambda_grid, _params(cfg), nl, refine_rounds=0)
    rows = [(r["lambda"], r["kind"], r["k"], r["r_energy_zero"], r["r_support"]) for r in res["rows"]]
    w.csv("sweep", ["lambda", "kind", "k", "r_energy_zero", "r_support"], rows)
    w.json("sweep_flags", {"flagged": [list(x) for x in res["flagged"]]})


def _cmd_find_nodes(cfg, nl, w):
    sol = find_lambda_k(cfg.k, _params(cfg), nl, lambda_tol=cfg.lambda_tol)
    if not sol.near_support:
        sol = extend_compact_support(sol)
    _trajectory_artifacts(w, "node_solution", sol.trajectory, nl)
    w.json("node_solution", sol.as_record())
    if sol.near_support:
        raise SearchError(f"no double zero within tolerance for k={cfg.k}")


def _cmd_certify(cfg, nl, w):
    cert = rotation_constants(nl, cfg.p, cfg.N, cfg.omega)
    record = cert.as_dict()
    rng = np.random.default_rng(cfg.seed)
    # sampled energy on the sphere rho = sigma0^p and beyond
    angles = rng.uniform(0.0, 2 * half_period(cfg.p), 1000)
    radii = cert.sigma0 ** cfg.p * (1.0 + rng.exponential(1.0, 1000))
    u, v = polar_to_cartesian(PolarState(radii, angles), cfg.p)
    E, _ = energy_rho_link(PhaseState(0.0, u, v), nl, cfg.p)
    record["sampled_min_energy"] = float(np.min(E))
    if cfg.lam is not None:
        r_max = cfg.r_max or cert.r0 + 10.0
        traj = integrate(_params(cfg, cfg.lam, r_max), nl, detect_double_zero=False,
                         stop_on_trapped=False)
        trace = track_angle(traj, nl)
        viol = check_rotation_bound(trace, cert)
        region = (trace.r >= cert.r0) & (trace.rho >= cert.sigma0 ** cfg.p)
        record.update(lambda_checked=cfg.lam, certified_samples=int(region.sum()),
                      violations=viol)
    w.json("rotation_certificate", record)


def _cmd_barrier(cfg, nl, w):
    bp = barrier(nl, cfg.p)
    w.json("barrier", {"A_time": bp.A_time, "B_time": bp.B_time, "a": bp.a, "b": bp.b,
                       "refinement_change": bp.refinement_change})
    w.csv("barrier_profile", ["r", "u"], zip(bp.r_nodes, bp.u_nodes))


def _cmd_size(cfg, nl, w):
    lams = cfg.lambda_grid or [cfg.lam]
    lm = landmarks(nl)
    reports = []
    for lam in lams:
        sb = size_bounds(lam, cfg.theta_growth, nl, cfg.p, cfg.N, lm=lm)
        r_max = cfg.r_max or default_r_max(lam, nl, cfg.theta_growth, lm=lm)
        traj = integrate(_params(cfg, lam, r_max), nl)
        S = measure_S(traj, cfg.theta_growth)
        r0 = traj.first_energy_zero()
        ok = sb.S_lo <= S <= sb.S_hi
        if r0 is not None and math.isfinite(sb.r_support_lo):
            ok = ok and r0 >= sb.r_support_lo
        reports.append({"lambda": lam, "S_lo": sb.S_lo, "S_measured": S, "S_hi": sb.S_hi,
                        "r_support_lo": sb.r_support_lo, "r_energy_zero_measured": r0,
                        "r_support_measured": None, "constant_chain": sb.chain, "pass": ok})
    w.json("size_bounds", {"reports": reports})


def _cmd_limits(cfg, nl, w):
    r_max = cfg.r_max or 1e3
    traj = integrate(_params(cfg, cfg.lam, r_max), nl, detect_double_zero=True,
                     stop_on_trapped=False)
    w.json("limits", asymptotic_limit(traj, nl))


_DISPATCH = {
    "solve": _cmd_solve, "sweep": _cmd_sweep, "find-nodes": _cmd_find_nodes,
    "certify-rotation": _cmd_certify, "barrier": _cmd_barrier, "size-bounds": _cmd_size,
    "limits": _cmd_limits,
}


def run(cfg: RunConfig) -> int:
    """Validate, dispatch and write artifacts plus ``manifest.json``; return the exit code."""
    t0 = time.perf_counter()
    try:
        _validate(cfg)
        nl = _nonlinearity(cfg)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(cfg.out_dir or os.environ.get(ENV_OUT, "plapshoot-out"))
    chash = cfg.config_hash()
    w = _Writer(out, chash)
    status, message = EXIT_OK, None
    try:
        _DISPATCH[cfg.command](cfg, nl, w)
    except (ConfigurationError, DomainError) as exc:
        status, message = EXIT_INVALID, str(exc)
    except SearchError as exc:
        status, message = EXIT_SEARCH, str(exc)
    except IntegrationError as exc:
        status, message = EXIT_NUMERICAL, str(exc)
        if exc.trajectory is not None:
            write_trajectory_csv(w.path("partial_trajectory", "csv"), exc.trajectory, nl)
    except (StartupError, BarrierError, LandmarkError, HypothesisError, ContractError) as exc:
        status, message = EXIT_NUMERICAL, str(exc)
    if message:
        print(f"error: {message}", file=sys.stderr)
    manifest = {
        "config": cfg.canonical(), "config_hash": chash, "artifacts": w.files,
        "exit_status": status, "error": message,
        "versions": {"plapshoot": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "hypotheses": {k: v.as_dict() for k, v in
                       verify_hypotheses(nl, cfg.p, cfg.N, cfg.theta_growth).items()}
        if cfg.table is None else None,
        "wall_time_s": time.perf_counter() - t0,
    }
    (out / "manifest.json").write_text(json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n")
    return status


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("problem")
    g.add_argument("--config", help="key = value configuration file")
    g.add_argument("--N", type=float)
    g.add_argument("--p", type=float)
    g.add_argument("--m", type=float)
    g.add_argument("--s", type=float)
    g.add_argument("--table", help="CSV with header 'u,f' for a tabulated nonlinearity")
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--lambda-grid", dest="lambda_grid",
                   type=lambda x: _parse_value("lambda_grid", x), help="comma-separated values")
    g.add_argument("--k", type=int)
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--abs-tol", dest="abs_tol", type=float)
    g.add_argument("--event-tol", dest="event_tol", type=float)
    g.add_argument("--double-zero-tol", dest="double_zero_tol", type=float)
    g.add_argument("--lambda-tol", dest="lambda_tol", type=float)
    g.add_argument("--omega", type=float)
    g.add_argument("--theta-growth", dest="theta_growth", type=float)
    g.add_argument("--r-max", dest="r_max", type=float)
    g.add_argument("--out", dest="out_dir", help=f"output directory (default ${ENV_OUT} or ./plapshoot-out)")
    g.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(prog="plapshoot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "integrate and classify one shot",
        "sweep": "classify a grid of shots",
        "find-nodes": "locate the compactly supported solution with k nodes",
        "certify-rotation": "rotation constants, optionally checked on one run",
        "barrier": "barrier times and profile",
        "size-bounds": "support-size bracket versus measurement",
        "limits": "long-run tail averages",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def config_from_args(argv=None) -> RunConfig:
    args = _build_parser().parse_args(argv)
    values = {}
    if args.config:
        values.update(load_config(args.config))
    for key, val in vars(args).items():
        if key in ("config", "command") or val is None:
            continue
        values[key] = val
    values["command"] = args.command
    return RunConfig(**values)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
