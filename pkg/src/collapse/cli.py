"""``collapse`` command line: decomposition audits, flow runs and closed-form comparisons.

Usage::

    collapse {decompose,flow,closedform,compare} [--config FILE] [--set KEY=VALUE ...] --out DIR

Exit status: 0 success, 1 tolerance violation, 2 invalid configuration,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .classifier import extend, ls_classifier_extended
from .closed_form import asymptote, integration_constant, limit_snr, omega_at
from .decomposition import decompose
from .errors import CollapseError, InvalidInputError
from .flow import FlowConfig, simulate
from .metrics import etf_certificate, nc_report
from .model import ProblemDims, features_with_snr
from .snr import align_features, snr_matrix, snr_svd

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULTS = {
    "C": "5",
    "N": "8",
    "P": "",
    "seed": "0",
    "lambda": "0",
    "omega0": "",
    "step_size": "1e-3",
    "horizon": "50",
    "record_every": "1000",
    "realign_every": "",
    "method": "discrete_renorm",
    "t_max": "1e7",
    "t_points": "15",
    "workers": "1",
    "tol.identity": "1e-10",
    "tol.compare": "1e-2",
    "tol.drift": "1e-2",
    "tol.manifold": "1e-9",
    "tol.residual": "1e-12",
    "tol.etf": "1e-9",
}


class ConfigError(InvalidInputError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dims: ProblemDims
    seed: int
    lam: float
    flow: FlowConfig
    output_dir: Path
    omega0: tuple
    t_max: float
    t_points: int
    workers: int
    tolerances: dict = field(default_factory=dict)


def parse_config_text(text):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _number(raw, key, kind):
    try:
        value = kind(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from exc
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return value


def build_config(values, out_dir):
    unknown = sorted(set(values) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    v = {**DEFAULTS, **values}
    if os.environ.get("COLLAPSE_SEED"):
        v["seed"] = os.environ["COLLAPSE_SEED"]
    C = _number(v["C"], "C", int)
    N = _number(v["N"], "N", int)
    P = _number(v["P"], "P", int) if v["P"] else C
    try:
        dims = ProblemDims(C, N, P)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    if v["omega0"]:
        omega0 = tuple(_number(s, "omega0", float) for s in v["omega0"].split(","))
    else:
        omega0 = tuple(np.linspace(2.0, 0.5, C - 1).tolist()) if C > 2 else (1.0,)
    if any(w <= 0 for w in omega0):
        raise ConfigError("omega0 entries must be positive")
    lam = _number(v["lambda"], "lambda", float)
    if lam < 0:
        raise ConfigError("lambda must be nonnegative")
    tolerances = {k[4:]: _number(s, k, float) for k, s in v.items() if k.startswith("tol.")}
    if any(t <= 0 for t in tolerances.values()):
        raise ConfigError("tolerances must be positive")
    try:
        flow = FlowConfig(
            step_size=_number(v["step_size"], "step_size", float),
            horizon=_number(v["horizon"], "horizon", float),
            record_every=_number(v["record_every"], "record_every", int),
            realign_every=_number(v["realign_every"], "realign_every", int)
            if v["realign_every"]
            else None,
            method=v["method"],
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    t_points = _number(v["t_points"], "t_points", int)
    workers = _number(v["workers"], "workers", int)
    t_max = _number(v["t_max"], "t_max", float)
    if t_points < 1 or workers < 1 or t_max <= 0:
        raise ConfigError("t_points and workers must be >= 1 and t_max > 0")
    return ExperimentConfig(
        dims=dims,
        seed=_number(v["seed"], "seed", int),
        lam=lam,
        flow=flow,
        output_dir=Path(out_dir),
        omega0=omega0,
        t_max=t_max,
        t_points=t_points,
        workers=workers,
        tolerances=tolerances,
    )


def _flow_spectrum(cfg):
    if len(cfg.omega0) != cfg.dims.C - 1:
        raise ConfigError(f"flow commands need C-1={cfg.dims.C - 1} omega0 values")
    return np.array(cfg.omega0)


def _initial_state(cfg):
    H = features_with_snr(cfg.dims, _flow_spectrum(cfg), cfg.seed)
    return align_features(H)


def _run_flow(job):
    state, flow = job
    return simulate(state, flow)


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _write_summary(cfg, summary):
    path = cfg.output_dir / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="ascii")


def cmd_decompose(cfg):
    """Loss breakdown along a simulated flow with the least-squares classifier."""
    traj = simulate(_initial_state(cfg), cfg.flow)
    rows = []
    for state in traj.states:
        Ht = extend(state.features())
        Wt = ls_classifier_extended(Ht, cfg.lam)
        rows.append(decompose(Wt, Ht, cfg.lam))
    io.write_losses(cfg.output_dir / "decomposition.csv", traj.times, rows)
    worst = max(r.identity_residual() for r in rows)
    nc23_first = rows[1].nc23_part / rows[0].nc23_part if len(rows) > 1 else 1.0
    nc1_first = rows[1].nc1_part / rows[0].nc1_part if len(rows) > 1 else 1.0
    tol = cfg.tolerances["identity"]
    summary = {
        "identity_residual_max": worst,
        "perp_max": max(r.perp_part for r in rows),
        "nc23_decays_faster_early": bool(nc23_first < nc1_first),
        "tolerance": tol,
    }
    _write_summary(cfg, summary)
    print(f"identity residual max: {worst:.3e}")
    return EXIT_OK if worst <= tol else EXIT_TOLERANCE


def cmd_flow(cfg):
    """Trajectory and per-snapshot NC measures."""
    traj = simulate(_initial_state(cfg), cfg.flow)
    io.write_trajectory(cfg.output_dir / "trajectory.csv", traj)
    reports = [nc_report(s.features()) for s in traj.states]
    io.write_nc_reports(cfg.output_dir / "nc.csv", traj.times, reports)
    w0, wT = traj.omegas[0], traj.omegas[-1]
    drift = float(traj.drift.max())
    resid = float(traj.manifold_residuals.max())
    summary = {
        "initial_ratio": float(w0.max() / w0.min()),
        "final_ratio": float(wT.max() / wT.min()),
        "drift": drift,
        "manifold_residual_max": resid,
        "final_omegas": wT.tolist(),
    }
    _write_summary(cfg, summary)
    print(f"omega ratio {summary['initial_ratio']:.6g} -> {summary['final_ratio']:.6g}; "
          f"drift {drift:.3e}; manifold residual {resid:.3e}")
    ok = drift <= cfg.tolerances["drift"] and resid <= cfg.tolerances["manifold"]
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_closedform(cfg):
    """Closed-form omega(t) against its quartic-root asymptote on a log grid."""
    C, N = cfg.dims.C, cfg.dims.N
    grid = [0.0, *np.logspace(0.0, math.log10(cfg.t_max), cfg.t_points).tolist()]
    worst = 0.0
    final = []
    for k, w0 in enumerate(cfg.omega0, 1):
        sol = integration_constant(w0, C, N)
        rows = []
        for t in grid:
            w = omega_at(sol, t)
            worst = max(worst, sol.residual(w, t))
            if t > 0:
                asym = asymptote(t, C, N)
                rows.append((t, w, asym, w / asym))
            else:
                rows.append((t, w, math.nan, math.nan))
        final.append(rows[-1][3])
        io.write_rows(cfg.output_dir / f"closedform_{k}.csv", rows, header=io.CLOSED_FORM_HEADER)
    summary = {
        "omega0": list(cfg.omega0),
        "residual_max": worst,
        "final_ratio_to_asymptote": final,
        "t_max": cfg.t_max,
    }
    _write_summary(cfg, summary)
    print(f"implicit-equation residual max: {worst:.3e}")
    return EXIT_OK if worst <= cfg.tolerances["residual"] else EXIT_TOLERANCE


def _relative_errors(traj, C, N):
    sols = [integration_constant(w, C, N) for w in traj.omegas[0]]
    err = np.zeros(len(sols))
    for t, w in zip(traj.times, traj.omegas):
        ref = np.array([omega_at(s, t) for s in sols])
        err = np.maximum(err, np.abs(w - ref) / ref)
    return err


def cmd_compare(cfg):
    """Simulated flow against the closed form, with an eta-halving study."""
    C, N = cfg.dims.C, cfg.dims.N
    x0 = _initial_state(cfg)
    half = FlowConfig(
        cfg.flow.step_size / 2,
        cfg.flow.horizon,
        cfg.flow.record_every * 2,
        cfg.flow.realign_every * 2 if cfg.flow.realign_every else 0,
        cfg.flow.method,
    )
    coarse, fine = _map(_run_flow, [(x0, cfg.flow), (x0, half)], cfg.workers)
    err = _relative_errors(coarse, C, N)
    err_fine = _relative_errors(fine, C, N)
    factor = float(err.max() / err_fine.max()) if err_fine.max() > 0 else math.inf

    target = limit_snr(snr_svd(snr_matrix(x0.features())))
    dist = []
    for s in coarse.states:
        S = snr_matrix(s.features())
        dist.append(float(np.linalg.norm(S / np.linalg.norm(S, 2) - target)))
    S_final = snr_matrix(coarse.final().features())
    cert = etf_certificate(S_final / np.linalg.norm(S_final, 2), cfg.tolerances["etf"])
    summary = {
        "relative_error_per_omega": err.tolist(),
        "relative_error_max": float(err.max()),
        "relative_error_max_half_step": float(err_fine.max()),
        "convergence_factor": factor,
        "limit_distance": dist,
        "limit_distance_strictly_decreasing": bool(np.all(np.diff(dist) < 0)),
        "etf_spread": cert.spread,
        "etf_null_ratio": cert.null_ratio,
        "etf_ones_residual": cert.ones_residual,
        "etf_passed": cert.passed,
    }
    _write_summary(cfg, summary)
    io.write_trajectory(cfg.output_dir / "trajectory.csv", coarse)
    print(f"max relative omega error {err.max():.3e} (half step {err_fine.max():.3e}, "
          f"factor {factor:.3f}); limit distance {dist[0]:.4f} -> {dist[-1]:.4f}")
    return EXIT_OK if err.max() <= cfg.tolerances["compare"] else EXIT_TOLERANCE


COMMANDS = {
    "decompose": cmd_decompose,
    "flow": cmd_flow,
    "closedform": cmd_closedform,
    "compare": cmd_compare,
}


def _parser():
    p = argparse.ArgumentParser(prog="collapse", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="flat key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry (repeatable)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        values = parse_config_text(args.config.read_text()) if args.config else {}
        values.update(parse_config_text("\n".join(args.set)))
        cfg = build_config(values, args.out)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except (InvalidInputError, OSError) as exc:
        print(f"collapse: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"collapse: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CollapseError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"collapse: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
