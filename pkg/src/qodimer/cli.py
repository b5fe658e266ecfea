"""Command-line front end: configuration, orchestration and flat-file output.

Subcommands: steady, thresholds, scan, spectrum-analytic, spectrum-sim,
compare.  Options may come from a flat ``key = value`` config file
(``--config``); command-line flags override file values.  Exit codes:
0 success, 1 runtime error, 2 usage/validation error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, asdict, field

import numpy as np

from . import __version__
from .model import (DimerParams, SymmetricSteadyState, drift_residual,
                    effective_detunings, solve_symmetric_steady_states)
from .stability import (PlaneSpec, build_linearized_system, classify_state,
                        critical_pump_threshold, eigen_spectrum,
                        find_threshold_bracket, scan_bifurcation)
from .spectra import (MONOMER_MODES, PAIR_OBSERVABLES, SpectrumSeries,
                      default_omega_grid, dimer_spectrum, monomer_spectrum)
from .sim import SimConfig, simulate_spectrum

__all__ = ["RunConfig", "ReportRecord", "parse_config", "run_command",
           "write_spectrum_csv", "read_spectrum_csv", "compare_series",
           "main"]

COMMANDS = ("steady", "thresholds", "scan", "spectrum-analytic",
            "spectrum-sim", "compare")

_OBSERVABLES = tuple(o.lower() for o in PAIR_OBSERVABLES) + MONOMER_MODES


class UsageError(ValueError):
    """Bad flags/config; maps to exit code 2."""


@dataclass
class RunConfig:
    """Everything one invocation needs, resolved from flags and config file."""

    command: str
    params: DimerParams
    sim: SimConfig | None = None
    branch: str | None = None
    carrier: str = "detected"
    observable: str = "a1b1"
    sign: str = "both"
    omega_max: float = 20.0
    points: int = 512
    out: str | None = None
    seed: int = 0
    pump_ratio: float | None = None
    pump_of: str | None = None
    bracket: tuple[float, float] | None = None
    kind: str = "hopf"
    e_max: float = 40.0
    estimator: str = "linearized"
    segments: int = 16
    taper: str | None = None
    x_axis: str = "delta"
    x_range: tuple[float, float, int] = (-2.0, 3.0, 26)
    y_axis: str = "j1"
    y_range: tuple[float, float, int] = (0.0, 6.0, 25)
    e_points: int = 40


@dataclass
class ReportRecord:
    """Comparison summary; the verdict is recomputable from the numbers."""

    observable: str
    sign: str
    analytic_min: float
    analytic_min_omega: float
    sim_min: float
    sim_min_err: float
    sim_min_omega: float
    dip_bin_distance: int
    fraction_within_3sigma: float
    verdict: str
    metadata: dict = field(default_factory=dict)


def _range_triplet(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected lo:hi:count, got {text!r}")
    return float(parts[0]), float(parts[1]), int(parts[2])


def _bracket_pair(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return float(parts[0]), float(parts[1])


def _add_physics_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override")
    p.add_argument("--gamma", type=float, default=1.0,
                   help="SH/FH loss-rate ratio")
    p.add_argument("--delta", type=float, default=None,
                   help="sets both detunings at once")
    p.add_argument("--delta1", type=float, default=None)
    p.add_argument("--delta2", type=float, default=None)
    p.add_argument("--j1", type=float, default=0.0)
    p.add_argument("--j2", type=float, default=0.0)
    p.add_argument("--pump", type=float, default=None)
    p.add_argument("--pump-ratio", type=float, default=None,
                   help="pump as a fraction of a threshold (see --pump-of)")
    p.add_argument("--pump-of", choices=("sp", "sym"), default=None,
                   help="threshold the ratio refers to: self-pulsing or "
                        "symmetric-to-asymmetric")
    p.add_argument("--bracket", type=_bracket_pair, default=None,
                   help="pump bracket lo:hi for threshold searches")
    p.add_argument("--e-max", type=float, default=40.0,
                   help="upper pump bound for automatic bracket searches")
    p.add_argument("--ns", type=float, default=1e8,
                   help="noise-strength parameter n_s")
    p.add_argument("--branch", choices=("lower", "middle", "upper"),
                   default=None,
                   help="required whenever several branches coexist")
    p.add_argument("--carrier", choices=("detected", "intracavity"),
                   default="detected")
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (falls back to QDIMER_SEED, then 0)")
    p.add_argument("--out", default=None, help="output file path")


def _add_spectrum_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--observable", choices=_OBSERVABLES, default="a1b1")
    p.add_argument("--sign", choices=("plus", "minus", "both"), default="both")
    p.add_argument("--omega-max", type=float, default=20.0)
    p.add_argument("--points", type=int, default=512)


def _add_sim_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--window-steps", type=int, default=40)
    p.add_argument("--lags", type=int, default=512)
    p.add_argument("--lag-stride", type=int, default=1)
    p.add_argument("--total-time", type=float, default=2e4)
    p.add_argument("--transient", type=float, default=100.0)
    p.add_argument("--trajectories", type=int, default=4)
    p.add_argument("--segments", type=int, default=16)
    p.add_argument("--estimator", choices=("linearized", "quadratic"),
                   default="linearized")
    p.add_argument("--taper", choices=("hann",), default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qodimer",
        description="Twin-beam correlation spectra of two coupled chi(2) "
                    "waveguides in a pumped cavity")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("steady", help="symmetric steady-state branches")
    _add_physics_options(p)

    p = sub.add_parser("thresholds", help="instability pump thresholds")
    _add_physics_options(p)
    p.add_argument("--kind", choices=("hopf", "static"), default="hopf")

    p = sub.add_parser("scan", help="bifurcation scan of a parameter plane")
    _add_physics_options(p)
    p.add_argument("--x-axis", default="delta",
                   choices=("delta", "delta1", "delta2", "j1", "j2",
                            "gamma", "pump"))
    p.add_argument("--x-range", type=_range_triplet, default=(-2.0, 3.0, 26))
    p.add_argument("--y-axis", default="j1",
                   choices=("delta", "delta1", "delta2", "j1", "j2",
                            "gamma", "pump"))
    p.add_argument("--y-range", type=_range_triplet, default=(0.0, 6.0, 25))
    p.add_argument("--e-points", type=int, default=40)

    p = sub.add_parser("spectrum-analytic", help="linearized output spectra")
    _add_physics_options(p)
    _add_spectrum_options(p)

    p = sub.add_parser("spectrum-sim", help="truncated-Wigner spectra")
    _add_physics_options(p)
    _add_spectrum_options(p)
    _add_sim_options(p)

    p = sub.add_parser("compare", help="analytic vs simulation report")
    _add_physics_options(p)
    _add_spectrum_options(p)
    _add_sim_options(p)
    return parser


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(
                f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise UsageError(f"{path}:{lineno}: empty key")
        values[key] = value
    return values


def _subparser_for(parser: argparse.ArgumentParser,
                   command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise RuntimeError("no subparsers registered")


def _apply_config_file(parser: argparse.ArgumentParser, command: str,
                       path: str) -> None:
    sp = _subparser_for(parser, command)
    known = {}
    for action in sp._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:]] = action
    values = _load_config_file(path)
    defaults = {}
    for key, raw in values.items():
        if key not in known:
            raise UsageError(f"unknown config key {key!r} for {command!r}")
        action = known[key]
        try:
            if action.type is not None:
                value = action.type(raw)
            else:
                value = raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"config key {key!r}: {exc}") from exc
        if action.choices is not None and value not in action.choices:
            raise UsageError(
                f"config key {key!r}: {value!r} not in {action.choices}")
        defaults[action.dest] = value
    sp.set_defaults(**defaults)


def parse_config(argv: list[str],
                 config_file: str | None = None) -> RunConfig:
    """Resolve flags plus optional config file into a RunConfig.

    Raises UsageError for unknown keys, malformed numbers, missing required
    options or conflicting pump specifications.
    """
    parser = _build_parser()
    command = next((a for a in argv if not a.startswith("-")), None)
    if command is None or command not in COMMANDS:
        raise UsageError(parser.format_usage().rstrip())
    if config_file is None:
        for k, a in enumerate(argv):
            if a == "--config" and k + 1 < len(argv):
                config_file = argv[k + 1]
            elif a.startswith("--config="):
                config_file = a.split("=", 1)[1]
    if config_file is not None:
        _apply_config_file(parser, command, config_file)
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            raise UsageError("argument parsing failed") from exc
        raise

    delta1 = ns.delta1 if ns.delta1 is not None else (ns.delta or 0.0)
    delta2 = ns.delta2 if ns.delta2 is not None else (ns.delta or 0.0)
    if ns.pump is not None and ns.pump_ratio is not None:
        raise UsageError("give either --pump or --pump-ratio, not both")
    if ns.pump_ratio is not None and ns.pump_of is None:
        raise UsageError("--pump-ratio requires --pump-of {sp,sym}")
    pump = ns.pump if ns.pump is not None else 0.0
    try:
        params = DimerParams(gamma=ns.gamma, delta1=delta1, delta2=delta2,
                             j1=ns.j1, j2=ns.j2, pump=pump, ns=ns.ns)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    seed = ns.seed
    if seed is None:
        seed = int(os.environ.get("QDIMER_SEED", "0"))

    sim = None
    if command in ("spectrum-sim", "compare"):
        try:
            sim = SimConfig(dt=ns.dt, window_steps=ns.window_steps,
                            lag_count=ns.lags, lag_stride=ns.lag_stride,
                            total_time=ns.total_time, transient_time=ns.transient,
                            seed=seed, trajectories=ns.trajectories)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    cfg = RunConfig(command=command, params=params, sim=sim,
                    branch=ns.branch, carrier=ns.carrier, seed=seed,
                    out=ns.out, pump_ratio=ns.pump_ratio, pump_of=ns.pump_of,
                    bracket=ns.bracket, e_max=ns.e_max)
    if command == "thresholds":
        cfg.kind = ns.kind
    if command in ("spectrum-analytic", "spectrum-sim", "compare"):
        cfg.observable = ns.observable
        cfg.sign = ns.sign
        cfg.omega_max = ns.omega_max
        cfg.points = ns.points
    if command in ("spectrum-sim", "compare"):
        cfg.estimator = ns.estimator
        cfg.segments = ns.segments
        cfg.taper = ns.taper
    if command == "scan":
        cfg.x_axis, cfg.x_range = ns.x_axis, ns.x_range
        cfg.y_axis, cfg.y_range = ns.y_axis, ns.y_range
        cfg.e_points = ns.e_points
    return cfg


# ---------------------------------------------------------------------------
# output helpers

def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qodimer-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_spectrum_csv(series: SpectrumSeries, path: str,
                       metadata: dict | None = None) -> None:
    """UTF-8 CSV: header, one row per grid point, 17-significant-digit
    floats, LF endings, atomic replace.  A `.meta.json` sidecar carries the
    full parameter set; rows with missing values are skipped and recorded
    there."""
    has_err = series.stat_err is not None
    lines = ["omega,vbar,stat_err" if has_err else "omega,vbar"]
    skipped = []
    for k in range(len(series.omega)):
        v = series.values[k]
        if not math.isfinite(v):
            skipped.append(float(series.omega[k]))
            continue
        row = [_fmt(series.omega[k]), _fmt(v)]
        if has_err:
            row.append(_fmt(series.stat_err[k]))
        lines.append(",".join(row))
    _atomic_write(path, "\n".join(lines) + "\n")
    meta = {
        "observable": series.observable,
        "sign": series.sign,
        "shot_noise": series.shot_noise,
        "skipped_omegas": skipped,
        "series_meta": dict(series.meta),
        "version": __version__,
    }
    if metadata:
        meta.update(metadata)
    _atomic_write(path + ".meta.json",
                  json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def read_spectrum_csv(path: str) -> SpectrumSeries:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = np.array(rows, dtype=float).T if rows else np.empty((len(header), 0))
    has_err = len(header) == 3
    return SpectrumSeries(
        observable="", sign=None, omega=cols[0], values=cols[1],
        shot_noise=math.nan,
        stat_err=cols[2] if has_err else None)


def compare_series(analytic: SpectrumSeries, sim: SpectrumSeries,
                   outlier_fraction: float = 0.01) -> tuple[str, dict]:
    """Verdict on analytic/simulated agreement from the stored numbers.

    Agreement requires at least ``1 - outlier_fraction`` of grid points
    within 3 standard errors (a Gaussian-tail allowance) and the spectrum
    minima in the same or adjacent frequency bins.
    """
    if sim.stat_err is None:
        raise ValueError("simulated series carries no statistical errors")
    if len(analytic.omega) != len(sim.omega) or not np.allclose(
            analytic.omega, sim.omega):
        raise ValueError("series are on different frequency grids")
    err = np.maximum(sim.stat_err, 1e-300)
    dev = np.abs(sim.values - analytic.values) / err
    ok = np.isfinite(analytic.values)
    frac = float(np.mean(dev[ok] <= 3.0))
    k_an = int(np.nanargmin(analytic.values))
    k_sim = int(np.nanargmin(sim.values))
    dip_dist = abs(k_an - k_sim)
    # mirrored dip on an even spectrum is equally valid
    mirror = abs((len(sim.omega) - 1 - k_sim + 1) - k_an)
    dip_dist = min(dip_dist, mirror)
    verdict = ("agree" if frac >= 1.0 - outlier_fraction and dip_dist <= 1
               else "disagree")
    details = {"fraction_within_3sigma": frac, "dip_bin_distance": dip_dist,
               "analytic_min": float(np.nanmin(analytic.values)),
               "sim_min": float(np.nanmin(sim.values))}
    return verdict, details


# ---------------------------------------------------------------------------
# command execution

def _resolve_pump(cfg: RunConfig) -> tuple[DimerParams, dict]:
    """Absolute pump, or ratio times a freshly located threshold."""
    meta: dict = {}
    if cfg.pump_ratio is None:
        return cfg.params, meta
    kind = "hopf" if cfg.pump_of == "sp" else "static"
    branch = cfg.branch or "lower"
    bracket = cfg.bracket
    if bracket is None:
        bracket = find_threshold_bracket(cfg.params, branch, e_max=cfg.e_max)
    e_c = critical_pump_threshold(cfg.params, kind, bracket, branch)
    meta["threshold_kind"] = kind
    meta["threshold_pump"] = e_c
    meta["pump_ratio"] = cfg.pump_ratio
    return cfg.params.with_pump(cfg.pump_ratio * e_c), meta


def _select_state(params: DimerParams,
                  branch: str | None) -> SymmetricSteadyState:
    states = solve_symmetric_steady_states(params)
    if len(states) == 1:
        if branch not in (None, "lower"):
            raise UsageError(
                f"branch {branch!r} requested but only one branch exists")
        return states[0]
    if branch is None:
        raise UsageError(
            f"{len(states)} branches coexist at pump {params.pump:g}; "
            "choose one with --branch {lower,middle,upper}")
    for s in states:
        if s.branch == branch:
            return s
    raise UsageError(f"branch {branch!r} not present (count {len(states)})")


def _sidecar_meta(cfg: RunConfig, params: DimerParams, extra: dict) -> dict:
    return {
        "command": cfg.command,
        "params": asdict(params),
        "branch": cfg.branch,
        "carrier": cfg.carrier,
        "seed": cfg.seed,
        **extra,
    }


def _spectrum_paths(out: str, signs: list[str]) -> dict[str, str]:
    if len(signs) == 1:
        return {signs[0]: out}
    stem, ext = os.path.splitext(out)
    return {s: f"{stem}_{s}{ext or '.csv'}" for s in signs}


def _analytic_series(cfg: RunConfig, params: DimerParams,
                     state: SymmetricSteadyState, sign: str,
                     grid: np.ndarray) -> SpectrumSeries:
    sys_lin = build_linearized_system(state, params)
    if cfg.observable in MONOMER_MODES:
        return monomer_spectrum(sys_lin, state, params, cfg.observable,
                                grid, carrier=cfg.carrier)
    return dimer_spectrum(sys_lin, state, params, cfg.observable.upper(),
                          sign, grid, carrier=cfg.carrier)


def _signs(cfg: RunConfig) -> list[str]:
    if cfg.observable in MONOMER_MODES:
        return ["plus"]
    return ["plus", "minus"] if cfg.sign == "both" else [cfg.sign]


def _cmd_steady(cfg: RunConfig) -> int:
    params, _ = _resolve_pump(cfg)
    states = solve_symmetric_steady_states(params)
    rows = []
    print(f"# pump E = {params.pump:g}, roots = {len(states)}")
    print("branch   I1           I2           phi1        phi2        "
          "residual   stability")
    for s in states:
        cls = classify_state(
            eigen_spectrum(build_linearized_system(s, params)),
            multiplicity=s.multiplicity)
        res = drift_residual(s, params)
        print(f"{s.branch:<8} {s.i1:<12.6g} {s.i2:<12.6g} {s.phi1:<11.6g} "
              f"{s.phi2:<11.6g} {res:<10.2e} {cls.label()}")
        rows.append((s, cls, res))
    if cfg.out:
        lines = ["branch,i1,i2,phi1,phi2,residual,stability"]
        for s, cls, res in rows:
            lines.append(",".join([s.branch, _fmt(s.i1), _fmt(s.i2),
                                   _fmt(s.phi1), _fmt(s.phi2), _fmt(res),
                                   cls.label()]))
        _atomic_write(cfg.out, "\n".join(lines) + "\n")
    return 0


def _cmd_thresholds(cfg: RunConfig) -> int:
    branch = cfg.branch or "lower"
    bracket = cfg.bracket
    if bracket is None:
        bracket = find_threshold_bracket(cfg.params, branch, e_max=cfg.e_max)
    e_c = critical_pump_threshold(cfg.params, cfg.kind, bracket, branch)
    probe = cfg.params.with_pump(e_c + 1e-4)
    spec = eigen_spectrum(build_linearized_system(
        _select_state(probe, branch), probe))
    lam = spec.dominant_value
    print(f"{cfg.kind} threshold on branch {branch!r}: E_c = {e_c:.6f}")
    print(f"critical eigenvalue just above: {lam.real:+.3e} {lam.imag:+.6f}i")
    if cfg.out:
        payload = {"kind": cfg.kind, "branch": branch, "pump": e_c,
                   "critical_eigenvalue": [lam.real, lam.imag],
                   "params": asdict(cfg.params), "version": __version__}
        _atomic_write(cfg.out, json.dumps(payload, indent=2) + "\n")
    return 0


def _cmd_spectrum_analytic(cfg: RunConfig) -> int:
    if not cfg.out:
        raise UsageError("--out is required for spectrum-analytic")
    params, meta = _resolve_pump(cfg)
    state = _select_state(params, cfg.branch)
    grid = default_omega_grid(cfg.omega_max, cfg.points)
    signs = _signs(cfg)
    paths = _spectrum_paths(cfg.out, signs)
    for sign in signs:
        series = _analytic_series(cfg, params, state, sign, grid)
        write_spectrum_csv(series, paths[sign],
                           metadata=_sidecar_meta(cfg, params, meta))
        om, vmin = series.minimum()
        print(f"{series.observable} {sign}: min V = {vmin:.4f} at "
              f"omega = {om:.3f} -> {paths[sign]}")
    return 0


def _cmd_spectrum_sim(cfg: RunConfig) -> int:
    if not cfg.out:
        raise UsageError("--out is required for spectrum-sim")
    params, meta = _resolve_pump(cfg)
    state = _select_state(params, cfg.branch)
    signs = _signs(cfg)
    obs = cfg.observable if cfg.observable in MONOMER_MODES \
        else cfg.observable.upper()
    results = simulate_spectrum(
        params, cfg.sim, state, [(obs, s) for s in signs],
        carrier=cfg.carrier, estimator=cfg.estimator,
        n_segments=cfg.segments, taper=cfg.taper)
    paths = _spectrum_paths(cfg.out, signs)
    for sign in signs:
        series = results[(obs, sign)]
        write_spectrum_csv(series, paths[sign],
                           metadata=_sidecar_meta(cfg, params,
                                                  {**meta,
                                                   "sim": asdict(cfg.sim)}))
        om, vmin = series.minimum()
        print(f"{obs} {sign}: min V = {vmin:.4f} at omega = {om:.3f} "
              f"-> {paths[sign]}")
    return 0


def _cmd_compare(cfg: RunConfig) -> int:
    if not cfg.out:
        raise UsageError("--out is required for compare (report path)")
    params, meta = _resolve_pump(cfg)
    state = _select_state(params, cfg.branch)
    signs = _signs(cfg)
    obs = cfg.observable if cfg.observable in MONOMER_MODES \
        else cfg.observable.upper()
    results = simulate_spectrum(
        params, cfg.sim, state, [(obs, s) for s in signs],
        carrier=cfg.carrier, estimator=cfg.estimator,
        n_segments=cfg.segments, taper=cfg.taper)
    stem, _ = os.path.splitext(cfg.out)
    records = []
    overall = "agree"
    for sign in signs:
        sim_series = results[(obs, sign)]
        ana_series = _analytic_series(cfg, params, state, sign,
                                      sim_series.omega)
        write_spectrum_csv(ana_series, f"{stem}_{sign}_analytic.csv",
                           metadata=_sidecar_meta(cfg, params, meta))
        write_spectrum_csv(sim_series, f"{stem}_{sign}_sim.csv",
                           metadata=_sidecar_meta(cfg, params, meta))
        verdict, details = compare_series(ana_series, sim_series)
        om_a, v_a = ana_series.minimum()
        om_s, v_s = sim_series.minimum()
        k = int(np.nanargmin(sim_series.values))
        err = float(sim_series.stat_err[k]) if sim_series.stat_err is not None \
            else math.nan
        records.append(ReportRecord(
            observable=obs, sign=sign,
            analytic_min=v_a, analytic_min_omega=om_a,
            sim_min=v_s, sim_min_err=err, sim_min_omega=om_s,
            dip_bin_distance=details["dip_bin_distance"],
            fraction_within_3sigma=details["fraction_within_3sigma"],
            verdict=verdict,
            metadata=_sidecar_meta(cfg, params,
                                   {**meta, "sim": asdict(cfg.sim)})))
        if verdict != "agree":
            overall = "disagree"
        print(f"{obs} {sign}: verdict {verdict} "
              f"(within 3 sigma: {details['fraction_within_3sigma']:.1%}, "
              f"dip bins apart: {details['dip_bin_distance']})")
    _atomic_write(cfg.out, json.dumps([asdict(r) for r in records],
                                      indent=2, default=str) + "\n")
    print(f"overall: {overall} -> {cfg.out}")
    return 0


def _cmd_scan(cfg: RunConfig) -> int:
    if not cfg.out:
        raise UsageError("--out is required for scan")
    xs = np.linspace(*cfg.x_range)
    ys = np.linspace(*cfg.y_range)
    plane = PlaneSpec(x_axis=cfg.x_axis, x_values=xs,
                      y_axis=cfg.y_axis, y_values=ys)
    sweep = np.linspace(0.0, cfg.e_max, cfg.e_points + 1)[1:]
    rows = scan_bifurcation(plane, cfg.params, sweep)
    lines = [f"{cfg.x_axis},{cfg.y_axis},max_roots,bistable,"
             "predicate_bistable,onset_pump,onset_class,upper_class,error"]
    failures = 0
    for row in rows:
        for cell in row:
            if cell.error:
                failures += 1
            lines.append(",".join([
                _fmt(cell.x), _fmt(cell.y), str(cell.max_roots),
                str(int(cell.bistable)), str(int(cell.predicate_bistable)),
                "" if cell.onset_pump is None else _fmt(cell.onset_pump),
                cell.onset_class or "", cell.upper_class or "",
                (cell.error or "").replace(",", ";")]))
    _atomic_write(cfg.out, "\n".join(lines) + "\n")
    print(f"scan: {len(xs)}x{len(ys)} cells -> {cfg.out}")
    if failures:
        warnings.warn(f"{failures} cells failed and are marked in the file",
                      RuntimeWarning)
    return 0


_RUNNERS = {
    "steady": _cmd_steady,
    "thresholds": _cmd_thresholds,
    "scan": _cmd_scan,
    "spectrum-analytic": _cmd_spectrum_analytic,
    "spectrum-sim": _cmd_spectrum_sim,
    "compare": _cmd_compare,
}


def run_command(cfg: RunConfig) -> int:
    """Execute a resolved RunConfig; returns the process exit code."""
    return _RUNNERS[cfg.command](cfg)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return run_command(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
