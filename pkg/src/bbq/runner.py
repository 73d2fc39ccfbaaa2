"""
Batch orchestration behind the command line: single runs, offline
re-analysis of a run directory, and parameter sweeps.

A run directory holds::

    config.json      canonical configuration echo
    timeseries.csv   one row per sample (observables + derived columns)
    report.json      summary report, a pure function of the two files above
    perf.json        wall-clock counters (kept apart so reports are stable)
    snapshots/       optional sample_NNNNNN/{u1,u2,theta}.bbqf

``analyze`` rebuilds the report from config.json and timeseries.csv (and
the snapshots, when new Besov exponents are requested) into
``<dir>/analysis``.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import diagnostics as dg
from . import io as bio
from .config import RunConfig, from_canonical
from .errors import BlowUpError, DataError, StabilityError
from .littlewood_paley import build_partition
from .solver import SimState, Trajectory, make_initial_data, run
from .spectral import SpectralField, VectorField

log = logging.getLogger(__name__)

BASE_COLUMNS = ("t", "l2_u", "l2_theta", "linf_u", "linf_theta", "besov_grad_u",
                "besov_grad_theta", "frac_A0", "frac_B0", "vortex_stretch", "implied_c0")

EXIT_OK, EXIT_FAIL, EXIT_BLOWUP, EXIT_CONFIG = 0, 1, 2, 3


def resolve_c0(cfg: RunConfig) -> Tuple[float, str]:
    if cfg.c0_override is not None:
        return float(cfg.c0_override), "override"
    return dg.DEFAULT_C0, "calibrated-default"


# ---------------------------------------------------------------------------
# rows and report


def _trajectory(cfg: RunConfig, records: Sequence[dg.DiagnosticsRecord]) -> Trajectory:
    traj = Trajectory(cfg.grid(), cfg.params(), cfg.stepper())
    for r in records:
        traj.append(r.t, r)
    traj.steps = (len(records) - 1) * int(cfg.stepper().sample_every)
    return traj


def _extra_qs(cfg: RunConfig) -> List[float]:
    return sorted({float(q) for q in cfg.q_list if not math.isinf(q)})


def build_rows(cfg: RunConfig, records: Sequence[dg.DiagnosticsRecord]):
    """CSV columns and rows: recorded observables plus threshold fractions
    and per-time implied C0 values."""
    traj = _trajectory(cfg, records)
    c0, _ = resolve_c0(cfg)
    thr = dg.ThresholdConfig.from_data(c0, traj.params, records[0].besov_grad_u)
    fa, fb = dg.threshold_fractions(records, thr)
    implied = {}
    for q in [math.inf] + _extra_qs(cfg):
        implied[q] = (dg.inequality_residuals(traj, q, c0).per_time()
                      if len(records) >= 3 else [math.nan] * len(records))
    rows = []
    for k, r in enumerate(records):
        row = r.columns()
        row["frac_A0"] = fa[k]
        row["frac_B0"] = fb[k]
        row["implied_c0"] = implied[math.inf][k]
        for q in _extra_qs(cfg):
            row[f"implied_c0_q{dg.qkey(q)}"] = implied[q][k]
        rows.append(row)
    columns = list(BASE_COLUMNS) + ["l4_u", "l4_theta"]
    for q in _extra_qs(cfg):
        key = dg.qkey(q)
        columns += [f"besov_grad_u_q{key}", f"besov_grad_theta_q{key}", f"implied_c0_q{key}"]
    for s in sorted({float(s) for s in cfg.s_list}):
        key = dg.qkey(s)
        columns += [f"hs_u_s{key}", f"hs_theta_s{key}"]
    return columns, rows


def _status(flag: bool) -> str:
    return "pass" if flag else "fail"


def summarize(cfg: RunConfig, records: Sequence[dg.DiagnosticsRecord]) -> Dict[str, Any]:
    """Summary report; a deterministic function of config and records."""
    traj = _trajectory(cfg, records)
    stepper = cfg.stepper()
    c0, c0_source = resolve_c0(cfg)
    expected = stepper.n_samples
    completed = len(records) == expected
    checks: Dict[str, Any] = {}
    fitted: Dict[str, Any] = {}

    checks["run_completed"] = {
        "status": _status(completed), "samples": len(records),
        "expected_samples": expected, "t_final": records[-1].t,
    }
    if len(records) >= 2:
        d2 = dg.theta_decay_check(traj, 2.0)
        checks["theta_decay_l2"] = {"status": _status(d2.passed), "residual": d2.residual,
                                    "tolerance": d2.tolerance}
        fitted["theta_decay_residual"] = d2.residual
        for q, name in ((4.0, "theta_decay_l4"), (math.inf, "theta_decay_linf")):
            rep = dg.theta_decay_check(traj, q)
            checks[name] = {"status": "recorded", "one_sided_excess": rep.residual,
                            "allowance": rep.tolerance}
        vb = dg.velocity_bound_check(traj)
        checks["velocity_l2_bound"] = {"status": _status(vb.passed),
                                       "max_violation": vb.max_violation,
                                       "violations": vb.violations, "allowance": vb.allowance}
    thr = dg.ThresholdConfig.from_data(c0, traj.params, records[0].besov_grad_u)
    tm = dg.threshold_monitor(traj, thr)
    checks["threshold_persistence"] = {
        "status": {"never": "pass", "crossed": "fail"}.get(tm.status, tm.status),
        "outcome": tm.status, "first_crossing": tm.first_crossing,
        "max_frac_A0": tm.max_frac_a0, "max_frac_B0": tm.max_frac_b0,
        "A0": tm.a0, "B0": tm.b0,
    }
    if len(records) >= 3:
        per_q = {}
        for q in [math.inf] + _extra_qs(cfg):
            per_q[dg.qkey(q)] = dg.inequality_residuals(traj, q, c0).implied_c0
        checks["inequality_residuals"] = {"status": "recorded", "c0": c0,
                                          "implied_c0": per_q}
        fitted["implied_c0"] = max(per_q.values())
        for s in sorted({float(s) for s in cfg.s_list if s > 2}):
            hs = dg.hs_energy_tracker(traj, s)
            checks[f"hs_energy_s{dg.qkey(s)}"] = {
                "status": "recorded", "implied_constant": hs.implied_constant,
                "decreasing_from": hs.decreasing_from, "Y0": hs.Y[0], "Y_final": hs.Y[-1]}
            fitted[f"hs_implied_constant_s{dg.qkey(s)}"] = hs.implied_constant
    vs = [r.vortex_stretch for r in records]
    checks["vortex_stretch"] = {"status": "recorded", "initial": vs[0], "final": vs[-1],
                                "max": max(vs)}
    return {
        "config": cfg.canonical(),
        "c0": c0, "c0_source": c0_source,
        "thresholds": {"A0": thr.a0, "B0": thr.b0},
        "checks": checks,
        "fitted_constants": fitted,
        "performance": {"steps": traj.steps, "samples": len(records)},
    }


def exit_code(report: Dict[str, Any]) -> int:
    if not report["checks"]["run_completed"]["status"] == "pass":
        return EXIT_BLOWUP
    if any(c["status"] == "fail" for c in report["checks"].values()):
        return EXIT_FAIL
    return EXIT_OK


def write_outputs(directory: str, cfg: RunConfig, records, subdir: str = "") -> Dict[str, Any]:
    target = os.path.join(directory, subdir) if subdir else directory
    os.makedirs(target, exist_ok=True)
    columns, rows = build_rows(cfg, records)
    report = summarize(cfg, records)
    bio.write_csv(os.path.join(target, "timeseries.csv"), columns, rows)
    bio.write_json(os.path.join(target, "report.json"), report)
    return report


# ---------------------------------------------------------------------------
# run


def _snapshot_writer(directory: str, every: int):
    counter = {"k": 0}

    def save(state: SimState):
        k = counter["k"]
        counter["k"] += 1
        if every <= 0 or k % every:
            return
        sub = os.path.join(directory, "snapshots", f"sample_{k:06d}")
        os.makedirs(sub, exist_ok=True)
        u = state.u.stacked
        bio.write_field(os.path.join(sub, "u1.bbqf"), SpectralField(state.grid, u[0]))
        bio.write_field(os.path.join(sub, "u2.bbqf"), SpectralField(state.grid, u[1]))
        bio.write_field(os.path.join(sub, "theta.bbqf"), state.theta)

    return save


@dataclass
class RunResult:
    records: List[dg.DiagnosticsRecord]
    blowup: Optional[Exception]
    wall_seconds: float
    grad_u0: float
    grad_theta0: float


def simulate(cfg: RunConfig, snapshot_dir: Optional[str] = None) -> RunResult:
    grid = cfg.grid()
    params = cfg.params()
    partition = build_partition(grid)
    state, achieved = make_initial_data(cfg.init_spec(), grid, partition, params)
    obs = dg.DiagnosticsObserver(grid, cfg.q_list, cfg.s_list, partition)
    save = _snapshot_writer(snapshot_dir, cfg.snapshot_every) if snapshot_dir else None

    def observer(s):
        if save:
            save(s)
        return obs(s)

    start = time.perf_counter()
    blowup = None
    try:
        traj = run(state, params, cfg.stepper(), observer=observer, partition=partition)
    except (BlowUpError, StabilityError) as exc:
        traj = exc.trajectory
        blowup = exc
        log.error("run stopped: %s", exc)
    wall = time.perf_counter() - start
    return RunResult(list(traj.records), blowup, wall,
                     achieved["grad_u_besov"], achieved["grad_theta_besov"])


def cmd_run(cfg: RunConfig) -> int:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    bio.write_json(os.path.join(out, "config.json"), cfg.canonical())
    result = simulate(cfg, out)
    if not result.records:
        raise DataError("run produced no samples")
    report = write_outputs(out, cfg, result.records)
    stepper = cfg.stepper()
    steps = (len(result.records) - 1) * int(stepper.sample_every)
    bio.write_json(os.path.join(out, "perf.json"), {
        "wall_seconds": result.wall_seconds, "steps": steps,
        "seconds_per_step": result.wall_seconds / steps if steps else None,
        "blowup": str(result.blowup) if result.blowup else None,
    })
    return exit_code(report)


# ---------------------------------------------------------------------------
# analyze


def load_run(directory: str):
    cfg_path = os.path.join(directory, "config.json")
    csv_path = os.path.join(directory, "timeseries.csv")
    for p in (cfg_path, csv_path):
        if not os.path.isfile(p):
            raise DataError(f"missing {os.path.basename(p)} in {directory}")
    cfg = from_canonical(bio.read_json(cfg_path), directory)
    header, rows = bio.read_csv(csv_path)
    if not rows:
        raise DataError(f"{csv_path}: no data rows")
    try:
        records = [dg.DiagnosticsRecord.from_columns(r) for r in rows]
    except KeyError as exc:
        raise DataError(f"{csv_path}: missing column {exc}") from None
    except ValueError as exc:
        raise DataError(f"{csv_path}: {exc}") from None
    return cfg, records


def _records_with_q(directory: str, cfg: RunConfig, records, q_list):
    missing = [q for q in q_list if not math.isinf(q) and q not in records[0].besov_grad_u_q]
    if not missing:
        return records
    every = cfg.snapshot_every
    if every != 1:
        raise DataError(
            f"Besov norms for q={', '.join(dg.qkey(q) for q in missing)} are not in the "
            "time series and the run did not keep a snapshot at every sample"
        )
    grid = cfg.grid()
    obs = dg.DiagnosticsObserver(grid, q_list=missing, s_list=())
    out = []
    for k, r in enumerate(records):
        sub = os.path.join(directory, "snapshots", f"sample_{k:06d}")
        fields = [bio.read_field(os.path.join(sub, f"{name}.bbqf")) for name in ("u1", "u2", "theta")]
        u = VectorField.from_array(grid, np.stack([fields[0].coeffs, fields[1].coeffs]), True)
        extra = obs(SimState(u, fields[2], r.t))
        bu = {**r.besov_grad_u_q, **extra.besov_grad_u_q}
        bt = {**r.besov_grad_theta_q, **extra.besov_grad_theta_q}
        out.append(dg.DiagnosticsRecord(**{**r.__dict__, "besov_grad_u_q": bu,
                                           "besov_grad_theta_q": bt}))
    return out


def cmd_analyze(directory: str, q_list: Optional[Sequence[float]] = None) -> int:
    cfg, records = load_run(directory)
    if q_list is not None:
        merged = sorted({float(q) for q in cfg.q_list} | {float(q) for q in q_list})
        records = _records_with_q(directory, cfg, records, merged)
        cfg = cfg.with_values(diagnostics__q_list=merged)
    report = write_outputs(directory, cfg, records, subdir="analysis")
    return exit_code(report)


# ---------------------------------------------------------------------------
# sweep

SWEEP_COLUMNS = ("index", "param", "value", "nu", "lambda", "A0", "B0", "grad_u0",
                 "grad_theta0", "status", "first_crossing", "max_frac_A0", "max_frac_B0",
                 "message")


def sweep_row_config(cfg: RunConfig, index: int, value: float) -> RunConfig:
    """Configuration of one sweep row (its own output sub-directory)."""
    param = cfg.sweep["param"]
    changes: Dict[str, Any] = {"output__dir": os.path.join(cfg.output_dir, "rows", f"row_{index:03d}")}
    if param == "nu":
        changes["model__nu"] = float(value)
    elif param == "lambda":
        changes["model__lambda"] = float(value)
    else:
        # amplitude: data placed at value * (A0, B0) for the row's thresholds
        c0, _ = resolve_c0(cfg)
        params = cfg.params()
        a0 = min(params.nu / (2 * c0), params.lam / c0)
        target_u = value * a0
        b0 = params.nu / (2 * c0) * target_u
        changes["init__target_grad_u_besov"] = target_u
        changes["init__target_grad_theta_besov"] = value * b0
    changes["diagnostics__q_list"] = []
    changes["diagnostics__s_list"] = []
    changes["output__snapshot_every"] = 0
    data = cfg.with_values(**changes).data
    data.pop("sweep", None)
    return RunConfig.from_dict(data, cfg.base_dir)


def _sweep_job(args) -> Dict[str, Any]:
    cfg_data, base_dir, index, param, value = args
    row: Dict[str, Any] = {"index": index, "param": param, "value": float(value)}
    try:
        cfg = RunConfig.from_dict(cfg_data, base_dir)
        params = cfg.params()
        c0, _ = resolve_c0(cfg)
        row.update({"nu": params.nu, "lambda": params.lam})
        result = simulate(cfg)
        recs = result.records
        thr = dg.ThresholdConfig.from_data(c0, params, recs[0].besov_grad_u)
        tm = dg.threshold_monitor(_trajectory(cfg, recs), thr)
        status = tm.status
        message = ""
        if result.blowup is not None:
            status = "blow-up" if tm.status != "hypotheses-unmet" else "hypotheses-unmet"
            message = str(result.blowup)
        row.update({"A0": thr.a0, "B0": thr.b0, "grad_u0": result.grad_u0,
                    "grad_theta0": result.grad_theta0, "status": status,
                    "first_crossing": tm.first_crossing if tm.first_crossing is not None else "never",
                    "max_frac_A0": tm.max_frac_a0, "max_frac_B0": tm.max_frac_b0,
                    "message": message})
    except Exception as exc:  # recorded per row, the sweep goes on
        row.update({"status": "error", "message": f"{type(exc).__name__}: {exc}"})
    for key in SWEEP_COLUMNS:
        row.setdefault(key, math.nan if key not in ("status", "message", "first_crossing") else "")
    os.makedirs(os.path.join(_sweep_dir(cfg_data, base_dir)), exist_ok=True)
    bio.write_json(os.path.join(_sweep_dir(cfg_data, base_dir), f"row_{index:03d}.json"), row)
    return row


def _sweep_dir(cfg_data, base_dir):
    d = cfg_data["output"]["dir"]
    d = d if os.path.isabs(d) else os.path.join(base_dir, d)
    return os.path.dirname(os.path.normpath(d))


def parallelism(n_jobs: int) -> int:
    raw = os.environ.get("BBQ_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer BBQ_THREADS=%r", raw)
    return max(1, min(cap, n_jobs))


def cmd_sweep(cfg: RunConfig) -> int:
    sweep = cfg.sweep
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    bio.write_json(os.path.join(out, "config.json"), cfg.canonical())
    jobs = []
    for i, v in enumerate(sweep["values"]):
        row_cfg = sweep_row_config(cfg, i, v)
        jobs.append((row_cfg.data, row_cfg.base_dir, i, sweep["param"], v))
    workers = parallelism(len(jobs))
    if workers == 1:
        rows = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    rows.sort(key=lambda r: r["index"])
    bio.write_csv(os.path.join(out, "boundary.csv"), SWEEP_COLUMNS, rows)
    bio.write_json(os.path.join(out, "sweep_report.json"),
                   {"config": cfg.canonical(), "rows": rows})
    bad = any(r["status"] in ("crossed", "error") for r in rows)
    return EXIT_FAIL if bad else EXIT_OK
