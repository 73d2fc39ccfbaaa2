"""Acceptance criteria at the stated tolerances.

Each test records a PASS/FAIL line through the ``acceptance`` fixture and
then asserts, so the terminal summary lists every criterion once.
"""

import math

import numpy as np
import pytest

from bbq import checks
from bbq import littlewood_paley as lp
from bbq import spectral as sp
from bbq.diagnostics import (
    DEFAULT_C0,
    DiagnosticsObserver,
    ThresholdConfig,
    battery_trajectory,
    cauchy_convergence_study,
    implied_c0_of,
    standard_battery,
    theta_decay_check,
    threshold_monitor,
    uniqueness_check,
    velocity_bound_check,
)
from bbq.solver import InitialDataSpec, ModelParams, StepperConfig, make_initial_data, run
from bbq.spectral import GridSpec

pytestmark = pytest.mark.acceptance

SEEDS = (1, 2, 3)


@pytest.fixture(scope="module")
def decay_runs():
    grid = GridSpec(128)
    part = lp.build_partition(grid)
    params = ModelParams(0.2, 0.2)
    cfg = StepperConfig(dt=1e-3, t_end=5.0, sample_every=100)
    out = []
    for seed in SEEDS:
        st, _ = make_initial_data(InitialDataSpec("random_band", 0.5, 0.5, seed=seed),
                                  grid, part, params)
        obs = DiagnosticsObserver(grid, q_list=(), s_list=(), partition=part)
        out.append(run(st, params, cfg, observer=obs, partition=part))
    return out


def test_c01_theta_l2_decay(decay_runs, acceptance):
    residuals = [theta_decay_check(tr, 2.0).residual for tr in decay_runs]
    worst = max(residuals)
    ok = acceptance(1, "theta L2 decay identity", worst < 1e-6,
                    f"max relative residual {worst:.2e} over {len(residuals)} seeds (< 1e-6)")
    assert ok


def test_c02_velocity_l2_bound(decay_runs, acceptance):
    reports = [velocity_bound_check(tr) for tr in decay_runs]
    count = sum(r.violations for r in reports)
    worst = max(r.max_violation for r in reports)
    ok = acceptance(2, "velocity L2 bound", count == 0,
                    f"{count} violations beyond 1e-4, max relative excess {worst:.2e}")
    assert ok


def test_c03_shear_flow(acceptance):
    grid = GridSpec(128)
    err = checks.shear_error(grid, ModelParams(0.3, 0.2),
                             StepperConfig(dt=1e-3, t_end=1.0, sample_every=1000))
    ok = acceptance(3, "shear flow exact solution", err < 1e-8,
                    f"max L_inf error {err:.2e} at T=1 (< 1e-8)")
    assert ok


def test_c04_partition_of_unity(acceptance):
    worst = 0.0
    detail = []
    for n in (128, 256):
        res = checks.check_partition(np.random.default_rng(4), n=n)
        worst = max(worst, max(res.constants.values()))
        detail.append(f"n={n}: {res.detail}")
    ok = acceptance(4, "partition of unity and reconstruction", worst < 1e-12,
                    f"max residue {worst:.1e} (< 1e-12); " + "; ".join(detail))
    assert ok


def test_c05_truncation_lemma(acceptance):
    rng = np.random.default_rng(5)
    grid = GridSpec(128)
    Ns = [grid.nyquist / 8, grid.nyquist / 4, grid.nyquist / 2]
    violations = 0
    per_N = np.zeros(len(Ns))
    for _ in range(100):
        f = checks.random_real(grid, rng, decay=1.0)
        for s in (0.0, 1.0, 2.0):
            excess, ratios = checks.lemma_ratios(grid, f, s, Ns)
            violations += excess > 1e-14
            per_N = np.maximum(per_N, ratios)
    # one constant bounds N |J_N f - f|_{s-1} / |f|_s for every N
    bounded = bool(np.all(per_N <= 1.0))
    ok = acceptance(5, "truncation contraction and O(1/N) rate",
                    violations == 0 and bounded,
                    f"{violations} contraction violations; approximation ratios per N "
                    f"{np.round(per_N, 4).tolist()} (bounded by 1)")
    assert ok


def test_c06_bernstein(acceptance):
    consts = checks.bernstein_constants(GridSpec(128), np.random.default_rng(6), samples=4)
    values = [v for pair in consts.values() for v in pair]
    lo, hi = min(values), max(values)
    ok = acceptance(6, "Bernstein two-sided bounds", 0.25 <= lo and hi <= 4.0,
                    f"empirical constants in [{lo:.3f}, {hi:.3f}] over "
                    f"{len(consts)} (alpha, p, q) cases (within [1/4, 4])")
    assert ok


def test_c07_paraproduct(acceptance):
    res = checks.check_paraproduct(np.random.default_rng(7), n=128, count=100)
    err = res.constants["paraproduct_error"]
    ok = acceptance(7, "paraproduct reconstruction", err < 1e-10,
                    f"max relative error {err:.2e} over 100 pairs (< 1e-10)")
    assert ok


def test_c08_besov_sobolev(acceptance):
    res = checks.check_besov_sobolev(np.random.default_rng(8), n=128, count=100)
    lo, hi = res.constants["ratio_min"], res.constants["ratio_max"]
    ok = acceptance(8, "Besov/Sobolev equivalence", 0.5 <= lo and hi <= 2.0,
                    f"ratio in [{lo:.3f}, {hi:.3f}] (within [1/2, 2])")
    assert ok


def test_c09_threshold_persistence(acceptance):
    grid = GridSpec(128)
    part = lp.build_partition(grid)
    params = ModelParams(0.2, 0.2)
    c0 = DEFAULT_C0
    a0 = min(params.nu / (2 * c0), params.lam / c0)
    # B0 depends on the velocity data, which sits at half of A0
    b0 = params.nu / (2 * c0) * (0.5 * a0)
    cfg = StepperConfig(dt=0.02, t_end=20.0, sample_every=25)
    statuses, worst = [], 0.0
    for seed in range(1, 6):
        st, _ = make_initial_data(InitialDataSpec("random_band", 0.5 * a0, 0.5 * b0, seed=seed),
                                  grid, part, params)
        obs = DiagnosticsObserver(grid, q_list=(), s_list=(), partition=part)
        tr = run(st, params, cfg, observer=obs, partition=part)
        rep = threshold_monitor(tr, ThresholdConfig.from_data(c0, params,
                                                              tr.records[0].besov_grad_u))
        statuses.append(rep.status)
        worst = max(worst, rep.max_frac_a0, rep.max_frac_b0)
    ok = acceptance(9, "threshold persistence", all(s == "never" for s in statuses) and worst < 1,
                    f"statuses {statuses}, max fraction {worst:.3f} (C0={c0})")
    assert ok


def test_c10_cauchy_refinement(acceptance):
    grid = GridSpec(256)
    st, _ = make_initial_data(
        InitialDataSpec("random_band", 0.5, 0.5, seed=4, band=(1.0, 80.0), slope=4.0), grid)
    rep = cauchy_convergence_study(st, ModelParams(0.2, 0.2),
                                   StepperConfig(dt=0.01, t_end=1.0, sample_every=10),
                                   [16, 32, 64])
    l2_ok = all(r >= 2.0 for r in rep.l2_ratios)
    hs_ok = all(r > 1.0 for r in rep.hstar_ratios)
    ok = acceptance(10, "Cauchy refinement in N", l2_ok and hs_ok,
                    f"L2 ratios {[round(r, 2) for r in rep.l2_ratios]} (>= 2), "
                    f"H*^-1/2 ratios {[round(r, 2) for r in rep.hstar_ratios]} (> 1)")
    assert ok


def test_c11_time_refinement(acceptance):
    grid = GridSpec(128)
    st, _ = make_initial_data(InitialDataSpec("random_band", 2.0, 2.0, seed=5), grid)
    rep = uniqueness_check(st, ModelParams(0.1, 0.1),
                           StepperConfig(dt=0.05, t_end=2.0, sample_every=4))
    ok = acceptance(11, "dt refinement order and determinism",
                    12.0 <= rep.ratio <= 20.0 and rep.deterministic,
                    f"discrepancy ratio {rep.ratio:.2f} (in [12, 20]), "
                    f"bit-identical repeat {rep.deterministic}")
    assert ok


def test_c12_implied_c0_stability(acceptance):
    def per_run(n, dt):
        grid = GridSpec(n)
        return {e.label: implied_c0_of(battery_trajectory(e, grid))
                for e in standard_battery(n, dt=dt)}

    base = per_run(128, 0.01)
    half_dt = per_run(128, 0.005)
    fine = per_run(256, 0.01)
    finite = all(math.isfinite(v) and v > 0 for v in base.values())
    dev_dt = max(abs(half_dt[k] / base[k] - 1.0) for k in base)
    dev_n = max(abs(fine[k] / base[k] - 1.0) for k in base)
    ok = acceptance(12, "implied c0 stability",
                    finite and dev_dt <= 0.10 and dev_n <= 0.25,
                    f"max implied c0 {max(base.values()):.4f}; deviation under dt/2 "
                    f"{dev_dt:.2%} (<= 10%), under n 128->256 {dev_n:.2%} (<= 25%)")
    assert ok
