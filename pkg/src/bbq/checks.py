"""
Seeded property suite behind ``bbq check``.

Each property returns a :class:`CheckResult`; the suite is deterministic
for a given seed. ``inject_fault="partition"`` swaps in a corrupted
annulus profile so the partition-of-unity property can be seen failing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import littlewood_paley as lp
from . import spectral as sp
from .solver import (
    InitialDataSpec,
    ModelParams,
    SimState,
    StepperConfig,
    linear_solution,
    make_initial_data,
    run,
)
from .spectral import GridSpec, RealField, SpectralField, VectorField

FAULTS = ("partition",)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    constants: Dict[str, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# random fields


def random_real(grid: GridSpec, rng: np.random.Generator, decay: float = 1.0,
                mean_zero: bool = False) -> SpectralField:
    """Real field with coefficients ~ (1 + |xi|^2)^(-decay) times Gaussian noise."""
    n = grid.n
    samples = rng.standard_normal((n, n))
    c = np.fft.fft2(samples) / (n * n)
    c = c * (1.0 + sp.wavenumbers(grid).xi_abs ** 2) ** (-decay)
    if mean_zero:
        c[0, 0] = 0.0
    return SpectralField(grid, c)


def random_block(grid: GridSpec, rng: np.random.Generator, j: int,
                 partition: lp.DyadicPartition) -> SpectralField:
    f = random_real(grid, rng, decay=0.0, mean_zero=True)
    return SpectralField(grid, f.coeffs * partition.multiplier(j))


def block_kernel(partition: lp.DyadicPartition, j: int) -> SpectralField:
    """Delta_j applied to the unit point mass at the origin."""
    return SpectralField(partition.grid, np.array(partition.multiplier(j), dtype=complex))


# ---------------------------------------------------------------------------
# properties


def check_roundtrip(rng, n=64) -> CheckResult:
    grid = GridSpec(n)
    worst = 0.0
    for _ in range(10):
        x = rng.standard_normal((n, n))
        back = sp.inverse_transform(sp.forward_transform(RealField(grid, x))).samples
        worst = max(worst, float(np.max(np.abs(back - x)) / np.max(np.abs(x))))
    return CheckResult("transform_roundtrip", worst < 1e-12, f"max relative error {worst:.2e}",
                       {"roundtrip_error": worst})


def check_partition(rng, n=64, profile: Optional[Callable] = None) -> CheckResult:
    grid = GridSpec(n)
    part = lp.build_partition(grid, profile)
    r_h = lp.partition_residue(part)
    r_i = lp.inhomogeneous_residue(part)
    f = random_real(grid, rng, mean_zero=True)
    total = sum(lp.dyadic_block(f, j, True, part).coeffs for j in part.homogeneous_range)
    rec = float(np.max(np.abs(total - f.coeffs)) / np.max(np.abs(f.coeffs)))
    worst = max(r_h, r_i, rec)
    return CheckResult(
        "partition_of_unity", worst < 1e-12,
        f"homogeneous residue {r_h:.2e}, inhomogeneous residue {r_i:.2e}, "
        f"block reconstruction {rec:.2e} (blocks {part.j_min}..{part.j_max})",
        {"partition_residue": r_h, "inhomogeneous_residue": r_i, "reconstruction": rec})


def lemma_ratios(grid: GridSpec, f: SpectralField, s: float, Ns):
    """Contraction excess max(0, |J_N f|/|f| - 1) in H^s and the ratios
    N |J_N f - f|_{H^(s-1)} / |f|_{H^s} for each N."""
    hs = sp.hs_norm(f, s)
    excess = 0.0
    approx = []
    for N in Ns:
        jf = sp.fourier_truncate(f, N)
        excess = max(excess, sp.hs_norm(jf, s) / hs - 1.0)
        approx.append(N * sp.hs_norm(f - jf, s - 1.0) / hs)
    return excess, approx


def check_truncation_lemma(rng, n=64, count=100) -> CheckResult:
    grid = GridSpec(n)
    Ns = [grid.nyquist / 8, grid.nyquist / 4, grid.nyquist / 2]
    worst_excess = 0.0
    worst_ratio = 0.0
    proj_excess = 0.0
    for _ in range(count):
        f = random_real(grid, rng, decay=1.0)
        for s in (0.0, 1.0, 2.0):
            e, a = lemma_ratios(grid, f, s, Ns)
            worst_excess = max(worst_excess, e)
            worst_ratio = max(worst_ratio, max(a))
        v = VectorField((random_real(grid, rng), random_real(grid, rng)))
        for s in (0.0, 1.0, 2.0):
            proj_excess = max(proj_excess, sp.hs_norm(sp.leray_project(v), s) / sp.hs_norm(v, s) - 1.0)
    ok = worst_excess <= 1e-14 and proj_excess <= 1e-14 and worst_ratio <= 1.0
    return CheckResult(
        "truncation_projection_lemma", ok,
        f"J_N contraction excess {worst_excess:.1e}, P contraction excess {proj_excess:.1e}, "
        f"max N|J_N f - f|_(s-1)/|f|_s = {worst_ratio:.3f}",
        {"approximation_constant": worst_ratio})


def check_leray(rng, n=64) -> CheckResult:
    grid = GridSpec(n)
    v = VectorField((random_real(grid, rng), random_real(grid, rng)))
    pv = sp.leray_project(v)
    div = sp.divergence_defect(pv.stacked, grid) / np.max(np.abs(v.stacked))
    idem = float(np.max(np.abs(sp.leray_project(pv).stacked - pv.stacked)))
    phi = random_real(grid, rng)
    grad = sp.gradient(phi)
    kill = float(np.max(np.abs(sp.leray_project(grad).stacked))) / float(np.max(np.abs(grad.stacked)))
    ok = div < 1e-12 and idem < 1e-14 and kill < 1e-12
    return CheckResult("leray_projection", ok,
                       f"divergence {div:.1e}, idempotence {idem:.1e}, gradient residue {kill:.1e}")


def bernstein_constants(grid: GridSpec, rng, alphas=(0.0, 0.5, 1.0),
                        pqs=((2.0, 2.0), (2.0, math.inf), (math.inf, math.inf)),
                        samples: int = 4):
    """Empirical upper and lower Bernstein constants per (alpha, p, q) over
    every resolved block: max of the upper ratios and min of the lower ratios
    over random block fields plus the block kernel."""
    part = lp.build_partition(grid)
    out = {}
    for alpha in alphas:
        for p, q in pqs:
            up, low = 0.0, math.inf
            for j in part.homogeneous_range:
                fields = [random_block(grid, rng, j, part) for _ in range(samples)]
                fields.append(block_kernel(part, j))
                for f in fields:
                    rep = lp.bernstein_check(f, j, alpha, p, q, part)
                    up = max(up, rep.ratio)
                    low = min(low, rep.lower_ratio)
            out[(alpha, p, q)] = (up, low)
    return out


def check_bernstein(rng, n=64) -> CheckResult:
    consts = bernstein_constants(GridSpec(n), rng, samples=2)
    bad = [k for k, (u, l) in consts.items() if not (0.25 <= u <= 4 and 0.25 <= l <= 4)]
    lo = min(min(v) for v in consts.values())
    hi = max(max(v) for v in consts.values())
    return CheckResult("bernstein_bounds", not bad,
                       f"empirical constants in [{lo:.3f}, {hi:.3f}]"
                       + (f"; outside [1/4, 4] for {bad}" if bad else ""),
                       {"bernstein_min": lo, "bernstein_max": hi})


def check_paraproduct(rng, n=64, count=100) -> CheckResult:
    grid = GridSpec(n)
    part = lp.build_partition(grid)
    worst = 0.0
    for _ in range(count):
        f = sp.dealias(random_real(grid, rng))
        g = sp.dealias(random_real(grid, rng))
        split = lp.paraproduct_split(f, g, part)
        ref = lp.dealiased_product(f, g).coeffs
        err = float(np.max(np.abs(split.reconstruct().coeffs - ref)) / np.max(np.abs(ref)))
        worst = max(worst, err)
    return CheckResult("paraproduct_reconstruction", worst < 1e-10,
                       f"max relative error {worst:.2e}", {"paraproduct_error": worst})


def check_besov_sobolev(rng, n=64, count=100) -> CheckResult:
    grid = GridSpec(n)
    part = lp.build_partition(grid)
    lo, hi = math.inf, 0.0
    for _ in range(count):
        f = random_real(grid, rng, mean_zero=True)
        for s in (0.0, 1.0):
            r = lp.besov_norm(f, lp.BesovParams(s, 2, 2), part) / sp.homogeneous_hs_norm(f, s)
            lo, hi = min(lo, r), max(hi, r)
    return CheckResult("besov_sobolev_equivalence", 0.5 <= lo and hi <= 2.0,
                       f"B^s_22 / H^s ratio in [{lo:.3f}, {hi:.3f}]",
                       {"ratio_min": lo, "ratio_max": hi})


def shear_state(grid: GridSpec, amplitude: float = 1.0) -> SimState:
    x1, x2 = grid.coordinates()
    u1 = amplitude * np.sin(grid.kappa * x2)
    coeffs = np.stack([sp.forward_transform(RealField(grid, u1)).coeffs,
                       np.zeros((grid.n, grid.n), dtype=complex)])
    return SimState(VectorField.from_array(grid, coeffs, True), SpectralField.zeros(grid), 0.0)


def shear_error(grid: GridSpec, params: ModelParams, config: StepperConfig) -> float:
    """Max grid error of the shear flow against exp(-nu t) u0 at t_end."""
    st = shear_state(grid)
    traj = run(st, params, config)
    final = traj.records[-1]
    exact = math.exp(-params.nu * final.t) * sp.inverse_transform(st.u.components[0]).samples
    got = sp.inverse_transform(final.u.components[0]).samples
    other = sp.inverse_transform(final.u.components[1]).samples
    th = sp.inverse_transform(final.theta).samples
    return float(max(np.max(np.abs(got - exact)), np.max(np.abs(other)), np.max(np.abs(th))))


def check_exact_solutions(rng, n=32) -> CheckResult:
    grid = GridSpec(n)
    params = ModelParams(0.3, 0.2)
    cfg = StepperConfig(dt=1e-3, t_end=1.0, sample_every=1000)
    e_shear = shear_error(grid, params, cfg)
    lin = ModelParams(0.3, 0.2, advection=False)
    st, _ = make_initial_data(InitialDataSpec("random_band", 0.5, 0.5,
                                              seed=int(rng.integers(1 << 30))), grid)
    traj = run(st, lin, StepperConfig(dt=1e-2, t_end=1.0, sample_every=100))
    ex = linear_solution(st, lin, 1.0)
    got = traj.records[-1]
    e_lin = float(max(np.max(np.abs(got.u.stacked - ex.u.stacked)),
                      np.max(np.abs(got.theta.coeffs - ex.theta.coeffs))))
    e_lin /= float(np.max(np.abs(st.to_array())))
    zero = SimState(VectorField.from_array(grid, np.zeros((2, n, n), complex), True),
                    SpectralField.zeros(grid))
    zt = run(zero, params, StepperConfig(dt=1e-2, t_end=0.1, sample_every=10))
    e_zero = float(np.max(np.abs(zt.records[-1].to_array())))
    ok = e_shear < 1e-8 and e_lin < 1e-10 and e_zero == 0.0
    return CheckResult("exact_solutions", ok,
                       f"shear L_inf error {e_shear:.1e}, linear regime {e_lin:.1e}, "
                       f"zero data {e_zero:.1e}",
                       {"shear_error": e_shear, "linear_error": e_lin})


def check_theta_identity(rng, n=32) -> CheckResult:
    grid = GridSpec(n)
    params = ModelParams(0.2, 0.3)
    st, _ = make_initial_data(InitialDataSpec("random_band", 0.5, 0.5,
                                              seed=int(rng.integers(1 << 30))), grid)
    traj = run(st, params, StepperConfig(dt=1e-3, t_end=0.5, sample_every=50))
    th0 = sp.l2_norm(traj.records[0].theta)
    worst = max(abs(sp.l2_norm(s.theta) - math.exp(-params.lam * s.t) * th0) / th0
                for s in traj.records)
    return CheckResult("theta_l2_identity", worst < 1e-6,
                       f"max relative deviation {worst:.1e}", {"theta_decay_residual": worst})


def run_suite(seed: int = 0, inject_fault: Optional[str] = None) -> List[CheckResult]:
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ValueError(f"unknown fault {inject_fault!r}; choose from {FAULTS}")
    profile = None
    if inject_fault == "partition":
        profile = lambda r: 0.97 * lp.phi0_profile(r)  # noqa: E731
    rng = np.random.default_rng(seed)
    return [
        check_roundtrip(rng),
        check_partition(rng, profile=profile),
        check_truncation_lemma(rng),
        check_leray(rng),
        check_bernstein(rng),
        check_paraproduct(rng),
        check_besov_sobolev(rng),
        check_exact_solutions(rng),
        check_theta_identity(rng),
    ]
