"""
Observers and offline analyses over simulated trajectories.

The runtime side is :class:`DiagnosticsObserver`, which turns every sampled
state into a :class:`DiagnosticsRecord` of scalar observables. Everything
else is a pure function of a :class:`~bbq.solver.Trajectory` whose records
are diagnostics records (decay laws, threshold persistence, differential
inequality residuals, the H^s energy tracker), or a study that drives the
solver itself (N refinement, time-step refinement, perturbation growth,
calibration of C0).

Vector and tensor quantities use the pointwise Euclidean magnitude; the
gradient of u contributes all four components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import spectral as sp
from .errors import InvariantError, ParameterError
from .littlewood_paley import DyadicPartition, block_l2_norms, block_lq_norms, build_partition, lq_sum
from .solver import (
    Dynamics,
    InitialDataSpec,
    ModelParams,
    SimState,
    StepperConfig,
    Trajectory,
    iterate,
    make_initial_data,
    run,
)
from .spectral import GridSpec, SpectralField

#: Relative allowance for one-sided bounds.
ONE_SIDED_ALLOWANCE = 1e-4
#: Tolerance of the exact L^2 decay identity for theta.
THETA_L2_TOL = 1e-6

#: C0 calibrated with :func:`calibrate_c0` over :func:`standard_battery`
#: (n = 128, L = 2 pi); see the README for the procedure.
DEFAULT_C0 = 0.835

DEFAULT_Q_LIST = (2.0, 4.0, math.inf)
DEFAULT_S_LIST = (1.0, 3.0)


def qkey(q: float) -> str:
    """Column suffix for an exponent: 2 -> '2', inf -> 'inf'."""
    q = float(q)
    return "inf" if math.isinf(q) else format(q, "g")


def parse_qkey(text: str) -> float:
    return math.inf if text == "inf" else float(text)


# ---------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class ThresholdConfig:
    """Smallness thresholds A0 = min(nu/(2 c0), lambda/c0) and
    B0 = (nu/(2 c0)) ||grad u0||_{B^0_{inf,1}}.

    Build it with :meth:`from_data`; a0 and b0 are derived, never set by hand.
    """

    c0: float
    nu: float
    lam: float
    grad_u0: float

    def __post_init__(self):
        if not (math.isfinite(self.c0) and self.c0 > 0):
            raise ParameterError(f"c0 must be positive, got {self.c0}")
        if not (math.isfinite(self.grad_u0) and self.grad_u0 >= 0):
            raise ParameterError("||grad u0|| must be finite and >= 0")

    @classmethod
    def from_data(cls, c0: float, params: ModelParams, grad_u0: float) -> "ThresholdConfig":
        return cls(float(c0), float(params.nu), float(params.lam), float(grad_u0))

    @property
    def a0(self) -> float:
        return min(self.nu / (2.0 * self.c0), self.lam / self.c0)

    @property
    def b0(self) -> float:
        return self.nu / (2.0 * self.c0) * self.grad_u0


def _fraction(value: float, bound: float) -> float:
    # a vanishing quantity sits at fraction 0 even against a zero bound
    if value == 0.0:
        return 0.0
    return value / bound if bound > 0 else math.inf


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    l2_u: float
    l4_u: float
    linf_u: float
    l2_theta: float
    l4_theta: float
    linf_theta: float
    besov_grad_u: float
    besov_grad_theta: float
    besov_grad_u_q: Dict[float, float] = field(default_factory=dict)
    besov_grad_theta_q: Dict[float, float] = field(default_factory=dict)
    hs_u: Dict[float, float] = field(default_factory=dict)
    hs_theta: Dict[float, float] = field(default_factory=dict)
    vortex_stretch: float = 0.0

    def __post_init__(self):
        for name, value in self.columns().items():
            if not math.isfinite(value):
                raise InvariantError(f"diagnostic {name} is not finite at t={self.t}")

    def lq_theta(self, q: float) -> float:
        return self._lq("theta", q)

    def lq_u(self, q: float) -> float:
        return self._lq("u", q)

    def _lq(self, which, q):
        q = float(q)
        name = {2.0: "l2", 4.0: "l4", math.inf: "linf"}.get(q)
        if name is None:
            raise ParameterError(f"L^{q} norms are not recorded (available: 2, 4, inf)")
        return getattr(self, f"{name}_{which}")

    def besov(self, which: str, q: float) -> float:
        q = float(q)
        if math.isinf(q):
            return self.besov_grad_u if which == "u" else self.besov_grad_theta
        table = self.besov_grad_u_q if which == "u" else self.besov_grad_theta_q
        if q not in table:
            raise ParameterError(f"Besov norms for q={qkey(q)} were not recorded")
        return table[q]

    def columns(self) -> Dict[str, float]:
        out = {
            "t": self.t,
            "l2_u": self.l2_u, "l2_theta": self.l2_theta,
            "l4_u": self.l4_u, "l4_theta": self.l4_theta,
            "linf_u": self.linf_u, "linf_theta": self.linf_theta,
            "besov_grad_u": self.besov_grad_u, "besov_grad_theta": self.besov_grad_theta,
            "vortex_stretch": self.vortex_stretch,
        }
        for q in sorted(self.besov_grad_u_q):
            out[f"besov_grad_u_q{qkey(q)}"] = self.besov_grad_u_q[q]
            out[f"besov_grad_theta_q{qkey(q)}"] = self.besov_grad_theta_q[q]
        for s in sorted(self.hs_u):
            out[f"hs_u_s{qkey(s)}"] = self.hs_u[s]
            out[f"hs_theta_s{qkey(s)}"] = self.hs_theta[s]
        return out

    @classmethod
    def from_columns(cls, row: Dict[str, float]) -> "DiagnosticsRecord":
        """Inverse of :meth:`columns`; extra (derived) keys are ignored."""
        plain = {k: float(row[k]) for k in (
            "t", "l2_u", "l4_u", "linf_u", "l2_theta", "l4_theta", "linf_theta",
            "besov_grad_u", "besov_grad_theta", "vortex_stretch")}
        bu, bt, hu, ht = {}, {}, {}, {}
        for key, value in row.items():
            if key.startswith("besov_grad_u_q"):
                bu[parse_qkey(key[len("besov_grad_u_q"):])] = float(value)
            elif key.startswith("besov_grad_theta_q"):
                bt[parse_qkey(key[len("besov_grad_theta_q"):])] = float(value)
            elif key.startswith("hs_u_s"):
                hu[float(key[len("hs_u_s"):])] = float(value)
            elif key.startswith("hs_theta_s"):
                ht[float(key[len("hs_theta_s"):])] = float(value)
        return cls(besov_grad_u_q=bu, besov_grad_theta_q=bt, hs_u=hu, hs_theta=ht, **plain)


def _half_weights(n: int) -> np.ndarray:
    # multiplicity of half-layout columns in the full spectrum
    m = n // 2 + 1
    w = np.full(m, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return w


def _half_l2(h: np.ndarray, grid: GridSpec) -> float:
    w = _half_weights(grid.n)
    return float(grid.domain_length * math.sqrt(np.sum(w * np.abs(h) ** 2)))


class DiagnosticsObserver:
    """Callable turning a sampled state into a :class:`DiagnosticsRecord`.

    ``q_list`` selects the extra Besov exponents (q = inf is always recorded)
    and ``s_list`` the Sobolev indices.
    """

    def __init__(self, grid: GridSpec, q_list: Iterable[float] = DEFAULT_Q_LIST,
                 s_list: Iterable[float] = DEFAULT_S_LIST,
                 partition: Optional[DyadicPartition] = None):
        self.grid = grid
        self.partition = partition or build_partition(grid)
        qs = sorted({float(q) for q in q_list})
        for q in qs:
            if not q >= 1.0:
                raise ParameterError(f"Besov exponent q must be >= 1, got {q}")
        self.q_extra = [q for q in qs if not math.isinf(q)]
        self.s_list = sorted({float(s) for s in s_list})
        wn = sp.wavenumbers(grid)
        m = grid.n // 2 + 1
        self.d1 = wn.d1
        self.d2 = wn.d2[:, :m]
        self.dealias = wn.dealias[:, :m]
        self.js = list(self.partition.homogeneous_range)

    def gradients(self, y: np.ndarray) -> np.ndarray:
        """(grad u1, grad u2, grad theta) as a (6, n, m) half-layout stack."""
        d1, d2 = self.d1, self.d2
        return np.stack([1j * d1 * y[0], 1j * d2 * y[0], 1j * d1 * y[1], 1j * d2 * y[1],
                         1j * d1 * y[2], 1j * d2 * y[2]])

    def __call__(self, state: SimState) -> DiagnosticsRecord:
        grid = self.grid
        y = state.to_array()
        phys = sp.to_physical(y, grid.n)
        u, th = phys[:2], phys[2]
        grads = self.gradients(y)
        qs = [math.inf] + self.q_extra
        bu = block_lq_norms(grads[:4], self.partition, self.js, qs)
        bt = block_lq_norms(grads[4:], self.partition, self.js, qs)
        besov_u = {q: lq_sum(bu[:, i], 1.0) for i, q in enumerate(qs)}
        besov_t = {q: lq_sum(bt[:, i], 1.0) for i, q in enumerate(qs)}
        return DiagnosticsRecord(
            t=state.t,
            l2_u=sp.lq_from_samples(u, grid, 2), l4_u=sp.lq_from_samples(u, grid, 4),
            linf_u=sp.lq_from_samples(u, grid, math.inf),
            l2_theta=sp.lq_from_samples(th, grid, 2), l4_theta=sp.lq_from_samples(th, grid, 4),
            linf_theta=sp.lq_from_samples(th, grid, math.inf),
            besov_grad_u=besov_u[math.inf], besov_grad_theta=besov_t[math.inf],
            besov_grad_u_q={q: besov_u[q] for q in self.q_extra},
            besov_grad_theta_q={q: besov_t[q] for q in self.q_extra},
            hs_u={s: sp.hs_norm(state.u, s) for s in self.s_list},
            hs_theta={s: sp.hs_norm(state.theta, s) for s in self.s_list},
            vortex_stretch=self._stretch(grads),
        )

    def _stretch(self, grads):
        g = sp.to_physical(grads, self.grid.n)
        w1, w2 = -g[5], g[4]
        prod = np.stack([w1 * g[0] + w2 * g[1], w1 * g[2] + w2 * g[3]])
        return _half_l2(sp.to_spectral(prod) * self.dealias, self.grid)


def vortex_stretch_magnitude(state: SimState) -> float:
    """||(grad_perp theta . grad) u||_{L^2}, pseudo-spectral with the 2/3 filter."""
    obs = DiagnosticsObserver(state.grid, q_list=(), s_list=())
    return obs._stretch(obs.gradients(state.to_array()))


# ---------------------------------------------------------------------------
# pressure


def _pressure_terms(state: SimState):
    grid = state.grid
    wn = sp.wavenumbers(grid)
    m = grid.n // 2 + 1
    d1, d2 = wn.d1, wn.d2[:, :m]
    y = state.to_array()
    gu = sp.to_physical(np.stack([1j * d1 * y[0], 1j * d2 * y[0],
                                  1j * d1 * y[1], 1j * d2 * y[1]]), grid.n)
    # d_l u_m d_m u_l = (d1 u1)^2 + 2 (d2 u1)(d1 u2) + (d2 u2)^2
    quad = gu[0] * gu[0] + 2.0 * gu[1] * gu[2] + gu[3] * gu[3]
    dealias = wn.dealias[:, :m]
    source = sp.to_spectral(quad) * dealias - 1j * d2 * y[2]
    return grid, wn, y, source


def pressure_recover(state: SimState) -> SpectralField:
    """Zero-mean pressure solving -Lap p = d_l u_m d_m u_l - d_2 theta."""
    grid, wn, _, source = _pressure_terms(state)
    m = grid.n // 2 + 1
    p = source * wn.inv_d_sq[:, :m]
    return SpectralField.from_half(grid, p)


def pressure_consistency(state: SimState) -> float:
    """Max mismatch between grad p and the part of the momentum tendency
    removed by the Leray projector, relative to the tendency's size."""
    grid, wn, y, source = _pressure_terms(state)
    m = grid.n // 2 + 1
    d1, d2 = wn.d1, wn.d2[:, :m]
    dealias = wn.dealias[:, :m]
    phys = sp.to_physical(np.stack([y[0], y[1], 1j * d1 * y[0], 1j * d2 * y[0],
                                    1j * d1 * y[1], 1j * d2 * y[1]]), grid.n)
    adv = np.stack([phys[0] * phys[2] + phys[1] * phys[3],
                    phys[0] * phys[4] + phys[1] * phys[5]])
    force = -sp.to_spectral(adv) * dealias
    force[1] += y[2]
    removed = force - sp.leray_array(force, d1, d2, wn.inv_d_sq[:, :m])
    p = source * wn.inv_d_sq[:, :m]
    grad_p = np.stack([1j * d1 * p, 1j * d2 * p])
    scale = max(float(np.max(np.abs(force))), np.finfo(float).tiny)
    return float(np.max(np.abs(removed - grad_p))) / scale


# ---------------------------------------------------------------------------
# trajectory checks


def _records(traj: Trajectory, minimum: int) -> List[DiagnosticsRecord]:
    recs = list(traj.records)
    if len(recs) < minimum:
        raise ParameterError(f"need at least {minimum} samples, trajectory has {len(recs)}")
    if not all(isinstance(r, DiagnosticsRecord) for r in recs):
        raise ParameterError("trajectory records must be DiagnosticsRecord instances")
    return recs


@dataclass(frozen=True)
class DecayReport:
    q: float
    kind: str  # "equality" or "one-sided"
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance


def theta_decay_check(traj: Trajectory, q: float = 2.0) -> DecayReport:
    """Compare ||theta(t)||_q with exp(-lambda t) ||theta_0||_q.

    q = 2 is an identity of the truncated system, so the residual is the
    largest relative deviation in either direction. For q = 4 and q = inf
    only excess over the decay envelope counts.
    """
    recs = _records(traj, 2)
    q = float(q)
    lam = traj.params.lam
    t0 = recs[0].t
    ref = recs[0].lq_theta(q)
    if ref == 0.0:
        return DecayReport(q, "equality" if q == 2.0 else "one-sided", 0.0,
                           THETA_L2_TOL if q == 2.0 else ONE_SIDED_ALLOWANCE)
    worst = 0.0
    for r in recs[1:]:
        diff = (r.lq_theta(q) - math.exp(-lam * (r.t - t0)) * ref) / ref
        worst = max(worst, abs(diff) if q == 2.0 else max(diff, 0.0))
    if q == 2.0:
        return DecayReport(q, "equality", worst, THETA_L2_TOL)
    return DecayReport(q, "one-sided", worst, ONE_SIDED_ALLOWANCE)


@dataclass(frozen=True)
class BoundReport:
    max_violation: float
    violations: int
    allowance: float = ONE_SIDED_ALLOWANCE

    @property
    def passed(self) -> bool:
        return self.violations == 0


def velocity_bound_check(traj: Trajectory) -> BoundReport:
    """||u(t)||_2 <= exp(-nu t) ||u0||_2 + ||theta0||_2 / nu, one-sided with
    a relative allowance; the violation measure is relative to the bound."""
    recs = _records(traj, 2)
    nu = traj.params.nu
    t0 = recs[0].t
    u0, th0 = recs[0].l2_u, recs[0].l2_theta
    worst, count = 0.0, 0
    for r in recs:
        bound = math.exp(-nu * (r.t - t0)) * u0 + th0 / nu
        excess = r.l2_u - bound
        if excess <= 0.0:
            continue
        rel = excess / bound if bound > 0 else math.inf
        worst = max(worst, rel)
        if rel > ONE_SIDED_ALLOWANCE:
            count += 1
    return BoundReport(worst, count)


@dataclass(frozen=True)
class ThresholdReport:
    status: str  # "never", "crossed" or "hypotheses-unmet"
    first_crossing: Optional[float]
    max_frac_a0: float
    max_frac_b0: float
    frac_a0: Tuple[float, ...]
    frac_b0: Tuple[float, ...]
    a0: float
    b0: float

    @property
    def hypotheses_met(self) -> bool:
        return self.status != "hypotheses-unmet"


def threshold_fractions(recs: Sequence[DiagnosticsRecord], cfg: ThresholdConfig):
    fa = tuple(_fraction(r.besov_grad_u, cfg.a0) for r in recs)
    fb = tuple(_fraction(r.besov_grad_theta, cfg.b0) for r in recs)
    return fa, fb


def threshold_monitor(traj: Trajectory, cfg: ThresholdConfig) -> ThresholdReport:
    """Track ||grad u||/A0 and ||grad theta||/B0 along the run.

    The hypotheses hold when both initial fractions are below 1; a field
    that vanishes identically has fraction 0, so data with theta = 0 meets
    the temperature condition even though B0 may be 0.
    """
    recs = _records(traj, 1)
    fa, fb = threshold_fractions(recs, cfg)
    met = fa[0] < 1.0 and fb[0] < 1.0
    crossing = next((r.t for r, a, b in zip(recs, fa, fb) if a >= 1.0 or b >= 1.0), None)
    if not met:
        status = "hypotheses-unmet"
    else:
        status = "never" if crossing is None else "crossed"
    return ThresholdReport(status, crossing, max(fa), max(fb), fa, fb, cfg.a0, cfg.b0)


def time_derivative(times: Sequence[float], values: Sequence[float]) -> np.ndarray:
    """d/dt of a uniformly sampled series.

    Centered differences inside, second-order one-sided stencils at the
    ends. A strictly positive series is differentiated through its
    logarithm (d v = v d log v), which is exact for exponential decay; a
    series touching zero is differentiated directly.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 3:
        raise ParameterError("numerical differentiation needs at least 3 samples")
    h = np.diff(t)
    if np.max(np.abs(h - h[0])) > 1e-9 * abs(h[0]):
        raise ParameterError("samples must have a uniform cadence")
    h0 = float(h[0])
    positive = bool(np.all(v > 0))
    g = np.log(v) if positive else v
    d = np.empty_like(g)
    d[1:-1] = (g[2:] - g[:-2]) / (2.0 * h0)
    d[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h0)
    d[-1] = (3.0 * g[-1] - 4.0 * g[-2] + g[-3]) / (2.0 * h0)
    return v * d if positive else d


@dataclass(frozen=True)
class InequalityResidual:
    t: float
    which: str  # "u" or "theta"
    q: float
    lhs: float
    rhs: float
    slack: float
    implied_c0: float


@dataclass(frozen=True)
class ResidualReport:
    q: float
    c0: float
    residuals: Tuple[InequalityResidual, ...]

    @property
    def implied_c0(self) -> float:
        return max((r.implied_c0 for r in self.residuals), default=0.0)

    def per_time(self) -> List[float]:
        """max of the u and theta implied constants at each sample time."""
        out: Dict[float, float] = {}
        for r in self.residuals:
            out[r.t] = max(out.get(r.t, 0.0), r.implied_c0)
        return [out[t] for t in sorted(out)]


def _implied(lhs, scale, denom):
    allow = ONE_SIDED_ALLOWANCE * scale
    if lhs <= allow:
        return 0.0
    return (lhs - allow) / denom if denom > 0 else math.inf


def inequality_residuals(traj: Trajectory, q: float, c0: float) -> ResidualReport:
    """Residuals of the Besov differential inequalities

        d/dt U + nu U         <= c0 U_inf U + c0 T,
        d/dt T + lambda T     <= c0 U_inf T,

    with U = ||grad u||_{B^0_{q,1}}, T = ||grad theta||_{B^0_{q,1}} and
    U_inf the q = inf value. ``implied_c0`` is the smallest constant that
    keeps the slack above the relative allowance.
    """
    q = float(q)
    if not q >= 2.0:
        raise ParameterError(f"q must lie in [2, inf], got {q}")
    recs = _records(traj, 3)
    times = [r.t for r in recs]
    U = np.array([r.besov("u", q) for r in recs])
    T = np.array([r.besov("theta", q) for r in recs])
    Uinf = np.array([r.besov_grad_u for r in recs])
    dU = time_derivative(times, U)
    dT = time_derivative(times, T)
    nu, lam = traj.params.nu, traj.params.lam
    out = []
    for k, t in enumerate(times):
        for which, dv, v, damp, denom in (
            ("u", dU[k], U[k], nu, Uinf[k] * U[k] + T[k]),
            ("theta", dT[k], T[k], lam, Uinf[k] * T[k]),
        ):
            lhs = float(dv + damp * v)
            rhs = float(c0 * denom)
            scale = abs(float(dv)) + damp * float(v)
            out.append(InequalityResidual(t, which, q, lhs, rhs, rhs - lhs,
                                          _implied(lhs, scale, float(denom))))
    return ResidualReport(q, float(c0), tuple(out))


@dataclass(frozen=True)
class HsEnergyReport:
    s: float
    times: Tuple[float, ...]
    Y: Tuple[float, ...]
    implied_constant: float
    decreasing_from: Optional[float]


def hs_energy_tracker(traj: Trajectory, s: float) -> HsEnergyReport:
    """Y = ||u||_{H^s} + ||theta||_{H^s} and the smallest C with
    dY/dt + min(nu, lambda) Y <= C (1 + Y) Y along the run.

    ``decreasing_from`` is the first sample time after which Y never grows.
    """
    s = float(s)
    if not s > 2.0:
        raise ParameterError(f"the H^s energy inequality needs s > 2, got {s}")
    recs = _records(traj, 3)
    if s not in recs[0].hs_u:
        raise ParameterError(f"H^{s} norms were not recorded")
    times = [r.t for r in recs]
    Y = np.array([r.hs_u[s] + r.hs_theta[s] for r in recs])
    dY = time_derivative(times, Y)
    damp = min(traj.params.nu, traj.params.lam)
    implied = 0.0
    for k in range(len(Y)):
        lhs = dY[k] + damp * Y[k]
        implied = max(implied, _implied(float(lhs), abs(float(dY[k])) + damp * float(Y[k]),
                                        float((1.0 + Y[k]) * Y[k])))
    start = None
    for k in range(len(Y)):
        if np.all(np.diff(Y[k:]) <= 0):
            start = times[k]
            break
    return HsEnergyReport(s, tuple(times), tuple(float(v) for v in Y), implied, start)


# ---------------------------------------------------------------------------
# studies driving the solver


def _l2_stack(y: np.ndarray, grid: GridSpec) -> float:
    return _half_l2(y, grid)


def _hstar_half(y: np.ndarray, partition: DyadicPartition, sigma: float) -> float:
    # the zero mode has no dyadic block, so the mean is simply dropped
    full = sp.half_to_full(y, partition.grid.n)
    js = list(partition.homogeneous_range)
    norms = block_l2_norms(full, partition, js)
    w = np.array([1.0 if j <= 0 else 2.0 ** (-sigma * j) for j in js])
    return float(math.sqrt(np.sum((w * norms) ** 2)))


def _with_cutoff(params: ModelParams, N: float) -> ModelParams:
    return replace(params, cutoff_N=float(N))


@dataclass(frozen=True)
class CauchyReport:
    N_list: Tuple[float, ...]
    l2_diffs: Tuple[float, ...]
    hstar_diffs: Tuple[float, ...]
    nonlinear_hstar_diffs: Tuple[float, ...]
    sigma: float

    @staticmethod
    def _ratios(values):
        return tuple(a / b if b > 0 else math.inf for a, b in zip(values, values[1:]))

    @property
    def l2_ratios(self):
        return self._ratios(self.l2_diffs)

    @property
    def hstar_ratios(self):
        return self._ratios(self.hstar_diffs)

    @property
    def monotone(self) -> bool:
        return all(b <= a for a, b in zip(self.l2_diffs, self.l2_diffs[1:]))


def cauchy_convergence_study(initial: SimState, params: ModelParams, config: StepperConfig,
                             N_list: Sequence[float], sigma: float = 0.5) -> CauchyReport:
    """Run the same data under each cutoff in ``N_list`` in lockstep and
    return, for consecutive pairs, sup_t of the L^2 and H_*^{-sigma}
    differences of (u, theta) and the H_*^{-sigma} difference of the
    advection term.
    """
    Ns = [float(N) for N in N_list]
    grid = initial.grid
    if len(Ns) < 3 or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ParameterError("N_list must be strictly increasing with at least 3 entries")
    if Ns[-1] > grid.dealias_cutoff:
        raise ParameterError(
            f"N={Ns[-1]:g} exceeds the dealiasing cutoff {grid.dealias_cutoff:g} of the grid"
        )
    partition = build_partition(grid)
    plist = [_with_cutoff(params, N) for N in Ns]
    starts = [_confine(initial, p) for p in plist]
    dyns = [Dynamics(grid, p) for p in plist]
    buoy = [Dynamics(grid, replace(p, advection=False)) for p in plist]
    gens = [iterate(s, p, config, partition) for s, p in zip(starts, plist)]
    pairs = len(Ns) - 1
    l2 = [0.0] * pairs
    hs = [0.0] * pairs
    nl = [0.0] * pairs
    for states in zip(*gens):
        ys = [st.to_array() for st in states]
        adv = [d.nonlinear(y) - b.nonlinear(y) for d, b, y in zip(dyns, buoy, ys)]
        for i in range(pairs):
            diff = ys[i + 1] - ys[i]
            l2[i] = max(l2[i], _l2_stack(diff, grid))
            hs[i] = max(hs[i], _hstar_half(diff, partition, sigma))
            nl[i] = max(nl[i], _hstar_half(adv[i + 1] - adv[i], partition, sigma))
    return CauchyReport(tuple(Ns), tuple(l2), tuple(hs), tuple(nl), sigma)


def _confine(state: SimState, params: ModelParams) -> SimState:
    from .solver import truncate_state

    return truncate_state(state, params)


@dataclass(frozen=True)
class UniquenessReport:
    dt: float
    discrepancies: Tuple[float, float]
    ratio: float
    fitted_K: float
    deterministic: bool


def _lockstep(initial, params, configs, partition):
    gens = [iterate(initial, params, c, partition) for c in configs]
    for states in zip(*gens):
        yield [s.to_array() for s in states]


def _refined(config: StepperConfig, factor: int) -> StepperConfig:
    return replace(config, dt=config.dt / factor, sample_every=int(config.sample_every) * factor)


def uniqueness_check(initial: SimState, params: ModelParams,
                     config: StepperConfig) -> UniquenessReport:
    """Time-step refinement as a surrogate for uniqueness.

    Integrates with dt, dt/2 and dt/4 at common sample times; the ratio of
    the consecutive sup_t L^2 discrepancies is 16 for a fourth-order
    scheme. ``fitted_K`` is the constant with e(dt, dt/2) = K dt^4. A
    repeated run with identical settings must reproduce every sample bit
    for bit.
    """
    grid = initial.grid
    partition = build_partition(grid)
    cfgs = [config, _refined(config, 2), _refined(config, 4), config]
    e1 = e2 = 0.0
    same = True
    for y0, y1, y2, y3 in _lockstep(initial, params, cfgs, partition):
        e1 = max(e1, _l2_stack(y0 - y1, grid))
        e2 = max(e2, _l2_stack(y1 - y2, grid))
        same = same and np.array_equal(y0, y3)
    ratio = e1 / e2 if e2 > 0 else math.inf
    return UniquenessReport(config.dt, (e1, e2), ratio, e1 / config.dt**4, bool(same))


@dataclass(frozen=True)
class PerturbationReport:
    eps: float
    times: Tuple[float, ...]
    growth: Tuple[float, ...]
    fitted_rate: float
    besov_scale: float


def perturbation_growth(initial: SimState, params: ModelParams, config: StepperConfig,
                        eps: float = 1e-8, mode: Tuple[int, int] = (1, 2)) -> PerturbationReport:
    """Grow a perturbation of size ``eps`` in one temperature mode.

    Reports the L^2 growth factor G(t) = |delta(t)| / |delta(0)|, the fitted
    rate max_t log G(t) / t and, for comparison, sup_t of
    max(||grad u||, ||grad theta||) in B^0_{inf,1} along the base run.
    """
    grid = initial.grid
    partition = build_partition(grid)
    k1, k2 = mode
    th = initial.theta.coeffs.copy()
    th[k1 % grid.n, k2 % grid.n] += eps
    th[-k1 % grid.n, -k2 % grid.n] += eps
    pert = SimState(initial.u, SpectralField(grid, th), initial.t)
    obs = DiagnosticsObserver(grid, q_list=(), s_list=(), partition=partition)
    times, growth = [], []
    scale = 0.0
    delta0 = None
    for a, b in zip(iterate(initial, params, config, partition),
                    iterate(pert, params, config, partition)):
        d = _l2_stack(b.to_array() - a.to_array(), grid)
        if delta0 is None:
            delta0 = d
        rec = obs(a)
        scale = max(scale, rec.besov_grad_u, rec.besov_grad_theta)
        times.append(a.t - initial.t)
        growth.append(d / delta0 if delta0 > 0 else 0.0)
    rate = max((math.log(g) / t for t, g in zip(times, growth) if t > 0 and g > 0),
               default=0.0)
    return PerturbationReport(eps, tuple(times), tuple(growth), rate, scale)


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class BatteryRun:
    label: str
    init: InitialDataSpec
    params: ModelParams
    config: StepperConfig


def standard_battery(n: int = 128, dt: float = 0.01, t_end: float = 2.0,
                     sample_interval: float = 0.05) -> List[BatteryRun]:
    """The fixed set of small-data runs used to calibrate C0.

    Samples are taken every ``sample_interval`` time units whatever dt is,
    so refinements in dt leave the differentiation cadence unchanged.
    """
    every = int(round(sample_interval / dt))
    cfg = StepperConfig(dt=dt, t_end=t_end, sample_every=every)
    runs = []
    for seed in (1, 2, 3):
        runs.append(BatteryRun(
            f"random_band_seed{seed}",
            InitialDataSpec("random_band", 0.1, 0.02, seed=seed, band=(1.0, 6.0)),
            ModelParams(0.2, 0.2), cfg))
    runs.append(BatteryRun("taylor_green", InitialDataSpec("taylor_green", 0.1, 0.02),
                           ModelParams(0.2, 0.1), cfg))
    runs.append(BatteryRun(
        "random_band_buoyant",
        InitialDataSpec("random_band", 0.05, 0.05, seed=7, band=(1.0, 8.0)),
        ModelParams(0.1, 0.2), cfg))
    del n  # grid is supplied at run time; kept for a uniform call signature
    return runs


@dataclass(frozen=True)
class CalibrationReport:
    c0: float
    per_run: Dict[str, float]


def battery_trajectory(entry: BatteryRun, grid: GridSpec, q_list=(2.0, math.inf)) -> Trajectory:
    partition = build_partition(grid)
    state, _ = make_initial_data(entry.init, grid, partition, entry.params)
    obs = DiagnosticsObserver(grid, q_list=q_list, s_list=(), partition=partition)
    return run(state, entry.params, entry.config, observer=obs, partition=partition)


def implied_c0_of(traj: Trajectory, q_list=(2.0, math.inf)) -> float:
    return max(inequality_residuals(traj, q, 1.0).implied_c0 for q in q_list)


def calibrate_c0(grid: GridSpec, battery: Optional[Sequence[BatteryRun]] = None,
                 q_list=(2.0, math.inf)) -> CalibrationReport:
    """C0 = max implied_c0 over the battery (both inequalities, every q)."""
    battery = list(battery) if battery is not None else standard_battery(grid.n)
    per = {}
    for entry in battery:
        per[entry.label] = implied_c0_of(battery_trajectory(entry, grid, q_list), q_list)
    return CalibrationReport(max(per.values()), per)
