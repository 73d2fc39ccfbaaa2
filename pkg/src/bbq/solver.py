"""
Time integration of the Fourier-truncated damped Boussinesq system

    d/dt u + P J_N (u . grad u) + nu u     = P J_N (theta e2),
    d/dt theta + J_N (u . grad theta) + lambda theta = 0,

with u divergence-free and (u, theta) confined to the ball |xi| <= N.

The damping is integrated exactly through the factors exp(-nu dt) and
exp(-lambda dt); advection and buoyancy go through classical RK4 in the
integrating-factor frame. Products are formed on the grid from fields that
already sit inside the 2/3 square, and the result is filtered back into
the ball, so the retained modes of every product are alias-free.

Internally states are (3, n, n//2+1) half-spectrum arrays holding
(u1, u2, theta); :class:`SimState` carries full-layout fields at the API.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, List, Optional, Tuple

import numpy as np

from . import spectral as sp
from .errors import (
    BlowUpError,
    ConfigError,
    InvariantError,
    ParameterError,
    PreconditionError,
    StabilityError,
)
from .littlewood_paley import DyadicPartition, block_lq_norms, build_partition, lq_sum
from .spectral import GridSpec, SpectralField, VectorField

log = logging.getLogger(__name__)

BLOWUP_BESOV = 1e6
CONFINEMENT_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Damping coefficients and truncation radius.

    ``cutoff_N=None`` selects the default radius, the dealiasing cutoff
    (2/3 of the Nyquist wavenumber). ``advection=False`` drops the
    quadratic terms (linear-regime checks).
    """

    nu: float
    lam: float
    cutoff_N: Optional[float] = None
    advection: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise ParameterError(f"nu must be positive, got {self.nu}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ParameterError(f"lambda must be positive, got {self.lam}")
        if self.cutoff_N is not None and not self.cutoff_N > 0:
            raise ParameterError(f"cutoff N must be positive, got {self.cutoff_N}")

    def cutoff(self, grid: GridSpec) -> float:
        return grid.dealias_cutoff if self.cutoff_N is None else float(self.cutoff_N)


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    t_end: float
    sample_every: int = 1
    scheme: str = "rk4_integrating_factor"
    cfl_safety: float = 0.5

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"stepper.dt must be positive, got {self.dt}")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError(f"stepper.t_end must be positive, got {self.t_end}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ConfigError(f"stepper.sample_every must be a positive integer")
        if self.scheme != "rk4_integrating_factor":
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        ratio = self.t_end / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError("stepper.t_end must be an integer multiple of stepper.dt")
        if self.n_steps % self.sample_every:
            raise ConfigError(
                "the number of steps t_end/dt must be a multiple of stepper.sample_every"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def n_samples(self) -> int:
        return self.n_steps // int(self.sample_every) + 1


@dataclass(frozen=True, eq=False)
class SimState:
    u: VectorField
    theta: SpectralField
    t: float = 0.0

    @property
    def grid(self) -> GridSpec:
        return self.theta.grid

    @classmethod
    def from_array(cls, grid, y_half, t):
        full = sp.half_to_full(y_half, grid.n)
        u = VectorField.from_array(grid, full[:2], divergence_free=True)
        return cls(u, SpectralField(grid, full[2]), float(t))

    def to_array(self) -> np.ndarray:
        m = self.grid.n // 2 + 1
        return np.concatenate([self.u.stacked[:, :, :m], self.theta.half[None]])


def state_mask(grid: GridSpec, params: ModelParams) -> np.ndarray:
    """Modes a solver state may occupy: the J_N ball intersected with the
    2/3 square (full layout)."""
    wn = sp.wavenumbers(grid)
    return (wn.xi_abs <= params.cutoff(grid)) & wn.dealias


def check_state(state: SimState, params: ModelParams) -> None:
    """Raise InvariantError unless the state is confined to the mode set and
    divergence-free, both to 1e-12 relative (rounding residue is allowed)."""
    mask = state_mask(state.grid, params)
    stack = np.concatenate([state.u.stacked, state.theta.coeffs[None]])
    size = float(np.max(np.abs(stack))) if stack.size else 0.0
    if np.max(np.abs(stack[:, ~mask]), initial=0.0) > CONFINEMENT_TOL * size:
        raise InvariantError("state has modes outside the truncation ball")
    u = state.u.stacked
    scale = float(np.max(np.abs(u))) if u.size else 0.0
    if sp.divergence_defect(u, state.grid) > CONFINEMENT_TOL * max(scale, np.finfo(float).tiny):
        raise InvariantError("velocity is not divergence-free")


@dataclass
class Trajectory:
    """Sampled run output: records from the observer plus optional snapshots."""

    grid: GridSpec
    params: ModelParams
    config: StepperConfig
    times: List[float] = field(default_factory=list)
    records: List[Any] = field(default_factory=list)
    snapshots: List[SimState] = field(default_factory=list)
    steps: int = 0

    def append(self, t, record):
        if self.times and not t > self.times[-1]:
            raise InvariantError("trajectory times must be strictly increasing")
        self.times.append(float(t))
        self.records.append(record)


class Dynamics:
    """Precomputed tables and the nonlinear operator for one (grid, params)."""

    def __init__(self, grid: GridSpec, params: ModelParams):
        self.grid = grid
        self.params = params
        n = grid.n
        self.n = n
        m = n // 2 + 1
        wn = sp.wavenumbers(grid)
        self.d1 = wn.d1
        self.d2 = wn.d2[:, :m]
        self.inv_d_sq = wn.inv_d_sq[:, :m]
        self.mask = state_mask(grid, params)[:, :m].astype(float)
        self.rates = np.array([params.nu, params.nu, params.lam])[:, None, None]
        self.umax = 0.0
        self.cfl_warned = False
        self._id1 = np.broadcast_to(1j * self.d1, (n, m)).copy()
        self._id2 = np.broadcast_to(1j * self.d2, (n, m)).copy()
        self._spec = np.empty((7, n, m), dtype=np.complex128)
        self._adv = np.empty((3, n, n))

    def project(self, y):
        out = y * self.mask
        out[:2] = sp.leray_array(out[:2], self.d1, self.d2, self.inv_d_sq)
        return out

    def advection_terms(self, y):
        """Return (u.grad u1, u.grad u2, u.grad theta) on the grid, plus u."""
        d1, d2 = self.d1, self.d2
        u1, u2, th = y[0], y[1], y[2]
        spec = self._spec
        spec[0] = u1
        spec[1] = u2
        np.multiply(self._id1, u1, out=spec[2])
        np.multiply(self._id2, u1, out=spec[3])
        np.multiply(self._id1, u2, out=spec[4])
        np.multiply(self._id1, th, out=spec[5])
        np.multiply(self._id2, th, out=spec[6])
        ph = sp.to_physical(spec, self.n)
        # u is divergence-free in the derivative symbols: d2 u2 = -d1 u1
        adv = self._adv
        np.multiply(ph[0], ph[2], out=adv[0])
        adv[0] += ph[1] * ph[3]
        np.multiply(ph[0], ph[4], out=adv[1])
        adv[1] -= ph[1] * ph[2]
        np.multiply(ph[0], ph[5], out=adv[2])
        adv[2] += ph[1] * ph[6]
        return adv, ph[:2]

    def nonlinear(self, y, track_umax=False):
        """Advection and buoyancy part of the tendency (no damping)."""
        out = np.zeros_like(y)
        if self.params.advection:
            adv, u = self.advection_terms(y)
            if track_umax:
                self.umax = float(np.sqrt(np.max(u[0] ** 2 + u[1] ** 2)))
            out -= sp.to_spectral(adv) * self.mask
        out[1] += y[2]
        out[:2] = sp.leray_array(out[:2], self.d1, self.d2, self.inv_d_sq)
        return out

    def tendency(self, y):
        return self.nonlinear(y) - self.rates * y

    def step(self, y, dt):
        """One integrating-factor RK4 step."""
        rates = self.rates
        eh = np.exp(-rates * (0.5 * dt))
        e = np.exp(-rates * dt)
        k1 = self.nonlinear(y, track_umax=True)
        k2 = self.nonlinear(eh * (y + (0.5 * dt) * k1))
        k3 = self.nonlinear(eh * y + (0.5 * dt) * k2)
        k4 = self.nonlinear(e * y + dt * (eh * k3))
        return e * y + (dt / 6.0) * (e * k1 + 2.0 * eh * (k2 + k3) + k4)


def _courant(dyn: Dynamics, dt: float) -> float:
    return dt * dyn.umax / dyn.grid.dx


def _check_cfl(dyn, config, t):
    c = _courant(dyn, config.dt)
    if c > 2.0 * config.cfl_safety:
        raise StabilityError(
            f"CFL number {c:.3f} at t={t:.6g} exceeds twice the safety bound "
            f"{config.cfl_safety}"
        )
    if c > config.cfl_safety and not dyn.cfl_warned:
        dyn.cfl_warned = True
        log.warning("CFL number %.3f exceeds safety bound %.2f at t=%.6g",
                    c, config.cfl_safety, t)


def rhs(state: SimState, params: ModelParams) -> Tuple[VectorField, SpectralField]:
    """Full tendency (du, dtheta) of the truncated system, damping included."""
    grid = state.grid
    dyn = Dynamics(grid, params)
    y = state.to_array()
    full = sp.half_to_full(dyn.tendency(y), grid.n)
    return (VectorField.from_array(grid, full[:2], divergence_free=True),
            SpectralField(grid, full[2]))


def step(state: SimState, params: ModelParams, config: StepperConfig) -> SimState:
    """Advance one time step; raises BlowUpError on non-finite output."""
    grid = state.grid
    dyn = Dynamics(grid, params)
    y = dyn.project(state.to_array())
    y1 = dyn.step(y, config.dt)
    _check_cfl(dyn, config, state.t)
    if not np.all(np.isfinite(y1)):
        raise BlowUpError(f"non-finite state after t={state.t:.6g}", state.t)
    return SimState.from_array(grid, y1, state.t + config.dt)


def grad_u_besov_inf(y_half: np.ndarray, partition: DyadicPartition) -> float:
    """||grad u||_{B^0_{inf,1}} of a half-layout state (Frobenius magnitude)."""
    grid = partition.grid
    wn = sp.wavenumbers(grid)
    m = grid.n // 2 + 1
    d1, d2 = wn.d1, wn.d2[:, :m]
    u1, u2 = y_half[0], y_half[1]
    g = np.stack([1j * d1 * u1, 1j * d2 * u1, 1j * d1 * u2, 1j * d2 * u2])
    js = list(partition.homogeneous_range)
    return lq_sum(block_lq_norms(g, partition, js, [math.inf])[:, 0], 1.0)


def iterate(initial: SimState, params: ModelParams, config: StepperConfig,
            partition: Optional[DyadicPartition] = None) -> Iterator[SimState]:
    """Yield the state at t = 0 and after every ``sample_every`` steps.

    Raises BlowUpError (with ``last_time``) when the state stops being finite
    or ||grad u||_{B^0_{inf,1}} exceeds 1e6 at a sample.
    """
    grid = initial.grid
    dyn = Dynamics(grid, params)
    partition = partition or build_partition(grid)
    check_state(initial, params)
    y = dyn.project(initial.to_array())
    t0 = initial.t
    dt = config.dt
    every = int(config.sample_every)
    yield SimState.from_array(grid, y, t0)
    last_t = t0
    for i in range(1, config.n_steps + 1):
        t_prev = t0 + (i - 1) * dt
        y = dyn.step(y, dt)
        _check_cfl(dyn, config, t_prev)
        t = t0 + i * dt
        if not np.all(np.isfinite(y)):
            raise BlowUpError(f"non-finite state after t={t_prev:.6g}", last_t)
        if i % every == 0:
            # cheap bound first: sum_k |xi| |u_k| dominates the Besov norm / 2
            if _coarse_grad_bound(y, grid) > BLOWUP_BESOV:
                b = grad_u_besov_inf(y, partition)
                if b > BLOWUP_BESOV:
                    raise BlowUpError(
                        f"||grad u||_B0inf1 = {b:.3e} exceeds {BLOWUP_BESOV:g} at t={t:.6g}",
                        last_t,
                    )
            last_t = t
            yield SimState.from_array(grid, y, t)


def _coarse_grad_bound(y, grid):
    wn = sp.wavenumbers(grid)
    m = grid.n // 2 + 1
    return 4.0 * float(np.sum(wn.xi_abs[:, :m] * (np.abs(y[0]) + np.abs(y[1]))))


def run(initial: SimState, params: ModelParams, config: StepperConfig,
        observer: Optional[Callable[[SimState], Any]] = None,
        snapshot_every: int = 0,
        partition: Optional[DyadicPartition] = None) -> Trajectory:
    """Integrate to ``config.t_end``.

    Args:
        observer: called on every sampled state; its return value is stored
            in ``Trajectory.records`` (the state itself when omitted).
        snapshot_every: keep every k-th sampled state in
            ``Trajectory.snapshots`` (0 keeps none).

    Raises:
        BlowUpError, StabilityError: carry the partial trajectory in
            ``.trajectory``.
    """
    traj = Trajectory(initial.grid, params, config)
    try:
        for k, state in enumerate(iterate(initial, params, config, partition)):
            traj.append(state.t, observer(state) if observer else state)
            traj.steps = k * int(config.sample_every)
            if snapshot_every and k % snapshot_every == 0:
                traj.snapshots.append(state)
    except (BlowUpError, StabilityError) as exc:
        exc.trajectory = traj
        raise
    return traj


# ---------------------------------------------------------------------------
# vorticity formulation


def biot_savart(omega: SpectralField) -> VectorField:
    """u = perp_grad(Laplacian^-1 omega), so curl(u) = omega.

    With grad_perp = (-d2, d1): omega = cos(2 pi x1 / L) gives
    u = (0, (L / 2 pi) sin(2 pi x1 / L)). Pure-Nyquist modes carry no
    derivative symbol and are dropped.
    """
    _require_mean_zero_scalar(omega)
    wn = sp.wavenumbers(omega.grid)
    psi = -omega.coeffs * wn.inv_d_sq
    return VectorField.from_array(
        omega.grid, np.stack([-1j * wn.d2 * psi, 1j * wn.d1 * psi]), divergence_free=True
    )


def _require_mean_zero_scalar(f: SpectralField):
    scale = float(np.max(np.abs(f.coeffs)))
    if abs(f.coeffs[0, 0]) > 1e-12 * max(scale, np.finfo(float).tiny):
        raise PreconditionError("vorticity must have zero mean")


class VorticityDynamics:
    """Nonlinear operator of the (omega, theta) system on half arrays."""

    def __init__(self, grid: GridSpec, params: ModelParams):
        self.grid = grid
        self.params = params
        self.n = grid.n
        m = grid.n // 2 + 1
        wn = sp.wavenumbers(grid)
        self.d1 = wn.d1
        self.d2 = wn.d2[:, :m]
        self.inv_d_sq = wn.inv_d_sq[:, :m]
        self.mask = state_mask(grid, params)[:, :m].astype(float)
        self.rates = np.array([params.nu, params.lam])[:, None, None]

    def nonlinear(self, y, track_umax=False):
        d1, d2 = self.d1, self.d2
        om, th = y[0], y[1]
        out = np.zeros_like(y)
        if self.params.advection:
            psi = -om * self.inv_d_sq
            spec = np.stack([-1j * d2 * psi, 1j * d1 * psi, 1j * d1 * om, 1j * d2 * om,
                             1j * d1 * th, 1j * d2 * th])
            ph = sp.to_physical(spec, self.n)
            adv = np.stack([ph[0] * ph[2] + ph[1] * ph[3], ph[0] * ph[4] + ph[1] * ph[5]])
            out -= sp.to_spectral(adv) * self.mask
        out[0] += 1j * d1 * th
        return out

    def tendency(self, y):
        return self.nonlinear(y) - self.rates * y

    step = Dynamics.step


def vorticity_rhs(omega: SpectralField, theta: SpectralField,
                  params: ModelParams) -> Tuple[SpectralField, SpectralField]:
    """(d omega/dt, d theta/dt) = (-J_N(u.grad omega) - nu omega + d1 theta,
    -J_N(u.grad theta) - lambda theta) with u = biot_savart(omega)."""
    _require_mean_zero_scalar(omega)
    grid = omega.grid
    m = grid.n // 2 + 1
    dyn = VorticityDynamics(grid, params)
    y = np.stack([omega.half, theta.half])
    full = sp.half_to_full(dyn.tendency(y), grid.n)
    return SpectralField(grid, full[0]), SpectralField(grid, full[1])


def integrate_vorticity(omega: SpectralField, theta: SpectralField,
                        params: ModelParams, config: StepperConfig):
    """Integrate the vorticity form to t_end; returns (omega, theta)."""
    _require_mean_zero_scalar(omega)
    grid = omega.grid
    dyn = VorticityDynamics(grid, params)
    y = np.stack([omega.half, theta.half]) * dyn.mask
    for _ in range(config.n_steps):
        y = dyn.step(y, config.dt)
        if not np.all(np.isfinite(y)):
            raise BlowUpError("non-finite vorticity state", float("nan"))
    full = sp.half_to_full(y, grid.n)
    return SpectralField(grid, full[0]), SpectralField(grid, full[1])


def linear_solution(state: SimState, params: ModelParams, t: float) -> SimState:
    """Closed-form modewise solution of the system without advection:
    theta(t) = e^(-lambda t) theta0,
    u(t) = e^(-nu t) u0 + P(e2) theta0 (e^(-lambda t) - e^(-nu t)) / (nu - lambda)."""
    nu, lam = params.nu, params.lam
    grid = state.grid
    th0 = state.theta.coeffs
    if abs(nu - lam) > 1e-12:
        g = (math.exp(-lam * t) - math.exp(-nu * t)) / (nu - lam)
    else:
        g = t * math.exp(-nu * t)
    forcing = VectorField.from_array(grid, np.stack([np.zeros_like(th0), th0]))
    pf = sp.leray_project(forcing).stacked
    u = math.exp(-nu * t) * state.u.stacked + g * pf
    return SimState(VectorField.from_array(grid, u, True),
                    SpectralField(grid, math.exp(-lam * t) * th0), state.t + t)


# ---------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class InitialDataSpec:
    """Initial-data recipe.

    Attributes:
        shape: ``taylor_green``, ``random_band`` or ``file``.
        target_grad_u_besov: requested ||grad u0||_{B^0_{inf,1}}.
        target_grad_theta_besov: requested ||grad theta0||_{B^0_{inf,1}}.
        seed: RNG seed for ``random_band``.
        band: physical wavenumber band [lo, hi] for ``random_band``.
        path: directory holding u1/u2/theta snapshot files for ``file``.
        slope: ``random_band`` amplitudes of the stream function and of
            theta decay like |xi|^-slope across the band.
    """

    shape: str
    target_grad_u_besov: float
    target_grad_theta_besov: float
    seed: int = 0
    band: Tuple[float, float] = (1.0, 6.0)
    path: Optional[str] = None
    slope: float = 0.0

    def __post_init__(self):
        if self.shape not in ("taylor_green", "random_band", "file"):
            raise ConfigError(f"unknown initial shape {self.shape!r}")
        for name in ("target_grad_u_besov", "target_grad_theta_besov"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ParameterError(f"{name} must be a finite value >= 0, got {v}")
        lo, hi = self.band
        if not (0 <= lo < hi):
            raise ConfigError(f"init.band must satisfy 0 <= lo < hi, got {self.band}")
        if not (math.isfinite(self.slope) and self.slope >= 0):
            raise ConfigError(f"init.slope must be finite and >= 0, got {self.slope}")
        if self.shape == "file" and not self.path:
            raise ConfigError("init.path is required for shape 'file'")


def _raw_shape(spec: InitialDataSpec, grid: GridSpec):
    n = grid.n
    x1, x2 = grid.coordinates()
    k = grid.kappa
    if spec.shape == "taylor_green":
        u1 = np.sin(k * x1) * np.cos(k * x2)
        u2 = -np.cos(k * x1) * np.sin(k * x2)
        th = np.cos(k * x1) * np.cos(2 * k * x2)
        return (np.fft.fft2(np.stack([u1, u2])) / (n * n), np.fft.fft2(th) / (n * n))
    if spec.shape == "random_band":
        return _random_band(spec, grid)
    from .io import read_field  # local import: io depends on solver types

    fields = {}
    for name in ("u1", "u2", "theta"):
        f = read_field(f"{spec.path}/{name}.bbqf")
        if f.grid.n != grid.n or abs(f.grid.domain_length - grid.domain_length) > 1e-12:
            raise ConfigError(f"snapshot {name} does not match the configured grid")
        if isinstance(f, sp.RealField):
            f = sp.forward_transform(f)
        fields[name] = f.coeffs
    return np.stack([fields["u1"], fields["u2"]]), fields["theta"]


def _random_band(spec: InitialDataSpec, grid: GridSpec):
    # Draws are made on a wavenumber box fixed by the band, not by n, so a
    # seed names the same field on every grid that resolves the band.
    n = grid.n
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.band
    K = int(math.ceil(hi / grid.kappa))
    ks = np.arange(-K, K + 1)
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    xi = grid.kappa * np.hypot(k1, k2)
    inside = (xi >= lo) & (xi <= hi) & (xi > 0) & (np.abs(k1) < n / 2) & (np.abs(k2) < n / 2)
    weight = np.where(inside, np.power(np.where(inside, xi, 1.0), -spec.slope), 0.0)
    wn = sp.wavenumbers(grid)

    def draw():
        z = rng.standard_normal(k1.shape) + 1j * rng.standard_normal(k1.shape)
        c = np.zeros((n, n), dtype=np.complex128)
        c[k1[inside] % n, k2[inside] % n] = (z * weight)[inside]
        # real part of the synthesised field, i.e. the Hermitian average
        return 0.5 * (c + np.conj(c[wn.conj_index]))

    psi = draw()
    th = draw()
    return np.stack([-1j * wn.d2 * psi, 1j * wn.d1 * psi]), th


def grad_besov_inf(stack_full: np.ndarray, partition: DyadicPartition) -> float:
    """||grad f||_{B^0_{inf,1}} for a (c, n, n) full-layout component stack."""
    grid = partition.grid
    wn = sp.wavenumbers(grid)
    m = grid.n // 2 + 1
    h = stack_full[..., :m]
    d1, d2 = wn.d1, wn.d2[:, :m]
    g = np.concatenate([1j * d1 * h, 1j * d2 * h])
    js = list(partition.homogeneous_range)
    return lq_sum(block_lq_norms(g, partition, js, [math.inf])[:, 0], 1.0)


def make_initial_data(spec: InitialDataSpec, grid: GridSpec,
                      partition: Optional[DyadicPartition] = None,
                      params: Optional[ModelParams] = None):
    """Build a confined, divergence-free initial state hitting the requested
    gradient Besov norms.

    The raw shape is truncated to the solver's mode set (J_N and the 2/3
    filter), projected, and then each field is rescaled; the norms are
    1-homogeneous, so the targets are met to rounding.

    Returns:
        (SimState, dict) with the achieved ``grad_u_besov`` and
        ``grad_theta_besov``.
    """
    partition = partition or build_partition(grid)
    params = params or ModelParams(1.0, 1.0)
    u, th = _raw_shape(spec, grid)
    mask = state_mask(grid, params)
    u = sp.leray_array(u * mask, *_leray_tables(grid))
    th = th * mask
    u[:, 0, 0] = 0.0
    th[0, 0] = 0.0
    # enforce exact Hermitian symmetry after the masking
    u = np.stack([_hermitian(c, grid) for c in u])
    th = _hermitian(th, grid)
    out = []
    for arr, target, name in ((u, spec.target_grad_u_besov, "velocity"),
                              (th[None], spec.target_grad_theta_besov, "temperature")):
        if target == 0:
            out.append(np.zeros_like(arr))
            continue
        current = grad_besov_inf(arr, partition)
        if current == 0:
            raise ParameterError(
                f"{name} shape is identically zero but target {target} is nonzero"
            )
        out.append(arr * (target / current))
    u, th = out[0], out[1][0]
    state = SimState(VectorField.from_array(grid, u, True), SpectralField(grid, th), 0.0)
    achieved = {
        "grad_u_besov": grad_besov_inf(u, partition),
        "grad_theta_besov": grad_besov_inf(th[None], partition),
    }
    return state, achieved


def _leray_tables(grid):
    wn = sp.wavenumbers(grid)
    return wn.d1, wn.d2, wn.inv_d_sq


def _hermitian(c, grid):
    wn = sp.wavenumbers(grid)
    return 0.5 * (c + np.conj(c[wn.conj_index]))


def truncate_state(state: SimState, params: ModelParams) -> SimState:
    """Restrict a state to the mode set of ``params`` (J_N of both fields)."""
    mask = state_mask(state.grid, params)
    u = state.u.stacked * mask
    return SimState(VectorField.from_array(state.grid, u, True),
                    SpectralField(state.grid, state.theta.coeffs * mask), state.t)
