"""
Dyadic (Littlewood-Paley) decomposition on the periodic grid.

The radial profile is built from the exp(-1/x) mollifier: ``radial_cutoff``
equals 1 on |xi| <= 1/2 and 0 on |xi| >= 1, and

    Phi_0(xi) = radial_cutoff(xi / 2) - radial_cutoff(xi),
    Phi_j(xi) = Phi_0(2^-j xi),

so Phi_j is supported in the open annulus 2^(j-1) < |xi| < 2^(j+1) and the
blocks telescope to 1 on every nonzero wavenumber. Phi_0(1) = 1, hence a
single mode with |xi| = 2^j sits entirely in block j. The inhomogeneous
low-frequency lump is Psi = radial_cutoff.

Block indices are integers; ``j_min``/``j_max`` bracket the blocks that
touch at least one nonzero grid wavenumber (including the corner modes
beyond the Nyquist radius), so every block sum below is exact on the grid.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, ParameterError, PreconditionError
from .spectral import (
    Field,
    GridSpec,
    RealField,
    SpectralField,
    VectorField,
    lq_from_samples,
    to_physical,
    wavenumbers,
)

MEAN_ZERO_TOL = 1e-12


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        s = 1.0 - t
        b = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    return a / (a + b)


def radial_cutoff(r):
    """Smooth radial cutoff: 1 on [0, 1/2], 0 on [1, inf)."""
    return 1.0 - _smooth_step(2.0 * np.asarray(r, dtype=float) - 1.0)


def phi0_profile(r):
    """Annulus profile Phi_0 as a function of |xi|."""
    r = np.asarray(r, dtype=float)
    return radial_cutoff(0.5 * r) - radial_cutoff(r)


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float
    q: float
    homogeneous: bool = True

    def __post_init__(self):
        for name in ("p", "q"):
            v = float(getattr(self, name))
            if not v >= 1.0:
                raise ParameterError(f"Besov exponent {name} must lie in [1, inf], got {v}")


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Tabulated dyadic partition of unity on one grid.

    Attributes:
        grid: the grid the tables are evaluated on.
        j_min, j_max: homogeneous block range resolvable on the grid.
        phi_hat: Phi_j on the full wavenumber table, one slab per j starting
            at ``j_lo = min(j_min, 0)``.
        psi_hat: inhomogeneous low-frequency lump Psi.
    """

    grid: GridSpec
    j_min: int
    j_max: int
    j_lo: int
    phi_hat: np.ndarray
    psi_hat: np.ndarray

    @property
    def homogeneous_range(self) -> range:
        return range(self.j_min, self.j_max + 1)

    @property
    def inhomogeneous_range(self) -> range:
        return range(-1, self.j_max + 1)

    def phi(self, j: int) -> np.ndarray:
        idx = j - self.j_lo
        if 0 <= idx < self.phi_hat.shape[0]:
            return self.phi_hat[idx]
        return np.zeros((self.grid.n, self.grid.n))

    def multiplier(self, j: int, homogeneous: bool = True) -> np.ndarray:
        """Fourier multiplier of Delta_j (full layout)."""
        if homogeneous:
            if j not in self.homogeneous_range:
                raise ParameterError(
                    f"block {j} outside the resolved range [{self.j_min}, {self.j_max}]"
                )
            return self.phi(j)
        if j < -1:
            raise ParameterError(f"inhomogeneous block index must be >= -1, got {j}")
        return self.psi_hat if j == -1 else self.phi(j)

    def multiplier_half(self, j: int, homogeneous: bool = True) -> np.ndarray:
        return self.multiplier(j, homogeneous)[:, : self.grid.n // 2 + 1]

    def partial_sum_multiplier(self, j: int) -> np.ndarray:
        """Multiplier of S_j = sum_{k=-1}^{j-1} Delta_k."""
        out = np.zeros((self.grid.n, self.grid.n))
        for k in range(-1, j):
            out = out + self.multiplier(k, homogeneous=False)
        return out


def _support_range(grid, profile):
    xi = wavenumbers(grid).xi_abs
    r = np.unique(xi[xi > 0])
    lo = int(math.floor(math.log2(r[0]))) - 2
    hi = int(math.ceil(math.log2(r[-1]))) + 2
    hits = [j for j in range(lo, hi + 1) if np.any(profile(np.ldexp(r, -j)) > 0)]
    return hits[0], hits[-1]


def _tabulate(grid: GridSpec, profile: Callable, cutoff: Callable) -> DyadicPartition:
    j_min, j_max = _support_range(grid, profile)
    if j_max - j_min + 1 < 3:
        raise ConfigError(
            f"grid n={grid.n}, L={grid.domain_length} hosts fewer than 3 dyadic blocks"
        )
    xi = wavenumbers(grid).xi_abs
    j_lo = min(j_min, 0)
    # np.ldexp scales by an exact power of two: Phi_j(xi) = Phi_0(2^-j xi) bitwise
    phi_hat = np.stack([profile(np.ldexp(xi, -j)) for j in range(j_lo, j_max + 1)])
    phi_hat[:, 0, 0] = 0.0
    psi_hat = cutoff(xi)
    phi_hat.setflags(write=False)
    psi_hat.setflags(write=False)
    return DyadicPartition(grid, j_min, j_max, j_lo, phi_hat, psi_hat)


@functools.lru_cache(maxsize=16)
def _cached_partition(grid: GridSpec) -> DyadicPartition:
    return _tabulate(grid, phi0_profile, radial_cutoff)


def build_partition(grid: GridSpec, profile: Optional[Callable] = None) -> DyadicPartition:
    """Tabulate the dyadic partition on ``grid``.

    ``profile`` replaces Phi_0 (used by the check suite to inject faults);
    the default partition is cached per grid.
    """
    if profile is None:
        return _cached_partition(grid)
    return _tabulate(grid, profile, radial_cutoff)


def partition_residue(partition: DyadicPartition) -> float:
    """max over nonzero grid wavenumbers of |1 - sum_j Phi_j|."""
    total = np.sum(partition.phi_hat, axis=0)
    xi = wavenumbers(partition.grid).xi_abs
    return float(np.max(np.abs(1.0 - total[xi > 0])))


def inhomogeneous_residue(partition: DyadicPartition) -> float:
    """max over all grid wavenumbers of |1 - Psi - sum_{j>=0} Phi_j|."""
    total = partition.psi_hat.copy()
    for j in range(0, partition.j_max + 1):
        total = total + partition.phi(j)
    return float(np.max(np.abs(1.0 - total)))


# ---------------------------------------------------------------------------
# blocks


def _resolve(partition, grid):
    if partition is None:
        return build_partition(grid)
    if partition.grid != grid:
        raise ParameterError("partition was built for a different grid")
    return partition


def _stack(f: Field) -> np.ndarray:
    return f.stacked if isinstance(f, VectorField) else f.coeffs[None]


def _require_mean_zero(stack):
    scale = float(np.max(np.abs(stack))) if stack.size else 0.0
    if np.max(np.abs(stack[:, 0, 0])) > MEAN_ZERO_TOL * max(scale, np.finfo(float).tiny):
        raise PreconditionError("homogeneous norms require a mean-zero field")


def dyadic_block(f: SpectralField, j: int, homogeneous: bool = True,
                 partition: Optional[DyadicPartition] = None) -> SpectralField:
    """Delta_j f (homogeneous Phi_j, or Psi for inhomogeneous j = -1)."""
    partition = _resolve(partition, f.grid)
    return SpectralField(f.grid, f.coeffs * partition.multiplier(j, homogeneous))


def partial_sum(f: SpectralField, j: int,
                partition: Optional[DyadicPartition] = None) -> SpectralField:
    """S_j f = sum_{k=-1}^{j-1} Delta_k f (inhomogeneous blocks)."""
    partition = _resolve(partition, f.grid)
    return SpectralField(f.grid, f.coeffs * partition.partial_sum_multiplier(j))


def block_lq_norms(half_stack: np.ndarray, partition: DyadicPartition,
                   js: Sequence[int], qs: Sequence[float],
                   homogeneous: bool = True) -> np.ndarray:
    """L^q norms of Delta_j applied to a stack of half-layout components.

    Returns an array of shape (len(js), len(qs)). The pointwise magnitude
    is Euclidean across components, so one inverse transform per block
    serves every exponent.
    """
    grid = partition.grid
    n = grid.n
    out = np.empty((len(js), len(qs)))
    for a, j in enumerate(js):
        phys = to_physical(half_stack * partition.multiplier_half(j, homogeneous), n)
        for b, q in enumerate(qs):
            out[a, b] = lq_from_samples(phys, grid, q)
    return out


def lq_sum(values: np.ndarray, q: float) -> float:
    if math.isinf(q):
        return float(np.max(values)) if len(values) else 0.0
    return float(np.sum(values**q) ** (1.0 / q))


def besov_norm(f: Field, params: BesovParams,
               partition: Optional[DyadicPartition] = None) -> float:
    """||2^(js) ||Delta_j f||_{L^p}||_{l^q} over the resolved block range.

    Vector fields use the pointwise Euclidean magnitude.
    """
    grid = f.grid
    partition = _resolve(partition, grid)
    stack = _stack(f)
    if params.homogeneous:
        _require_mean_zero(stack)
        js = list(partition.homogeneous_range)
    else:
        js = list(partition.inhomogeneous_range)
    norms = block_lq_norms(stack[..., : grid.n // 2 + 1], partition, js, [params.p],
                           params.homogeneous)[:, 0]
    weights = np.array([2.0 ** (j * params.s) for j in js])
    return lq_sum(weights * norms, float(params.q))


def difference_besov_norm(f: RealField, s: float, p: float, q: float) -> float:
    """Finite-difference Besov norm for s in (0, 1).

    The integral of ||f(. + t) - f||_p^q / |t|^(2 + sq) over the plane is
    discretised with grid-aligned shifts along both axes at the dyadic radii
    r_m = (L/n) 2^m, m = 0 .. log2(n) - 1, in polar form:

        sum_m 2 pi ln 2 r_m^(-sq) mean_direction ||f(. + t) - f||_p^q.
    """
    if not (0.0 < s < 1.0):
        raise ParameterError(f"difference Besov norm needs s in (0, 1), got {s}")
    grid = f.grid
    x = f.samples
    levels = int(math.log2(grid.n))
    q = float(q)
    terms = []
    for m in range(levels):
        shift = 2**m
        r = grid.dx * shift
        d = [lq_from_samples(np.roll(x, shift, axis=ax) - x, grid, p) for ax in (0, 1)]
        if math.isinf(q):
            terms.append(r ** (-s) * max(d))
        else:
            terms.append(2.0 * math.pi * math.log(2.0) * r ** (-s * q) * np.mean(np.power(d, q)))
    if math.isinf(q):
        return float(max(terms))
    return float(np.sum(terms) ** (1.0 / q))


def block_l2_norms(stack: np.ndarray, partition: DyadicPartition, js) -> np.ndarray:
    """Parseval L^2 norms of homogeneous blocks of a full-layout stack."""
    L = partition.grid.domain_length
    power = np.abs(stack) ** 2
    power = np.sum(power, axis=0)
    return np.array([L * math.sqrt(np.sum(partition.phi(j) ** 2 * power)) for j in js])


def hstar_norm(f: Field, sigma: float,
               partition: Optional[DyadicPartition] = None) -> float:
    """Hybrid negative norm: blocks j <= 0 weighted by 1, j >= 1 by 2^(-sigma j),
    combined in l^2."""
    if not (0.0 < sigma < 1.0):
        raise ParameterError(f"sigma must lie in (0, 1), got {sigma}")
    partition = _resolve(partition, f.grid)
    stack = _stack(f)
    _require_mean_zero(stack)
    js = list(partition.homogeneous_range)
    norms = block_l2_norms(stack, partition, js)
    weights = np.array([1.0 if j <= 0 else 2.0 ** (-sigma * j) for j in js])
    return float(math.sqrt(np.sum((weights * norms) ** 2)))


# ---------------------------------------------------------------------------
# paraproducts


@dataclass(frozen=True, eq=False)
class ParaproductSplit:
    """Bony decomposition of a dealiased product f g.

    low_high = sum_k S_{k-1} f . Delta_k g, high_low = sum_k Delta_k f . S_{k-1} g,
    high_high = sum_k Delta_k f . (Delta_{k-1} + Delta_k + Delta_{k+1}) g.
    """

    low_high: SpectralField
    high_low: SpectralField
    high_high: SpectralField

    def reconstruct(self) -> SpectralField:
        return self.low_high + self.high_low + self.high_high


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pseudo-spectral product with the 2/3 filter applied to the result."""
    if f.grid != g.grid:
        raise ParameterError("paraproduct operands live on different grids")
    n = f.grid.n
    prod = to_physical(f.half, n) * to_physical(g.half, n)
    return _to_dealiased(prod, f.grid)


def _to_dealiased(samples, grid):
    n = grid.n
    full = np.fft.fft2(samples) / (n * n)
    return SpectralField(grid, full * wavenumbers(grid).dealias)


def paraproduct_split(f: SpectralField, g: SpectralField,
                      partition: Optional[DyadicPartition] = None) -> ParaproductSplit:
    if f.grid != g.grid:
        raise ParameterError("paraproduct operands live on different grids")
    grid = f.grid
    partition = _resolve(partition, grid)
    n = grid.n
    js = list(partition.inhomogeneous_range)
    fb = [to_physical(f.half * partition.multiplier_half(j, False), n) for j in js]
    gb = [to_physical(g.half * partition.multiplier_half(j, False), n) for j in js]
    zero = np.zeros((n, n))
    low_high = np.zeros((n, n))
    high_low = np.zeros((n, n))
    high_high = np.zeros((n, n))
    # S_{k-1} sums blocks -1 .. k-2, i.e. list positions 0 .. a-2
    s_f = zero.copy()
    s_g = zero.copy()
    for a in range(len(js)):
        if a >= 2:
            s_f = s_f + fb[a - 2]
            s_g = s_g + gb[a - 2]
        low_high += s_f * gb[a]
        high_low += fb[a] * s_g
        tilde = gb[a] + (gb[a - 1] if a >= 1 else zero) + (gb[a + 1] if a + 1 < len(js) else zero)
        high_high += fb[a] * tilde
    return ParaproductSplit(
        _to_dealiased(low_high, grid),
        _to_dealiased(high_low, grid),
        _to_dealiased(high_high, grid),
    )


# ---------------------------------------------------------------------------
# Bernstein inequalities


@dataclass(frozen=True)
class BernsteinReport:
    """Upper bound: lhs <= C 2^(2 alpha j + 2 j (1/p - 1/q)) ||Delta_j f||_p.
    Lower bound: C 2^(2 alpha j) ||Delta_j f||_q <= lhs."""

    j: int
    alpha: float
    p: float
    q: float
    lhs: float
    rhs: float
    ratio: float
    lower_rhs: float
    lower_ratio: float


def fractional_laplacian(f: SpectralField, alpha: float) -> SpectralField:
    """(-Delta)^alpha with symbol |xi|^(2 alpha); the mean is dropped."""
    xi = wavenumbers(f.grid).xi_abs
    with np.errstate(divide="ignore"):
        sym = np.where(xi > 0, xi ** (2.0 * alpha), 0.0)
    return SpectralField(f.grid, f.coeffs * sym)


def bernstein_check(f: SpectralField, j: int, alpha: float, p: float, q: float,
                    partition: Optional[DyadicPartition] = None) -> BernsteinReport:
    if alpha < 0:
        raise ParameterError(f"alpha must be >= 0, got {alpha}")
    if float(p) > float(q):
        raise ParameterError(f"Bernstein check needs p <= q, got p={p}, q={q}")
    partition = _resolve(partition, f.grid)
    block = dyadic_block(f, j, True, partition)
    grid = f.grid
    n = grid.n
    phys_block = to_physical(block.half, n)
    phys_frac = to_physical(fractional_laplacian(block, alpha).half, n)
    lhs = lq_from_samples(phys_frac, grid, q)
    inv = (1.0 / p if not math.isinf(p) else 0.0) - (1.0 / q if not math.isinf(q) else 0.0)
    rhs = 2.0 ** (2.0 * alpha * j + 2.0 * j * inv) * lq_from_samples(phys_block, grid, p)
    lower = 2.0 ** (2.0 * alpha * j) * lq_from_samples(phys_block, grid, q)
    return BernsteinReport(
        j, alpha, p, q, lhs, rhs,
        lhs / rhs if rhs > 0 else 0.0,
        lower,
        lhs / lower if lower > 0 else 0.0,
    )
