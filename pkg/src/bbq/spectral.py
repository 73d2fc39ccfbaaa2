"""
Periodic-grid field representation and spectral operators.

Fields live on the torus [0, L)^2 sampled on an n x n grid. Array axis 0 is
x1 and axis 1 is x2; ``samples[i, j] = f(i*dx, j*dx)``. Spectral coefficients
use the numpy FFT ordering and the normalisation

    coeff(k) = (1/n^2) * sum_x f(x) exp(-i 2 pi k.x / L),

so a constant field c has coeff(0) = c and cos(2 pi x1 / L) has 1/2 at
k = (+-1, 0). Physical wavenumbers are xi = (2 pi / L) k.

Derivatives use the "derivative wavenumbers" in which the Nyquist index
k_i = -n/2 is replaced by zero. This keeps derivatives of real fields real;
the Leray projector and the divergence-free certificate use the same
symbols, so divergence(leray_project(v)) vanishes to rounding.

Public operators work on the immutable field types below. The solver and
the Littlewood-Paley code work on raw arrays in the half-spectrum (rfft2)
layout, which is the slice ``full[..., :n//2 + 1]`` of the full layout.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.fft as _sfft

from .errors import ConfigError, DataError, InvariantError, ParameterError

#: Relative tolerance for the Hermitian / divergence-free certificates.
CERTIFICATE_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0, L)^2.

    Attributes:
        n: points per dimension, a power of two >= 8.
        domain_length: side length L of the torus.
        dealias_fraction: fraction of the Nyquist index range kept by the
            dealiasing filter (2/3 rule by default).
    """

    n: int
    domain_length: float = 2.0 * math.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise ConfigError(f"grid.n must be an integer, got {n!r}")
        if n < 8 or (n & (n - 1)) != 0:
            raise ConfigError(f"grid.n must be a power of two >= 8, got {n}")
        if not (math.isfinite(self.domain_length) and self.domain_length > 0):
            raise ConfigError(f"grid.L must be positive, got {self.domain_length}")
        if not (0.0 < self.dealias_fraction <= 1.0):
            raise ConfigError(
                f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}"
            )

    @property
    def dx(self) -> float:
        return self.domain_length / self.n

    @property
    def kappa(self) -> float:
        """Fundamental physical wavenumber 2 pi / L."""
        return 2.0 * math.pi / self.domain_length

    @property
    def nyquist(self) -> float:
        """Nyquist wavenumber (n/2) * 2 pi / L."""
        return (self.n // 2) * self.kappa

    @property
    def dealias_kmax(self) -> int:
        """Largest integer index |k_i| kept by the dealiasing filter."""
        return int(math.floor(self.dealias_fraction * (self.n // 2) + 1e-9))

    @property
    def dealias_cutoff(self) -> float:
        """Dealiasing radius in physical units; the default J_N cutoff."""
        return self.dealias_fraction * self.nyquist

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    def coordinates(self):
        """Return the (x1, x2) sample coordinates as two n x n arrays."""
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, indexing="ij")


@dataclass(frozen=True, eq=False)
class Wavenumbers:
    """Cached wavenumber tables for one grid, full FFT layout."""

    k1: np.ndarray  # (n, 1) integer index along x1
    k2: np.ndarray  # (1, n) integer index along x2
    xi_abs: np.ndarray  # (n, n) |2 pi k / L|
    d1: np.ndarray  # (n, 1) derivative symbol along x1 (Nyquist -> 0)
    d2: np.ndarray  # (1, n)
    d_sq: np.ndarray  # (n, n) d1^2 + d2^2
    inv_d_sq: np.ndarray  # (n, n) 1/d_sq, 0 where d_sq == 0
    dealias: np.ndarray  # (n, n) bool, 2/3 square filter
    conj_index: tuple  # fancy index mapping k -> -k

    def half(self, name):
        """Half-spectrum (rfft2 layout) slice of a table."""
        arr = getattr(self, name)
        m = self.xi_abs.shape[0] // 2 + 1
        return arr[..., :m] if arr.shape[-1] != 1 else arr


@functools.lru_cache(maxsize=32)
def wavenumbers(grid: GridSpec) -> Wavenumbers:
    n = grid.n
    k = np.fft.fftfreq(n, d=1.0 / n)
    kd = k.copy()
    kd[n // 2] = 0.0
    k1 = k[:, None]
    k2 = k[None, :]
    xi_abs = grid.kappa * np.sqrt(k1 * k1 + k2 * k2)
    d1 = grid.kappa * kd[:, None]
    d2 = grid.kappa * kd[None, :]
    d_sq = d1 * d1 + d2 * d2
    with np.errstate(divide="ignore"):
        inv_d_sq = np.where(d_sq > 0, 1.0 / np.where(d_sq > 0, d_sq, 1.0), 0.0)
    kmax = grid.dealias_kmax
    dealias = (np.abs(k1) <= kmax) & (np.abs(k2) <= kmax)
    neg = (-np.arange(n)) % n
    conj_index = (neg[:, None], neg[None, :])
    for arr in (k1, k2, xi_abs, d1, d2, d_sq, inv_d_sq, dealias):
        arr.setflags(write=False)
    return Wavenumbers(k1, k2, xi_abs, d1, d2, d_sq, inv_d_sq, dealias, conj_index)


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real scalar field (full n x n layout)."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs, np.complex128)
        if c.shape != (self.grid.n, self.grid.n):
            raise ConfigError(
                f"coefficient array shape {c.shape} does not match grid n={self.grid.n}"
            )
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=np.complex128))

    @classmethod
    def from_half(cls, grid: GridSpec, half: np.ndarray) -> "SpectralField":
        """Build from a half-spectrum array by Hermitian extension."""
        return cls(grid, half_to_full(half, grid.n))

    @property
    def half(self) -> np.ndarray:
        return self.coeffs[:, : self.grid.n // 2 + 1]

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0].real)

    def hermitian_defect(self) -> float:
        """max_k |coeff(-k) - conj(coeff(k))|."""
        wn = wavenumbers(self.grid)
        c = self.coeffs
        return float(np.max(np.abs(c[wn.conj_index] - np.conj(c)))) if c.size else 0.0

    def _check_grid(self, other):
        if other.grid != self.grid:
            raise ParameterError("fields live on different grids")

    def __add__(self, other):
        self._check_grid(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_grid(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorField:
    """Pair of spectral components (u1, u2).

    ``divergence_free=True`` is a certificate: construction fails unless
    max_k |d(k).u(k)| <= 1e-12 * max|u|.
    """

    components: tuple
    divergence_free: bool = False

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 2:
            raise ConfigError("a VectorField has exactly two components")
        if comps[0].grid != comps[1].grid:
            raise ParameterError("components live on different grids")
        object.__setattr__(self, "components", comps)
        if self.divergence_free:
            defect = divergence_defect(self.stacked, self.grid)
            scale = float(np.max(np.abs(self.stacked))) if self.grid.n else 0.0
            if defect > CERTIFICATE_TOL * max(scale, np.finfo(float).tiny):
                raise InvariantError(
                    f"divergence-free certificate fails: max|k.u| = {defect:.3e}"
                )

    @classmethod
    def from_array(cls, grid, arr, divergence_free=False):
        """Wrap a (2, n, n) full-layout coefficient array."""
        return cls(
            (SpectralField(grid, arr[0]), SpectralField(grid, arr[1])), divergence_free
        )

    @property
    def grid(self) -> GridSpec:
        return self.components[0].grid

    @property
    def stacked(self) -> np.ndarray:
        return np.stack([c.coeffs for c in self.components])

    def __add__(self, other):
        return VectorField(
            tuple(a + b for a, b in zip(self.components, other.components)),
            self.divergence_free and other.divergence_free,
        )

    def __sub__(self, other):
        return VectorField(
            tuple(a - b for a, b in zip(self.components, other.components)),
            self.divergence_free and other.divergence_free,
        )

    def __mul__(self, scalar):
        return VectorField(tuple(c * scalar for c in self.components), self.divergence_free)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class RealField:
    """Physical-space samples of a real field."""

    grid: GridSpec
    samples: np.ndarray

    def __post_init__(self):
        s = _frozen(self.samples, np.float64)
        if s.shape != (self.grid.n, self.grid.n):
            raise ConfigError(
                f"sample array shape {s.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(s)):
            raise DataError("field contains non-finite samples")
        object.__setattr__(self, "samples", s)


Field = Union[SpectralField, VectorField]


# ---------------------------------------------------------------------------
# layout helpers


def half_to_full(half: np.ndarray, n: int) -> np.ndarray:
    """Extend rfft2-layout coefficients to the full layout (last two axes)."""
    m = n // 2 + 1
    full = np.empty(half.shape[:-2] + (n, n), dtype=np.complex128)
    full[..., :m] = half
    rows = (-np.arange(n)) % n
    cols = n - np.arange(m, n)
    full[..., m:] = np.conj(half[..., rows, :][..., cols])
    return full


def to_physical(half: np.ndarray, n: int) -> np.ndarray:
    """Inverse transform of half-layout coefficients (leading axes batched)."""
    return _sfft.irfft2(half, s=(n, n), norm="forward")


def to_spectral(samples: np.ndarray) -> np.ndarray:
    """Forward transform to half layout with the package normalisation."""
    n = samples.shape[-1]
    return _sfft.rfft2(samples, norm="forward")


def divergence_defect(stacked: np.ndarray, grid: GridSpec) -> float:
    wn = wavenumbers(grid)
    return float(np.max(np.abs(wn.d1 * stacked[0] + wn.d2 * stacked[1])))


# ---------------------------------------------------------------------------
# transforms


def forward_transform(f: RealField) -> SpectralField:
    """Fourier coefficients of ``f``; rejects non-finite samples."""
    if not isinstance(f, RealField):
        raise DataError("forward_transform expects a RealField")
    n = f.grid.n
    return SpectralField(f.grid, np.fft.fft2(f.samples) / (n * n))


def inverse_transform(f: SpectralField) -> RealField:
    """Real samples of ``f``.

    An imaginary residue up to 1e-12 of the sample magnitude is dropped; a
    larger residue means the coefficients are not Hermitian and raises
    :class:`InvariantError`.
    """
    n = f.grid.n
    z = np.fft.ifft2(f.coeffs) * (n * n)
    scale = float(np.max(np.abs(z.real))) if z.size else 0.0
    resid = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if resid > CERTIFICATE_TOL * scale:
        raise InvariantError(
            f"coefficients are not Hermitian: imaginary residue {resid:.3e}"
        )
    return RealField(f.grid, z.real)


# ---------------------------------------------------------------------------
# differential operators


def gradient(f: SpectralField) -> VectorField:
    wn = wavenumbers(f.grid)
    c = f.coeffs
    return VectorField.from_array(f.grid, np.stack([1j * wn.d1 * c, 1j * wn.d2 * c]))


def perp_gradient(f: SpectralField) -> VectorField:
    """(-d2 f, d1 f); exactly divergence-free."""
    wn = wavenumbers(f.grid)
    c = f.coeffs
    return VectorField.from_array(
        f.grid, np.stack([-1j * wn.d2 * c, 1j * wn.d1 * c]), divergence_free=True
    )


def divergence(v: VectorField) -> SpectralField:
    wn = wavenumbers(v.grid)
    u = v.stacked
    return SpectralField(v.grid, 1j * (wn.d1 * u[0] + wn.d2 * u[1]))


def curl(v: VectorField) -> SpectralField:
    """Scalar curl d1 v2 - d2 v1."""
    wn = wavenumbers(v.grid)
    u = v.stacked
    return SpectralField(v.grid, 1j * (wn.d1 * u[1] - wn.d2 * u[0]))


def laplacian(f: SpectralField) -> SpectralField:
    wn = wavenumbers(f.grid)
    return SpectralField(f.grid, -wn.d_sq * f.coeffs)


def leray_array(u: np.ndarray, d1, d2, inv_d_sq) -> np.ndarray:
    """Modewise u - d (d.u)/|d|^2 on a (2, ...) coefficient array.

    Modes with |d| = 0 (the mean and the pure-Nyquist modes) pass through.
    """
    proj = (d1 * u[0] + d2 * u[1]) * inv_d_sq
    return np.stack([u[0] - d1 * proj, u[1] - d2 * proj])


def leray_project(v: VectorField) -> VectorField:
    """Leray projection onto divergence-free fields; the k = 0 mode is kept."""
    wn = wavenumbers(v.grid)
    w = leray_array(v.stacked, wn.d1, wn.d2, wn.inv_d_sq)
    # certify against the input's size: projecting a gradient leaves only rounding
    scale = float(np.max(np.abs(v.stacked))) if v.stacked.size else 0.0
    if divergence_defect(w, v.grid) > CERTIFICATE_TOL * max(scale, np.finfo(float).tiny):
        raise InvariantError("Leray projection failed its divergence certificate")
    out = VectorField.from_array(v.grid, w)
    object.__setattr__(out, "divergence_free", True)
    return out


def truncation_mask(grid: GridSpec, cutoff: float) -> np.ndarray:
    """Boolean mask of the closed ball |xi| <= cutoff (full layout)."""
    if not cutoff > 0:
        raise ParameterError(f"truncation radius must be positive, got {cutoff}")
    return wavenumbers(grid).xi_abs <= cutoff


def fourier_truncate(f: Field, N: float) -> Field:
    """Sharp ball cutoff J_N: zero every mode with |2 pi k / L| > N."""
    if isinstance(f, VectorField):
        mask = truncation_mask(f.grid, N)
        return VectorField.from_array(f.grid, f.stacked * mask, f.divergence_free)
    mask = truncation_mask(f.grid, N)
    return SpectralField(f.grid, f.coeffs * mask)


def dealias(f: Field) -> Field:
    """2/3-rule square filter."""
    mask = wavenumbers(f.grid).dealias
    if isinstance(f, VectorField):
        return VectorField.from_array(f.grid, f.stacked * mask, f.divergence_free)
    return SpectralField(f.grid, f.coeffs * mask)


# ---------------------------------------------------------------------------
# norms


def lq_from_samples(samples: np.ndarray, grid: GridSpec, q: float) -> float:
    """L^q norm by uniform quadrature; leading axes form a pointwise
    Euclidean magnitude (vector or tensor fields)."""
    q = _check_q(q)
    if samples.ndim > 2:
        mag = np.sqrt(np.sum(samples * samples, axis=tuple(range(samples.ndim - 2))))
    else:
        mag = np.abs(samples)
    if math.isinf(q):
        return float(np.max(mag))
    if q == 2.0:
        return float(math.sqrt(np.sum(mag * mag) * grid.cell_area))
    return float((np.sum(mag**q) * grid.cell_area) ** (1.0 / q))


def _check_q(q):
    q = float(q)
    if not (q >= 1.0):
        raise ParameterError(f"Lebesgue exponent must lie in [1, inf], got {q}")
    return q


def lq_norm(f: Union[RealField, Sequence[RealField]], q: float) -> float:
    """L^q norm of a real field (or pointwise Euclidean norm of a tuple of
    fields), cell area (L/n)^2; q = inf gives the grid maximum."""
    _check_q(q)
    if isinstance(f, RealField):
        return lq_from_samples(f.samples, f.grid, q)
    fields = list(f)
    stacked = np.stack([g.samples for g in fields])
    return lq_from_samples(stacked, fields[0].grid, q)


def _coeff_stack(f: Field) -> np.ndarray:
    return f.stacked if isinstance(f, VectorField) else f.coeffs[None]


def hs_norm(f: Field, s: float) -> float:
    """Inhomogeneous Sobolev norm L * (sum_k (1+|xi|^2)^s |f_k|^2)^(1/2).

    The factor L makes s = 0 coincide with the L^2 norm (Parseval).
    """
    wn = wavenumbers(f.grid)
    c = _coeff_stack(f)
    weight = (1.0 + wn.xi_abs**2) ** s
    return float(f.grid.domain_length * math.sqrt(np.sum(weight * np.abs(c) ** 2)))


def homogeneous_hs_norm(f: Field, s: float) -> float:
    """L * (sum_{k != 0} |xi|^(2s) |f_k|^2)^(1/2)."""
    wn = wavenumbers(f.grid)
    c = _coeff_stack(f)
    with np.errstate(divide="ignore"):
        weight = np.where(wn.xi_abs > 0, wn.xi_abs ** (2.0 * s), 0.0)
    return float(f.grid.domain_length * math.sqrt(np.sum(weight * np.abs(c) ** 2)))


def l2_norm(f: Field) -> float:
    """L^2 norm via Parseval."""
    return hs_norm(f, 0.0)
