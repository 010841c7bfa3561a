"""
Periodic-grid spectral calculus.

The real line is truncated to the centered torus [-L/2, L/2). Every function
is carried as a ``SpectralField``: samples on a ``Grid1D`` plus lazily cached
FFT coefficients. Fourier multipliers follow numpy's FFT ordering with
wavenumbers ``xi = 2*pi*fftfreq(n, d=spacing)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
from numpy.typing import NDArray
from scipy import special

from .exceptions import GridError, ParameterError, UnsupportedOperatorError

logger = logging.getLogger(__name__)

Scalar = Union[int, float, complex]

# Fraction of the half-window beyond which mass counts as tail contamination.
TAIL_WINDOW = 0.8
TAIL_MASS_WARNING = 1e-6


@dataclass(frozen=True)
class Grid1D:
    n_points: int
    length: float

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise GridError(f'n_points must be a power of two >= 16, got {n}')
        if not np.isfinite(self.length) or self.length <= 0:
            raise GridError(f'length must be positive, got {self.length}')

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @cached_property
    def nodes(self) -> NDArray[np.float64]:
        x = -0.5 * self.length + self.spacing * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self) -> NDArray[np.float64]:
        xi = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)
        xi.flags.writeable = False
        return xi

    @cached_property
    def abs_wavenumbers(self) -> NDArray[np.float64]:
        k = np.abs(self.wavenumbers)
        k.flags.writeable = False
        return k

    def reflect(self, values: NDArray) -> NDArray:
        """Samples of f(-x) given samples of f(x)."""
        return np.roll(np.asarray(values)[::-1], 1)

    def field(self, values) -> 'SpectralField':
        return SpectralField(self, values)

    def from_function(self, func: Callable[[NDArray[np.float64]], NDArray]) -> 'SpectralField':
        return SpectralField(self, func(self.nodes))

    def zeros(self) -> 'SpectralField':
        return SpectralField(self, np.zeros(self.n_points, dtype=complex))


class SpectralField:
    """Complex samples on a grid with a compute-once spectrum."""

    __slots__ = ('grid', 'values', '__dict__')
    # numpy arrays on the left defer to the reflected operators
    __array_ufunc__ = None

    def __init__(self, grid: Grid1D, values):
        arr = np.array(values, dtype=np.complex128)
        if arr.shape != (grid.n_points,):
            raise GridError(f'expected {grid.n_points} samples, got shape {arr.shape}')
        arr.flags.writeable = False
        self.grid = grid
        self.values = arr

    @classmethod
    def from_spectrum(cls, grid: Grid1D, spectrum: NDArray) -> 'SpectralField':
        out = cls(grid, np.fft.ifft(spectrum))
        spec = np.array(spectrum, dtype=np.complex128)
        spec.flags.writeable = False
        out.__dict__['spectrum'] = spec
        return out

    @cached_property
    def spectrum(self) -> NDArray[np.complex128]:
        spec = np.fft.fft(self.values)
        spec.flags.writeable = False
        return spec

    @property
    def real(self) -> NDArray[np.float64]:
        return self.values.real

    @property
    def imag(self) -> NDArray[np.float64]:
        return self.values.imag

    def conj(self) -> 'SpectralField':
        return SpectralField(self.grid, np.conj(self.values))

    def reflected(self) -> 'SpectralField':
        return SpectralField(self.grid, self.grid.reflect(self.values))

    def apply_multiplier(self, multiplier: NDArray) -> 'SpectralField':
        return SpectralField.from_spectrum(self.grid, self.spectrum * multiplier)

    def _other(self, other):
        if isinstance(other, SpectralField):
            if other.grid != self.grid:
                raise GridError('fields live on different grids')
            return other.values
        return other

    def __add__(self, other) -> 'SpectralField':
        return SpectralField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other) -> 'SpectralField':
        return SpectralField(self.grid, self.values - self._other(other))

    def __rsub__(self, other) -> 'SpectralField':
        return SpectralField(self.grid, self._other(other) - self.values)

    def __mul__(self, other) -> 'SpectralField':
        return SpectralField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> 'SpectralField':
        return SpectralField(self.grid, self.values / self._other(other))

    def __neg__(self) -> 'SpectralField':
        return SpectralField(self.grid, -self.values)

    def __repr__(self):
        return f'SpectralField(n={self.grid.n_points}, L={self.grid.length}, l2={l2_norm(self):.6g})'


def _check_same_grid(*fields: SpectralField) -> Grid1D:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridError('fields live on different grids')
    return grid


def fractional_laplacian(f: SpectralField, s: float) -> SpectralField:
    """D^s f with multiplier |xi|^s (zero mode sent to 0 for s > 0)."""
    if not np.isfinite(s) or s < 0:
        raise UnsupportedOperatorError(f'negative or non-finite order s={s} is not supported')
    if s > 2:
        raise UnsupportedOperatorError(f'orders above 2 are not supported, got s={s}')
    if s == 0:
        return f
    return f.apply_multiplier(f.grid.abs_wavenumbers ** s)


def derivative(f: SpectralField, order: int = 1) -> SpectralField:
    """Spectral derivative; the Nyquist mode is dropped for odd orders."""
    multiplier = (1j * f.grid.wavenumbers) ** order
    if order % 2:
        multiplier = multiplier.copy()
        multiplier[f.grid.n_points // 2] = 0.0
    return f.apply_multiplier(multiplier)


def tail_mass_fraction(f: SpectralField, window: float = TAIL_WINDOW) -> float:
    x = f.grid.nodes
    density = np.abs(f.values) ** 2
    total = density.sum()
    if total == 0:
        return 0.0
    return float(density[np.abs(x) > 0.5 * window * f.grid.length].sum() / total)


def warn_on_tail(f: SpectralField, what: str) -> float:
    fraction = tail_mass_fraction(f)
    if fraction > TAIL_MASS_WARNING:
        logger.warning(f'{what}: tail mass fraction {fraction:.2e} near the torus boundary')
    return fraction


def scaling_operator(f: SpectralField, center: float = 0.0) -> SpectralField:
    """Lambda f = f/2 + (x - center) f'."""
    warn_on_tail(f, 'scaling_operator')
    x = f.grid.nodes - center
    return 0.5 * f + derivative(f) * x


def inner_product(f: SpectralField, g: SpectralField) -> complex:
    """<f, g> = integral of f times conj(g)."""
    grid = _check_same_grid(f, g)
    return complex(grid.spacing * np.vdot(g.values, f.values))


def real_inner(f: SpectralField, g: SpectralField) -> float:
    return inner_product(f, g).real


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(f.grid.spacing) * np.linalg.norm(f.values))


def sobolev_norm(f: SpectralField, s: float, homogeneous: bool = False) -> float:
    """(||f||^2 + ||D^s f||^2)^(1/2), or ||D^s f|| when homogeneous."""
    grid = f.grid
    weight = grid.abs_wavenumbers ** (2 * s) if s > 0 else np.ones(grid.n_points)
    if not homogeneous:
        weight = weight + 1.0
    # Parseval: spacing * sum |v|^2 == (L / n^2) * sum |V|^2
    total = grid.length / grid.n_points ** 2 * np.sum(weight * np.abs(f.spectrum) ** 2)
    return float(np.sqrt(total))


def sup_norm(f: SpectralField) -> float:
    return float(np.max(np.abs(f.values)))


def calderon_defect(f: SpectralField, g: SpectralField) -> float:
    """||D(fg) - f Dg|| / (||f'||_inf ||g||)."""
    _check_same_grid(f, g)
    g_norm = l2_norm(g)
    if g_norm == 0:
        raise ParameterError('calderon_defect needs a nonzero g')
    grad_sup = sup_norm(derivative(f))
    commutator = fractional_laplacian(f * g, 1.0) - f * fractional_laplacian(g, 1.0)
    if grad_sup == 0:
        return 0.0
    return l2_norm(commutator) / (grad_sup * g_norm)


def fractional_commutator_defect(f: SpectralField, g: SpectralField, s: float) -> float:
    """||D^s(fg) - f D^s g|| / (||D^s f||_inf ||g||) for s in (0, 1]."""
    if not 0 < s <= 1:
        raise UnsupportedOperatorError(f'commutator order must lie in (0, 1], got {s}')
    _check_same_grid(f, g)
    g_norm = l2_norm(g)
    if g_norm == 0:
        raise ParameterError('fractional_commutator_defect needs a nonzero g')
    ds_sup = sup_norm(fractional_laplacian(f, s))
    if ds_sup == 0:
        return 0.0
    commutator = fractional_laplacian(f * g, s) - f * fractional_laplacian(g, s)
    return l2_norm(commutator) / (ds_sup * g_norm)


def singular_integral_constant(s: float) -> float:
    """Normalization C for the multiplier |xi|^s written as a singular integral.

    Closed form of (integral (1 - cos y) / |y|^(1+s) dy)^(-1).
    """
    return float(special.gamma(1.0 + s) * np.sin(0.5 * np.pi * s) / np.pi)


def periodized_kernel(y: NDArray[np.float64], length: float, exponent: float) -> NDArray[np.float64]:
    """sum over m of |y + m L|^(-exponent) for 0 < y < L, via the Hurwitz zeta function."""
    q = np.asarray(y, dtype=float) / length
    return length ** (-exponent) * (special.zeta(exponent, q) + special.zeta(exponent, 1.0 - q))


def _node_index(grid: Grid1D, x: float) -> int:
    j = (x + 0.5 * grid.length) / grid.spacing
    index = int(round(j))
    if abs(j - index) > 1e-8 or not 0 <= index < grid.n_points:
        raise ParameterError(f'x={x} is not a grid node')
    return index


def _central_differences(values: NDArray, j: int, h: float):
    n = values.size
    fm2, fm1, f0, fp1, fp2 = (values[(j + k) % n] for k in (-2, -1, 0, 1, 2))
    d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
    d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h)
    d4 = (fm2 - 4 * fm1 + 6 * f0 - 4 * fp1 + fp2) / h ** 4
    return d1, d2, d4


def _quadrature_offsets(grid: Grid1D, s: float):
    half = grid.n_points // 2
    m = np.arange(1, half + 1)
    y = m * grid.spacing
    weights = np.full(half, grid.spacing)
    weights[-1] *= 0.5
    kernel = periodized_kernel(y, grid.length, 1.0 + s)
    return m, weights * kernel


def fractional_laplacian_pointwise(f: SpectralField, s: float, x: float) -> complex:
    """Singular-integral evaluation of D^s f at the node x, for s in (0, 1).

    Uses the symmetric second-difference form with the periodized kernel and
    generalized Euler-Maclaurin corrections for the y^(1-s) endpoint behaviour.
    """
    if not 0 < s < 1:
        raise UnsupportedOperatorError(f'pointwise evaluation needs s in (0, 1), got {s}')
    grid = f.grid
    warn_on_tail(f, 'fractional_laplacian_pointwise')
    j = _node_index(grid, x)
    h = grid.spacing
    values = f.values
    n = grid.n_points
    m, weighted_kernel = _quadrature_offsets(grid, s)
    second_difference = values[(j + m) % n] + values[(j - m) % n] - 2 * values[j]
    trapezoid = np.sum(second_difference * weighted_kernel)

    beta = 1.0 - s
    _, d2, d4 = _central_differences(values, j, h)
    correction = special.zeta(-beta) * h ** (1 + beta) * d2
    correction += special.zeta(-beta - 2) * h ** (3 + beta) * d4 / 12.0
    return complex(-singular_integral_constant(s) * (trapezoid - correction))


def fractional_laplacian_quadrature(f: SpectralField, s: float) -> SpectralField:
    """Pointwise singular-integral evaluation at every node (O(n^2))."""
    return SpectralField(f.grid, [fractional_laplacian_pointwise(f, s, x) for x in f.grid.nodes])


def fractional_leibniz_pointwise(f: SpectralField, g: SpectralField, s: float, x: float) -> complex:
    """D^s(fg) - f D^s g - g D^s f at a node, as the singular integral of increment products."""
    if not 0 < s < 1:
        raise UnsupportedOperatorError(f'pointwise evaluation needs s in (0, 1), got {s}')
    grid = _check_same_grid(f, g)
    j = _node_index(grid, x)
    h = grid.spacing
    n = grid.n_points
    fv, gv = f.values, g.values
    m, weighted_kernel = _quadrature_offsets(grid, s)
    plus = (fv[(j + m) % n] - fv[j]) * (gv[(j + m) % n] - gv[j])
    minus = (fv[(j - m) % n] - fv[j]) * (gv[(j - m) % n] - gv[j])
    trapezoid = np.sum((plus + minus) * weighted_kernel)

    beta = 1.0 - s
    df = _central_differences(fv, j, h)[0]
    dg = _central_differences(gv, j, h)[0]
    correction = special.zeta(-beta) * h ** (1 + beta) * 2 * df * dg
    return complex(-singular_integral_constant(s) * (trapezoid - correction))


def fractional_leibniz_spectral(f: SpectralField, g: SpectralField, s: float) -> SpectralField:
    return fractional_laplacian(f * g, s) - f * fractional_laplacian(g, s) - g * fractional_laplacian(f, s)
