"""
Off-grid evaluation of fields sampled on a periodic grid.

Samples are first refined by Fourier zero-padding, which is exact for
band-limited data, and then read off with a quintic spline. Outside the
trusted window a profile on the line is continued with its algebraic
x^-2 tail instead of its periodic image.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import make_interp_spline
from scipy.signal import resample

from .spectral import SpectralField

logger = logging.getLogger(__name__)

UPSAMPLE_FACTOR = 8
TAIL_FRACTION = 0.4
SPLINE_DEGREE = 5


class BandLimitedInterpolant:

    def __init__(self, f: SpectralField, upsample: int = UPSAMPLE_FACTOR,
                 periodic: bool = False, tail_fraction: float = TAIL_FRACTION):
        grid = f.grid
        self.length = grid.length
        self.periodic = periodic
        self.tail_start = tail_fraction * grid.length
        n_fine = grid.n_points * upsample
        fine = resample(np.asarray(f.values), n_fine)
        x = -0.5 * grid.length + (grid.length / n_fine) * np.arange(n_fine + 1)
        fine = np.append(fine, fine[0])
        self.is_real = not np.any(fine.imag)
        self._real = make_interp_spline(x, fine.real, k=SPLINE_DEGREE, bc_type='periodic')
        self._imag = None if self.is_real else make_interp_spline(
            x, fine.imag, k=SPLINE_DEGREE, bc_type='periodic')
        if not periodic:
            ends = self._evaluate(np.array([-self.tail_start, self.tail_start]))
            self._left, self._right = ends[0], ends[1]

    def _evaluate(self, y: NDArray) -> NDArray:
        out = self._real(y).astype(complex)
        if self._imag is not None:
            out += 1j * self._imag(y)
        return out

    def __call__(self, y) -> NDArray[np.complex128]:
        y = np.asarray(y, dtype=float)
        if self.periodic:
            wrapped = np.mod(y + 0.5 * self.length, self.length) - 0.5 * self.length
            return self._evaluate(wrapped)
        out = np.empty(y.shape, dtype=complex)
        inside = np.abs(y) <= self.tail_start
        out[inside] = self._evaluate(y[inside])
        left = y < -self.tail_start
        right = y > self.tail_start
        out[left] = self._left * (self.tail_start / y[left]) ** 2
        out[right] = self._right * (self.tail_start / y[right]) ** 2
        return out


def interpolate(f: SpectralField, y, periodic: bool = False,
                interpolant: Optional[BandLimitedInterpolant] = None) -> NDArray[np.complex128]:
    """Values of f at arbitrary points y."""
    interpolant = interpolant or BandLimitedInterpolant(f, periodic=periodic)
    return interpolant(y)
