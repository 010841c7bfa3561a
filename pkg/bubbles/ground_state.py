"""
Ground state of DQ + Q - Q^p = 0 by spectral renormalization.

The iteration u <- M^gamma (D+1)^(-1) u^p with M = <(D+1)u, u> / <u^p, u>
removes the amplitude freedom of the fixed-point map; evenness is imposed
by symmetrizing every iterate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import curve_fit

from .exceptions import ConvergenceError, DecayFitError, ParameterError, PositivityError
from .spectral import (
    Grid1D,
    SpectralField,
    fractional_laplacian,
    l2_norm,
    periodized_kernel,
    sobolev_norm,
)

logger = logging.getLogger(__name__)

SUPPORTED_POWERS = (2, 3)
# Residual RMS (in log q) above which an algebraic fit is rejected.
DECAY_FIT_RMS = 0.02


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    prefactor: float
    window: Tuple[float, float]
    rms: float


@dataclass(frozen=True)
class GroundState:
    q: SpectralField
    residual_l2: float
    iterations: int
    nonlinearity_power: int
    decay_fit: Optional[DecayFit] = None
    tolerance: float = 0.0
    residual_history: Tuple[float, ...] = field(default=(), repr=False)

    @property
    def grid(self) -> Grid1D:
        return self.q.grid

    @property
    def mass(self) -> float:
        """||Q||^2, the reference mass of one bubble."""
        return l2_norm(self.q) ** 2

    @property
    def values(self) -> np.ndarray:
        return self.q.values.real


def initial_bump(grid: Grid1D, amplitude: float = 1.0) -> np.ndarray:
    x = grid.nodes
    return amplitude * 2.0 / (1.0 + x ** 2)


def ground_state_residual(u: np.ndarray, grid: Grid1D, power: int) -> float:
    """||Du + u - u^p||."""
    f = SpectralField(grid, u)
    r = fractional_laplacian(f, 1.0) + f - SpectralField(grid, u ** power)
    return l2_norm(r)


def solve_ground_state(grid: Grid1D, power: int = 3, tol: float = 1e-11,
                       max_iter: int = 2000, amplitude: float = 1.0) -> GroundState:
    if power not in SUPPORTED_POWERS:
        raise ParameterError(f'power must be one of {SUPPORTED_POWERS}, got {power}')
    if not 0 < tol <= 1e-4:
        raise ParameterError(f'tol must lie in (0, 1e-4], got {tol}')

    gamma = power / (power - 1.0)
    symbol = grid.abs_wavenumbers + 1.0
    h = grid.spacing
    u = initial_bump(grid, amplitude)
    history = []

    for iteration in range(1, max_iter + 1):
        u_hat = np.fft.fft(u)
        nonlinear = u ** power
        numerator = h * np.sum(np.fft.ifft(symbol * u_hat).real * u)
        denominator = h * np.sum(nonlinear * u)
        if denominator <= 0:
            raise PositivityError(f'renormalization factor undefined at iteration {iteration}')
        m_factor = numerator / denominator
        update = m_factor ** gamma * np.fft.ifft(np.fft.fft(nonlinear) / symbol).real
        update = 0.5 * (update + grid.reflect(update))

        distance = np.sqrt(h) * np.linalg.norm(update - u)
        u = update
        residual = ground_state_residual(u, grid, power)
        history.append(residual)

        if not np.all(np.isfinite(u)):
            raise ConvergenceError(f'iterate lost finiteness at iteration {iteration}')
        if distance < tol and residual < 10 * tol:
            break
    else:
        raise ConvergenceError(
            f'ground state did not converge in {max_iter} iterations (residual {history[-1]:.3e})'
        )

    peak = u.max()
    if u.min() < -1e-8 * peak:
        raise PositivityError(f'negative lobe {u.min():.3e} relative to peak {peak:.3e}')

    logger.info(f'Ground state p={power} on n={grid.n_points}, L={grid.length}: '
                f'{iteration} iterations, residual {residual:.3e}')

    q = SpectralField(grid, u)
    gs = GroundState(q=q, residual_l2=residual, iterations=iteration,
                     nonlinearity_power=power, tolerance=tol, residual_history=tuple(history))
    window = default_decay_window(grid)
    if window is not None:
        try:
            fit = decay_exponent(gs, window)
            gs = GroundState(q=q, residual_l2=residual, iterations=iteration,
                             nonlinearity_power=power, decay_fit=fit, tolerance=tol,
                             residual_history=tuple(history))
        except DecayFitError as exc:
            logger.warning(f'Decay fit skipped: {exc}')
    return gs


def default_decay_window(grid: Grid1D) -> Optional[Tuple[float, float]]:
    upper = 0.4 * grid.length / 2
    if upper <= 20:
        return None
    return (10.0, upper)


def _decay_samples(field_: SpectralField, window: Tuple[float, float]):
    grid = field_.grid
    lo, hi = window
    if lo < 10 or hi > 0.4 * grid.length / 2 or lo >= hi:
        raise DecayFitError(
            f'window {window} must lie inside [10, {0.4 * grid.length / 2:g}] to stay clear of the boundary'
        )
    x = grid.nodes
    mask = (x >= lo) & (x <= hi)
    q = np.abs(field_.values[mask])
    if mask.sum() < 8:
        raise DecayFitError('too few nodes in the decay window')
    if np.any(q <= 0) or np.any(~np.isfinite(np.log(q))):
        raise DecayFitError('field vanishes inside the decay window; decay is not algebraic')
    return x[mask], q


def decay_exponent(source, window: Tuple[float, float], periodized: bool = True) -> DecayFit:
    """Fit q ~ A |x|^(-p) on the window.

    With ``periodized`` the model sums the periodic images of the tail,
    A * sum_m |x + mL|^(-p), which is what an algebraic tail looks like on the torus.
    """
    field_ = source.q if isinstance(source, GroundState) else source
    x, q = _decay_samples(field_, window)
    log_x, log_q = np.log(x), np.log(q)
    slope, intercept = np.polyfit(log_x, log_q, 1)
    exponent, log_prefactor = -slope, intercept

    if periodized:
        length = field_.grid.length

        def model(xs, log_a, p):
            return log_a + np.log(periodized_kernel(xs, length, p))

        try:
            (log_prefactor, exponent), _ = curve_fit(
                model, x, log_q, p0=(intercept, max(-slope, 1.05)),
                bounds=([-np.inf, 1.0001], [np.inf, 20.0]),
            )
            fitted = model(x, log_prefactor, exponent)
        except (RuntimeError, ValueError) as exc:
            raise DecayFitError(f'algebraic fit failed: {exc}') from exc
    else:
        fitted = log_prefactor - exponent * log_x

    rms = float(np.sqrt(np.mean((log_q - fitted) ** 2)))
    if rms > DECAY_FIT_RMS:
        raise DecayFitError(f'log-log residual RMS {rms:.3e}: decay is not algebraic on {window}')
    return DecayFit(exponent=float(exponent), prefactor=float(np.exp(log_prefactor)),
                    window=(float(window[0]), float(window[1])), rms=rms)


def lp_norm(f: SpectralField, p: float) -> float:
    return float((f.grid.spacing * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


def gn_functional(f: SpectralField, gs: GroundState) -> float:
    """||Q||^2 ||f||_4^4 / (2 ||f||^2 ||D^(1/2) f||^2); equals 1 at f = Q."""
    mass = l2_norm(f) ** 2
    if mass == 0:
        raise ParameterError('gn_functional needs a nonzero field')
    half = sobolev_norm(f, 0.5, homogeneous=True) ** 2
    if half == 0:
        return float('inf')
    return gs.mass * lp_norm(f, 4) ** 4 / (2.0 * mass * half)


def energy(f: SpectralField, sign: float = 1.0) -> float:
    """1/2 ||D^(1/2) f||^2 - sign/4 ||f||_4^4."""
    return 0.5 * sobolev_norm(f, 0.5, homogeneous=True) ** 2 - 0.25 * sign * lp_norm(f, 4) ** 4


def pohozaev_defect(gs: GroundState) -> Tuple[float, float]:
    """(E(Q), (||D^(1/2)Q||^2 - ||Q||^2) / ||Q||^2); both vanish on the line."""
    half = sobolev_norm(gs.q, 0.5, homogeneous=True) ** 2
    return energy(gs.q), (half - gs.mass) / gs.mass


def periodic_benjamin_ono(grid: Grid1D) -> SpectralField:
    """Exact L-periodic solution of DQ + Q - Q^2 = 0 bifurcating from 2/(1+x^2)."""
    k = 2.0 * np.pi / grid.length
    if k >= 1:
        raise ParameterError('the periodic soliton needs length > 2*pi')
    r = np.sqrt((1.0 - k) / (1.0 + k))
    x = grid.nodes
    return SpectralField(grid, k * (1.0 - r * r) / (1.0 - 2.0 * r * np.cos(k * x) + r * r))
