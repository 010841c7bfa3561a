"""
Modified profiles Q_k(b, v), their residual, rendered bubbles, boundary-time
initial data and the partition of unity around the bubble centers.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import GridError, ParameterError, UnderResolvedError
from .interpolation import BandLimitedInterpolant
from .linearized import PROFILE_NAMES, SMALLNESS_CEILING, ProfileSet, check_smallness
from .spectral import (
    Grid1D,
    SpectralField,
    derivative,
    fractional_laplacian,
    l2_norm,
    scaling_operator,
)

logger = logging.getLogger(__name__)

# Smallest admissible scale in grid spacings.
RESOLUTION_FACTOR = 4.0


@dataclass(frozen=True)
class BubbleParams:
    lam: float
    b: float
    v: float
    alpha: float
    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ParameterError(f'lambda must be positive, got {self.lam}')
        if abs(self.b) > SMALLNESS_CEILING or abs(self.v) > SMALLNESS_CEILING:
            raise ParameterError(
                f'(b, v) = ({self.b:.4g}, {self.v:.4g}) exceeds the smallness ceiling {SMALLNESS_CEILING}'
            )

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.lam, self.b, self.v, self.alpha, self.gamma)

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> 'BubbleParams':
        lam, b, v, alpha, gamma = (float(x) for x in values)
        return cls(lam=lam, b=b, v=v, alpha=alpha, gamma=gamma)


def flatten_params(params: Sequence[BubbleParams]) -> np.ndarray:
    return np.array([p.as_tuple() for p in params], dtype=float).ravel()


def unflatten_params(vector: Sequence[float]) -> List[BubbleParams]:
    values = np.asarray(vector, dtype=float).reshape(-1, 5)
    return [BubbleParams.from_sequence(row) for row in values]


def modified_profile(profiles: ProfileSet, b: float, v: float) -> SpectralField:
    """Q + ibS1 + ivG1 + bvG2 + b^2 S2 + ib^3 S3 on the reference grid."""
    check_smallness(b, v)
    p = profiles
    return (p.q + 1j * b * p.s1 + 1j * v * p.g1 + b * v * p.g2
            + b * b * p.s2 + 1j * b ** 3 * p.s3)


def profile_derivatives(profiles: ProfileSet, b: float, v: float) -> Tuple[SpectralField, SpectralField]:
    p = profiles
    d_b = 1j * p.s1 + v * p.g2 + 2 * b * p.s2 + 3j * b * b * p.s3
    d_v = 1j * p.g1 + b * p.g2
    return d_b, d_v


@dataclass(frozen=True)
class ProfileResidual:
    field: SpectralField
    l2_norm: float
    weighted_sup: float


def profile_residual(profiles: ProfileSet, b: float, v: float) -> ProfileResidual:
    """Psi_k, the amount by which Q_k misses its self-similar equation."""
    qk = modified_profile(profiles, b, v)
    d_b, d_v = profile_derivatives(profiles, b, v)
    minus_psi = (-0.5j * b * b * d_b - 1j * b * v * d_v + 1j * b * scaling_operator(qk)
                 - 1j * v * derivative(qk) - fractional_laplacian(qk, 1.0) - qk
                 + qk * np.abs(qk.values) ** 2)
    psi = -minus_psi
    x = profiles.grid.nodes
    weighted = float(np.max((1.0 + x ** 2) * np.abs(psi.values)))
    return ProfileResidual(field=psi, l2_norm=l2_norm(psi), weighted_sup=weighted)


def check_resolvable(grid: Grid1D, lam: float) -> None:
    if lam < RESOLUTION_FACTOR * grid.spacing:
        raise UnderResolvedError(
            f'lambda={lam:.4g} is below {RESOLUTION_FACTOR:g} grid spacings ({grid.spacing:.4g})'
        )


def _rendered(grid: Grid1D, p: BubbleParams, evaluate) -> SpectralField:
    check_resolvable(grid, p.lam)
    y = (grid.nodes - p.alpha) / p.lam
    return SpectralField(grid, p.lam ** -0.5 * evaluate(y) * np.exp(1j * p.gamma))


def render_bubble(grid: Grid1D, p: BubbleParams, qk: SpectralField,
                  interpolant: Optional[BandLimitedInterpolant] = None) -> SpectralField:
    """lambda^(-1/2) Q_k((x - alpha)/lambda) e^(i gamma) on the simulation grid."""
    if qk.grid == grid and p.lam == 1.0 and p.alpha == 0.0:
        check_resolvable(grid, p.lam)
        return qk * np.exp(1j * p.gamma)
    if interpolant is None:
        interpolant = BandLimitedInterpolant(qk, periodic=(qk.grid == grid and p.lam == 1.0))
    return _rendered(grid, p, interpolant)


def multi_bubble(grid: Grid1D, params: Sequence[BubbleParams], qks: Sequence[SpectralField]) -> SpectralField:
    if len(params) != len(qks):
        raise ParameterError('one profile is needed per bubble')
    _check_distinct([p.alpha for p in params])
    total = grid.zeros()
    for p, qk in zip(params, qks):
        total = total + render_bubble(grid, p, qk)
    return total


def _check_distinct(centers: Iterable[float]) -> None:
    ordered = sorted(centers)
    if any(b - a <= 0 for a, b in zip(ordered, ordered[1:])):
        raise ParameterError(f'bubble centers must be pairwise distinct, got {ordered}')


class ProfileInterpolator:
    """Off-grid access to every profile of a chain, built once per chain.

    Q_k is linear in the chain members, so rendering evaluates each member's
    interpolant and combines them with the (b, v) coefficients.
    """

    def __init__(self, profiles: ProfileSet):
        self.profiles = profiles
        self._cache: Dict[str, BandLimitedInterpolant] = {}

    def interpolant(self, name: str) -> BandLimitedInterpolant:
        if name not in self._cache:
            if name == 'q':
                source = self.profiles.q
            elif name in PROFILE_NAMES:
                source = getattr(self.profiles, name)
            else:
                raise KeyError(name)
            self._cache[name] = BandLimitedInterpolant(source)
        return self._cache[name]

    def values(self, name: str, y) -> np.ndarray:
        return self.interpolant(name)(y)

    def profile_at(self, y, b: float, v: float) -> np.ndarray:
        check_smallness(b, v)
        out = self.values('q', y)
        terms = (('s1', 1j * b), ('g1', 1j * v), ('g2', b * v), ('s2', b * b), ('s3', 1j * b ** 3))
        for name, coefficient in terms:
            if coefficient != 0:
                out = out + coefficient * self.values(name, y)
        return out

    def render(self, grid: Grid1D, p: BubbleParams) -> SpectralField:
        return _rendered(grid, p, lambda y: self.profile_at(y, p.b, p.v))

    def render_many(self, grid: Grid1D, params: Sequence[BubbleParams]) -> SpectralField:
        _check_distinct([p.alpha for p in params])
        total = grid.zeros()
        for p in params:
            total = total + self.render(grid, p)
        return total


def boundary_params(omega: float, t: float, center: float, theta: float) -> BubbleParams:
    """(omega^2 t^2/4, -omega^2 t/2, omega^2 t^2/4, x_k, -4/(omega^2 t) + theta_k)."""
    if t >= 0:
        raise ParameterError(f'boundary time must be negative, got t={t}')
    if omega <= 0:
        raise ParameterError(f'omega must be positive, got {omega}')
    w2 = omega * omega
    return BubbleParams(lam=w2 * t * t / 4.0, b=-w2 * t / 2.0, v=w2 * t * t / 4.0,
                        alpha=float(center), gamma=-4.0 / (w2 * t) + float(theta))


def boundary_data(grid: Grid1D, K: int, omega: float, centers: Sequence[float],
                  thetas: Sequence[float], t: float, profiles: ProfileSet,
                  omegas: Optional[Sequence[float]] = None,
                  interpolator: Optional[ProfileInterpolator] = None
                  ) -> Tuple[SpectralField, List[BubbleParams]]:
    """Initial data at the boundary time t < 0, one bubble per center."""
    if len(centers) != K or len(thetas) != K:
        raise ParameterError(f'expected {K} centers and thetas')
    frequencies = list(omegas) if omegas is not None else [omega] * K
    if len(frequencies) != K:
        raise ParameterError(f'expected {K} frequencies')
    params = [boundary_params(w, t, x, th) for w, x, th in zip(frequencies, centers, thetas)]
    interpolator = interpolator or ProfileInterpolator(profiles)
    u = interpolator.render_many(grid, params)
    logger.info(f'Boundary data at t={t}: K={K}, lambda={[round(p.lam, 6) for p in params]}')
    return u, params


def smooth_step(x: np.ndarray, sigma: float) -> Tuple[np.ndarray, np.ndarray]:
    """Phi and Phi': 1 for x <= 4 sigma, 0 for x >= 8 sigma, quintic in between."""
    s = np.clip((np.asarray(x, dtype=float) - 4.0 * sigma) / (4.0 * sigma), 0.0, 1.0)
    phi = 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)
    dphi = -30.0 * s * s * (1.0 - s) ** 2 / (4.0 * sigma)
    return phi, dphi


@dataclass(frozen=True)
class LocalizationSet:
    sigma: float
    centers: Tuple[float, ...]
    phi: Tuple[SpectralField, ...]
    dphi: Tuple[SpectralField, ...]

    @property
    def K(self) -> int:
        return len(self.centers)


def default_sigma(grid: Grid1D, centers: Sequence[float]) -> float:
    if len(centers) == 1:
        return grid.length / 24.0
    return float(np.min(np.diff(centers))) / 12.0


def localization_set(grid: Grid1D, centers: Sequence[float],
                     sigma_override: Optional[float] = None) -> LocalizationSet:
    centers = [float(c) for c in centers]
    if not centers:
        raise ParameterError('at least one center is required')
    if any(b <= a for a, b in zip(centers, centers[1:])):
        raise ParameterError(f'centers must be strictly increasing, got {centers}')
    sigma = float(sigma_override) if sigma_override is not None else default_sigma(grid, centers)
    if sigma <= 0:
        raise ParameterError(f'sigma must be positive, got {sigma}')
    if 8.0 * sigma < 4.0 * grid.spacing:
        raise GridError(f'sigma={sigma:.4g} is too small for grid spacing {grid.spacing:.4g}')

    x = grid.nodes
    K = len(centers)
    if K == 1:
        ones = SpectralField(grid, np.ones(grid.n_points))
        return LocalizationSet(sigma, tuple(centers), (ones,), (grid.zeros(),))

    steps = [smooth_step(x - c, sigma) for c in centers[:-1]]
    phis, dphis = [], []
    for k in range(K):
        upper, d_upper = steps[k] if k < K - 1 else (np.ones_like(x), np.zeros_like(x))
        lower, d_lower = steps[k - 1] if k > 0 else (np.zeros_like(x), np.zeros_like(x))
        phis.append(SpectralField(grid, upper - lower))
        dphis.append(SpectralField(grid, d_upper - d_lower))
    return LocalizationSet(sigma, tuple(centers), tuple(phis), tuple(dphis))
