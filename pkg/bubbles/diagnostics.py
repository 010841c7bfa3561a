"""
Functionals monitored along a trajectory: the profile error eta, localized
mass and momentum, the generalized energy and its virial cutoff, trend
checks, decoupling integrals, corridor conformance and mass quantization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.interpolate import BPoly

from .exceptions import ConvexityError, DecayFitError, InvalidCorridorError, ParameterError
from .linearized import ProfileSet
from .modulation import ModulationObserver, _time_derivative
from .profiles import BubbleParams, ProfileInterpolator, check_resolvable
from .spectral import (
    Grid1D,
    SpectralField,
    derivative,
    fractional_laplacian,
    inner_product,
    l2_norm,
    scaling_operator,
    sobolev_norm,
)

logger = logging.getLogger(__name__)

CORRIDORS =('R_h12', 'R_l2', 'R_hs', 'lambda', 'b', 'alpha', 'v', 'gamma')
CORRIDOR_MARGIN = 0.25
CONSISTENCY_TOL = 1e-10
SANDWICH_MARGIN = 0.25
SANDWICH_C1_FLOOR = 1e-3
SANDWICH_FLOOR_FRACTION = 0.1


def check_corridor_parameters(delta: float, varsigma: float) -> None:
    if not (0 < delta < 0.5 and 0 < varsigma < 0.5):
        raise InvalidCorridorError(f'delta and varsigma must lie in (0, 1/2), got {delta}, {varsigma}')
    if delta + 2 * varsigma >= 1:
        raise InvalidCorridorError(f'delta + 2*varsigma must be below 1, got {delta + 2 * varsigma:g}')


@dataclass(frozen=True)
class EtaResult:
    field: SpectralField
    norms: Tuple[float, float, float]


def profile_error_eta(params: Sequence[BubbleParams], rates: np.ndarray, profiles: ProfileSet,
                      grid: Grid1D, interpolator: Optional[ProfileInterpolator] = None) -> EtaResult:
    """eta = i dU/dt - DU + |U|^2 U, with dU/dt from parameter rates by the chain rule.

    ``rates`` has shape (K, 5) and holds (lambda', b', v', alpha', gamma') per bubble.
    """
    interpolator = interpolator or ProfileInterpolator(profiles)
    rates = np.asarray(rates, dtype=float).reshape(len(params), 5)
    U = grid.zeros()
    dU = grid.zeros()
    for p, (d_lam, d_b, d_v, d_alpha, d_gamma) in zip(params, rates):
        check_resolvable(grid, p.lam)
        bubble = interpolator.render(grid, p)
        y = (grid.nodes - p.alpha) / p.lam
        phase = p.lam ** -0.5 * np.exp(1j * p.gamma)
        d_b_profile = (1j * interpolator.values('s1', y) + p.v * interpolator.values('g2', y)
                       + 2 * p.b * interpolator.values('s2', y) + 3j * p.b ** 2 * interpolator.values('s3', y))
        d_v_profile = 1j * interpolator.values('g1', y) + p.b * interpolator.values('g2', y)
        dU = (dU - (d_lam / p.lam) * scaling_operator(bubble, center=p.alpha)
              - d_alpha * derivative(bubble) + 1j * d_gamma * bubble
              + SpectralField(grid, phase * (d_b * d_b_profile + d_v * d_v_profile)))
        U = U + bubble
    eta = 1j * dU - fractional_laplacian(U, 1.0) + U * np.abs(U.values) ** 2
    norms = (l2_norm(eta), l2_norm(derivative(eta)), l2_norm(derivative(eta, 2)))
    return EtaResult(field=eta, norms=norms)


def profile_error_eta_series(times: Sequence[float], values: np.ndarray, index: int,
                             profiles: ProfileSet, grid: Grid1D,
                             interpolator: Optional[ProfileInterpolator] = None) -> EtaResult:
    """eta at sample ``index`` of a parameter series of shape (T, K, 5)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 3:
        raise ParameterError('eta needs at least three time samples')
    rates = _time_derivative(times, values)[index]
    params = [BubbleParams.from_sequence(row) for row in values[index]]
    return profile_error_eta(params, rates, profiles, grid, interpolator)


def localized_mass(U_k: SpectralField, R: SpectralField, phi_k: SpectralField) -> float:
    """2 Re<U_k, R> + integral |R|^2 Phi_k."""
    return 2.0 * inner_product(U_k, R).real + R.grid.spacing * float(
        np.sum(np.abs(R.values) ** 2 * phi_k.values.real))


def localized_momentum(u: SpectralField, phi_k: SpectralField) -> float:
    """Im integral of u' conj(u) Phi_k."""
    return u.grid.spacing * float(np.sum(derivative(u).values * np.conj(u.values) * phi_k.values.real).imag)


def refined_v_ratio(param_values: np.ndarray) -> np.ndarray:
    """v_k / lambda_k per sample, shape (T, K)."""
    values = np.asarray(param_values, dtype=float).reshape(len(param_values), -1, 5)
    return values[..., 2] / values[..., 0]


class ChiCutoff:
    """Even convex cutoff with chi'(x) = x on [0, 1] and 3 - e^(-x) on [2, inf)."""

    AUDIT_POINTS = 20001

    def __init__(self, A: float):
        if not A > 0:
            raise ParameterError(f'A must be positive, got {A}')
        self.A = float(A)
        e2 = np.exp(-2.0)
        self.bridge = BPoly.from_derivatives([1.0, 2.0], [[1.0, 1.0, 0.0], [3.0 - e2, e2, -e2]])
        self._bridge_integral = self.bridge.antiderivative()
        self._chi_at_two = 0.5 + float(self._bridge_integral(2.0) - self._bridge_integral(1.0))
        self.audit()

    def audit(self) -> float:
        x = np.linspace(0.0, 3.0, self.AUDIT_POINTS)
        worst = float(np.min(self.derivative(x, 2)))
        if worst < -1e-12:
            raise ConvexityError(f'cutoff bridge is not convex: min chi\'\' = {worst:.3e}')
        return worst

    def derivative(self, x, order: int = 1) -> np.ndarray:
        """d^order chi / dx^order for order 1..4."""
        if order not in (1, 2, 3, 4):
            raise ParameterError('order must be between 1 and 4')
        x = np.asarray(x, dtype=float)
        y = np.abs(x)
        out = np.zeros_like(y)
        inner = y <= 1
        middle = (y > 1) & (y < 2)
        outer = y >= 2
        if order == 1:
            out[inner] = y[inner]
        elif order == 2:
            out[inner] = 1.0
        out[middle] = self.bridge(y[middle], nu=order - 1)
        if order == 1:
            out[outer] = 3.0 - np.exp(-y[outer])
        else:
            out[outer] = (-1.0) ** order * np.exp(-y[outer])
        # odd orders are odd functions of x
        if order % 2:
            out = np.sign(x) * out
        return out

    def __call__(self, x) -> np.ndarray:
        y = np.abs(np.asarray(x, dtype=float))
        out = 0.5 * y ** 2
        middle = (y > 1) & (y < 2)
        out[middle] = 0.5 + self._bridge_integral(y[middle]) - self._bridge_integral(1.0)
        outer = y >= 2
        out[outer] = self._chi_at_two + 3.0 * (y[outer] - 2.0) + np.exp(-y[outer]) - np.exp(-2.0)
        return out

    def scaled(self, x) -> np.ndarray:
        """chi_A(x) = A^2 chi(x/A)."""
        return self.A ** 2 * self(np.asarray(x, dtype=float) / self.A)

    def scaled_gradient(self, x) -> np.ndarray:
        """chi_A'(x) = A chi'(x/A)."""
        return self.A * self.derivative(np.asarray(x, dtype=float) / self.A)


def chi_cutoff(A: float) -> ChiCutoff:
    return ChiCutoff(A)


def remainder_size(R: SpectralField, t: float) -> float:
    """X = ||D^(1/2) R||^2 + t^(-2) ||R||^2."""
    if t == 0:
        raise ParameterError('X is undefined at t = 0')
    return sobolev_norm(R, 0.5, homogeneous=True) ** 2 + l2_norm(R) ** 2 / t ** 2


@dataclass(frozen=True)
class EnergySplit:
    I: float
    E_part: float
    L_part: float


def generalized_energy(u: SpectralField, U: SpectralField, R: SpectralField,
                       params: Sequence[BubbleParams], phis: Sequence[SpectralField],
                       chi: ChiCutoff) -> EnergySplit:
    """Generalized energy I = E_part + L_part of the remainder R = u - U.

    E_part = 1/2 integral (|D^(1/2) R|^2 + sum_k |R|^2 Phi_k / lambda_k)
             - integral (F(u) - F(U) - Re f(U) conj R),
    with the 1/2 covering the potential term too.
    """
    scale = l2_norm(u) or 1.0
    if l2_norm(u - U - R) > CONSISTENCY_TOL * scale:
        raise ParameterError('u, U and R are not a consistent decomposition')
    h = u.grid.spacing
    x = u.grid.nodes
    r = R.values
    r2 = np.abs(r) ** 2
    potential = 0.0
    for p, phi in zip(params, phis):
        potential += 0.5 / p.lam * h * float(np.sum(r2 * phi.values.real))
    nonlinear = h * float(np.sum(
        0.25 * np.abs(u.values) ** 4 - 0.25 * np.abs(U.values) ** 4
        - (np.abs(U.values) ** 2 * U.values * np.conj(r)).real))
    e_part = 0.5 * sobolev_norm(R, 0.5, homogeneous=True) ** 2 + potential - nonlinear

    grad_r = derivative(R).values
    l_part = 0.0
    for p, phi in zip(params, phis):
        weight = chi.scaled_gradient((x - p.alpha) / p.lam)
        l_part += 0.5 * p.b * h * float(np.sum(weight * grad_r * np.conj(r) * phi.values.real).imag)
    return EnergySplit(I=e_part + l_part, E_part=e_part, L_part=l_part)


@dataclass(frozen=True)
class SandwichFit:
    """Constants fitted on the calibration samples and checked on every sample."""
    c1: float
    c2: float
    lower_ok: np.ndarray
    upper_ok: np.ndarray
    c1_floor: float = SANDWICH_C1_FLOOR

    @property
    def holds(self) -> bool:
        return bool(self.c1 >= self.c1_floor and self.c2 > 0
                    and self.lower_ok.all() and self.upper_ok.all())

    def agrees_with(self, other: 'SandwichFit', rtol: float = SANDWICH_MARGIN) -> bool:
        """Same constants within rtol, e.g. for fits on two resolutions."""
        pairs = ((self.c1, other.c1), (self.c2, other.c2))
        if not all(np.isfinite(a) and np.isfinite(b) for a, b in pairs):
            return all(a == b for a, b in pairs)
        return all(abs(a - b) <= rtol * max(abs(a), abs(b)) for a, b in pairs)


def sandwich_floor(coercivity: float, fraction: float = SANDWICH_FLOOR_FRACTION) -> float:
    """Lower limit for C1 derived from the coercivity constant of the linearized operator."""
    if not coercivity > 0:
        raise ParameterError(f'coercivity constant must be positive, got {coercivity}')
    return fraction * coercivity


def _lower_roots(I: np.ndarray, X: np.ndarray, tail: np.ndarray) -> np.ndarray:
    """Largest c with c X - tail/c <= I, per sample (positive root of X c^2 - I c - tail)."""
    s = np.sqrt(I ** 2 + 4.0 * X * tail)
    with np.errstate(divide='ignore', invalid='ignore'):
        roots = np.where(I >= 0, (I + s) / (2.0 * X), 2.0 * tail / (s - I))
    return np.where(np.isfinite(roots), roots, 0.0)


def energy_sandwich(times: Sequence[float], I: Sequence[float], X: Sequence[float],
                    delta: float = 0.1, c1_floor: float = SANDWICH_C1_FLOOR,
                    margin: float = SANDWICH_MARGIN) -> SandwichFit:
    """Fit C1, C2 with C1 X - |t|^(6-2 delta)/C1 <= I <= C2 X.

    The constants are calibrated on the half of the samples farthest from
    t = 0 and then checked, relaxed by ``margin``, at every sample. The fit
    fails when C1 drops below ``c1_floor``.
    """
    t = np.abs(np.asarray(times, dtype=float))
    I = np.asarray(I, dtype=float)
    X = np.asarray(X, dtype=float)
    if not (t.shape == I.shape == X.shape) or t.size == 0:
        raise ParameterError('times, I and X must be nonempty and of equal length')
    active = X > 0
    if not active.any():
        ones = np.ones(t.shape, dtype=bool)
        return SandwichFit(c1=np.inf, c2=np.inf, lower_ok=ones, upper_ok=ones, c1_floor=c1_floor)

    calibration = active & (t >= np.median(t[active]))
    tail = t ** (6.0 - 2.0 * delta)
    c1 = float(np.min(_lower_roots(I[calibration], X[calibration], tail[calibration])))
    c2 = float(np.max(I[calibration] / X[calibration]))

    slack = 1e-14 * np.abs(I)
    if c1 > 0:
        relaxed = c1 / (1.0 + margin)
        lower_ok = relaxed * X - tail / relaxed <= I + slack
    else:
        lower_ok = np.zeros(t.shape, dtype=bool)
    upper_ok = I <= (1.0 + margin) * max(c2, 0.0) * X + slack
    if c1 < c1_floor:
        logger.warning(f'Energy sandwich: C1={c1:.3e} is below the floor {c1_floor:.3e}')
    return SandwichFit(c1=c1, c2=c2, lower_ok=lower_ok, upper_ok=upper_ok, c1_floor=c1_floor)


@dataclass(frozen=True)
class MonotonicityReport:
    derivative: np.ndarray
    main_constant: float
    envelope_constant: float
    passed: np.ndarray

    @property
    def pass_fraction(self) -> float:
        return float(np.mean(self.passed)) if self.passed.size else 1.0


def monotonicity_trend(times: Sequence[float], I: Sequence[float], R_l2: Sequence[float],
                       X: Sequence[float], envelope_constant: Optional[float] = None) -> MonotonicityReport:
    """dI/dt against C ||R||^2/|t|^3 with a fitted error envelope sqrt(ln(2 + 1/||R||)) X."""
    t = np.asarray(times, dtype=float)
    I = np.asarray(I, dtype=float)
    if t.size < 5:
        raise ParameterError('monotonicity_trend needs at least five samples')
    rate = np.gradient(I, t, edge_order=2)
    r = np.asarray(R_l2, dtype=float)
    main = r ** 2 / np.abs(t) ** 3
    with np.errstate(divide='ignore'):
        log_term = np.sqrt(np.log(2.0 + np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), np.inf)))
    envelope = np.where(r > 0, log_term * np.asarray(X, dtype=float), 0.0)
    basis = np.stack([main, -envelope], axis=1)
    if np.any(basis):
        (c_main, c_env), *_ = np.linalg.lstsq(basis, rate, rcond=None)
    else:
        c_main, c_env = 0.0, 0.0
    c_main = max(float(c_main), 0.0)
    c_env = abs(float(c_env)) if envelope_constant is None else float(envelope_constant)
    scale = 1e-12 * max(1.0, float(np.max(np.abs(rate))))
    passed = rate - c_main * main >= -c_env * envelope - scale
    return MonotonicityReport(derivative=rate, main_constant=c_main, envelope_constant=c_env, passed=passed)


@dataclass(frozen=True)
class DecouplingReport:
    eps: np.ndarray
    cross_values: np.ndarray
    concentration_values: np.ndarray
    cross_slope: float
    concentration_slope: float


def _log_slope(eps: np.ndarray, values: np.ndarray) -> float:
    positive = values > 0
    if positive.sum() < 2:
        return float('nan')
    return float(np.polyfit(np.log(eps[positive]), np.log(values[positive]), 1)[0])


def _check_decay(f: Callable[[np.ndarray], np.ndarray], name: str) -> None:
    near = np.linspace(1.0, 10.0, 50)
    far = np.geomspace(10.0, 1e4, 200)
    reference = np.max(np.abs(f(near)) * near ** 2)
    weighted = np.max(np.abs(f(far)) * far ** 2)
    weighted = max(weighted, np.max(np.abs(f(-far)) * far ** 2))
    if weighted > 10.0 * max(reference, 1e-300):
        raise DecayFitError(f'{name} does not decay like |x|^-2')


def decoupling_check(f: Callable, g: Callable, eps_list: Sequence[float],
                     h: Optional[Callable] = None) -> DecouplingReport:
    """Integrals of |f(x) g(x + 1/eps)| and |f(x/eps)|^2 h(x) over eps, with log-log slopes."""
    _check_decay(f, 'f')
    _check_decay(g, 'g')
    eps = np.asarray(eps_list, dtype=float)
    if np.any(eps <= 0):
        raise ParameterError('eps values must be positive')
    h = h or (lambda x: np.ones_like(np.asarray(x, dtype=float)))

    def cross(e: float) -> float:
        shift = 1.0 / e

        def integrand(x):
            return abs(float(f(np.array([x]))[0]) * float(g(np.array([x + shift]))[0]))

        pieces = [
            integrate.quad(integrand, -np.inf, -2.0 * shift, limit=200)[0],
            integrate.quad(integrand, -2.0 * shift, shift, points=[-shift, 0.0], limit=400)[0],
            integrate.quad(integrand, shift, np.inf, limit=200)[0],
        ]
        return float(sum(pieces))

    def concentration(e: float) -> float:
        def integrand(x):
            return abs(complex(f(np.array([x / e]))[0])) ** 2 * float(h(np.array([x]))[0])

        pieces = [
            integrate.quad(integrand, -np.inf, -1.0, limit=200)[0],
            integrate.quad(integrand, -1.0, 1.0, points=[0.0], limit=400)[0],
            integrate.quad(integrand, 1.0, np.inf, limit=200)[0],
        ]
        return float(sum(pieces))

    cross_values = np.array([cross(e) for e in eps])
    concentration_values = np.array([concentration(e) for e in eps])
    return DecouplingReport(eps=eps, cross_values=cross_values, concentration_values=concentration_values,
                            cross_slope=_log_slope(eps, cross_values),
                            concentration_slope=_log_slope(eps, concentration_values))


@dataclass(frozen=True)
class CorridorReport:
    flags: Dict[str, np.ndarray]
    constants: Dict[str, float]

    @property
    def pass_fractions(self) -> Dict[str, float]:
        return {name: float(np.mean(flag)) for name, flag in self.flags.items()}

    @property
    def all_pass(self) -> bool:
        return all(flag.all() for flag in self.flags.values())


def corridor_exponents(delta: float, varsigma: float) -> Dict[str, float]:
    return {
        'R_h12': 2 - delta,
        'R_l2': 3 - delta,
        'R_hs': 1 - delta - 2 * varsigma,
        'lambda': 4 - 2 * delta,
        'b': 3 - 2 * delta,
        'alpha': 3 - delta,
        'v': 4 - 2 * delta,
        'gamma': 1 - 2 * delta,
    }


def corridor_deviations(times: np.ndarray, values: np.ndarray, omegas: Sequence[float],
                        centers: Sequence[float], thetas: Sequence[float]) -> Dict[str, np.ndarray]:
    """Largest per-bubble distance of each parameter from its closed-form value."""
    t = np.asarray(times, dtype=float)[:, None]
    values = np.asarray(values, dtype=float).reshape(t.shape[0], -1, 5)
    w2 = np.asarray(omegas, dtype=float)[None, :] ** 2
    x = np.asarray(centers, dtype=float)[None, :]
    th = np.asarray(thetas, dtype=float)[None, :]
    return {
        'lambda': np.max(np.abs(values[..., 0] - w2 * t ** 2 / 4), axis=1),
        'b': np.max(np.abs(values[..., 1] + w2 * t / 2), axis=1),
        'v': np.max(np.abs(values[..., 2] - w2 * t ** 2 / 4), axis=1),
        'alpha': np.max(np.abs(values[..., 3] - x), axis=1),
        'gamma': np.max(np.abs(values[..., 4] + 4.0 / (w2 * t) - th), axis=1),
    }


def bootstrap_monitor(times: Sequence[float], quantities: Dict[str, Sequence[float]],
                      delta: float = 0.1, varsigma: float = 0.2,
                      margin: float = CORRIDOR_MARGIN) -> CorridorReport:
    """Trend-form corridor conformance.

    Each quantity q is compared against c |t|^e, with c calibrated on the
    half of the samples farthest from t = 0; a sample passes when
    q <= (1 + margin) c |t|^e.
    """
    check_corridor_parameters(delta, varsigma)
    t = np.abs(np.asarray(times, dtype=float))
    if np.any(t == 0):
        raise ParameterError('corridor times must be nonzero')
    exponents = corridor_exponents(delta, varsigma)
    early = t >= np.median(t)
    flags, constants = {}, {}
    for name, series in quantities.items():
        if name not in exponents:
            raise ParameterError(f'unknown corridor {name!r}')
        q = np.abs(np.asarray(series, dtype=float))
        scaled = q / t ** exponents[name]
        c = float(np.max(scaled[early]))
        constants[name] = c
        flags[name] = q <= (1.0 + margin) * c * t ** exponents[name] + 1e-300
    return CorridorReport(flags=flags, constants=constants)


@dataclass(frozen=True)
class MassQuantization:
    ball_masses: np.ndarray
    outside: float


def mass_quantization(u: SpectralField, centers: Sequence[float], r: float) -> MassQuantization:
    centers = np.sort(np.asarray(centers, dtype=float))
    if r <= 0:
        raise ParameterError('ball radius must be positive')
    if centers.size > 1 and r >= 0.5 * np.min(np.diff(centers)):
        raise ParameterError(f'balls of radius {r} around {centers.tolist()} overlap')
    x = u.grid.nodes
    density = u.grid.spacing * np.abs(u.values) ** 2
    masses, inside = [], np.zeros(x.shape, dtype=bool)
    for c in centers:
        ball = np.abs(x - c) < r
        inside |= ball
        masses.append(float(density[ball].sum()))
    return MassQuantization(ball_masses=np.array(masses), outside=float(density[~inside].sum()))


@dataclass
class DiagnosticsRecord:
    t: float
    X: float
    I_total: float
    E_part: float
    L_part: float
    localized_mass: List[float]
    localized_momentum: List[float]
    v_ratio: List[float]
    mass_in_balls: List[float]
    R_hs: float
    I_sweep: Dict[float, float] = field(default_factory=dict)

    def as_row(self) -> Dict[str, float]:
        row = {'X': self.X, 'I': self.I_total, 'E_part': self.E_part, 'L_part': self.L_part}
        for k, value in enumerate(self.mass_in_balls, start=1):
            row[f'ball_mass_{k}'] = value
        for name, series in (('locmass', self.localized_mass), ('locmom', self.localized_momentum),
                             ('v_ratio', self.v_ratio)):
            for k, value in enumerate(series, start=1):
                row[f'{name}_{k}'] = value
        row['R_hs'] = self.R_hs
        for A, value in self.I_sweep.items():
            row[f'I_A{A:g}'] = value
        return row


class DiagnosticsObserver:
    """Evaluates the diagnostic functionals on the latest decomposition."""

    def __init__(self, tracker: ModulationObserver, centers: Sequence[float], A: float = 50.0,
                 A_sweep: Sequence[float] = (), varsigma: float = 0.2, ball_radius: float = 1.0):
        self.tracker = tracker
        self.centers = list(centers)
        self.chi = chi_cutoff(A)
        self.sweep = {float(a): chi_cutoff(a) for a in A_sweep}
        self.varsigma = varsigma
        self.ball_radius = ball_radius
        self.records: List[DiagnosticsRecord] = []

    @cached_property
    def _hs_order(self) -> float:
        return 0.5 + self.varsigma

    def __call__(self, state, row: Dict[str, float]) -> None:
        result = self.tracker.latest
        if result is None:
            return
        u = state.u
        R = result.remainder
        U = u - R
        # localization slots are ordered by center, bubbles by parameter index
        order = np.argsort([p.alpha for p in result.params])
        phis = [None] * result.K
        for slot, i in enumerate(order):
            phis[i] = result.localization.phi[slot]
        split = generalized_energy(u, U, R, result.params, phis, self.chi)
        sweep = {A: generalized_energy(u, U, R, result.params, phis, chi).I
                 for A, chi in self.sweep.items()}
        record = DiagnosticsRecord(
            t=state.t,
            X=remainder_size(R, state.t),
            I_total=split.I, E_part=split.E_part, L_part=split.L_part,
            localized_mass=[localized_mass(b, R, phi) for b, phi in zip(result.bubbles, phis)],
            localized_momentum=[localized_momentum(u, phi) for phi in phis],
            v_ratio=[p.v / p.lam for p in result.params],
            mass_in_balls=list(mass_quantization(u, self.centers, self.ball_radius).ball_masses),
            R_hs=sobolev_norm(R, self._hs_order, homogeneous=True),
            I_sweep=sweep,
        )
        self.records.append(record)
        row.update(record.as_row())
