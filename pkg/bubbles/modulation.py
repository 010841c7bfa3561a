"""
Geometric decomposition u = sum U_k + R and the parameter dynamics around it.

The 5K parameters are fixed by five orthogonality conditions per bubble,
solved by Newton's method with a finite-difference Jacobian.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.signal import savgol_filter

from .exceptions import (
    NewtonDivergenceError,
    ParameterError,
    SingularJacobianError,
)
from .interpolation import BandLimitedInterpolant
from .linearized import ProfileSet
from .profiles import (
    BubbleParams,
    LocalizationSet,
    ProfileInterpolator,
    check_resolvable,
    flatten_params,
    localization_set,
    boundary_params,
    unflatten_params,
)
from .spectral import (
    Grid1D,
    SpectralField,
    derivative,
    inner_product,
    l2_norm,
    scaling_operator,
    sobolev_norm,
)

logger = logging.getLogger(__name__)

CONDITION_NAMES = ('S1', 'G1', 'grad', 'scaling', 'rho')
PARAM_NAMES = ('lambda', 'b', 'v', 'alpha', 'gamma')
JACOBIAN_CONDITION_LIMIT = 1e12
FD_STEP = 1e-6


@dataclass(frozen=True)
class DecompositionResult:
    params: Tuple[BubbleParams, ...]
    remainder: SpectralField
    ortho_residuals: np.ndarray
    newton_iters: int
    localized_remainders: Tuple[SpectralField, ...] = ()
    localization: Optional[LocalizationSet] = None
    bubbles: Tuple[SpectralField, ...] = field(default=(), repr=False)

    @property
    def K(self) -> int:
        return len(self.params)


class _Decomposer:
    """Orthogonality map P -> F(P) for a fixed field u."""

    def __init__(self, u: SpectralField, interpolator: ProfileInterpolator):
        self.u = u
        self.grid = u.grid
        self.interpolator = interpolator
        self.u_norm = l2_norm(u) or 1.0

    def bubble_and_directions(self, p: BubbleParams):
        grid = self.grid
        check_resolvable(grid, p.lam)
        y = (grid.nodes - p.alpha) / p.lam
        phase = p.lam ** -0.5 * np.exp(1j * p.gamma)
        interp = self.interpolator
        bubble = SpectralField(grid, phase * interp.profile_at(y, p.b, p.v))
        varrho = p.b * interp.values('varrho_b', y) + p.v * interp.values('varrho_v', y)
        directions = (
            SpectralField(grid, phase * interp.values('s1', y)),
            SpectralField(grid, phase * interp.values('g1', y)),
            derivative(bubble),
            scaling_operator(bubble, center=p.alpha),
            SpectralField(grid, phase * (interp.values('rho', y) + 1j * varrho)),
        )
        return bubble, directions

    def evaluate(self, params: Sequence[BubbleParams]):
        rendered = [self.bubble_and_directions(p) for p in params]
        remainder = self.u
        for bubble, _ in rendered:
            remainder = remainder - bubble
        residuals = []
        for _, directions in rendered:
            for index, direction in enumerate(directions):
                product = inner_product(direction, remainder)
                value = product.real if index < 2 else product.imag
                residuals.append(value / ((l2_norm(direction) or 1.0) * self.u_norm))
        return np.array(residuals), remainder, tuple(b for b, _ in rendered)

    def residual_vector(self, vector: np.ndarray) -> np.ndarray:
        return self.evaluate(unflatten_params(vector))[0]


def _fd_steps(vector: np.ndarray) -> np.ndarray:
    values = vector.reshape(-1, 5)
    lam = values[:, 0]
    steps = np.stack([
        FD_STEP * lam,
        FD_STEP * np.maximum(np.abs(values[:, 1]), lam),
        FD_STEP * np.maximum(np.abs(values[:, 2]), lam),
        FD_STEP * lam,
        np.full_like(lam, FD_STEP),
    ], axis=1)
    return steps.ravel()


def _jacobian(decomposer: _Decomposer, vector: np.ndarray, base: np.ndarray) -> np.ndarray:
    steps = _fd_steps(vector)
    jac = np.empty((base.size, vector.size))
    for j, h in enumerate(steps):
        shifted = vector.copy()
        shifted[j] += h
        jac[:, j] = (decomposer.residual_vector(shifted) - base) / h
    return jac


def _newton_step(jac: np.ndarray, residual: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(jac)
    if not np.isfinite(cond) or cond > JACOBIAN_CONDITION_LIMIT:
        raise SingularJacobianError(f'decomposition Jacobian is singular (condition number {cond:.3e})')
    try:
        return np.linalg.solve(jac, residual)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(jac, residual, rcond=None)[0]


def decompose(u: SpectralField, guess: Sequence[BubbleParams], profiles: ProfileSet,
              tol: float = 1e-10, max_newton: int = 30,
              interpolator: Optional[ProfileInterpolator] = None,
              sigma: Optional[float] = None) -> DecompositionResult:
    if not guess:
        raise ParameterError('at least one bubble is required')
    interpolator = interpolator or ProfileInterpolator(profiles)
    decomposer = _Decomposer(u, interpolator)
    vector = flatten_params(guess)
    residual, remainder, bubbles = decomposer.evaluate(guess)
    initial = float(np.max(np.abs(residual)))

    for iteration in range(max_newton + 1):
        size = float(np.max(np.abs(residual)))
        if size <= tol:
            break
        if iteration == max_newton:
            raise NewtonDivergenceError(
                f'decomposition did not converge in {max_newton} Newton steps (residual {size:.3e})'
            )
        if size > 1e3 * max(initial, tol):
            raise NewtonDivergenceError(f'Newton residual grew from {initial:.3e} to {size:.3e}')
        step = _newton_step(_jacobian(decomposer, vector, residual), residual)
        damping = 1.0
        while True:
            candidate = vector - damping * step
            try:
                params = unflatten_params(candidate)
                residual, remainder, bubbles = decomposer.evaluate(params)
                break
            except ParameterError:
                damping *= 0.5
                if damping < 1e-4:
                    raise NewtonDivergenceError('Newton iterate left the admissible parameter region')
        vector = candidate

    params = unflatten_params(vector)
    order = np.argsort([p.alpha for p in params])
    loc = localization_set(u.grid, [params[i].alpha for i in order], sigma_override=sigma)
    localized = [None] * len(params)
    for slot, i in enumerate(order):
        localized[i] = remainder * loc.phi[slot].values
    logger.debug(f'Decomposition converged in {iteration} Newton steps, '
                 f'residual {np.max(np.abs(residual)):.2e}')
    return DecompositionResult(params=tuple(params), remainder=remainder, ortho_residuals=residual,
                               newton_iters=iteration, localized_remainders=tuple(localized),
                               localization=loc, bubbles=bubbles)


def closed_form_params(omega: float, centers: Sequence[float], thetas: Sequence[float], t: float,
                       convention: str = 'boundary', omegas: Optional[Sequence[float]] = None
                       ) -> List[BubbleParams]:
    """Explicit solution of the reduced system at time t < 0.

    ``convention='asymptotic'`` reads omega as the coefficient of lambda = omega t^2.
    """
    if t >= 0:
        raise ParameterError(f'closed-form parameters need t < 0, got {t}')
    frequencies = list(omegas) if omegas is not None else [omega] * len(centers)
    if len(frequencies) != len(centers) or len(thetas) != len(centers):
        raise ParameterError('centers, thetas and frequencies must have equal length')
    if convention == 'asymptotic':
        frequencies = [2.0 * np.sqrt(w) for w in frequencies]
    elif convention != 'boundary':
        raise ParameterError(f"convention must be 'boundary' or 'asymptotic', got {convention!r}")
    return [boundary_params(w, t, x, th) for w, x, th in zip(frequencies, centers, thetas)]


def _reduced_rhs(_t, y):
    values = y.reshape(-1, 5)
    lam, b, v = values[:, 0], values[:, 1], values[:, 2]
    out = np.empty_like(values)
    out[:, 0] = -b
    out[:, 1] = -0.5 * b * b / lam
    out[:, 2] = -b * v / lam
    out[:, 3] = v
    out[:, 4] = 1.0 / lam
    return out.ravel()


def _collapse(_t, y):
    return np.min(y.reshape(-1, 5)[:, 0]) - 1e-14


_collapse.terminal = True
_collapse.direction = -1


@dataclass(frozen=True)
class ParamSeries:
    times: np.ndarray
    values: np.ndarray
    collapsed: bool = False

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def params_at(self, index: int) -> List[BubbleParams]:
        return [BubbleParams.from_sequence(row) for row in self.values[index]]


def integrate_param_ode(initial: Sequence[BubbleParams], t0: float, t1: float, dt: float) -> ParamSeries:
    """lambda' = -b, b' = -b^2/(2 lambda), alpha' = v, v' = -bv/lambda, gamma' = 1/lambda."""
    if dt <= 0:
        raise ParameterError(f'dt must be positive, got {dt}')
    if t1 == t0:
        raise ParameterError('t0 and t1 coincide')
    count = int(np.ceil(abs(t1 - t0) / dt)) + 1
    t_eval = np.linspace(t0, t1, count)
    solution = solve_ivp(_reduced_rhs, (t0, t1), flatten_params(initial), method='DOP853',
                         t_eval=t_eval, rtol=1e-13, atol=1e-15, events=_collapse)
    if solution.status == -1:
        raise ParameterError(f'reduced system integration failed: {solution.message}')
    collapsed = solution.status == 1
    if collapsed:
        logger.warning(f'Reduced system collapsed (lambda -> 0) at t={solution.t_events[0][0]:.6g}')
    values = solution.y.T.reshape(len(solution.t), -1, 5)
    return ParamSeries(times=solution.t, values=values, collapsed=collapsed)


def advance_params(params: Sequence[BubbleParams], t0: float, t1: float) -> List[BubbleParams]:
    """One reduced-system step, used to predict the next Newton guess."""
    if t1 == t0:
        return list(params)
    solution = solve_ivp(_reduced_rhs, (t0, t1), flatten_params(params), method='DOP853',
                         rtol=1e-10, atol=1e-14)
    if not solution.success:
        return list(params)
    return unflatten_params(solution.y[:, -1])


@dataclass(frozen=True)
class ModSeries:
    times: np.ndarray
    summands: np.ndarray

    @property
    def total(self) -> np.ndarray:
        """Sum of the five summands, shape (T, K)."""
        return self.summands.sum(axis=2)

    @property
    def overall(self) -> np.ndarray:
        return self.total.sum(axis=1)


def _time_derivative(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    spacing = np.diff(times)
    uniform = np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0)
    if uniform and times.size >= 5:
        return savgol_filter(values, window_length=5, polyorder=4, deriv=1, delta=spacing[0], axis=0)
    return np.gradient(values, times, axis=0, edge_order=2)


def mod_vector(times: Sequence[float], param_series: np.ndarray) -> ModSeries:
    """|lambda'+b| + |lambda b'+b^2/2| + |alpha'-v| + |lambda v'+bv| + |lambda gamma'-1| per bubble."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(param_series, dtype=float)
    if values.ndim == 2:
        values = values.reshape(values.shape[0], -1, 5)
    if times.size < 3 or values.shape[0] != times.size:
        raise ParameterError('mod_vector needs at least three timestamped samples')
    rates = _time_derivative(times, values)
    lam, b, v = values[..., 0], values[..., 1], values[..., 2]
    summands = np.stack([
        np.abs(rates[..., 0] + b),
        np.abs(lam * rates[..., 1] + 0.5 * b * b),
        np.abs(rates[..., 3] - v),
        np.abs(lam * rates[..., 2] + b * v),
        np.abs(lam * rates[..., 4] - 1.0),
    ], axis=2)
    return ModSeries(times=times, summands=summands)


def renormalized_remainder(R: SpectralField, p: BubbleParams, reference: Grid1D,
                           interpolant: Optional[BandLimitedInterpolant] = None) -> SpectralField:
    """epsilon(y) = lambda^(1/2) R(lambda y + alpha) e^(-i gamma) on the reference grid."""
    grid = R.grid
    check_resolvable(grid, p.lam)
    x = p.lam * reference.nodes + p.alpha
    if grid == reference and p.lam == 1.0 and p.alpha == 0.0:
        return R * np.exp(-1j * p.gamma)
    interpolant = interpolant or BandLimitedInterpolant(R, periodic=True)
    values = interpolant(x)
    values[np.abs(x) >= 0.5 * grid.length] = 0.0
    return SpectralField(reference, p.lam ** 0.5 * values * np.exp(-1j * p.gamma))


def param_columns(params: Sequence[BubbleParams]) -> Dict[str, float]:
    row = {}
    for k, p in enumerate(params, start=1):
        for name, value in zip(PARAM_NAMES, p.as_tuple()):
            row[f'{name}_{k}'] = value
    return row


class ModulationObserver:
    """Decomposes every observed state, chaining guesses along the trajectory.

    Each guess is the previous accepted parameter set advanced by the reduced
    system, which keeps Newton in its basin through the fast phase rotation.
    """

    def __init__(self, profiles: ProfileSet, initial: Sequence[BubbleParams], t0: float,
                 tol: float = 1e-10, max_newton: int = 30,
                 interpolator: Optional[ProfileInterpolator] = None, sigma: Optional[float] = None):
        self.profiles = profiles
        self.interpolator = interpolator or ProfileInterpolator(profiles)
        self.tol = tol
        self.max_newton = max_newton
        self.sigma = sigma
        self.params: List[BubbleParams] = list(initial)
        self.t_last = t0
        self.latest: Optional[DecompositionResult] = None
        self.history: List[Tuple[float, Tuple[BubbleParams, ...]]] = []
        self.windings = [0] * len(self.params)

    def current_params(self, _state=None) -> List[BubbleParams]:
        return self.params

    def __call__(self, state, row: Dict[str, float]) -> None:
        guess = advance_params(self.params, self.t_last, state.t)
        try:
            result = decompose(state.u, guess, self.profiles, self.tol, self.max_newton,
                               self.interpolator, self.sigma)
        except NewtonDivergenceError:
            logger.warning(f'Decomposition lost at t={state.t:.6g}; end of the validity window')
            raise
        self.latest = result
        self.params = list(result.params)
        self.t_last = state.t
        self.history.append((state.t, result.params))
        self.windings = [int(np.floor((p.gamma + np.pi) / (2 * np.pi))) for p in result.params]
        row.update(param_columns(result.params))
        row['R_l2'] = l2_norm(result.remainder)
        row['R_h12'] = sobolev_norm(result.remainder, 0.5)

    def series(self) -> Tuple[np.ndarray, np.ndarray]:
        times = np.array([t for t, _ in self.history])
        values = np.array([[p.as_tuple() for p in params] for _, params in self.history])
        return times, values
