"""
Split-step Fourier integration of i u_t = Du - |u|^2 u.

Each step is the Strang composition N(dt/2) L(dt) N(dt/2) of the exact
linear flow (multiplier exp(-i dt |xi|)) and the exact pointwise phase
rotation of the nonlinear flow. Both substeps are L2 isometries.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    NewtonDivergenceError,
    NumericalFailure,
    NumericalInstabilityError,
    ParameterError,
    SingularJacobianError,
    UnderResolvedError,
)
from .profiles import RESOLUTION_FACTOR, BubbleParams
from .spectral import (
    Grid1D,
    SpectralField,
    derivative,
    inner_product,
    l2_norm,
    sobolev_norm,
    sup_norm,
)
from .ground_state import lp_norm

logger = logging.getLogger(__name__)

Direction = Literal['forward', 'backward']
Nonlinearity = Literal['focusing', 'defocusing', 'linear']
NONLINEARITY_SIGN = {'focusing': 1.0, 'defocusing': -1.0, 'linear': 0.0}

NORM_GROWTH_LIMIT = 1e3
SPECTRAL_MASS_LIMIT = 0.01
# The Nyquist band starts at this fraction of the Nyquist wavenumber: the
# modes a cubic product aliases into.
NYQUIST_BAND_START = 2.0 / 3.0

Observer = Callable[['SimulationState', Dict[str, float]], None]
ParamsEstimator = Callable[['SimulationState'], Optional[Sequence[BubbleParams]]]


@dataclass(frozen=True)
class SimulationState:
    t: float
    u: SpectralField
    dt_last: float = 0.0
    step_count: int = 0

    @property
    def grid(self) -> Grid1D:
        return self.u.grid


@dataclass(frozen=True)
class DtPolicy:
    c_dt: float = 0.1
    dt_max: float = 1e-2
    dt_min: float = 1e-9

    def __post_init__(self):
        if not 0 < self.c_dt <= 1:
            raise ParameterError(f'c_dt must lie in (0, 1], got {self.c_dt}')
        if not 0 < self.dt_min <= self.dt_max:
            raise ParameterError('dt bounds must satisfy 0 < dt_min <= dt_max')


class Conserved(NamedTuple):
    mass: float
    energy: float
    momentum: float


@dataclass
class TrajectoryRecord:
    rows: List[Dict[str, float]] = field(default_factory=list)
    termination: str = 'running'
    final_state: Optional[SimulationState] = None
    initial_conserved: Optional[Conserved] = None

    def append(self, row: Dict[str, float]) -> None:
        self.rows.append(row)

    @property
    def columns(self) -> List[str]:
        seen: Dict[str, None] = {}
        for row in self.rows:
            for key in row:
                seen.setdefault(key)
        return list(seen)

    def column(self, name: str) -> np.ndarray:
        return np.array([row.get(name, np.nan) for row in self.rows], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.column('t')

    def drift(self, name: str) -> float:
        """max |q(t) - q(t0)| / |q(t0)| over the record."""
        values = self.column(name)
        if values.size == 0:
            return 0.0
        scale = abs(values[0]) or 1.0
        return float(np.max(np.abs(values - values[0])) / scale)


def _direction_sign(direction: Direction) -> float:
    if direction == 'forward':
        return 1.0
    if direction == 'backward':
        return -1.0
    raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")


class HalfWaveEvolver:

    def __init__(self, grid: Grid1D, nonlinearity: Nonlinearity = 'focusing', dealias: bool = False):
        if nonlinearity not in NONLINEARITY_SIGN:
            raise ParameterError(f'unknown nonlinearity {nonlinearity!r}')
        self.grid = grid
        self.nonlinearity = nonlinearity
        self.coupling = NONLINEARITY_SIGN[nonlinearity]
        self.dealias = dealias
        self._mask = grid.abs_wavenumbers <= (2.0 / 3.0) * np.max(grid.abs_wavenumbers)
        self._band = grid.abs_wavenumbers > NYQUIST_BAND_START * np.max(grid.abs_wavenumbers)
        self._linear_cache: Tuple[float, Optional[np.ndarray]] = (np.nan, None)
        self.reference_h12: Optional[float] = None

    def _linear_factor(self, signed_dt: float) -> np.ndarray:
        cached_dt, factor = self._linear_cache
        if factor is None or cached_dt != signed_dt:
            factor = np.exp(-1j * signed_dt * self.grid.abs_wavenumbers)
            if self.dealias:
                factor = factor * self._mask
            self._linear_cache = (signed_dt, factor)
        return factor

    def _nonlinear(self, values: np.ndarray, signed_dt: float) -> np.ndarray:
        if self.coupling == 0.0:
            return values
        return values * np.exp(1j * self.coupling * signed_dt * np.abs(values) ** 2)

    def step(self, state: SimulationState, dt: float, direction: Direction = 'forward') -> SimulationState:
        if not dt > 0:
            raise ParameterError(f'dt must be positive, got {dt}')
        signed_dt = _direction_sign(direction) * dt
        values = self._nonlinear(state.u.values, 0.5 * signed_dt)
        values = np.fft.ifft(self._linear_factor(signed_dt) * np.fft.fft(values))
        values = self._nonlinear(values, 0.5 * signed_dt)
        if not np.all(np.isfinite(values)):
            raise NumericalInstabilityError(
                f'non-finite values after step {state.step_count + 1} at t={state.t + signed_dt:.6g}'
            )
        return SimulationState(t=state.t + signed_dt, u=SpectralField(self.grid, values),
                               dt_last=dt, step_count=state.step_count + 1)

    def adapt_dt(self, state: SimulationState, params_estimate: Optional[Sequence[BubbleParams]] = None,
                 c_dt: float = 0.1, dt_max: float = 1e-2) -> float:
        """dt = c_dt * min(lambda_min, 1/||u||_inf^2), capped at dt_max."""
        if not 0 < c_dt <= 1:
            raise ParameterError(f'c_dt must lie in (0, 1], got {c_dt}')
        peak = sup_norm(state.u)
        scale = np.inf if peak == 0 else 1.0 / peak ** 2
        if params_estimate:
            scale = min(scale, min(p.lam for p in params_estimate))
        return float(min(c_dt * scale, dt_max))

    def conserved(self, state: SimulationState) -> Conserved:
        u = state.u
        mass = l2_norm(u) ** 2
        energy = (0.5 * sobolev_norm(u, 0.5, homogeneous=True) ** 2
                  - 0.25 * self.coupling * lp_norm(u, 4) ** 4)
        momentum = inner_product(derivative(u), u).imag
        return Conserved(mass, energy, momentum)

    def band_mass_fraction(self, state: SimulationState) -> float:
        """Fraction of L2 mass in the Nyquist band."""
        power = np.abs(state.u.spectrum) ** 2
        total = power.sum()
        return 0.0 if total == 0 else float(power[self._band].sum() / total)

    def blowup_detected(self, state: SimulationState,
                        params_estimate: Optional[Sequence[BubbleParams]] = None) -> Tuple[bool, str]:
        if params_estimate:
            lam_min = min(p.lam for p in params_estimate)
            if lam_min < RESOLUTION_FACTOR * self.grid.spacing:
                return True, 'resolution'
        if self.reference_h12:
            if sobolev_norm(state.u, 0.5) > NORM_GROWTH_LIMIT * self.reference_h12:
                return True, 'norm'
        if self.band_mass_fraction(state) > SPECTRAL_MASS_LIMIT:
            return True, 'spectral'
        return False, ''

    def _row(self, state: SimulationState) -> Dict[str, float]:
        mass, energy, momentum = self.conserved(state)
        return {'t': state.t, 'mass': mass, 'energy': energy, 'momentum': momentum}

    def run(self, state: SimulationState, t_stop: float, dt_policy: Optional[DtPolicy] = None,
            observers: Sequence[Observer] = (), observer_stride: int = 1,
            params_estimator: Optional[ParamsEstimator] = None,
            max_steps: int = 10 ** 6) -> TrajectoryRecord:
        dt_policy = dt_policy or DtPolicy()
        if observer_stride < 1:
            raise ParameterError('observer_stride must be at least 1')
        if t_stop == state.t:
            raise ParameterError('t_stop coincides with the initial time')
        direction: Direction = 'forward' if t_stop > state.t else 'backward'
        self.reference_h12 = sobolev_norm(state.u, 0.5) or None
        record = TrajectoryRecord(initial_conserved=self.conserved(state))
        logger.info(f'Run start: t={state.t:.6g} -> {t_stop:.6g} ({direction}), '
                    f'nonlinearity={self.nonlinearity}, n={self.grid.n_points}')

        params = None

        def observe(current: SimulationState):
            nonlocal params
            row = self._row(current)
            for observer in observers:
                observer(current, row)
            if params_estimator is not None:
                params = params_estimator(current)
            record.append(row)

        try:
            observe(state)
            while abs(t_stop - state.t) > 1e-14 * max(1.0, abs(t_stop)):
                if state.step_count >= max_steps:
                    record.termination = 'max_steps'
                    break
                dt = self.adapt_dt(state, params, dt_policy.c_dt, dt_policy.dt_max)
                if dt < dt_policy.dt_min:
                    record.termination = 'resolution'
                    break
                dt = min(dt, abs(t_stop - state.t))
                state = self.step(state, dt, direction)
                finished = abs(t_stop - state.t) <= 1e-14 * max(1.0, abs(t_stop))
                if state.step_count % observer_stride == 0 or finished:
                    observe(state)
                detected, reason = self.blowup_detected(state, params)
                if detected:
                    record.termination = f'blowup:{reason}'
                    break
            else:
                record.termination = 't_stop'
        except UnderResolvedError as exc:
            logger.warning(f'Run stopped: {exc}')
            record.termination = 'blowup:resolution'
        except (NewtonDivergenceError, SingularJacobianError) as exc:
            logger.warning(f'Run stopped, decomposition lost: {exc}')
            record.termination = 'decomposition'
        except NumericalFailure as exc:
            logger.warning(f'Run stopped: {exc}')
            record.termination = f'error:{type(exc).__name__}'
            record.final_state = state
            exc.record = record
            raise
        record.final_state = state
        logger.info(f'Run end: t={state.t:.6g} after {state.step_count} steps, cause {record.termination}')
        return record


def initial_state(u: SpectralField, t0: float) -> SimulationState:
    return SimulationState(t=float(t0), u=u)
