"""
Experiment orchestration: boundary data, evolution with tracking and
diagnostics, and the artifacts of a run (config echo, trajectory CSV,
field checkpoints, JSON summary). Also the schedule, Psi-scaling and
re-diagnosis sweeps behind the management commands.
"""
import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from django.conf import settings

from .caching import cached_ground_state, cached_profile_chain
from .checkpoints import atomic_write, checkpoint_load, checkpoint_save
from .diagnostics import (
    CORRIDORS,
    DiagnosticsObserver,
    bootstrap_monitor,
    chi_cutoff,
    corridor_deviations,
    energy_sandwich,
    generalized_energy,
    mass_quantization,
    monotonicity_trend,
    profile_error_eta_series,
    remainder_size,
)
from .evolver import DtPolicy, HalfWaveEvolver, TrajectoryRecord, initial_state
from .exceptions import HalfwaveError, NumericalFailure, ParameterError, UnderResolvedError
from .linearized import ProfileSet
from .modulation import PARAM_NAMES, ModulationObserver, decompose, mod_vector
from .profiles import (
    RESOLUTION_FACTOR,
    BubbleParams,
    ProfileInterpolator,
    boundary_data,
    profile_residual,
)
from .serializers import config_echo, config_hash, validate_config
from .spectral import Grid1D, l2_norm

logger = logging.getLogger(__name__)

FIXED_COLUMNS = ('R_l2', 'R_h12', 'X', 'I', 'E_part', 'L_part', 'Mod', 'mass', 'energy', 'momentum')
PSI_B_VALUES = (0.02, 0.04, 0.08)


@dataclass
class RunArtifacts:
    directory: Path
    config: dict
    record: TrajectoryRecord
    summary: dict = field(default_factory=dict)


def build_grid(config) -> Grid1D:
    return Grid1D(int(config['grid']['n_points']), float(config['grid']['length']))


def frequencies(config) -> List[float]:
    return list(config['omegas']) if config.get('omegas') else [config['omega']] * config['K']


def resolution_limit(grid: Grid1D, omegas: Sequence[float]) -> float:
    """Latest negative time at which omega^2 t^2 / 4 still spans RESOLUTION_FACTOR cells."""
    return -2.0 * math.sqrt(RESOLUTION_FACTOR * grid.spacing) / min(omegas)


def launch_and_target(config):
    if config['direction'] == 'backward':
        return config['t_stop'], config['t_start']
    return config['t_start'], config['t_stop']


def check_window(config, grid: Grid1D) -> Optional[float]:
    """Raise when the launch time is unresolvable; return the cut-off time if the window end is."""
    limit = resolution_limit(grid, frequencies(config))
    t_launch, t_target = launch_and_target(config)
    if t_launch > limit:
        raise UnderResolvedError(
            f'boundary data at t={t_launch} is below the grid resolution; '
            f'need t <= {limit:.4g} on n={grid.n_points}, L={grid.length:g}')
    if t_target > limit:
        logger.warning(f'Window end t={t_target} is not resolvable; the run will stop near t={limit:.4g}')
        return limit
    return None


def prepare_profiles(grid: Grid1D, tolerances) -> ProfileSet:
    gs = cached_ground_state(grid, power=3, tol=tolerances['ground_state'])
    return cached_profile_chain(gs, tol=tolerances['profile'], compatibility_tol=tolerances['compatibility'])


class CheckpointWriter:
    """Saves every ``stride``-th observed state; stride 0 keeps only the final one."""

    def __init__(self, directory: Path, stride: int):
        self.directory = directory
        self.stride = stride
        self.count = 0
        self.paths: List[Path] = []

    def __call__(self, state, row):
        if self.stride and self.count % self.stride == 0:
            self.paths.append(checkpoint_save(state, self.directory / f'checkpoint_{self.count:05d}.hwb'))
        self.count += 1


def trajectory_columns(K: int, record: TrajectoryRecord) -> List[str]:
    columns = ['t']
    for k in range(1, K + 1):
        columns += [f'{name}_{k}' for name in PARAM_NAMES]
    columns += list(FIXED_COLUMNS)
    columns += [f'ball_mass_{k}' for k in range(1, K + 1)]
    columns += [f'corr_{name}' for name in CORRIDORS]
    for name in ('locmass', 'locmom', 'v_ratio'):
        columns += [f'{name}_{k}' for k in range(1, K + 1)]
    columns += [name for name in record.columns if name not in columns]
    return columns


def _format(value) -> str:
    if value is None:
        return 'nan'
    if isinstance(value, (bool, np.bool_)):
        return '1' if value else '0'
    return repr(float(value))


def write_trajectory(path: Path, K: int, record: TrajectoryRecord) -> Path:
    columns = trajectory_columns(K, record)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in record.rows:
        writer.writerow([_format(row.get(name)) for name in columns])
    return atomic_write(path, buffer.getvalue().encode())


def load_trajectory(path) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise ParameterError(f'trajectory not found: {path}')
    with path.open(newline='') as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = [[float(item) for item in line] for line in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def param_array(columns: Dict[str, np.ndarray], K: int) -> np.ndarray:
    """Parameter series of shape (T, K, 5) from trajectory columns."""
    return np.stack([np.stack([columns[f'{name}_{k}'] for name in PARAM_NAMES], axis=1)
                     for k in range(1, K + 1)], axis=1)


def trend_slope(times, values) -> float:
    """Least-squares slope of log|value| against log|t|."""
    t = np.abs(np.asarray(times, dtype=float))
    v = np.abs(np.asarray(values, dtype=float))
    usable = np.isfinite(v) & (v > 0) & (t > 0)
    if usable.sum() < 3 or np.ptp(np.log(t[usable])) == 0:
        return float('nan')
    return float(np.polyfit(np.log(t[usable]), np.log(v[usable]), 1)[0])


def _annotate(record: TrajectoryRecord, config, profiles: ProfileSet,
              interpolator: ProfileInterpolator) -> dict:
    """Columns that need the whole series: Mod, corridor flags and eta norms."""
    K = config['K']
    times = record.times
    if times.size < 3:
        return {}
    columns = {name: record.column(name) for name in record.columns}
    values = param_array(columns, K)

    mod = mod_vector(times, values).overall
    quantities = {name: columns[name] for name in ('R_h12', 'R_l2', 'R_hs') if name in columns}
    quantities.update(corridor_deviations(times, values, frequencies(config),
                                          config['centers'], config['thetas']))
    report = bootstrap_monitor(times, quantities, config['delta'], config['varsigma'])

    for i, row in enumerate(record.rows):
        row['Mod'] = float(mod[i])
        for name, flags in report.flags.items():
            row[f'corr_{name}'] = bool(flags[i])
        try:
            eta = profile_error_eta_series(times, values, i, profiles, profiles.grid,
                                           interpolator)
            norms = eta.norms
        except UnderResolvedError:
            norms = (float('nan'),) * 3
        for order, norm in enumerate(norms):
            row[f'eta_{order}'] = norm
    return report.pass_fractions


def _clean(value):
    if isinstance(value, dict):
        return {key: _clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def summarize(record: TrajectoryRecord, config, gs_mass: float, corridor_fractions: dict,
              cutoff: Optional[float], windings: Optional[Sequence[int]] = None) -> dict:
    K = config['K']
    times = record.times
    summary = {
        'config_hash': config_hash(config),
        'termination': record.termination,
        'partial': record.termination.startswith('error'),
        'samples': int(times.size),
        'steps': record.final_state.step_count if record.final_state else 0,
        't_first': float(times[0]) if times.size else None,
        't_last': float(times[-1]) if times.size else None,
        'resolution_limit_t': cutoff,
        'drifts': {name: record.drift(name) for name in ('mass', 'energy', 'momentum')},
        'corridor_pass_fractions': corridor_fractions,
        'gamma_windings': list(windings) if windings is not None else None,
    }
    if times.size == 0:
        return _clean(summary)

    columns = {name: record.column(name) for name in record.columns}
    omegas = np.asarray(frequencies(config))
    if f'lambda_{K}' in columns:
        values = param_array(columns, K)
        expected = omegas[None, :] ** 2 * times[:, None] ** 2 / 4.0
        summary['lambda_tracking_error'] = float(np.max(np.abs(values[..., 0] - expected) / expected))
        summary['alpha_error'] = float(np.max(np.abs(values[..., 3] - np.asarray(config['centers'])[None, :])))
        ratio = values[..., 2] / values[..., 0]
        summary['slopes'] = {
            'v_ratio': [trend_slope(times, ratio[:, k] - 1.0) for k in range(K)],
            'locmass': [trend_slope(times, columns.get(f'locmass_{k}', np.full(times.shape, np.nan)))
                        for k in range(1, K + 1)],
        }
        if 'Mod' in columns:
            summary['slopes']['Mod'] = trend_slope(times, columns['Mod'])

    if all(f'ball_mass_{k}' in columns for k in range(1, K + 1)):
        balls = np.stack([columns[f'ball_mass_{k}'] for k in range(1, K + 1)], axis=1)
        summary['ball_masses'] = {
            'initial': balls[0].tolist(),
            'final': balls[-1].tolist(),
            'max_relative_change': float(np.max(np.abs(balls / balls[0] - 1.0))),
            'final_vs_ground_state': (np.abs(balls[-1] / gs_mass - 1.0)).tolist(),
        }
        if record.final_state is not None:
            final = mass_quantization(record.final_state.u, config['centers'], config['ball_radius'])
            summary['ball_masses']['outside_final'] = final.outside

    if times.size >= 5 and 'I' in columns:
        trend = monotonicity_trend(times, columns['I'], columns['R_l2'], columns['X'])
        sandwich = energy_sandwich(times, columns['I'], columns['X'], config['delta'])
        summary['monotonicity'] = {
            'A': config['A_virial'],
            'pass_fraction': trend.pass_fraction,
            'main_constant': trend.main_constant,
            'envelope_constant': trend.envelope_constant,
        }
        summary['sandwich'] = {'c1': sandwich.c1, 'c2': sandwich.c2, 'c1_floor': sandwich.c1_floor,
                               'holds': sandwich.holds}
        sweep = {}
        for A in config['A_sweep']:
            name = f'I_A{A:g}'
            if name in columns:
                sweep[f'{A:g}'] = monotonicity_trend(times, columns[name], columns['R_l2'],
                                                     columns['X']).pass_fraction
        if sweep:
            summary['monotonicity']['A_sweep'] = sweep
    return _clean(summary)


def run_directory(config, out=None) -> Path:
    base = Path(out or config['output_dir'])
    return base / config_hash(config)


def run_experiment(config, out=None) -> RunArtifacts:
    """Launch the boundary data, evolve, track, diagnose and persist one run."""
    start_time = time.time()
    grid = build_grid(config)
    directory = run_directory(config, out)
    directory.mkdir(parents=True, exist_ok=True)
    atomic_write(directory / 'config.json', config_echo(config).encode())
    logger.info(f'Run directory {directory}')

    cutoff = check_window(config, grid)
    profiles = prepare_profiles(grid, config['tolerances'])
    interpolator = ProfileInterpolator(profiles)
    t_launch, t_target = launch_and_target(config)
    u0, params0 = boundary_data(grid, config['K'], config['omega'], config['centers'], config['thetas'],
                                t_launch, profiles, omegas=config.get('omegas'), interpolator=interpolator)

    tracker = ModulationObserver(profiles, params0, t_launch, tol=config['tolerances']['decomposition'],
                                 max_newton=settings.HALFWAVE['MAX_NEWTON'], interpolator=interpolator,
                                 sigma=config['sigma'])
    diagnostics = DiagnosticsObserver(tracker, config['centers'], A=config['A_virial'],
                                      A_sweep=config['A_sweep'], varsigma=config['varsigma'],
                                      ball_radius=config['ball_radius'])
    checkpoints = CheckpointWriter(directory, config['checkpoint_stride'])
    evolver = HalfWaveEvolver(grid, config['nonlinearity'], config['dealias'])
    policy = DtPolicy(config['dt_factor'], config['dt_max'], config['dt_min'])

    failure = None
    try:
        record = evolver.run(initial_state(u0, t_launch), t_target, policy,
                             observers=[tracker, diagnostics, checkpoints],
                             observer_stride=config['observer_stride'],
                             params_estimator=tracker.current_params, max_steps=config['max_steps'])
    except NumericalFailure as exc:
        record = getattr(exc, 'record', None)
        if record is None:
            raise
        failure = exc

    corridor_fractions = {}
    try:
        corridor_fractions = _annotate(record, config, profiles, interpolator)
    except HalfwaveError as exc:
        logger.warning(f'Post-hoc columns skipped: {exc}')

    if record.final_state is not None:
        checkpoint_save(record.final_state, directory / 'checkpoint_final.hwb')
    write_trajectory(directory / 'trajectory.csv', config['K'], record)
    summary = summarize(record, config, profiles.gs.mass, corridor_fractions, cutoff,
                        windings=tracker.windings)
    if failure is not None:
        summary['error'] = str(failure)
    atomic_write(directory / 'summary.json', (json.dumps(summary, indent=2, sort_keys=True) + '\n').encode())
    logger.info(f'Run {summary["config_hash"]} finished ({record.termination}) '
                f'in {time.time() - start_time:.1f}s')
    if failure is not None:
        raise failure
    return RunArtifacts(directory=directory, config=config, record=record, summary=summary)


def run_schedule(config, t_starts: Sequence[float], out=None, max_workers=None) -> dict:
    """One run per t_start, concurrently; tabulates lambda-tracking error against t_start."""
    configs = [validate_config({**config, 't_start': float(t)}, source=f't_start={t}') for t in t_starts]
    max_workers = max_workers or settings.HALFWAVE['MAX_WORKERS']
    base = Path(out or config['output_dir'])
    entries = []

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {executor.submit(run_experiment, item, out): item for item in configs}

        for future in as_completed(futures):
            item = futures[future]
            entry = {'t_start': item['t_start'], 'config_hash': config_hash(item)}
            try:
                artifacts = future.result()
                entry['termination'] = artifacts.summary['termination']
                entry['lambda_tracking_error'] = artifacts.summary.get('lambda_tracking_error')
            except HalfwaveError as e:
                logger.warning(f'Schedule run t_start={item["t_start"]} failed: {e}')
                entry['termination'] = f'error:{type(e).__name__}'
                entry['error'] = str(e)
            entries.append(entry)

    entries.sort(key=lambda entry: entry['t_start'])
    summary = {'t_stop': config['t_stop'], 'runs': entries}
    atomic_write(base / 'schedule_summary.json', (json.dumps(_clean(summary), indent=2, sort_keys=True) + '\n').encode())
    return summary


@dataclass(frozen=True)
class PsiScaling:
    b_values: np.ndarray
    l2_norms: np.ndarray
    weighted_sups: np.ndarray
    slope: float


def psi_scaling(profiles: ProfileSet, b_values: Sequence[float] = PSI_B_VALUES) -> PsiScaling:
    """Size of the profile residual along v = b^2; the log-log slope in b should be near 4."""
    b = np.asarray(b_values, dtype=float)
    if b.size < 2:
        raise ParameterError('the Psi sweep needs at least two values of b')
    residuals = [profile_residual(profiles, float(value), float(value) ** 2) for value in b]
    l2 = np.array([r.l2_norm for r in residuals])
    sups = np.array([r.weighted_sup for r in residuals])
    slope = float(np.polyfit(np.log(b), np.log(l2), 1)[0])
    logger.info(f'Psi scaling slope {slope:.3f} over b in {b.tolist()}')
    return PsiScaling(b_values=b, l2_norms=l2, weighted_sups=sups, slope=slope)


def write_psi_scaling(path, result: PsiScaling) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['b', 'v', 'psi_l2', 'psi_weighted_sup', 'slope'])
    for b, l2, sup in zip(result.b_values, result.l2_norms, result.weighted_sups):
        writer.writerow([repr(float(b)), repr(float(b * b)), repr(float(l2)), repr(float(sup)),
                         repr(result.slope)])
    return atomic_write(path, buffer.getvalue().encode())


def rediagnose(directory, A_values: Sequence[float] = ()) -> dict:
    """Trend checks recomputed from a stored run, with extra virial radii evaluated on its checkpoints."""
    directory = Path(directory)
    config_path = directory / 'config.json'
    if not config_path.is_file():
        raise ParameterError(f'no config.json in {directory}')
    config = validate_config(json.loads(config_path.read_text()), source=str(config_path))
    columns = load_trajectory(directory / 'trajectory.csv')
    times = columns['t']
    report = {'config_hash': config_hash(config), 'samples': int(times.size)}
    if times.size >= 5:
        trend = monotonicity_trend(times, columns['I'], columns['R_l2'], columns['X'])
        sandwich = energy_sandwich(times, columns['I'], columns['X'], config['delta'])
        report['monotonicity'] = {'A': config['A_virial'], 'pass_fraction': trend.pass_fraction}
        report['sandwich'] = {'c1': sandwich.c1, 'c2': sandwich.c2, 'c1_floor': sandwich.c1_floor,
                              'holds': sandwich.holds}
    report['corridor_pass_fractions'] = {
        name[len('corr_'):]: float(np.mean(values)) for name, values in columns.items() if name.startswith('corr_')
    }

    if A_values:
        report['A_sweep'] = _sweep_checkpoints(directory, config, columns, A_values)
    atomic_write(directory / 'diagnostics.json', (json.dumps(_clean(report), indent=2, sort_keys=True) + '\n').encode())
    return _clean(report)


def _sweep_checkpoints(directory: Path, config, columns, A_values) -> Dict[str, dict]:
    grid = build_grid(config)
    profiles = prepare_profiles(grid, config['tolerances'])
    interpolator = ProfileInterpolator(profiles)
    values = param_array(columns, config['K'])
    chis = {float(A): chi_cutoff(A) for A in A_values}
    series = {A: [] for A in chis}
    samples = []

    for path in sorted(directory.glob('checkpoint_[0-9]*.hwb')):
        state = checkpoint_load(path, grid)
        index = int(np.argmin(np.abs(columns['t'] - state.t)))
        guess = [BubbleParams.from_sequence(row) for row in values[index]]
        result = decompose(state.u, guess, profiles, config['tolerances']['decomposition'],
                           settings.HALFWAVE['MAX_NEWTON'], interpolator, config['sigma'])
        R = result.remainder
        U = state.u - R
        order = np.argsort([p.alpha for p in result.params])
        phis = [None] * result.K
        for slot, i in enumerate(order):
            phis[i] = result.localization.phi[slot]
        samples.append((state.t, l2_norm(R), remainder_size(R, state.t)))
        for A, chi in chis.items():
            series[A].append(generalized_energy(state.u, U, R, result.params, phis, chi).I)

    sweep = {}
    times = np.array([s[0] for s in samples])
    for A, I in series.items():
        entry = {'checkpoints': len(I)}
        if len(I) >= 5:
            trend = monotonicity_trend(times, I, [s[1] for s in samples], [s[2] for s in samples])
            entry['pass_fraction'] = trend.pass_fraction
        else:
            logger.warning(f'A={A:g}: {len(I)} checkpoints are too few for a trend check')
        sweep[f'{A:g}'] = entry
    return sweep
