"""
Linearized operators L+ = D + 1 - 3Q^2 and L- = D + 1 - Q^2, constrained
solves on parity subspaces, and the correction-profile chain built from them.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla
from scipy.interpolate import BPoly

from .exceptions import (
    ConvergenceError,
    GridError,
    KernelCompatibilityError,
    ParameterError,
    StagnationError,
)
from .ground_state import GroundState
from .spectral import (
    SpectralField,
    derivative,
    fractional_laplacian,
    l2_norm,
    real_inner,
    scaling_operator,
)

logger = logging.getLogger(__name__)

Sign = Literal['+', '-']
Parity = Literal['even', 'odd']

PROFILE_NAMES = ('s1', 'g1', 'g2', 's2', 's3', 'rho', 'varrho_b', 'varrho_v')
PARITY_TABLE: Dict[str, Parity] = {
    's1': 'even', 'g1': 'odd', 'g2': 'odd', 's2': 'even', 's3': 'even',
    'rho': 'even', 'varrho_b': 'even', 'varrho_v': 'odd',
}
SMALLNESS_CEILING = 0.5
PARITY_TOLERANCE = 1e-6


def _potential_factor(sign: Sign) -> float:
    if sign == '+':
        return 3.0
    if sign == '-':
        return 1.0
    raise ParameterError(f"sign must be '+' or '-', got {sign!r}")


def apply_L(sign: Sign, f: SpectralField, gs: GroundState) -> SpectralField:
    """L_{+/-} f = Df + f - c Q^2 f with c = 3 or 1."""
    if f.grid != gs.grid:
        raise GridError('field and ground state live on different grids')
    c = _potential_factor(sign)
    return fractional_laplacian(f, 1.0) + f - f * (c * gs.values ** 2)


class ProjectedOperator(spla.LinearOperator):
    """P A P for a real symmetric operator A, P projecting on a parity subspace minus a kernel."""

    def __init__(self, gs: GroundState, sign: Sign, parity: Parity, kernel: Optional[np.ndarray]):
        n = gs.grid.n_points
        super().__init__(dtype=np.float64, shape=(n, n))
        self.grid = gs.grid
        self.symbol = gs.grid.abs_wavenumbers + 1.0
        self.potential = _potential_factor(sign) * gs.values ** 2
        self.parity_sign = 1.0 if parity == 'even' else -1.0
        self.kernel = None if kernel is None else kernel / np.linalg.norm(kernel)

    def project(self, x: np.ndarray) -> np.ndarray:
        y = 0.5 * (x + self.parity_sign * self.grid.reflect(x))
        if self.kernel is not None:
            y = y - self.kernel * (self.kernel @ y)
        return y

    def apply_full(self, x: np.ndarray) -> np.ndarray:
        return np.fft.ifft(self.symbol * np.fft.fft(x)).real - self.potential * x

    def _matvec(self, x):
        x = np.ravel(x)
        return self.project(self.apply_full(self.project(x)))


def _parity_defect(values: np.ndarray, grid, parity: Parity) -> float:
    scale = np.linalg.norm(values)
    if scale == 0:
        return 0.0
    mirrored = grid.reflect(values)
    target = mirrored if parity == 'even' else -mirrored
    return float(np.linalg.norm(values - target) / scale)


def kernel_direction(sign: Sign, gs: GroundState) -> SpectralField:
    return gs.q if sign == '-' else derivative(gs.q)


@dataclass(frozen=True)
class ConstrainedSolution:
    solution: SpectralField
    residual: float
    compatibility_defect: float
    iterations: int


def solve_constrained_detailed(sign: Sign, rhs: SpectralField, parity: Parity, gs: GroundState,
                               tol: float = 1e-10, compatibility_tol: float = 1e-5,
                               max_iter: Optional[int] = None) -> ConstrainedSolution:
    grid = gs.grid
    if rhs.grid != grid:
        raise GridError('rhs and ground state live on different grids')
    if parity not in ('even', 'odd'):
        raise ParameterError(f"parity must be 'even' or 'odd', got {parity!r}")
    b = np.array(rhs.values.real)
    defect = _parity_defect(b, grid, parity)
    if defect > PARITY_TOLERANCE:
        raise ParameterError(f'rhs is not {parity} (parity defect {defect:.2e})')
    sign_p = 1.0 if parity == 'even' else -1.0
    b = 0.5 * (b + sign_p * grid.reflect(b))

    kernel = kernel_direction(sign, gs).values.real
    kernel_parity: Parity = 'even' if sign == '-' else 'odd'
    compatibility = 0.0
    if kernel_parity == parity:
        b_norm = np.linalg.norm(b)
        k_norm = np.linalg.norm(kernel)
        if b_norm > 0:
            compatibility = abs(b @ kernel) / (b_norm * k_norm)
        if compatibility > compatibility_tol:
            raise KernelCompatibilityError(
                f'rhs overlaps the kernel of L{sign}: normalized overlap {compatibility:.3e}'
            )
        b = b - kernel * (b @ kernel) / (k_norm ** 2)
    else:
        kernel = None

    if np.linalg.norm(b) == 0:
        return ConstrainedSolution(grid.zeros(), 0.0, compatibility, 0)

    op = ProjectedOperator(gs, sign, parity, kernel)
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    b_l2 = np.sqrt(grid.spacing) * np.linalg.norm(b)
    rtol = min(1e-6, 0.05 * tol / b_l2)
    max_iter = max_iter or 20 * grid.n_points
    x, info = spla.minres(op, b, rtol=rtol, maxiter=max_iter, callback=count)
    x = op.project(x)
    residual = float(np.sqrt(grid.spacing) * np.linalg.norm(op.apply_full(x) - b))
    if info > 0 or residual > tol:
        raise StagnationError(
            f'L{sign} solve ({parity}) stalled after {iterations} iterations, residual {residual:.3e}'
        )
    if info < 0:
        raise ConvergenceError(f'minres reported illegal input (info={info})')
    return ConstrainedSolution(SpectralField(grid, x), residual, float(compatibility), iterations)


def solve_constrained(sign: Sign, rhs: SpectralField, parity: Parity, tol: float,
                      gs: GroundState, compatibility_tol: float = 1e-5) -> SpectralField:
    """Unique solution of L f = rhs in the parity subspace, orthogonal to the kernel."""
    return solve_constrained_detailed(sign, rhs, parity, gs, tol, compatibility_tol).solution


@dataclass(frozen=True)
class ProfileSet:
    gs: GroundState
    s1: SpectralField
    g1: SpectralField
    g2: SpectralField
    s2: SpectralField
    s3: SpectralField
    rho: SpectralField
    varrho_b: SpectralField
    varrho_v: SpectralField
    solve_residuals: Dict[str, float] = field(default_factory=dict)
    compatibility_defects: Dict[str, float] = field(default_factory=dict)
    parities: Dict[str, Parity] = field(default_factory=lambda: dict(PARITY_TABLE))

    @property
    def grid(self):
        return self.gs.grid

    @property
    def q(self) -> SpectralField:
        return self.gs.q

    @property
    def e1(self) -> float:
        """<S1, Lambda Q>."""
        return real_inner(self.s1, scaling_operator(self.gs.q))

    @property
    def p1(self) -> float:
        """2 <L- G1, G1>."""
        return 2.0 * real_inner(apply_L('-', self.g1, self.gs), self.g1)

    def fields(self) -> Dict[str, SpectralField]:
        return {name: getattr(self, name) for name in PROFILE_NAMES}


def build_profile_chain(gs: GroundState, tol: float = 1e-10,
                        compatibility_tol: float = 1e-5) -> ProfileSet:
    q = gs.q
    q_values = gs.values
    lambda_q = scaling_operator(q)
    dq = derivative(q)
    residuals: Dict[str, float] = {}
    defects: Dict[str, float] = {}

    def solve(name: str, sign: Sign, rhs: SpectralField) -> SpectralField:
        result = solve_constrained_detailed(sign, rhs, PARITY_TABLE[name], gs, tol, compatibility_tol)
        residuals[name] = result.residual
        defects[name] = result.compatibility_defect
        logger.info(f'Profile {name}: L{sign} solve in {result.iterations} iterations, '
                    f'residual {result.residual:.2e}, kernel overlap {result.compatibility_defect:.1e}')
        return result.solution

    s1 = solve('s1', '-', lambda_q)
    g1 = solve('g1', '-', -dq)
    g2 = solve('g2', '+', g1 - scaling_operator(g1) + derivative(s1) + 2.0 * s1 * g1 * q_values)
    s2 = solve('s2', '+', 0.5 * s1 - scaling_operator(s1) + s1 * s1 * q_values)
    s3 = solve('s3', '-', -s2 + scaling_operator(s2) + 2.0 * s1 * s2 * q_values + s1 * s1 * s1)
    rho = solve('rho', '+', s1)
    varrho_b = solve('varrho_b', '-', varrho_rhs(s1, s2, g1, g2, rho, q_values, 1.0, 0.0))
    varrho_v = solve('varrho_v', '-', varrho_rhs(s1, s2, g1, g2, rho, q_values, 0.0, 1.0))

    profiles = ProfileSet(gs=gs, s1=s1, g1=g1, g2=g2, s2=s2, s3=s3, rho=rho,
                          varrho_b=varrho_b, varrho_v=varrho_v,
                          solve_residuals=residuals, compatibility_defects=defects)
    logger.info(f'Profile chain built: e1={profiles.e1:.6f}, p1={profiles.p1:.6f}')
    return profiles


def varrho_rhs(s1, s2, g1, g2, rho, q_values, b: float, v: float) -> SpectralField:
    """2b S1 rho Q + b Lambda rho - 2b S2 + 2v G1 rho Q + v rho' + v G2."""
    return (b * (2.0 * s1 * rho * q_values + scaling_operator(rho) - 2.0 * s2)
            + v * (2.0 * g1 * rho * q_values + derivative(rho) + g2))


def check_smallness(b: float, v: float) -> None:
    if abs(b) > SMALLNESS_CEILING or abs(v) > SMALLNESS_CEILING:
        raise ParameterError(f'(b, v) = ({b}, {v}) exceeds the smallness ceiling {SMALLNESS_CEILING}')


def solve_varrho(gs: GroundState, profiles: ProfileSet, b: float, v: float) -> SpectralField:
    """varrho for (b, v), assembled from the two precomputed linear solves."""
    check_smallness(b, v)
    return b * profiles.varrho_b + v * profiles.varrho_v


def varrho_residual(gs: GroundState, profiles: ProfileSet, b: float, v: float) -> float:
    p = profiles
    rhs = varrho_rhs(p.s1, p.s2, p.g1, p.g2, p.rho, gs.values, b, v)
    return l2_norm(apply_L('-', solve_varrho(gs, profiles, b, v), gs) - rhs)


def kernel_identity_residuals(profiles: ProfileSet) -> Dict[str, float]:
    """Relative residuals of the generalized-kernel identities of L+ and L-."""
    gs = profiles.gs
    q = gs.q
    dq = derivative(q)
    lambda_q = scaling_operator(q)

    def rel(f: SpectralField, scale: SpectralField) -> float:
        return l2_norm(f) / l2_norm(scale)

    return {
        'L+ dQ = 0': rel(apply_L('+', dq, gs), dq),
        'L+ LambdaQ = -Q': rel(apply_L('+', lambda_q, gs) + q, q),
        'L+ rho = S1': rel(apply_L('+', profiles.rho, gs) - profiles.s1, profiles.s1),
        'L- Q = 0': rel(apply_L('-', q, gs), q),
        'L- G1 = -dQ': rel(apply_L('-', profiles.g1, gs) + dq, dq),
        'L- S1 = LambdaQ': rel(apply_L('-', profiles.s1, gs) - lambda_q, lambda_q),
        '|S1|^2 + 2<Q,S2> = 0': abs(l2_norm(profiles.s1) ** 2 + 2 * real_inner(q, profiles.s2))
        / l2_norm(profiles.s1) ** 2,
    }


def parity_defects(profiles: ProfileSet) -> Dict[str, float]:
    grid = profiles.grid
    return {name: _parity_defect(f.values.real, grid, PARITY_TABLE[name])
            for name, f in profiles.fields().items()}


def scal(f: SpectralField, gs: GroundState, profiles: ProfileSet) -> float:
    """Sum of the six squared projections of (Re f, Im f) on the modulation directions."""
    f1 = SpectralField(f.grid, f.values.real)
    f2 = SpectralField(f.grid, f.values.imag)
    q = gs.q
    return (real_inner(f1, q) ** 2 + real_inner(f1, profiles.g1) ** 2
            + real_inner(f1, profiles.s1) ** 2 + real_inner(f2, derivative(q)) ** 2
            + real_inner(f2, scaling_operator(q)) ** 2 + real_inner(f2, profiles.rho) ** 2)


def _mode_basis(grid, n_probe: int) -> np.ndarray:
    """L2-orthonormal real Fourier modes with |m| <= n_probe // 2, as columns."""
    if n_probe < 4:
        raise ParameterError('n_probe must be at least 4')
    modes = min(n_probe // 2, grid.n_points // 2 - 1)
    x = grid.nodes
    k = 2.0 * np.pi / grid.length
    columns = [np.ones_like(x)]
    for m in range(1, modes + 1):
        columns.append(np.cos(m * k * x))
        columns.append(np.sin(m * k * x))
    basis = np.stack(columns, axis=1)
    return basis / np.sqrt(grid.spacing * np.sum(basis ** 2, axis=0))


def _apply_columns(grid, symbol: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.fft.ifft(symbol[:, None] * np.fft.fft(basis, axis=0), axis=0).real


def _constrained_minimum(quadratic: np.ndarray, norm: np.ndarray,
                         constraints: Optional[np.ndarray]) -> float:
    quadratic = 0.5 * (quadratic + quadratic.T)
    norm = 0.5 * (norm + norm.T)
    if constraints is not None:
        z = scipy.linalg.null_space(constraints.T)
        quadratic = z.T @ quadratic @ z
        norm = z.T @ norm @ z
    try:
        values = scipy.linalg.eigh(quadratic, norm, eigvals_only=True, subset_by_index=[0, 0])
    except scipy.linalg.LinAlgError as exc:
        raise ConvergenceError(f'generalized eigensolve failed: {exc}') from exc
    return float(values[0])


def _coercivity(gs: GroundState, profiles: ProfileSet, n_probe: int, weight: Optional[np.ndarray],
                project: bool) -> float:
    grid = gs.grid
    h = grid.spacing
    basis = _mode_basis(grid, n_probe)
    half = _apply_columns(grid, np.sqrt(grid.abs_wavenumbers), basis)
    w = np.ones(grid.n_points) if weight is None else weight
    norm = h * (basis.T @ (w[:, None] * basis) + half.T @ (w[:, None] * half))
    q2 = gs.values ** 2

    results = []
    real_dirs = [gs.q, profiles.g1, profiles.s1]
    imag_dirs = [derivative(gs.q), scaling_operator(gs.q), profiles.rho]
    for c, directions in ((3.0, real_dirs), (1.0, imag_dirs)):
        quadratic = norm - h * basis.T @ ((c * q2)[:, None] * basis)
        constraints = None
        if project:
            constraints = h * basis.T @ np.stack([d.values.real for d in directions], axis=1)
        results.append(_constrained_minimum(quadratic, norm, constraints))
    return min(results)


def coercivity_rayleigh(gs: GroundState, profiles: ProfileSet, n_probe: int = 200,
                        project: bool = True) -> float:
    """Minimum of (<L+ f1, f1> + <L- f2, f2>) / ||f||_{H^1/2}^2 over band-limited modes."""
    value = _coercivity(gs, profiles, n_probe, None, project)
    logger.info(f'Coercivity minimum over {n_probe} modes (projected={project}): {value:.6f}')
    return value


def localization_weight(x: np.ndarray, A: float, a: float) -> np.ndarray:
    """phi_A(x) = phi(x/A), phi = 1 on |x| <= 1 and |x|^(-a) on |x| >= 2."""
    bridge = BPoly.from_derivatives(
        [1.0, 2.0],
        [[1.0, 0.0, 0.0], [2.0 ** -a, -a * 2.0 ** (-a - 1), a * (a + 1) * 2.0 ** (-a - 2)]],
    )
    y = np.abs(np.asarray(x, dtype=float)) / A
    out = np.ones_like(y)
    middle = (y > 1) & (y < 2)
    out[middle] = bridge(y[middle])
    outer = y >= 2
    out[outer] = y[outer] ** -a
    return out


def localized_coercivity_check(gs: GroundState, profiles: ProfileSet, A: float, a: float = 0.5,
                               n_probe: int = 200) -> float:
    if not 0 < a < 1:
        raise ParameterError(f'a must lie in (0, 1), got {a}')
    if A <= 0:
        raise ParameterError(f'A must be positive, got {A}')
    if A < 10:
        logger.warning(f'A={A} is below the range where localized coercivity is expected')
    weight = localization_weight(gs.grid.nodes, A, a)
    value = _coercivity(gs, profiles, n_probe, weight, True)
    logger.info(f'Localized coercivity A={A}, a={a}: {value:.6f}')
    return value
