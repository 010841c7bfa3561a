"""
Binary field snapshots.

Layout: 16-byte magic, then little-endian u32 n_points, f64 length, f64 t,
then n interleaved (re, im) f64 pairs.
"""
import json
import logging
import os
import struct
import tempfile
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .evolver import SimulationState
from .exceptions import CheckpointError, GridError
from .ground_state import GroundState
from .linearized import PROFILE_NAMES, ProfileSet
from .spectral import Grid1D, SpectralField

logger = logging.getLogger(__name__)

MAGIC = b'HWBUBBLE' + b'\x00' * 7 + b'\x01'
HEADER = struct.Struct('<Idd')
BODY_DTYPE = np.dtype('<c16')


def atomic_write(path, payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def encode_field(field: SpectralField, t: float) -> bytes:
    grid = field.grid
    header = HEADER.pack(grid.n_points, grid.length, float(t))
    return MAGIC + header + np.ascontiguousarray(field.values, dtype=BODY_DTYPE).tobytes()


def decode_field(payload: bytes, grid: Optional[Grid1D] = None, source: str = '<bytes>'
                 ) -> Tuple[SpectralField, float]:
    if len(payload) < len(MAGIC) + HEADER.size:
        raise CheckpointError(f'{source}: truncated header ({len(payload)} bytes)')
    if payload[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f'{source}: not a field checkpoint (bad magic)')
    n, length, t = HEADER.unpack_from(payload, len(MAGIC))
    body = payload[len(MAGIC) + HEADER.size:]
    expected = n * BODY_DTYPE.itemsize
    if len(body) != expected:
        raise CheckpointError(f'{source}: body holds {len(body)} bytes, expected {expected}')
    if grid is not None and (grid.n_points != n or grid.length != length):
        raise CheckpointError(f'{source}: stored grid (n={n}, L={length:g}) does not match '
                              f'target grid (n={grid.n_points}, L={grid.length:g})')
    try:
        stored_grid = grid or Grid1D(int(n), float(length))
    except GridError as exc:
        raise CheckpointError(f'{source}: invalid stored grid ({exc})')
    values = np.frombuffer(body, dtype=BODY_DTYPE).astype(np.complex128)
    return SpectralField(stored_grid, values), float(t)


def checkpoint_save(state: SimulationState, path) -> Path:
    path = atomic_write(path, encode_field(state.u, state.t))
    logger.info(f'Checkpoint saved: t={state.t:.6g} -> {path}')
    return path


def checkpoint_load(path, grid: Optional[Grid1D] = None) -> SimulationState:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f'checkpoint not found: {path}')
    u, t = decode_field(path.read_bytes(), grid, source=str(path))
    return SimulationState(t=t, u=u)


def save_ground_state(gs: GroundState, directory) -> Path:
    directory = Path(directory)
    path = atomic_write(directory / 'ground_state.hwb', encode_field(gs.q, 0.0))
    logger.info(f'Ground state saved to {path} (mass {gs.mass:.12g})')
    return path


def save_profiles(profiles: ProfileSet, directory) -> Path:
    """One file per profile plus profiles.json with residuals, parities and constants."""
    directory = Path(directory)
    fields = profiles.fields()
    for name in PROFILE_NAMES:
        atomic_write(directory / f'profile_{name}.hwb', encode_field(fields[name], 0.0))
    meta = {
        'n_points': profiles.grid.n_points,
        'length': profiles.grid.length,
        'ground_state_mass': profiles.gs.mass,
        'ground_state_residual': profiles.gs.residual_l2,
        'e1': profiles.e1,
        'p1': profiles.p1,
        'solve_residuals': dict(profiles.solve_residuals),
        'compatibility_defects': dict(profiles.compatibility_defects),
        'parities': dict(profiles.parities),
    }
    path = atomic_write(directory / 'profiles.json', (json.dumps(meta, indent=2, sort_keys=True) + '\n').encode())
    logger.info(f'Saved {len(PROFILE_NAMES)} profiles to {directory}')
    return path


def load_profile_field(directory, name: str, grid: Optional[Grid1D] = None) -> SpectralField:
    if name not in PROFILE_NAMES:
        raise CheckpointError(f'unknown profile {name!r}')
    return checkpoint_load(Path(directory) / f'profile_{name}.hwb', grid).u
