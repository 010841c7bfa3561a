"""Solved ground states and profile chains shared across test modules, built once per process."""
from functools import lru_cache

import numpy as np

from bubbles.ground_state import solve_ground_state
from bubbles.linearized import build_profile_chain
from bubbles.spectral import Grid1D

# Moderate torus: the kernel-compatibility defect stays below 1e-5 and solves take seconds.
N_POINTS = 2048
LENGTH = 200.0


@lru_cache(maxsize=None)
def grid(n_points=N_POINTS, length=LENGTH):
    return Grid1D(n_points, length)


@lru_cache(maxsize=None)
def ground_state(n_points=N_POINTS, length=LENGTH, power=3):
    return solve_ground_state(grid(n_points, length), power=power)


@lru_cache(maxsize=None)
def profile_chain(n_points=N_POINTS, length=LENGTH):
    return build_profile_chain(ground_state(n_points, length))


def gaussian(g, center=0.0, width=1.0, phase=0.0):
    return g.from_function(lambda x: np.exp(-((x - center) / width) ** 2) * np.exp(1j * phase * x))


def random_smooth_field(g, rng, bumps=4):
    x = g.nodes
    values = np.zeros(g.n_points, dtype=complex)
    for _ in range(bumps):
        amplitude = rng.normal() + 1j * rng.normal()
        center = rng.uniform(-0.1 * g.length, 0.1 * g.length)
        width = rng.uniform(1.0, 4.0)
        values += amplitude * np.exp(-((x - center) / width) ** 2)
    return g.field(values)
