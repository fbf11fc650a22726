import os
import unittest

import numpy as np

from fracns.modules.energy import EnergyContext
from fracns.modules.model import Nonlinearity, PotentialSpec
from fracns.modules.optimizer import SolverOptions
from fracns.modules.spectral import Field, Grid

SLOW = os.environ.get("FRACNS_SLOW_TESTS") == "1"
slow = unittest.skipUnless(SLOW, "set FRACNS_SLOW_TESTS=1 for acceptance-scale runs")

S = 0.5
Q = 2.5
ETA = -1.0
MU = 1.0


def pure_power(c: float = 1.0) -> Nonlinearity:
    return Nonlinearity.pure_power(Q, c)


def autonomous(box_length: float = 128, points: int = 256, c: float = 1.0):
    grid = Grid.uniform(1, box_length, points)
    return EnergyContext.autonomous(grid, S, pure_power(c), ETA, MU)


def contained() -> EnergyContext:
    """A box wide enough that the algebraic tails leave under 1e-8 of the mass."""
    return autonomous(box_length=8192, points=16384)


def two_bump_spec(centers=((0.0,), (8.0,)), **kwargs) -> PotentialSpec:
    return PotentialSpec(centers=centers, **kwargs)


def options(**changes) -> SolverOptions:
    return SolverOptions(max_iters=5000, grad_tol=1e-8).replace(**changes)


def gaussian(grid: Grid, width: float = 2.0, center=0.0) -> Field:
    center = np.broadcast_to(center, (grid.dim,))
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coordinates, center))
    return Field(grid, np.exp(-r2 / (2 * width**2)))


def smooth_random(grid: Grid, rng: np.random.Generator, modes: int = 6) -> Field:
    """Random real field with only the lowest few Fourier modes per axis."""
    coeffs = np.zeros(grid.shape, dtype=complex)
    index = tuple(slice(0, modes) for _ in range(grid.dim))
    block = coeffs[index].shape
    coeffs[index] = rng.normal(size=block) + 1j * rng.normal(size=block)
    values = np.fft.ifftn(coeffs).real
    return Field(grid, values / np.max(np.abs(values)))
