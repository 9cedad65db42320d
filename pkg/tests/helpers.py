"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from corrsparse.correlation import CorrelationSystem, ReducedOperator
from corrsparse.wave_model import (
    ArrayGeometry,
    FrequencyGrid,
    ImagingGrid,
    build_measurement_matrix,
)


def tiny_matrix(n_recv=3, n_freq=2, nx=4, nz=2):
    """Small sensing matrix, n_linear = n_recv * n_freq, pixels = nx * nz."""
    geometry = ArrayGeometry(aperture=0.5, receiver_count=n_recv)
    spectrum = FrequencyGrid(center=60e9, bandwidth=20e9, count=n_freq)
    grid = ImagingGrid(
        n_cross=nx,
        n_range=nz,
        pitch_cross=10e-3,
        pitch_range=30e-3,
        center_range=0.5,
    )
    return build_measurement_matrix(geometry, spectrum, grid)


def unit_columns(rng, rows, cols):
    """Random complex matrix with exactly unit-norm columns."""
    a = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    return a / np.linalg.norm(a, axis=0)


def orthonormal_columns(rng, rows, cols):
    a = rng.standard_normal((rows, rows)) + 1j * rng.standard_normal((rows, rows))
    q, _ = np.linalg.qr(a)
    return q[:, :cols]


def synthetic_system(t_matrix, data) -> CorrelationSystem:
    """Wrap an explicit matrix and data vector as a solvable system."""
    return CorrelationSystem(
        data=np.asarray(data, dtype=complex),
        op=ReducedOperator.from_matrix(t_matrix),
    )


SMALL_INI = """
[array]
receivers = 7
aperture = 0.4
standoff = 0.6

[frequency]
center = 60e9
bandwidth = 20e9
count = 7

[grid]
n_cross = 9
n_range = 9
pitch_cross = 10e-3
pitch_range = 30e-3

[sources]
count = 2

[sampling]
factor = 10
renormalize = yes

[solver]
tau = 2.0
max_iterations = 20000
tol_rel = 1e-7

[run]
seed = 3
snr_db = none
"""
