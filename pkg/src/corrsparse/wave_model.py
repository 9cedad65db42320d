"""Forward model: a passive linear array listening to point sources on a grid.

Receivers sit on the line z = 0. The unknown sources live on a rectangular
grid of candidate locations centered at standoff range L. Propagation uses
the free-space Green's function exp(i*w*|x-y|/c) / (4*pi*|x-y|) evaluated on
2D coordinates (cross-range x, range z). Multi-frequency recordings are
stacked frequency-major into a single data vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .util import as_generator

DEFAULT_WAVE_SPEED = 2.9979e8  # m/s


@dataclass
class ArrayGeometry:
    """Uniform linear receiver array on z = 0, centered at the origin."""

    aperture: float       # physical array length [m]
    receiver_count: int   # number of receivers

    def __post_init__(self):
        if self.receiver_count < 2:
            raise DomainError("need at least two receivers")
        if self.aperture <= 0:
            raise DomainError("aperture must be positive")

    @property
    def positions(self) -> np.ndarray:
        """Receiver coordinates, shape (n_receivers, 2)."""
        n = self.receiver_count
        x = -self.aperture / 2 + np.arange(n) * self.aperture / (n - 1)
        return np.stack([x, np.zeros(n)], axis=1)


@dataclass
class FrequencyGrid:
    """Equally spaced recording frequencies over a band around a center."""

    center: float                          # center frequency [Hz]
    bandwidth: float                       # total band [Hz]
    count: int                             # number of frequencies
    wave_speed: float = DEFAULT_WAVE_SPEED

    def __post_init__(self):
        if self.count < 1:
            raise DomainError("need at least one frequency")
        if self.count == 1 and self.bandwidth != 0:
            raise DomainError("a single frequency requires zero bandwidth")
        if self.bandwidth < 0:
            raise DomainError("bandwidth must be nonnegative")
        if self.center - self.bandwidth / 2 <= 0:
            raise DomainError("band must stay at positive frequencies")
        if self.wave_speed <= 0:
            raise DomainError("wave speed must be positive")

    @property
    def frequencies(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.center])
        return np.linspace(
            self.center - self.bandwidth / 2,
            self.center + self.bandwidth / 2,
            self.count,
        )

    @property
    def angular_frequencies(self) -> np.ndarray:
        return 2 * np.pi * self.frequencies

    @property
    def center_wavelength(self) -> float:
        return self.wave_speed / self.center


@dataclass
class ImagingGrid:
    """Rectangular grid of candidate source locations.

    Pixels are ordered cross-range fastest: pixel k sits at
    (i_range, i_cross) = divmod(k, n_cross).
    """

    n_cross: int
    n_range: int
    pitch_cross: float     # pixel spacing across the array axis [m]
    pitch_range: float     # pixel spacing along range [m]
    center_range: float    # standoff L of the window center [m]

    def __post_init__(self):
        if self.n_cross < 1 or self.n_range < 1:
            raise DomainError("grid needs at least one pixel per axis")
        if self.pitch_cross <= 0 or self.pitch_range <= 0:
            raise DomainError("pixel pitches must be positive")
        if self.center_range <= 0:
            raise DomainError("window center must sit at positive range")

    @property
    def size(self) -> int:
        return self.n_cross * self.n_range

    @property
    def points(self) -> np.ndarray:
        """Pixel coordinates, shape (size, 2)."""
        x = (np.arange(self.n_cross) - (self.n_cross - 1) / 2) * self.pitch_cross
        z = self.center_range + (
            np.arange(self.n_range) - (self.n_range - 1) / 2
        ) * self.pitch_range
        xx, zz = np.meshgrid(x, z)       # (n_range, n_cross)
        return np.stack([xx.ravel(), zz.ravel()], axis=1)

    def as_image(self, values: np.ndarray) -> np.ndarray:
        """Reshape a length-size pixel vector to (n_range, n_cross)."""
        values = np.asarray(values)
        if values.shape != (self.size,):
            raise DomainError(f"expected {self.size} pixel values")
        return values.reshape(self.n_range, self.n_cross)


def green(x, y, omega: float, wave_speed: float = DEFAULT_WAVE_SPEED) -> np.ndarray:
    """Free-space Green's function between points x and y at angular frequency omega.

    Parameters
    ----------
    x, y : array_like
        Coordinates with trailing dimension 2. Leading dimensions broadcast.
    omega : float
        Angular frequency [rad/s].
    wave_speed : float
        Propagation speed [m/s].

    Returns
    -------
    ndarray
        exp(i*omega*|x-y|/c) / (4*pi*|x-y|) with the broadcast shape.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = np.linalg.norm(x - y, axis=-1)
    if np.any(dist == 0):
        raise DomainError("coincident points have no propagation distance")
    return np.exp(1j * omega * dist / wave_speed) / (4 * np.pi * dist)


@dataclass
class MeasurementMatrix:
    """Normalized multi-frequency sensing matrix for the imaging grid.

    Row r = l * n_receivers + q holds receiver q at frequency l. Column k is
    the stacked Green's vector of pixel k divided by its norm, so every
    column has unit length. `scales` holds the norms that were divided out.
    """

    data: np.ndarray                 # (n_linear, size) complex, unit columns
    scales: np.ndarray               # (size,) positive column norms
    geometry: ArrayGeometry
    spectrum: FrequencyGrid
    grid: ImagingGrid

    @property
    def n_linear(self) -> int:
        return self.data.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.data.shape[1]


def _stacked_green_columns(
    geometry: ArrayGeometry, spectrum: FrequencyGrid, points: np.ndarray
) -> np.ndarray:
    """Raw stacked Green's vectors for the given points, shape (N, len(points))."""
    recv = geometry.positions                               # (n_recv, 2)
    dist = np.linalg.norm(recv[:, None, :] - points[None, :, :], axis=2)
    blocks = [
        np.exp(1j * w * dist / spectrum.wave_speed) / (4 * np.pi * dist)
        for w in spectrum.angular_frequencies
    ]
    return np.vstack(blocks)


def build_measurement_matrix(
    geometry: ArrayGeometry, spectrum: FrequencyGrid, grid: ImagingGrid
) -> MeasurementMatrix:
    """Assemble the unit-column sensing matrix for a grid of candidate pixels."""
    raw = _stacked_green_columns(geometry, spectrum, grid.points)
    scales = np.linalg.norm(raw, axis=0)
    if np.any(scales == 0):
        raise DomainError("degenerate pixel with zero response")
    return MeasurementMatrix(
        data=raw / scales,
        scales=scales,
        geometry=geometry,
        spectrum=spectrum,
        grid=grid,
    )


@dataclass
class SourceConfiguration:
    """Point sources placed on grid pixels.

    Duplicate pixel indices are allowed; their amplitudes accumulate.
    """

    indices: np.ndarray       # (m,) pixel indices
    amplitudes: np.ndarray    # (m,) complex amplitudes

    def __post_init__(self):
        self.indices = np.atleast_1d(np.asarray(self.indices, dtype=int))
        self.amplitudes = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        if self.indices.size == 0:
            raise DomainError("need at least one source")
        if self.indices.shape != self.amplitudes.shape:
            raise DomainError("indices and amplitudes must match in length")
        if np.any(self.indices < 0):
            raise DomainError("negative pixel index")

    @classmethod
    def random(cls, n_pixels: int, count: int, seed) -> "SourceConfiguration":
        """Distinct uniform pixel draws with unit-magnitude random-phase amplitudes."""
        if not 1 <= count <= n_pixels:
            raise DomainError("source count must lie in [1, n_pixels]")
        rng = as_generator(seed)
        idx = rng.choice(n_pixels, size=count, replace=False)
        amps = np.exp(2j * np.pi * rng.random(count))
        return cls(indices=idx, amplitudes=amps)

    def equalized(self, column_norms: np.ndarray) -> "SourceConfiguration":
        """Divide each amplitude by the norm of its sensing column.

        Equalized sources all carry the same weight in the recorded data,
        so success statistics measure support geometry rather than the
        dynamic range between near and far pixels.
        """
        return SourceConfiguration(
            indices=self.indices,
            amplitudes=self.amplitudes / column_norms[self.indices],
        )

    def density(self, n_pixels: int) -> np.ndarray:
        """Amplitude vector on the full grid, shape (n_pixels,)."""
        if np.any(self.indices >= n_pixels):
            raise DomainError("pixel index outside the grid")
        rho = np.zeros(n_pixels, dtype=complex)
        np.add.at(rho, self.indices, self.amplitudes)
        return rho


@dataclass
class LinearData:
    """Stacked multi-frequency array recording and the densities behind it."""

    b: np.ndarray            # (n_linear,) recorded data
    rho: np.ndarray          # (size,) density in normalized-column units
    rho_tilde: np.ndarray    # (size,) physical amplitude density

    @property
    def chi(self) -> np.ndarray:
        """Diagonal of the lifted unknown, |rho_k|^2."""
        return np.abs(self.rho) ** 2


def synthesize_data(
    matrix: MeasurementMatrix, sources: SourceConfiguration
) -> LinearData:
    """Simulate the noise-free array recording for the given sources.

    The data vector is synthesized directly from Green's vectors at the
    occupied pixels and cross-checked against the normalized matrix acting on
    the rescaled density.
    """
    rho_tilde = sources.density(matrix.n_pixels)
    occupied = np.flatnonzero(rho_tilde)
    if occupied.size:
        cols = _stacked_green_columns(
            matrix.geometry, matrix.spectrum, matrix.grid.points[occupied]
        )
        b = cols @ rho_tilde[occupied]
    else:
        b = np.zeros(matrix.n_linear, dtype=complex)

    rho = matrix.scales * rho_tilde
    mismatch = np.linalg.norm(matrix.data @ rho - b)
    if mismatch > 1e-10 * max(np.linalg.norm(b), 1.0):
        raise RuntimeError(
            f"forward model inconsistency: |A rho - b| = {mismatch:.3e}"
        )
    return LinearData(b=b, rho=rho, rho_tilde=rho_tilde)


def add_noise(b: np.ndarray, snr_db: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Add complex white Gaussian noise at an exact signal-to-noise ratio.

    Returns
    -------
    (noisy, noise)
        noisy = b + noise with 20*log10(|b| / |noise|) equal to snr_db.
    """
    b = np.asarray(b, dtype=complex)
    signal_norm = np.linalg.norm(b)
    if signal_norm == 0:
        raise DomainError("cannot set a noise level relative to zero data")
    rng = as_generator(seed)
    draw = rng.standard_normal(b.shape) + 1j * rng.standard_normal(b.shape)
    noise = draw * (signal_norm * 10 ** (-snr_db / 20) / np.linalg.norm(draw))
    return b + noise, noise
