"""Random circulant dictionary that soaks up what the reduced model misses.

The collector concatenates P circulant blocks, each generated by an
independent unit-norm complex Gaussian vector. Only the generators are
stored; products with the full matrix and its adjoint run through FFTs of
the generator spectra, so cost grows like P * n log n instead of n^2 * P.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import DomainError
from .util import as_generator, ceil_snapped, complex_gaussian


@dataclass
class NoiseCollector:
    """Concatenation of P circulant blocks on n rows.

    Column q of block p is generators[p] cyclically shifted by q, so the
    total column count is P * n. All columns have unit norm.
    """

    generators: np.ndarray                  # (P, n) unit-norm rows
    spectra: np.ndarray = field(repr=False, default=None)   # (P, n) FFT of generators

    def __post_init__(self):
        self.generators = np.atleast_2d(np.asarray(self.generators, dtype=complex))
        if self.spectra is None:
            self.spectra = sfft.fft(self.generators, axis=1)

    @property
    def n_rows(self) -> int:
        return self.generators.shape[1]

    @property
    def block_count(self) -> int:
        return self.generators.shape[0]

    @property
    def n_cols(self) -> int:
        return self.block_count * self.n_rows

    @property
    def power_spectrum(self) -> np.ndarray:
        """Eigenvalues of C C^H on the Fourier basis, shape (n,). Exact."""
        return np.sum(np.abs(self.spectra) ** 2, axis=0)

    def matvec(self, eta: np.ndarray) -> np.ndarray:
        """C eta for a flat coefficient vector of length P * n."""
        blocks = np.asarray(eta).reshape(self.block_count, self.n_rows)
        mixed = np.sum(self.spectra * sfft.fft(blocks, axis=1), axis=0)
        return sfft.ifft(mixed)

    def adjoint(self, z: np.ndarray) -> np.ndarray:
        """C^H z, flattened to length P * n."""
        spectrum = sfft.fft(np.asarray(z))
        out = sfft.ifft(self.spectra.conj() * spectrum[None, :], axis=1)
        return out.ravel()

    def gram_matvec(self, z: np.ndarray) -> np.ndarray:
        """C C^H z via the closed-form circulant spectrum."""
        return sfft.ifft(self.power_spectrum * sfft.fft(np.asarray(z)))

    def column(self, q: int) -> np.ndarray:
        """Materialize a single column without touching the FFT path."""
        if not 0 <= q < self.n_cols:
            raise DomainError("column index out of range")
        block, shift = divmod(q, self.n_rows)
        return np.roll(self.generators[block], shift)


def block_count_for(n_rows: int, beta: float) -> int:
    """Number of circulant blocks, ceil(n^(beta - 1)) with near-integer snapping."""
    if n_rows < 1:
        raise DomainError("collector needs at least one row")
    if beta < 1:
        raise DomainError("beta must be at least 1")
    return max(1, ceil_snapped(float(n_rows) ** (beta - 1)))


def build_collector(n_rows: int, beta: float, seed) -> NoiseCollector:
    """Draw ceil(n^(beta-1)) unit-norm complex Gaussian generators.

    The total column count P * n is then at least n^beta, the working size
    that makes the dictionary overwhelmingly likely to contain good sparse
    approximations of arbitrary residuals while staying incoherent with any
    fixed low-dimensional signal subspace.
    """
    p = block_count_for(n_rows, beta)
    rng = as_generator(seed)
    gens = complex_gaussian(rng, (p, n_rows))
    gens /= np.linalg.norm(gens, axis=1, keepdims=True)
    return NoiseCollector(generators=gens)
