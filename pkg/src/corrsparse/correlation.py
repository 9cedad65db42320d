"""Cross-correlated data and the reduced linear system on lifted diagonals.

The full correlation matrix B = b b^H is a linear image of the lifted
unknown X = rho rho^H. Keeping only the K columns of the lifted operator
that multiply diagonal entries X[k, k] and a random subset of correlation
rows gives the reduced system T chi ~ d; the discarded off-diagonal
contribution becomes a structured model error that the solver absorbs
elsewhere.

Row indices follow column-major vectorization: flat row s of the
correlation matrix holds B[i, j] with i = s % N and j = s // N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .util import as_generator
from .wave_model import MeasurementMatrix

DEFAULT_MEMORY_BUDGET = 200_000_000   # dense T allowed up to this many entries
_CHUNK_ENTRIES = 2_000_000            # workspace bound for matrix-free passes


def cross_correlate(b: np.ndarray) -> np.ndarray:
    """Full correlation matrix b b^H, shape (N, N)."""
    b = np.asarray(b, dtype=complex)
    if b.ndim != 1:
        raise DomainError("expected a one-dimensional data vector")
    return np.outer(b, b.conj())


def subsample_rows(n_linear: int, factor: int, seed) -> np.ndarray:
    """Draw factor * n_linear distinct correlation row indices, sorted.

    factor = n_linear selects every row of the correlation matrix.
    """
    if n_linear < 1:
        raise DomainError("n_linear must be positive")
    if not 1 <= factor <= n_linear:
        raise DomainError("factor must lie in [1, n_linear]")
    rng = as_generator(seed)
    picks = rng.choice(n_linear * n_linear, size=factor * n_linear, replace=False)
    return np.sort(picks)


class ReducedOperator:
    """The K diagonal columns of the lifted operator on sampled rows.

    Entry (s, k) equals A[i, k] * conj(A[j, k]) / scale_k for the sampled
    row s = j * N + i. The matrix is stored densely when it fits the memory
    budget and applied from the sensing matrix in row chunks otherwise; both
    paths produce identical results up to roundoff.
    """

    def __init__(
        self,
        a_matrix: np.ndarray | None,
        i_indices: np.ndarray | None,
        j_indices: np.ndarray | None,
        scales: np.ndarray,
        matrix: np.ndarray | None,
        raw_column_norms: np.ndarray,
    ):
        self._a = a_matrix
        self._i = i_indices
        self._j = j_indices
        self.scales = scales
        self.matrix = matrix
        self.raw_column_norms = raw_column_norms
        if matrix is not None:
            self.n_rows, self.n_cols = matrix.shape
        else:
            self.n_rows = len(i_indices)
            self.n_cols = a_matrix.shape[1]

    # -- construction -----------------------------------------------------

    @classmethod
    def from_rows(
        cls,
        a_matrix: np.ndarray,
        i_indices: np.ndarray,
        j_indices: np.ndarray,
        renormalize: bool = True,
        memory_budget: int = DEFAULT_MEMORY_BUDGET,
    ) -> "ReducedOperator":
        a_matrix = np.ascontiguousarray(a_matrix, dtype=complex)
        i_indices = np.asarray(i_indices, dtype=np.intp)
        j_indices = np.asarray(j_indices, dtype=np.intp)
        rows = i_indices.shape[0]
        k = a_matrix.shape[1]

        if rows * k <= memory_budget:
            matrix = np.empty((rows, k), dtype=complex)
            for lo, hi in _chunks(rows, k):
                matrix[lo:hi] = a_matrix[i_indices[lo:hi]] * a_matrix[j_indices[lo:hi]].conj()
            norms = np.linalg.norm(matrix, axis=0)
            if np.any(norms == 0):
                raise DomainError("reduced operator has an identically zero column")
            scales = norms if renormalize else np.ones(k)
            if renormalize:
                matrix /= norms
            return cls(a_matrix, i_indices, j_indices, scales, matrix, norms)

        power = np.zeros(k)
        for lo, hi in _chunks(rows, k):
            block = a_matrix[i_indices[lo:hi]] * a_matrix[j_indices[lo:hi]].conj()
            power += np.sum(np.abs(block) ** 2, axis=0)
        norms = np.sqrt(power)
        if np.any(norms == 0):
            raise DomainError("reduced operator has an identically zero column")
        scales = norms if renormalize else np.ones(k)
        return cls(a_matrix, i_indices, j_indices, scales, None, norms)

    @classmethod
    def from_matrix(
        cls, matrix: np.ndarray, renormalize: bool = False
    ) -> "ReducedOperator":
        """Wrap an explicit matrix (used for synthetic systems and tests)."""
        matrix = np.array(matrix, dtype=complex)
        norms = np.linalg.norm(matrix, axis=0)
        if np.any(norms == 0):
            raise DomainError("matrix has an identically zero column")
        scales = norms if renormalize else np.ones(matrix.shape[1])
        if renormalize:
            matrix = matrix / norms
        return cls(None, None, None, scales, matrix, norms)

    # -- application -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def is_dense(self) -> bool:
        return self.matrix is not None

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if self.matrix is not None:
            return self.matrix @ x
        scaled = x / self.scales
        out = np.empty(self.n_rows, dtype=complex)
        for lo, hi in _chunks(self.n_rows, self.n_cols):
            block = self._a[self._i[lo:hi]] * self._a[self._j[lo:hi]].conj()
            out[lo:hi] = block @ scaled
        return out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if self.matrix is not None:
            return (y.conj() @ self.matrix).conj()
        acc = np.zeros(self.n_cols, dtype=complex)
        for lo, hi in _chunks(self.n_rows, self.n_cols):
            block = self._a[self._i[lo:hi]] * self._a[self._j[lo:hi]].conj()
            acc += (y[lo:hi].conj() @ block).conj()
        return acc / self.scales

    def column(self, k: int) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix[:, k].copy()
        return (self._a[self._i, k] * self._a[self._j, k].conj()) / self.scales[k]

    def row(self, s: int) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix[s].copy()
        return (self._a[self._i[s]] * self._a[self._j[s]].conj()) / self.scales

    def dense_columns(self, start: int, stop: int) -> np.ndarray:
        """Materialize a contiguous column block, shape (n_rows, stop - start)."""
        if self.matrix is not None:
            return self.matrix[:, start:stop]
        block = self._a[self._i, start:stop] * self._a[self._j, start:stop].conj()
        return block / self.scales[start:stop]

    def dense(self, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
        if self.n_rows * self.n_cols > memory_budget:
            raise DomainError("dense materialization exceeds the memory budget")
        if self.matrix is not None:
            return self.matrix.copy()
        return self.dense_columns(0, self.n_cols).copy()


def _chunks(rows: int, cols: int):
    step = max(1, _CHUNK_ENTRIES // max(cols, 1))
    for lo in range(0, rows, step):
        yield lo, min(lo + step, rows)


@dataclass
class CorrelationSystem:
    """Reduced correlation data d together with the operator that models it."""

    data: np.ndarray                        # (n_rows,) sampled correlations
    op: ReducedOperator
    row_indices: np.ndarray | None = None   # flat indices into vec(B)
    i_indices: np.ndarray | None = None
    j_indices: np.ndarray | None = None
    n_linear: int | None = None             # N of the underlying recording
    renormalized: bool = False
    chi_true: np.ndarray | None = None      # ground-truth diagonal when known

    @property
    def n_rows(self) -> int:
        return self.op.n_rows

    @property
    def n_pixels(self) -> int:
        return self.op.n_cols

    @property
    def scales(self) -> np.ndarray:
        return self.op.scales


def build_reduced_system(
    matrix: MeasurementMatrix | np.ndarray,
    correlation: np.ndarray,
    row_indices: np.ndarray,
    renormalize: bool = True,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    chi_true: np.ndarray | None = None,
) -> CorrelationSystem:
    """Restrict the lifted system to sampled rows and diagonal columns.

    Parameters
    ----------
    matrix : MeasurementMatrix or (N, K) ndarray
        Unit-column sensing matrix.
    correlation : (N, N) ndarray
        Full correlation matrix of the recorded data.
    row_indices : sorted flat indices into vec(correlation)
    renormalize : bool
        Rescale the operator columns to unit norm (recommended whenever rows
        are subsampled); the applied scales are kept for undoing later.
    """
    a_matrix = matrix.data if isinstance(matrix, MeasurementMatrix) else np.asarray(matrix)
    correlation = np.asarray(correlation)
    n = a_matrix.shape[0]
    if correlation.shape != (n, n):
        raise DomainError("correlation shape does not match the sensing matrix")
    row_indices = np.asarray(row_indices, dtype=np.intp)
    if row_indices.size == 0:
        raise DomainError("need at least one sampled row")
    if np.any(row_indices < 0) or np.any(row_indices >= n * n):
        raise DomainError("row index outside the correlation matrix")

    i_idx = row_indices % n
    j_idx = row_indices // n
    d = correlation[i_idx, j_idx]
    op = ReducedOperator.from_rows(
        a_matrix, i_idx, j_idx, renormalize=renormalize, memory_budget=memory_budget
    )
    return CorrelationSystem(
        data=d,
        op=op,
        row_indices=row_indices,
        i_indices=i_idx,
        j_indices=j_idx,
        n_linear=n,
        renormalized=renormalize,
        chi_true=chi_true,
    )


@dataclass
class OffDiagonalResidual:
    """What remains of the data after removing the diagonal contribution."""

    vector: np.ndarray
    norm: float
    relative: float


def off_diagonal_residual(
    system: CorrelationSystem, chi: np.ndarray
) -> OffDiagonalResidual:
    """Residual e = d - T_raw chi for a physical diagonal vector chi.

    chi is in unscaled units; the stored column scales are reapplied so the
    result matches the unnormalized model regardless of renormalization.
    """
    chi = np.asarray(chi)
    if chi.shape != (system.n_pixels,):
        raise DomainError("chi length does not match the pixel grid")
    e = system.data - system.op.matvec(chi * system.scales)
    norm = float(np.linalg.norm(e))
    dnorm = float(np.linalg.norm(system.data))
    return OffDiagonalResidual(vector=e, norm=norm, relative=norm / max(dnorm, 1e-300))
