"""Second stage: refit the lifted unknown on the recovered support.

Once the support is known, the full lifted model restricted to those m
pixels has only m^2 unknowns, so the sampled correlations determine all of
X = rho rho^H on the support by least squares, off-diagonal entries
included. The leading eigenpair of the Hermitian-symmetrized fit then
returns complex amplitudes up to one global phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .wave_model import MeasurementMatrix


@dataclass
class RestrictedLiftedSolution:
    """Least squares fit of the lifted unknown on a fixed support."""

    support: np.ndarray              # (m,) pixel indices, sorted order preserved
    x_hat: np.ndarray                # (m, m) Hermitian lifted estimate
    rho_hat: np.ndarray              # (m,) amplitudes from the leading eigenpair
    eigenvalues: np.ndarray          # (m,) eigenvalues of x_hat, ascending
    residual: float                  # LS residual of the raw fit
    residual_symmetrized: float      # residual after Hermitian symmetrization
    conjugate_inconsistency: float   # how far paired rows are from conjugates
    condition: float                 # condition number of the normal equations
    used_fallback: bool              # True when the fit fell back to lstsq


def solve_restricted(
    a_matrix: MeasurementMatrix | np.ndarray,
    data: np.ndarray,
    row_indices: np.ndarray,
    support: np.ndarray,
    cond_threshold: float = 1e8,
) -> RestrictedLiftedSolution:
    """Fit all lifted entries on `support` to the sampled correlations.

    Parameters
    ----------
    a_matrix : MeasurementMatrix or (N, K) ndarray
    data : (rows,) sampled correlation values
    row_indices : (rows,) flat indices into the column-major correlation matrix
    support : (m,) pixel indices to keep
    cond_threshold : float
        Normal equations are used while their condition number stays below
        this; beyond it the fit falls back to a least squares solve on the
        rectangular system and flags the result.
    """
    a = a_matrix.data if isinstance(a_matrix, MeasurementMatrix) else np.asarray(a_matrix)
    data = np.asarray(data, dtype=complex)
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise DomainError("cannot refit on an empty support")
    if np.unique(support).size != support.size:
        raise DomainError("support indices must be distinct")

    n = a.shape[0]
    row_indices = np.asarray(row_indices, dtype=np.intp)
    if data.shape != row_indices.shape:
        raise DomainError("data and row indices must align")
    i_idx = row_indices % n
    j_idx = row_indices // n

    m = support.size
    if row_indices.size < m * m:
        raise DomainError("not enough sampled rows to determine the lifted block")

    # Design matrix: column (q * m + p) multiplies X[p, q] and holds
    # A[i, support[p]] * conj(A[j, support[q]]) at sampled row (i, j).
    left = a[i_idx][:, support]                  # (rows, m) indexed by p
    right = a[j_idx][:, support].conj()          # (rows, m) indexed by q
    design = (right[:, :, None] * left[:, None, :]).reshape(row_indices.size, m * m)

    gram = design.conj().T @ design
    rhs = design.conj().T @ data
    condition = float(np.linalg.cond(gram))
    used_fallback = not np.isfinite(condition) or condition > cond_threshold
    if used_fallback:
        z_vec = np.linalg.lstsq(design, data, rcond=None)[0]
    else:
        z_vec = np.linalg.solve(gram, rhs)

    z = z_vec.reshape(m, m).T                    # Z[p, q]
    x_hat = (z + z.conj().T) / 2

    residual = float(np.linalg.norm(design @ z_vec - data))
    residual_sym = float(np.linalg.norm(design @ x_hat.T.ravel() - data))

    eigenvalues, vectors = np.linalg.eigh(x_hat)
    leading = float(eigenvalues[-1])
    rho_hat = np.sqrt(max(leading, 0.0)) * vectors[:, -1]
    reference = rho_hat[0]
    if np.abs(reference) > 0:
        rho_hat = rho_hat * (reference.conj() / np.abs(reference))

    return RestrictedLiftedSolution(
        support=support,
        x_hat=x_hat,
        rho_hat=rho_hat,
        eigenvalues=eigenvalues,
        residual=residual,
        residual_symmetrized=residual_sym,
        conjugate_inconsistency=_conjugate_inconsistency(data, i_idx, j_idx),
        condition=condition,
        used_fallback=used_fallback,
    )


def _conjugate_inconsistency(data, i_idx, j_idx) -> float:
    """Norm of d[(i, j)] - conj(d[(j, i)]) over sampled mirror pairs."""
    seen = {(int(i), int(j)): v for i, j, v in zip(i_idx, j_idx, data)}
    gaps = [
        v - seen[(j, i)].conjugate()
        for (i, j), v in seen.items()
        if i < j and (j, i) in seen
    ]
    diag = [v - v.conjugate() for (i, j), v in seen.items() if i == j]
    return float(np.linalg.norm(np.asarray(gaps + diag)))


@dataclass
class AngleErrorStats:
    """Entrywise phase agreement between two complex matrices."""

    rotation: float            # circular-mean global phase removed before aligning
    mean_abs_aligned: float
    max_abs_aligned: float
    mean_abs_raw: float
    max_abs_raw: float
    compared: int              # entries that carried a phase on both sides


def angle_error(
    x_hat: np.ndarray,
    x_true: np.ndarray,
    support: np.ndarray | None = None,
) -> AngleErrorStats:
    """Phase mismatch statistics, ignoring entries that are zero on either side.

    When x_true is larger than x_hat, `support` selects the compared block.
    Reports both the raw mismatch and the mismatch after removing the best
    single global rotation (the circular mean of the differences).
    """
    x_hat = np.asarray(x_hat, dtype=complex)
    x_true = np.asarray(x_true, dtype=complex)
    if x_true.shape != x_hat.shape:
        if support is None:
            raise DomainError("shapes differ and no support was given")
        support = np.asarray(support, dtype=int)
        x_true = x_true[np.ix_(support, support)]
    if x_true.shape != x_hat.shape:
        raise DomainError("restricted truth still does not match the estimate")

    mask = (x_hat != 0) & (x_true != 0)
    if not np.any(mask):
        return AngleErrorStats(0.0, 0.0, 0.0, 0.0, 0.0, 0)

    delta = np.angle(x_hat[mask]) - np.angle(x_true[mask])
    delta = np.angle(np.exp(1j * delta))
    rotation = float(np.angle(np.sum(np.exp(1j * delta))))
    aligned = np.angle(np.exp(1j * (delta - rotation)))
    return AngleErrorStats(
        rotation=rotation,
        mean_abs_aligned=float(np.mean(np.abs(aligned))),
        max_abs_aligned=float(np.max(np.abs(aligned))),
        mean_abs_raw=float(np.mean(np.abs(delta))),
        max_abs_raw=float(np.max(np.abs(delta))),
        compared=int(np.count_nonzero(mask)),
    )
