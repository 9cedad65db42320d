"""Brute-force reference implementations used by the test suite.

Everything here favors obviousness over speed and shares no code with the
operator or solver modules: Kronecker products are materialized with
np.kron, circulant matrices are built column by column with np.roll, the
weighted l1 problem goes through a generic convex programming backend, and
operator norms come from dense SVD. Sizes are capped so a mistake cannot
silently turn into an hour-long computation.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, InfeasibleSystemError

MAX_LINEAR = 8          # largest data dimension for dense Kronecker work
MAX_PIXELS = 10         # largest grid size for dense Kronecker work
MAX_L1_ROWS = 128
MAX_L1_COLUMNS = 512


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(matrix).reshape(-1, order="F")


def dense_kronecker(a_matrix: np.ndarray) -> np.ndarray:
    """Full lifted operator conj(A) (x) A, shape (N^2, K^2).

    Column (q * K + p) maps the lifted entry X[p, q]; row (j * N + i) holds
    the correlation entry B[i, j].
    """
    a_matrix = np.asarray(a_matrix)
    n, k = a_matrix.shape
    if n > MAX_LINEAR or k > MAX_PIXELS:
        raise DomainError(
            f"dense Kronecker capped at {MAX_LINEAR} x {MAX_PIXELS}, got {n} x {k}"
        )
    return np.kron(a_matrix.conj(), a_matrix)


def diagonal_column_indices(k: int) -> np.ndarray:
    """Columns of the dense Kronecker matrix that multiply X[k, k]."""
    return np.arange(k) * (k + 1)


def dense_circulant(generator: np.ndarray) -> np.ndarray:
    """Circulant matrix whose column q is the generator cyclically shifted by q."""
    generator = np.asarray(generator)
    n = generator.shape[0]
    return np.column_stack([np.roll(generator, q) for q in range(n)])


def dense_collector(generators: np.ndarray) -> np.ndarray:
    """Horizontal concatenation of one circulant block per generator row."""
    generators = np.atleast_2d(np.asarray(generators))
    return np.hstack([dense_circulant(row) for row in generators])


def dense_operator_norm(matrix: np.ndarray) -> float:
    """Largest singular value via dense SVD."""
    return float(np.linalg.svd(np.asarray(matrix), compute_uv=False)[0])


def dense_l1_solve(
    t_matrix: np.ndarray,
    c_matrix: np.ndarray | None,
    data: np.ndarray,
    tau: float,
    feasibility_tol: float = 1e-9,
) -> tuple[np.ndarray, np.ndarray]:
    """High-accuracy minimizer of tau*|x|_1 + |e|_1 subject to T x + C e = d.

    Parameters
    ----------
    t_matrix : (rows, k) complex
    c_matrix : (rows, cols) complex or None
        Pass None to solve without the auxiliary block.
    data : (rows,) complex
    tau : float
        Relative weight of the first block in the objective.

    Returns
    -------
    (x, e)
        The two solution blocks; e is empty when c_matrix is None.

    Raises
    ------
    InfeasibleSystemError
        If no point satisfies the equality constraint, reporting the least
        squares violation.
    """
    import cvxpy as cp

    t_matrix = np.asarray(t_matrix)
    data = np.asarray(data)
    rows, k = t_matrix.shape
    cols = 0 if c_matrix is None else np.asarray(c_matrix).shape[1]
    if rows > MAX_L1_ROWS or k + cols > MAX_L1_COLUMNS:
        raise DomainError(
            f"dense l1 oracle capped at {MAX_L1_ROWS} rows and "
            f"{MAX_L1_COLUMNS} columns, got {rows} x {k + cols}"
        )
    if tau <= 0:
        raise DomainError("tau must be positive")

    full = t_matrix if c_matrix is None else np.hstack([t_matrix, c_matrix])
    _, residual, *_ = np.linalg.lstsq(full, data, rcond=None)
    violation = (
        float(np.sqrt(residual[0]))
        if residual.size
        else float(np.linalg.norm(full @ np.linalg.pinv(full) @ data - data))
    )
    if violation > feasibility_tol * max(np.linalg.norm(data), 1.0):
        raise InfeasibleSystemError(violation)

    x = cp.Variable(k, complex=True)
    if c_matrix is None:
        constraint = [t_matrix @ x == data]
        objective = tau * cp.norm1(x)
        problem = cp.Problem(cp.Minimize(objective), constraint)
        _solve_to_high_accuracy(problem)
        return np.asarray(x.value), np.zeros(0, dtype=complex)

    e = cp.Variable(cols, complex=True)
    problem = cp.Problem(
        cp.Minimize(tau * cp.norm1(x) + cp.norm1(e)),
        [t_matrix @ x + np.asarray(c_matrix) @ e == data],
    )
    _solve_to_high_accuracy(problem)
    return np.asarray(x.value), np.asarray(e.value)


def _solve_to_high_accuracy(problem) -> None:
    import cvxpy as cp

    try:
        problem.solve(
            solver=cp.CLARABEL,
            tol_gap_abs=1e-12,
            tol_gap_rel=1e-12,
            tol_feas=1e-12,
            max_iter=200000,
        )
    except cp.error.SolverError:
        problem.solve(solver=cp.SCS, eps=1e-12, max_iters=200000)
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"reference l1 solve failed with status {problem.status}")
