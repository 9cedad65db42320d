"""Coherence numbers, support scoring, and a tail-bound check for quadratic chaos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import ReducedOperator
from .errors import DomainError
from .util import seeded_rng
from .wave_model import MeasurementMatrix


@dataclass
class CoherenceReport:
    """Column coherence of the sensing matrix and its reduced quadratic form.

    `m_linear` is the sparsity supported by the reduced row count under
    square-root scaling, sqrt(rows) / (2 sqrt(log rows)). `m_quadratic` is
    the quadratic-regime scale n_linear / sqrt(log n_linear), quoted up to
    its constant. `mcond_limit` is the largest sparsity M that keeps
    mu_reduced below 1 / (3 M).
    """

    mu: float
    delta: float                         # sqrt(n_linear) * mu
    n_linear: int
    n_pixels: int
    single_column: bool
    mu_reduced: float | None = None
    n_rows: int | None = None
    mcond_limit: float | None = None
    m_linear: float | None = None
    m_quadratic: float | None = None


def _max_offdiagonal_coherence(columns_of, n_cols: int, block: int) -> float:
    """Largest |<c_i, c_j>| over i != j for unit columns, in block tiles."""
    worst = 0.0
    edges = list(range(0, n_cols, block))
    for lo in edges:
        hi = min(lo + block, n_cols)
        left = columns_of(lo, hi)
        for lo2 in edges:
            if lo2 < lo:
                continue                       # gram is Hermitian
            hi2 = min(lo2 + block, n_cols)
            right = left if lo2 == lo else columns_of(lo2, hi2)
            tile = np.abs(left.conj().T @ right)
            if lo2 == lo:
                np.fill_diagonal(tile, 0.0)
            if tile.size:
                worst = max(worst, float(tile.max()))
    return worst


def coherence_report(
    a_matrix: MeasurementMatrix | np.ndarray,
    reduced: ReducedOperator | np.ndarray | None = None,
    block: int = 256,
) -> CoherenceReport:
    """Measure worst-case column correlations of A and optionally of T.

    With full-row sampling and no renormalization the reduced coherence is
    exactly mu^2, a useful cross-check; under subsampling it is measured
    directly from the (unit-normalized) operator columns.
    """
    a = a_matrix.data if isinstance(a_matrix, MeasurementMatrix) else np.asarray(a_matrix)
    n, k = a.shape
    single = k == 1
    mu = 0.0 if single else _max_offdiagonal_coherence(
        lambda lo, hi: a[:, lo:hi], k, block
    )
    report = CoherenceReport(
        mu=mu,
        delta=float(np.sqrt(n) * mu),
        n_linear=n,
        n_pixels=k,
        single_column=single,
        m_quadratic=float(n / np.sqrt(np.log(n))) if n >= 2 else None,
    )
    if reduced is None:
        return report

    if isinstance(reduced, np.ndarray):
        reduced = ReducedOperator.from_matrix(reduced)

    def unit_columns(lo, hi):
        cols = reduced.dense_columns(lo, hi)
        return cols / np.linalg.norm(cols, axis=0)

    mu_reduced = 0.0 if reduced.n_cols == 1 else _max_offdiagonal_coherence(
        unit_columns, reduced.n_cols, block
    )
    report.mu_reduced = mu_reduced
    report.n_rows = reduced.n_rows
    report.mcond_limit = float(1.0 / (3 * mu_reduced)) if mu_reduced > 0 else np.inf
    if reduced.n_rows >= 2:
        rows = reduced.n_rows
        report.m_linear = float(np.sqrt(rows) / (2 * np.sqrt(np.log(rows))))
    return report


@dataclass
class SupportMetrics:
    """How a recovered support compares against the truth."""

    recovered: np.ndarray
    expected: np.ndarray
    exact: bool
    false_positives: int
    false_negatives: int
    score: float                  # 1.0 on exact match, else 0.0
    gamma: float                  # min over true support of |chi| / peak |chi|


def support_metrics(
    chi: np.ndarray, chi_true: np.ndarray, threshold: float = 1e-3
) -> SupportMetrics:
    """Score a recovered diagonal against the ground truth.

    The recovered support collects entries whose magnitude exceeds
    `threshold` times the recovered peak; scaling of either vector is
    irrelevant.
    """
    chi = np.asarray(chi)
    chi_true = np.asarray(chi_true)
    if chi.shape != chi_true.shape:
        raise DomainError("recovered and true vectors differ in length")

    mags = np.abs(chi)
    peak = mags.max() if mags.size else 0.0
    recovered = np.flatnonzero(mags > threshold * peak) if peak > 0 else np.zeros(0, int)
    expected = np.flatnonzero(np.abs(chi_true) > 0)

    rec_set, exp_set = set(recovered.tolist()), set(expected.tolist())
    fps = len(rec_set - exp_set)
    fns = len(exp_set - rec_set)
    exact = fps == 0 and fns == 0

    true_mags = np.abs(chi_true)
    gamma = (
        float(true_mags[expected].min() / true_mags.max()) if expected.size else np.nan
    )
    return SupportMetrics(
        recovered=recovered,
        expected=expected,
        exact=exact,
        false_positives=fps,
        false_negatives=fns,
        score=1.0 if exact else 0.0,
        gamma=gamma,
    )


@dataclass
class TailCheckRow:
    variant: str
    t: float
    empirical: float
    bound: float
    stderr: float
    holds: bool


@dataclass
class TailCheckResult:
    rows: list[TailCheckRow]
    frobenius: float
    holds: bool


def hanson_wright_tail_check(
    size: int,
    samples: int,
    t_values: np.ndarray | None = None,
    seed: int = 0,
    variants: tuple[str, ...] = ("rademacher", "uniform_phase"),
) -> TailCheckResult:
    """Empirically test the quadratic-chaos tail bound on diagonal-free forms.

    Draws unit-modulus independent entries X_i, forms Xi = sum over i != j
    of X_i X_j M_ij for a random zero-diagonal Gaussian matrix M, and checks
    at each t that the empirical tail P(|Xi| > t) stays below
    2 exp(-t^2 / (32 |M|_F^2)) plus three binomial standard errors.

    At least 1e4 samples are required; fewer make the comparison meaningless.
    """
    if size < 2:
        raise DomainError("need at least two variables")
    if samples < 10_000:
        raise DomainError("need at least 1e4 samples for a stable tail estimate")
    for variant in variants:
        if variant not in ("rademacher", "uniform_phase"):
            raise DomainError(f"unknown variant {variant!r}")

    rng = seeded_rng(seed, 97)
    m_mat = rng.standard_normal((size, size))
    np.fill_diagonal(m_mat, 0.0)
    fro = float(np.linalg.norm(m_mat))
    if t_values is None:
        t_values = np.linspace(0.5, 8.0, 16) * fro
    t_values = np.asarray(t_values, dtype=float)

    rows: list[TailCheckRow] = []
    for variant in variants:
        draw_rng = seeded_rng(seed, 11 if variant == "rademacher" else 13)
        if variant == "rademacher":
            x = draw_rng.integers(0, 2, size=(samples, size)) * 2.0 - 1.0
        else:
            x = np.exp(2j * np.pi * draw_rng.random((samples, size)))
        xi = np.abs(np.sum((x @ m_mat) * x, axis=1))
        for t in t_values:
            empirical = float(np.mean(xi > t))
            bound = float(2.0 * np.exp(-(t**2) / (32.0 * fro**2)))
            stderr = float(np.sqrt(empirical * (1 - empirical) / samples))
            rows.append(
                TailCheckRow(
                    variant=variant,
                    t=float(t),
                    empirical=empirical,
                    bound=bound,
                    stderr=stderr,
                    holds=empirical <= bound + 3 * stderr,
                )
            )
    return TailCheckResult(rows=rows, frobenius=fro, holds=all(r.holds for r in rows))
