"""Saddle-point iteration for sparse recovery with an absorbing dictionary.

Solves

    min_{chi, eta}  tau * lam * |chi|_1 + lam * |eta|_1
    subject to      T chi + C eta = d

through the multiplier iteration

    r     = d - T chi - C eta
    chi  <- shrink(chi + dt1 * T^H (z + r), tau * lam * dt1)
    eta  <- shrink(eta + dt1 * C^H (z + r), lam * dt1)
    z    <- z + dt2 * r

where shrink is the complex soft threshold. Convergence requires
dt1 < 2 / |[T C]|^2 and dt2 < lam / |T|; both norms are estimated with a
seeded power iteration, the circulant part exactly via its spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import IO

import numpy as np

from .correlation import CorrelationSystem, ReducedOperator
from .errors import CalibrationError, DivergenceError, DomainError
from .noise_collector import NoiseCollector
from .util import complex_gaussian, seeded_rng


@dataclass
class SolverConfig:
    """Knobs for the saddle-point solver. Defaults follow the working setup."""

    tau: float = 2.0                 # extra l1 weight on the image block
    lam: float = 1.0                 # overall multiplier scale
    dt1: float | None = None         # primal step; estimated when None
    dt2: float | None = None         # dual step; estimated when None
    step_safety: float = 0.9         # shrink factor for the estimated bounds
    max_iterations: int = 20000
    tol_rel: float = 1e-8            # relative stagnation tolerance
    stagnation_window: int = 50      # iterations that must agree before stopping
    support_threshold: float = 1e-3  # support cut relative to the peak magnitude
    power_iterations: int = 50
    power_tol: float = 1e-3
    power_seed: int = 0

    def __post_init__(self):
        if self.tau < 0 or self.lam <= 0:
            raise DomainError("tau must be nonnegative and lam positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be positive")
        if self.stagnation_window < 1:
            raise DomainError("stagnation_window must be positive")
        if not 0 < self.step_safety < 1:
            raise DomainError("step_safety must lie in (0, 1)")


@dataclass
class ConvergenceHistory:
    residual_norms: np.ndarray     # |r| at the start of each iteration
    iterate_changes: np.ndarray    # |chi_new - chi| per iteration


@dataclass
class RecoveryReport:
    """Everything the solver knows when it stops."""

    chi: np.ndarray                # recovered diagonal, operator column units
    chi_descaled: np.ndarray       # chi with column renormalization undone
    support: np.ndarray            # indices above the support threshold
    eta: np.ndarray                # absorbing-dictionary coefficients
    multiplier: np.ndarray         # final dual variable z
    iterations: int
    converged: bool
    residual_norm: float
    tau: float
    dt1: float
    dt2: float
    history: ConvergenceHistory


def soft_threshold(values: np.ndarray, amount: float) -> np.ndarray:
    """Complex soft threshold: shrink magnitudes by `amount`, keep phases."""
    if amount < 0:
        raise DomainError("threshold must be nonnegative")
    values = np.asarray(values)
    mags = np.abs(values)
    out = np.zeros_like(values)
    keep = mags > amount
    out[keep] = values[keep] * (1 - amount / mags[keep])
    return out


def _largest_gram_eigenvalue(apply_gram, dim, iterations, tol, rng) -> float:
    """Power iteration for the top eigenvalue of a PSD operator on C^dim."""
    v = complex_gaussian(rng, dim)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iterations):
        w = apply_gram(v)
        value = float(np.linalg.norm(w))
        if value == 0:
            return 0.0
        v = w / value
        if abs(value - estimate) <= tol * value:
            return value
        estimate = value
    return estimate


def estimate_step_sizes(
    operator: ReducedOperator,
    collector: NoiseCollector | None,
    config: SolverConfig | None = None,
) -> tuple[float, float]:
    """Safe (dt1, dt2) from power-iterated operator norms.

    The combined gram T T^H + C C^H is applied with the circulant part in
    closed form, so each power step costs two operator products plus two FFTs.
    """
    cfg = config or SolverConfig()

    def gram_full(v):
        w = operator.matvec(operator.adjoint(v))
        if collector is not None:
            w = w + collector.gram_matvec(v)
        return w

    def gram_t(v):
        return operator.matvec(operator.adjoint(v))

    rows = operator.n_rows
    full_sq = _largest_gram_eigenvalue(
        gram_full, rows, cfg.power_iterations, cfg.power_tol,
        seeded_rng(cfg.power_seed, 0),
    )
    t_sq = _largest_gram_eigenvalue(
        gram_t, rows, cfg.power_iterations, cfg.power_tol,
        seeded_rng(cfg.power_seed, 1),
    )
    if full_sq == 0 or t_sq == 0:
        raise DomainError("operator is numerically zero, no valid step size")
    dt1 = cfg.step_safety * 2.0 / full_sq
    dt2 = cfg.step_safety * cfg.lam / np.sqrt(t_sq)
    return float(dt1), float(dt2)


def gelma_solve(
    system: CorrelationSystem,
    collector: NoiseCollector | None,
    config: SolverConfig | None = None,
    history_out: IO[str] | None = None,
) -> RecoveryReport:
    """Run the multiplier iteration from a zero start until stagnation.

    Stops when, over a trailing window, every iterate change satisfies
    |chi_new - chi| <= tol_rel * max(1, |chi|) and the residual norm has
    moved by at most tol_rel * |d|. Raises DivergenceError if any iterate
    turns non-finite (for example with manually oversized steps).
    """
    cfg = config or SolverConfig()
    op = system.op
    d = np.asarray(system.data, dtype=complex)
    if d.shape != (op.n_rows,):
        raise DomainError("data length does not match the operator")
    if not np.all(np.isfinite(d.view(float))):
        raise DomainError("data contains non-finite values")
    if collector is not None and collector.n_rows != op.n_rows:
        raise DomainError("collector row count does not match the operator")

    if cfg.dt1 is None or cfg.dt2 is None:
        est1, est2 = estimate_step_sizes(op, collector, cfg)
        dt1 = cfg.dt1 if cfg.dt1 is not None else est1
        dt2 = cfg.dt2 if cfg.dt2 is not None else est2
    else:
        dt1, dt2 = cfg.dt1, cfg.dt2
    if dt1 <= 0 or dt2 <= 0:
        raise DomainError("step sizes must be positive")

    chi = np.zeros(op.n_cols, dtype=complex)
    eta = np.zeros(collector.n_cols, dtype=complex) if collector is not None else None
    z = np.zeros(op.n_rows, dtype=complex)

    d_norm = float(np.linalg.norm(d))
    window = cfg.stagnation_window
    shrink_chi = cfg.tau * cfg.lam * dt1
    shrink_eta = cfg.lam * dt1

    residual_norms: list[float] = []
    iterate_changes: list[float] = []
    chi_flags: list[bool] = []
    converged = False
    iterations = 0

    if history_out is not None:
        history_out.write("iteration,residual_norm,iterate_change,support_size\n")

    for k in range(cfg.max_iterations):
        r = d - op.matvec(chi)
        if eta is not None:
            r -= collector.matvec(eta)
        rn = float(np.linalg.norm(r))
        if not np.isfinite(rn):
            raise DivergenceError(k)

        u = z + r
        chi_new = soft_threshold(chi + dt1 * op.adjoint(u), shrink_chi)
        if eta is not None:
            eta = soft_threshold(eta + dt1 * collector.adjoint(u), shrink_eta)
        z = z + dt2 * r

        dchi = float(np.linalg.norm(chi_new - chi))
        if not np.isfinite(dchi):
            raise DivergenceError(k)
        chi = chi_new

        residual_norms.append(rn)
        iterate_changes.append(dchi)
        chi_flags.append(dchi <= cfg.tol_rel * max(1.0, float(np.linalg.norm(chi))))
        iterations = k + 1

        if history_out is not None:
            history_out.write(
                f"{k},{rn!r},{dchi!r},{int(np.count_nonzero(chi))}\n"
            )

        if k >= window:
            steady = all(chi_flags[k - window + 1 : k + 1])
            settled = abs(residual_norms[k] - residual_norms[k - window]) <= (
                cfg.tol_rel * max(d_norm, 1e-300)
            )
            if steady and settled:
                converged = True
                break

    final_r = d - op.matvec(chi)
    if eta is not None:
        final_r -= collector.matvec(eta)

    mags = np.abs(chi)
    peak = mags.max() if mags.size else 0.0
    support = (
        np.flatnonzero(mags > cfg.support_threshold * peak)
        if peak > 0
        else np.zeros(0, dtype=int)
    )

    return RecoveryReport(
        chi=chi,
        chi_descaled=chi / op.scales,
        support=support,
        eta=eta if eta is not None else np.zeros(0, dtype=complex),
        multiplier=z,
        iterations=iterations,
        converged=converged,
        residual_norm=float(np.linalg.norm(final_r)),
        tau=cfg.tau,
        dt1=float(dt1),
        dt2=float(dt2),
        history=ConvergenceHistory(
            residual_norms=np.asarray(residual_norms),
            iterate_changes=np.asarray(iterate_changes),
        ),
    )


def calibrate_tau(
    system: CorrelationSystem,
    collector: NoiseCollector | None,
    config: SolverConfig | None = None,
    trials: int = 5,
    seed: int = 0,
    grid: tuple[float, float, float] = (0.5, 8.0, 0.1),
) -> float:
    """Smallest grid weight that makes pure noise reconstruct to exactly zero.

    The system's data vector is ignored; each trial feeds the solver an
    independent unit-norm complex Gaussian vector in its place. Because any
    weight above a silencing one also silences (the zero solution stays
    optimal as the penalty grows), bisection over the grid is valid.

    Raises CalibrationError when even the top of the grid leaves a nonzero
    reconstruction.
    """
    if trials < 1:
        raise DomainError("need at least one calibration trial")
    lo_value, hi_value, step = grid
    if step <= 0 or hi_value < lo_value:
        raise DomainError("invalid calibration grid")
    taus = np.round(np.arange(lo_value, hi_value + step / 2, step), 10)

    cfg = config or SolverConfig()
    if cfg.dt1 is None or cfg.dt2 is None:
        est1, est2 = estimate_step_sizes(system.op, collector, cfg)
        cfg = replace(
            cfg,
            dt1=cfg.dt1 if cfg.dt1 is not None else est1,
            dt2=cfg.dt2 if cfg.dt2 is not None else est2,
        )

    draws = []
    for t in range(trials):
        rng = seeded_rng(seed, t)
        d = complex_gaussian(rng, system.n_rows)
        draws.append(d / np.linalg.norm(d))

    cache: dict[int, bool] = {}

    def silences(index: int) -> bool:
        if index not in cache:
            quiet = True
            for d in draws:
                probe = replace(system, data=d, chi_true=None)
                report = gelma_solve(probe, collector, replace(cfg, tau=float(taus[index])))
                if np.count_nonzero(report.chi):
                    quiet = False
                    break
            cache[index] = quiet
        return cache[index]

    last = len(taus) - 1
    if not silences(last):
        raise CalibrationError(
            f"pure noise still reconstructs at the grid top tau = {taus[last]}"
        )
    lo, hi = 0, last
    while lo < hi:
        mid = (lo + hi) // 2
        if silences(mid):
            hi = mid
        else:
            lo = mid + 1
    return float(taus[lo])
