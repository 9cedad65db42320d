"""Experiment configurations and the orchestration behind the command line.

A single ExperimentConfig describes the geometry, sampling, collector,
solver, and experiment parameters. Every random ingredient draws from its
own stream keyed by (master seed, context, stream id), so results never
depend on scheduling order and any cell of a sweep can be reproduced alone.
"""

from __future__ import annotations

import configparser
import time
import types
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .correlation import (
    DEFAULT_MEMORY_BUDGET,
    CorrelationSystem,
    build_reduced_system,
    cross_correlate,
    subsample_rows,
)
from .diagnostics import SupportMetrics, support_metrics
from .errors import ConfigError, DomainError
from .gelma import RecoveryReport, SolverConfig, calibrate_tau, gelma_solve
from .noise_collector import NoiseCollector, build_collector
from .phase_recovery import (
    AngleErrorStats,
    RestrictedLiftedSolution,
    angle_error,
    solve_restricted,
)
from .util import seeded_rng
from .wave_model import (
    ArrayGeometry,
    FrequencyGrid,
    ImagingGrid,
    LinearData,
    MeasurementMatrix,
    SourceConfiguration,
    add_noise,
    build_measurement_matrix,
    synthesize_data,
)

# stream ids for seed derivation
STREAM_SOURCES = 1
STREAM_SAMPLING = 2
STREAM_COLLECTOR = 3
STREAM_NOISE = 4
SWEEP_DOMAIN = 8


@dataclass
class ArraySection:
    receivers: int = 11
    aperture: float = 0.5          # [m]
    standoff: float = 0.5          # [m] range to the window center


@dataclass
class FrequencySection:
    center: float = 60e9           # [Hz]
    bandwidth: float = 20e9        # [Hz]
    count: int = 11
    wave_speed: float = 2.9979e8   # [m/s]


@dataclass
class GridSection:
    n_cross: int = 21
    n_range: int = 21
    pitch_cross: float = 5e-3      # [m]
    pitch_range: float = 15e-3     # [m]


@dataclass
class SourcesSection:
    count: int = 5
    amplitudes: str = "unit"       # "unit" or "equalized" (column-norm weighted)


@dataclass
class SamplingSection:
    factor: int = 21               # rows = factor * n_linear
    renormalize: bool = True
    memory_budget: int = DEFAULT_MEMORY_BUDGET


@dataclass
class CollectorSection:
    beta: float = 1.5


@dataclass
class SolverSection:
    tau: float = 2.0
    lam: float = 1.0
    max_iterations: int = 20000
    tol_rel: float = 1e-8
    stagnation_window: int = 50
    support_threshold: float = 1e-3
    step_safety: float = 0.9
    power_iterations: int = 50
    power_tol: float = 1e-3

    def to_solver_config(self, **overrides) -> SolverConfig:
        kwargs = dict(
            tau=self.tau,
            lam=self.lam,
            max_iterations=self.max_iterations,
            tol_rel=self.tol_rel,
            stagnation_window=self.stagnation_window,
            support_threshold=self.support_threshold,
            step_safety=self.step_safety,
            power_iterations=self.power_iterations,
            power_tol=self.power_tol,
        )
        kwargs.update(overrides)
        return SolverConfig(**kwargs)


@dataclass
class RunSection:
    seed: int = 7
    snr_db: float | None = None    # blank means noise free
    output: str = "out"
    stage2: bool = True
    threads: int = 1


@dataclass
class SweepSection:
    """Grid of (source count, sampling factor) cells for the success sweep."""

    m_min: int = 1
    m_max: int = 24
    factor_min: int = 2
    factor_max: int = 21
    trials: int = 10
    max_iterations: int = 800
    tol_rel: float = 1e-5


@dataclass
class CalibrationSection:
    trials: int = 5
    grid_min: float = 0.5
    grid_max: float = 8.0
    grid_step: float = 0.1
    max_iterations: int = 6000
    tol_rel: float = 1e-7


@dataclass
class ExperimentConfig:
    array: ArraySection = field(default_factory=ArraySection)
    frequency: FrequencySection = field(default_factory=FrequencySection)
    grid: GridSection = field(default_factory=GridSection)
    sources: SourcesSection = field(default_factory=SourcesSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    collector: CollectorSection = field(default_factory=CollectorSection)
    solver: SolverSection = field(default_factory=SolverSection)
    run: RunSection = field(default_factory=RunSection)
    phase_diagram: SweepSection = field(default_factory=SweepSection)
    calibration: CalibrationSection = field(default_factory=CalibrationSection)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "array": "array",
    "frequency": "frequency",
    "grid": "grid",
    "sources": "sources",
    "sampling": "sampling",
    "collector": "collector",
    "solver": "solver",
    "run": "run",
    "phase_diagram": "phase_diagram",
    "calibration": "calibration",
}

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}
_NONE_WORDS = {"", "none", "null"}


def _coerce(raw: str, annotation, section: str, key: str):
    origin = typing.get_origin(annotation)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(annotation) if a is not type(None)]
        if raw.strip().lower() in _NONE_WORDS:
            return None
        annotation = args[0]
    try:
        if annotation is bool:
            word = raw.strip().lower()
            if word in _TRUE_WORDS:
                return True
            if word in _FALSE_WORDS:
                return False
            raise ValueError(raw)
        if annotation is int:
            return int(raw.strip())
        if annotation is float:
            return float(raw.strip())
        if annotation is str:
            return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc
    raise ConfigError(f"[{section}] {key}: unsupported option type {annotation}")


def config_from_ini(path) -> ExperimentConfig:
    """Parse an INI file, rejecting unknown sections and keys."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    loaded = parser.read(path)
    if not loaded:
        raise ConfigError(f"cannot read config file {path}")

    config = ExperimentConfig()
    for section_name in parser.sections():
        if section_name not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section_name}]")
        target = getattr(config, _SECTIONS[section_name])
        hints = typing.get_type_hints(type(target))
        known = {f.name for f in fields(target)}
        for key, raw in parser.items(section_name):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{section_name}]")
            setattr(target, key, _coerce(raw, hints[key], section_name, key))
    return config


# ---------------------------------------------------------------------------
# building blocks


def build_matrix(config: ExperimentConfig) -> MeasurementMatrix:
    geometry = ArrayGeometry(
        aperture=config.array.aperture,
        receiver_count=config.array.receivers,
    )
    spectrum = FrequencyGrid(
        center=config.frequency.center,
        bandwidth=config.frequency.bandwidth,
        count=config.frequency.count,
        wave_speed=config.frequency.wave_speed,
    )
    grid = ImagingGrid(
        n_cross=config.grid.n_cross,
        n_range=config.grid.n_range,
        pitch_cross=config.grid.pitch_cross,
        pitch_range=config.grid.pitch_range,
        center_range=config.array.standoff,
    )
    return build_measurement_matrix(geometry, spectrum, grid)


@dataclass
class SimulationBundle:
    """One simulated scene with everything later stages need."""

    config: ExperimentConfig
    seed: int
    snr_db: float | None
    matrix: MeasurementMatrix
    sources: SourceConfiguration
    linear: LinearData
    observed: np.ndarray            # recording after optional noise
    noise: np.ndarray | None
    system: CorrelationSystem
    collector: NoiseCollector


def _assemble_bundle(
    config: ExperimentConfig,
    matrix: MeasurementMatrix,
    seed_key: tuple[int, ...],
    source_count: int,
    factor: int,
    snr_db: float | None,
) -> SimulationBundle:
    mode = config.sources.amplitudes
    if mode not in ("unit", "equalized"):
        raise ConfigError(f"unknown sources.amplitudes value {mode!r}")
    sources = SourceConfiguration.random(
        matrix.n_pixels, source_count, seeded_rng(*seed_key, STREAM_SOURCES)
    )
    if mode == "equalized":
        sources = sources.equalized(matrix.scales)
    linear = synthesize_data(matrix, sources)
    if snr_db is None:
        observed, noise = linear.b, None
    else:
        observed, noise = add_noise(
            linear.b, snr_db, seeded_rng(*seed_key, STREAM_NOISE)
        )
    correlation = cross_correlate(observed)
    rows = subsample_rows(
        matrix.n_linear, factor, seeded_rng(*seed_key, STREAM_SAMPLING)
    )
    system = build_reduced_system(
        matrix,
        correlation,
        rows,
        renormalize=config.sampling.renormalize,
        memory_budget=config.sampling.memory_budget,
        chi_true=linear.chi,
    )
    collector = build_collector(
        system.n_rows,
        config.collector.beta,
        seeded_rng(*seed_key, STREAM_COLLECTOR),
    )
    return SimulationBundle(
        config=config,
        seed=seed_key[0],
        snr_db=snr_db,
        matrix=matrix,
        sources=sources,
        linear=linear,
        observed=observed,
        noise=noise,
        system=system,
        collector=collector,
    )


def simulate(
    config: ExperimentConfig,
    seed: int | None = None,
    matrix: MeasurementMatrix | None = None,
) -> SimulationBundle:
    """Simulate the configured scene, subsample correlations, build the collector."""
    master = config.run.seed if seed is None else seed
    if matrix is None:
        matrix = build_matrix(config)
    return _assemble_bundle(
        config,
        matrix,
        (master,),
        config.sources.count,
        config.sampling.factor,
        config.run.snr_db,
    )


@dataclass
class TrialResult:
    bundle: SimulationBundle
    report: RecoveryReport
    metrics: SupportMetrics
    wall_time: float
    refit: RestrictedLiftedSolution | None = None
    angle_stats: AngleErrorStats | None = None
    amplitude_error: float | None = None


def run_stage1(
    bundle: SimulationBundle, solver_config: SolverConfig | None = None
) -> TrialResult:
    """Sparse support recovery on the reduced system."""
    cfg = solver_config or bundle.config.solver.to_solver_config()
    start = time.perf_counter()
    report = gelma_solve(bundle.system, bundle.collector, cfg)
    wall = time.perf_counter() - start
    metrics = support_metrics(
        report.chi, bundle.linear.chi, threshold=cfg.support_threshold
    )
    return TrialResult(
        bundle=bundle, report=report, metrics=metrics, wall_time=wall
    )


def run_stage2(result: TrialResult) -> TrialResult:
    """Least squares refit of amplitudes and phases on the recovered support."""
    support = result.report.support
    if support.size == 0:
        return result
    bundle = result.bundle
    refit = solve_restricted(
        bundle.matrix,
        bundle.system.data,
        bundle.system.row_indices,
        support,
    )
    result.refit = refit

    rho_true = bundle.linear.rho[support]
    x_true = np.outer(rho_true, rho_true.conj())
    result.angle_stats = angle_error(refit.x_hat, x_true)
    peak = np.abs(bundle.linear.rho).max()
    if peak > 0:
        result.amplitude_error = float(
            np.max(np.abs(np.abs(refit.rho_hat) - np.abs(rho_true))) / peak
        )
    return result


def run_recovery(
    config: ExperimentConfig,
    seed: int | None = None,
    stage2: bool = True,
    matrix: MeasurementMatrix | None = None,
) -> TrialResult:
    """Simulate one scene and run the requested recovery stages."""
    bundle = simulate(config, seed=seed, matrix=matrix)
    result = run_stage1(bundle)
    if stage2:
        result = run_stage2(result)
    return result


def run_calibration(config: ExperimentConfig) -> float:
    """Calibrate the image-block penalty weight on the configured system."""
    bundle = simulate(config)
    cal = config.calibration
    solver_cfg = config.solver.to_solver_config(
        max_iterations=cal.max_iterations, tol_rel=cal.tol_rel
    )
    return calibrate_tau(
        bundle.system,
        bundle.collector,
        solver_cfg,
        trials=cal.trials,
        seed=config.run.seed,
        grid=(cal.grid_min, cal.grid_max, cal.grid_step),
    )


# ---------------------------------------------------------------------------
# success-rate sweep over (source count, sampling factor)


@dataclass
class CellResult:
    m: int
    factor: int
    rows: int
    successes: int
    trials: int

    @property
    def score(self) -> float:
        return self.successes / self.trials


@dataclass
class SweepResult:
    cells: list[CellResult]
    boundary: list[tuple[int, int]]        # (rows, largest m with score >= 1/2)
    fit_exponent: float | None
    reference_curve: list[tuple[int, float]]

    def cell(self, m: int, factor: int) -> CellResult:
        for c in self.cells:
            if c.m == m and c.factor == factor:
                return c
        raise KeyError((m, factor))


def _run_cell(
    config: ExperimentConfig, matrix: MeasurementMatrix, m: int, factor: int
) -> CellResult:
    rows = factor * matrix.n_linear
    sweep = config.phase_diagram
    solver_cfg = config.solver.to_solver_config(
        max_iterations=sweep.max_iterations, tol_rel=sweep.tol_rel
    )
    successes = 0
    for trial in range(sweep.trials):
        seed_key = (config.run.seed, SWEEP_DOMAIN, m, rows, trial)
        bundle = _assemble_bundle(config, matrix, seed_key, m, factor, None)
        report = gelma_solve(bundle.system, bundle.collector, solver_cfg)
        metrics = support_metrics(
            report.chi, bundle.linear.chi, threshold=solver_cfg.support_threshold
        )
        successes += metrics.exact
    return CellResult(m=m, factor=factor, rows=rows, successes=successes,
                      trials=sweep.trials)


def _cell_task(args) -> CellResult:
    config, m, factor = args
    return _run_cell(config, build_matrix(config), m, factor)


def reference_sparsity(rows: int) -> float:
    """Square-root sparsity scale sqrt(rows) / (2 sqrt(log rows))."""
    if rows < 2:
        raise DomainError("need at least two rows")
    return float(np.sqrt(rows) / (2.0 * np.sqrt(np.log(rows))))


def run_phase_diagram(
    config: ExperimentConfig,
    threads: int | None = None,
    progress=None,
) -> SweepResult:
    """Exact-support success rates over the (m, factor) grid.

    Every cell derives its randomness from (master seed, m, rows, trial), so
    the outcome is identical whether cells run serially or across a pool.
    """
    sweep = config.phase_diagram
    if sweep.m_min < 1 or sweep.m_max < sweep.m_min:
        raise ConfigError("invalid source count range")
    if sweep.factor_min < 1 or sweep.factor_max < sweep.factor_min:
        raise ConfigError("invalid sampling factor range")
    threads = config.run.threads if threads is None else threads

    ms = list(range(sweep.m_min, sweep.m_max + 1))
    factors = list(range(sweep.factor_min, sweep.factor_max + 1))
    tasks = [(m, f) for f in factors for m in ms]

    cells: list[CellResult] = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for done, cell in enumerate(
                pool.map(_cell_task, [(config, m, f) for m, f in tasks])
            ):
                cells.append(cell)
                if progress:
                    progress(done + 1, len(tasks), cell)
    else:
        matrix = build_matrix(config)
        for done, (m, f) in enumerate(tasks):
            cell = _run_cell(config, matrix, m, f)
            cells.append(cell)
            if progress:
                progress(done + 1, len(tasks), cell)

    boundary = []
    for f in factors:
        rows = f * (config.array.receivers * config.frequency.count)
        passing = [c.m for c in cells if c.factor == f and c.score >= 0.5]
        boundary.append((rows, max(passing) if passing else 0))

    positive = [(rows, m) for rows, m in boundary if m >= 1]
    fit_exponent = None
    if len(positive) >= 2:
        logs_rows = np.log([rows for rows, _ in positive])
        logs_m = np.log([m for _, m in positive])
        fit_exponent = float(np.polyfit(logs_rows, logs_m, 1)[0])

    curve = [(rows, reference_sparsity(rows)) for rows, _ in boundary]
    return SweepResult(
        cells=cells,
        boundary=boundary,
        fit_exponent=fit_exponent,
        reference_curve=curve,
    )


# ---------------------------------------------------------------------------
# built-in quick checks


def _selftest_config() -> ExperimentConfig:
    config = ExperimentConfig()
    config.array = ArraySection(receivers=7, aperture=0.5, standoff=0.5)
    config.frequency = FrequencySection(center=60e9, bandwidth=20e9, count=7)
    config.grid = GridSection(n_cross=9, n_range=9, pitch_cross=10e-3,
                              pitch_range=30e-3)
    config.sources = SourcesSection(count=2)
    config.sampling = SamplingSection(factor=10)
    config.run = RunSection(seed=11)
    return config


def selftest() -> tuple[bool, list[str]]:
    """Fast internal consistency checks; returns (all passed, report lines)."""
    lines: list[str] = []
    ok = True

    def check(name: str, passed: bool, detail: str = ""):
        nonlocal ok
        ok &= passed
        suffix = f" ({detail})" if detail and not passed else ""
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}{suffix}")

    config = _selftest_config()
    matrix = build_matrix(config)
    norms = np.linalg.norm(matrix.data, axis=0)
    check("sensing matrix has unit columns",
          bool(np.allclose(norms, 1.0, atol=1e-12)))

    bundle = simulate(config)
    rng = seeded_rng(config.run.seed, 999)
    x = rng.standard_normal(bundle.system.n_pixels) + 1j * rng.standard_normal(
        bundle.system.n_pixels
    )
    y = rng.standard_normal(bundle.system.n_rows) + 1j * rng.standard_normal(
        bundle.system.n_rows
    )
    lhs = np.vdot(y, bundle.system.op.matvec(x))
    rhs = np.vdot(bundle.system.op.adjoint(y), x)
    check("reduced operator adjoint identity",
          bool(abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)),
          f"gap {abs(lhs - rhs):.2e}")

    col = bundle.collector.column(bundle.collector.n_rows + 3)
    manual = np.roll(bundle.collector.generators[1], 3)
    check("collector columns are cyclic shifts", bool(np.allclose(col, manual)))

    unit = np.zeros(bundle.collector.n_cols, dtype=complex)
    unit[bundle.collector.n_rows + 3] = 1.0
    check("collector fft product matches its columns",
          bool(np.allclose(bundle.collector.matvec(unit), col, atol=1e-12)))

    ex = rng.standard_normal(bundle.collector.n_cols) + 1j * rng.standard_normal(
        bundle.collector.n_cols
    )
    ez = rng.standard_normal(bundle.collector.n_rows) + 1j * rng.standard_normal(
        bundle.collector.n_rows
    )
    lhs = np.vdot(ez, bundle.collector.matvec(ex))
    rhs = np.vdot(bundle.collector.adjoint(ez), ex)
    check("collector adjoint identity",
          bool(abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)))

    result = run_stage1(bundle)
    check("mini scene support recovery",
          result.metrics.exact and result.metrics.false_positives == 0,
          f"fp={result.metrics.false_positives} fn={result.metrics.false_negatives}")

    single = replace(config, sources=SourcesSection(count=1))
    single_result = run_stage1(
        simulate(single),
        single.solver.to_solver_config(tol_rel=1e-12, max_iterations=40000),
    )
    truth = single_result.bundle.linear.chi
    k = int(np.flatnonzero(truth)[0])
    amp_err = abs(single_result.report.chi_descaled[k].real - truth[k]) / truth[k]
    check("single source amplitude", bool(amp_err <= 1e-8), f"rel err {amp_err:.2e}")

    return ok, lines
