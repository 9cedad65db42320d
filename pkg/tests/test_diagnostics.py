import numpy as np
import pytest

from corrsparse.correlation import ReducedOperator, build_reduced_system, cross_correlate
from corrsparse.diagnostics import (
    coherence_report,
    hanson_wright_tail_check,
    support_metrics,
)
from corrsparse.errors import DomainError
from corrsparse.wave_model import SourceConfiguration, synthesize_data

from helpers import tiny_matrix, unit_columns


class TestCoherenceReport:
    def test_matches_direct_gram_computation(self, rng):
        a = unit_columns(rng, 8, 12)
        gram = np.abs(a.conj().T @ a)
        np.fill_diagonal(gram, 0.0)
        report = coherence_report(a)
        assert report.mu == pytest.approx(gram.max(), abs=1e-13)
        assert report.delta == pytest.approx(np.sqrt(8) * gram.max(), abs=1e-12)
        assert report.n_linear == 8 and report.n_pixels == 12
        assert report.m_quadratic == pytest.approx(8 / np.sqrt(np.log(8)))

    def test_blocking_does_not_change_the_answer(self, rng):
        a = unit_columns(rng, 6, 20)
        full = coherence_report(a, block=1024).mu
        tiled = coherence_report(a, block=3).mu
        assert tiled == pytest.approx(full, abs=1e-14)

    def test_orthonormal_columns_have_zero_coherence(self, rng):
        a = np.linalg.qr(unit_columns(rng, 8, 8))[0][:, :5]
        assert coherence_report(a).mu == pytest.approx(0.0, abs=1e-13)

    def test_single_column_reports_zero(self):
        report = coherence_report(np.ones((4, 1)) / 2.0)
        assert report.single_column
        assert report.mu == 0.0

    def test_full_sampling_squares_the_coherence(self):
        # with every correlation row kept and no rescaling, reduced-column
        # inner products are the squared moduli of the originals
        mm = tiny_matrix()
        n = mm.n_linear
        corr = np.zeros((n, n), dtype=complex)
        system = build_reduced_system(mm, corr, np.arange(n * n), renormalize=False)
        report = coherence_report(mm, system.op)
        assert report.mu_reduced == pytest.approx(report.mu**2, abs=1e-12)
        assert report.mcond_limit == pytest.approx(1.0 / (3 * report.mu**2), rel=1e-10)
        assert report.n_rows == n * n
        rows = n * n
        assert report.m_linear == pytest.approx(
            np.sqrt(rows) / (2 * np.sqrt(np.log(rows)))
        )

    def test_reduced_coherence_from_plain_matrix(self, rng):
        t = unit_columns(rng, 30, 6)
        report = coherence_report(unit_columns(rng, 8, 6), t)
        gram = np.abs(t.conj().T @ t)
        np.fill_diagonal(gram, 0.0)
        assert report.mu_reduced == pytest.approx(gram.max(), abs=1e-12)


class TestSupportMetrics:
    def test_exact_match(self):
        chi = np.array([0.0, 2.0, 0.0, 1.0])
        truth = np.array([0.0, 1.0, 0.0, 3.0])
        m = support_metrics(chi, truth)
        assert m.exact and m.score == 1.0
        assert m.false_positives == 0 and m.false_negatives == 0
        assert m.recovered.tolist() == [1, 3]
        assert m.gamma == pytest.approx(1.0 / 3.0)

    def test_false_positive_and_negative_counting(self):
        chi = np.array([1.0, 1.0, 0.0, 0.0])
        truth = np.array([1.0, 0.0, 1.0, 0.0])
        m = support_metrics(chi, truth)
        assert not m.exact and m.score == 0.0
        assert m.false_positives == 1
        assert m.false_negatives == 1

    def test_threshold_is_relative(self):
        chi = np.array([1.0, 5e-4, 0.0])
        truth = np.array([1.0, 0.0, 0.0])
        assert support_metrics(chi, truth, threshold=1e-3).exact
        assert not support_metrics(chi, truth, threshold=1e-4).exact

    def test_all_zero_recovery(self):
        m = support_metrics(np.zeros(4), np.array([0.0, 1.0, 0.0, 0.0]))
        assert m.recovered.size == 0
        assert m.false_negatives == 1

    def test_scaling_invariance(self, rng):
        chi = np.abs(rng.standard_normal(6))
        truth = np.abs(rng.standard_normal(6))
        a = support_metrics(chi, truth)
        b = support_metrics(chi * 1e6, truth * 1e-6)
        assert a.exact == b.exact
        assert np.array_equal(a.recovered, b.recovered)

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            support_metrics(np.ones(3), np.ones(4))


class TestHansonWrightTail:
    def test_bound_holds_on_both_variants(self):
        result = hanson_wright_tail_check(size=16, samples=20000, seed=1)
        assert result.holds
        variants = {row.variant for row in result.rows}
        assert variants == {"rademacher", "uniform_phase"}
        assert len(result.rows) == 32
        # tails must decay along the t grid
        rad = [r.empirical for r in result.rows if r.variant == "rademacher"]
        assert rad == sorted(rad, reverse=True)
        assert result.frobenius > 0

    def test_deterministic(self):
        a = hanson_wright_tail_check(size=8, samples=10000, seed=4)
        b = hanson_wright_tail_check(size=8, samples=10000, seed=4)
        assert [(r.empirical, r.bound) for r in a.rows] == [
            (r.empirical, r.bound) for r in b.rows
        ]

    def test_custom_t_grid(self):
        result = hanson_wright_tail_check(
            size=8, samples=10000, t_values=np.array([0.0]), seed=2
        )
        # at t = 0 the bound is 2 and every draw exceeds the threshold
        assert result.rows[0].empirical == 1.0
        assert result.rows[0].bound == 2.0
        assert result.holds

    def test_input_validation(self):
        with pytest.raises(DomainError):
            hanson_wright_tail_check(size=1, samples=10000)
        with pytest.raises(DomainError):
            hanson_wright_tail_check(size=8, samples=9999)
        with pytest.raises(DomainError):
            hanson_wright_tail_check(size=8, samples=10000, variants=("gaussian",))
