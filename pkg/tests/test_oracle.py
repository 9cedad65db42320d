import numpy as np
import pytest

from corrsparse.errors import DomainError, InfeasibleSystemError
from corrsparse.oracle import (
    dense_circulant,
    dense_collector,
    dense_kronecker,
    dense_l1_solve,
    dense_operator_norm,
    diagonal_column_indices,
    vec,
)

from helpers import unit_columns


def test_vec_is_column_major():
    m = np.array([[1, 2], [3, 4]])
    assert vec(m).tolist() == [1, 3, 2, 4]


def test_kronecker_reproduces_lifted_action(rng):
    a = unit_columns(rng, 5, 6)
    x = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    lifted = dense_kronecker(a)
    assert lifted.shape == (25, 36)
    assert np.allclose(lifted @ vec(x), vec(a @ x @ a.conj().T), atol=1e-12)


def test_kronecker_diagonal_columns_are_rank_one_outers(rng):
    a = unit_columns(rng, 4, 5)
    lifted = dense_kronecker(a)
    cols = diagonal_column_indices(5)
    assert cols.tolist() == [0, 6, 12, 18, 24]
    for k in range(5):
        outer = np.outer(a[:, k], a[:, k].conj())
        assert np.allclose(lifted[:, cols[k]], vec(outer), atol=1e-13)


def test_kronecker_size_cap():
    with pytest.raises(DomainError):
        dense_kronecker(np.ones((9, 4)))
    with pytest.raises(DomainError):
        dense_kronecker(np.ones((4, 11)))


def test_dense_circulant_shifts_columns():
    gen = np.array([1.0, 2.0, 3.0, 4.0])
    circ = dense_circulant(gen)
    assert np.allclose(circ[:, 0], gen)
    assert np.allclose(circ[:, 1], [4, 1, 2, 3])
    assert np.allclose(circ[:, 3], [2, 3, 4, 1])
    # every row is a shifted reversal of the generator; sums agree
    assert np.allclose(circ.sum(axis=0), gen.sum())


def test_dense_collector_concatenates_blocks(rng):
    gens = rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))
    full = dense_collector(gens)
    assert full.shape == (5, 10)
    assert np.allclose(full[:, :5], dense_circulant(gens[0]))
    assert np.allclose(full[:, 5:], dense_circulant(gens[1]))


def test_dense_operator_norm_matches_numpy(rng):
    m = rng.standard_normal((7, 4)) + 1j * rng.standard_normal((7, 4))
    assert dense_operator_norm(m) == pytest.approx(np.linalg.norm(m, 2), rel=1e-12)


class TestDenseL1Solve:
    def test_separable_problem_picks_the_cheap_block(self, rng):
        # with T = C = I the problem splits per coordinate: x wins iff tau < 1
        d = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        eye = np.eye(6)
        x, e = dense_l1_solve(eye, eye, d, tau=0.5)
        assert np.allclose(x, d, atol=1e-6)
        assert np.allclose(e, 0, atol=1e-6)
        x, e = dense_l1_solve(eye, eye, d, tau=2.0)
        assert np.allclose(x, 0, atol=1e-6)
        assert np.allclose(e, d, atol=1e-6)

    def test_without_auxiliary_block(self, rng):
        # exactly determined: the constraint fixes x regardless of tau
        t = unit_columns(rng, 4, 4)
        x_true = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        x, e = dense_l1_solve(t, None, t @ x_true, tau=3.0)
        assert e.size == 0
        assert np.allclose(x, x_true, atol=1e-7)

    def test_infeasible_system_is_reported(self):
        t = np.array([[1.0], [0.0]])
        c = np.array([[2.0], [0.0]])
        with pytest.raises(InfeasibleSystemError) as info:
            dense_l1_solve(t, c, np.array([0.0, 1.0]), tau=1.0)
        assert info.value.violation == pytest.approx(1.0, rel=1e-6)

    def test_size_caps(self, rng):
        big_t = np.ones((200, 2))
        with pytest.raises(DomainError):
            dense_l1_solve(big_t, None, np.ones(200), tau=1.0)
        wide_c = np.ones((4, 600))
        with pytest.raises(DomainError):
            dense_l1_solve(np.ones((4, 2)), wide_c, np.ones(4), tau=1.0)

    def test_tau_must_be_positive(self):
        with pytest.raises(DomainError):
            dense_l1_solve(np.eye(2), None, np.ones(2), tau=0.0)
