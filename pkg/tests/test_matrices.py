import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import _oracle as O
from kvcert import matrices as M

seeds = st.integers(0, 2 ** 32 - 1)


def test_exp_of_zero():
    assert np.array_equal(M.mat_exp(np.zeros((3, 3))), np.eye(3))


def test_exp_of_half_turn():
    assert M.op_norm(M.mat_exp(np.diag([1j * np.pi, -1j * np.pi])) + np.eye(2)) <= 1e-13


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.01, 2.0))
def test_exp_inverse(seed, radius):
    a = M.random_matrix(4, radius, seed)
    assert M.op_norm(M.mat_exp(a) @ M.mat_exp(-a) - np.eye(4)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.01, 2.0))
def test_exp_matches_taylor_oracle(seed, radius):
    a = M.random_matrix(3, radius, seed)
    assert M.op_norm(M.mat_exp(a) - O.expm_taylor(a)) <= 1e-12


def test_log_of_identity():
    assert M.op_norm(M.mat_log(np.eye(3))) == 0.0


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.01, 0.5))
def test_log_exp_round_trip(seed, radius):
    a = M.random_matrix(4, radius, seed)
    assert M.op_norm(M.mat_log(M.mat_exp(a)) - a) <= 1e-11


def test_log_far_from_identity_uses_schur_path():
    a = M.random_matrix(4, 2.0, 3)
    assert M.op_norm(M.mat_exp(M.mat_log(M.mat_exp(a))) - M.mat_exp(a)) <= 1e-10


@pytest.mark.parametrize("g", [np.diag([-1.0, 1.0]), np.diag([0.0, 1.0]), -np.eye(3)])
def test_log_branch_cut(g):
    with pytest.raises(M.BranchCutError):
        M.mat_log(g)


@pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.zeros((0, 0)), np.array([[np.nan]])])
def test_as_matrix_rejects(bad):
    with pytest.raises(ValueError):
        M.as_matrix(bad)


def test_group_commutator_of_commuting_is_identity():
    a, b = np.diag([1.0, 2.0]), np.diag([3.0, -1.0])
    assert np.allclose(M.group_comm(a, b), np.eye(2))


# -- random instances ---------------------------------------------------------------

def test_rng_is_deterministic_and_splittable():
    a = M.random_matrix(3, 1.0, M.make_rng(5))
    b = M.random_matrix(3, 1.0, M.make_rng(5))
    assert np.array_equal(a, b)
    s1, s2 = M.split_seeds(5, 2)
    assert not np.array_equal(M.random_matrix(3, 1, s1), M.random_matrix(3, 1, s2))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 8), st.floats(0.1, 4))
def test_random_square_zero(seed, dim, radius):
    x = M.random_square_zero(dim, radius, seed)
    assert M.op_norm(x @ x) <= 1e-12 * radius ** 2
    assert M.op_norm(x) == pytest.approx(radius)


def test_random_skew_and_projection():
    a = M.random_skew(4, 0.3, 1)
    assert M.op_norm(a + a.conj().T) == 0.0 and M.op_norm(a) == pytest.approx(0.3)
    p = M.random_projection(5, 2, 2)
    assert M.op_norm(p @ p - p) <= 1e-14 and np.trace(p).real == pytest.approx(2)


def test_square_zero_needs_dim_two():
    with pytest.raises(ValueError):
        M.random_square_zero(1, 1.0, 0)


# -- square-zero canonical form ------------------------------------------------

def test_canonical_form_of_jordan_block():
    f = M.square_zero_canonical(np.array([[0, 2.5], [0, 0]]))
    assert np.allclose(f.W, np.eye(2)) and np.allclose(f.singulars, [2.5])


def test_canonical_form_of_zero():
    f = M.square_zero_canonical(np.zeros((3, 3)))
    assert f.rank == 0 and f.singulars.size == 0


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 8))
def test_canonical_form_recovers(seed, dim):
    rng = M.make_rng(seed)
    W = M.random_unitary(dim, rng)
    s = np.sort(rng.uniform(0.2, 3.0, size=dim // 2))[::-1]
    block = np.zeros((dim, dim), dtype=complex)
    for i, v in enumerate(s):
        block[2 * i, 2 * i + 1] = v
    x = W @ block @ W.conj().T
    f = M.square_zero_canonical(x)
    assert np.allclose(np.sort(f.singulars)[::-1], s, atol=1e-12)
    assert M.op_norm(f.reconstruct() - x) <= 1e-12 * max(1, s.max())
    assert M.op_norm(f.W.conj().T @ f.W - np.eye(dim)) <= 1e-12


def test_canonical_form_rejects_non_square_zero():
    with pytest.raises(ValueError):
        M.square_zero_canonical(np.eye(2))


# -- Trotter ---------------------------------------------------------------------------

def test_trotter_commuting_is_exact():
    a, b = np.diag([0.3, -1.0]), np.diag([2.0, 0.5])
    assert M.trotter_product(a, b, 1)[1] <= 1e-12


def test_trotter_first_order_rate():
    rng = M.make_rng(4)
    a, b = M.random_matrix(3, 1.0, rng), M.random_matrix(3, 1.0, rng)
    res = [M.trotter_product(a, b, n)[1] for n in (10, 20, 40, 80)]
    ratios = np.array(res[1:]) / np.array(res[:-1])
    assert np.all((ratios >= 0.4) & (ratios <= 0.6))
    assert M.trotter_product(a, b, 2 ** 10)[1] <= 1e-2 * M.trotter_product(a, b, 1)[1]


def test_trotter_rejects_zero_steps():
    with pytest.raises(ValueError):
        M.trotter_product(np.eye(2), np.eye(2), 0)


def test_matrix_json_round_trip():
    a = M.random_matrix(3, 1.0, 0)
    assert np.array_equal(M.matrix_from_json(M.matrix_to_json(a)), a)
    with pytest.raises(ValueError):
        M.matrix_from_json({"dim": 2, "re": [[1.0]]})
