from fractions import Fraction

import numpy as np
import pytest

import _oracle as O
from kvcert import bch as B
from kvcert import free_algebra as FA
from kvcert.matrices import make_rng, mat_exp, mat_log, op_norm, random_matrix, random_skew


def exact_dict(p):
    return {FA.index_to_word(int(i), n): v[i] for n, v in p.items() for i in np.flatnonzero(v)}


# -- univariate series ------------------------------------------------------

def test_f_operator_coefficients():
    # t / (e^{-t} - 1)
    c = B.standard_operator("f_op", 6, exact=True).coeffs
    assert c == (Fraction(-1), Fraction(-1, 2), Fraction(-1, 12), 0, Fraction(1, 720), 0)


def test_g_operator_coefficients():
    # t / (1 - e^t)
    c = B.standard_operator("g_op", 5, exact=True).coeffs
    assert c == (Fraction(-1), Fraction(1, 2), Fraction(-1, 12), 0, Fraction(1, 720))


def test_flow_operator_coefficients():
    # t / (1 - e^{-t}) = 1 + t/2 + t^2/12 - t^4/720
    c = B.standard_operator("flow", 5, exact=True).coeffs
    assert c == (1, Fraction(1, 2), Fraction(1, 12), 0, Fraction(-1, 720))


def test_float_and_exact_operators_agree():
    for kind in ("f_op", "g_op", "flow"):
        a = B.standard_operator(kind, 10).coeffs
        b = B.standard_operator(kind, 10, exact=True).coeffs
        assert np.allclose(a, [float(x) for x in b], atol=1e-16)


def test_reciprocal_needs_constant_term():
    with pytest.raises(ZeroDivisionError):
        B.series_reciprocal([0.0, 1.0], 3)


# -- formal exp and log -----------------------------------------------------

def test_formal_exp_at_degree_two():
    e = B.formal_exp(FA.X(2))
    assert e.unit_coeff == 1
    assert {w: c for w, c in e.body.terms()} == {"X": 1, "XX": 0.5}


def test_formal_exp_of_zero():
    e = B.formal_exp(FA.GradedSeries.zero(4))
    assert e.unit_coeff == 1 and e.body.is_zero()


def test_log_exp_round_trip():
    s = FA.X(7) + FA.Y(7)
    assert (B.formal_log(B.formal_exp(s)) - s).l1_norm() <= 1e-12


# -- BCH ----------------------------------------------------------------------

@pytest.mark.parametrize("N", [3, 4, 5])
def test_bch_matches_word_algebra_oracle(N):
    assert exact_dict(B.bch_series(N, exact=True)) == O.bch(N)


@pytest.mark.parametrize("N", [3, 4, 5])
def test_bch_matches_dynkin_formula(N):
    assert exact_dict(B.bch_series(N, exact=True)) == O.dynkin_bch(N)


def test_bch_low_grades():
    V = exact_dict(B.bch_series(5, exact=True))
    assert {w: c for w, c in V.items() if len(w) <= 2} == {"X": 1, "Y": 1, "XY": Fraction(1, 2),
                                                           "YX": Fraction(-1, 2)}
    # grade 4 is -[Y,[X,[X,Y]]]/24
    assert {w: c for w, c in V.items() if len(w) == 4} == {
        "XXYY": Fraction(1, 24), "YYXX": Fraction(-1, 24),
        "XYXY": Fraction(-1, 12), "YXYX": Fraction(1, 12)}
    assert V["XXXXY"] == Fraction(-1, 720)
    assert V["XXYYX"] == Fraction(-1, 120)


def test_bch_grade_three_after_dsw():
    N = 5
    X, Y = FA.X(N), FA.Y(N)
    V3 = FA.dsw_project(B.bch_series(N).homogeneous(3))
    g3 = (FA.bracket(X, FA.bracket(X, Y)) + FA.bracket(Y, FA.bracket(Y, X))) / 12
    assert (V3 - g3).l1_norm() <= 1e-12


def test_bch_is_lie():
    assert FA.is_lie(B.bch_series(9), 1e-12).ok


@pytest.mark.parametrize("t", [0.3, -1.5, 2.0])
def test_bch_scale_equivariance(t):
    N = 7
    V = B.bch_series(N)
    direct = B.formal_log(B.formal_exp(t * FA.X(N)) * B.formal_exp(t * FA.Y(N)))
    assert (FA.scale(V, t) - direct).l1_norm() <= 1e-12 * max(1, abs(t)) ** N


@pytest.mark.parametrize("N", [6, 8, 10])
def test_bch_matrix_oracle_with_tail_bound(N):
    rng = make_rng(N)
    V = B.bch_series(N)
    worst_C = 0.0
    for _ in range(20):
        s = 0.3
        Xm, Ym = random_matrix(4, s / 2, rng), random_matrix(4, s / 2, rng)
        err = op_norm(FA.evaluate(V, Xm, Ym) - mat_log(mat_exp(Xm) @ mat_exp(Ym)))
        assert err <= s ** (N + 1) / (1 - s)
        worst_C = max(worst_C, err / s ** (N + 1))
    assert worst_C < 1


# -- halfhalf ------------------------------------------------------------------

def test_halfhalf_on_bracket():
    h = B.halfhalf_decompose(FA.bracket(FA.X(4), FA.Y(4)))
    assert h.Z1.is_zero()
    assert {w: c for w, c in h.P.terms()} == {"Y": 0.5}
    assert {w: c for w, c in h.Q.terms()} == {"X": -0.5}


@pytest.mark.parametrize("mode", B.SPLIT_MODES)
def test_halfhalf_on_generator(mode):
    h = B.halfhalf_decompose(FA.X(4), mode)
    assert {w: c for w, c in h.Z1.terms()} == {"X": 1}
    assert h.P.is_zero() and h.Q.is_zero()


@pytest.mark.parametrize("mode", B.SPLIT_MODES)
def test_halfhalf_reconstructs_bch(mode):
    h = B.halfhalf_decompose(B.bch_series(6), mode)
    assert h.max_residual <= 1e-10
    Z = B.bch_series(6)
    X, Y = FA.X(6), FA.Y(6)
    assert (Z - h.Z1 - FA.bracket(X, h.P) - FA.bracket(Y, h.Q)).l1_norm() <= 1e-10


def test_halfhalf_rejects_non_lie():
    with pytest.raises(ValueError):
        B.halfhalf_decompose(FA.X(3) * FA.Y(3))


def test_halfhalf_rejects_unknown_mode():
    with pytest.raises((ValueError, KeyError)):
        B.halfhalf_decompose(FA.X(3), "diagonal")


# -- KVeasy, F, G and the first KV equation ---------------------------------------

@pytest.mark.parametrize("mode", B.SPLIT_MODES)
def test_kveasy_formal_residual(mode):
    assert max(B.kveasy_residuals(8, mode).values()) <= 1e-10


@pytest.mark.parametrize("mode", ["first-letter", "symmetric"])
def test_grade_one_of_a_b(mode):
    A, Bs = B.kveasy_ab(5, mode)
    assert {w: c for w, c in A.homogeneous(1).terms()} == pytest.approx({"Y": 0.25})
    assert {w: c for w, c in Bs.homogeneous(1).terms()} == pytest.approx({"X": -0.25})
    X, Y = FA.X(5), FA.Y(5)
    two = FA.bracket(X, A.homogeneous(1)) + FA.bracket(Y, Bs.homogeneous(1))
    assert (two - FA.bracket(X, Y) / 2).l1_norm() <= 1e-14


def test_kveasy_on_matrices():
    N = 8
    A, Bs = B.kveasy_ab(N)
    rng = make_rng(3)
    for trial in range(10):
        if trial % 2:
            Xm, Ym = random_skew(3, 0.04, rng), random_skew(3, 0.04, rng)
        else:
            Xm, Ym = random_matrix(3, 0.04, rng), random_matrix(3, 0.04, rng)
        a, b = FA.evaluate(A, Xm, Ym), FA.evaluate(Bs, Xm, Ym)
        expo = Xm + Ym + Xm @ a - a @ Xm + Ym @ b - b @ Ym
        assert op_norm(mat_exp(Xm) @ mat_exp(Ym) - mat_exp(expo)) <= 1e-9
        if trial % 2:
            assert op_norm(a + a.conj().T) <= 1e-10
            assert op_norm(b + b.conj().T) <= 1e-10


@pytest.mark.parametrize("mode", ["first-letter", "symmetric"])
def test_grade_one_of_f_g(mode):
    F, G = B.fg_series(5, mode)
    assert {w: c for w, c in F.homogeneous(1).terms()} == pytest.approx({"Y": 0.25})
    assert {w: c for w, c in G.homogeneous(1).terms()} == pytest.approx({"X": -0.25})


def test_f_g_follow_defining_formula():
    N = 6
    A, Bs = B.kveasy_ab(N)
    F, G = B.fg_series(N)
    X, Y = FA.X(N), FA.Y(N)
    # (e^{-ad X} - 1) F = ad_X B(Y,X) and (1 - e^{ad Y}) G = ad_Y A(Y,X)
    lhs_F = -B.standard_operator("one_minus_exp_neg", N + 1).apply(X, F)
    lhs_G = -B.standard_operator("exp_minus_one", N + 1).apply(Y, G)
    assert (lhs_F - FA.bracket(X, Bs.swap())).l1_norm() <= 1e-12
    assert (lhs_G - FA.bracket(Y, A.swap())).l1_norm() <= 1e-12


@pytest.mark.parametrize("mode", B.SPLIT_MODES)
def test_kv1_float(mode):
    rep = B.kv1_check(8, mode)
    assert rep.residuals[1] == 0.0
    assert rep.ok and rep.max_residual <= 1e-9


@pytest.mark.parametrize("mode", ["first-letter", "shifted"])
def test_kv1_exact_is_zero(mode):
    assert B.kv1_check(8, mode, exact=True).max_residual == 0


def test_exact_symmetric_split_is_refused():
    with pytest.raises(ValueError):
        B.halfhalf_decompose(B.bch_series(4, exact=True), "symmetric")


def test_kv1_detects_corrupted_f():
    # ad_X raises degree by one: a grade-2 change in F lands in grade 3
    N = 6
    F, G = B.fg_series(N)
    bad = F + 0.1 * FA.bracket(FA.X(N), FA.Y(N))
    res = B.kv1_residuals(bad, G, N)
    assert res[2] <= 1e-12
    assert res[3] == pytest.approx(0.4, abs=1e-12)


def test_kv1_detects_corrupted_f_grade_one():
    N = 6
    F, G = B.fg_series(N)
    res = B.kv1_residuals(F + 0.1 * FA.Y(N), G, N)
    assert res[2] >= 0.05


def test_kv1_detects_wrong_sign_convention():
    # G built with t/(e^t - 1) instead of t/(1 - e^t) breaks the identity
    N = 5
    A, _ = B.kveasy_ab(N)
    F, _ = B.fg_series(N)
    ops = B.standard_operator("g_op", N + 1)
    flipped = B.AdOperatorSeries(tuple(-c for c in ops.coeffs))
    G_bad = flipped.apply(FA.Y(N), A.swap(), N)
    assert max(B.kv1_residuals(F, G_bad, N).values()) > 0.1
