from fractions import Fraction

import numpy as np
import pytest

import _oracle as O
from kvcert import free_algebra as FA
from kvcert import kv_flow as KV
from kvcert.matrices import make_rng, mat_exp, op_norm, random_skew

SPLITS = ["first-letter", "symmetric", "shifted"]


def exact_dict(p):
    return {FA.index_to_word(int(i), n): v[i] for n, v in p.items() for i in np.flatnonzero(v)}


def frac_dict(d):
    return {w: Fraction(c) for w, c in d.items()}


@pytest.fixture(scope="module")
def sol8():
    return KV.solve_rs(8)


@pytest.fixture(scope="module")
def exact6():
    return KV.solve_rs(6, exact=True)


# -- frozen low-grade coefficients (checked against RK4 and the formal identity below) --

FROZEN = {
    "first-letter": (
        {"Y": "1/4", "XY": "-1/96", "YX": "1/96", "XXY": "-1/128", "XYX": "1/64", "XYY": "1/256",
         "YXX": "-1/128", "YXY": "-1/128", "YYX": "1/256"},
        {"X": "-1/4", "XY": "1/96", "YX": "-1/96", "XXY": "-1/256", "XYX": "1/128", "XYY": "1/128",
         "YXX": "-1/256", "YXY": "-1/64", "YYX": "1/128"}),
    "shifted": (
        {"Y": "3/8", "XY": "11/384", "YX": "-11/384", "XXY": "-7/1024", "XYX": "7/512",
         "XYY": "-1/18432", "YXX": "-7/1024", "YXY": "1/9216", "YYX": "-1/18432"},
        {"X": "-1/8", "XY": "13/384", "YX": "-13/384", "XXY": "-109/18432", "XYX": "109/9216",
         "XYY": "5/1024", "YXX": "-109/18432", "YXY": "-5/512", "YYX": "5/1024"}),
}


@pytest.mark.parametrize("mode", sorted(FROZEN))
def test_frozen_low_grades(mode):
    sol = KV.solve_rs(4, mode, exact=True)
    R = {w: c for w, c in exact_dict(sol.R).items() if len(w) <= 3}
    S = {w: c for w, c in exact_dict(sol.S).items() if len(w) <= 3}
    assert R == frac_dict(FROZEN[mode][0])
    assert S == frac_dict(FROZEN[mode][1])


@pytest.mark.parametrize("mode", ["first-letter", "shifted"])
def test_factorization_holds_formally(mode):
    # log(e^R e^X e^{-R} e^S e^Y e^{-S}) = X + Y in exact arithmetic, independent word algebra
    N = 5
    sol = KV.solve_rs(N, mode, exact=True)
    R, S = exact_dict(sol.R), exact_dict(sol.S)
    X, Y = {"X": Fraction(1)}, {"Y": Fraction(1)}
    neg = lambda p: O.smul(p, -1)  # noqa: E731
    g = {"": Fraction(1)}
    for factor in (R, X, neg(R), S, Y, neg(S)):
        g = O.mul(g, O.exp(factor, N), N)
    assert O.log(g, N) == {"X": 1, "Y": 1}


def test_exact_and_float_solutions_agree():
    a, b = KV.solve_rs(7), KV.solve_rs(7, exact=True)
    conv = lambda p: FA.GradedSeries({n: v.astype(complex) for n, v in p.items()}, p.truncation)  # noqa: E731
    assert (a.R - conv(b.R)).l1_norm() <= 1e-13
    assert (a.S - conv(b.S)).l1_norm() <= 1e-13


# -- structure --------------------------------------------------------------------

@pytest.mark.parametrize("mode", SPLITS)
def test_solution_is_lie(mode):
    sol = KV.solve_rs(7, mode)
    assert FA.is_lie(sol.R, 1e-10).ok and FA.is_lie(sol.S, 1e-10).ok


@pytest.mark.parametrize("mode", SPLITS)
def test_rho_one_is_grade_one_of_f(mode):
    from kvcert import bch as B
    sol = KV.solve_rs(5, mode)
    F, G = B.fg_series(5, mode)
    assert (sol.rho[1] - F.homogeneous(1)).l1_norm() <= 1e-15
    assert (sol.sigma[1] - G.homogeneous(1)).l1_norm() <= 1e-15


def test_time_zero_is_zero():
    R0, S0 = KV.solve_rs(1).at_time(0.0)
    assert R0.is_zero() and S0.is_zero()


def test_rejects_bad_degree():
    with pytest.raises(ValueError):
        KV.solve_rs(0)


@pytest.mark.parametrize("mode", ["first-letter", "symmetric"])
def test_lead_antisymmetry(mode):
    dec = KV.rs_decompose(KV.solve_rs(6, mode), mode)
    assert (dec.lead_S + dec.lead_R.swap()).l1_norm() <= 1e-14
    assert dec.lead_coefficients()["R"] == pytest.approx({"Y": 0.25})


def test_lead_antisymmetry_fails_for_shifted_split():
    # the shifted split realizes R_1 = 3Y/8, S_1 = -X/8
    dec = KV.rs_decompose(KV.solve_rs(6, "shifted"), "shifted")
    assert (dec.lead_S + dec.lead_R.swap()).l1_norm() == pytest.approx(0.25)


@pytest.mark.parametrize("mode", SPLITS)
def test_rs_decompose_reconstructs(mode):
    sol = KV.solve_rs(7, mode)
    dec = KV.rs_decompose(sol, mode)
    X, Y = FA.X(7), FA.Y(7)
    assert max(dec.residual_R, dec.residual_S) <= 1e-10
    assert (sol.R - dec.lead_R - FA.bracket(X, dec.R1) - FA.bracket(Y, dec.R2)).l1_norm() <= 1e-10
    assert (sol.S - dec.lead_S - FA.bracket(X, dec.S1) - FA.bracket(Y, dec.S2)).l1_norm() <= 1e-10


def test_skew_adjoint_closure(sol8):
    dec = KV.rs_decompose(sol8)
    rng = make_rng(8)
    for _ in range(20):
        Xm, Ym = random_skew(4, 0.05, rng), random_skew(4, 0.05, rng)
        for p in (sol8.R, sol8.S, dec.R1, dec.R2, dec.S1, dec.S2):
            assert KV.skew_deviation(FA.evaluate(p, Xm, Ym)) <= 1e-9


# -- ODE oracle -------------------------------------------------------------------

def test_ode_crosscheck_degree_six():
    sol = KV.solve_rs(6)
    check = KV.ode_crosscheck(sol, steps=200, alphas=(0.25, 0.5))
    assert check.deviation_R[1] <= 1e-12 and check.deviation_S[1] <= 1e-12
    assert check.max_deviation <= 1e-8
    assert check.max_homogeneity <= 1e-8


def test_integrate_rejects_few_steps():
    with pytest.raises(ValueError):
        KV.integrate_rs(3, "first-letter", 5)


# -- matrices -----------------------------------------------------------------------

def test_zero_inputs_give_zero_residual(sol8):
    z = np.zeros((4, 4), dtype=complex)
    assert KV.verify_factorization(sol8, z, z) == 0.0


def test_one_variable_degeneration(sol8):
    rng = make_rng(9)
    Xm = random_skew(4, 0.05, rng)
    z = np.zeros((4, 4), dtype=complex)
    Rm = FA.evaluate(sol8.R, Xm, z)
    assert op_norm(mat_exp(Xm) - mat_exp(Rm) @ mat_exp(Xm) @ mat_exp(-Rm)) <= 1e-14
    assert KV.verify_factorization(sol8, Xm, z) <= 1e-14


def test_random_skew_pairs(sol8):
    rng = make_rng(10)
    for _ in range(20):
        Xm, Ym = random_skew(4, 0.02, rng), random_skew(4, 0.02, rng)
        assert KV.verify_factorization(sol8, Xm, Ym) <= 1e-9


def test_dimension_mismatch(sol8):
    with pytest.raises(ValueError):
        KV.verify_factorization(sol8, np.eye(2), np.eye(3))


def test_convergence_order(exact6):
    rng = make_rng(12)
    dirs = [(random_skew(4, 1, rng), random_skew(4, 1, rng)) for _ in range(2)]
    sweep = KV.convergence_sweep(exact6, dirs, dps=40)
    assert sweep.slope >= 6.5
    assert sweep.slope == pytest.approx(8.0, abs=0.2)


def test_split_modes_agree_within_factor_two():
    rng = make_rng(11)
    dirs = [(random_skew(4, 0.04, rng), random_skew(4, 0.04, rng)) for _ in range(3)]
    sols = [KV.solve_rs(6, m, exact=m != "symmetric") for m in SPLITS]
    for Xm, Ym in dirs:
        res = [KV.verify_factorization_mp(s, Xm, Ym, 40) for s in sols]
        assert max(res) <= 2 * min(res)


def test_fit_loglog_slope():
    r = np.array([0.04, 0.02, 0.01])
    assert KV.fit_loglog_slope(r, 3 * r ** 7) == pytest.approx(7)


# -- serialization --------------------------------------------------------------------

@pytest.mark.parametrize("exact", [False, True])
def test_solution_json_round_trip(exact):
    sol = KV.solve_rs(4, "shifted", exact=exact)
    back = KV.KVSolution.from_json_dict(sol.to_json_dict())
    assert back.R.exact == exact and back.split_mode == "shifted"
    assert (back.R - sol.R).l1_norm() == 0 and (back.S - sol.S).l1_norm() == 0
