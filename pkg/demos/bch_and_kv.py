"""BCH series, the first KV equation and the flow solution R, S on matrices.

Run: python3 demos/bch_and_kv.py
"""
import numpy as np

from kvcert import bch as B
from kvcert import free_algebra as FA
from kvcert import kv_flow as KV
from kvcert.matrices import make_rng, mat_exp, mat_log, op_norm, random_skew


def main():
    N = 6
    V = B.bch_series(N, exact=True)
    print("BCH series through degree 3:")
    for n in (1, 2, 3):
        vec = V.component(n)
        for i in np.flatnonzero(vec):
            print(f"  {FA.index_to_word(int(i), n):>4}: {vec[i]}")

    rep = B.kv1_check(N, exact=True)
    print(f"\nfirst KV equation, exact per-grade residuals: {rep.residuals}")

    sol = KV.solve_rs(8)
    dec = KV.rs_decompose(sol)
    print(f"grade-1 parts: R_1 = {dec.lead_coefficients()['R']}, S_1 = {dec.lead_coefficients()['S']}")

    rng = make_rng(0)
    X, Y = random_skew(4, 0.02, rng), random_skew(4, 0.02, rng)
    R, S = FA.evaluate(sol.R, X, Y), FA.evaluate(sol.S, X, Y)
    lhs = mat_exp(X + Y)
    rhs = mat_exp(R) @ mat_exp(X) @ mat_exp(-R) @ mat_exp(S) @ mat_exp(Y) @ mat_exp(-S)
    print(f"||e^(X+Y) - (e^R e^X e^-R)(e^S e^Y e^-S)|| = {op_norm(lhs - rhs):.2e}")
    print(f"for comparison ||e^(X+Y) - e^X e^Y|| = {op_norm(lhs - mat_exp(X) @ mat_exp(Y)):.2e}")
    print(f"R skew-adjoint to {op_norm(R + R.conj().T):.1e}")
    print(f"log round trip: {op_norm(mat_log(mat_exp(X)) - X):.1e}")


if __name__ == "__main__":
    main()
