"""Build each kind of factorization certificate and re-check it from JSON.

Run: python3 demos/certificates.py
"""
import json

import numpy as np

from kvcert import constructions as C
from kvcert.matrices import make_rng, random_contraction, random_matrix, random_square_zero
from kvcert.verifier import verify_certificate


def show(name, cert):
    text = json.dumps(cert.to_json_dict())
    v = verify_certificate(json.loads(text))
    print(f"{name:>10}: {len(cert.atoms):4d} atoms, residual {cert.residual:.1e}, "
          f"{len(text) / 1024:7.1f} KiB, verifier {'ok' if v.ok else v.failures}")


def main():
    rng = make_rng(1)
    x = random_square_zero(4, 2.0, rng)
    show("unipotent", C.unipotent_factor(x))
    s5 = C.sumof5(C.n2c_witness(x), random_matrix(4, 1.0, rng))
    show("sumof5", s5.certificate)
    n2 = C.commutator_to_squarezeros(random_matrix(3, 1, rng), random_matrix(3, 1, rng))
    show("commN2", n2.certificate)
    print(f"{'':>12}K = {n2.K}, realized C = {n2.C_realized:.2f} (bound {n2.C_bound:.0f})")
    cp = C.selfcomm_to_projections(random_contraction(4, rng))
    show("commP", cp.certificate)
    c, d = random_matrix(3, 1, rng), random_matrix(3, 1, rng)
    for n in (100, 400, 1600):
        show(f"exp n={n}", C.exp_commutator_factor(c, d, n))
    b = [np.diag([1j * np.pi, 0]), np.diag([1j * np.pi, 0])]
    print(f"\ne^(i pi e11)^2 in the determinant kernel: {C.dhs_kernel_check(b).in_kernel}")
    print(f"e^(i pi e11) alone: {C.dhs_kernel_check(b[:1]).in_kernel}")


if __name__ == "__main__":
    main()
