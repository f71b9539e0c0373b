"""The twelve acceptance criteria as runnable checks.

Each criterion draws its instances from its own child of one seed, so
criteria can run alone or in any order with identical results.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bch as B
from . import constructions as C
from . import free_algebra as FA
from . import kv_flow as KV
from .matrices import (
    adjoint,
    make_rng,
    mat_exp,
    mat_log,
    op_norm,
    random_contraction,
    random_gaussian,
    random_matrix,
    random_skew,
    random_square_zero,
    split_seeds,
)
from .verifier import verify_certificate


@dataclass
class Check:
    name: str
    measured: float
    threshold: float
    passed: bool
    identity: str = ""
    note: str = ""

    def to_json_dict(self) -> dict:
        return {"name": self.name, "measured": _jsonable(self.measured), "threshold": self.threshold,
                "pass": bool(self.passed), "identity": self.identity, "note": self.note}


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def at_most(name, measured, threshold, identity="", note="") -> Check:
    return Check(name, float(measured), threshold, bool(measured <= threshold), identity, note)


def at_least(name, measured, threshold, identity="", note="") -> Check:
    return Check(name, float(measured), threshold, bool(measured >= threshold), identity, note)


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary_line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] criterion {self.number:2d}: {self.title} ({self.elapsed:.1f} s)"

    def to_json_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "pass": self.passed,
                "elapsed_s": self.elapsed, "checks": [c.to_json_dict() for c in self.checks],
                "info": self.info}


def _rng(seed, k: int):
    return make_rng(split_seeds(seed, 12)[k - 1])


def _skew_pair(dim, radius, rng):
    return random_skew(dim, radius, rng), random_skew(dim, radius, rng)


# ---------------------------------------------------------------------------

def criterion_1(seed=0, degree=8) -> CriterionResult:
    """BCH series against the matrix logarithm at N = 10, and grades 2 and 3."""
    out = CriterionResult(1, "BCH series: matrix oracle at N=10, grades 2 and 3")
    rng = _rng(seed, 1)
    N = 10
    V = B.bch_series(N)
    worst = 0.0
    for _ in range(50):
        total = rng.uniform(0.05, 0.3)
        frac = rng.uniform(0.1, 0.9)
        Xm = random_matrix(4, total * frac, rng)
        Ym = random_matrix(4, total * (1 - frac), rng)
        ref = mat_log(mat_exp(Xm) @ mat_exp(Ym))
        worst = max(worst, op_norm(FA.evaluate(V, Xm, Ym) - ref))
    out.checks.append(at_most("max ||V(X,Y) - log(e^X e^Y)||, 50 pairs", worst, 1e-8,
                              "log(e^X e^Y) = V(X, Y)"))
    Xg, Yg = FA.X(N), FA.Y(N)
    g2 = 0.5 * FA.bracket(Xg, Yg)
    g3 = (1 / 12) * FA.bracket(Xg, FA.bracket(Xg, Yg)) + (1 / 12) * FA.bracket(Yg, FA.bracket(Yg, Xg))
    V2 = FA.dsw_project(V.homogeneous(2))
    V3 = FA.dsw_project(V.homogeneous(3))
    out.checks.append(at_most("grade 2 minus [X,Y]/2 (l1)", (V2 - g2).l1_norm(), 1e-12))
    out.checks.append(at_most("grade 3 minus ([X,[X,Y]] + [Y,[Y,X]])/12 (l1)", (V3 - g3).l1_norm(), 1e-12))
    return out


def criterion_2(seed=0, degree=8) -> CriterionResult:
    """e^x e^y = e^{x + y + [x, a] + [y, b]} on matrices."""
    out = CriterionResult(2, "KVeasy residual and skew-adjoint a, b")
    rng = _rng(seed, 2)
    N = degree
    A, Bs = B.kveasy_ab(N)
    worst = skew = 0.0
    for trial in range(50):
        if trial % 2:
            Xm, Ym = _skew_pair(4, 0.04, rng)
        else:
            Xm, Ym = random_matrix(4, 0.04, rng), random_matrix(4, 0.04, rng)
        a = FA.evaluate(A, Xm, Ym)
        b = FA.evaluate(Bs, Xm, Ym)
        expo = Xm + Ym + Xm @ a - a @ Xm + Ym @ b - b @ Ym
        worst = max(worst, op_norm(mat_exp(Xm) @ mat_exp(Ym) - mat_exp(expo)))
        if trial % 2:
            skew = max(skew, KV.skew_deviation(a), KV.skew_deviation(b))
    out.checks.append(at_most("max residual, 50 trials, radius 0.04", worst, 1e-9,
                              "e^{x}e^y=e^{x+y+[x,a]+[y,b]}"))
    out.checks.append(at_most("max ||a + a^*||, ||b + b^*|| on skew inputs", skew, 1e-10,
                              "if x and y are skewadjoint then so are a and b"))
    out.checks.append(at_most("formal residual V - X - Y - [X,A] - [Y,B]",
                              max(B.kveasy_residuals(N).values()), 1e-10))
    return out


def criterion_3(seed=0, degree=8) -> CriterionResult:
    out = CriterionResult(3, "first Kashiwara-Vergne equation, every split mode")
    for mode in B.SPLIT_MODES:
        rep = B.kv1_check(degree, mode)
        out.checks.append(at_most(f"max per-grade residual ({mode})", rep.max_residual, 1e-9,
                                  "V(Y,X) = X + Y - (1-e^{-ad X}) F - (e^{ad Y}-1) G"))
    return out


def criterion_4(seed=0, degree=8, ode_steps=1000) -> CriterionResult:
    out = CriterionResult(4, "KVhard factorization, convergence order, ODE and homogeneity")
    rng = _rng(seed, 4)
    sol = KV.solve_rs(degree)
    worst = 0.0
    for _ in range(50):
        Xm, Ym = _skew_pair(4, 0.02, rng)
        worst = max(worst, KV.verify_factorization(sol, Xm, Ym))
    ident = "e^{x+y}=(e^Re^xe^{-R})(e^Se^ye^{-S})"
    out.checks.append(at_most("max residual, 50 skew pairs at radius 0.02", worst, 1e-9, ident))
    exact = KV.solve_rs(degree, exact=True)
    dirs = [_skew_pair(4, 1.0, rng) for _ in range(3)]
    sweep = KV.convergence_sweep(exact, dirs)
    out.info["sweep"] = sweep.to_json_dict()
    out.checks.append(at_least("log-log slope over radii 0.04..0.005", sweep.slope, degree + 0.5, ident,
                               "rational coefficients, 60-digit evaluation"))
    check = KV.ode_crosscheck(sol, ode_steps)
    out.checks.append(at_most(f"max per-grade |recursion - RK4|, {ode_steps} steps",
                              check.max_deviation, 1e-7))
    out.checks.append(at_most("homogeneity at alpha = 1/2 (per grade)",
                              max(check.homogeneity[0.5].values()), 1e-8,
                              "lambda_a R_t = R_{a t}"))
    return out


def criterion_5(seed=0, degree=8) -> CriterionResult:
    out = CriterionResult(5, "structure R = lead + [X,R'] + [Y,R''], skew-adjointness")
    rng = _rng(seed, 5)
    sol = KV.solve_rs(degree)
    dec = KV.rs_decompose(sol)
    out.checks.append(at_most("decomposition residual of R and S",
                              max(dec.residual_R, dec.residual_S), 1e-10))
    states = KV.integrate_rs(min(degree, 4), "first-letter", 100, (0.5,))
    ode_R1, ode_S1 = states[1.0]
    lead_gap = max((ode_R1.homogeneous(1) - dec.lead_R).l1_norm(),
                   (ode_S1.homogeneous(1) - dec.lead_S).l1_norm())
    out.info["lead"] = {k: {w: [c.real, c.imag] for w, c in v.items()}
                        for k, v in dec.lead_coefficients().items()}
    out.checks.append(at_most("grade-1 coefficients, recursion vs ODE", lead_gap, 1e-12,
                              "R = Y/4 + ..."))
    worst = 0.0
    for _ in range(50):
        Xm, Ym = _skew_pair(4, 0.05, rng)
        for p in (sol.R, sol.S, dec.R1, dec.R2, dec.S1, dec.S2):
            worst = max(worst, KV.skew_deviation(FA.evaluate(p, Xm, Ym)))
    out.checks.append(at_most("max ||Z + Z^*|| over R, R', R'', S, S', S''", worst, 1e-9,
                              "R, R', R'', S, S', and S'' are all skewadjoints"))
    return out


def criterion_6(seed=0, degree=8) -> CriterionResult:
    out = CriterionResult(6, "1 + x as a commutator of commutators")
    rng = _rng(seed, 6)
    worst = 0.0
    invariant_failures = 0
    verifier_failures = 0
    for _ in range(100):
        dim = int(rng.integers(2, 9))
        x = random_square_zero(dim, rng.uniform(0.1, 4.0), rng)
        cert = C.unipotent_factor(x)
        worst = max(worst, cert.residual)
        invariant_failures += sum(len(C.atom_invariant_failures(a)) for a in cert.atoms)
        verifier_failures += not verify_certificate(cert.to_json_dict()).ok
    ident = "1+x=(u,v)"
    out.checks.append(at_most("max certificate residual, 100 instances", worst, 1e-9, ident))
    out.checks.append(at_most("atom invariant failures", invariant_failures, 0))
    out.checks.append(at_most("independent verifier rejections", verifier_failures, 0))
    b = C.unipotent_blocks(1.0)
    U, L = b["U"], b["L"]
    got = U @ L @ np.linalg.inv(U) @ np.linalg.inv(L)
    out.checks.append(at_most("2x2 identity at t = 1", op_norm(got - b["D"]), 1e-10,
                              "diag(g, 1/g) = ([[g^1/2, h], [0, g^-1/2]], [[g^-1/2, 0], [h, g^1/2]])"))
    return out


def criterion_7(seed=0, degree=8) -> CriterionResult:
    out = CriterionResult(7, "[x, r] as four square-zero terms plus a conjugate of x")
    rng = _rng(seed, 7)
    recon = sq = ratio = conj = 0.0
    for _ in range(100):
        dim = int(rng.integers(2, 7))
        x = random_square_zero(dim, rng.uniform(1.0, 4.0), rng)
        r = random_matrix(dim, 1.0, rng)
        res = C.sumof5(C.n2c_witness(x), r)
        recon = max(recon, res.certificate.residual)
        sq = max(sq, max(C.square_zero_defect(z) for z in res.z))
        ratio = max(ratio, max(res.norm_ratios(x, r)))
        conj = max(conj, op_norm(res.certificate.atoms[4].inner.z - x))
    ident = "[x,r]=z_1+z_2+z_3+z_4+(1+z_5)x(1-z_5)"
    out.checks.append(at_most("max reconstruction residual", recon, 1e-10, ident))
    out.checks.append(at_most("max ||z_i^2||", sq, 1e-10))
    out.checks.append(at_most("max ||z_i|| / (||x|| ||r||)", ratio, 1 + 1e-8, "||z_i|| <= ||x|| ||r||"))
    out.checks.append(at_most("conjugated element minus x", conj, 1e-12))
    return out


def criterion_8(seed=0, degree=8) -> CriterionResult:
    out = CriterionResult(8, "[c, d] as a sum of square-zero elements")
    rng = _rng(seed, 8)
    worst = sq = 0.0
    Ks, Cs, bounds = set(), [], []
    for _ in range(100):
        c = random_matrix(3, 1.0, rng)
        d = random_matrix(3, 1.0, rng)
        res = C.commutator_to_squarezeros(c, d)
        worst = max(worst, res.certificate.residual)
        sq = max(sq, max(C.square_zero_defect(y) for y in res.certificate.summands()))
        Ks.add(res.K)
        Cs.append(res.C_realized)
        bounds.append(res.C_bound)
    out.info.update({"K": sorted(Ks), "C_realized_max": max(Cs), "C_bound": max(bounds)})
    ident = "[c,d]=\\sum_{i=1}^K y_i"
    out.checks.append(at_most("max ||sum y_i - [c,d]||", worst, 1e-9, ident))
    out.checks.append(at_most("max ||y_i^2||", sq, 1e-10))
    out.checks.append(at_most("distinct K values across trials", len(Ks), 1))
    out.checks.append(at_most("realized C minus structural bound", max(Cs) - min(bounds), 0.0,
                              "||y_i|| <= C ||c|| ||d||", f"C_realized = {max(Cs):.4g}"))
    return out


def criterion_9(seed=0, degree=8) -> CriterionResult:
    out = CriterionResult(9, "[c^*, c] as a signed sum of projections")
    rng = _rng(seed, 9)
    p = np.diag([1.0, 1.0, 0.0, 0.0]).astype(complex)
    worst = proj = 0.0
    Ks = set()
    for _ in range(100):
        res = C.selfcomm_to_projections(random_contraction(4, rng), p)
        worst = max(worst, res.certificate.residual)
        proj = max(proj, max(C.projection_defect(a.p) for a in res.certificate.atoms))
        Ks.add(res.K)
    out.info["K"] = sorted(Ks)
    out.checks.append(at_most("max ||sum eps_i p_i - [c^*,c]||", worst, 1e-9,
                              "[c^*,c]=\\sum_{i=1}^K \\epsilon_ip_i"))
    out.checks.append(at_most("max projection defect", proj, 1e-10))
    qdef = split = 0.0
    one = np.eye(4)
    for _ in range(100):
        g = random_gaussian(4, rng)
        r = (g - adjoint(g)) / 2
        r = r * (rng.uniform(0.1, 1.0) / op_norm(r))
        x = p @ r @ (one - p)
        q_plus, q_minus = C.q_projection(p, x), C.q_projection(p, -x)
        qdef = max(qdef, C.projection_defect(q_plus), C.projection_defect(q_minus))
        split = max(split, op_norm(q_plus - q_minus - (p @ r - r @ p)))
    out.checks.append(at_most("q(x) projection defect, direct", qdef, 1e-11, "q(x) is a projection"))
    out.checks.append(at_most("||q(x) - q(-x) - [p,r]||", split, 1e-11, "[p,r]=q(x)-q(-x)"))
    out.checks.append(at_most("distinct K values across trials", len(Ks), 1))
    return out


def criterion_10(seed=0, degree=8) -> CriterionResult:
    out = CriterionResult(10, "Trotter rate and e^{[c,d]} as a product of commutators")
    rng = _rng(seed, 10)
    e12 = np.array([[0, 1], [0, 0]], dtype=complex)
    cases = [(e12, e12.T.copy())] + [(random_matrix(3, 1.0, rng), random_matrix(3, 1.0, rng))
                                     for _ in range(3)]
    ns = (400, 800, 1600, 3200)
    lo, hi, det_dev, rejected = math.inf, -math.inf, 0.0, 0
    for c, d in cases:
        rate = C.trotter_rate(c, d, ns)
        tail = rate["ratios"][-2:]
        lo, hi = min(lo, *tail), max(hi, *tail)
        for n in ns:
            cert = C.exp_commutator_factor(c, d, n)
            v = verify_certificate(cert.to_json_dict())
            rejected += not v.ok
            det_dev = max(det_dev, abs(v.det - 1))
    ident = "(he^{a/n}h^{-1}e^{-a/n})^n=(h,e^{a/n})^n"
    out.info["ratio_range"] = [lo, hi]
    out.checks.append(at_least("min residual ratio per doubling (asymptotic)", lo, 0.4, ident))
    out.checks.append(at_most("max residual ratio per doubling (asymptotic)", hi, 0.65, ident))
    out.checks.append(at_most("certificates rejected by the verifier", rejected, 0))
    out.checks.append(at_most("max |det(product) - 1|", det_dev, 1e-10))
    return out


def criterion_11(seed=0, degree=8) -> CriterionResult:
    out = CriterionResult(11, "de la Harpe-Skandalis kernel test on M_n")
    rng = _rng(seed, 11)
    disagreements = 0
    kernel_count = 0
    for trial in range(50):
        dim = int(rng.integers(2, 6))
        bs = [random_matrix(dim, rng.uniform(0.2, 2.0), rng) for _ in range(int(rng.integers(1, 5)))]
        if trial % 2 == 0:
            # shift one trace so the total lands on 2 pi i k
            k = int(rng.integers(-2, 3))
            tr = sum(np.trace(b) for b in bs)
            bs[0] = bs[0] + ((2j * math.pi * k - tr) / dim) * np.eye(dim)
        res = C.dhs_kernel_check(bs)
        kernel_count += res.in_kernel
        disagreements += res.in_kernel != (abs(res.det - 1) <= 1e-9)
    out.info["in_kernel"] = kernel_count
    out.checks.append(at_most("verdict disagreements with |det - 1| <= 1e-9", disagreements, 0,
                              "kernel of the de la Harpe-Skandalis determinant"))
    return out


def criterion_12(seed=0, degree=8) -> CriterionResult:
    out = CriterionResult(12, "free-algebra property suite")
    rng = _rng(seed, 12)
    N = 6
    cases = 0

    def rand_series(max_deg=N):
        comps = {n: rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
                 for n in range(1, max_deg + 1) if rng.uniform() < 0.7}
        return FA.GradedSeries(comps, N)

    def rand_bracket(n):
        if n == 1:
            return FA.X(N) if rng.uniform() < 0.5 else FA.Y(N)
        k = int(rng.integers(1, n))
        return FA.bracket(rand_bracket(k), rand_bracket(n - k))

    idem = amp = jac = hom = scal = 0.0
    for _ in range(250):
        b = rand_bracket(int(rng.integers(1, N + 1)))
        idem = max(idem, (FA.dsw_project(b) - b).l1_norm())
        cases += 1
    for _ in range(250):
        n = int(rng.integers(1, N + 1))
        vec = rng.standard_normal(2 ** n)
        ratio = np.abs(FA.right_nested(vec) / n).sum() / np.abs(vec).sum()
        amp = max(amp, ratio / 2 ** n)
        cases += 1
    Xg, Yg = FA.X(N), FA.Y(N)
    for _ in range(200):
        p = rand_series(N - 2)
        j = (FA.bracket(Xg, FA.bracket(Yg, p)) + FA.bracket(Yg, FA.bracket(p, Xg))
             + FA.bracket(p, FA.bracket(Xg, Yg)))
        jac = max(jac, j.l1_norm())
        cases += 1
    for _ in range(200):
        p, q = rand_series(3), rand_series(3)
        U, V = random_contraction(4, rng), random_contraction(4, rng)
        lhs = FA.evaluate(FA.multiply(p, q), U, V)
        rhs = FA.evaluate(p, U, V) @ FA.evaluate(q, U, V)
        hom = max(hom, op_norm(lhs - rhs))
        cases += 1
    for _ in range(200):
        p = rand_series()
        s, t = rng.uniform(-2, 2), rng.uniform(-2, 2)
        ref, got = FA.scale(p, s * t), FA.scale(FA.scale(p, s), t)
        for n, v in ref.items():
            scal = max(scal, np.abs(got.component(n) - v).max() / np.abs(v).max())
        cases += 1
    out.checks.append(at_most("DSW idempotence on brackets (l1)", idem, 1e-12))
    out.checks.append(at_most("DSW amplification / 2^n", amp, 1.0, "||nu_n|| <= 2^n"))
    out.checks.append(at_most("Jacobi identity (l1)", jac, 1e-12))
    out.checks.append(at_most("evaluation homomorphism", hom, 1e-10))
    out.checks.append(at_most("scaling homogeneity (coefficientwise, relative)", scal, 1e-15))
    out.checks.append(at_least("randomized cases", cases, 1000))
    return out


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run_criterion(k: int, seed=0, degree=8) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[k](seed=seed, degree=degree)
    res.elapsed = time.perf_counter() - t0
    return res


def run_acceptance(seed=0, degree=8, only=None) -> list[CriterionResult]:
    return [run_criterion(k, seed, degree) for k in (only or sorted(CRITERIA))]
