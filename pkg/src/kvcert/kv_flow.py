"""Lie series R, S with ``e^{X+Y} = (e^R e^X e^{-R}) (e^S e^Y e^{-S})``.

The flow

    dR/dt = ad_R / (1 - e^{-ad_R}) F_t(X, e^{-ad_R} e^{ad_S} Y)
    dS/dt = ad_S / (1 - e^{-ad_S}) G_t(e^{-ad_S} e^{ad_R} X, Y),   R_0 = S_0 = 0,

with ``F_t = t^{-1} F(tX, tY)`` is homogeneous: ``R_t = sum_n t^n rho_n``.
Substituting collapses the ODE to the recursion
``n rho_n = [RHS at t = 1 built from rho_{<n}, sigma_{<n}]_n``, which is the
primary solver.  A fixed-step RK4 integration of the same ODE in the truncated
algebra serves as an independent check.

The recursion can also run over ``fractions.Fraction`` (``exact=True``); the
resulting rational series is what the high-precision residual sweep uses, since
double-precision coefficients put a floor of roughly ``1e-17 * eps**3`` under
the factorization residual.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from . import bch as _bch
from .free_algebra import (
    GradedSeries,
    LieSeries,
    X as gen_X,
    Y as gen_Y,
    evaluate,
    is_lie,
    scale,
    substitute,
)
from .matrices import adjoint, mat_exp, op_norm

DEFAULT_EVAL_RADIUS = 0.05


class KVFlowError(RuntimeError):
    """The grade recursion produced a non-Lie or non-finite component."""


@dataclass(frozen=True)
class KVSolution:
    R: LieSeries
    S: LieSeries
    split_mode: str
    solver: str

    @property
    def truncation(self) -> int:
        return self.R.truncation

    @property
    def rho(self) -> dict[int, GradedSeries]:
        return {n: self.R.homogeneous(n) for n in self.R.degrees}

    @property
    def sigma(self) -> dict[int, GradedSeries]:
        return {n: self.S.homogeneous(n) for n in self.S.degrees}

    def at_time(self, t: float) -> tuple[GradedSeries, GradedSeries]:
        """``(R_t, S_t) = (sum t^n rho_n, sum t^n sigma_n)``."""
        return scale(self.R, t), scale(self.S, t)

    def to_json_dict(self) -> dict:
        return {"split_mode": self.split_mode, "solver": self.solver,
                "R": self.R.to_json_dict(), "S": self.S.to_json_dict()}

    @classmethod
    def from_json_dict(cls, data) -> "KVSolution":
        R = LieSeries.from_series(GradedSeries.from_json_dict(data["R"]), 1e-9)
        S = LieSeries.from_series(GradedSeries.from_json_dict(data["S"]), 1e-9)
        return cls(R, S, data.get("split_mode", "first-letter"), data.get("solver", "grade-recursion"))


def _time_slice(F: GradedSeries, t: float) -> GradedSeries:
    # F_t = t^{-1} F(tX, tY) = sum t^{n-1} F_n
    return GradedSeries({n: (t ** (n - 1)) * v for n, v in F.items()}, F.truncation)


def flow_rhs(R: GradedSeries, S: GradedSeries, F: GradedSeries, G: GradedSeries,
             N: int) -> tuple[GradedSeries, GradedSeries]:
    """Right-hand side of the R, S flow with the time dependence already folded into F, G."""
    ex = F.exact
    Xg, Yg = gen_X(N, ex), gen_Y(N, ex)
    expo = _bch.standard_operator("exp", N + 1, ex)
    expo_neg = _bch.standard_operator("exp_neg", N + 1, ex)
    flow = _bch.standard_operator("flow", N + 1, ex)
    # e^{-ad R} e^{ad S} Y  and  e^{-ad S} e^{ad R} X
    y_img = expo_neg.apply(R, expo.apply(S, Yg, N), N)
    x_img = expo_neg.apply(S, expo.apply(R, Xg, N), N)
    dR = flow.apply(R, substitute(F, Xg, y_img, N), N)
    dS = flow.apply(S, substitute(G, x_img, Yg, N), N)
    return dR, dS


def solve_rs(N: int, split_mode: str = "first-letter", tol: float = 1e-9,
             exact: bool = False) -> KVSolution:
    """Grade-recursion solution of the R, S flow through degree ``N``.

    With ``exact`` every coefficient is a ``Fraction`` (not available for the
    ``symmetric`` split, which relies on floating-point least squares).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    F, G = _bch.fg_series(max(N, 2), split_mode, exact)
    F, G = F.truncate(N), G.truncate(N)
    rho: dict[int, np.ndarray] = {}
    sigma: dict[int, np.ndarray] = {}
    R = GradedSeries.zero(N)
    S = GradedSeries.zero(N)
    for n in range(1, N + 1):
        dR, dS = flow_rhs(R.truncate(n), S.truncate(n), F.truncate(n), G.truncate(n), n)
        rho[n] = dR.component(n) / n
        sigma[n] = dS.component(n) / n
        for name, vec in (("R", rho[n]), ("S", sigma[n])):
            if not exact and not np.all(np.isfinite(vec)):
                raise KVFlowError(f"non-finite degree-{n} component of {name}")
            dev = is_lie(GradedSeries({n: vec}, N), tol).deviations.get(n, 0.0)
            if dev > tol:
                raise KVFlowError(f"degree-{n} component of {name} is not Lie (deviation {dev:.3e})")
        R = GradedSeries(rho, N)
        S = GradedSeries(sigma, N)
    return KVSolution(LieSeries.from_series(R, tol), LieSeries.from_series(S, tol),
                      split_mode, "grade-recursion")


@dataclass
class ODECheck:
    steps: int
    deviation_R: dict
    deviation_S: dict
    homogeneity: dict = field(default_factory=dict)   # alpha -> {degree: deviation}

    @property
    def max_deviation(self) -> float:
        vals = list(self.deviation_R.values()) + list(self.deviation_S.values())
        return max(vals, default=0.0)

    @property
    def max_homogeneity(self) -> float:
        return max((d for devs in self.homogeneity.values() for d in devs.values()), default=0.0)


@lru_cache(maxsize=16)
def integrate_rs(N: int, split_mode: str = "first-letter", steps: int = 1000,
                 record: tuple = (0.25, 0.5)) -> dict[float, tuple[GradedSeries, GradedSeries]]:
    """Classical RK4 on [0, 1] in the truncated algebra; returns states at ``record`` and 1.

    Results are cached (series are immutable); do not mutate the returned dict.
    """
    if steps < 10:
        raise ValueError("need at least 10 steps")
    F, G = _bch.fg_series(max(N, 2), split_mode)
    F, G = F.truncate(N), G.truncate(N)
    h = 1.0 / steps
    marks = {int(round(a * steps)): a for a in record if abs(a * steps - round(a * steps)) < 1e-9}
    R = GradedSeries.zero(N)
    S = GradedSeries.zero(N)
    out = {}

    def rhs(t, R, S):
        return flow_rhs(R, S, _time_slice(F, t), _time_slice(G, t), N)

    for k in range(steps):
        t = k * h
        k1 = rhs(t, R, S)
        k2 = rhs(t + h / 2, R + (h / 2) * k1[0], S + (h / 2) * k1[1])
        k3 = rhs(t + h / 2, R + (h / 2) * k2[0], S + (h / 2) * k2[1])
        k4 = rhs(t + h, R + h * k3[0], S + h * k3[1])
        R = R + (h / 6) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        S = S + (h / 6) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if k + 1 in marks:
            out[marks[k + 1]] = (R, S)
    out[1.0] = (R, S)
    return out


def _per_degree(a: GradedSeries, b: GradedSeries, N: int) -> dict[int, float]:
    norms = (a - b).grade_norms()
    return {n: norms.get(n, 0.0) for n in range(1, N + 1)}


def ode_crosscheck(sol: KVSolution, steps: int = 1000, alphas=(0.25, 0.5)) -> ODECheck:
    """Compare the recursion against RK4 integration, and check ``lambda_a R_1 = R_a``."""
    N = sol.truncation
    states = integrate_rs(N, sol.split_mode, steps, record=tuple(alphas))
    R1, S1 = states[1.0]
    check = ODECheck(steps, _per_degree(R1, sol.R, N), _per_degree(S1, sol.S, N))
    for a, (Ra, Sa) in states.items():
        Rs, Ss = sol.at_time(a)
        devR = _per_degree(Ra, Rs, N)
        devS = _per_degree(Sa, Ss, N)
        check.homogeneity[a] = {n: max(devR[n], devS[n]) for n in devR}
    return check


@dataclass(frozen=True)
class RSDecomposition:
    lead_R: GradedSeries
    R1: LieSeries
    R2: LieSeries
    lead_S: GradedSeries
    S1: LieSeries
    S2: LieSeries
    residual_R: float
    residual_S: float

    def lead_coefficients(self) -> dict:
        return {"R": {w: c for w, c in self.lead_R.terms()},
                "S": {w: c for w, c in self.lead_S.terms()}}


def rs_decompose(sol: KVSolution, mode: str = "first-letter") -> RSDecomposition:
    """``R = lead_R + [X, R'] + [Y, R'']`` and likewise for S."""
    if sol.truncation < 2:
        raise ValueError("need a solution with N >= 2")
    dR = _bch.halfhalf_decompose(sol.R, mode)
    dS = _bch.halfhalf_decompose(sol.S, mode)
    return RSDecomposition(dR.Z1, dR.P, dR.Q, dS.Z1, dS.P, dS.Q, dR.max_residual, dS.max_residual)


# ---------------------------------------------------------------------------
# matrix verification
# ---------------------------------------------------------------------------

def _check_pair(Xm, Ym):
    Xm = np.asarray(Xm, dtype=complex)
    Ym = np.asarray(Ym, dtype=complex)
    if Xm.shape != Ym.shape or Xm.ndim != 2 or Xm.shape[0] != Xm.shape[1]:
        raise ValueError(f"dimension mismatch: {Xm.shape} vs {Ym.shape}")
    return Xm, Ym


def verify_factorization(sol: KVSolution, Xm, Ym) -> float:
    """``||e^{X+Y} - e^R e^X e^{-R} e^S e^Y e^{-S}||`` in double precision."""
    Xm, Ym = _check_pair(Xm, Ym)
    Rm = evaluate(sol.R, Xm, Ym)
    Sm = evaluate(sol.S, Xm, Ym)
    prod = (mat_exp(Rm) @ mat_exp(Xm) @ mat_exp(-Rm)
            @ mat_exp(Sm) @ mat_exp(Ym) @ mat_exp(-Sm))
    return op_norm(mat_exp(Xm + Ym) - prod)


def _to_mp(a) -> mpmath.matrix:
    a = np.asarray(a)
    return mpmath.matrix([[mpmath.mpmathify(a[i, j]) for j in range(a.shape[1])]
                          for i in range(a.shape[0])])


def _mp_object_array(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    out = np.empty(a.shape, dtype=object)
    for idx in np.ndindex(a.shape):
        out[idx] = mpmath.mpc(a[idx])
    return out


def _mp_scalar(c):
    if isinstance(c, Fraction):
        return mpmath.mpf(c.numerator) / c.denominator
    return mpmath.mpmathify(c)


def to_multiprecision(p: GradedSeries) -> GradedSeries:
    """Copy of ``p`` with mpmath entries at the current working precision."""
    conv = np.vectorize(_mp_scalar, otypes=[object])
    return GradedSeries({n: conv(v) for n, v in p.items()}, p.truncation)


def verify_factorization_mp(sol: KVSolution, Xm, Ym, dps: int = 60) -> float:
    """Same residual with every product and exponential carried out in ``dps`` digits.

    Pass a solution from ``solve_rs(..., exact=True)`` to also remove the
    rounding of the series coefficients; with a double-precision solution the
    residual floors near ``1e-17 * eps**3``.
    """
    Xm, Ym = _check_pair(Xm, Ym)
    with mpmath.workdps(dps):
        Xo, Yo = _mp_object_array(Xm), _mp_object_array(Ym)
        Rm = _to_mp(evaluate(to_multiprecision(sol.R), Xo, Yo))
        Sm = _to_mp(evaluate(to_multiprecision(sol.S), Xo, Yo))
        Xp, Yp = _to_mp(Xo), _to_mp(Yo)
        e = mpmath.expm
        prod = e(Rm) * e(Xp) * e(-Rm) * e(Sm) * e(Yp) * e(-Sm)
        diff = e(Xp + Yp) - prod
        d = np.array(diff.tolist(), dtype=complex)
        return op_norm(d) if np.any(d) else float(mpmath.mnorm(diff, 1))


@dataclass
class ConvergenceSweep:
    radii: list
    residuals: list           # one list of residuals per radius (over directions)
    slope: float

    def to_json_dict(self) -> dict:
        return {"radii": self.radii, "residuals": self.residuals, "slope": self.slope}


def fit_loglog_slope(radii, values) -> float:
    x = np.log(np.asarray(radii, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def convergence_sweep(sol: KVSolution, directions, radii=(0.04, 0.02, 0.01, 0.005),
                      dps: int = 60) -> ConvergenceSweep:
    """Residual vs radius along fixed unit-norm directions ``[(X, Y), ...]``.

    The slope is fitted to the per-radius mean residual.
    """
    table = []
    for r in radii:
        row = []
        for Xd, Yd in directions:
            Xm = Xd * (r / op_norm(Xd))
            Ym = Yd * (r / op_norm(Yd))
            row.append(verify_factorization_mp(sol, Xm, Ym, dps))
        table.append(row)
    means = [float(np.mean(row)) for row in table]
    return ConvergenceSweep(list(radii), table, fit_loglog_slope(radii, means))


def skew_deviation(a: np.ndarray) -> float:
    """``||a + a^*||``: zero exactly for skew-adjoint ``a``."""
    return op_norm(a + adjoint(a))
