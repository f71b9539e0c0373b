"""Formal exp/log, the BCH series and the Kashiwara-Vergne series F, G.

Everything here lives in the truncated free algebra of
:mod:`kvcert.free_algebra`.  The BCH series is obtained as
``log(exp(X) exp(Y))`` computed formally.  It is split as
``V = X + Y + [X, A] + [Y, B]``, and
``F = ad_X/(e^{-ad_X} - 1) B(Y, X)``, ``G = ad_Y/(1 - e^{ad_Y}) A(Y, X)``,
which satisfy

    V(Y, X) = X + Y - (1 - e^{-ad_X}) F - (e^{ad_Y} - 1) G.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.linalg

from .free_algebra import (
    GradedSeries,
    LieSeries,
    X as gen_X,
    Y as gen_Y,
    _ad_letter_batch,
    bracket,
    is_lie,
    multiply,
    right_nested,
)

SPLIT_MODES = ("first-letter", "symmetric", "shifted")


# ---------------------------------------------------------------------------
# univariate power series used as functions of ad
# ---------------------------------------------------------------------------

def _dtype(exact: bool):
    return object if exact else float


def exp_coefficients(n_terms: int, sign: int = 1, exact: bool = False) -> np.ndarray:
    """Taylor coefficients of ``exp(sign * t)`` (``Fraction`` entries when ``exact``)."""
    if exact:
        return np.array([Fraction(sign ** k, math.factorial(k)) for k in range(n_terms)], dtype=object)
    return np.array([sign ** k / math.factorial(k) for k in range(n_terms)], dtype=float)


def series_reciprocal(coeffs, n_terms: int) -> np.ndarray:
    """Coefficients of ``1 / c(t)`` by formal division; needs ``c_0 != 0``.

    Keeps the dtype of ``coeffs`` (object arrays of ``Fraction`` stay exact).
    """
    given = np.asarray(coeffs)
    exact = given.dtype == object
    c = np.zeros(n_terms, dtype=_dtype(exact))
    given = given[:n_terms]
    c[: len(given)] = given
    if c[0] == 0:
        raise ZeroDivisionError("constant term of the divisor is zero")
    b = np.zeros(n_terms, dtype=_dtype(exact))
    b[0] = (Fraction(1) if exact else 1.0) / c[0]
    for k in range(1, n_terms):
        b[k] = -np.dot(c[1: k + 1], b[k - 1:: -1][:k]) / c[0]
    return b


def divided_exp_minus_one(n_terms: int, sign: int = 1, exact: bool = False) -> np.ndarray:
    """Coefficients of ``(e^{sign t} - 1) / t``."""
    return exp_coefficients(n_terms + 1, sign, exact)[1: n_terms + 1]


@dataclass(frozen=True)
class AdOperatorSeries:
    """Power series ``phi(t) = sum c_k t^k`` acting as ``phi(ad_W)``."""

    coeffs: tuple
    name: str = ""

    @classmethod
    def from_array(cls, arr, name=""):
        arr = np.asarray(arr)
        if arr.dtype == object:
            return cls(tuple(Fraction(c) for c in arr), name)
        return cls(tuple(float(c) for c in arr), name)

    def apply(self, center: GradedSeries, target: GradedSeries, N: int | None = None) -> GradedSeries:
        if N is None:
            N = min(center.truncation, target.truncation)
        out = self.coeffs[0] * target.truncate(N)
        term = target.truncate(N)
        for c in self.coeffs[1:]:
            term = bracket(center, term, N)
            if term.is_zero():
                break
            if c:
                out = out + c * term
        return out


@lru_cache(maxsize=None)
def standard_operator(kind: str, n_terms: int, exact: bool = False) -> AdOperatorSeries:
    """Named operator series used by the KV machinery.

    ``f_op``      t / (e^{-t} - 1)      builds F from B(Y, X)
    ``g_op``      t / (1 - e^{t})       builds G from A(Y, X)
    ``flow``      t / (1 - e^{-t})      inverse of the dexp factor in the R, S flow
    ``exp``       e^t
    ``exp_neg``   e^{-t}
    ``one_minus_exp_neg``  1 - e^{-t}
    ``exp_minus_one``      e^{t} - 1

    With ``exact`` the coefficients are ``Fraction`` objects.
    """
    if kind == "f_op":
        arr = series_reciprocal(divided_exp_minus_one(n_terms, -1, exact), n_terms)
    elif kind == "g_op":
        arr = -series_reciprocal(divided_exp_minus_one(n_terms, 1, exact), n_terms)
    elif kind == "flow":
        arr = series_reciprocal(-divided_exp_minus_one(n_terms, -1, exact), n_terms)
    elif kind == "exp":
        arr = exp_coefficients(n_terms, 1, exact)
    elif kind == "exp_neg":
        arr = exp_coefficients(n_terms, -1, exact)
    elif kind == "one_minus_exp_neg":
        arr = -exp_coefficients(n_terms, -1, exact)
        arr[0] = 0
    elif kind == "exp_minus_one":
        arr = exp_coefficients(n_terms, 1, exact)
        arr[0] = 0
    else:
        raise KeyError(kind)
    return AdOperatorSeries.from_array(arr, kind)


# ---------------------------------------------------------------------------
# formal exponential and logarithm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpElement:
    """``unit_coeff * 1 + body`` in the unitization of the truncated algebra."""

    unit_coeff: complex
    body: GradedSeries

    def __mul__(self, other: "ExpElement") -> "ExpElement":
        if not isinstance(other, ExpElement):
            return NotImplemented
        body = (other.unit_coeff * self.body + self.unit_coeff * other.body
                + multiply(self.body, other.body))
        return ExpElement(self.unit_coeff * other.unit_coeff, body)


def formal_exp(b: GradedSeries, N: int | None = None) -> ExpElement:
    """``1 + sum_{k>=1} b^k / k!`` truncated at ``N``."""
    N = b.truncation if N is None else N
    b = b.truncate(N)
    body = GradedSeries.zero(N)
    term = b
    for k in range(1, N + 1):
        if term.is_zero():
            break
        body = body + term / math.factorial(k)
        term = multiply(term, b, N)
    return ExpElement(1, body)


def formal_log(e: ExpElement, N: int | None = None) -> GradedSeries:
    """``sum_{k>=1} (-1)^{k+1} z^k / k`` for ``e = 1 + z``."""
    if not np.isclose(e.unit_coeff, 1.0, rtol=0, atol=1e-14):
        raise ValueError(f"formal_log needs unit coefficient 1, got {e.unit_coeff}")
    z = e.body if N is None else e.body.truncate(N)
    N = z.truncation
    out = GradedSeries.zero(N)
    term = z
    for k in range(1, N + 1):
        if term.is_zero():
            break
        out = out + ((-1) ** (k + 1)) * term / k
        term = multiply(term, z, N)
    return out


def bch(p: GradedSeries, q: GradedSeries, N: int | None = None) -> GradedSeries:
    """``log(exp(p) exp(q))`` in the truncated algebra."""
    if N is None:
        N = min(p.truncation, q.truncation)
    return formal_log(formal_exp(p, N) * formal_exp(q, N), N)


@lru_cache(maxsize=None)
def bch_series(N: int, exact: bool = False) -> LieSeries:
    """The BCH series ``V(X, Y)`` through degree ``N`` (rational coefficients when ``exact``)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return LieSeries.from_series(bch(gen_X(N, exact), gen_Y(N, exact), N), tol=1e-10)


# ---------------------------------------------------------------------------
# Z = Z_1 + [X, P] + [Y, Q]
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HalfHalf:
    Z1: GradedSeries
    P: LieSeries
    Q: LieSeries
    residuals: dict
    mode: str
    normalization: str

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


_NORMALIZATION = {
    "first-letter": ("Z_n = X P_n + Y Q_n by first letter; "
                     "P = sum_n (1/n) rho(P_n) with rho the right-nested bracketing "
                     "(rho = (n-1) * DSW projector in degree n-1)"),
    "symmetric": ("per degree and bidegree, the minimum-l2-norm pair (P_n, Q_n) of Lie elements "
                  "with [X, P_n] + [Y, Q_n] = Z_n"),
    "shifted": ("first-letter split plus the kernel pair (-c/2 Y, -c/2 X) in degree 1, "
                "c = Y-coefficient of the first-letter P_1; [X, Y] + [Y, X] = 0 keeps the sum fixed"),
}


@lru_cache(maxsize=None)
def _lie_basis(m: int, n_y: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the degree-m Lie elements with ``n_y`` letters Y.

    Returns ``(indices, basis)`` where ``basis`` has rows = ``indices``.
    """
    idx = np.array([i for i in range(2 ** m) if bin(i).count("1") == n_y], dtype=int)
    if idx.size == 0:
        return idx, np.zeros((0, 0))
    cols = []
    for i in idx:
        e = np.zeros(2 ** m, dtype=complex)
        e[i] = 1.0
        cols.append(right_nested(e)[idx])
    D = np.array(cols).T
    basis = scipy.linalg.orth(D, rcond=1e-10) if np.any(D) else np.zeros((idx.size, 0))
    return idx, basis


def _bracket_with_letter(vecs: np.ndarray, letter: int) -> np.ndarray:
    # vecs: (2**m, k) columns -> (2**(m+1), k)
    return _ad_letter_batch(vecs.T, letter).T


def _min_norm_split(Zn: np.ndarray, n: int):
    m = n - 1
    P = np.zeros(2 ** m, dtype=complex)
    Q = np.zeros(2 ** m, dtype=complex)
    popcount = np.array([bin(i).count("1") for i in range(2 ** n)])
    for b in range(n + 1):
        rows = np.flatnonzero(popcount == b)
        target = Zn[rows]
        if not np.any(np.abs(target) > 0):
            continue
        blocks = []
        idx_p, basis_p = _lie_basis(m, b) if b <= m else (np.array([], int), np.zeros((0, 0)))
        idx_q, basis_q = _lie_basis(m, b - 1) if b >= 1 else (np.array([], int), np.zeros((0, 0)))
        if basis_p.size:
            full = np.zeros((2 ** m, basis_p.shape[1]), dtype=complex)
            full[idx_p] = basis_p
            blocks.append(_bracket_with_letter(full, 0)[rows])
        if basis_q.size:
            full = np.zeros((2 ** m, basis_q.shape[1]), dtype=complex)
            full[idx_q] = basis_q
            blocks.append(_bracket_with_letter(full, 1)[rows])
        M = np.hstack(blocks)
        coef, *_ = np.linalg.lstsq(M, target, rcond=None)
        k = basis_p.shape[1] if basis_p.size else 0
        if k:
            P[idx_p] += basis_p @ coef[:k]
        if basis_q.size:
            Q[idx_q] += basis_q @ coef[k:]
    return P, Q


def halfhalf_decompose(Z: GradedSeries, mode: str = "first-letter", tol: float = 1e-10) -> HalfHalf:
    """Write a Lie series as ``Z_1 + [X, P] + [Y, Q]`` with Lie series P, Q.

    The pair (P, Q) is not unique.  ``mode`` selects the convention; see
    ``HalfHalf.normalization``.  Correctness is the reconstruction residual.
    """
    if mode not in SPLIT_MODES:
        raise ValueError(f"unknown split mode {mode!r}")
    if Z.exact and mode == "symmetric":
        raise ValueError("the symmetric split uses floating-point least squares; no exact variant")
    check = is_lie(Z, tol)
    if not check.ok:
        raise ValueError(f"input is not a Lie series (deviations {check.deviations})")
    N = Z.truncation
    Pc, Qc = {}, {}
    for n, vec in Z.items():
        if n == 1:
            continue
        if mode in ("first-letter", "shifted"):
            half = 2 ** (n - 1)
            Pc[n - 1] = right_nested(vec[:half]) / n
            Qc[n - 1] = right_nested(vec[half:]) / n
        else:
            Pc[n - 1], Qc[n - 1] = _min_norm_split(vec, n)
    if mode == "shifted" and 1 in Pc:
        c = Pc[1][1]
        Pc[1] = Pc[1] - np.array([0 * c, c / 2], dtype=Pc[1].dtype)
        Qc[1] = Qc[1] - np.array([c / 2, 0 * c], dtype=Qc[1].dtype)
    P = GradedSeries(Pc, N)
    Q = GradedSeries(Qc, N)
    Z1 = Z.homogeneous(1)
    recon = Z1 + bracket(gen_X(N, Z.exact), P) + bracket(gen_Y(N, Z.exact), Q)
    residuals = (Z - recon).grade_norms()
    residuals = {n: residuals.get(n, 0.0) for n in range(1, N + 1)}
    return HalfHalf(Z1, LieSeries.from_series(P, 1e-9), LieSeries.from_series(Q, 1e-9),
                    residuals, mode, _NORMALIZATION[mode])


@lru_cache(maxsize=None)
def kveasy_ab(N: int, mode: str = "first-letter", exact: bool = False) -> tuple[LieSeries, LieSeries]:
    """Lie series A, B with ``V = X + Y + [X, A] + [Y, B]`` through degree N.

    The BCH series is taken one degree further so that A, B are complete
    through degree N as well (F and G need them there).
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    split = halfhalf_decompose(bch_series(N + 1, exact), mode)
    return (LieSeries.from_series(split.P.truncate(N)),
            LieSeries.from_series(split.Q.truncate(N)))


def kveasy_residuals(N: int, mode: str = "first-letter") -> dict[int, float]:
    A, B = kveasy_ab(N, mode)
    V = bch_series(N)
    Xg, Yg = gen_X(N), gen_Y(N)
    rest = V - Xg - Yg - bracket(Xg, A) - bracket(Yg, B)
    norms = rest.grade_norms()
    return {n: norms.get(n, 0.0) for n in range(1, N + 1)}


@lru_cache(maxsize=None)
def fg_series(N: int, mode: str = "first-letter", exact: bool = False) -> tuple[LieSeries, LieSeries]:
    """``F = ad_X/(e^{-ad_X}-1) B(Y,X)`` and ``G = ad_Y/(1-e^{ad_Y}) A(Y,X)``."""
    A, B = kveasy_ab(N, mode, exact)
    Xg, Yg = gen_X(N, exact), gen_Y(N, exact)
    F = standard_operator("f_op", N + 1, exact).apply(Xg, B.swap(), N)
    G = standard_operator("g_op", N + 1, exact).apply(Yg, A.swap(), N)
    return LieSeries.from_series(F, 1e-9), LieSeries.from_series(G, 1e-9)


@dataclass
class KV1Report:
    residuals: dict
    mode: str
    tol: float = 1e-9
    notes: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tol


def kv1_residuals(F: GradedSeries, G: GradedSeries, N: int | None = None) -> dict[int, float]:
    """Per-degree l1 norm of ``V(Y,X) - X - Y + (1-e^{-ad_X}) F + (e^{ad_Y}-1) G``."""
    if N is None:
        N = min(F.truncation, G.truncation)
    ex = F.exact
    Xg, Yg = gen_X(N, ex), gen_Y(N, ex)
    lhs = bch_series(N, ex).swap()
    rhs = (Xg + Yg
           - standard_operator("one_minus_exp_neg", N + 1, ex).apply(Xg, F, N)
           - standard_operator("exp_minus_one", N + 1, ex).apply(Yg, G, N))
    norms = (lhs - rhs).grade_norms()
    return {n: norms.get(n, 0.0) for n in range(1, N + 1)}


def kv1_check(N: int, mode: str = "first-letter", tol: float = 1e-9, exact: bool = False) -> KV1Report:
    F, G = fg_series(N, mode, exact)
    return KV1Report(kv1_residuals(F, G, N), mode, tol)
