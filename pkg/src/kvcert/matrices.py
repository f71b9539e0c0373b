"""Dense complex matrices as a concrete C*-algebra.

Matrices are plain ``numpy.ndarray`` objects of complex dtype.  The exponential
and the general logarithm delegate to scipy (Pade scaling-and-squaring and
the Schur-based inverse scaling-and-squaring method).  Near the identity the
logarithm uses an atanh series instead.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

MAX_DIM = 16


class BranchCutError(ValueError):
    """Principal logarithm requested for a matrix with spectrum on (-inf, 0]."""


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(a)).T


def op_norm(a: np.ndarray) -> float:
    """Operator norm (largest singular value)."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0 or not np.any(a):
        return 0.0
    return float(np.linalg.norm(a, 2))


def comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Additive commutator ``ab - ba``."""
    return a @ b - b @ a


def group_comm(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Multiplicative commutator ``u v u^{-1} v^{-1}``."""
    return u @ v @ np.linalg.inv(u) @ np.linalg.inv(v)


def mat_exp(a) -> np.ndarray:
    return scipy.linalg.expm(as_matrix(a))


def _log_series(g: np.ndarray, tol: float = 1e-17) -> np.ndarray:
    # log g = 2 atanh(w), w = (g - 1)(g + 1)^{-1}; ||g - 1|| <= 1/2 gives ||w|| <= 1/3
    eye = np.eye(g.shape[0])
    w = np.linalg.solve((g + eye).T, (g - eye).T).T
    w2 = w @ w
    term = w
    out = np.zeros_like(g)
    k = 1
    while True:
        out = out + term / k
        term = term @ w2
        k += 2
        if op_norm(term) / k < tol or k > 201:
            break
    return 2 * out


def mat_log(g) -> np.ndarray:
    """Principal logarithm.

    Raises
    ------
    BranchCutError
        if ``g`` is singular or has an eigenvalue on the closed negative real axis.
    """
    g = as_matrix(g)
    eye = np.eye(g.shape[0])
    if op_norm(g - eye) <= 0.5:
        return _log_series(g)
    eig = np.linalg.eigvals(g)
    scale = max(1.0, float(np.max(np.abs(eig))))
    bad = (np.abs(eig.imag) <= 1e-12 * scale) & (eig.real <= 1e-12 * scale)
    if np.any(bad):
        raise BranchCutError(f"spectrum meets the branch cut: {eig[bad]}")
    out = scipy.linalg.logm(g)
    return np.asarray(out, dtype=complex)


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------

def make_rng(seed) -> np.random.Generator:
    """Counter-based generator (Philox) seeded from an int or a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def split_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(n)


def random_gaussian(dim: int, rng) -> np.ndarray:
    rng = make_rng(rng)
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def random_unitary(dim: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(random_gaussian(dim, rng))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_skew(dim: int, radius: float, seed) -> np.ndarray:
    """Skew-adjoint matrix with operator norm exactly ``radius``."""
    g = random_gaussian(dim, seed)
    a = (g - adjoint(g)) / 2
    if radius == 0:
        return np.zeros((dim, dim), dtype=complex)
    return a * (radius / op_norm(a))


def random_matrix(dim: int, radius: float, seed) -> np.ndarray:
    g = random_gaussian(dim, seed)
    if radius == 0:
        return np.zeros((dim, dim), dtype=complex)
    return g * (radius / op_norm(g))


def random_contraction(dim: int, seed) -> np.ndarray:
    """Matrix with operator norm uniform in [1/2, 1]."""
    rng = make_rng(seed)
    return random_matrix(dim, rng.uniform(0.5, 1.0), rng)


def random_square_zero(dim: int, radius: float, seed, rank: int | None = None) -> np.ndarray:
    """``u s v^*`` with orthonormal u, v spanning orthogonal subspaces; norm = radius."""
    if radius == 0:
        return np.zeros((dim, dim), dtype=complex)
    if dim < 2:
        raise ValueError("a nonzero square-zero matrix needs dim >= 2")
    rng = make_rng(seed)
    if rank is None:
        rank = int(rng.integers(1, dim // 2 + 1))
    if not 1 <= rank <= dim // 2:
        raise ValueError(f"rank must lie in [1, {dim // 2}]")
    q = random_unitary(dim, rng)
    u, v = q[:, :rank], q[:, rank: 2 * rank]
    s = rng.uniform(0.1, 1.0, size=rank)
    s = s * (radius / s.max())
    return (u * s) @ adjoint(v)


def random_projection(dim: int, rank: int, seed) -> np.ndarray:
    q = random_unitary(dim, seed)[:, :rank]
    return q @ adjoint(q)


# ---------------------------------------------------------------------------
# square-zero canonical form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SquareZeroForm:
    """``x = W (diag blocks [[0, s_i], [0, 0]] (+) 0) W^*`` with W unitary."""

    W: np.ndarray
    singulars: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.singulars)

    def block_matrix(self) -> np.ndarray:
        dim = self.W.shape[0]
        out = np.zeros((dim, dim), dtype=complex)
        for i, s in enumerate(self.singulars):
            out[2 * i, 2 * i + 1] = s
        return out

    def reconstruct(self) -> np.ndarray:
        return self.W @ self.block_matrix() @ adjoint(self.W)


def square_zero_canonical(x, tol: float = 1e-10, drop: float = 1e-12) -> SquareZeroForm:
    """Unitary normal form of a square-zero matrix.

    Singular values below ``drop * ||x||`` are discarded as numerical zeros.
    """
    x = as_matrix(x)
    dim = x.shape[0]
    nx = op_norm(x)
    if nx == 0:
        return SquareZeroForm(identity(dim), np.zeros(0))
    if op_norm(x @ x) > tol * nx ** 2:
        raise ValueError(f"not square-zero: ||x^2|| = {op_norm(x @ x):.3e}")
    U, s, Vh = np.linalg.svd(x)
    keep = s > drop * nx
    r = int(keep.sum())
    cols = []
    for i in range(r):
        cols.append(U[:, i])
        cols.append(np.conj(Vh[i]))
    basis = np.array(cols).T if cols else np.zeros((dim, 0), dtype=complex)
    # leading 2r columns are orthonormal up to rounding; QR cleans them and completes
    W, R = np.linalg.qr(np.hstack([basis, _complement(basis)]))
    W = W * (np.diag(R) / np.abs(np.diag(R)))
    return SquareZeroForm(W, s[:r].copy())


def _complement(basis: np.ndarray) -> np.ndarray:
    dim, k = basis.shape
    if k == dim:
        return np.zeros((dim, 0), dtype=complex)
    proj = identity(dim) - basis @ adjoint(basis)
    w, vecs = np.linalg.eigh(proj)
    return vecs[:, np.argsort(w)[::-1][: dim - k]]


def trotter_product(a, b, n: int) -> tuple[np.ndarray, float]:
    """``(e^{a/n} e^{b/n})^n`` and its distance to ``e^{a+b}``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a = as_matrix(a)
    b = as_matrix(b)
    step = mat_exp(a / n) @ mat_exp(b / n)
    prod = np.linalg.matrix_power(step, n)
    return prod, op_norm(prod - mat_exp(a + b))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def matrix_to_json(a) -> dict:
    """``{"dim": n, "re": [[...]], "im": [[...]]}``."""
    a = as_matrix(a)
    return {"dim": int(a.shape[0]), "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_json(data) -> np.ndarray:
    try:
        dim = int(data["dim"])
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise ValueError(f"matrix JSON declares dim {dim} but has shape {re.shape}")
    return as_matrix(re + 1j * im)
