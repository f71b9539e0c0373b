"""Explicit factorizations in M_n, each emitted as a checkable certificate.

A certificate is an ordered list of atoms together with the matrix they are
claimed to produce, either as a product or as a sum.  Atoms are

``Commutator(u, v)``       ``u v u^{-1} v^{-1}`` (u, v matrices or atoms), optionally repeated
``Conjugate(g, inner)``    ``g inner g^{-1}``
``Exp(b)``                 ``e^b``
``Unipotent(z)``           ``1 + z`` with ``z^2 = 0``
``SquareZero(z)``          ``z`` with ``z^2 = 0`` (summand of a sum certificate)
``SignedProjection``       ``sign * multiplicity * p`` with ``p`` an orthogonal projection

:mod:`kvcert.verifier` re-checks certificates from their JSON form alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .matrices import (
    adjoint,
    as_matrix,
    comm,
    identity,
    mat_exp,
    matrix_from_json,
    matrix_to_json,
    op_norm,
    square_zero_canonical,
)

SQUARE_ZERO_TOL = 1e-10
PROJECTION_TOL = 1e-10
WITNESS_TOL = 1e-12

TOL_UNIPOTENT = 1e-9
TOL_SUMOF5 = 1e-10
TOL_COMM_N2 = 1e-9
TOL_COMM_P = 1e-9


# ---------------------------------------------------------------------------
# atoms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Commutator:
    u: "Operand"
    v: "Operand"
    repeat: int = 1

    def value(self) -> np.ndarray:
        u, v = _value(self.u), _value(self.v)
        c = u @ v @ np.linalg.inv(u) @ np.linalg.inv(v)
        return np.linalg.matrix_power(c, self.repeat) if self.repeat != 1 else c


@dataclass(frozen=True)
class Conjugate:
    g: "Operand"
    inner: "Operand"

    def value(self) -> np.ndarray:
        g = _value(self.g)
        return g @ _value(self.inner) @ np.linalg.inv(g)


@dataclass(frozen=True)
class Exp:
    b: np.ndarray

    def value(self) -> np.ndarray:
        return mat_exp(self.b)


@dataclass(frozen=True)
class Unipotent:
    z: np.ndarray

    def value(self) -> np.ndarray:
        return identity(self.z.shape[0]) + self.z


@dataclass(frozen=True)
class SquareZero:
    z: np.ndarray

    def value(self) -> np.ndarray:
        return self.z


@dataclass(frozen=True)
class SignedProjection:
    sign: int
    p: np.ndarray
    multiplicity: int = 1

    def value(self) -> np.ndarray:
        return (self.sign * self.multiplicity) * self.p


Atom = Union[Commutator, Conjugate, Exp, Unipotent, SquareZero, SignedProjection]
Operand = Union[np.ndarray, Atom]

_ATOM_TYPES = {"commutator": Commutator, "conjugate": Conjugate, "exp": Exp,
               "unipotent": Unipotent, "square_zero": SquareZero,
               "signed_projection": SignedProjection}


def _value(x: Operand) -> np.ndarray:
    return x if isinstance(x, np.ndarray) else x.value()


def atom_value(atom: Atom) -> np.ndarray:
    return atom.value()


def negate_atom(atom: Atom) -> Atom:
    """Atom whose value is the negative of ``atom`` (sum-form atoms only)."""
    if isinstance(atom, SquareZero):
        return SquareZero(-atom.z)
    if isinstance(atom, Conjugate):
        return Conjugate(atom.g, negate_atom(atom.inner))
    if isinstance(atom, SignedProjection):
        return SignedProjection(-atom.sign, atom.p, atom.multiplicity)
    raise TypeError(f"cannot negate {type(atom).__name__}")


def conjugate_atom(g: Operand, atom: Atom) -> Atom:
    return Conjugate(g, atom)


def _operand_to_json(x: Operand) -> dict:
    if isinstance(x, np.ndarray):
        return {"type": "matrix", **matrix_to_json(x)}
    return atom_to_json(x)


def _operand_from_json(d: dict) -> Operand:
    if d.get("type") == "matrix":
        return matrix_from_json(d)
    return atom_from_json(d)


def atom_to_json(atom: Atom) -> dict:
    if isinstance(atom, Commutator):
        return {"type": "commutator", "u": _operand_to_json(atom.u),
                "v": _operand_to_json(atom.v), "repeat": atom.repeat}
    if isinstance(atom, Conjugate):
        return {"type": "conjugate", "g": _operand_to_json(atom.g),
                "inner": _operand_to_json(atom.inner)}
    if isinstance(atom, Exp):
        return {"type": "exp", "b": matrix_to_json(atom.b)}
    if isinstance(atom, Unipotent):
        return {"type": "unipotent", "z": matrix_to_json(atom.z)}
    if isinstance(atom, SquareZero):
        return {"type": "square_zero", "z": matrix_to_json(atom.z)}
    if isinstance(atom, SignedProjection):
        return {"type": "signed_projection", "sign": atom.sign, "p": matrix_to_json(atom.p),
                "multiplicity": atom.multiplicity}
    raise TypeError(f"not an atom: {type(atom).__name__}")


def atom_from_json(d: dict) -> Atom:
    kind = d.get("type")
    if kind == "commutator":
        return Commutator(_operand_from_json(d["u"]), _operand_from_json(d["v"]), int(d.get("repeat", 1)))
    if kind == "conjugate":
        return Conjugate(_operand_from_json(d["g"]), _operand_from_json(d["inner"]))
    if kind == "exp":
        return Exp(matrix_from_json(d["b"]))
    if kind == "unipotent":
        return Unipotent(matrix_from_json(d["z"]))
    if kind == "square_zero":
        return SquareZero(matrix_from_json(d["z"]))
    if kind == "signed_projection":
        return SignedProjection(int(d["sign"]), matrix_from_json(d["p"]), int(d.get("multiplicity", 1)))
    raise ValueError(f"unknown atom type {kind!r}")


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

PRODUCT = "product-equals-target"
SUM = "sum-equals-target"


def evaluate_atoms(atoms, claimed_identity: str, dim: int) -> np.ndarray:
    if claimed_identity == PRODUCT:
        out = identity(dim)
        for a in atoms:
            out = out @ a.value()
        return out
    if claimed_identity == SUM:
        out = np.zeros((dim, dim), dtype=complex)
        for a in atoms:
            out = out + a.value()
        return out
    raise ValueError(f"unknown identity kind {claimed_identity!r}")


@dataclass(frozen=True)
class FactorCertificate:
    kind: str
    target: np.ndarray
    atoms: tuple
    claimed_identity: str
    residual: float
    tolerance: float
    metadata: dict = field(default_factory=dict)

    @classmethod
    def seal(cls, kind, target, atoms, claimed_identity, tolerance, metadata=None):
        target = as_matrix(target)
        atoms = tuple(atoms)
        got = evaluate_atoms(atoms, claimed_identity, target.shape[0])
        return cls(kind, target, atoms, claimed_identity, op_norm(got - target),
                   float(tolerance), dict(metadata or {}))

    @property
    def dim(self) -> int:
        return self.target.shape[0]

    @property
    def ok(self) -> bool:
        return self.residual <= self.tolerance

    def evaluate(self) -> np.ndarray:
        return evaluate_atoms(self.atoms, self.claimed_identity, self.dim)

    def summands(self) -> list[np.ndarray]:
        return [a.value() for a in self.atoms]

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "claimed_identity": self.claimed_identity,
                "target": matrix_to_json(self.target),
                "atoms": [atom_to_json(a) for a in self.atoms],
                "residual": self.residual, "tolerance": self.tolerance,
                "metadata": self.metadata}

    @classmethod
    def from_json_dict(cls, d: dict) -> "FactorCertificate":
        return cls(d["kind"], matrix_from_json(d["target"]),
                   tuple(atom_from_json(a) for a in d["atoms"]),
                   d["claimed_identity"], float(d["residual"]), float(d["tolerance"]),
                   dict(d.get("metadata", {})))


# ---------------------------------------------------------------------------
# atom invariants
# ---------------------------------------------------------------------------

def square_zero_defect(z) -> float:
    return op_norm(z @ z)


def projection_defect(p) -> float:
    return max(op_norm(p @ p - p), op_norm(p - adjoint(p)))


def atom_invariant_failures(atom: Atom, max_condition: float = 1e12) -> list[str]:
    """Violations of the per-atom invariants, recursing into nested operands."""
    bad = []
    if isinstance(atom, Commutator):
        for name, x in (("u", atom.u), ("v", atom.v)):
            m = _value(x)
            cond = np.linalg.cond(m)
            if not np.isfinite(cond) or cond > max_condition:
                bad.append(f"commutator {name} ill-conditioned (cond {cond:.3e})")
            if not isinstance(x, np.ndarray):
                bad.extend(atom_invariant_failures(x, max_condition))
    elif isinstance(atom, Conjugate):
        for x in (atom.g, atom.inner):
            if not isinstance(x, np.ndarray):
                bad.extend(atom_invariant_failures(x, max_condition))
        cond = np.linalg.cond(_value(atom.g))
        if not np.isfinite(cond) or cond > max_condition:
            bad.append(f"conjugator ill-conditioned (cond {cond:.3e})")
    elif isinstance(atom, (Unipotent, SquareZero)):
        d = square_zero_defect(atom.z)
        if d > SQUARE_ZERO_TOL:
            bad.append(f"{type(atom).__name__} z^2 = {d:.3e}")
    elif isinstance(atom, SignedProjection):
        d = projection_defect(atom.p)
        if d > PROJECTION_TOL:
            bad.append(f"projection defect {d:.3e}")
        if atom.sign not in (1, -1) or atom.multiplicity < 1:
            bad.append("bad sign or multiplicity")
    return bad


def commutator_conditions(cert: FactorCertificate) -> list[float]:
    """Condition numbers of every commutator operand, in depth-first order."""
    out = []

    def walk(x):
        if isinstance(x, Commutator):
            for y in (x.u, x.v):
                out.append(float(np.linalg.cond(_value(y))))
                walk(y)
        elif isinstance(x, Conjugate):
            walk(x.g)
            walk(x.inner)

    for a in cert.atoms:
        walk(a)
    return out


# ---------------------------------------------------------------------------
# 1 + x as a commutator of commutators
# ---------------------------------------------------------------------------

def _diag_pair(g: float) -> tuple[np.ndarray, np.ndarray]:
    # diag(g, 1/g) = (U, L) with U, L triangular, h^2 = g - 1
    h = math.sqrt(g - 1.0)
    r = math.sqrt(g)
    U = np.array([[r, h], [0.0, 1.0 / r]], dtype=complex)
    L = np.array([[1.0 / r, 0.0], [h, r]], dtype=complex)
    return U, L


def _unipotent_pair(t: float) -> tuple[float, float]:
    # [[1, t], [0, 1]] = (diag(g, 1/g), [[1, f], [0, 1]])
    f = math.sqrt(t)
    g = math.sqrt(1.0 + f)
    return f, g


def unipotent_blocks(t: float) -> dict:
    """The 2x2 matrices behind ``[[1, t], [0, 1]] = ((U, L), (D', V'))``."""
    if t <= 0:
        raise ValueError("t must be positive")
    f, g = _unipotent_pair(t)
    U, L = _diag_pair(g)
    f2, g2 = _unipotent_pair(f)
    D2 = np.diag([g2, 1.0 / g2]).astype(complex)
    V2 = np.array([[1.0, f2], [0.0, 1.0]], dtype=complex)
    return {"t": t, "f": f, "g": g, "h": math.sqrt(g - 1.0), "U": U, "L": L,
            "D": np.diag([g, 1.0 / g]).astype(complex),
            "V": np.array([[1.0, f], [0.0, 1.0]], dtype=complex),
            "D2": D2, "V2": V2, "f2": f2, "g2": g2}


def _embed(blocks: list[np.ndarray], dim: int) -> np.ndarray:
    out = identity(dim)
    for i, b in enumerate(blocks):
        out[2 * i: 2 * i + 2, 2 * i: 2 * i + 2] = b
    return out


def unipotent_factor(x, tol: float = TOL_UNIPOTENT) -> FactorCertificate:
    """``1 + x = (u, v)`` with ``u = (U, L)`` and ``v = (D', V')`` themselves commutators.

    ``x`` is reduced to unitary normal form ``W (+)[[0, s_i], [0, 0]] W^*``; each
    block uses ``f = s^{1/2}``, ``g = (1 + f)^{1/2}``, ``h = (g - 1)^{1/2}``.
    """
    x = as_matrix(x)
    dim = x.shape[0]
    target = identity(dim) + x
    if op_norm(x) == 0:
        return FactorCertificate.seal("unipotent", target, [], PRODUCT, tol, {"blocks": []})
    form = square_zero_canonical(x)
    W, Wi = form.W, adjoint(form.W)
    parts = {k: [] for k in ("U", "L", "D2", "V2")}
    for s in form.singulars:
        b = unipotent_blocks(float(s))
        for k in parts:
            parts[k].append(b[k])
    M = {k: W @ _embed(v, dim) @ Wi for k, v in parts.items()}
    atom = Commutator(Commutator(M["U"], M["L"]), Commutator(M["D2"], M["V2"]))
    meta = {"blocks": [float(s) for s in form.singulars], "depth": 2,
            "dropped_mass": op_norm(x - form.reconstruct())}
    return FactorCertificate.seal("unipotent", target, [atom], PRODUCT, tol, meta)


# ---------------------------------------------------------------------------
# N_2^c witnesses and the five-term decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class N2cWitness:
    """``f x = x e = x`` and ``e f = 0`` with e, f positive (here projections)."""

    x: np.ndarray
    e: np.ndarray
    f: np.ndarray

    def defects(self) -> dict[str, float]:
        x, e, f = self.x, self.e, self.f
        return {"fx": op_norm(f @ x - x), "xe": op_norm(x @ e - x), "ef": op_norm(e @ f),
                "e_psd": max(0.0, -float(np.linalg.eigvalsh((e + adjoint(e)) / 2).min())),
                "f_psd": max(0.0, -float(np.linalg.eigvalsh((f + adjoint(f)) / 2).min()))}

    def valid(self, tol: float = WITNESS_TOL) -> bool:
        scale = max(1.0, op_norm(self.x))
        return all(v <= tol * scale for v in self.defects().values())


def n2c_witness(x, tol: float = 1e-10, drop: float = 1e-12) -> N2cWitness:
    """e = projection onto (ker x)^perp, f = projection onto range x."""
    x = as_matrix(x)
    nx = op_norm(x)
    dim = x.shape[0]
    if nx == 0:
        z = np.zeros((dim, dim), dtype=complex)
        return N2cWitness(x, z, z)
    if op_norm(x @ x) > tol * max(1.0, nx ** 2):
        raise ValueError(f"not square-zero: ||x^2|| = {op_norm(x @ x):.3e}")
    U, s, Vh = np.linalg.svd(x)
    r = int((s > drop * nx).sum())
    Ur, Vr = U[:, :r], adjoint(Vh[:r])
    return N2cWitness(x, Vr @ adjoint(Vr), Ur @ adjoint(Ur))


@dataclass(frozen=True)
class SumOf5:
    """``[x, r] = z1 + z2 + z3 + z4 + (1 + z5) x' (1 - z5)`` with ``x' = ||r|| x``."""

    z: tuple
    conjugated: np.ndarray
    certificate: FactorCertificate

    @property
    def conjugated_is_x(self) -> bool:
        x = self.certificate.metadata["x_scale"]
        return abs(x - 1.0) <= 1e-12

    def norm_ratios(self, x, r) -> list[float]:
        """``||z_i|| / (||x|| ||r||)`` for i = 1..5."""
        denom = op_norm(x) * op_norm(r)
        return [op_norm(z) / denom if denom else 0.0 for z in self.z]


def sumof5(witness: N2cWitness, r, tol: float = TOL_SUMOF5) -> SumOf5:
    """Five square-zero pieces of ``[x, r]`` (all in N_2^c).

    With ``xh = x/||x||``, ``rh = r/||r||`` and ``zh = e rh f``::

        [xh, rh] = xh rh (1-f) - (1-e) rh xh + zh xh zh - xh + (1 - zh) xh (1 + zh)

    and the pieces are rescaled by ``||x|| ||r||``.  ``||z_i|| <= ||x|| ||r||``
    for i <= 4 and ``||z_5|| <= 1``; the conjugated element is ``||r|| x``.
    """
    if not witness.valid(1e-10):
        raise ValueError(f"invalid N_2^c witness: {witness.defects()}")
    x = witness.x
    r = as_matrix(r)
    if r.shape != x.shape:
        raise ValueError("dimension mismatch")
    dim = x.shape[0]
    e, f = witness.e, witness.f
    one = identity(dim)
    nx, nr = op_norm(x), op_norm(r)
    zero = np.zeros((dim, dim), dtype=complex)
    if nx == 0 or nr == 0:
        zs = (zero,) * 5
        xs = nr * x
    else:
        rh = r / nr
        zh = e @ rh @ f
        zs = (x @ r @ (one - f), -(one - e) @ r @ x, nr * (zh @ x @ zh), -nr * x, -zh)
        xs = nr * x
    atoms = [SquareZero(z) for z in zs[:4]]
    atoms.append(Conjugate(Unipotent(zs[4]), SquareZero(xs)))
    conj = (one + zs[4]) @ xs @ (one - zs[4])
    meta = {"x_scale": nr, "norm_x": nx, "norm_r": nr}
    cert = FactorCertificate.seal("sumof5", comm(x, r), atoms, SUM, tol, meta)
    return SumOf5(zs, conj, cert)


# ---------------------------------------------------------------------------
# Lie-polynomial rewriting
# ---------------------------------------------------------------------------

def _c(u, v):
    return u @ v - v @ u


@dataclass(frozen=True)
class LieTerm:
    """``sign * [x_i, r]``, ``sign * [[x_i, r], s]`` and the deeper form-(ii) shapes.

    shapes: ``"[x,r]"``, ``"[[x,r],s]"``, ``"[x,[r,s]]"``, ``"[[x,[r,s]],[r',s']]"``.
    """

    shape: str
    index: int
    sign: int
    r: object
    s: object = None
    r2: object = None
    s2: object = None

    def value(self, xs):
        x = xs[self.index - 1]
        if self.shape == "[x,r]":
            v = _c(x, self.r)
        elif self.shape == "[[x,r],s]":
            v = _c(_c(x, self.r), self.s)
        elif self.shape == "[x,[r,s]]":
            v = _c(x, _c(self.r, self.s))
        elif self.shape == "[[x,[r,s]],[r',s']]":
            v = _c(_c(x, _c(self.r, self.s)), _c(self.r2, self.s2))
        else:
            raise ValueError(self.shape)
        return v if self.sign == 1 else -v


def form_i_terms(a, b, c, x1, x2) -> list[LieTerm]:
    """``[a [x1, x2] b, c]`` as nine terms ``[x_i, r]`` / ``[[x_i, r], s]``.

    Works for any operands supporting ``@``, ``+`` and ``-``.
    """
    ab = a @ b
    return [
        LieTerm("[[x,r],s]", 1, 1, ab @ x2, c),
        LieTerm("[[x,r],s]", 1, -1, ab, x2 @ c),
        LieTerm("[x,r]", 2, -1, c @ _c(x1, ab)),
        LieTerm("[[x,r],s]", 1, 1, a @ _c(x2, b), c),
        LieTerm("[[x,r],s]", 1, -1, a, _c(x2, b) @ c),
        LieTerm("[[x,r],s]", 2, -1, b, c @ _c(x1, a)),
        LieTerm("[[x,r],s]", 2, -1, a @ _c(x1, b), c),
        LieTerm("[[x,r],s]", 2, 1, a, _c(x1, b) @ c),
        LieTerm("[[x,r],s]", 1, 1, b, c @ _c(x2, a)),
    ]


def _pi(xs):
    # pi_1(x1, x2) = [x1, x2]; pi_{n+1} = [pi_n(first half), pi_n(second half)]
    if len(xs) == 2:
        return _c(xs[0], xs[1])
    h = len(xs) // 2
    return _c(_pi(xs[:h]), _pi(xs[h:]))


@dataclass(frozen=True)
class LieRewrite:
    kind: str
    terms: list
    residual: float

    def shapes(self) -> set[str]:
        return {t.shape for t in self.terms}


_FORM_I_KEYS = ("a", "b", "c", "x1", "x2")


def lie_rewrite(kind: str, bindings: dict) -> LieRewrite:
    """Rewrite ``[a [x1,x2] b, c]`` (form_i) or ``[a pi_3(x1..x8) b, c]`` (form_ii).

    The residual is ``||sum of terms - original||`` evaluated on the bindings.
    """
    if kind == "form_i":
        keys = _FORM_I_KEYS
    elif kind == "form_ii":
        keys = ("a", "b", "c") + tuple(f"x{i}" for i in range(1, 9))
    else:
        raise ValueError(f"unknown rewrite kind {kind!r}")
    if set(bindings) != set(keys):
        raise ValueError(f"{kind} needs bindings {keys}, got {sorted(bindings)}")
    m = {k: as_matrix(v) for k, v in bindings.items()}
    if len({v.shape for v in m.values()}) != 1:
        raise ValueError("bindings have mismatched dimensions")
    a, b, c = m["a"], m["b"], m["c"]
    if kind == "form_i":
        xs = [m["x1"], m["x2"]]
        terms = form_i_terms(a, b, c, xs[0], xs[1])
        original = _c(a @ _c(xs[0], xs[1]) @ b, c)
    else:
        xs = [m[f"x{i}"] for i in range(1, 9)]
        terms = form_ii_terms(a, b, c, xs)
        original = _c(a @ _pi(xs) @ b, c)
    total = sum((t.value(xs) for t in terms), np.zeros_like(a))
    return LieRewrite(kind, terms, op_norm(total - original))


def form_ii_terms(a, b, c, xs) -> list[LieTerm]:
    """``[a pi_3(x1..x8) b, c]`` as terms ``[x_i,[r,s]]`` / ``[[x_i,[r,s]],[r',s']]``."""
    if len(xs) != 8:
        raise ValueError("form (ii) needs eight x bindings")
    X1, X2 = _pi(xs[:4]), _pi(xs[4:])
    out = []
    for t in form_i_terms(a, b, c, X1, X2):
        off = 0 if t.index == 1 else 4
        four = xs[off: off + 4]
        A, B = _c(four[0], four[1]), _c(four[2], four[3])
        # [[A, B], r] = [A, [B, r]] - [B, [A, r]], with W = [B, r] or [A, r] kept as (u, v)
        for (p, q), (u, v), sg in (((0, 1), (B, t.r), t.sign), ((2, 3), (A, t.r), -t.sign)):
            for i, j, s2 in ((p, q, sg), (q, p, -sg)):
                xi, xj = four[i], four[j]
                W = _c(u, v)
                if t.shape == "[x,r]":
                    # [x_i, [x_j, W]]
                    out.append(LieTerm("[x,[r,s]]", off + i + 1, s2, xj, W))
                else:
                    # [[x_i,[x_j,W]], s] = [x_i, [[x_j,W], s]] - [[x_j,[u,v]], [x_i, s]]
                    out.append(LieTerm("[x,[r,s]]", off + i + 1, s2, _c(xj, W), t.s))
                    out.append(LieTerm("[[x,[r,s]],[r',s']]", off + j + 1, -s2, u, v, xi, t.s))
    return out


# ---------------------------------------------------------------------------
# structural norm bounds
# ---------------------------------------------------------------------------

class Bounded:
    """A matrix carrying an a-priori norm bound that propagates through @, +, -."""

    __array_priority__ = 1000

    def __init__(self, value, bound: float):
        self.value = as_matrix(value)
        self.bound = float(bound)

    @classmethod
    def exact(cls, value) -> "Bounded":
        value = as_matrix(value)
        return cls(value, op_norm(value))

    def __matmul__(self, other):
        return Bounded(self.value @ other.value, self.bound * other.bound)

    def __add__(self, other):
        return Bounded(self.value + other.value, self.bound + other.bound)

    def __sub__(self, other):
        return Bounded(self.value - other.value, self.bound + other.bound)

    def __neg__(self):
        return Bounded(-self.value, self.bound)

    def __rmul__(self, k):
        return Bounded(k * self.value, abs(k) * self.bound)


def _pieces(bound: float) -> int:
    """Number of equal pieces that brings a norm bound down to at most 1."""
    return max(1, math.ceil(bound - 1e-12))


# ---------------------------------------------------------------------------
# [c, d] as a sum of square-zero elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SquareZeroSum:
    certificate: FactorCertificate
    K: int
    C_realized: float
    C_bound: float


def unit_representation_n2(dim: int):
    """``1 = sum_k a_k [x, y] b_k`` with ``x = e12``, ``y = e21``, ``a_k = e_k1``, ``b_k = e_1k``."""
    if dim < 2:
        raise ValueError("M_1 is commutative: no such representation")
    E = lambda i, j: np.outer(np.eye(dim)[i], np.eye(dim)[j]).astype(complex)  # noqa: E731
    x, y = E(0, 1), E(1, 0)
    return x, y, [E(k, 0) for k in range(dim)], [E(0, k) for k in range(dim)]


def _sumof5_atoms(x, r) -> tuple[list, SumOf5]:
    res = sumof5(n2c_witness(x), r)
    return list(res.certificate.atoms), res


def _double_bracket_atoms(x, r, s) -> list:
    """25 square-zero atoms summing to ``[[x, r], s]``."""
    res = sumof5(n2c_witness(x), r)
    one = identity(x.shape[0])
    atoms = []
    for z in res.z[:4]:
        atoms += _sumof5_atoms(z, s)[0]
    z5 = res.z[4]
    s_conj = (one - z5) @ s @ (one + z5)
    xs = res.certificate.atoms[4].inner.z
    g = Unipotent(z5)
    atoms += [Conjugate(g, a) for a in _sumof5_atoms(xs, s_conj)[0]]
    return atoms


def commutator_to_squarezeros(c, d, tol: float = TOL_COMM_N2) -> SquareZeroSum:
    """``[c, d] = sum y_i`` with every ``y_i`` square-zero.

    Uses ``[c, d] = sum_k [c a_k [x, y] b_k, d]``, rewrites each term into nine
    brackets ``[x_i, r]`` / ``[[x_i, r], s]`` and splits those with the
    five-term decomposition (5 and 25 pieces).  K = 205 n at dimension n.
    """
    c, d = as_matrix(c), as_matrix(d)
    if c.shape != d.shape:
        raise ValueError("dimension mismatch")
    dim = c.shape[0]
    if dim < 2:
        raise ValueError("dimension 1 has one-dimensional representations")
    target = comm(c, d)
    nc, nd = op_norm(c), op_norm(d)
    if nc == 0 or nd == 0:
        cert = FactorCertificate.seal("commN2", target, [], SUM, tol, {"K": 0})
        return SquareZeroSum(cert, 0, 0.0, 0.0)
    ch, dh = Bounded(c / nc, 1.0), Bounded(d / nd, 1.0)
    x, y, As, Bs = unit_representation_n2(dim)
    xs = [x, y]
    atoms = []
    bound = 0.0
    for ak, bk in zip(As, Bs):
        terms = form_i_terms(ch @ Bounded.exact(ak), Bounded.exact(bk), dh,
                             Bounded.exact(x), Bounded.exact(y))
        for t in terms:
            xi = xs[t.index - 1]
            if t.shape == "[x,r]":
                new = _sumof5_atoms(xi, t.r.value)[0]
                bound = max(bound, 4 * op_norm(xi) * t.r.bound)
            else:
                new = _double_bracket_atoms(xi, t.r.value, t.s.value)
                bound = max(bound, 64 * op_norm(xi) * t.r.bound * t.s.bound)
            if t.sign == -1:
                new = [negate_atom(a) for a in new]
            atoms += new
    scale = nc * nd
    atoms = [_scale_atom(a, scale) for a in atoms]
    norms = [op_norm(a.value()) for a in atoms]
    meta = {"K": len(atoms), "C_realized": max(norms) / scale, "C_bound": bound,
            "unit_representation": "1 = sum_k e_k1 [e12, e21] e_1k", "summands": "square-zero"}
    cert = FactorCertificate.seal("commN2", target, atoms, SUM, tol, meta)
    return SquareZeroSum(cert, len(atoms), meta["C_realized"], bound)


def _scale_atom(atom: Atom, k: float) -> Atom:
    if isinstance(atom, SquareZero):
        return SquareZero(k * atom.z)
    if isinstance(atom, Conjugate):
        return Conjugate(atom.g, _scale_atom(atom.inner, k))
    raise TypeError(type(atom).__name__)


# ---------------------------------------------------------------------------
# [c^*, c] as a signed sum of projections
# ---------------------------------------------------------------------------

def q_projection(P, x) -> np.ndarray:
    """The projection with blocks ``[[(P + sqrt(P - x x^*))/2, x/2], [x^*/2, (Q - sqrt(Q - x^* x))/2]]``.

    ``P`` is a projection, ``Q = 1 - P`` and ``x = P x Q`` with ``||x|| <= 1``.
    Square roots are taken through the singular value decomposition of ``x``,
    so the result is a projection to rounding accuracy.
    """
    P = as_matrix(P)
    x = as_matrix(x)
    w, vecs = np.linalg.eigh((P + adjoint(P)) / 2)
    top = vecs[:, w > 0.5]
    bot = vecs[:, w <= 0.5]
    k = top.shape[1]
    X = adjoint(top) @ x @ bot
    if op_norm(X) > 1 + 1e-12:
        raise ValueError(f"q(x) needs ||x|| <= 1, got {op_norm(X):.6g}")
    U, s, Vh = np.linalg.svd(X, full_matrices=True)
    s = np.clip(s, 0.0, 1.0)
    ct = np.ones(k)
    ct[: s.size] = np.sqrt(1 - s ** 2)
    cb = np.ones(bot.shape[1])
    cb[: s.size] = np.sqrt(1 - s ** 2)
    sq_top = (U * ct) @ adjoint(U)
    V = adjoint(Vh)
    sq_bot = (V * cb) @ Vh
    blk = np.block([[(np.eye(k) + sq_top) / 2, X / 2],
                    [adjoint(X) / 2, (np.eye(bot.shape[1]) - sq_bot) / 2]])
    B = np.hstack([top, bot])
    q = B @ blk @ adjoint(B)
    return (q + adjoint(q)) / 2


def _skew_part(a):
    return (a - adjoint(a)) / 2


def _herm_part(a):
    return (a + adjoint(a)) / 2


def _bracket_projections(P, r, mult: int) -> list[SignedProjection]:
    # [P, r] = q(x) - q(-x) for skew r with ||r|| <= 1, x = P r (1 - P)
    one = identity(P.shape[0])
    x = P @ r @ (one - P)
    return [SignedProjection(1, q_projection(P, x), mult),
            SignedProjection(-1, q_projection(P, -x), mult)]


def _double_bracket_projections(P, r, s, mult: int) -> list[SignedProjection]:
    # [[P, r], s] = [q(x), s] - [q(-x), s] for skew r, s of norm <= 1
    out = []
    for sp in _bracket_projections(P, r, 1):
        for inner in _bracket_projections(sp.p, s, mult):
            out.append(SignedProjection(sp.sign * inner.sign, inner.p, mult))
    return out


@dataclass(frozen=True)
class ProjectionSum:
    certificate: FactorCertificate
    K: int


def unit_representation_projections(P):
    """``1 = sum_k x_k [P, q] y_k`` with q the projection onto ``(u + v)/sqrt 2``.

    u (v) is a unit vector in the range of P (of 1 - P); ``[P, q] = (u v^* - v u^*)/2``.
    """
    P = as_matrix(P)
    dim = P.shape[0]
    w, vecs = np.linalg.eigh(_herm_part(P))
    if w.max() < 0.5 or w.min() > 0.5:
        raise ValueError("need 0 < rank p < n")
    u, v = vecs[:, -1], vecs[:, 0]
    q = np.outer(u + v, np.conj(u + v)) / 2
    basis = np.eye(dim)
    xs = [2 * np.outer(basis[k], np.conj(u)) for k in range(dim)]
    ys = [np.outer(v, basis[k]) for k in range(dim)]
    return q, xs, ys


def selfcomm_to_projections(c, p=None, tol: float = TOL_COMM_P) -> ProjectionSum:
    """``[c^*, c] = sum eps_i p_i`` for a contraction c.

    ``[c^*, c] = sum_k [c^* x_k [p, q] y_k, c]``; each term goes through the
    nine-term rewrite, the self-adjoint part of every bracket is kept, and the
    pieces are written with ``q(x)`` projections.  Multiplicities come from
    a-priori norm bounds (``||c|| <= 1``), so K does not depend on c.
    """
    c = as_matrix(c)
    dim = c.shape[0]
    if op_norm(c) > 1 + 1e-12:
        raise ValueError(f"c must be a contraction, ||c|| = {op_norm(c):.6g}")
    if p is None:
        p = np.diag([1.0, 1.0] + [0.0] * (dim - 2)).astype(complex) if dim >= 3 else \
            np.diag([1.0, 0.0]).astype(complex)
    p = as_matrix(p)
    if projection_defect(p) > PROJECTION_TOL:
        raise ValueError("p is not a projection")
    q, xs, ys = unit_representation_projections(p)
    target = comm(adjoint(c), c)
    cb, csb = Bounded(c, 1.0), Bounded(adjoint(c), 1.0)
    projs = {1: p, 2: q}
    atoms: list[SignedProjection] = []
    for xk, yk in zip(xs, ys):
        for t in form_i_terms(csb @ Bounded.exact(xk), Bounded.exact(yk), cb,
                              Bounded.exact(p), Bounded.exact(q)):
            P = projs[t.index]
            m = _pieces(t.r.bound)
            if t.shape == "[x,r]":
                new = _bracket_projections(P, _skew_part(t.r.value) / m, m)
            else:
                n = _pieces(t.s.bound)
                r, s = t.r.value / m, t.s.value / n
                new = (_double_bracket_projections(P, 1j * _herm_part(r), -1j * _herm_part(s), m * n)
                       + _double_bracket_projections(P, _skew_part(r), _skew_part(s), m * n))
            if t.sign == -1:
                new = [negate_atom(a) for a in new]
            atoms += new
    K = sum(a.multiplicity for a in atoms)
    meta = {"K": K, "atoms": len(atoms), "p_rank": int(round(np.trace(p).real)),
            "unit_representation": "1 = sum_k 2 (e_k u^*) [p, q] (v e_k^*)"}
    cert = FactorCertificate.seal("commP", target, atoms, SUM, tol, meta)
    return ProjectionSum(cert, K)


# ---------------------------------------------------------------------------
# e^{[c, d]} as a product of commutators
# ---------------------------------------------------------------------------

def exp_commutator_factor(c, d, n: int) -> FactorCertificate:
    """``(h, e^{a/n})^n`` with ``h = c + (||c|| + 1) 1`` and ``a = d h``.

    ``h a h^{-1} - a = [c, d]``, so the first-order Trotter product converges to
    ``e^{[c, d]}`` with error O(1/n).  The tolerance is the standard bound
    ``||[A, B]|| e^{||A|| + ||B||} / (2n)`` with ``A = h d``, ``B = -d h``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    c, d = as_matrix(c), as_matrix(d)
    if c.shape != d.shape:
        raise ValueError("dimension mismatch")
    dim = c.shape[0]
    target = mat_exp(comm(c, d))
    if op_norm(comm(c, d)) == 0:
        return FactorCertificate.seal("exp-comm", target, [], PRODUCT, 1e-12, {"n": n})
    h = c + (op_norm(c) + 1.0) * identity(dim)
    a = d @ h
    A, B = h @ d, -a
    bound = op_norm(comm(A, B)) * math.exp(op_norm(A) + op_norm(B)) / (2 * n)
    atom = Commutator(h, Exp(a / n), repeat=n)
    cert = FactorCertificate.seal("exp-comm", target, [atom], PRODUCT, bound, {"n": n})
    cert.metadata["det"] = [float(np.linalg.det(cert.evaluate()).real),
                            float(np.linalg.det(cert.evaluate()).imag)]
    return cert


def trotter_rate(c, d, ns=(100, 200, 400, 800, 1600)) -> dict:
    """Residuals of ``exp_commutator_factor`` and their ratios per doubling of n."""
    res = [exp_commutator_factor(c, d, n).residual for n in ns]
    ratios = [res[i + 1] / res[i] for i in range(len(res) - 1) if res[i] > 0]
    return {"n": list(ns), "residuals": res, "ratios": ratios}


# ---------------------------------------------------------------------------
# de la Harpe - Skandalis determinant on M_n
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DHSResult:
    in_kernel: bool
    trace_sum: complex
    det: complex
    distance: float


def dhs_kernel_check(b_list, tol: float = 1e-9) -> DHSResult:
    """Kernel membership of ``prod e^{b_i}``: ``sum tr b_i`` in ``2 pi i Z`` within ``tol``."""
    mats = [as_matrix(b) for b in b_list]
    if not mats:
        return DHSResult(True, 0j, 1 + 0j, 0.0)
    if len({m.shape for m in mats}) != 1:
        raise ValueError("dimension mismatch")
    tr = complex(sum(np.trace(m) for m in mats))
    k = round(tr.imag / (2 * math.pi))
    dist = abs(tr - 2j * math.pi * k)
    prod = identity(mats[0].shape[0])
    for m in mats:
        prod = prod @ mat_exp(m)
    return DHSResult(dist <= tol, tr, complex(np.linalg.det(prod)), dist)
