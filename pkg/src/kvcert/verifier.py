"""Stand-alone certificate checker.

Works from the JSON form only and shares no code with the generator beyond
numpy and scipy: it rebuilds every atom, re-evaluates the claimed identity and
re-checks each atom's invariant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

SQUARE_ZERO_TOL = 1e-10
PROJECTION_TOL = 1e-10
MAX_CONDITION = 1e12
DET_TOL = 1e-10


def _mat(d) -> np.ndarray:
    dim = int(d["dim"])
    m = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d.get("im", 0.0), dtype=float)
    if m.shape != (dim, dim):
        raise ValueError(f"matrix of declared dim {dim} has shape {m.shape}")
    return m


def _norm(a) -> float:
    return float(np.linalg.norm(a, 2)) if np.any(a) else 0.0


class _Walker:
    def __init__(self):
        self.failures: list[str] = []
        self.counts: dict[str, int] = {}

    def _count(self, kind):
        self.counts[kind] = self.counts.get(kind, 0) + 1

    def operand(self, d) -> np.ndarray:
        if d.get("type") == "matrix":
            return _mat(d)
        return self.atom(d)

    def _invertible(self, m, what):
        cond = np.linalg.cond(m)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            self.failures.append(f"{what} not safely invertible (cond {cond:.3e})")

    def atom(self, d) -> np.ndarray:
        kind = d.get("type")
        self._count(kind)
        if kind == "commutator":
            u, v = self.operand(d["u"]), self.operand(d["v"])
            self._invertible(u, "commutator u")
            self._invertible(v, "commutator v")
            c = u @ v @ np.linalg.inv(u) @ np.linalg.inv(v)
            n = int(d.get("repeat", 1))
            if n < 1:
                self.failures.append("commutator repeat < 1")
                n = 1
            return np.linalg.matrix_power(c, n)
        if kind == "conjugate":
            g = self.operand(d["g"])
            self._invertible(g, "conjugator")
            return g @ self.operand(d["inner"]) @ np.linalg.inv(g)
        if kind == "exp":
            return scipy.linalg.expm(_mat(d["b"]))
        if kind in ("unipotent", "square_zero"):
            z = _mat(d["z"])
            dz = _norm(z @ z)
            if dz > SQUARE_ZERO_TOL:
                self.failures.append(f"{kind}: ||z^2|| = {dz:.3e}")
            return np.eye(z.shape[0]) + z if kind == "unipotent" else z
        if kind == "signed_projection":
            p = _mat(d["p"])
            defect = max(_norm(p @ p - p), _norm(p - p.conj().T))
            if defect > PROJECTION_TOL:
                self.failures.append(f"projection defect {defect:.3e}")
            sign, mult = int(d["sign"]), int(d.get("multiplicity", 1))
            if sign not in (1, -1) or mult < 1:
                self.failures.append(f"bad sign/multiplicity {sign}/{mult}")
            return sign * mult * p
        raise ValueError(f"unknown atom type {kind!r}")


@dataclass
class Verdict:
    kind: str
    claimed_identity: str
    residual: float
    stated_residual: float
    tolerance: float
    atom_count: int
    failures: list = field(default_factory=list)
    det: complex | None = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind, "claimed_identity": self.claimed_identity,
               "residual": self.residual, "stated_residual": self.stated_residual,
               "tolerance": self.tolerance, "atom_count": self.atom_count,
               "failures": list(self.failures), "ok": self.ok}
        if self.det is not None:
            out["det"] = [self.det.real, self.det.imag]
        return out


def verify_certificate(cert: dict, slack: float = 1e-9) -> Verdict:
    """Re-evaluate a certificate dict and check residual and atom invariants.

    Fails when the recomputed residual exceeds the certificate's tolerance or
    disagrees with the stated residual by more than ``slack`` (absolute, plus a
    relative 1e-6).
    """
    target = _mat(cert["target"])
    dim = target.shape[0]
    ident = cert["claimed_identity"]
    w = _Walker()
    values = [w.atom(a) for a in cert["atoms"]]
    if ident == "product-equals-target":
        got = np.eye(dim, dtype=complex)
        for v in values:
            got = got @ v
    elif ident == "sum-equals-target":
        got = sum(values, np.zeros((dim, dim), dtype=complex))
    else:
        raise ValueError(f"unknown claimed identity {ident!r}")
    residual = _norm(got - target)
    stated = float(cert["residual"])
    tol = float(cert["tolerance"])
    failures = list(w.failures)
    if residual > tol:
        failures.append(f"residual {residual:.3e} exceeds tolerance {tol:.3e}")
    if abs(residual - stated) > slack + 1e-6 * stated:
        failures.append(f"stated residual {stated:.3e} does not match recomputed {residual:.3e}")
    meta = cert.get("metadata", {})
    if meta.get("summands") == "square-zero":
        worst = max((_norm(v @ v) for v in values), default=0.0)
        if worst > SQUARE_ZERO_TOL:
            failures.append(f"summand not square-zero: ||y^2|| = {worst:.3e}")
    det = None
    if ident == "product-equals-target" and values and \
            all(a.get("type") == "commutator" for a in cert["atoms"]):
        det = complex(np.linalg.det(got))
        if abs(det - 1) > DET_TOL:
            failures.append(f"product of commutators has det {det:.6g}")
    return Verdict(cert.get("kind", "?"), ident, residual, stated, tol,
                   sum(w.counts.values()), failures, det)


def verify_file(path) -> Verdict:
    with open(path) as fh:
        return verify_certificate(json.load(fh))
