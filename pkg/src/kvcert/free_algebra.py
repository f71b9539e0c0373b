"""Truncated free algebra on two noncommuting generators X and Y.

A homogeneous component of degree ``n`` is stored densely as a complex vector
of length ``2**n``.  A word is encoded by reading its letters as bits
(X -> 0, Y -> 1), most significant letter first, so ``"XYX"`` lives at index
``0b010 == 2``.  With this layout concatenation of words is an outer product,
which keeps every product a handful of numpy calls.

There is no degree-0 (unit) component: the algebra is non-unital.  Units only
appear inside :class:`kvcert.bch.ExpElement`.

Components may also be object arrays (``fractions.Fraction`` or mpmath
numbers).  Such "exact" series skip the small-coefficient pruning and keep
their dtype through products, brackets and substitutions.
"""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, NamedTuple

import numpy as np

DEFAULT_TRUNCATION = 8
MAX_TRUNCATION = 12
DROP_TOL = 1e-15

LETTERS = "XY"


def word_to_index(word: str) -> int:
    if not word or any(ch not in LETTERS for ch in word):
        raise ValueError(f"invalid word {word!r}: need a nonempty string over 'XY'")
    return int(word.replace("X", "0").replace("Y", "1"), 2)


def index_to_word(index: int, degree: int) -> str:
    return format(index, f"0{degree}b").replace("0", "X").replace("1", "Y")


def _prune(vec: np.ndarray, tol: float = DROP_TOL) -> np.ndarray:
    # returns a fresh array
    out = np.array(vec, dtype=complex)
    out[np.abs(out) < tol] = 0.0
    return out


def _as_vector(vec) -> np.ndarray:
    arr = np.asarray(vec)
    if arr.dtype != object:
        arr = arr.astype(complex, copy=False)
    return arr.reshape(-1)


class GradedSeries:
    """Element of the free algebra truncated above degree ``truncation``.

    Instances are immutable; every operation returns a new series.

    Parameters
    ----------
    components : mapping degree -> array_like
        Homogeneous components.  Degree ``n`` needs length ``2**n``.
    truncation : int
        Largest degree kept.  Components above it are discarded.
    """

    __slots__ = ("_grades", "_trunc", "_exact")

    def __init__(self, components: Mapping[int, Iterable] | None = None,
                 truncation: int = DEFAULT_TRUNCATION, *, prune: bool = True):
        if truncation < 1:
            raise ValueError("truncation degree must be >= 1")
        grades: dict[int, np.ndarray] = {}
        exact = False
        for n, vec in (components or {}).items():
            if n < 1:
                raise ValueError("degree-0 terms are not part of the non-unital algebra")
            if n > truncation:
                continue
            arr = _as_vector(vec)
            if arr.shape[0] != 2 ** n:
                raise ValueError(f"degree {n} component needs {2 ** n} entries, got {arr.shape[0]}")
            if arr.dtype == object:
                exact = True
                arr = arr.copy()
            elif prune:
                arr = _prune(arr)
            else:
                arr = arr.copy()
            if not arr.any():
                continue
            arr.flags.writeable = False
            grades[n] = arr
        self._grades = grades
        self._trunc = int(truncation)
        self._exact = exact

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, truncation: int = DEFAULT_TRUNCATION) -> "GradedSeries":
        return cls({}, truncation)

    @classmethod
    def generator(cls, letter: str, truncation: int = DEFAULT_TRUNCATION,
                  exact: bool = False) -> "GradedSeries":
        if exact:
            vec = np.array([Fraction(0), Fraction(0)], dtype=object)
            vec[word_to_index(letter)] = Fraction(1)
            return cls({1: vec}, truncation)
        return cls.from_terms({letter: 1.0}, truncation)

    @classmethod
    def from_terms(cls, terms: Mapping[str, complex],
                   truncation: int = DEFAULT_TRUNCATION) -> "GradedSeries":
        """Build a series from a ``{word: coefficient}`` mapping."""
        comps: dict[int, np.ndarray] = {}
        for word, coeff in terms.items():
            n = len(word)
            idx = word_to_index(word)
            if n > truncation:
                continue
            vec = comps.setdefault(n, np.zeros(2 ** n, dtype=complex))
            vec[idx] += coeff
        return cls(comps, truncation)

    # -- inspection -------------------------------------------------------
    @property
    def truncation(self) -> int:
        return self._trunc

    @property
    def exact(self) -> bool:
        """True when the components are object arrays (rational or multiprecision)."""
        return self._exact

    @property
    def degrees(self) -> list[int]:
        return sorted(self._grades)

    @property
    def max_degree(self) -> int:
        return max(self._grades, default=0)

    def component(self, n: int) -> np.ndarray:
        """Degree-``n`` coefficient vector (zeros when absent)."""
        if n in self._grades:
            return self._grades[n]
        return np.zeros(2 ** n, dtype=object if self._exact else complex)

    def homogeneous(self, n: int) -> "GradedSeries":
        if n not in self._grades:
            return GradedSeries.zero(self._trunc)
        return GradedSeries({n: self._grades[n]}, self._trunc, prune=False)

    def items(self) -> Iterator[tuple[int, np.ndarray]]:
        for n in self.degrees:
            yield n, self._grades[n]

    def terms(self) -> Iterator[tuple[str, complex]]:
        """Nonzero ``(word, coefficient)`` pairs, by degree then word."""
        for n, vec in self.items():
            for idx in np.flatnonzero(vec):
                yield index_to_word(int(idx), n), complex(vec[idx])

    def as_dict(self) -> dict[str, complex]:
        return dict(self.terms())

    def coeff(self, word: str) -> complex:
        return complex(self.component(len(word))[word_to_index(word)])

    def grade_norms(self) -> dict[int, float]:
        return {n: float(np.abs(vec).sum()) for n, vec in self.items()}

    def l1_norm(self) -> float:
        return float(sum(self.grade_norms().values()))

    def is_zero(self) -> bool:
        return not self._grades

    def __repr__(self) -> str:
        parts = []
        for word, c in list(self.terms())[:8]:
            parts.append(f"({c.real:+.4g}{c.imag:+.4g}j){word}")
        more = " + ..." if sum(1 for _ in self.terms()) > 8 else ""
        body = " + ".join(parts) if parts else "0"
        return f"GradedSeries[N={self._trunc}]({body}{more})"

    # -- arithmetic -------------------------------------------------------
    def truncate(self, truncation: int) -> "GradedSeries":
        return GradedSeries(self._grades, truncation, prune=False)

    def _combine(self, other: "GradedSeries", sign: int) -> "GradedSeries":
        N = min(self._trunc, other._trunc)
        comps = {n: v for n, v in self._grades.items() if n <= N}
        for n, v in other._grades.items():
            if n > N:
                continue
            comps[n] = comps[n] + sign * v if n in comps else sign * v
        return GradedSeries(comps, N)

    def __add__(self, other):
        if not isinstance(other, GradedSeries):
            return NotImplemented
        return self._combine(other, 1)

    def __sub__(self, other):
        if not isinstance(other, GradedSeries):
            return NotImplemented
        return self._combine(other, -1)

    def __neg__(self):
        return GradedSeries({n: -v for n, v in self._grades.items()}, self._trunc, prune=False)

    def __mul__(self, other):
        if isinstance(other, GradedSeries):
            return multiply(self, other)
        if np.isscalar(other):
            return GradedSeries({n: other * v for n, v in self._grades.items()}, self._trunc)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return self * other
        return NotImplemented

    def __truediv__(self, other):
        if np.isscalar(other):
            return GradedSeries({n: v / other for n, v in self._grades.items()}, self._trunc)
        return NotImplemented

    def swap(self) -> "GradedSeries":
        """Exchange the generators X <-> Y.  Flipping every bit reverses the index order."""
        return GradedSeries({n: v[::-1] for n, v in self._grades.items()}, self._trunc, prune=False)

    def distance(self, other: "GradedSeries") -> dict[int, float]:
        """Per-degree l1 distance over the union of degrees."""
        diff = self - other
        return {n: diff.grade_norms().get(n, 0.0)
                for n in sorted(set(self.degrees) | set(other.degrees))}

    # -- serialization ----------------------------------------------------
    def to_json_dict(self) -> dict:
        grades = []
        for n, vec in self.items():
            terms = []
            for i in np.flatnonzero(vec):
                c = vec[i]
                term = {"word": index_to_word(int(i), n), "re": float(c.real), "im": float(c.imag)}
                if isinstance(c, Fraction):
                    term["q"] = str(c)
                terms.append(term)
            grades.append({"degree": n, "terms": terms})
        return {"truncation": self._trunc, "grades": grades}

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "GradedSeries":
        N = int(data["truncation"])
        comps: dict[int, np.ndarray] = {}
        exact = all("q" in t for g in data["grades"] for t in g["terms"]) and any(
            g["terms"] for g in data["grades"])
        for grade in data["grades"]:
            n = int(grade["degree"])
            if exact:
                vec = np.array([Fraction(0)] * 2 ** n, dtype=object)
            else:
                vec = np.zeros(2 ** n, dtype=complex)
            for term in grade["terms"]:
                word = term["word"]
                if len(word) != n:
                    raise ValueError(f"word {word!r} listed under degree {n}")
                if exact:
                    vec[word_to_index(word)] = Fraction(term["q"])
                else:
                    vec[word_to_index(word)] = complex(term["re"], term["im"])
            comps[n] = vec
        return cls(comps, N, prune=False)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "GradedSeries":
        return cls.from_json_dict(json.loads(text))


def X(truncation: int = DEFAULT_TRUNCATION, exact: bool = False) -> GradedSeries:
    return GradedSeries.generator("X", truncation, exact)


def Y(truncation: int = DEFAULT_TRUNCATION, exact: bool = False) -> GradedSeries:
    return GradedSeries.generator("Y", truncation, exact)


def multiply(p: GradedSeries, q: GradedSeries, N: int | None = None) -> GradedSeries:
    """Concatenation product, discarding words of degree above ``N``."""
    if N is None:
        N = min(p.truncation, q.truncation)
    comps: dict[int, np.ndarray] = {}
    for i, a in p.items():
        for j, b in q.items():
            if i + j > N:
                break
            block = np.multiply.outer(a, b).reshape(-1)
            if i + j in comps:
                comps[i + j] = comps[i + j] + block
            else:
                comps[i + j] = block
    return GradedSeries(comps, N)


def bracket(p: GradedSeries, q: GradedSeries, N: int | None = None) -> GradedSeries:
    """Commutator ``pq - qp``."""
    return multiply(p, q, N) - multiply(q, p, N)


def scale(p: GradedSeries, t: complex) -> GradedSeries:
    """Scaling automorphism: the degree-n component is multiplied by ``t**n``."""
    # diagonal map: nothing cancels, so no pruning
    return GradedSeries({n: (t ** n) * v for n, v in p.items()}, p.truncation, prune=False)


def _ad_letter_batch(u: np.ndarray, letter: int) -> np.ndarray:
    # u: (batch, 2**m) homogeneous vectors; returns [letter, u] of degree m + 1.
    z = np.zeros_like(u)
    if letter == 0:
        left = np.concatenate([u, z], axis=1)
        right = np.stack([u, z], axis=2).reshape(u.shape[0], -1)
    else:
        left = np.concatenate([z, u], axis=1)
        right = np.stack([z, u], axis=2).reshape(u.shape[0], -1)
    return left - right


def right_nested(vec: np.ndarray) -> np.ndarray:
    """Linear map ``v1...vn -> [v1,[v2,...,[v_{n-1},v_n]...]]`` on a homogeneous vector."""
    vec = _as_vector(vec)
    n = int(np.log2(vec.shape[0]))
    if n == 1:
        return vec.copy()
    # batch of degree-1 vectors indexed by the prefix v1..v_{n-1}
    T = vec.reshape(2 ** (n - 1), 2)
    for m in range(1, n):
        B = T.shape[0] // 2
        T3 = T.reshape(B, 2, 2 ** m)
        T = _ad_letter_batch(T3[:, 0, :], 0) + _ad_letter_batch(T3[:, 1, :], 1)
    return T.reshape(-1)


def dsw_project(p: GradedSeries) -> GradedSeries:
    """Apply the Dynkin-Specht-Wever map ``w -> (1/n) [v1,[v2,...]]`` degree by degree.

    On Lie elements this is the identity, so it doubles as a membership test.
    """
    return GradedSeries({n: right_nested(v) / n for n, v in p.items()}, p.truncation)


class LieCheck(NamedTuple):
    ok: bool
    deviations: dict[int, float]

    def __bool__(self) -> bool:
        return self.ok


def is_lie(p: GradedSeries, tol: float = 1e-10) -> LieCheck:
    """Check ``l1(nu(p_n) - p_n) <= tol`` for every degree."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    devs = {}
    for n, vec in p.items():
        devs[n] = float(np.abs(right_nested(vec) / n - vec).sum())
    return LieCheck(all(d <= tol for d in devs.values()), devs)


class LieSeries(GradedSeries):
    """A :class:`GradedSeries` whose components were verified to be Lie elements."""

    __slots__ = ()

    @classmethod
    def from_series(cls, p: GradedSeries, tol: float = 1e-10) -> "LieSeries":
        check = is_lie(p, tol)
        if not check.ok:
            worst = max(check.deviations.items(), key=lambda kv: kv[1])
            raise ValueError(f"series is not a Lie element: degree {worst[0]} deviates by {worst[1]:.3e}")
        out = cls.__new__(cls)
        out._grades = p._grades
        out._trunc = p._trunc
        out._exact = p._exact
        return out


def ad_power(center: GradedSeries, target: GradedSeries, k: int, N: int | None = None) -> GradedSeries:
    """``ad_center^k (target)``."""
    out = target
    for _ in range(k):
        if out.is_zero():
            break
        out = bracket(center, out, N)
    return out


def substitute(p: GradedSeries, x_image: GradedSeries, y_image: GradedSeries,
               N: int | None = None) -> GradedSeries:
    """Algebra homomorphism X -> ``x_image``, Y -> ``y_image`` applied to ``p``.

    Images must have no degree-0 part, so degrees never decrease and the
    result can be truncated consistently at ``N``.
    """
    if N is None:
        N = min(p.truncation, x_image.truncation, y_image.truncation)
    images = (list(x_image.items()), list(y_image.items()))
    out: dict[int, np.ndarray] = {}
    for n, coeffs in p.items():
        if n > N:
            break
        # state[g]: rows = unread suffix words, columns = degree-g output words
        state = {0: coeffs.reshape(2 ** n, 1)}
        for m in range(n):
            rest = n - m - 1
            R = 2 ** rest
            new: dict[int, np.ndarray] = {}
            for g, arr in state.items():
                arr3 = arr.reshape(2, R, -1)
                for letter in (0, 1):
                    head = arr3[letter]
                    if not np.any(head):
                        continue
                    for j, img in images[letter]:
                        if g + j + rest > N:
                            break
                        blk = (head[:, :, None] * img[None, None, :]).reshape(R, -1)
                        new[g + j] = new[g + j] + blk if g + j in new else blk
            state = new
        for g, arr in state.items():
            vec = arr.reshape(-1)
            out[g] = out[g] + vec if g in out else vec
    return GradedSeries(out, N)


def word_matrices(U: np.ndarray, V: np.ndarray, max_degree: int) -> list[np.ndarray]:
    """Stacks of ordered products: entry ``n`` has shape ``(2**n, d, d)``."""
    U = np.asarray(U)
    V = np.asarray(V)
    if U.shape != V.shape or U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"need two square matrices of equal size, got {U.shape} and {V.shape}")
    stacks = [None, np.stack([U, V])]
    for _ in range(2, max_degree + 1):
        prev = stacks[-1]
        stacks.append(np.concatenate([U @ prev, V @ prev]))
    return stacks


def evaluate(p: GradedSeries, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Image of ``p`` under X -> U, Y -> V (contractive for ||U||, ||V|| <= 1)."""
    U = np.asarray(U)
    V = np.asarray(V)
    top = p.max_degree
    stacks = word_matrices(U, V, max(top, 1))
    dtype = object if U.dtype == object else complex
    out = np.zeros(U.shape, dtype=dtype)
    for n, vec in p.items():
        out = out + np.tensordot(vec.astype(dtype), stacks[n], axes=1)
    return out
