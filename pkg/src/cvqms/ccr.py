"""Normal-ordered polynomials in bosonic ladder operators.

Every single-mode word in ``a``, ``a†`` reduces under ``[a, a†] = 1`` to a
unique sum of monomials ``(a†)^i N^j a^k`` with ``min(i, k) == 0``: charge
``i - k`` fixes the shape, and the N-polynomial is determined by its action
on the Fock basis.  Reduction coefficients are integers and are computed in
exact Python integer arithmetic; only user-supplied coefficients are floats.
"""
from __future__ import annotations

import math
from functools import lru_cache
from itertools import product
from typing import Iterable, Mapping, Sequence

# (i, j, k) -> (a†)^i N^j a^k
Monomial = tuple[int, int, int]
Term = tuple[Monomial, ...]

_ONE: Monomial = (0, 0, 0)


class CCRError(ValueError):
    pass


# -- integer polynomials in N, coefficient lists low -> high -----------------

def _pmul(p: Sequence[int], q: Sequence[int]) -> list[int]:
    out = [0] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        if x:
            for j, y in enumerate(q):
                out[i + j] += x * y
    return out


def _pshift(p: Sequence[int], m: int) -> list[int]:
    """p(N) -> p(N + m)."""
    out = [0] * len(p)
    for deg, c in enumerate(p):
        if c:
            for r in range(deg + 1):
                out[r] += c * math.comb(deg, r) * m ** (deg - r)
    return out


def _rising(shift: int, count: int) -> list[int]:
    """(N + shift + 1)(N + shift + 2)...(N + shift + count)."""
    out = [1]
    for r in range(1, count + 1):
        out = _pmul(out, [shift + r, 1])
    return out


def _falling(count: int) -> list[int]:
    """N (N - 1) ... (N - count + 1)."""
    out = [1]
    for s in range(count):
        out = _pmul(out, [-s, 1])
    return out


def _npow(j: int) -> list[int]:
    return [0] * j + [1]


@lru_cache(maxsize=4096)
def mono_product(m1: Monomial, m2: Monomial) -> tuple[tuple[Monomial, int], ...]:
    """Canonical expansion of the single-mode product ``m1 · m2``."""
    i1, j1, k1 = m1
    i2, j2, k2 = m2
    # a^k1 (a†)^i2, then push the leftover ladder power through the N-polys
    if k1 >= i2:
        m = k1 - i2
        poly = _pmul(_pmul(_npow(j1), _rising(m, i2)), _pshift(_npow(j2), m))
        up, down = i1, m + k2
    else:
        m = i2 - k1
        poly = _pmul(_pshift(_pmul(_npow(j1), _rising(0, k1)), m), _npow(j2))
        up, down = i1 + m, k2
    # (a†)^I F(N) a^R with both I, R > 0 collapses via (a†)^r a^r = N(N-1)...
    r = min(up, down)
    if r:
        poly = _pmul(_pshift(poly, -r), _falling(r))
        up, down = up - r, down - r
    return tuple(((up, j, down), c) for j, c in enumerate(poly) if c)


def mono_degree(m: Monomial) -> int:
    return m[0] + m[2] + 2 * m[1]


class OperatorPolynomial:
    """Immutable polynomial in ``a_r, a_r†`` over ``modes`` commuting modes.

    Terms map a tuple of per-mode ``(i, j, k)`` to a complex coefficient;
    zero coefficients are never stored.
    """

    __slots__ = ("_modes", "_terms", "_hash")

    def __init__(self, modes: int, terms: Mapping[Term, complex] | Iterable[tuple[Term, complex]] = ()):
        if modes < 1:
            raise CCRError("modes must be positive")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Term, complex] = {}
        for key, c in items:
            key = tuple(tuple(int(v) for v in mono) for mono in key)
            if len(key) != modes:
                raise CCRError(f"term {key} does not have {modes} modes")
            for mono in key:
                if min(mono) < 0 or (mono[0] and mono[2]):
                    raise CCRError(f"non-canonical monomial {mono}")
            acc[key] = acc.get(key, 0) + complex(c)
        self._modes = modes
        self._terms = {k: v for k, v in sorted(acc.items()) if v != 0}
        self._hash = None

    # -- constructors --------------------------------------------------------
    @classmethod
    def scalar(cls, c: complex, modes: int = 1) -> "OperatorPolynomial":
        return cls(modes, {(_ONE,) * modes: c})

    @classmethod
    def identity(cls, modes: int = 1) -> "OperatorPolynomial":
        return cls.scalar(1.0, modes)

    @classmethod
    def zero(cls, modes: int = 1) -> "OperatorPolynomial":
        return cls(modes)

    @classmethod
    def monomial(cls, i: int, j: int, k: int, mode: int = 0, modes: int = 1,
                 coeff: complex = 1.0) -> "OperatorPolynomial":
        """``coeff · (a†)^i N^j a^k`` on ``mode``; reduced if i, k > 0."""
        if not 0 <= mode < modes:
            raise CCRError(f"mode {mode} out of range for {modes} modes")
        terms = {}
        for mono, c in mono_product((i, j, 0), (0, 0, k)):
            key = [_ONE] * modes
            key[mode] = mono
            terms[tuple(key)] = coeff * c
        return cls(modes, terms)

    @classmethod
    def annihilation(cls, mode: int = 0, modes: int = 1) -> "OperatorPolynomial":
        return cls.monomial(0, 0, 1, mode, modes)

    @classmethod
    def creation(cls, mode: int = 0, modes: int = 1) -> "OperatorPolynomial":
        return cls.monomial(1, 0, 0, mode, modes)

    @classmethod
    def number(cls, mode: int = 0, modes: int = 1) -> "OperatorPolynomial":
        return cls.monomial(0, 1, 0, mode, modes)

    # -- accessors -----------------------------------------------------------
    @property
    def modes(self) -> int:
        return self._modes

    @property
    def terms(self) -> dict[Term, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, key: Term) -> complex:
        return self._terms.get(key, 0j)

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # -- algebra ---------------------------------------------------------------
    def _check(self, other: "OperatorPolynomial") -> None:
        if other._modes != self._modes:
            raise CCRError(f"mode mismatch: {self._modes} vs {other._modes}")

    def _coerce(self, other) -> "OperatorPolynomial":
        if isinstance(other, OperatorPolynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, complex)):
            return OperatorPolynomial.scalar(other, self._modes)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc = dict(self._terms)
        for k, v in other._terms.items():
            acc[k] = acc.get(k, 0) + v
        return OperatorPolynomial(self._modes, acc)

    __radd__ = __add__

    def __neg__(self):
        return OperatorPolynomial(self._modes, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return OperatorPolynomial(self._modes, {k: v * other for k, v in self._terms.items()})
        if isinstance(other, OperatorPolynomial):
            return multiply(self, other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self * other
        return NotImplemented

    def __pow__(self, n: int):
        if n < 0:
            raise CCRError("negative powers are not polynomials")
        out = OperatorPolynomial.identity(self._modes)
        for _ in range(n):
            out = multiply(out, self)
        return out

    def __eq__(self, other):
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        return self._modes == other._modes and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._modes, tuple(self._terms.items())))
        return self._hash

    def isclose(self, other: "OperatorPolynomial", atol: float = 1e-12) -> bool:
        self._check(other)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coefficient(k) - other.coefficient(k)) <= atol for k in keys)

    def adjoint(self) -> "OperatorPolynomial":
        return adjoint(self)

    @property
    def dag(self) -> "OperatorPolynomial":
        return adjoint(self)

    def degree(self) -> int:
        return degree(self)

    def __repr__(self):
        if not self._terms:
            return f"OperatorPolynomial({self._modes}, 0)"
        parts = []
        for key, c in self._terms.items():
            word = []
            for r, (i, j, k) in enumerate(key):
                sfx = f"_{r}" if self._modes > 1 else ""
                if i:
                    word.append(f"ad{sfx}^{i}")
                if j:
                    word.append(f"N{sfx}^{j}")
                if k:
                    word.append(f"a{sfx}^{k}")
            parts.append(f"({c:g})" + ("*" + "*".join(word) if word else ""))
        return " + ".join(parts)

    # -- text serialization ----------------------------------------------------
    def dumps(self) -> str:
        """One term per line: ``re im : i,j,k i,j,k ...`` in monomial order."""
        lines = [f"modes {self._modes}"]
        for key, c in self._terms.items():
            monos = " ".join(f"({i},{j},{k})" for i, j, k in key)
            lines.append(f"{c.real!r} {c.imag!r} : {monos}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "OperatorPolynomial":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("modes"):
            raise CCRError("missing 'modes' header")
        modes = int(lines[0].split()[1])
        terms = []
        for ln in lines[1:]:
            coeff, _, monos = ln.partition(":")
            re_, im_ = coeff.split()
            key = tuple(tuple(int(v) for v in tok.strip("()").split(",")) for tok in monos.split())
            terms.append((key, complex(float(re_), float(im_))))
        return cls(modes, terms)


def multiply(p: OperatorPolynomial, q: OperatorPolynomial) -> OperatorPolynomial:
    """Canonical normal form of the operator product ``p q``."""
    if p.modes != q.modes:
        raise CCRError(f"mode mismatch: {p.modes} vs {q.modes}")
    acc: dict[Term, complex] = {}
    for k1, c1 in p.items():
        for k2, c2 in q.items():
            per_mode = [mono_product(m1, m2) for m1, m2 in zip(k1, k2)]
            for combo in product(*per_mode):
                coeff = 1
                for _, c in combo:
                    coeff *= c
                key = tuple(m for m, _ in combo)
                acc[key] = acc.get(key, 0) + c1 * c2 * coeff
    return OperatorPolynomial(p.modes, acc)


def adjoint(p: OperatorPolynomial) -> OperatorPolynomial:
    # ((a†)^i N^j a^k)† = (a†)^k N^j a^i, already canonical
    return OperatorPolynomial(p.modes, {
        tuple((k, j, i) for i, j, k in key): c.conjugate() for key, c in p.items()
    })


def degree(p: OperatorPolynomial) -> int:
    return max((sum(mono_degree(m) for m in key) for key in p.terms), default=0)


def is_symmetric(p: OperatorPolynomial, atol: float = 0.0) -> bool:
    return p.isclose(adjoint(p), atol=atol) if atol else p == adjoint(p)


def gksl_G(H: OperatorPolynomial, jumps: Sequence[OperatorPolynomial],
           atol: float = 1e-12) -> OperatorPolynomial:
    """``-iH - 1/2 sum_j L_j† L_j``."""
    if not is_symmetric(H, atol=atol):
        raise CCRError("Hamiltonian polynomial is not symmetric")
    G = H * (-1j)
    for L in jumps:
        G = G - 0.5 * multiply(adjoint(L), L)
    return G


def from_coefficients(modes: int, rows: Iterable[Sequence]) -> OperatorPolynomial:
    """Build from rows ``[re, im, i0, j0, k0, i1, j1, k1, ...]``; non-canonical
    per-mode triples are reduced."""
    out = OperatorPolynomial.zero(modes)
    for row in rows:
        re_, im_, *idx = row
        if len(idx) != 3 * modes:
            raise CCRError(f"row {row!r} needs {3 * modes} indices")
        term = OperatorPolynomial.scalar(complex(re_, im_), modes)
        for r in range(modes):
            i, j, k = idx[3 * r:3 * r + 3]
            term = term * OperatorPolynomial.monomial(i, j, k, r, modes)
        out = out + term
    return out
