"""GKSL generators built from ladder-operator polynomials.

Rates are folded into the jumps: ``kappa * D[L]`` is stored as the jump
``sqrt(kappa) * L``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .ccr import OperatorPolynomial, adjoint, degree, from_coefficients, gksl_G, is_symmetric, multiply
from .fock import FockBasisSpec, TruncatedOperator, realize

P = OperatorPolynomial


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class GkslGenerator:
    H: OperatorPolynomial
    jumps: tuple[OperatorPolynomial, ...]
    G: OperatorPolynomial = field(init=False)
    degree: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "jumps", tuple(self.jumps))
        for L in self.jumps:
            if L.modes != self.H.modes:
                raise ModelError("jump and Hamiltonian mode counts differ")
        object.__setattr__(self, "G", gksl_G(self.H, self.jumps))
        object.__setattr__(self, "degree", max([degree(self.H)] + [degree(L) for L in self.jumps]))

    @property
    def modes(self) -> int:
        return self.H.modes

    def __add__(self, other: "GkslGenerator") -> "GkslGenerator":
        return GkslGenerator(self.H + other.H, self.jumps + other.jumps)

    def scaled(self, rate: float) -> "GkslGenerator":
        if rate < 0:
            raise ModelError("rates must be non-negative")
        r = math.sqrt(rate)
        return GkslGenerator(self.H * rate, tuple(L * r for L in self.jumps))

    def trace_defect(self) -> OperatorPolynomial:
        """G + G† + sum L†L, which vanishes for any GKSL generator."""
        out = self.G + adjoint(self.G)
        for L in self.jumps:
            out = out + multiply(adjoint(L), L)
        return out


def build(H: OperatorPolynomial | None, jumps: Sequence[OperatorPolynomial], modes: int | None = None) -> GkslGenerator:
    if H is None:
        modes = modes or (jumps[0].modes if jumps else 1)
        H = P.zero(modes)
    gen = GkslGenerator(H, tuple(jumps))
    scale = max([1.0, gen.G.max_abs_coefficient()])
    if not gen.trace_defect().isclose(P.zero(gen.modes), atol=1e-12 * scale):
        raise ModelError("generator is not trace-annihilating")
    return gen


def dissipator(L: OperatorPolynomial, rate: float = 1.0) -> GkslGenerator:
    return build(None, [L * math.sqrt(rate)])


def hamiltonian(H: OperatorPolynomial, strength: float = 1.0) -> GkslGenerator:
    return build(H * strength, [])


# -- realized generators -------------------------------------------------------------

@dataclass(frozen=True)
class RealizedGenerator:
    basis: FockBasisSpec
    G: sp.csr_matrix
    Gdag: sp.csr_matrix
    Ls: tuple[sp.csr_matrix, ...]
    Ldags: tuple[sp.csr_matrix, ...]
    degree: int

    @property
    def dim(self) -> int:
        return self.basis.dim

    def G_op(self) -> TruncatedOperator:
        return TruncatedOperator(self.basis, self.G)

    def dense(self) -> "DenseOps":
        return DenseOps(self.G.toarray(), [L.toarray() for L in self.Ls])


@dataclass(frozen=True)
class DenseOps:
    G: np.ndarray
    Ls: list[np.ndarray]


def _csr(op: TruncatedOperator) -> sp.csr_matrix:
    return sp.csr_matrix(op.mat, dtype=complex)


def realize_generator(gen: GkslGenerator, basis: FockBasisSpec) -> RealizedGenerator:
    band = max(basis.edge_band, gen.degree)
    basis = basis.with_band(band)
    G = _csr(realize(gen.G, basis))
    Ls = tuple(_csr(realize(L, basis)) for L in gen.jumps)
    return RealizedGenerator(basis, G, G.conj().T.tocsr(), Ls,
                             tuple(L.conj().T.tocsr() for L in Ls), gen.degree)


def _h(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2).conj()


def apply(gen: RealizedGenerator | DenseOps, rho: np.ndarray, hermitian: bool = False) -> np.ndarray:
    """G rho + rho G† + sum_j L_j rho L_j†; ``rho`` may be a stack (..., D, D).

    ``hermitian=True`` promises rho = rho† and halves the work:
    G rho + rho G† = X + X† with X = G rho, and L rho L† = L (L rho)†.
    """
    rho = np.asarray(rho)
    if rho.shape[-2:] != (gen.G.shape[0],) * 2:
        raise ValueError(f"operator shape {rho.shape} does not match generator dim {gen.G.shape[0]}")
    ops = gen.dense() if rho.ndim > 2 and isinstance(gen, RealizedGenerator) else gen
    if hermitian and rho.ndim == 2:
        # every term is symmetrized so the result is exactly Hermitian; otherwise
        # rounding seeds an anti-Hermitian part that this formula would amplify
        X = ops.G @ rho
        for L in ops.Ls:
            X += 0.5 * (L @ np.ascontiguousarray((L @ rho).conj().T))
        return X + X.conj().T
    rho_h = np.ascontiguousarray(_h(rho))
    out = ops.G @ rho
    out += _h(ops.G @ rho_h)
    for L in ops.Ls:
        out += L @ np.ascontiguousarray(_h(L @ rho_h))
    return out


def adjoint_apply(gen: RealizedGenerator, X: np.ndarray) -> np.ndarray:
    """Heisenberg action G† X + X G + sum_j L_j† X L_j."""
    X = np.asarray(X)
    if X.shape != (gen.dim, gen.dim):
        raise ValueError(f"operator shape {X.shape} does not match generator dim {gen.dim}")
    out = gen.Gdag @ X
    out += _h(gen.Gdag @ _h(X))
    for L, Ld in zip(gen.Ls, gen.Ldags):
        out += Ld @ _h(Ld @ _h(X))
    return out


def superoperator(gen: RealizedGenerator) -> sp.csr_matrix:
    """Row-major vectorized generator: vec(L(rho)) = S vec(rho)."""
    I = sp.identity(gen.dim, dtype=complex, format="csr")
    S = sp.kron(gen.G, I) + sp.kron(I, gen.G.conj())
    for L in gen.Ls:
        S = S + sp.kron(L, L.conj())
    return S.tocsr()


# -- time-dependent coefficients ------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: complex

    def __call__(self, t: float) -> complex:
        return complex(self.value)


@dataclass(frozen=True)
class Phase:
    """value * exp(i omega t)."""
    value: complex
    omega: float

    def __call__(self, t: float) -> complex:
        return complex(self.value) * cmath.exp(1j * self.omega * t)


@dataclass(frozen=True)
class Affine:
    """c0 + c1 exp(i omega t)."""
    c0: complex
    c1: complex
    omega: float

    def __call__(self, t: float) -> complex:
        return complex(self.c0) + complex(self.c1) * cmath.exp(1j * self.omega * t)


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear interpolation of samples, held constant past the ends."""
    times: tuple[float, ...]
    values: tuple[complex, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) < 1:
            raise ModelError("tabulated coefficient needs matching, non-empty samples")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ModelError("tabulated times must be strictly increasing")

    def __call__(self, t: float) -> complex:
        v = np.asarray(self.values, dtype=complex)
        return complex(np.interp(t, self.times, v.real) + 1j * np.interp(t, self.times, v.imag))


Coefficient = Const | Phase | Affine | Tabulated
Part = tuple[Coefficient, OperatorPolynomial]


@dataclass(frozen=True)
class TimeDependentGenerator:
    """H(s) = sum f_r(s) H_r and L_j(s) = sum f_jr(s) P_jr with catalog coefficients."""
    modes: int
    hamiltonian: tuple[Part, ...]
    jumps: tuple[tuple[Part, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", tuple(self.hamiltonian))
        object.__setattr__(self, "jumps", tuple(tuple(j) for j in self.jumps))
        for f, Hr in self.hamiltonian:
            if not isinstance(f, (Const, Tabulated)) or abs(np.imag(f(0.0))) > 0 \
                    or (isinstance(f, Tabulated) and np.any(np.imag(f.values))):
                raise ModelError("Hamiltonian coefficients must be real constants or real tables")
            if not is_symmetric(Hr, atol=1e-12):
                raise ModelError("Hamiltonian parts must be symmetric")
        for j in self.jumps:
            for _, Pr in j:
                if Pr.modes != self.modes:
                    raise ModelError("mode count mismatch in jump part")

    @property
    def degree(self) -> int:
        ds = [degree(Hr) for _, Hr in self.hamiltonian]
        ds += [degree(Pr) for j in self.jumps for _, Pr in j]
        return max(ds, default=0)

    def at(self, s: float) -> GkslGenerator:
        H = P.zero(self.modes)
        for f, Hr in self.hamiltonian:
            H = H + Hr * f(s).real
        jumps = []
        for j in self.jumps:
            L = P.zero(self.modes)
            for f, Pr in j:
                L = L + Pr * f(s)
            jumps.append(L)
        return GkslGenerator(H, tuple(jumps))

    def realize(self, basis: FockBasisSpec) -> "RealizedTimeDependent":
        return RealizedTimeDependent.build(self, basis)


@dataclass(frozen=True)
class RealizedTimeDependent:
    """Matrices for every part and every pair P_r† P_q, recombined per time."""
    tdgen: TimeDependentGenerator
    basis: FockBasisSpec
    H_parts: tuple[sp.csr_matrix, ...]
    L_parts: tuple[tuple[sp.csr_matrix, ...], ...]
    K_parts: tuple[tuple[tuple[sp.csr_matrix, ...], ...], ...]

    @classmethod
    def build(cls, td: TimeDependentGenerator, basis: FockBasisSpec) -> "RealizedTimeDependent":
        basis = basis.with_band(max(basis.edge_band, td.degree))
        Hs = tuple(_csr(realize(Hr, basis)) for _, Hr in td.hamiltonian)
        Ls, Ks = [], []
        for j in td.jumps:
            Ls.append(tuple(_csr(realize(Pr, basis)) for _, Pr in j))
            Ks.append(tuple(tuple(_csr(realize(multiply(adjoint(Pr), Pq), basis)) for _, Pq in j)
                            for _, Pr in j))
        return cls(td, basis, Hs, tuple(Ls), tuple(Ks))

    def at(self, s: float) -> RealizedGenerator:
        td = self.tdgen
        D = self.basis.dim
        G = sp.csr_matrix((D, D), dtype=complex)
        for (f, _), Hm in zip(td.hamiltonian, self.H_parts):
            G = G - 1j * f(s).real * Hm
        Ls = []
        for j, Lp, Kp in zip(td.jumps, self.L_parts, self.K_parts):
            vals = [f(s) for f, _ in j]
            L = sp.csr_matrix((D, D), dtype=complex)
            for v, Lm in zip(vals, Lp):
                L = L + v * Lm
            for r, vr in enumerate(vals):
                for q, vq in enumerate(vals):
                    G = G - 0.5 * np.conj(vr) * vq * Kp[r][q]
            Ls.append(L.tocsr())
        G = G.tocsr()
        return RealizedGenerator(self.basis, G, G.conj().T.tocsr(), tuple(Ls),
                                 tuple(L.conj().T.tocsr() for L in Ls), td.degree)


def materialize_at(tdgen: TimeDependentGenerator, s: float, basis: FockBasisSpec) -> RealizedGenerator:
    if s < 0:
        raise ModelError("time must be non-negative")
    return tdgen.realize(basis).at(s)


def constant_td(gen: GkslGenerator) -> TimeDependentGenerator:
    """Wrap a time-independent generator with frozen coefficients."""
    H = () if gen.H.is_zero() else ((Const(1.0), gen.H),)
    return TimeDependentGenerator(gen.modes, H, tuple(((Const(1.0), L),) for L in gen.jumps))


# -- model catalog -------------------------------------------------------------------------

def _alpha(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _positive(name: str, v: float, strict: bool = True) -> float:
    v = float(v)
    if not math.isfinite(v) or v < 0 or (strict and v == 0):
        raise ModelError(f"{name} must be {'positive' if strict else 'non-negative'}, got {v}")
    return v


def displacement(modes: int = 1, mode: int = 0) -> OperatorPolynomial:
    return P.annihilation(mode, modes) + P.creation(mode, modes)


def pure_loss(kappa: float = 1.0) -> GkslGenerator:
    return build(None, [P.annihilation() * math.sqrt(_positive("kappa", kappa))])


def qou(lam: float, mu: float) -> GkslGenerator:
    """lam^2 D[a] + mu^2 D[a†]."""
    lam = _positive("lambda", lam, strict=False)
    mu = _positive("mu", mu, strict=False)
    jumps = [P.annihilation() * lam]
    if mu:
        jumps.append(P.creation() * mu)
    return build(None, jumps)


def l_photon_jump(l: int, alpha: complex, mode: int = 0, modes: int = 1) -> OperatorPolynomial:
    return P.monomial(0, 0, l, mode, modes) - P.scalar(alpha ** l, modes)


def l_photon(l: int = 2, alpha: complex = 1.0, kappa: float = 1.0) -> GkslGenerator:
    if int(l) != l or l < 1:
        raise ModelError(f"l must be a positive integer, got {l}")
    return build(None, [l_photon_jump(int(l), _alpha(alpha)) * math.sqrt(_positive("kappa", kappa))])


def l_photon_plus_hamiltonian(l: int = 2, alpha: complex = 1.0, kappa: float = 1.0, eps: float = 1.0,
                              hamiltonian: OperatorPolynomial | Sequence | None = None) -> GkslGenerator:
    H = displacement() if hamiltonian is None else hamiltonian
    if not isinstance(H, OperatorPolynomial):
        H = from_coefficients(1, H)
    if degree(H) > 2 * (int(l) - 1):
        raise ModelError(f"Hamiltonian degree {degree(H)} exceeds 2(l-1) = {2 * (int(l) - 1)}")
    if not is_symmetric(H, atol=1e-12):
        raise ModelError("Hamiltonian is not symmetric")
    return l_photon(l, alpha, kappa) + hamiltonian_part(H, _positive("eps", eps, strict=False))


def hamiltonian_part(H: OperatorPolynomial, eps: float) -> GkslGenerator:
    return build(H * eps, [], modes=H.modes)


def z_theta(alpha: complex = 1.0, kappa: float = 1.0, eps: float = 0.1) -> GkslGenerator:
    # a^2 - alpha^2: the jump used in the gate's generator and in its stability proof
    return l_photon(2, alpha, kappa) + hamiltonian_part(displacement(), _positive("eps", eps, strict=False))


def x_gate(alpha: complex = 1.0, kappa: float = 1.0, T: float = 1.0) -> TimeDependentGenerator:
    alpha = _alpha(alpha)
    s = math.sqrt(_positive("kappa", kappa))
    w = 2 * math.pi / _positive("T", T)
    jump = ((Const(s), P.monomial(0, 0, 2)), (Phase(-s * alpha ** 2, w), P.identity()))
    return TimeDependentGenerator(1, (), (jump,))


def cnot(alpha: complex = 1.0, kappa: float = 1.0, eps: float = 0.1, T: float = 1.0) -> TimeDependentGenerator:
    """kappa D[a^2 - alpha^2] + eps D[b^2 - alpha^2 - alpha/2 (1 - e^{2 pi i t/T})(a - alpha)]."""
    alpha = _alpha(alpha)
    sk = math.sqrt(_positive("kappa", kappa))
    se = math.sqrt(_positive("eps", eps, strict=False))
    w = 2 * math.pi / _positive("T", T)
    a = P.annihilation(0, 2)
    b2 = P.monomial(0, 0, 2, 1, 2)
    shift = a - P.scalar(alpha, 2)
    first = ((Const(sk), l_photon_jump(2, alpha, 0, 2)),)
    jumps = [first]
    if se:
        second = ((Const(se), b2 - P.scalar(alpha ** 2, 2) - shift * (alpha / 2)),
                  (Phase(se * alpha / 2, w), shift))
        jumps.append(second)
    return TimeDependentGenerator(2, (), tuple(jumps))


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    factory: Callable
    modes: int
    params: str
    summary: str
    note: str = ""


CATALOG: dict[str, CatalogEntry] = {e.name: e for e in [
    CatalogEntry("pure_loss", pure_loss, 1, "kappa>0", "kappa D[a]"),
    CatalogEntry("qou", qou, 1, "lam>=0, mu>=0 (decaying iff lam>mu)",
                 "lam^2 D[a] + mu^2 D[a+]", "quantum Ornstein-Uhlenbeck (Cipriani-Fagnola-Lindsay 2000)"),
    CatalogEntry("l_photon", l_photon, 1, "l>=1 integer, alpha complex, kappa>0",
                 "kappa D[a^l - alpha^l]", "code space spanned by |alpha e^{2 pi i j/l}> (Azouit-Sarlette-Rouchon 2016)"),
    CatalogEntry("l_photon_plus_hamiltonian", l_photon_plus_hamiltonian, 1,
                 "l, alpha, kappa, eps>=0, hamiltonian rows with deg(H) <= 2(l-1)",
                 "kappa D[a^l - alpha^l] - i eps [H, .]"),
    CatalogEntry("z_theta", z_theta, 1, "alpha, kappa>0, eps>=0",
                 "kappa D[a^2 - alpha^2] - i eps [a + a+, .]", "Z(theta) cat gate (Mirrahimi et al. 2014)"),
    CatalogEntry("x_gate", x_gate, 1, "alpha, kappa>0, T>0",
                 "kappa D[a^2 - e^{2 pi i t/T} alpha^2]", "time-dependent X cat gate (Guillaud-Mirrahimi 2019)"),
    CatalogEntry("cnot", cnot, 2, "alpha, kappa>0, eps>=0, T>0",
                 "kappa D[a^2 - alpha^2] + eps D[b^2 - alpha^2 - alpha/2 (1 - e^{2 pi i t/T})(a - alpha)]",
                 "two-mode, time-dependent CNOT cat gate (Guillaud-Mirrahimi 2019)"),
]}

_ALIASES = {"lambda": "lam"}


def catalog(name: str, **params) -> GkslGenerator | TimeDependentGenerator:
    try:
        entry = CATALOG[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; known: {', '.join(CATALOG)}") from None
    params = {_ALIASES.get(k, k): v for k, v in params.items()}
    try:
        return entry.factory(**params)
    except TypeError as exc:
        raise ModelError(f"invalid parameters for {name}: {exc}") from None


def catalog_text() -> str:
    lines = []
    for e in CATALOG.values():
        mode = "two-mode" if e.modes == 2 else "single-mode"
        lines.append(f"{e.name:<28s} {mode:<12s} {e.summary}")
        lines.append(f"{'':<28s} params: {e.params}")
        if e.note:
            lines.append(f"{'':<28s} {e.note}")
    return "\n".join(lines) + "\n"
