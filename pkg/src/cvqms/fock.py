"""Truncated Fock-space realizations of polynomials, states and weights."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import gammainc

from .ccr import Monomial, OperatorPolynomial, degree

SPARSE_FILL = 0.25


class TruncationError(RuntimeError):
    """Population that the truncated space cannot represent exceeds tolerance."""


class ConditioningError(RuntimeError):
    def __init__(self, msg: str, spectrum: np.ndarray):
        super().__init__(msg)
        self.spectrum = spectrum


@dataclass(frozen=True)
class FockBasisSpec:
    cutoffs: tuple[int, ...]
    edge_band: int = 0

    def __init__(self, cutoffs: int | Sequence[int], edge_band: int = 0):
        cut = (int(cutoffs),) if np.isscalar(cutoffs) else tuple(int(c) for c in cutoffs)
        if not cut or min(cut) < 1:
            raise ValueError(f"cutoffs must be >= 1, got {cut}")
        if not 0 <= edge_band < min(cut):
            raise ValueError(f"edge_band {edge_band} must lie in [0, {min(cut)})")
        object.__setattr__(self, "cutoffs", cut)
        object.__setattr__(self, "edge_band", int(edge_band))

    @property
    def modes(self) -> int:
        return len(self.cutoffs)

    @property
    def dim(self) -> int:
        return int(np.prod(self.cutoffs))

    def with_band(self, band: int) -> "FockBasisSpec":
        return FockBasisSpec(self.cutoffs, band)

    def occupations(self) -> np.ndarray:
        """(dim, modes) array of photon numbers, mode 0 most significant."""
        grids = np.meshgrid(*[np.arange(c) for c in self.cutoffs], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def index(self, *ns: int) -> int:
        return int(np.ravel_multi_index(ns, self.cutoffs))

    def interior(self, band: int | None = None) -> np.ndarray:
        """Indices whose occupations all stay ``band`` below their cutoff."""
        band = self.edge_band if band is None else band
        occ = self.occupations()
        ok = np.all(occ <= np.asarray(self.cutoffs) - 1 - band, axis=1)
        return np.flatnonzero(ok)

    def edge(self, band: int | None = None) -> np.ndarray:
        band = self.edge_band if band is None else band
        occ = self.occupations()
        hit = np.any(occ >= np.asarray(self.cutoffs) - band, axis=1)
        return np.flatnonzero(hit)


@dataclass(frozen=True)
class TruncatedOperator:
    basis: FockBasisSpec
    mat: np.ndarray | sp.csr_matrix
    hermitian_hint: bool = False

    def __post_init__(self):
        if self.mat.shape != (self.basis.dim, self.basis.dim):
            raise ValueError(f"matrix shape {self.mat.shape} does not match basis dim {self.basis.dim}")

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.mat)

    def dense(self) -> np.ndarray:
        return self.mat.toarray() if sp.issparse(self.mat) else np.asarray(self.mat)

    def sparse(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.mat)

    def dag(self) -> "TruncatedOperator":
        return TruncatedOperator(self.basis, self.mat.conj().T.tocsr() if self.is_sparse
                                 else self.mat.conj().T.copy(), self.hermitian_hint)

    def compress(self, idx: np.ndarray | None = None) -> np.ndarray:
        """Dense principal submatrix on ``idx`` (default: interior block)."""
        idx = self.basis.interior() if idx is None else idx
        return self.dense()[np.ix_(idx, idx)]


def _store(mat, basis: FockBasisSpec, hermitian: bool = False) -> TruncatedOperator:
    """Choose sparse storage below ``SPARSE_FILL`` population."""
    m = sp.csr_matrix(mat)
    m.eliminate_zeros()
    if m.nnz < SPARSE_FILL * basis.dim ** 2:
        return TruncatedOperator(basis, m, hermitian)
    return TruncatedOperator(basis, m.toarray(), hermitian)


@dataclass(frozen=True)
class DensityMatrix:
    op: TruncatedOperator
    psd_tolerance: float = 1e-10
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        rho = self.op.dense()
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-12:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace {tr!r} is not 1")
        lo = np.linalg.eigvalsh(rho).min()
        if lo < -self.psd_tolerance:
            raise ValueError(f"density matrix has eigenvalue {lo:.3e} below -{self.psd_tolerance:g}")

    @classmethod
    def from_array(cls, rho: np.ndarray, basis: FockBasisSpec, **kw) -> "DensityMatrix":
        return cls(TruncatedOperator(basis, np.asarray(rho, dtype=complex), True), **kw)

    @classmethod
    def from_vector(cls, psi: np.ndarray, basis: FockBasisSpec, **kw) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.from_array(np.outer(psi, psi.conj()), basis, **kw)

    @property
    def basis(self) -> FockBasisSpec:
        return self.op.basis

    @property
    def matrix(self) -> np.ndarray:
        return self.op.dense()


# -- polynomial realization ----------------------------------------------------

def mono_matrix(mono: Monomial, cutoff: int) -> sp.csr_matrix:
    """(a†)^i N^j a^k on |0..cutoff-1>; every stored entry is exact."""
    i, j, k = mono
    rows, cols, vals = [], [], []
    for n in range(k, cutoff):
        m = n - k
        if m + i >= cutoff:
            continue
        # sqrt(n!/m!) * m^j * sqrt((m+i)!/m!)
        v = math.sqrt(math.prod(range(m + 1, n + 1))) * float(m) ** j * math.sqrt(math.prod(range(m + 1, m + i + 1)))
        rows.append(m + i)
        cols.append(n)
        vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(cutoff, cutoff), dtype=float)


def realize(p: OperatorPolynomial, basis: FockBasisSpec) -> TruncatedOperator:
    if p.modes != basis.modes:
        raise ValueError(f"polynomial has {p.modes} modes, basis has {basis.modes}")
    d = degree(p)
    if d >= min(basis.cutoffs):
        raise ValueError(f"degree {d} is not below the smallest cutoff {min(basis.cutoffs)}")
    out = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for key, c in p.items():
        term = None
        for mono, cut in zip(key, basis.cutoffs):
            m = mono_matrix(mono, cut)
            term = m if term is None else sp.kron(term, m, format="csr")
        out = out + c * term
    return _store(out, basis)


def realize_dense(p: OperatorPolynomial, basis: FockBasisSpec) -> np.ndarray:
    return realize(p, basis).dense()


def weight_diagonal(k: float | Sequence[float], basis: FockBasisSpec, power: float = 0.25) -> np.ndarray:
    """Diagonal of prod_r (N_r + 1)^(power * k_r); scalar k applies to every mode."""
    ks = np.broadcast_to(np.asarray(k, dtype=float), (basis.modes,))
    if np.any(ks < 0):
        raise ValueError("Sobolev order must be non-negative")
    occ = basis.occupations()
    return np.prod((occ + 1.0) ** (power * ks), axis=1)


def weight_matrix(k: float | Sequence[float], basis: FockBasisSpec) -> TruncatedOperator:
    return TruncatedOperator(basis, sp.diags(weight_diagonal(k, basis)).tocsr().astype(complex), True)


# -- states --------------------------------------------------------------------

def coherent_leakage(alpha: complex, cutoff: int) -> float:
    """Poisson tail sum_{n >= cutoff} e^{-|a|^2} |a|^{2n} / n!."""
    lam = abs(alpha) ** 2
    return 0.0 if lam == 0 else float(gammainc(cutoff, lam))


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    amp = np.empty(cutoff, dtype=complex)
    amp[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, cutoff):
        amp[n] = amp[n - 1] * alpha / math.sqrt(n)
    return amp


def coherent_vector(alpha: complex | Sequence[complex], basis: FockBasisSpec,
                    leakage_tolerance: float = 1e-10) -> tuple[np.ndarray, float, float]:
    """Renormalized truncated coherent vector; returns (psi, leakage, norm factor)."""
    alphas = [alpha] * basis.modes if np.isscalar(alpha) else list(alpha)
    if len(alphas) != basis.modes:
        raise ValueError("one amplitude per mode required")
    psi = np.ones(1, dtype=complex)
    kept = 1.0
    for al, cut in zip(alphas, basis.cutoffs):
        leak = coherent_leakage(al, cut)
        if leak > leakage_tolerance:
            raise TruncationError(f"coherent amplitude {al} leaks {leak:.3e} beyond cutoff {cut}")
        kept *= 1.0 - leak
        psi = np.kron(psi, coherent_amplitudes(al, cut))
    norm = np.linalg.norm(psi)
    return psi / norm, 1.0 - kept, 1.0 / norm


def coherent_state(alpha: complex | Sequence[complex], basis: FockBasisSpec,
                   leakage_tolerance: float = 1e-10) -> DensityMatrix:
    psi, leak, factor = coherent_vector(alpha, basis, leakage_tolerance)
    return DensityMatrix.from_array(np.outer(psi, psi.conj()), basis,
                                    meta={"leakage": leak, "renormalization": factor})


def fock_state(ns: int | Sequence[int], basis: FockBasisSpec) -> DensityMatrix:
    ns = (ns,) if np.isscalar(ns) else tuple(ns)
    psi = np.zeros(basis.dim, dtype=complex)
    psi[basis.index(*ns)] = 1.0
    return DensityMatrix.from_vector(psi, basis)


def geometric_state(ratio: float, basis: FockBasisSpec) -> DensityMatrix:
    """Unit-trace diagonal state with populations proportional to ratio^n."""
    if basis.modes != 1:
        raise ValueError("geometric_state is single-mode")
    p = ratio ** np.arange(basis.cutoffs[0], dtype=float)
    return DensityMatrix.from_array(np.diag(p / p.sum()).astype(complex), basis)


@dataclass(frozen=True)
class CatCode:
    vectors: np.ndarray      # (dim, l) orthonormal columns
    gram: np.ndarray         # Gram matrix of the normalized coherent vectors
    matrices: list[np.ndarray]
    leakage: float


def cat_code_basis(alpha: complex, l: int, basis: FockBasisSpec,
                   leakage_tolerance: float = 1e-10, cond_tol: float = 1e-10) -> CatCode:
    """Orthonormal basis of span{|a_i><a_j|} over the l-th roots a e^{2 pi i j / l}."""
    if l < 1:
        raise ValueError("l must be positive")
    if basis.modes != 1:
        raise ValueError("cat code is single-mode")
    cols, leak = [], 0.0
    for j in range(l):
        psi, lk, _ = coherent_vector(alpha * np.exp(2j * np.pi * j / l), basis, leakage_tolerance)
        cols.append(psi)
        leak = max(leak, lk)
    V = np.stack(cols, axis=1)
    gram = V.conj().T @ V
    spec = np.linalg.eigvalsh(gram)
    if spec.min() < cond_tol:
        raise ConditioningError(f"coherent Gram matrix is near-singular (min eig {spec.min():.3e})", spec)
    Q = _gram_schmidt(V)
    mats = [np.outer(Q[:, i], Q[:, j].conj()) for i in range(l) for j in range(l)]
    return CatCode(Q, gram, mats, leak)


def _gram_schmidt(V: np.ndarray) -> np.ndarray:
    Q = np.zeros_like(V)
    for c in range(V.shape[1]):
        v = V[:, c].copy()
        for _ in range(2):  # second pass restores orthogonality lost to rounding
            v -= Q[:, :c] @ (Q[:, :c].conj().T @ v)
        Q[:, c] = v / np.linalg.norm(v)
    return Q


def edge_population(rho: np.ndarray, basis: FockBasisSpec, band: int | None = None) -> float:
    band = basis.edge_band if band is None else band
    if band == 0:
        return 0.0
    idx = basis.edge(band)
    return float(np.real(np.diagonal(rho)[idx]).sum())


# -- coordinate-list text export ------------------------------------------------

def export_coo(op: TruncatedOperator | np.ndarray, basis: FockBasisSpec | None = None) -> str:
    if isinstance(op, TruncatedOperator):
        basis, mat = op.basis, op.sparse()
    else:
        mat = sp.csr_matrix(op)
    coo = mat.tocoo()
    buf = io.StringIO()
    buf.write("# cutoffs " + " ".join(str(c) for c in basis.cutoffs) + "\n")
    order = np.lexsort((coo.col, coo.row))
    for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        v = complex(v)
        buf.write(f"{r} {c} {v.real!r} {v.imag!r}\n")
    return buf.getvalue()


def import_coo(text: str) -> TruncatedOperator:
    lines = text.strip().splitlines()
    if not lines[0].startswith("# cutoffs"):
        raise ValueError("missing '# cutoffs' header")
    basis = FockBasisSpec([int(x) for x in lines[0].split()[2:]])
    rows, cols, vals = [], [], []
    for ln in lines[1:]:
        r, c, re_, im_ = ln.split()
        rows.append(int(r))
        cols.append(int(c))
        vals.append(complex(float(re_), float(im_)))
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim), dtype=complex)
    return TruncatedOperator(basis, mat)
