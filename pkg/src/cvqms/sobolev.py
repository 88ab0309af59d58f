"""Weighted trace norms ||(N+1)^{k/4} x (N+1)^{k/4}||_1 and related quantities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fock import DensityMatrix, FockBasisSpec, TruncatedOperator, weight_diagonal

PSD_THRESHOLD = 1e-12

Order = float | Sequence[float]


def _arr(x) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.matrix
    if isinstance(x, TruncatedOperator):
        return x.dense()
    return np.asarray(x)


def _basis_of(x, basis: FockBasisSpec | None) -> FockBasisSpec:
    if basis is not None:
        return basis
    if isinstance(x, (DensityMatrix, TruncatedOperator)):
        return x.basis
    raise ValueError("a basis is required for raw arrays")


def trace_norm(x) -> float:
    """Sum of singular values; Hermitian input uses the eigenvalue route."""
    m = _arr(x)
    if np.allclose(m, m.conj().T, rtol=0, atol=1e-14 * max(1.0, np.abs(m).max(initial=0.0))):
        return float(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T))).sum())
    return float(np.linalg.svd(m, compute_uv=False).sum())


def weighted(x, k: Order, basis: FockBasisSpec | None = None) -> np.ndarray:
    w = weight_diagonal(k, _basis_of(x, basis))
    return w[:, None] * _arr(x) * w[None, :]


def sobolev_norm(x, k: Order, basis: FockBasisSpec | None = None) -> float:
    y = weighted(x, k, basis)
    if np.allclose(y, y.conj().T, rtol=0, atol=1e-14 * max(1.0, np.abs(y).max(initial=0.0))):
        ev = np.linalg.eigvalsh(0.5 * (y + y.conj().T))
        if ev.min(initial=0.0) >= -PSD_THRESHOLD * max(1.0, ev.max(initial=0.0)):
            # PSD: the trace norm is the trace
            return float(np.trace(y).real)
        return float(np.abs(ev).sum())
    return float(np.linalg.svd(y, compute_uv=False).sum())


def moment(rho, k: Order, basis: FockBasisSpec | None = None) -> float:
    """tr[rho prod_r (N_r+1)^{k_r/2}]."""
    w = weight_diagonal(k, _basis_of(rho, basis), power=0.5)
    return float(np.real(np.diagonal(_arr(rho)) @ w))


def interpolate_omega(k: float, grid: Sequence[tuple[float, float]]) -> float:
    """Affine interpolation of growth rates between the tightest bracketing nodes.

    A node (0, 0) is implied: the k = 0 semigroup is contractive.
    """
    nodes = sorted((float(a), float(b)) for a, b in grid)
    if not nodes:
        raise ValueError("empty grid")
    if any(a < 0 for a, _ in nodes):
        raise ValueError("grid orders must be non-negative")
    if nodes[0][0] > 0:
        nodes.insert(0, (0.0, 0.0))
    ks = [a for a, _ in nodes]
    if not ks[0] <= k <= ks[-1]:
        raise ValueError(f"k={k} lies outside the grid hull [{ks[0]}, {ks[-1]}]")
    for a, w in nodes:
        if a == k:
            return w
    hi = next(i for i, a in enumerate(ks) if a > k)
    (k0, w0), (k1, w1) = nodes[hi - 1], nodes[hi]
    return (k1 - k) / (k1 - k0) * w0 + (k - k0) / (k1 - k0) * w1


@dataclass
class SteinWeissReport:
    theta: float
    k_theta: np.ndarray
    M0: float
    M1: float
    estimated: bool
    margins: np.ndarray

    @property
    def worst_margin(self) -> float:
        return float(self.margins.min())

    def passed(self, tol: float = 1e-9) -> bool:
        return self.worst_margin >= -tol


def stein_weiss_check(T: Callable[[np.ndarray], np.ndarray], k0: Order, k1: Order, theta: float,
                      samples: Sequence, basis: FockBasisSpec,
                      M0: float | None = None, M1: float | None = None) -> SteinWeissReport:
    """Check ||T x||_{k_theta} <= M0^{1-theta} M1^theta ||x||_{k_theta} on samples.

    Missing endpoint bounds are estimated as the largest ratio over the samples,
    which only lower-bounds the true operator norms.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    k0 = np.asarray(k0, dtype=float)
    k1 = np.asarray(k1, dtype=float)
    kt = (1 - theta) * k0 + theta * k1
    xs = [_arr(s) for s in samples]
    ys = [T(x) for x in xs]
    estimated = M0 is None or M1 is None
    if M0 is None:
        M0 = max(sobolev_norm(y, k0, basis) / sobolev_norm(x, k0, basis) for x, y in zip(xs, ys))
    if M1 is None:
        M1 = max(sobolev_norm(y, k1, basis) / sobolev_norm(x, k1, basis) for x, y in zip(xs, ys))
    bound = M0 ** (1 - theta) * M1 ** theta
    margins = np.array([bound * sobolev_norm(x, kt, basis) - sobolev_norm(y, kt, basis)
                        for x, y in zip(xs, ys)])
    return SteinWeissReport(theta, kt, float(M0), float(M1), estimated, margins)


def stein_weiss_sweep(T: Callable[[np.ndarray], np.ndarray], k0: Order, k1: Order, thetas: Sequence[float],
                      samples: Sequence, basis: FockBasisSpec,
                      M0: float | None = None, M1: float | None = None) -> list[SteinWeissReport]:
    """stein_weiss_check over several theta, applying T to each sample once."""
    xs = [_arr(s) for s in samples]
    cache = {id(x): T(x) for x in xs}
    return [stein_weiss_check(lambda x: cache[id(x)], k0, k1, th, xs, basis, M0, M1) for th in thetas]
