"""Integration of truncated master equations with physicality diagnostics."""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .fock import DensityMatrix, FockBasisSpec, TruncationError, edge_population
from .generator import (DenseOps, GkslGenerator, RealizedGenerator, TimeDependentGenerator, apply,
                        hamiltonian, realize_generator)
from .sobolev import sobolev_norm, trace_norm

log = logging.getLogger(__name__)

WORKERS_ENV = "CVQMS_WORKERS"


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    t_final: float
    method: str = "rk45"           # "rk45" (adaptive Dormand-Prince) or "rk4" (fixed step)
    dt: float | None = None        # rk4 step, or rk45 initial step
    rtol: float = 1e-8
    atol: float = 1e-10
    sample_times: tuple[float, ...] | None = None
    leakage_tolerance: float = 1e-8
    renormalize_trace: bool = False
    sobolev_orders: tuple = ()
    max_steps: int = 2_000_000
    min_step: float = 1e-14

    def __post_init__(self):
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.t_final >= 0 or not math.isfinite(self.t_final):
            raise ValueError("t_final must be finite and non-negative")
        if self.method == "rk4" and not (self.dt and self.dt > 0):
            raise ValueError("rk4 requires a positive dt")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.sample_times is not None:
            ts = tuple(float(t) for t in self.sample_times)
            if any(b < a for a, b in zip(ts, ts[1:])) or (ts and (ts[0] < 0 or ts[-1] > self.t_final + 1e-12)):
                raise ValueError("sample_times must be sorted within [0, t_final]")
            object.__setattr__(self, "sample_times", ts)
        object.__setattr__(self, "sobolev_orders", tuple(self.sobolev_orders))

    def samples(self, t0: float = 0.0) -> tuple[float, ...]:
        if self.sample_times is None:
            return (t0, t0 + self.t_final)
        return tuple(t0 + t for t in self.sample_times)

    def replace(self, **kw) -> "IntegratorConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return IntegratorConfig(**d)


@dataclass
class SimulationTrace:
    times: np.ndarray
    trace: np.ndarray
    min_eig: np.ndarray
    leakage: np.ndarray
    sobolev: dict[str, np.ndarray]
    observables: dict[str, np.ndarray]
    states: list[np.ndarray] = field(default_factory=list, repr=False)
    steps: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def max_trace_drift(self) -> float:
        return float(np.max(np.abs(self.trace - 1.0)))


# -- explicit Runge-Kutta core ------------------------------------------------------

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

RHS = Callable[[float, np.ndarray], np.ndarray]


def _check_finite(y: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite state at t={t:.6g}")


def integrate(f: RHS, y0: np.ndarray, t0: float, times: Sequence[float], cfg: IntegratorConfig,
              check: Callable[[float, np.ndarray], None] | None = None) -> tuple[list[np.ndarray], int]:
    """Integrate y' = f(t, y) and return the state at each of ``times`` (sorted, >= t0).

    Steps are clipped to land exactly on sample times. ``check`` runs after every
    accepted step and may raise to abort.
    """
    y = np.array(y0, dtype=complex)
    t = float(t0)
    out: list[np.ndarray] = []
    steps = 0
    h = cfg.dt
    k1 = None
    for target in times:
        if target < t - 1e-12:
            raise ValueError("sample times must not precede the start time")
        while target - t > 1e-13 * max(1.0, abs(target)):
            if steps >= cfg.max_steps:
                raise IntegrationError(f"step budget {cfg.max_steps} exhausted at t={t:.6g}")
            if cfg.method == "rk4":
                hh = min(cfg.dt, target - t)
                y = _rk4_step(f, t, y, hh)
                t += hh
            else:
                if k1 is None:
                    k1 = f(t, y)
                if h is None:
                    yn, fn = np.linalg.norm(y), np.linalg.norm(k1)
                    h = 0.01 * yn / fn if fn > 0 and yn > 0 else 1e-3
                while True:
                    hh = min(h, target - t)
                    if hh < cfg.min_step:
                        raise IntegrationError(f"step size underflow ({hh:.3e}) at t={t:.6g}")
                    y_new, k_last, err = _dopri_step(f, t, y, hh, k1)
                    scale = cfg.atol + cfg.rtol * max(np.linalg.norm(y), np.linalg.norm(y_new))
                    ratio = err / scale
                    if not math.isfinite(ratio):
                        h = hh * 0.1
                        continue
                    if ratio <= 1.0:
                        fac = 5.0 if ratio == 0 else min(5.0, 0.9 * ratio ** -0.2)
                        clipped = hh < h
                        t += hh
                        y, k1 = y_new, k_last
                        if not clipped:
                            h = hh * fac
                        break
                    h = hh * max(0.2, 0.9 * ratio ** -0.2)
            steps += 1
            _check_finite(y, t)
            if check is not None:
                check(t, y)
        t = max(t, target)
        out.append(y.copy())
    return out, steps


def _rk4_step(f: RHS, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _dopri_step(f: RHS, t: float, y: np.ndarray, h: float, k1: np.ndarray):
    ks = [k1]
    for i in range(1, 7):
        yi = y.copy()
        for a, k in zip(_A[i], ks):
            if a:
                yi += (h * a) * k
        ks.append(f(t + _C[i] * h, yi))
    y_new = y.copy()
    for b, k in zip(_B5, ks):
        if b:
            y_new += (h * b) * k
    err_vec = sum((h * e) * k for e, k in zip(_E, ks) if e)
    return y_new, ks[6], float(np.linalg.norm(err_vec))


# -- master-equation drivers ------------------------------------------------------------

Observable = np.ndarray | Callable[[np.ndarray], float]


def _observe(obs: Observable, rho: np.ndarray) -> float:
    if callable(obs):
        return float(np.real(obs(rho)))
    X = np.asarray(obs) if not hasattr(obs, "toarray") else obs
    return float(np.real((X @ rho).trace()))


def _order_label(k) -> str:
    if np.isscalar(k):
        return f"W_{k:g}"
    return "W_" + "_".join(f"{x:g}" for x in k)


def _as_array(rho0, basis: FockBasisSpec) -> np.ndarray:
    m = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    if m.shape != (basis.dim, basis.dim):
        raise ValueError(f"initial state shape {m.shape} does not match basis dim {basis.dim}")
    return m


def _is_hermitian(m: np.ndarray) -> bool:
    return bool(np.array_equal(m, m.conj().T))


def _run(f: RHS, rho0: np.ndarray, basis: FockBasisSpec, cfg: IntegratorConfig, s0: float,
         observables: Mapping[str, Observable] | None, keep_states: bool) -> SimulationTrace:
    band = basis.edge_band
    leak0 = edge_population(rho0, basis, band)
    if leak0 > cfg.leakage_tolerance:
        raise TruncationError(f"initial edge population {leak0:.3e} exceeds tolerance {cfg.leakage_tolerance:.1e}")
    edge = basis.edge(band) if band else np.array([], dtype=int)

    def check(t, y):
        if edge.size:
            leak = float(np.real(np.diagonal(y)[edge]).sum())
            if leak > cfg.leakage_tolerance:
                raise TruncationError(
                    f"edge population {leak:.3e} exceeds tolerance {cfg.leakage_tolerance:.1e} at t={t:.6g}; "
                    "increase the cutoff or shorten the horizon")

    g = f
    if cfg.renormalize_trace:
        def g(t, y):
            dy = f(t, y)
            return dy - np.trace(dy) / np.trace(y) * y
    times = cfg.samples(s0)
    states, steps = integrate(g, rho0, s0, times, cfg, check)
    obs = dict(observables or {})
    tr, mins, leaks = [], [], []
    sob = {_order_label(k): [] for k in cfg.sobolev_orders}
    vals = {name: [] for name in obs}
    for y in states:
        h = 0.5 * (y + y.conj().T)
        tr.append(float(np.trace(y).real))
        mins.append(float(np.linalg.eigvalsh(h).min()))
        leaks.append(edge_population(y, basis, band))
        for k in cfg.sobolev_orders:
            sob[_order_label(k)].append(sobolev_norm(h, k, basis))
        for name, o in obs.items():
            vals[name].append(_observe(o, y))
    return SimulationTrace(np.asarray(times) - 0.0, np.array(tr), np.array(mins), np.array(leaks),
                           {k: np.array(v) for k, v in sob.items()},
                           {k: np.array(v) for k, v in vals.items()},
                           states if keep_states else [], steps)


def evolve(gen: RealizedGenerator, rho0, cfg: IntegratorConfig,
           observables: Mapping[str, Observable] | None = None, keep_states: bool = True) -> SimulationTrace:
    """Solve rho' = L(rho) from t = 0 and record diagnostics at the sample times."""
    rho = _as_array(rho0, gen.basis)
    herm = _is_hermitian(rho)
    return _run(lambda t, y: apply(gen, y, herm), rho, gen.basis, cfg, 0.0, observables, keep_states)


def evolve_td(tdgen, rho0, cfg: IntegratorConfig, s0: float = 0.0, basis: FockBasisSpec | None = None,
              observables: Mapping[str, Observable] | None = None, keep_states: bool = True) -> SimulationTrace:
    """Solve rho'(t) = L_t(rho(t)) on [s0, s0 + t_final]; coefficients are evaluated at stage times.

    ``tdgen`` is a TimeDependentGenerator (``basis`` required) or an already
    realized one; sample times are reported as absolute times.
    """
    if s0 < 0:
        raise ValueError("start time must be non-negative")
    rt = tdgen.realize(basis) if isinstance(tdgen, TimeDependentGenerator) else tdgen
    rho = _as_array(rho0, rt.basis)
    herm = _is_hermitian(rho)
    return _run(lambda t, y: apply(rt.at(t), y, herm), rho, rt.basis, cfg, s0, observables, keep_states)


def propagate(gen: RealizedGenerator | DenseOps, X: np.ndarray, t: float, cfg: IntegratorConfig) -> np.ndarray:
    """e^{tL}(X) for an operator or a stack (..., D, D); no physicality checks."""
    if t == 0:
        return np.array(X, dtype=complex)
    ops = gen.dense() if isinstance(gen, RealizedGenerator) and np.ndim(X) > 2 else gen
    herm = np.ndim(X) == 2 and _is_hermitian(np.asarray(X))
    states, _ = integrate(lambda s, y: apply(ops, y, herm), X, 0.0, [t], cfg)
    return states[0]


# -- semigroup perturbation -------------------------------------------------------------

@dataclass
class DifferenceResult:
    difference: np.ndarray   # e^{tA} rho - e^{tB} rho, direct
    duhamel: np.ndarray      # the same quantity from the quadrature
    residual: float          # trace norm of their disagreement

    def __iter__(self):
        return iter((self.difference, self.residual))


def semigroup_difference(genA: RealizedGenerator, genB: RealizedGenerator, rho0, t: float,
                         cfg: IntegratorConfig, nodes: int = 32, panels: int = 1) -> DifferenceResult:
    """Direct difference of the two evolutions plus the Duhamel cross-check.

    With K = L_B - L_A:  e^{tA} - e^{tB} = -t int_0^1 e^{(1-s)tA} K e^{stB} ds.
    One B trajectory supplies the quadrature nodes; the outer e^{(1-s)tA}
    factors are produced by a single forward A integration that picks up
    w_i K(rho_B(s_i t)) as it passes each node.
    """
    if genA.basis.cutoffs != genB.basis.cutoffs:
        raise ValueError("generators live on different bases")
    basis = genA.basis if genA.basis.edge_band >= genB.basis.edge_band else genB.basis
    rho = _as_array(rho0, basis)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        z = np.zeros_like(rho)
        return DifferenceResult(z, z.copy(), 0.0)
    x, w = np.polynomial.legendre.leggauss(nodes)
    taus, weights = [], []
    for p in range(panels):
        lo, hi = t * p / panels, t * (p + 1) / panels
        taus.extend(lo + (hi - lo) * (x + 1) / 2)
        weights.extend((hi - lo) / 2 * w)
    order = np.argsort(taus)
    taus = np.asarray(taus)[order]
    weights = np.asarray(weights)[order]
    run = cfg.replace(sample_times=None)

    herm = _is_hermitian(rho)
    trajB, _ = integrate(lambda s, y: apply(genB, y, herm), rho, 0.0, list(taus) + [t], run)
    rhoB_t = trajB[-1]
    rhoA_t = propagate(genA, rho, t, run)

    acc = np.zeros_like(rho)
    clock = 0.0
    for tau, wt, rb in zip(taus, weights, trajB[:-1]):
        if tau > clock:
            acc = integrate(lambda s, y: apply(genA, y, herm), acc, clock, [tau], run)[0][0]
            clock = tau
        acc = acc + wt * (apply(genB, rb) - apply(genA, rb))
    if t > clock:
        acc = integrate(lambda s, y: apply(genA, y, herm), acc, clock, [t], run)[0][0]
    direct = rhoA_t - rhoB_t
    duhamel = -acc
    return DifferenceResult(direct, duhamel, trace_norm(direct - duhamel))


def perturbed(gen: GkslGenerator, H, eps: float) -> GkslGenerator:
    """L + eps H[.] with H[x] = -i[H, x]."""
    return gen + hamiltonian(H, eps)


# -- sweeps and output ---------------------------------------------------------------------

def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(fn: Callable, points: Iterable, workers: int | None = None) -> list:
    """Map ``fn`` over sweep points, results in input order."""
    points = list(points)
    n = worker_count(workers)
    if n == 1 or len(points) < 2:
        return [fn(p) for p in points]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, points))


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def trace_csv(trace: SimulationTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    sob = list(trace.sobolev)
    obs = list(trace.observables)
    w.writerow(["t", "trace", "min_eig", "leakage"] + sob + obs)
    for i, t in enumerate(trace.times):
        row = [t, trace.trace[i], trace.min_eig[i], trace.leakage[i]]
        row += [trace.sobolev[k][i] for k in sob] + [trace.observables[k][i] for k in obs]
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_trace_csv(trace: SimulationTrace, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trace_csv(trace))


def simulate(gen: GkslGenerator, basis: FockBasisSpec, rho0, cfg: IntegratorConfig,
             observables: Mapping[str, Observable] | None = None) -> SimulationTrace:
    return evolve(realize_generator(gen, basis), rho0, cfg, observables)
