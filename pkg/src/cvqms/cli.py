"""Batch front-end: simulate, certify, perturb, ec-norm, lemmas, catalog.

Exit codes: 0 all checks pass, 1 an asserted inequality failed, 2 bad
configuration, 3 runtime breach (leakage, step underflow, non-finite state).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import certify as cert
from .ccr import CCRError
from .dynamics import (IntegrationError, IntegratorConfig, evolve, evolve_td, run_sweep, trace_csv,
                       worker_count)
from .fock import (ConditioningError, DensityMatrix, FockBasisSpec, TruncationError, cat_code_basis, coherent_state,
                   fock_state, realize)
from .generator import CATALOG, ModelError, TimeDependentGenerator, catalog, catalog_text, realize_generator

log = logging.getLogger("cvqms")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
COMMANDS = ("simulate", "certify", "perturb", "ec-norm", "lemmas", "catalog")
MODEL_PARAMS = ("l", "alpha", "kappa", "lambda", "mu", "eps", "T", "hamiltonian")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    model: str | None = None
    params: dict = field(default_factory=dict)
    cutoffs: list[int] = field(default_factory=list)
    integrator: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    output: str = "cvqms-out"
    seed: int = 0

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "command": self.command, "model": self.model,
                "params": _jsonable(self.params), "cutoffs": self.cutoffs, "integrator": self.integrator,
                "options": _jsonable(self.options), "output": self.output, "seed": self.seed}


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _number(s: str):
    s = str(s).strip()
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    try:
        return complex(s.replace(" ", ""))
    except ValueError:
        raise ConfigError(f"not a number: {s!r}") from None


def _float_list(s) -> list[float]:
    items = s if isinstance(s, (list, tuple)) else [v for v in str(s).split(",") if v.strip()]
    try:
        return [float(v) for v in items]
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number list, got {s!r}") from None


# -- argument parsing -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvqms", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True, integ=True):
        sp.add_argument("--config", help="JSON run configuration; flags override its values")
        sp.add_argument("--out", help="artifact directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, help="worker pool size (default: $CVQMS_WORKERS or 1)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a model parameter or option")
        if model:
            sp.add_argument("--model", choices=sorted(CATALOG))
            sp.add_argument("--l", type=int)
            sp.add_argument("--alpha", type=str)
            sp.add_argument("--kappa", type=float)
            sp.add_argument("--lambda", dest="lambda_", type=float)
            sp.add_argument("--mu", type=float)
            sp.add_argument("--eps", type=str, help="value, or comma list for perturb")
            sp.add_argument("--T", type=float)
            sp.add_argument("--cutoff", type=str, help="cutoff, or comma list per mode")
        if integ:
            sp.add_argument("--t-final", type=float)
            sp.add_argument("--dt-sample", type=float)
            sp.add_argument("--method", choices=["rk45", "rk4"])
            sp.add_argument("--dt", type=float)
            sp.add_argument("--rtol", type=float)
            sp.add_argument("--atol", type=float)
            sp.add_argument("--leakage-tol", type=float)

    s = sub.add_parser("simulate", help="integrate a catalog model and write a trace CSV")
    common(s)
    s.add_argument("--state", help="vacuum | fock:n | coherent[:alpha] | cat:plus")
    s.add_argument("--k", type=str, help="Sobolev orders, comma separated; per-mode orders as 2:2")

    c = sub.add_parser("certify", help="moment-growth certificate for a catalog model")
    common(c, integ=False)
    c.add_argument("--k", type=str, help="Sobolev order(s), comma separated; per-mode orders as 2:2")
    c.add_argument("--form", choices=["closed", "tight"])
    c.add_argument("--c", type=float, help="drift rate used with --form tight")

    q = sub.add_parser("perturb", help="perturbation-bound experiment")
    common(q)
    q.add_argument("--kind", choices=["ldiss", "qou"])
    q.add_argument("--t", type=str, help="comma list of times")
    q.add_argument("--gamma", type=float)
    q.add_argument("--eta", type=float)

    e = sub.add_parser("ec-norm", help="energy-constrained diamond-norm lower bound (qOU vs Gaussian perturbation)")
    common(e)
    e.add_argument("--t", type=float)
    e.add_argument("--E", type=float)
    e.add_argument("--probes", type=int)
    e.add_argument("--gamma", type=float)
    e.add_argument("--eta", type=float)

    m = sub.add_parser("lemmas", help="seeded scalar-inequality suite")
    common(m, model=False, integ=False)
    m.add_argument("--trials", type=int)

    sub.add_parser("catalog", help="list built-in models")
    return p


def load_config(args: argparse.Namespace) -> RunConfig:
    doc: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        if doc.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema {doc.get('schema')!r}; expected {SCHEMA_VERSION}")
        if doc.get("command", args.command) != args.command:
            raise ConfigError(f"config is for {doc.get('command')!r}, not {args.command!r}")
        unknown = set(doc) - {"schema", "command", "model", "params", "modes", "cutoffs", "integrator",
                              "options", "output", "seed"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(command=args.command, model=doc.get("model"), params=dict(doc.get("params", {})),
                    cutoffs=list(doc.get("cutoffs", [])), integrator=dict(doc.get("integrator", {})),
                    options=dict(doc.get("options", {})), output=doc.get("output", "cvqms-out"),
                    seed=int(doc.get("seed", 0)))
    a = vars(args)
    if a.get("model"):
        cfg.model = a["model"]
    for name in MODEL_PARAMS:
        v = a.get("lambda_" if name == "lambda" else name)
        if v is not None:
            cfg.params[name] = v
    if a.get("cutoff"):
        cfg.cutoffs = [int(v) for v in str(a["cutoff"]).split(",")]
    for flag, key in (("t_final", "t_final"), ("dt_sample", "dt_sample"), ("method", "method"), ("dt", "dt"),
                      ("rtol", "rtol"), ("atol", "atol"), ("leakage_tol", "leakage_tolerance")):
        if a.get(flag) is not None:
            cfg.integrator[key] = a[flag]
    for key in ("state", "k", "form", "c", "kind", "t", "gamma", "eta", "E", "probes", "trials", "workers"):
        if a.get(key) is not None:
            cfg.options[key] = a[key]
    for item in a.get("set", []) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        target = cfg.params if key in MODEL_PARAMS else cfg.options
        target[key] = val
    if a.get("out"):
        cfg.output = a["out"]
    if a.get("seed") is not None:
        cfg.seed = a["seed"]
    return cfg


# -- config -> objects ---------------------------------------------------------------------

def model_params(cfg: RunConfig, multi_eps: bool = False) -> dict:
    if cfg.model is None:
        raise ConfigError("a model is required")
    entry = CATALOG[cfg.model] if cfg.model in CATALOG else None
    if entry is None:
        raise ConfigError(f"unknown model {cfg.model!r}")
    p = {}
    for k, v in cfg.params.items():
        if k == "hamiltonian":
            try:
                p[k] = json.loads(v) if isinstance(v, str) else v
            except json.JSONDecodeError:
                raise ConfigError(f"hamiltonian must be a JSON list of coefficient rows, got {v!r}") from None
        elif k == "eps" and multi_eps:
            continue
        elif k == "alpha" and isinstance(v, (list, tuple)):
            p[k] = complex(v[0], v[1])
        elif k == "lambda":
            p["lam"] = float(_number(v))
        else:
            p[k] = _number(v) if isinstance(v, str) else v
    if "eps" in p and isinstance(p["eps"], str):
        p["eps"] = float(p["eps"])
    return p


def build_model(cfg: RunConfig, multi_eps: bool = False):
    try:
        return catalog(cfg.model, **model_params(cfg, multi_eps))
    except (ModelError, CCRError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def basis_for(cfg: RunConfig, modes: int, default: int) -> FockBasisSpec:
    cut = cfg.cutoffs or [default]
    if len(cut) == 1:
        cut = cut * modes
    if len(cut) != modes:
        raise ConfigError(f"{modes}-mode model needs {modes} cutoffs, got {len(cut)}")
    try:
        return FockBasisSpec(cut)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def integrator_for(cfg: RunConfig, t_default: float = 1.0) -> IntegratorConfig:
    d = dict(cfg.integrator)
    t_final = float(d.pop("t_final", t_default))
    dt_sample = d.pop("dt_sample", None)
    samples = None
    if dt_sample:
        n = int(round(t_final / float(dt_sample)))
        samples = tuple(float(v) for v in np.linspace(0.0, t_final, n + 1))
    allowed = {"method", "dt", "rtol", "atol", "leakage_tolerance"}
    bad = set(d) - allowed
    if bad:
        raise ConfigError(f"unknown integrator keys: {sorted(bad)}")
    try:
        return IntegratorConfig(t_final=t_final, sample_times=samples, **d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def initial_state(spec: str | None, basis: FockBasisSpec, alpha: complex):
    spec = spec or "coherent"
    kind, _, arg = spec.partition(":")
    if kind == "vacuum":
        return fock_state([0] * basis.modes, basis)
    if kind == "fock":
        ns = [int(v) for v in arg.split(",")] if arg else [1]
        return fock_state(ns * basis.modes if len(ns) == 1 else ns, basis)
    if kind == "coherent":
        a = _number(arg) if arg else alpha
        return coherent_state(complex(a), basis)
    if kind == "cat":
        code = cat_code_basis(alpha, 2, basis)
        return DensityMatrix.from_vector(code.vectors[:, 0], basis)
    raise ConfigError(f"unknown state spec {spec!r}")


def _orders(s, default: str) -> list:
    """"1,2" -> [1.0, 2.0]; per-mode orders join with ':' as in "2:2"."""
    if isinstance(s, (list, tuple)):
        # JSON configs: [2, 4] or [[2, 2]]
        return [tuple(_float_list(v)) if isinstance(v, (list, tuple)) else _float_list([v])[0] for v in s]
    out = []
    for part in str(s if s is not None else default).split(","):
        vals = _float_list(part.replace(":", ","))
        if not vals:
            raise ConfigError(f"empty Sobolev order in {s!r}")
        out.append(vals[0] if len(vals) == 1 else tuple(vals))
    return out


# -- commands ---------------------------------------------------------------------------------

def _write(out: Path, name: str, payload) -> None:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    if isinstance(payload, str):
        path.write_text(payload)
    else:
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", path)


def cmd_simulate(cfg: RunConfig) -> int:
    gen = build_model(cfg)
    modes = gen.modes
    basis = basis_for(cfg, modes, 40)
    icfg = integrator_for(cfg, 1.0)
    orders = _orders(cfg.options.get("k"), "2")
    icfg = icfg.replace(sobolev_orders=tuple(orders))
    alpha = complex(model_params(cfg).get("alpha", 1.0))
    rho0 = initial_state(cfg.options.get("state"), basis, alpha)
    if isinstance(gen, TimeDependentGenerator):
        rt = gen.realize(basis)
        ref = gen.at(0.0)
        obs = {f"V_{j}": _jump_observable(rt, j) for j in range(len(ref.jumps))}
        trace = evolve_td(rt, rho0, icfg, observables=obs, keep_states=False)
    else:
        rg = realize_generator(gen, basis)
        obs = {}
        for j, L in enumerate(gen.jumps):
            Lm = realize(L, rg.basis).sparse()
            obs[f"V_{j}"] = (Lm.conj().T @ Lm).tocsr()
        trace = evolve(rg, rho0, icfg, observables=obs, keep_states=False)
    out = Path(cfg.output)
    _write(out, "trace.csv", trace_csv(trace))
    _write(out, "run.json", cfg.to_dict())
    print(f"simulated {len(trace.times)} samples; max trace drift {trace.max_trace_drift():.3e}; "
          f"min eigenvalue {trace.min_eig.min():.3e}")
    return EXIT_OK


def _jump_observable(rt, j):
    # jumps depend on time; the time-zero jump serves as the Lyapunov proxy
    L = rt.at(0.0).Ls[j]
    return (L.conj().T @ L).tocsr()


def cmd_certify(cfg: RunConfig) -> int:
    gen = build_model(cfg)
    params = model_params(cfg)
    basis = basis_for(cfg, gen.modes, 100 if gen.modes == 1 else 20)
    form = cfg.options.get("form", "closed")
    ks = _orders(cfg.options.get("k"), "2")
    reports = []
    worst = EXIT_OK
    for k in ks:
        if isinstance(gen, TimeDependentGenerator):
            T = float(params.get("T", 1.0))
            times = [T * i / 8 for i in range(8)]
            rt = gen.realize(basis)
            if form == "closed" and cfg.model != "cnot":
                spec = cert.paper_constants(cfg.model, k, **params)
            else:
                c = float(cfg.options.get("c", 0.5))
                mu = cert.tight_mu_td(rt, k, c, times)
                spec = cert.MomentBoundSpec(k, "drift", c=c, mu=mu * (1 + 1e-9) + 1e-9,
                                            source="tight constants over sampled times")
            reps = cert.certify_td(rt, spec, times)
            for s, r in zip(times, reps):
                reports.append({"time": s, **r.to_dict()})
            verdicts = [r.verdict for r in reps]
        else:
            rg = realize_generator(gen, basis)
            if form == "closed":
                spec = cert.paper_constants(cfg.model, k, **params)
            else:
                tc = cert.estimate_tight_constants(rg, k, c=float(cfg.options.get("c", 0.5)))
                spec = cert.MomentBoundSpec(k, "drift", c=tc.c_given, mu=tc.mu_star * (1 + 1e-9) + 1e-9,
                                            source="tight constants")
            r = cert.certify_moment_bound(rg, spec)
            tight = cert.estimate_tight_constants(rg, k, mu=spec.mu, c=spec.c)
            reports.append({**r.to_dict(), "tight": tight.to_dict()})
            verdicts = [r.verdict]
        if "violated" in verdicts:
            worst = EXIT_VIOLATION
        print(f"k={k}: {', '.join(sorted(set(verdicts)))}")
    _write(Path(cfg.output), "certificate.json", {"model": cfg.model, "params": params, "reports": reports})
    return worst


def _ldiss_point(job):
    l, alpha, eps, ts, cutoff, icfg = job
    return cert.perturbation_experiment_ldiss(l, alpha, None, [eps], ts, FockBasisSpec(cutoff), icfg)


def cmd_perturb(cfg: RunConfig) -> int:
    kind = cfg.options.get("kind", "ldiss")
    eps_grid = _float_list(cfg.params.get("eps", "0.01,0.05"))
    ts = _float_list(cfg.options.get("t", "0.5,1,2,5"))
    icfg = integrator_for(cfg, max(ts))
    if "rtol" not in cfg.integrator:
        icfg = icfg.replace(rtol=1e-10, atol=1e-12)
    workers = worker_count(cfg.options.get("workers"))
    if kind == "ldiss":
        cfg.model = cfg.model or "l_photon"
        p = model_params(cfg, multi_eps=True)
        l, alpha = int(p.get("l", 2)), complex(p.get("alpha", 2.0))
        cutoff = (cfg.cutoffs or [60])[0]
        jobs = [(l, alpha, e, ts, cutoff, icfg) for e in eps_grid]
        parts = run_sweep(_ldiss_point, jobs, workers)
        points = [pt for rep in parts for pt in rep.points]
        consts = {k: v for rep in parts for k, v in rep.constants.items()}
        report = cert.PerturbationReport(parts[0].kind, points, consts, all(r.passed for r in parts))
    elif kind == "qou":
        p = model_params(cfg, multi_eps=True) if cfg.model else {}
        lam = float(p.get("lam", math.sqrt(2)))
        mu = float(p.get("mu", 1.0))
        report = cert.perturbation_experiment_qou(lam, mu, float(cfg.options.get("gamma", 1.0)),
                                                  float(cfg.options.get("eta", 0.0)), eps_grid, ts,
                                                  FockBasisSpec((cfg.cutoffs or [40])[0]), icfg)
    else:
        raise ConfigError(f"unknown perturbation kind {kind!r}")
    _write(Path(cfg.output), "perturbation.json", report.to_dict())
    print(f"{report.kind}: {'pass' if report.passed else 'FAIL'} over {len(report.points)} points")
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_ec_norm(cfg: RunConfig) -> int:
    cfg.model = cfg.model or "qou"
    p = model_params(cfg, multi_eps=True)
    lam, mu = float(p.get("lam", math.sqrt(2))), float(p.get("mu", 1.0))
    eps = _float_list(cfg.params.get("eps", "0.01"))[0]
    t = float(cfg.options.get("t", 1.0))
    E = float(cfg.options.get("E", 1.0))
    basis = FockBasisSpec((cfg.cutoffs or [20])[0])
    icfg = integrator_for(cfg, t)
    base = cert.qou(lam, mu)
    pert = base + cert.gaussian_perturbation(float(cfg.options.get("gamma", 1.0)),
                                             float(cfg.options.get("eta", 0.0))).scaled(eps)
    chA = cert.evolved_channel(realize_generator(base, basis), t, icfg)
    chB = cert.evolved_channel(realize_generator(pert, basis), t, icfg)
    rep = cert.ec_diamond_lower_bound(chA, chB, basis, E, int(cfg.options.get("probes", 16)), cfg.seed)
    _write(Path(cfg.output), "ec_norm.json", {"lam": lam, "mu": mu, "eps": eps, "t": t, **rep.to_dict()})
    print(f"EC diamond lower bound at E={E}: {rep.lower_bound:.6g} (probe {rep.best_probe})")
    return EXIT_OK


def cmd_lemmas(cfg: RunConfig) -> int:
    trials = int(cfg.options.get("trials", 10_000))
    rep = cert.scalar_lemma_suite(trials, cfg.seed)
    _write(Path(cfg.output), "lemmas.json", rep.to_dict())
    print(f"{sum(rep.checks.values())} checks, {len(rep.counterexamples)} counterexamples")
    return EXIT_OK if rep.passed else EXIT_VIOLATION


HANDLERS = {"simulate": cmd_simulate, "certify": cmd_certify, "perturb": cmd_perturb,
            "ec-norm": cmd_ec_norm, "lemmas": cmd_lemmas}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "catalog":
        sys.stdout.write(catalog_text())
        return EXIT_OK
    try:
        cfg = load_config(args)
        return HANDLERS[args.command](cfg)
    except (ConfigError, ModelError, CCRError, cert.CertificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TruncationError, IntegrationError, ConditioningError) as exc:
        print(f"runtime breach: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
