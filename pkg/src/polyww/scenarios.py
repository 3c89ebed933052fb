"""Named experiments, each producing data artifacts plus a pass/fail summary."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .averages import average_series, orbit_sequence, twisted_terms, two_scale_average, vdc_bound
from .config import RNG_ALGORITHM, ConfigError, ExperimentConfig, parse_observable
from .io import csv_text, json_text, write_text
from .phases import PolynomialPhase, next_pow2
from .spectral import (DEFAULT_WINDOW, ORTHOGONALITY_TOL, E2_counterexample_family, orthogonality_report,
                       skew_family, verify_quasi_level)
from .systems import Counterexample, Power, System, SystemState, UnipotentSkew, build_system, resolve_alpha
from .torus import GridDomain, Observable
from .uniformity import sup_average, witness_phase_counterexample


class BudgetExceeded(ConfigError):
    pass


@dataclass
class Context:
    cfg: ExperimentConfig
    out: Path | None
    threads: int | None = None
    budget: int | None = None

    def param(self, name, default):
        return self.cfg.params.get(name, default)

    def check_budget(self, n: int, what: str) -> None:
        if self.budget is not None and n > self.budget:
            raise BudgetExceeded(what, f"orbit length {n} exceeds the budget {self.budget}")

    def system(self, default: dict) -> System:
        return build_system(self.cfg.system or default)

    def observable(self, default: dict) -> Observable:
        return parse_observable(self.cfg.observable or default)

    def start(self, default: list) -> SystemState:
        s = self.cfg.starts[0] if self.cfg.starts else default
        return SystemState.from_coords(int(s[0]), s[1:])

    def emit(self, artifacts: dict[str, str], name: str, text: str) -> None:
        artifacts[name] = text
        if self.out is not None:
            write_text(self.out / name, text)


def _check_dims(spec: System, f: Observable, x: SystemState) -> None:
    if f.dim != spec.dim:
        raise ConfigError("observable", f"acts on T^{f.dim}, system is on T^{spec.dim}")
    try:
        spec.check_state(x)
    except ValueError as exc:
        raise ConfigError("starts[0]", str(exc)) from None


def _grid_for(f: Observable, family_F: int, group_order: int, dim: int) -> GridDomain:
    top = max((abs(a) for _, ch in f.terms for a in ch.torus_freqs), default=0)
    return GridDomain(group_order, dim, (next_pow2(2 * (top + 2 * family_F) + 2),) * dim)


# ---------------------------------------------------------------------------

def counterexample(ctx: Context, art: dict) -> dict:
    spec = ctx.system({"type": "counterexample", "alpha": "sqrt2m1"})
    if not isinstance(spec, Counterexample):
        raise ConfigError("system", "this scenario needs the counterexample system")
    f = ctx.observable({"character": [0, 1]})
    x = ctx.start([1, 0.3, 0.7])
    _check_dims(spec, f, x)
    if x.group_index != 1:
        raise ConfigError("starts[0]", "the witness phase needs a start in the fibre {1} x T^2")
    cps = ctx.cfg.checkpoints or [10 ** 2, 10 ** 3, 10 ** 4, 10 ** 5]
    ctx.check_budget(cps[-1], "checkpoints")
    tol = float(ctx.param("tolerance", 0.01))
    P = witness_phase_counterexample(spec.alpha, x)
    series = average_series(spec, f, x, P, cps)
    ctx.emit(art, "counterexample_series.csv", csv_text(["N", "re", "im", "abs"], series.rows()))

    n_check = min(2 * 10 ** 4, cps[-1])
    terms = twisted_terms(spec, f, x, P, n_check)
    even = terms[1::2]  # n = 2, 4, ...
    even_defect = float(np.max(np.abs(even - 1.0))) if even.size else 0.0
    half = abs(math.sin(math.pi * spec.alpha / 2.0))
    err = [abs(v - 0.5) for v in series.values]
    bounds = [(1.0 / half + 1.0) / n if half > 0 else math.inf for n in cps]
    metrics = {"witness_phase": P.record(), "final_N": cps[-1], "final_error": err[-1],
               "tolerance": tol, "even_defect": even_defect, "odd_bounds": bounds, "errors": err}
    ok = err[-1] <= tol and even_defect <= 1e-9
    if ctx.param("sup_check", True):
        N_sup = int(ctx.param("sup_N", 2 ** 14))
        ctx.check_budget(N_sup, "params.sup_N")
        est = sup_average(spec, f, x, 2, N_sup, ctx.cfg.search_config(ctx.threads))
        ctx.emit(art, "counterexample_sup.json", json_text({"N": N_sup, **est.to_dict()}))
        threshold = float(ctx.param("sup_threshold", 0.45))
        metrics.update({"sup_N": N_sup, "sup_value": est.value, "sup_threshold": threshold})
        ok = ok and est.value >= threshold
    return {"pass": ok, "metrics": metrics}


def uniform_decay(ctx: Context, art: dict) -> dict:
    spec = ctx.system({"type": "skew", "d": 3, "alpha": "sqrt2m1"})
    f = ctx.observable({"character": [0, 0, 1]})
    x = ctx.start([0, 0.3, 0.6, 0.9])
    _check_dims(spec, f, x)
    k = ctx.cfg.k or 2
    cps = ctx.cfg.checkpoints or [2 ** 8, 2 ** 10, 2 ** 12, 2 ** 14]
    ctx.check_budget(cps[-1], "checkpoints")
    F = int(ctx.param("window", DEFAULT_WINDOW))
    orth = None
    if isinstance(spec, UnipotentSkew):
        fam = skew_family(spec.dim, k, F)
        orth = orthogonality_report(f, fam, _grid_for(f, F, 1, spec.dim))
    scfg = ctx.cfg.search_config(ctx.threads)
    ests = []
    for N in cps:
        ests.append(sup_average(spec, f, x, k, N, scfg))
    ctx.emit(art, "uniform-decay_sup.json", json_text([{"N": N, **e.to_dict()} for N, e in zip(cps, ests)]))
    ctx.emit(art, "uniform-decay_sup.csv", csv_text(["N", "value"], [(N, e.value) for N, e in zip(cps, ests)]))
    vals = [e.value for e in ests]
    ratio = float(ctx.param("ratio", 0.8))
    ok = vals[-1] < ratio * vals[0] and all(v < 1.0 for v in vals)
    metrics = {"k": k, "values": vals, "ratio": ratio}
    if orth is not None:
        metrics["orthogonality"] = orth.to_dict()
        ok = ok and orth.max_abs < ORTHOGONALITY_TOL
    return {"pass": ok, "metrics": metrics}


def ww_linear(ctx: Context, art: dict) -> dict:
    spec = ctx.system({"type": "skew", "d": 2, "alpha": "sqrt2m1"})
    f = ctx.observable({"character": [0, 1]})
    x = ctx.start([0, 0.3, 0.6])
    _check_dims(spec, f, x)
    cps = ctx.cfg.checkpoints or [2 ** 10, 2 ** 14, 2 ** 18]
    ctx.check_budget(cps[-1], "checkpoints")
    scfg = ctx.cfg.search_config(ctx.threads)
    ests = [sup_average(spec, f, x, 1, N, scfg) for N in cps]
    vals = [e.value for e in ests]
    ctx.emit(art, "ww-linear_sup.csv", csv_text(["N", "value", "argmax_c1"],
                                                [(N, e.value, e.argmax.coeffs[1]) for N, e in zip(cps, ests)]))
    ratio = float(ctx.param("ratio", 0.5))
    ok = all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < ratio * vals[0]
    return {"pass": ok, "metrics": {"values": vals, "ratio": ratio}}


def vdc_sweep(ctx: Context, art: dict) -> dict:
    rng = np.random.Generator(np.random.PCG64(ctx.cfg.rng_seed))
    trials = int(ctx.param("trials", 100))
    Ns = [int(v) for v in ctx.param("N", [100, 1000, 10000])]
    Hs = ctx.param("H", [1, 5, 31, "N"])
    rows = []
    for t in range(trials):
        for N in Ns:
            a = rng.uniform(0.0, 1.0, N) * np.exp(2j * np.pi * rng.uniform(0.0, 1.0, N))
            for H in Hs:
                h = N if H == "N" else int(H)
                rep = vdc_bound(a, N, h)
                rows.append((t, N, h, rep.lhs, rep.rhs, rep.slack))
    ctx.emit(art, "vdc-sweep.csv", csv_text(["trial", "N", "H", "lhs", "rhs", "slack"], rows))
    min_slack = min(r[5] for r in rows)
    return {"pass": min_slack >= -1e-10, "metrics": {"cases": len(rows), "min_slack": min_slack}}


def two_scale(ctx: Context, art: dict) -> dict:
    spec = ctx.system({"type": "skew", "d": 3, "alpha": "sqrt2m1"})
    f = ctx.observable({"character": [0, 0, 1]})
    x = ctx.start([0, 0.3, 0.6, 0.9])
    _check_dims(spec, f, x)
    alpha = resolve_alpha(ctx.param("alpha", 0.1))
    Ms = [int(m) for m in ctx.param("M", [2 ** 5, 2 ** 6, 2 ** 7, 2 ** 8, 2 ** 9, 2 ** 10])]
    N = int(ctx.cfg.N or 2 ** 10)
    length = max(Ms) * N + max(Ms) + 1
    ctx.check_budget(length, "N")
    P = PolynomialPhase.from_coeffs(ctx.cfg.phase) if isinstance(ctx.cfg.phase, list) else PolynomialPhase.zero()
    b = orbit_sequence(spec, f, x, P, length)
    vals = [two_scale_average(b, alpha, M, N) for M in Ms]
    ctx.emit(art, "two-scale.csv", csv_text(["M", "N", "value"], [(M, N, v) for M, v in zip(Ms, vals)]))
    return {"pass": vals[-1] < vals[0], "metrics": {"alpha": alpha, "M": Ms, "N": N, "values": vals}}


def quasi_level(ctx: Context, art: dict) -> dict:
    spec = ctx.system({"type": "power", "base": {"type": "counterexample", "alpha": "sqrt2m1"}, "m": 2})
    f = ctx.observable({"character": [0, 1]})
    if f.dim != spec.dim:
        raise ConfigError("observable", f"acts on T^{f.dim}, system is on T^{spec.dim}")
    k = 2 if ctx.cfg.k is None else ctx.cfg.k
    rep = verify_quasi_level(spec, f, k, samples=int(ctx.param("samples", 1000)), seed=ctx.cfg.rng_seed)
    ctx.emit(art, "quasi-level.json", json_text(rep.to_dict()))
    expected = ctx.param("expected_level", None)
    ok = rep.level == int(expected) if expected is not None else rep.member
    return {"pass": ok, "metrics": {"level": rep.level, "claimed": k, "residuals": rep.residuals}}


def t2_vs_t(ctx: Context, art: dict) -> dict:
    base = ctx.system({"type": "counterexample", "alpha": "sqrt2m1"})
    if not isinstance(base, Counterexample):
        raise ConfigError("system", "this scenario needs the counterexample system")
    f = ctx.observable({"character": [0, 1]})
    F = int(ctx.param("window", DEFAULT_WINDOW))
    seed = ctx.cfg.rng_seed
    on_square = verify_quasi_level(Power(base, 2), f, 2, seed=seed)
    on_base = verify_quasi_level(base, f, 2, seed=seed)
    fam = E2_counterexample_family(base.alpha, F)
    orth = orthogonality_report(f, fam, _grid_for(f, F, 2, 2))
    bundle = {"level_T2": on_square.to_dict(), "level_T": on_base.to_dict(), "orthogonality": orth.to_dict()}
    ctx.emit(art, "t2-vs-t.json", json_text(bundle))
    ok = on_square.exact and not on_base.member and orth.max_abs < ORTHOGONALITY_TOL
    return {"pass": ok, "metrics": {"level_T2": on_square.level, "member_E2_T": on_base.member,
                                    "orthogonality_max": orth.max_abs, "family_size": orth.count}}


SCENARIOS: dict[str, tuple[Callable[[Context, dict], dict], str]] = {
    "counterexample": (counterexample,
                       "On an ergodic system that is not totally ergodic, the explicit quadratic witness phase "
                       "drives the twisted average of e(t2) to 1/2, so the degree-2 uniformity functional "
                       "does not decay."),
    "uniform-decay": (uniform_decay,
                      "For a function orthogonal to the level-2 quasi-eigenfunctions of a totally ergodic "
                      "skew product, the sup over quadratic phases of the twisted average decays in N."),
    "ww-linear": (ww_linear,
                  "Linear Wiener-Wintner uniformity: the sup over linear phases of the twisted average "
                  "of an observable orthogonal to the eigenfunctions tends to 0."),
    "vdc-sweep": (vdc_sweep, "The van der Corput inequality holds for bounded complex sequences."),
    "two-scale": (two_scale,
                  "The averaged modulus of length-M twisted block means decays as M grows."),
    "quasi-level": (quasi_level,
                    "Quasi-eigenfunction level via iterated multiplicative derivatives (f o T) conj(f)."),
    "t2-vs-t": (t2_vs_t,
                "e(t2) is a level-2 quasi-eigenfunction of T^2 yet orthogonal to every level-2 "
                "quasi-eigenfunction of T, so the two orthocomplements differ."),
}


def run_scenario(name: str, cfg: ExperimentConfig | None = None, out: Path | str | None = None,
                 threads: int | None = None, budget: int | None = None) -> tuple[dict, dict[str, str]]:
    """Run one named scenario; returns ``(summary, artifacts)`` and writes them under ``out``."""
    if name not in SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}")
    cfg = cfg or ExperimentConfig(scenario=name)
    ctx = Context(cfg, None if out is None else Path(out), threads, budget)
    fn, claim = SCENARIOS[name]
    art: dict[str, str] = {}
    result = fn(ctx, art)
    summary = {"scenario": name, "claim": claim, "pass": bool(result["pass"]), "metrics": result["metrics"],
               "artifacts": sorted(art) + [f"{name}_summary.json"], "config": cfg.to_dict(),
               "rng": {"algorithm": RNG_ALGORITHM, "seed": cfg.rng_seed}}
    ctx.emit(art, f"{name}_summary.json", json_text(summary))
    return summary, art
