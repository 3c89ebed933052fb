"""Command line front end: ``polyww <command> --config cfg.json --out dir``.

Exit codes: 0 success / scenario pass, 1 scenario or cross-check failure,
2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .averages import average_series, orbit_sequence, two_scale_average, vdc_bound
from .config import RNG_ALGORITHM, ConfigError, ExperimentConfig
from .io import csv_text, json_text, write_text
from .phases import PolynomialPhase
from .scenarios import SCENARIOS, BudgetExceeded, run_scenario
from .spectral import (DEFAULT_WINDOW, E2_counterexample_family, orthogonality_report, skew_family,
                       verify_quasi_level)
from .systems import Counterexample, UnipotentSkew, orbit_arrays, resolve_alpha
from .torus import GridDomain, from_fixed_array
from .uniformity import CertificationBudgetError, sup_average, witness_phase_counterexample

DEFAULT_BUDGET = 10 ** 7


class CheckFailed(RuntimeError):
    pass


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="JSON experiment config")
    p.add_argument("--out", default=d, help="output directory (default: stdout)")
    p.add_argument("--seed", type=int, default=d, help="override rng_seed")
    p.add_argument("--threads", type=int, default=d, help="worker threads for grid scans")
    p.add_argument("--budget", type=int, default=d, help=f"max orbit length (default {DEFAULT_BUDGET})")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyww", description="Polynomial Wiener-Wintner experiments.")
    _global_flags(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "orbit": "orbit rows n, group_index, t_1..t_d",
        "average": "twisted averages at the checkpoints (CSV N, re, im, abs)",
        "uniform-sup": "sup over degree-k phases at each checkpoint (JSON)",
        "scenario": "run a named scenario and write its report bundle",
        "vdc": "van der Corput inequality on an orbit-backed or random sequence",
        "two-scale": "two-scale average over a list of block lengths M",
        "spectral": "quasi-eigenfunction level and orthogonality report",
    }
    for name, h in helps.items():
        sp = sub.add_parser(name, help=h)
        _global_flags(sp, suppress=True)
        if name == "scenario":
            sp.add_argument("name", nargs="?", choices=sorted(SCENARIOS), help="scenario to run")
    return ap


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be >= 0")
        cfg.rng_seed = args.seed
    return cfg


def _emit(args, name: str, text: str) -> None:
    if args.out:
        write_text(Path(args.out) / name, text)
    else:
        sys.stdout.write(text)


def _budget(args, n: int, what: str) -> None:
    if n > args.budget:
        raise BudgetExceeded(what, f"orbit length {n} exceeds the budget {args.budget}")


def _length(cfg: ExperimentConfig) -> list[int]:
    if cfg.checkpoints:
        return cfg.checkpoints
    if cfg.N:
        return [cfg.N]
    raise ConfigError("checkpoints", "need checkpoints or N")


def _phase(cfg: ExperimentConfig, spec, x) -> PolynomialPhase:
    if cfg.phase == "witness":
        if not isinstance(spec, Counterexample):
            raise ConfigError("phase", "'witness' is only defined for the counterexample system")
        try:
            return witness_phase_counterexample(spec.alpha, x)
        except ValueError as exc:
            raise ConfigError("starts[0]", str(exc)) from None
    return PolynomialPhase.from_coeffs(cfg.phase or [0.0])


def _setup(cfg: ExperimentConfig):
    spec = cfg.build_system()
    f = cfg.build_observable()
    x = cfg.start_states()[0]
    return spec, f, x


# ---------------------------------------------------------------------------

def cmd_orbit(args, cfg: ExperimentConfig) -> int:
    spec = cfg.build_system()
    x = cfg.start_states()[0]
    N = cfg.N if cfg.N is not None else 0
    _budget(args, N, "N")
    gi, coords = orbit_arrays(spec, x, N)
    if spec.has_closed_form and N:
        # stepping is the ground truth; compare a prefix
        g, c = x.arrays()
        for i in range(min(N, 10 ** 4)):
            g, c = spec.step_fixed(g, c)
            if g[0] != gi[i] or np.any(c[0] != coords[i]):
                raise CheckFailed(f"closed form disagrees with stepping at n={i + 1}")
    header = ["n", "group_index"] + [f"t{j + 1}" for j in range(spec.dim)]
    fl = from_fixed_array(coords) if N else np.zeros((0, spec.dim))
    rows = ([n + 1, int(gi[n]), *fl[n].tolist()] for n in range(N))
    _emit(args, "orbit.csv", csv_text(header, rows))
    return 0


def cmd_average(args, cfg: ExperimentConfig) -> int:
    spec, f, x = _setup(cfg)
    cps = _length(cfg)
    _budget(args, cps[-1], "checkpoints")
    P = _phase(cfg, spec, x)
    series = average_series(spec, f, x, P, cps)
    _emit(args, "average.csv", csv_text(["N", "re", "im", "abs"], series.rows()))
    return 0


def cmd_uniform_sup(args, cfg: ExperimentConfig) -> int:
    spec, f, x = _setup(cfg)
    cps = _length(cfg)
    _budget(args, cps[-1], "checkpoints")
    if not cfg.k:
        raise ConfigError("k", "degree k >= 1 required")
    scfg = cfg.search_config(args.threads)
    out = []
    for N in cps:
        try:
            est = sup_average(spec, f, x, cfg.k, N, scfg)
        except CertificationBudgetError as exc:
            raise ConfigError("search.budget", str(exc)) from None
        out.append({"N": N, **est.to_dict()})
    _emit(args, "uniform_sup.json", json_text(out))
    return 0


def cmd_scenario(args, cfg: ExperimentConfig) -> int:
    name = args.name or cfg.scenario
    if not name:
        raise ConfigError("scenario", "no scenario given on the command line or in the config")
    if cfg.scenario is None:
        cfg.scenario = name
    summary, art = run_scenario(name, cfg, args.out, threads=args.threads, budget=args.budget)
    if not args.out:
        sys.stdout.write(art[f"{name}_summary.json"])
    return 0 if summary["pass"] else 1


def cmd_vdc(args, cfg: ExperimentConfig) -> int:
    N = cfg.N or 1000
    _budget(args, N, "N")
    Hs = cfg.params.get("H", [1, 5, 31])
    Hs = [Hs] if isinstance(Hs, (int, str)) else Hs
    if cfg.system is not None:
        spec, f, x = _setup(cfg)
        a = orbit_sequence(spec, f, x, _phase(cfg, spec, x), N + 1)[1:]
        source = "orbit"
    else:
        rng = np.random.Generator(np.random.PCG64(cfg.rng_seed))
        a = rng.uniform(0.0, 1.0, N) * np.exp(2j * np.pi * rng.uniform(0.0, 1.0, N))
        source = "random"
    reports = []
    for H in Hs:
        h = N if H == "N" else int(H)
        try:
            reports.append(vdc_bound(a, N, h).to_dict())
        except ValueError as exc:
            raise ConfigError("params.H", str(exc)) from None
    ok = all(r["slack"] >= -1e-10 for r in reports)
    _emit(args, "vdc.json", json_text({"source": source, "reports": reports, "pass": ok,
                                       "rng": {"algorithm": RNG_ALGORITHM, "seed": cfg.rng_seed}}))
    return 0 if ok else 1


def cmd_two_scale(args, cfg: ExperimentConfig) -> int:
    spec, f, x = _setup(cfg)
    Ms = cfg.params.get("M", [2 ** 5, 2 ** 10])
    Ms = [int(Ms)] if isinstance(Ms, (int, float)) else [int(m) for m in Ms]
    N = cfg.N or 2 ** 10
    length = max(Ms) * N + max(Ms) + 1
    _budget(args, length, "N")
    try:
        alpha = resolve_alpha(cfg.params.get("alpha", 0.0))
    except ValueError as exc:
        raise ConfigError("params.alpha", str(exc)) from None
    b = orbit_sequence(spec, f, x, _phase(cfg, spec, x), length)
    rows = [(M, N, two_scale_average(b, alpha, M, N)) for M in Ms]
    _emit(args, "two_scale.csv", csv_text(["M", "N", "value"], rows))
    return 0


def cmd_spectral(args, cfg: ExperimentConfig) -> int:
    spec = cfg.build_system()
    f = cfg.build_observable()
    k = 1 if cfg.k is None else cfg.k
    try:
        rep = verify_quasi_level(spec, f, k, samples=int(cfg.params.get("samples", 1000)), seed=cfg.rng_seed)
    except ValueError as exc:
        raise ConfigError("observable", str(exc)) from None
    out = {"level": rep.to_dict()}
    family = cfg.params.get("family")
    F = int(cfg.params.get("window", DEFAULT_WINDOW))
    if family is not None:
        if family == "E2_counterexample":
            if not isinstance(spec, Counterexample):
                raise ConfigError("params.family", "needs the counterexample system")
            fam = E2_counterexample_family(spec.alpha, F)
        elif family == "skew":
            if not isinstance(spec, UnipotentSkew):
                raise ConfigError("params.family", "needs a skew system")
            fam = skew_family(spec.dim, k, F)
        else:
            raise ConfigError("params.family", f"unknown family {family!r}")
        pts = int(cfg.params.get("grid", 64))
        out["orthogonality"] = orthogonality_report(f, fam, GridDomain(spec.group_order, spec.dim, (pts,))).to_dict()
    _emit(args, "spectral.json", json_text(out))
    return 0


COMMANDS = {"orbit": cmd_orbit, "average": cmd_average, "uniform-sup": cmd_uniform_sup,
            "scenario": cmd_scenario, "vdc": cmd_vdc, "two-scale": cmd_two_scale, "spectral": cmd_spectral}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.budget is None:
        args.budget = DEFAULT_BUDGET
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, CertificationBudgetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
