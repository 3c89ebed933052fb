"""Experiment configuration: JSON in, normalised records out."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .systems import System, SystemState, build_system, resolve_alpha
from .torus import Character, Observable
from .uniformity import SearchConfig

RNG_ALGORITHM = "PCG64"


class ConfigError(ValueError):
    """Malformed configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def parse_observable(rec: Any, path: str = "observable") -> Observable:
    """Observable from ``{"character": [...], "group_freq": g, "coef": c}``,
    ``{"constant": c, "dim": d}`` or ``{"terms": [...]}``."""
    if not isinstance(rec, dict):
        raise ConfigError(path, "expected an object")
    try:
        if "terms" in rec:
            terms = []
            for i, t in enumerate(rec["terms"]):
                terms.append((_complex(t.get("coef", 1.0), f"{path}.terms[{i}].coef"),
                              Character(tuple(int(a) for a in t["torus_freqs"]), int(t.get("group_freq", 0)))))
            return Observable(tuple(terms))
        if "character" in rec:
            return Observable.character(tuple(int(a) for a in rec["character"]), int(rec.get("group_freq", 0)),
                                        _complex(rec.get("coef", 1.0), f"{path}.coef"))
        if "constant" in rec:
            return Observable.constant(int(rec["dim"]), _complex(rec["constant"], f"{path}.constant"))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(path, f"invalid observable ({exc})") from None
    raise ConfigError(path, "need one of 'terms', 'character', 'constant'")


def observable_record(f: Observable) -> dict:
    return {"terms": [{"coef": [c.real, c.imag], "torus_freqs": list(ch.torus_freqs), "group_freq": ch.group_freq}
                      for c, ch in f.terms]}


def _complex(v: Any, path: str) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(float(v), 0.0)
    raise ConfigError(path, "expected a number or [re, im]")


def _finite(v: Any, path: str) -> float:
    try:
        x = resolve_alpha(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None
    if not math.isfinite(x):
        raise ConfigError(path, "must be finite")
    return x


def _int(v: Any, path: str, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(path, "expected an integer")
    v = int(v)
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return v


_KEYS = {"scenario", "system", "observable", "start", "starts", "phase", "k", "N", "checkpoints",
         "search", "params", "rng_seed", "outputs"}


@dataclass
class ExperimentConfig:
    scenario: str | None = None
    system: dict | None = None
    observable: dict | None = None
    starts: list[list[float]] = field(default_factory=list)
    phase: list[float] | str | None = None
    k: int | None = None
    N: int | None = None
    checkpoints: list[int] = field(default_factory=list)
    search: dict = field(default_factory=lambda: SearchConfig().to_dict())
    params: dict = field(default_factory=dict)
    rng_seed: int = 0
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: Any) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("", "config must be a JSON object")
        unknown = sorted(set(d) - _KEYS)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        cfg = cls()
        if d.get("scenario") is not None:
            if not isinstance(d["scenario"], str):
                raise ConfigError("scenario", "expected a string")
            cfg.scenario = d["scenario"]
        spec = None
        if d.get("system") is not None:
            try:
                spec = build_system(d["system"])
            except ConfigError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError("system", f"invalid system ({exc})") from None
            cfg.system = spec.record()
        if d.get("observable") is not None:
            f = parse_observable(d["observable"])
            if spec is not None and f.dim != spec.dim:
                raise ConfigError("observable", f"acts on T^{f.dim}, system is on T^{spec.dim}")
            cfg.observable = observable_record(f)
        starts = d.get("starts")
        if starts is None and d.get("start") is not None:
            starts = [d["start"]]
        for i, s in enumerate(starts or []):
            path = f"starts[{i}]"
            if not isinstance(s, (list, tuple)) or not s:
                raise ConfigError(path, "expected [group_index, t_1, ..., t_d]")
            row = [_int(s[0], f"{path}[0]", 0)] + [_finite(v, f"{path}[{j + 1}]") for j, v in enumerate(s[1:])]
            if spec is not None:
                try:
                    spec.check_state(SystemState.from_coords(row[0], row[1:]))
                except ValueError as exc:
                    raise ConfigError(path, str(exc)) from None
            cfg.starts.append(row)
        ph = d.get("phase")
        if isinstance(ph, str):
            if ph != "witness":
                raise ConfigError("phase", "expected a coefficient list or 'witness'")
            cfg.phase = ph
        elif ph is not None:
            if not isinstance(ph, (list, tuple)) or not ph:
                raise ConfigError("phase", "expected a nonempty coefficient list")
            cfg.phase = [_finite(v, f"phase[{i}]") for i, v in enumerate(ph)]
        if d.get("k") is not None:
            cfg.k = _int(d["k"], "k", 0)
        if d.get("N") is not None:
            cfg.N = _int(d["N"], "N", 0)
        cps = d.get("checkpoints") or []
        if not isinstance(cps, (list, tuple)):
            raise ConfigError("checkpoints", "expected a list")
        cfg.checkpoints = [_int(c, f"checkpoints[{i}]", 1) for i, c in enumerate(cps)]
        if any(b <= a for a, b in zip(cfg.checkpoints, cfg.checkpoints[1:])):
            raise ConfigError("checkpoints", "must be strictly increasing")
        search = d.get("search") or {}
        if not isinstance(search, dict):
            raise ConfigError("search", "expected an object")
        base = SearchConfig().to_dict()
        for key in search:
            if key not in base:
                raise ConfigError(f"search.{key}", "unknown field")
        try:
            cfg.search = SearchConfig(**{**base, **search}).to_dict()
        except (TypeError, ValueError) as exc:
            raise ConfigError("search", str(exc)) from None
        params = d.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError("params", "expected an object")
        cfg.params = json.loads(json.dumps(params, sort_keys=True))
        if d.get("rng_seed") is not None:
            cfg.rng_seed = _int(d["rng_seed"], "rng_seed", 0)
        outputs = d.get("outputs") or {}
        if not isinstance(outputs, dict):
            raise ConfigError("outputs", "expected an object")
        cfg.outputs = dict(outputs)
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_json(text)

    def to_dict(self) -> dict:
        out = {"scenario": self.scenario, "system": self.system, "observable": self.observable,
               "starts": self.starts, "phase": self.phase, "k": self.k, "N": self.N,
               "checkpoints": self.checkpoints, "search": self.search, "params": self.params,
               "rng_seed": self.rng_seed, "outputs": self.outputs}
        return {k: v for k, v in out.items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    # -- typed accessors
    def build_system(self) -> System:
        if self.system is None:
            raise ConfigError("system", "required")
        return build_system(self.system)

    def build_observable(self) -> Observable:
        if self.observable is None:
            raise ConfigError("observable", "required")
        return parse_observable(self.observable)

    def start_states(self) -> list[SystemState]:
        if not self.starts:
            raise ConfigError("starts", "at least one start state required")
        return [SystemState.from_coords(int(s[0]), s[1:]) for s in self.starts]

    def search_config(self, threads: int | None = None) -> SearchConfig:
        d = dict(self.search)
        if threads is not None:
            d["threads"] = threads
        return SearchConfig(**d)
