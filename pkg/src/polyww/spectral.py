"""Eigenfunctions, quasi-eigenfunction levels and orthogonality checks.

A unimodular ``f`` has level ``j`` when ``j`` multiplicative derivatives
``g -> (g o T) conj(g)`` turn it into a constant; level 0 means ``f`` is
itself constant and level 1 means ``f`` is an eigenfunction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .systems import System, random_states
from .torus import Character, GridDomain, Observable, cexp, character_window

RELATION_TOL = 1e-9
ORTHOGONALITY_TOL = 1e-10
DEFAULT_WINDOW = 8

Fn = Observable | Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuasiEigenfunction:
    level: int
    form: Observable
    provenance: str
    eigenvalue: complex | None = None

    def to_dict(self) -> dict:
        out = {"level": self.level, "provenance": self.provenance,
               "terms": [{"coef": [c.real, c.imag], "torus_freqs": list(ch.torus_freqs),
                          "group_freq": ch.group_freq} for c, ch in self.form.terms]}
        if self.eigenvalue is not None:
            out["eigenvalue"] = [self.eigenvalue.real, self.eigenvalue.imag]
        return out


def _values(h: Fn, gi, coords, q) -> np.ndarray:
    if isinstance(h, QuasiEigenfunction):
        h = h.form
    if isinstance(h, Observable):
        return h.evaluate_fixed(gi, coords, q)
    return np.asarray(h(gi, coords), dtype=np.complex128)


def _project(c: complex) -> complex:
    return c / abs(c) if abs(c) > 0 else c


@dataclass
class EigenCheck:
    c: complex
    residual: float
    modulus: float
    accepted: bool

    def to_dict(self) -> dict:
        return {"c": [self.c.real, self.c.imag], "residual": self.residual, "modulus": self.modulus,
                "accepted": self.accepted}


def verify_eigen_relation(spec: System, h: Fn, samples: int = 1000, seed: int = 0) -> EigenCheck:
    """Test ``h(Tx) = c h(x)`` at random points.

    ``c`` is the mean of the ratios ``h(Tx)/h(x)`` projected to the unit
    circle; ``residual = max |h(Tx) - c h(x)|``.
    """
    if samples < 2:
        raise ValueError("need at least two sample points")
    rng = np.random.Generator(np.random.PCG64(seed))
    gi, coords = random_states(spec, samples, rng)
    hx = _values(h, gi, coords, spec.group_order)
    if np.min(np.abs(hx)) < 1e-12:
        raise ValueError("h vanishes at a sample point")
    g2, c2 = spec.step_fixed(gi, coords)
    hTx = _values(h, g2, c2, spec.group_order)
    raw = complex(np.mean(hTx / hx))
    c = _project(raw)
    residual = float(np.max(np.abs(hTx - c * hx)))
    accepted = residual < RELATION_TOL and abs(abs(raw) - 1.0) <= RELATION_TOL
    return EigenCheck(c, residual, abs(raw), accepted)


@dataclass
class LevelReport:
    claimed: int
    level: int | None
    member: bool
    exact: bool
    residuals: list[float]
    constant: complex | None = None

    def to_dict(self) -> dict:
        return {"claimed": self.claimed, "level": self.level, "member": self.member, "exact": self.exact,
                "residuals": self.residuals,
                "constant": None if self.constant is None else [self.constant.real, self.constant.imag]}


def verify_quasi_level(spec: System, f: Fn, k: int, samples: int = 1000, seed: int = 0,
                       depth: int | None = None) -> LevelReport:
    """Level of ``f``: the least ``j`` for which the ``j``-th derivative is constant.

    ``residuals[j]`` is the sup distance of ``g_j`` from its (unit-projected)
    mean over the sample; ``g_j`` counts as constant below
    :data:`RELATION_TOL`.  ``member`` means level ``<= k``; ``exact`` means
    level ``== k``.  The ladder is followed to ``depth`` (default ``k + 1``).
    """
    if k < 0:
        raise ValueError("claimed level must be nonnegative")
    depth = k + 1 if depth is None else depth
    rng = np.random.Generator(np.random.PCG64(seed))
    gi, coords = random_states(spec, samples, rng)
    orbit = []
    for _ in range(depth + 1):
        orbit.append(_values(f, gi, coords, spec.group_order))
        gi, coords = spec.step_fixed(gi, coords)
    if np.max(np.abs(np.abs(orbit[0]) - 1.0)) > RELATION_TOL:
        raise ValueError("f is not unimodular at the sample points")
    residuals = []
    level = None
    const = None
    G = orbit
    for j in range(depth + 1):
        mean = _project(complex(np.mean(G[0])))
        res = float(np.max(np.abs(G[0] - mean)))
        residuals.append(res)
        if level is None and res < RELATION_TOL:
            level, const = j, mean
        if j < depth:
            G = [G[i + 1] * np.conj(G[i]) for i in range(len(G) - 1)]
    member = level is not None and level <= k
    return LevelReport(k, level, member, level == k, residuals, const)


# ---------------------------------------------------------------------------
# catalogs
# ---------------------------------------------------------------------------

def catalog_E1_counterexample(alpha: float, m: int, sign: int = 1) -> QuasiEigenfunction:
    """Eigenfunction ``h(0, t) = e(m t_1)``, ``h(1, t) = sign e(m alpha/2) e(m t_1)`` of the counterexample.

    Eigenvalue ``sign e(m alpha/2)``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    z = sign * cexp(m * alpha / 2.0)
    u, v = (1 + z) / 2, (1 - z) / 2
    terms = tuple((c, Character((m, 0), g)) for c, g in ((u, 0), (v, 1)) if c != 0)
    level = 0 if m == 0 and sign == 1 else 1
    return QuasiEigenfunction(level, Observable(terms), f"E1(m={m}, sign={sign:+d})", z)


def catalog_E2_counterexample(alpha: float, m: int, p: int = 0, r: int = 0) -> QuasiEigenfunction:
    """Level-2 quasi-eigenfunction of the counterexample.

    ``f(0, t) = e(2m t_2 + p t_1)`` and ``f(1, t) = c e(2m t_2 + (p+m) t_1)``
    with ``c = i^r e((2p - m) alpha / 4)``; these are all members of the
    class with ``t_2``-frequency ``2m`` (up to a global constant).
    """
    if r not in range(4):
        raise ValueError("branch r must be 0, 1, 2 or 3")
    c = (1j ** r) * cexp((2 * p - m) * alpha / 4.0)
    a = (p, 2 * m)
    b = (p + m, 2 * m)
    terms = [(0.5, Character(a, 0)), (0.5, Character(a, 1)), (c / 2, Character(b, 0)), (-c / 2, Character(b, 1))]
    merged: dict[Character, complex] = {}
    for coef, ch in terms:
        merged[ch] = merged.get(ch, 0) + coef
    form = Observable(tuple((v, ch) for ch, v in merged.items() if abs(v) > 1e-15))
    if m == 0 and r % 2 == 0:
        level = 0 if p == 0 and r == 0 else 1
    else:
        level = 2
    return QuasiEigenfunction(level, form, f"E2(m={m}, p={p}, r={r})")


def E2_counterexample_family(alpha: float, F: int = DEFAULT_WINDOW) -> list[QuasiEigenfunction]:
    """Catalog members with ``m, p`` in ``[-F, F]`` and all four branches."""
    return [catalog_E2_counterexample(alpha, m, p, r)
            for m in range(-F, F + 1) for p in range(-F, F + 1) for r in range(4)]


def catalog_rotation(alpha: Sequence[float], freqs: Sequence[int]) -> QuasiEigenfunction:
    """Character ``e(<freqs, t>)``: an eigenfunction of the rotation by ``alpha``."""
    ev = cexp(sum(a * f for a, f in zip(alpha, freqs)))
    level = 0 if not any(freqs) else 1
    return QuasiEigenfunction(level, Observable.character(tuple(freqs)), f"rotation{tuple(freqs)}", ev)


def catalog_skew_character(freqs: Sequence[int]) -> QuasiEigenfunction:
    """Character of the unipotent skew product; level = index of the last nonzero frequency."""
    nz = [j + 1 for j, a in enumerate(freqs) if a]
    return QuasiEigenfunction(max(nz, default=0), Observable.character(tuple(freqs)), f"skew{tuple(freqs)}")


def skew_family(d: int, k: int, F: int = DEFAULT_WINDOW) -> list[QuasiEigenfunction]:
    """Characters of level ``<= k`` on ``T^d`` with frequencies in ``[-F, F]``."""
    return [catalog_skew_character(ch.torus_freqs) for ch in character_window(d, F, active=range(min(k, d)))]


@dataclass
class OrthogonalityReport:
    max_abs: float
    argmax: str
    count: int
    values: list[float] = field(default_factory=list)

    @property
    def orthogonal(self) -> bool:
        return self.max_abs < ORTHOGONALITY_TOL

    def to_dict(self) -> dict:
        return {"max_abs": self.max_abs, "argmax": self.argmax, "count": self.count,
                "orthogonal": self.orthogonal}


def orthogonality_report(f: Fn, family: Sequence[QuasiEigenfunction | Observable],
                         dom: GridDomain) -> OrthogonalityReport:
    """``max |<f, h>|`` over a family, by grid quadrature."""
    if not family:
        raise ValueError("family must be nonempty")
    gi, coords = dom.points()
    vf = _values(f, gi, coords, dom.group_order)
    vals = []
    for h in family:
        vh = _values(h, gi, coords, dom.group_order)
        vals.append(abs(complex(np.vdot(vh, vf))) / dom.size)
    i = int(np.argmax(vals))
    label = family[i].provenance if isinstance(family[i], QuasiEigenfunction) else repr(family[i])
    return OrthogonalityReport(float(vals[i]), label, len(family), vals)
