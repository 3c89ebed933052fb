"""Measure-preserving systems on ``Z_q x T^d``.

Every system is an affine unipotent map, so stepping is a handful of exact
fixed-point additions and (for all variants except a Lesigne extension with
no known eigen-phase) the n-th iterate has a binomial closed form.  Both
paths run in the same 64-bit residue arithmetic and agree bit for bit.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .torus import (FIX_MASK, Observable, binom_mod64, compensated_sum, from_fixed, to_fixed,
                    torus_distance)

logger = logging.getLogger(__name__)

ALPHA_CONSTANTS = {
    "sqrt2m1": math.sqrt(2.0) - 1.0,
    "golden": (math.sqrt(5.0) - 1.0) / 2.0,
}


def resolve_alpha(value) -> float:
    """Accept a float or one of the named irrationals in :data:`ALPHA_CONSTANTS`."""
    if isinstance(value, str):
        try:
            return ALPHA_CONSTANTS[value]
        except KeyError:
            raise ValueError(f"unknown named constant {value!r}; known: {sorted(ALPHA_CONSTANTS)}") from None
    return float(value)


class ClosedFormUnavailable(UserWarning):
    """Raised as a warning when an iterate had to be computed by stepping."""


@dataclass(frozen=True)
class SystemState:
    """A point ``(group_index, t_1, ..., t_d)``; coordinates held as fixed-point residues."""

    group_index: int
    fixed: tuple[int, ...]

    @classmethod
    def from_coords(cls, group_index: int, coords: Sequence[float]) -> "SystemState":
        return cls(int(group_index), tuple(to_fixed(c) for c in coords))

    @property
    def coords(self) -> tuple[float, ...]:
        return tuple(from_fixed(u) for u in self.fixed)

    @property
    def dim(self) -> int:
        return len(self.fixed)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([self.group_index], dtype=np.int64),
                np.array([self.fixed], dtype=np.uint64).reshape(1, self.dim))

    def distance(self, other: "SystemState") -> float:
        """Max coordinate distance on the torus; inf if the group indices differ."""
        if self.group_index != other.group_index or self.dim != other.dim:
            return math.inf
        return max((torus_distance(a, b) for a, b in zip(self.coords, other.coords)), default=0.0)

    def __repr__(self) -> str:
        cs = ", ".join(f"{c:.17g}" for c in self.coords)
        return f"SystemState({self.group_index}; {cs})"


def _u64(x) -> np.uint64:
    return np.uint64(int(x) & FIX_MASK)


@dataclass(frozen=True)
class AffinePhase:
    """Real-valued phase ``gamma(i, t) = <torus_freqs, t> + fiber_offsets[i]``.

    Used as the cocycle of a Lesigne extension; ``e(gamma)`` is typically an
    eigenfunction of the base.
    """

    torus_freqs: tuple[int, ...]
    fiber_offsets: tuple[float, ...] = (0.0,)

    def fixed(self, gi: np.ndarray, coords: np.ndarray) -> np.ndarray:
        out = np.zeros(coords.shape[0], dtype=np.uint64)
        for j, a in enumerate(self.torus_freqs):
            if a:
                out += coords[:, j] * _u64(a)
        offs = np.array([to_fixed(o) for o in self.fiber_offsets], dtype=np.uint64)
        return out + offs[gi % len(offs)]

    def record(self) -> dict:
        return {"torus_freqs": list(self.torus_freqs), "fiber_offsets": list(self.fiber_offsets)}


class System:
    """Common interface.  Subclasses are frozen dataclasses."""

    group_order: int = 1
    dim: int = 0
    irrational: bool = True

    # vectorised exact step on arrays of states
    def step_fixed(self, gi: np.ndarray, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def has_closed_form(self) -> bool:
        return False

    def closed_form_fixed(self, gi0: int, c0: np.ndarray, n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """States ``T^n x`` for a vector of ``n`` from one start ``(gi0, c0)``."""
        raise NotImplementedError

    def record(self) -> dict:
        raise NotImplementedError

    def check_state(self, x: SystemState) -> None:
        if x.dim != self.dim:
            raise ValueError(f"state has {x.dim} torus coordinates, system expects {self.dim}")
        if not 0 <= x.group_index < self.group_order:
            raise ValueError(f"group index {x.group_index} outside [0, {self.group_order})")


@dataclass(frozen=True)
class Rotation(System):
    """``t -> t + alpha`` on ``T^d``."""

    alpha: tuple[float, ...]
    irrational: bool = True

    def __post_init__(self):
        a = (self.alpha,) if np.isscalar(self.alpha) else tuple(self.alpha)
        object.__setattr__(self, "alpha", tuple(float(v) for v in a))

    @property
    def dim(self) -> int:
        return len(self.alpha)

    def _a(self) -> np.ndarray:
        return np.array([to_fixed(a) for a in self.alpha], dtype=np.uint64)

    def step_fixed(self, gi, coords):
        return gi.copy(), coords + self._a()

    @property
    def has_closed_form(self) -> bool:
        return True

    def closed_form_fixed(self, gi0, c0, n):
        n = np.asarray(n, dtype=np.uint64)
        coords = c0[None, :] + n[:, None] * self._a()[None, :]
        return np.full(n.shape, gi0, dtype=np.int64), coords

    def record(self) -> dict:
        return {"type": "rotation", "alpha": list(self.alpha), "irrational": self.irrational}


@dataclass(frozen=True)
class UnipotentSkew(System):
    """``(t_1, ..., t_d) -> (t_1 + alpha, t_2 + t_1, ..., t_d + t_{d-1})``."""

    d: int
    alpha: float
    irrational: bool = True

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("skew product needs d >= 1")

    @property
    def dim(self) -> int:
        return self.d

    def step_fixed(self, gi, coords):
        out = coords.copy()
        out[:, 0] += _u64(to_fixed(self.alpha))
        out[:, 1:] += coords[:, :-1]
        return gi.copy(), out

    @property
    def has_closed_form(self) -> bool:
        return True

    def closed_form_fixed(self, gi0, c0, n):
        n = np.asarray(n, dtype=np.uint64)
        binoms = [binom_mod64(n, i) for i in range(self.d + 1)]
        a = _u64(to_fixed(self.alpha))
        coords = np.empty((n.size, self.d), dtype=np.uint64)
        for j in range(1, self.d + 1):
            acc = binoms[j] * a
            for i in range(j):
                acc = acc + binoms[i] * c0[j - i - 1]
            coords[:, j - 1] = acc
        return np.full(n.shape, gi0, dtype=np.int64), coords

    def record(self) -> dict:
        return {"type": "skew", "d": self.d, "alpha": self.alpha, "irrational": self.irrational}


@dataclass(frozen=True)
class Counterexample(System):
    """The ergodic, not totally ergodic map on ``Z_2 x T^2``:

    ``(0, t1, t2) -> (1, t1, t2)`` and ``(1, t1, t2) -> (0, t1 + alpha, t2 + t1)``.
    """

    alpha: float
    irrational: bool = True

    group_order = 2
    dim = 2

    def step_fixed(self, gi, coords):
        out = coords.copy()
        one = gi == 1
        out[one, 1] += coords[one, 0]
        out[one, 0] += _u64(to_fixed(self.alpha))
        return 1 - gi, out

    @property
    def has_closed_form(self) -> bool:
        return True

    def closed_form_fixed(self, gi0, c0, n):
        # T^2 = id x S with S(t1, t2) = (t1 + alpha, t2 + t1)
        n = np.asarray(n, dtype=np.uint64)
        r = n & np.uint64(1)
        q = (n >> np.uint64(1)) + (r & np.uint64(gi0))
        a = _u64(to_fixed(self.alpha))
        coords = np.empty((n.size, 2), dtype=np.uint64)
        coords[:, 0] = c0[0] + q * a
        coords[:, 1] = c0[1] + q * c0[0] + binom_mod64(q, 2) * a
        gi = (np.int64(gi0) ^ r.astype(np.int64))
        return gi, coords

    def record(self) -> dict:
        return {"type": "counterexample", "alpha": self.alpha, "irrational": self.irrational}


@dataclass(frozen=True)
class Power(System):
    """``T^m`` for a base system ``T``; same state space."""

    base: System
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("power must be a positive integer")

    @property
    def group_order(self) -> int:
        return self.base.group_order

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def irrational(self) -> bool:
        return self.base.irrational

    def step_fixed(self, gi, coords):
        for _ in range(self.m):
            gi, coords = self.base.step_fixed(gi, coords)
        return gi, coords

    @property
    def has_closed_form(self) -> bool:
        return self.base.has_closed_form

    def closed_form_fixed(self, gi0, c0, n):
        return self.base.closed_form_fixed(gi0, c0, np.asarray(n, dtype=np.uint64) * np.uint64(self.m))

    def record(self) -> dict:
        return {"type": "power", "base": self.base.record(), "m": self.m}


@dataclass(frozen=True)
class LesigneExtension(System):
    """``T_k(x, u_1, ..., u_k) = (Tx, u_1 + gamma(x) + b, u_2 + u_1, ..., u_k + u_{k-1})``.

    ``eigenphase`` is ``theta`` with ``gamma(Tx) = gamma(x) + theta``; when it is
    given and the base has a closed form, iterates are closed form too.  ``b``
    is a caller choice (nothing here certifies total ergodicity).
    """

    base: System
    gamma: AffinePhase
    b: float
    k: int
    eigenphase: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("extension depth must be >= 1")
        if len(self.gamma.torus_freqs) != self.base.dim:
            raise ValueError("gamma must act on the base torus")

    @property
    def group_order(self) -> int:
        return self.base.group_order

    @property
    def dim(self) -> int:
        return self.base.dim + self.k

    @property
    def irrational(self) -> bool:
        return self.base.irrational

    def step_fixed(self, gi, coords):
        d = self.base.dim
        x = coords[:, :d]
        u = coords[:, d:]
        g = self.gamma.fixed(gi, x) + _u64(to_fixed(self.b))
        gi2, x2 = self.base.step_fixed(gi, x)
        u2 = u.copy()
        u2[:, 0] += g
        u2[:, 1:] += u[:, :-1]
        return gi2, np.concatenate([x2, u2], axis=1)

    @property
    def has_closed_form(self) -> bool:
        return self.eigenphase is not None and self.base.has_closed_form

    def closed_form_fixed(self, gi0, c0, n):
        if not self.has_closed_form:
            raise NotImplementedError("no closed form without an eigenphase and a closed-form base")
        d = self.base.dim
        n = np.asarray(n, dtype=np.uint64)
        gi, x = self.base.closed_form_fixed(gi0, c0[:d], n)
        g0 = int(self.gamma.fixed(np.array([gi0]), c0[None, :d])[0]) + to_fixed(self.b)
        theta = _u64(to_fixed(self.eigenphase))
        binoms = [binom_mod64(n, i) for i in range(self.k + 2)]
        u = np.empty((n.size, self.k), dtype=np.uint64)
        for j in range(1, self.k + 1):
            acc = binoms[j] * _u64(g0) + binoms[j + 1] * theta
            for i in range(j):
                acc = acc + binoms[i] * c0[d + j - i - 1]
            u[:, j - 1] = acc
        return gi, np.concatenate([x, u], axis=1)

    def record(self) -> dict:
        return {"type": "lesigne", "base": self.base.record(), "gamma": self.gamma.record(),
                "b": self.b, "k": self.k, "eigenphase": self.eigenphase}


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def step(spec: System, x: SystemState) -> SystemState:
    """One application of the map."""
    spec.check_state(x)
    gi, c = spec.step_fixed(*x.arrays())
    return SystemState(int(gi[0]), tuple(int(v) for v in c[0]))


def iterate_closed_form(spec: System, x: SystemState, n: int) -> SystemState:
    """``T^n x`` from the binomial closed form (stepping fallback, with a warning)."""
    spec.check_state(x)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return x
    if not spec.has_closed_form:
        warnings.warn(f"{type(spec).__name__} has no closed form here; stepping {n} times",
                      ClosedFormUnavailable, stacklevel=2)
        gi, c = x.arrays()
        for _ in range(n):
            gi, c = spec.step_fixed(gi, c)
        return SystemState(int(gi[0]), tuple(int(v) for v in c[0]))
    gi, c = spec.closed_form_fixed(x.group_index, np.array(x.fixed, dtype=np.uint64).reshape(spec.dim),
                                   np.array([n], dtype=np.uint64))
    return SystemState(int(gi[0]), tuple(int(v) for v in c[0]))


def orbit_stream(spec: System, x: SystemState, N: int) -> Iterator[SystemState]:
    """Lazily yield ``Tx, T^2 x, ..., T^N x`` by repeated stepping."""
    spec.check_state(x)
    gi, c = x.arrays()
    for _ in range(N):
        gi, c = spec.step_fixed(gi, c)
        yield SystemState(int(gi[0]), tuple(int(v) for v in c[0]))


def orbit_blocks(spec: System, x: SystemState, N: int, start: int = 1,
                 block: int = 1 << 18) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(n, gi, coords_fixed)`` blocks covering ``n = start, ..., start + N - 1``.

    Closed-form systems are evaluated per index; others are stepped.
    """
    spec.check_state(x)
    if N <= 0:
        return
    c0 = np.array(x.fixed, dtype=np.uint64).reshape(spec.dim)
    if spec.has_closed_form:
        for lo in range(start, start + N, block):
            hi = min(lo + block, start + N)
            n = np.arange(lo, hi, dtype=np.uint64)
            gi, coords = spec.closed_form_fixed(x.group_index, c0, n)
            yield n, gi, coords
        return
    gi, c = x.arrays()
    for _ in range(start):
        gi, c = spec.step_fixed(gi, c)
    buf_gi = np.empty(min(block, N), dtype=np.int64)
    buf_c = np.empty((min(block, N), spec.dim), dtype=np.uint64)
    nxt = start
    filled = 0
    for s in range(N):
        buf_gi[filled] = gi[0]
        buf_c[filled] = c[0]
        filled += 1
        if filled == buf_gi.size or s == N - 1:
            yield np.arange(nxt, nxt + filled, dtype=np.uint64), buf_gi[:filled].copy(), buf_c[:filled].copy()
            nxt += filled
            filled = 0
        if s < N - 1:
            gi, c = spec.step_fixed(gi, c)


def orbit_arrays(spec: System, x: SystemState, N: int, start: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Materialised orbit states for ``n = start .. start + N - 1``."""
    gis, cs = [], []
    for _, gi, c in orbit_blocks(spec, x, N, start):
        gis.append(gi)
        cs.append(c)
    if not gis:
        return np.zeros(0, dtype=np.int64), np.zeros((0, spec.dim), dtype=np.uint64)
    return np.concatenate(gis), np.concatenate(cs)


def observable_along_orbit(spec: System, f: Observable, x: SystemState, N: int, start: int = 1) -> np.ndarray:
    """``f(T^n x)`` for ``n = start .. start + N - 1`` as a complex array."""
    gi, c = orbit_arrays(spec, x, N, start)
    return f.evaluate_fixed(gi, c, spec.group_order)


@dataclass
class ErgodicityReport:
    N: int
    averages: list[complex]
    max_deviation: float
    starts: list[SystemState] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"N": self.N, "averages": [[z.real, z.imag] for z in self.averages],
                "max_deviation": self.max_deviation,
                "starts": [[s.group_index, *s.coords] for s in self.starts]}


def ergodicity_probe(spec: System, f: Observable, starts: Sequence[SystemState], N: int) -> ErgodicityReport:
    """Birkhoff averages ``(1/N) sum_{n<=N} f(T^n x)`` from several starts.

    A small spread is evidence (never proof) of ergodicity.
    """
    if len(starts) < 2:
        raise ValueError("need at least two starting points")
    avgs = []
    for x in starts:
        total = 0j
        for _, gi, c in orbit_blocks(spec, x, N):
            total += compensated_sum(f.evaluate_fixed(gi, c, spec.group_order))
        avgs.append(total / N)
    dev = max(abs(a - b) for i, a in enumerate(avgs) for b in avgs[i + 1:])
    return ErgodicityReport(N, avgs, float(dev), list(starts))


def random_states(spec: System, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform random states (Haar measure) as fixed-point arrays."""
    gi = rng.integers(0, spec.group_order, size=count).astype(np.int64)
    coords = rng.integers(0, 2**64, size=(count, spec.dim), dtype=np.uint64)
    return gi, coords


def build_system(record: dict) -> System:
    """Construct a system from its tagged record (see :meth:`System.record`)."""
    kind = record.get("type")
    irr = bool(record.get("irrational", True))
    if kind == "rotation":
        a = record["alpha"]
        a = [resolve_alpha(v) for v in a] if isinstance(a, (list, tuple)) else [resolve_alpha(a)]
        return Rotation(tuple(a), irr)
    if kind == "skew":
        return UnipotentSkew(int(record["d"]), resolve_alpha(record["alpha"]), irr)
    if kind == "counterexample":
        return Counterexample(resolve_alpha(record["alpha"]), irr)
    if kind == "power":
        return Power(build_system(record["base"]), int(record["m"]))
    if kind == "lesigne":
        g = record["gamma"]
        eig = record.get("eigenphase")
        return LesigneExtension(build_system(record["base"]),
                                AffinePhase(tuple(int(v) for v in g["torus_freqs"]),
                                            tuple(resolve_alpha(v) for v in g.get("fiber_offsets", [0.0]))),
                                resolve_alpha(record.get("b", 0.0)), int(record["k"]),
                                None if eig is None else resolve_alpha(eig))
    raise ValueError(f"unknown system type {kind!r}")
