"""Arithmetic on the unit torus, characters, observables and grid quadrature.

Coordinates of T = R/Z are carried internally as 64-bit fixed-point residues:
an integer ``u`` in ``[0, 2**64)`` stands for the point ``u / 2**64``.
Addition and multiplication by integers are then exact modulo 1 (numpy's
``uint64`` arithmetic wraps), which keeps long orbits and polynomial phases
free of drift.  Floats only appear at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

FIX_BITS = 64
FIX_ONE = 1 << FIX_BITS
FIX_MASK = FIX_ONE - 1
_TWO_PI_OVER_FIX = 2.0 * math.pi / FIX_ONE


# ---------------------------------------------------------------------------
# scalars
# ---------------------------------------------------------------------------

def frac(x: float) -> float:
    """Reduce ``x`` modulo 1 into ``[0, 1)``.

    Raises
    ------
    ValueError
        If ``x`` is nan or infinite.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"frac() needs a finite real, got {x!r}")
    r = x - math.floor(x)
    # x slightly below an integer can round up to 1.0
    return 0.0 if r >= 1.0 else r


def cexp(t: float) -> complex:
    """Return ``e(t) = exp(2 pi i t)``."""
    t = frac(t)
    # centre the angle so that quarter turns come out exact
    if t >= 0.5:
        t -= 1.0
    a = 2.0 * math.pi * t
    if t in (0.25, -0.25):
        return complex(0.0, math.copysign(1.0, t))
    if t == -0.5:
        return complex(-1.0, 0.0)
    return complex(math.cos(a), math.sin(a))


def torus_distance(a: float, b: float) -> float:
    """Distance between ``a`` and ``b`` on R/Z."""
    d = frac(a - b)
    return min(d, 1.0 - d)


def to_fixed(x: float) -> int:
    """Fixed-point residue of ``x mod 1``, rounded to the nearest ``2**-64``."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite torus coordinate {x!r}")
    num, den = x.as_integer_ratio()
    # den is a power of two; exact rounding of num * 2**64 / den
    return ((2 * num * FIX_ONE + den) // (2 * den)) & FIX_MASK


def from_fixed(u: int) -> float:
    """Float in ``[0, 1)`` nearest to the residue ``u / 2**64``."""
    v = math.ldexp(float(int(u) & FIX_MASK), -FIX_BITS)
    return 0.0 if v >= 1.0 else v


def fixed_of_rational(p: int, q: int) -> int:
    """Residue of ``p / q mod 1`` (nearest ``2**-64``)."""
    if q <= 0:
        raise ValueError("denominator must be positive")
    p %= q
    return ((2 * p * FIX_ONE + q) // (2 * q)) & FIX_MASK


# ---------------------------------------------------------------------------
# arrays
# ---------------------------------------------------------------------------

def to_fixed_array(x) -> np.ndarray:
    """Vectorised :func:`to_fixed`; returns ``uint64``."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite torus coordinate")
    # x - floor(x) is exact only for x >= 0, so reduce |x| and negate mod 2**64
    a = np.abs(x)
    f = a - np.floor(a)
    hi_f = np.floor(np.ldexp(f, 32))
    y = np.ldexp(np.ldexp(f, 32) - hi_f, 32)
    lo_f = np.floor(y)
    hi = hi_f.astype(np.uint64)
    # round x half up (so |x| half down when negative), matching the scalar conversion
    rem = y - lo_f
    up = np.where(x < 0, rem > 0.5, rem >= 0.5)
    lo = lo_f.astype(np.uint64) + up.astype(np.uint64)
    u = (hi << np.uint64(32)) + lo
    return np.where(x < 0, np.uint64(0) - u, u)


def from_fixed_array(u) -> np.ndarray:
    """Vectorised :func:`from_fixed`; returns float64 in ``[0, 1)``."""
    v = np.ldexp(np.asarray(u, dtype=np.uint64).astype(np.float64), -FIX_BITS)
    v[v >= 1.0] = 0.0
    return v


def cexp_fixed(u) -> np.ndarray:
    """``e(u / 2**64)`` for a ``uint64`` array of residues."""
    # signed view maps [1/2, 1) to [-1/2, 0): angles stay in [-pi, pi)
    s = np.asarray(u, dtype=np.uint64).view(np.int64).astype(np.float64)
    ang = s * _TWO_PI_OVER_FIX
    return np.cos(ang) + 1j * np.sin(ang)


def signed_fixed(u) -> np.ndarray:
    """Residues as reals in ``[-1/2, 1/2)`` (float64)."""
    return np.ldexp(np.asarray(u, dtype=np.uint64).view(np.int64).astype(np.float64), -FIX_BITS)


def mul_fixed(u, k):
    """``u * k mod 2**64`` for uint64 arrays (wrapping multiply)."""
    return np.multiply(np.asarray(u, dtype=np.uint64), np.asarray(k, dtype=np.uint64))


def int_to_u64(k) -> np.ndarray:
    """Reduce (possibly negative) integers modulo ``2**64`` into uint64."""
    a = np.asarray(k)
    if a.dtype == object:
        return np.array([int(v) & FIX_MASK for v in a.ravel()], dtype=np.uint64).reshape(a.shape)
    return a.astype(np.int64).view(np.uint64) if a.dtype.kind == "i" else a.astype(np.uint64)


def _trailing_zeros(x: np.ndarray) -> np.ndarray:
    low = x & (~x + np.uint64(1))
    return np.bitwise_count(low - np.uint64(1)).astype(np.int64)


def binom_mod64(n, i: int) -> np.ndarray:
    """Binomial coefficients ``C(n, i) mod 2**64`` for a nonnegative integer array.

    Exact: the odd part of ``i!`` is inverted modulo ``2**64`` and the power of
    two is cancelled against the 2-adic valuations of the factors.
    """
    n = np.asarray(n, dtype=np.uint64)
    if i < 0:
        raise ValueError("binomial index must be nonnegative")
    if i == 0:
        return np.ones_like(n)
    fact = math.factorial(i)
    w = (fact & -fact).bit_length() - 1
    odd = fact >> w
    inv = pow(odd, -1, FIX_ONE)
    prod = np.ones_like(n)
    val = np.zeros(n.shape, dtype=np.int64)
    zero = np.zeros(n.shape, dtype=bool)
    for r in range(i):
        fac = n - np.uint64(r)
        z = fac == 0
        zero |= z
        fac = np.where(z, np.uint64(1), fac)
        tz = _trailing_zeros(fac)
        val += tz
        prod = prod * (fac >> tz.astype(np.uint64))
    prod = prod * np.uint64(inv)
    shift = val - w
    out = np.where(shift >= 64, np.uint64(0), prod << np.clip(shift, 0, 63).astype(np.uint64))
    out[zero] = 0
    return out


def compensated_sum(x) -> complex | float:
    """Sum with error-free pairwise transformations.

    Each pairwise level records its rounding errors exactly (TwoSum); the
    errors are folded back at the end with :func:`math.fsum`.
    """
    x = np.asarray(x).ravel()
    if np.iscomplexobj(x):
        return complex(_twosum_cascade(x.real.copy()), _twosum_cascade(x.imag.copy()))
    return _twosum_cascade(x.astype(np.float64, copy=True))


def _twosum_cascade(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    errs = []
    while x.size > 1:
        if x.size % 2:
            x = np.append(x, 0.0)
        a = x[0::2]
        b = x[1::2]
        s = a + b
        bp = s - a
        errs.append(float(np.sum((a - (s - bp)) + (b - bp))))
        x = s
    return math.fsum([float(x[0]), *errs])


class RunningSum:
    """Correctly rounded accumulator (math.fsum) for a stream of block sums."""

    def __init__(self) -> None:
        self._parts: list[float] = []
        self._im: list[float] = []

    def add(self, z: complex) -> None:
        self._parts.append(z.real)
        self._im.append(z.imag)
        if len(self._parts) > 512:
            self._parts = [math.fsum(self._parts)]
            self._im = [math.fsum(self._im)]

    @property
    def value(self) -> complex:
        return complex(math.fsum(self._parts), math.fsum(self._im))


# ---------------------------------------------------------------------------
# characters and observables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Character:
    """``(i, t) -> e(group_freq * i / q + <torus_freqs, t>)`` on ``Z_q x T^d``."""

    torus_freqs: tuple[int, ...]
    group_freq: int = 0

    def __post_init__(self):
        object.__setattr__(self, "torus_freqs", tuple(int(a) for a in self.torus_freqs))
        object.__setattr__(self, "group_freq", int(self.group_freq))

    @property
    def dim(self) -> int:
        return len(self.torus_freqs)

    def phase_fixed(self, gi: np.ndarray, coords: np.ndarray, q: int) -> np.ndarray:
        """Fixed-point phase at states given as ``gi`` (ints) and ``coords`` (uint64, shape (n, d))."""
        coords = np.asarray(coords, dtype=np.uint64)
        if coords.shape[-1] != self.dim:
            raise ValueError(f"character of dimension {self.dim} applied to {coords.shape[-1]}-torus")
        out = np.zeros(coords.shape[:-1], dtype=np.uint64)
        for j, a in enumerate(self.torus_freqs):
            if a:
                out += coords[..., j] * np.uint64(a & FIX_MASK)
        if self.group_freq and q > 1:
            table = np.array([fixed_of_rational(self.group_freq * i, q) for i in range(q)], dtype=np.uint64)
            out += table[np.asarray(gi, dtype=np.int64) % q]
        return out


@dataclass(frozen=True)
class Observable:
    """Finite complex combination ``sum_r coef_r * chi_r`` of characters."""

    terms: tuple[tuple[complex, Character], ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("observable needs at least one term")
        dims = {ch.dim for _, ch in self.terms}
        if len(dims) != 1:
            raise ValueError("all characters of an observable must share the torus dimension")
        object.__setattr__(self, "terms", tuple((complex(c), ch) for c, ch in self.terms))

    @classmethod
    def character(cls, torus_freqs: Sequence[int], group_freq: int = 0, coef: complex = 1.0) -> "Observable":
        return cls(((coef, Character(tuple(torus_freqs), group_freq)),))

    @classmethod
    def constant(cls, dim: int, value: complex = 1.0) -> "Observable":
        return cls.character((0,) * dim, 0, value)

    @property
    def dim(self) -> int:
        return self.terms[0][1].dim

    @property
    def sup_bound(self) -> float:
        """``sum |coef|``, an upper bound for ``sup |f|``."""
        return float(sum(abs(c) for c, _ in self.terms))

    def __mul__(self, other: "Observable") -> "Observable":
        if not isinstance(other, Observable):
            return NotImplemented
        terms = []
        for c1, h1 in self.terms:
            for c2, h2 in other.terms:
                ch = Character(tuple(a + b for a, b in zip(h1.torus_freqs, h2.torus_freqs)),
                               h1.group_freq + h2.group_freq)
                terms.append((c1 * c2, ch))
        return Observable(tuple(terms))

    def conj(self) -> "Observable":
        return Observable(tuple((c.conjugate(), Character(tuple(-a for a in ch.torus_freqs), -ch.group_freq))
                                for c, ch in self.terms))

    def evaluate_fixed(self, gi, coords, q: int) -> np.ndarray:
        out = np.zeros(np.asarray(coords).shape[:-1], dtype=np.complex128)
        for c, ch in self.terms:
            out += c * cexp_fixed(ch.phase_fixed(gi, coords, q))
        return out

    def evaluate(self, gi, coords, q: int) -> np.ndarray:
        """Evaluate at float coordinates."""
        return self.evaluate_fixed(gi, to_fixed_array(coords), q)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridDomain:
    """Equispaced product grid on ``Z_q x T^d`` (uniform Haar weights)."""

    group_order: int
    torus_dim: int
    points_per_axis: tuple[int, ...] = field(default=())

    def __post_init__(self):
        ppa = tuple(int(p) for p in self.points_per_axis)
        if len(ppa) == 1 and self.torus_dim > 1:
            ppa = ppa * self.torus_dim
        object.__setattr__(self, "points_per_axis", ppa)
        if self.group_order < 1 or len(ppa) != self.torus_dim or any(p < 1 for p in ppa):
            raise ValueError("grid needs group_order >= 1 and one positive point count per torus axis")

    @property
    def size(self) -> int:
        return self.group_order * math.prod(self.points_per_axis)

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """All grid points as ``(gi, coords_fixed)``."""
        axes = [np.array([fixed_of_rational(l, p) for l in range(p)], dtype=np.uint64)
                for p in self.points_per_axis]
        mesh = np.meshgrid(np.arange(self.group_order), *axes, indexing="ij")
        gi = mesh[0].ravel()
        if self.torus_dim:
            coords = np.stack([m.ravel() for m in mesh[1:]], axis=-1)
        else:
            coords = np.zeros((gi.size, 0), dtype=np.uint64)
        return gi, coords


def _values_on(f, gi, coords, q):
    if isinstance(f, Observable):
        return f.evaluate_fixed(gi, coords, q)
    return np.asarray(f(gi, coords), dtype=np.complex128)


def inner_product(f, g, dom: GridDomain) -> complex:
    """Quadrature of ``integral f * conj(g) dmu`` on the grid ``dom``.

    ``f`` and ``g`` are :class:`Observable` instances or callables
    ``(gi, coords_fixed) -> complex array``.
    """
    if dom.size < 1:
        raise ValueError("empty quadrature domain")
    gi, coords = dom.points()
    vf = _values_on(f, gi, coords, dom.group_order)
    vg = _values_on(g, gi, coords, dom.group_order)
    return compensated_sum(vf * np.conj(vg)) / dom.size


def character_window(dim: int, F: int, active: Iterable[int] | None = None) -> list[Character]:
    """All characters with frequencies in ``[-F, F]`` on the ``active`` axes (others 0)."""
    active = list(range(dim)) if active is None else list(active)
    out = []
    for freqs in np.ndindex(*([2 * F + 1] * len(active))):
        full = [0] * dim
        for ax, v in zip(active, freqs):
            full[ax] = v - F
        out.append(Character(tuple(full)))
    return out
