"""Polynomial phases ``P(n) = c_0 + c_1 n + ... + c_k n^k`` modulo 1.

Coefficients are stored as 64-bit fixed-point residues, so ``P(n) mod 1`` is
exact (``n`` only matters modulo ``2**64``) and adding integers to a
coefficient is a no-op by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .torus import (FIX_MASK, cexp_fixed, compensated_sum, from_fixed, int_to_u64, to_fixed, RunningSum)

MAX_STREAM_DEGREE = 8
RENORM_PERIOD = 1 << 16


@dataclass(frozen=True)
class PolynomialPhase:
    """Phase polynomial with coefficients ``(c_0, ..., c_k)`` reduced mod 1."""

    fixed: tuple[int, ...]

    def __post_init__(self):
        if not self.fixed:
            raise ValueError("a phase needs at least the constant coefficient")
        object.__setattr__(self, "fixed", tuple(int(u) & FIX_MASK for u in self.fixed))

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[float], degree: int | None = None) -> "PolynomialPhase":
        fx = [to_fixed(c) for c in coeffs]
        if degree is not None:
            if degree + 1 < len(fx):
                raise ValueError("declared degree smaller than the coefficient vector")
            fx += [0] * (degree + 1 - len(fx))
        return cls(tuple(fx))

    @classmethod
    def zero(cls, degree: int = 0) -> "PolynomialPhase":
        return cls((0,) * (degree + 1))

    @property
    def degree(self) -> int:
        return len(self.fixed) - 1

    @property
    def coeffs(self) -> tuple[float, ...]:
        return tuple(from_fixed(u) for u in self.fixed)

    def __neg__(self) -> "PolynomialPhase":
        return PolynomialPhase(tuple(-u for u in self.fixed))

    def __add__(self, other: "PolynomialPhase") -> "PolynomialPhase":
        k = max(self.degree, other.degree)
        a = self.fixed + (0,) * (k - self.degree)
        b = other.fixed + (0,) * (k - other.degree)
        return PolynomialPhase(tuple(x + y for x, y in zip(a, b)))

    def record(self) -> list[float]:
        return list(self.coeffs)


def eval_phase(P: PolynomialPhase, n: int) -> float:
    """``P(n) mod 1`` by Horner's rule in exact residue arithmetic."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return from_fixed(eval_phase_fixed(P, n))


def eval_phase_fixed(P: PolynomialPhase, n: int) -> int:
    acc = 0
    for c in reversed(P.fixed):
        acc = (acc * n + c) & FIX_MASK
    return acc


def eval_phase_array(P: PolynomialPhase, n) -> np.ndarray:
    """Vectorised Horner evaluation; returns uint64 residues."""
    n = int_to_u64(n)
    acc = np.zeros(n.shape, dtype=np.uint64)
    for c in reversed(P.fixed):
        acc = acc * n + np.uint64(c)
    return acc


@dataclass
class DifferenceTable:
    """Forward-difference state ``(P(n), dP(n), ..., d^k P(n))`` at index ``n``."""

    n: int
    values: list[int]

    @classmethod
    def at(cls, P: PolynomialPhase, n: int) -> "DifferenceTable":
        k = P.degree
        vals = [eval_phase_fixed(P, n + i) for i in range(k + 1)]
        table = []
        for _ in range(k + 1):
            table.append(vals[0])
            vals = [(b - a) & FIX_MASK for a, b in zip(vals, vals[1:])]
        return cls(n, table)

    @property
    def current(self) -> float:
        return from_fixed(self.values[0])

    def advance(self) -> None:
        v = self.values
        for i in range(len(v) - 1):
            v[i] = (v[i] + v[i + 1]) & FIX_MASK
        self.n += 1

    def block(self, count: int) -> np.ndarray:
        """Residues ``P(n), ..., P(n + count - 1)`` by repeated prefix sums."""
        k = len(self.values) - 1
        acc = np.full(count, self.values[k], dtype=np.uint64)
        for j in range(k - 1, -1, -1):
            prev = np.empty(count, dtype=np.uint64)
            prev[0] = 0
            if count > 1:
                np.cumsum(acc[:-1], out=prev[1:])
            acc = prev + np.uint64(self.values[j])
        return acc


def phase_blocks(P: PolynomialPhase, N: int, start: int = 1,
                 block: int = 1 << 18, renorm: int = RENORM_PERIOD) -> Iterator[np.ndarray]:
    """Yield residue blocks of ``P(start), ..., P(start + N - 1)``.

    Each block is assembled from difference tables rebuilt by direct
    evaluation every ``renorm`` indices.
    """
    if P.degree > MAX_STREAM_DEGREE:
        raise ValueError(f"difference tables are limited to degree {MAX_STREAM_DEGREE}")
    n = start
    end = start + N
    while n < end:
        hi = min(n + block, end)
        parts = []
        m = n
        while m < hi:
            cnt = min(renorm, hi - m)
            parts.append(DifferenceTable.at(P, m).block(cnt))
            m += cnt
        yield parts[0] if len(parts) == 1 else np.concatenate(parts)
        n = hi


def phase_stream(P: PolynomialPhase, N: int, start: int = 1) -> np.ndarray:
    """``P(start), ..., P(start + N - 1)`` mod 1 as floats, by forward differencing."""
    if N < 1:
        raise ValueError("N must be positive")
    out = np.concatenate(list(phase_blocks(P, N, start)))
    v = np.ldexp(out.astype(np.float64), -64)
    v[v >= 1.0] = 0.0
    return v


def weyl_average(P: PolynomialPhase, weights, N: int) -> complex:
    """``(1/N) sum_{n=1}^N e(P(n)) w(n)``; ``weights[0]`` is ``w(1)``; ``None`` means ``w = 1``."""
    if N < 1:
        raise ValueError("N must be positive")
    if weights is not None:
        weights = np.asarray(weights, dtype=np.complex128)
        if weights.shape[0] < N:
            raise ValueError(f"need {N} weights, got {weights.shape[0]}")
    total = RunningSum()
    pos = 0
    for ph in phase_blocks(P, N):
        z = cexp_fixed(ph)
        if weights is not None:
            z = z * weights[pos:pos + z.size]
        total.add(compensated_sum(z))
        pos += z.size
    return total.value / N


def next_pow2(x: float) -> int:
    return 1 << max(0, math.ceil(math.log2(max(1.0, x))))


def batched_linear_scan(b, N: int, M: int) -> np.ndarray:
    """``[(1/N) sum_{n=1}^N e(n j / M) b(n) for j in range(M)]`` via one FFT.

    The sequence is folded modulo ``M`` first, so any ``M >= 1`` works; bins
    are exact samples of the trigonometric polynomial ``c -> A(c)``.
    """
    if M < 1:
        raise ValueError("grid size M must be positive")
    b = np.asarray(b, dtype=np.complex128)[:N]
    if b.shape[0] < N:
        raise ValueError(f"need {N} terms, got {b.shape[0]}")
    rows = -(-(N + 1) // M)
    z = np.zeros(rows * M, dtype=np.complex128)
    z[1:N + 1] = b
    y = z.reshape(rows, M).sum(axis=0) if rows > 1 else z
    return np.fft.ifft(y) * (M / N)


def batched_linear_scan_rows(w: np.ndarray, M: int) -> np.ndarray:
    """Row-wise :func:`batched_linear_scan` for a 2-D array of sequences."""
    R, N = w.shape
    rows = -(-(N + 1) // M)
    z = np.zeros((R, rows * M), dtype=np.complex128)
    z[:, 1:N + 1] = w
    y = z.reshape(R, rows, M).sum(axis=1) if rows > 1 else z
    return np.fft.ifft(y, axis=1) * (M / N)
