"""Twisted polynomial ergodic averages and the two inequalities built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .phases import PolynomialPhase, phase_blocks
from .systems import System, SystemState, orbit_blocks
from .torus import Observable, RunningSum, cexp_fixed, compensated_sum, to_fixed

BLOCK = 1 << 18


def _twisted_block(f: Observable, ph: np.ndarray, gi: np.ndarray, coords: np.ndarray, q: int) -> np.ndarray:
    out = None
    for c, ch in f.terms:
        z = cexp_fixed(ph + ch.phase_fixed(gi, coords, q))
        z = z if c == 1 else c * z
        out = z if out is None else out + z
    return out


def twisted_terms(spec: System, f: Observable, x: SystemState, P: PolynomialPhase,
                  N: int, start: int = 1) -> np.ndarray:
    """Materialised ``e(P(n)) f(T^n x)`` for ``n = start .. start + N - 1``."""
    if f.dim != spec.dim:
        raise ValueError(f"observable on T^{f.dim} does not match a system on T^{spec.dim}")
    parts = []
    for (_, gi, c), ph in zip(orbit_blocks(spec, x, N, start, BLOCK), phase_blocks(P, N, start, BLOCK)):
        parts.append(_twisted_block(f, ph, gi, c, spec.group_order))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.complex128)


def twisted_average(spec: System, f: Observable, x: SystemState, P: PolynomialPhase, N: int) -> complex:
    """``(1/N) sum_{n=1}^N e(P(n)) f(T^n x)``, streamed in blocks."""
    if N < 1:
        raise ValueError("N must be positive")
    return average_series(spec, f, x, P, [N]).values[0]


@dataclass
class AverageSeries:
    checkpoints: list[int]
    values: list[complex]
    meta: dict = field(default_factory=dict)

    def rows(self) -> list[tuple[int, float, float, float]]:
        return [(n, v.real, v.imag, abs(v)) for n, v in zip(self.checkpoints, self.values)]


def average_series(spec: System, f: Observable, x: SystemState, P: PolynomialPhase,
                   checkpoints: Sequence[int]) -> AverageSeries:
    """Partial averages ``A_N`` at each checkpoint from one orbit pass."""
    cps = [int(c) for c in checkpoints]
    if not cps or cps[0] < 1 or any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be positive and strictly increasing")
    if f.dim != spec.dim:
        raise ValueError(f"observable on T^{f.dim} does not match a system on T^{spec.dim}")
    N = cps[-1]
    total = RunningSum()
    values = []
    ci = 0
    lo = 1
    for (_, gi, c), ph in zip(orbit_blocks(spec, x, N, 1, BLOCK), phase_blocks(P, N, 1, BLOCK)):
        z = _twisted_block(f, ph, gi, c, spec.group_order)
        hi = lo + z.size
        pos = 0
        while ci < len(cps) and cps[ci] < hi:
            cut = cps[ci] - lo + 1
            total.add(compensated_sum(z[pos:cut]))
            pos = cut
            values.append(total.value / cps[ci])
            ci += 1
        total.add(compensated_sum(z[pos:]))
        lo = hi
    meta = {"system": spec.record(), "start": [x.group_index, *x.coords], "phase": P.record()}
    return AverageSeries(cps, values, meta)


Sequenceish = np.ndarray | Callable[[np.ndarray], np.ndarray]


def _take(b: Sequenceish, idx: np.ndarray) -> np.ndarray:
    if callable(b):
        return np.asarray(b(idx), dtype=np.complex128)
    b = np.asarray(b)
    if idx.size and idx.max() >= b.shape[0]:
        raise ValueError(f"sequence has {b.shape[0]} terms, index {int(idx.max())} requested")
    return b[idx].astype(np.complex128)


def two_scale_average(b: Sequenceish, alpha: float, M: int, N: int) -> float:
    """``(1/N) sum_{n=1}^N | (1/M) sum_{m=1}^M e(m alpha) b(Mn + m) |``.

    ``b`` is index-addressed from 0: an array or a vectorised callable.
    """
    if M < 1 or N < 1:
        raise ValueError("M and N must be positive")
    m = np.arange(1, M + 1, dtype=np.uint64)
    tw = cexp_fixed(m * np.uint64(to_fixed(alpha)))
    rows_per_chunk = max(1, (1 << 20) // M)
    acc = []
    for n0 in range(1, N + 1, rows_per_chunk):
        n = np.arange(n0, min(n0 + rows_per_chunk, N + 1), dtype=np.int64)
        idx = (M * n)[:, None] + np.arange(1, M + 1, dtype=np.int64)[None, :]
        vals = _take(b, idx.ravel()).reshape(idx.shape)
        acc.append(np.abs(vals @ tw) / M)
    return compensated_sum(np.concatenate(acc)) / N


def orbit_sequence(spec: System, f: Observable, x: SystemState, P: PolynomialPhase, length: int) -> np.ndarray:
    """``b(j) = e(P(j)) f(T^j x)`` for ``j = 0 .. length - 1`` (index 0 is ``x`` itself)."""
    return twisted_terms(spec, f, x, P, length, start=0)


@dataclass
class VdcReport:
    N: int
    H: int
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {"N": self.N, "H": self.H, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack}


def shifted_correlations(a: np.ndarray, H: int) -> np.ndarray:
    """``C_h = sum_{n=1}^{N-h} a(n+h) conj(a(n))`` for ``h = 1..H``."""
    N = a.size
    if N * H <= 4_000_000:
        return np.array([np.vdot(a[:N - h], a[h:]) for h in range(1, H + 1)], dtype=np.complex128)
    L = 1 << (2 * N - 1).bit_length()
    A = np.fft.fft(a, L)
    r = np.fft.ifft(A * np.conj(A))
    return r[1:H + 1]


def vdc_bound(a, N: int, H: int) -> VdcReport:
    """Both sides of the van der Corput inequality for ``a(1..N)`` and shift range ``H``.

    ``|(1/N) sum a|^2 <= (N+H)/(N(H+1)) (1/N) sum |a|^2
    + 2 (N+H)/(N (H+1)^2) sum_{h=1}^H (H+1-h) Re((1/N) sum_{n<=N-h} a(n+h) conj a(n))``
    """
    if not 1 <= H <= N:
        raise ValueError(f"need 1 <= H <= N, got H={H}, N={N}")
    a = np.asarray(a, dtype=np.complex128)[:N]
    if a.size < N:
        raise ValueError(f"sequence has {a.size} terms, need {N}")
    mean = compensated_sum(a) / N
    lhs = abs(mean) ** 2
    energy = compensated_sum(np.abs(a) ** 2) / N
    C = shifted_correlations(a, H)
    w = (H + 1 - np.arange(1, H + 1)).astype(np.float64)
    corr = math.fsum((w * C.real / N).tolist())
    rhs = (N + H) / (N * (H + 1)) * energy + 2.0 * (N + H) / (N * (H + 1) ** 2) * corr
    return VdcReport(N, H, float(lhs), float(rhs))
