"""The uniformity functional ``sup_P |(1/N) sum e(P(n)) b(n)|`` over degree-k phases.

Only ``(c_1, ..., c_k)`` are searched: ``c_0`` rotates the average without
changing its modulus.  For every fixed ``(c_2, ..., c_k)`` the map
``c_1 -> A`` is a trigonometric polynomial, so a whole ``c_1`` row is one FFT.

Two modes:

* heuristic: coarse grid, differencing seeds, multistart profile refinement;
* certified: best-first branch and bound over ``(c_2, ..., c_k)`` boxes with an
  explicit Lipschitz upper bound, returning ``value`` with
  ``sup <= value + certificate_eps``.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .phases import PolynomialPhase, batched_linear_scan_rows, next_pow2, weyl_average
from .systems import System, SystemState, observable_along_orbit
from .averages import twisted_terms
from .torus import FIX_MASK, FIX_ONE, Observable, cexp_fixed, compensated_sum, frac, to_fixed

logger = logging.getLogger(__name__)

_ROW_CHUNK = 32
_BNB_BATCH = 32


@dataclass
class SearchConfig:
    coarse_grid: int = 256
    refinement_rounds: int = 2
    multistart: int = 8
    use_linear_transform_scan: bool = True
    certify: bool = False
    target_eps: float = 0.01
    linear_oversample: int = 2
    differencing_seeds: bool = True
    budget: float = 2e9
    threads: int = 1

    def __post_init__(self):
        if self.coarse_grid < 2:
            raise ValueError("coarse_grid must be >= 2")
        if not 0.0 < self.target_eps < 1.0:
            raise ValueError("target_eps must lie in (0, 1)")
        if self.multistart < 1 or self.refinement_rounds < 0 or self.linear_oversample < 1:
            raise ValueError("multistart >= 1, refinement_rounds >= 0 and linear_oversample >= 1 required")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SupEstimate:
    value: float
    argmax: PolynomialPhase
    mode: str
    certificate_eps: float | None
    evaluations: int
    search_log: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"value": self.value, "argmax": self.argmax.record(), "mode": self.mode,
                "certificate_eps": self.certificate_eps, "evaluations": self.evaluations,
                "search_log": self.search_log}


class CertificationBudgetError(RuntimeError):
    """Certified search would exceed the evaluation budget."""

    def __init__(self, required: float, budget: float, uniform_grid: float):
        self.required = required
        self.budget = budget
        self.uniform_grid = uniform_grid
        super().__init__(f"certified search needs more than {budget:.3g} evaluations "
                         f"(used {required:.3g}; a uniform certified grid would need {uniform_grid:.3g} points)")


def certified_grid_size(N: int, k: int, eps: float) -> float:
    """Point count of the uniform grid with step ``eps / (2 pi k N^j)`` on every axis ``j``."""
    return math.prod(math.ceil(2.0 * math.pi * k * float(N) ** j / eps) for j in range(1, k + 1))


class _Problem:
    """Weights ``b(1..N)`` plus cached powers ``n^j mod 2**64``."""

    def __init__(self, b: np.ndarray, k: int, cfg: SearchConfig):
        self.b = np.asarray(b, dtype=np.complex128)
        self.N = self.b.size
        self.k = k
        self.cfg = cfg
        n = np.arange(1, self.N + 1, dtype=np.uint64)
        self.n = n
        self.npow = [np.ones_like(n)]
        for _ in range(k):
            self.npow.append(self.npow[-1] * n)
        self.M1 = max(cfg.coarse_grid, next_pow2(cfg.linear_oversample * self.N))
        self.evaluations = 0
        self.pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    # -- weights with (c_2..c_k) folded in
    def row_weights(self, high: tuple[int, ...]) -> np.ndarray:
        ph = np.zeros(self.N, dtype=np.uint64)
        for j, c in enumerate(high, start=2):
            if c:
                ph += self.npow[j] * np.uint64(c)
        return self.b * cexp_fixed(ph) if ph.any() else self.b.copy()

    def batch_weights(self, highs: list[tuple[int, ...]]) -> np.ndarray:
        H = np.array(highs, dtype=np.uint64).reshape(len(highs), self.k - 1)
        ph = np.zeros((len(highs), self.N), dtype=np.uint64)
        for idx in range(self.k - 1):
            ph += H[:, idx, None] * self.npow[idx + 2][None, :]
        return self.b[None, :] * cexp_fixed(ph)

    def rows_abs(self, highs: list[tuple[int, ...]], M: int | None = None) -> np.ndarray:
        """``|A(j/M, high)|`` for every high-coefficient row and every bin ``j``."""
        M = self.M1 if M is None else M
        chunks = [highs[i:i + _ROW_CHUNK] for i in range(0, len(highs), _ROW_CHUNK)]

        def work(ch):
            w = self.batch_weights(ch)
            if self.cfg.use_linear_transform_scan:
                return np.abs(batched_linear_scan_rows(w, M))
            return np.abs(self._direct_rows(w, M))

        parts = list(self.pool.map(work, chunks)) if self.pool else [work(c) for c in chunks]
        self.evaluations += len(highs) * M
        return np.concatenate(parts) if parts else np.zeros((0, M))

    def _direct_rows(self, w: np.ndarray, M: int) -> np.ndarray:
        out = np.empty((w.shape[0], M), dtype=np.complex128)
        for j0 in range(0, M, 256):
            js = np.arange(j0, min(j0 + 256, M), dtype=np.uint64)
            c = np.array([((int(j) << 64) // M) & FIX_MASK for j in js], dtype=np.uint64)
            E = cexp_fixed(c[:, None] * self.n[None, :])
            out[:, j0:j0 + js.size] = (w @ E.T) / self.N
        return out

    def linear_value(self, w: np.ndarray, c1: float) -> float:
        self.evaluations += 1
        return abs(compensated_sum(w * cexp_fixed(self.n * np.uint64(to_fixed(frac(c1)))))) / self.N

    def refine_c1(self, w: np.ndarray, row: np.ndarray) -> tuple[float, float]:
        """Brent refinement of the best bin of one FFT row; returns (value, c1)."""
        M = row.size
        j = int(np.argmax(row))
        best = (float(row[j]), j / M)
        res = minimize_scalar(lambda c: -self.linear_value(w, c), bounds=((j - 1) / M, (j + 1) / M),
                              method="bounded", options={"xatol": 0.1 / (2 * math.pi * self.N)})
        if -res.fun > best[0]:
            best = (float(-res.fun), frac(res.x))
        return best

    def profile(self, high: tuple[int, ...]) -> tuple[float, float]:
        """``max_{c_1} |A(c_1, high)|`` (FFT row, then Brent on the best bin)."""
        w = self.row_weights(high)
        row = self.rows_abs([high])[0]
        return self.refine_c1(w, row)

    def exact_value(self, fixed: tuple[int, ...]) -> float:
        self.evaluations += 1
        return abs(weyl_average(PolynomialPhase(fixed), self.b, self.N))


def _lex(h: tuple[int, ...]) -> tuple[float, ...]:
    return tuple(u / FIX_ONE for u in h)


def _top_rows(values: np.ndarray, highs: list[tuple[int, ...]], count: int) -> list[tuple[float, tuple[int, ...]]]:
    order = sorted(range(len(highs)), key=lambda i: (-values[i], _lex(highs[i])))
    return [(float(values[i]), highs[i]) for i in order[:count]]


# ---------------------------------------------------------------------------
# heuristic search
# ---------------------------------------------------------------------------

def _tone_peaks(a: np.ndarray, count: int) -> list[float]:
    """Frequencies of the strongest tones in ``a(n) ~ e(omega n)``, Brent-refined."""
    L = next_pow2(4 * a.size)
    spec = np.abs(np.fft.fft(a, L))
    left = np.roll(spec, 1)
    right = np.roll(spec, -1)
    cand = np.flatnonzero((spec >= left) & (spec >= right))
    cand = sorted(cand.tolist(), key=lambda j: (-spec[j], j))[:count]
    n = np.arange(a.size, dtype=np.uint64)
    out = []
    for j in cand:
        def neg(om):
            return -abs(compensated_sum(a * cexp_fixed(n * np.uint64(to_fixed(-frac(om))))))
        res = minimize_scalar(neg, bounds=((j - 1) / L, (j + 1) / L), method="bounded",
                              options={"xatol": 1e-3 / (a.size * a.size)})
        out.append(frac(res.x))
    return out


def _differencing_candidates(prob: _Problem, known: tuple[int, ...], deg: int) -> list[tuple[float, tuple[int, ...]]]:
    """Seeds for ``(c_2..c_deg)`` from repeated differencing of ``conj(b e(known))``.

    ``known`` holds fixed-point coefficients for degrees above ``deg`` (highest
    last).  Differencing ``deg - 1`` times with shift ``h`` leaves a tone of
    frequency ``deg! h^(deg-1) c_deg (mod 1)``.
    """
    high_known = (0,) * (deg - 1) + known
    w = prob.row_weights(high_known)
    shifts, peaks = ((1, 2), 3) if deg == 2 else ((1,), 2)
    results: dict[tuple[int, ...], float] = {}
    for h in shifts:
        if (deg - 1) * h >= prob.N - 1:
            continue
        a = np.conj(w)
        for _ in range(deg - 1):
            a = a[h:] * np.conj(a[:-h])
        scale = math.factorial(deg) * h ** (deg - 1)
        for om in _tone_peaks(a, peaks):
            for i in range(scale):
                c = to_fixed(frac((om + i) / scale))
                tail = (c,) + known
                if deg == 2:
                    if tail in results:
                        continue
                    results[tail] = prob.profile(tail)[0]
                else:
                    for v, full in _differencing_candidates(prob, tail, deg - 1):
                        if v > results.get(full, -1.0):
                            results[full] = v
    ranked = sorted(results.items(), key=lambda kv: (-kv[1], _lex(kv[0])))
    return [(v, h) for h, v in ranked[:prob.cfg.multistart]]


def _refine(prob: _Problem, high: tuple[int, ...], widths: list[float]) -> tuple[float, tuple[int, ...], float]:
    """Coordinate-wise Brent on the profile, shrinking the window each round."""
    cfg = prob.cfg
    h = list(high)
    val, c1 = prob.profile(tuple(h))
    widths = list(widths)
    for _ in range(cfg.refinement_rounds):
        for idx in range(len(h) - 1, -1, -1):
            j = idx + 2
            centre = h[idx] / FIX_ONE
            tol = cfg.target_eps / (2.0 * math.pi * float(prob.N) ** j)

            def neg(c, idx=idx):
                trial = list(h)
                trial[idx] = to_fixed(frac(c))
                return -prob.profile(tuple(trial))[0]

            res = minimize_scalar(neg, bounds=(centre - widths[idx], centre + widths[idx]),
                                  method="bounded", options={"xatol": tol})
            if -res.fun > val:
                h[idx] = to_fixed(frac(res.x))
                val, c1 = prob.profile(tuple(h))
            widths[idx] /= 4.0
    return val, tuple(h), c1


def _heuristic(prob: _Problem, log: list[dict]) -> tuple[tuple[int, ...], float]:
    cfg = prob.cfg
    k = prob.k
    if k == 1:
        val, c1 = prob.profile(())
        log.append({"stage": "linear_scan", "bins": prob.M1, "value": val})
        return (), c1

    G = cfg.coarse_grid
    axis = [(i * FIX_ONE) // G for i in range(G)]
    highs = [tuple(reversed(t)) for t in itertools.product(axis, repeat=k - 1)]
    coarse_M = max(G, next_pow2(cfg.linear_oversample * prob.N))
    maxima = np.empty(len(highs))
    for i in range(0, len(highs), 1024):
        maxima[i:i + 1024] = prob.rows_abs(highs[i:i + 1024], coarse_M).max(axis=1)
    seeds = _top_rows(maxima, highs, cfg.multistart)
    log.append({"stage": "coarse_grid", "grid": G, "rows": len(highs), "bins": coarse_M,
                "best": seeds[0][0]})
    coarse_w = [1.0 / G] * (k - 1)

    zero = (0,) * (k - 1)
    starts = [(h, coarse_w) for _, h in seeds]
    if zero not in [h for h, _ in starts]:
        starts.append((zero, coarse_w))
    if cfg.differencing_seeds and prob.N >= 8:
        diff = _differencing_candidates(prob, (), k)
        log.append({"stage": "differencing_seeds", "count": len(diff),
                    "best": diff[0][0] if diff else None})
        fine_w = [2.0 / float(prob.N) ** j for j in range(2, k + 1)]
        starts += [(h, fine_w) for _, h in diff if h not in [s for s, _ in starts]]

    best = None
    for h, wdt in starts:
        v, hh, c1 = _refine(prob, h, wdt)
        key = (-v, _lex(hh))
        if best is None or key < best[0]:
            best = (key, hh, c1)
    log.append({"stage": "refinement", "starts": len(starts), "rounds": cfg.refinement_rounds,
                "best": -best[0][0]})
    return best[1], best[2]


# ---------------------------------------------------------------------------
# certified search
# ---------------------------------------------------------------------------

def _certified(prob: _Problem, log: list[dict]) -> tuple[tuple[int, ...], float]:
    cfg = prob.cfg
    k, N = prob.k, prob.N
    eps = cfg.target_eps
    nf = np.arange(1, N + 1, dtype=np.float64)
    ab = np.abs(prob.b)
    M1 = next_pow2(2.0 * math.pi * float(np.mean(ab * nf)) / eps)
    M1 = max(M1, cfg.coarse_grid)
    r1 = 1.0 / (2 * M1)
    npw = [nf ** j for j in range(k + 1)]
    uniform = certified_grid_size(N, k, eps)

    high_pw = np.stack(npw[2:]) if k > 1 else np.zeros((0, N))

    def slacks(radii: np.ndarray) -> np.ndarray:
        rho = r1 * nf[None, :] + radii @ high_pw
        return np.mean(ab * 2.0 * np.sin(np.pi * np.minimum(rho, 0.5)), axis=1) + 1e-12

    def evaluate(boxes):
        highs = [tuple(to_fixed(frac(c)) for c in centre) for centre, _ in boxes]
        rows = prob.rows_abs(highs, M1)
        return highs, rows

    lb = -1.0
    best = None
    heap: list = []
    counter = 0

    def push(boxes):
        nonlocal lb, best, counter
        highs, rows = evaluate(boxes)
        js = np.argmax(rows, axis=1)
        ms = rows[np.arange(len(boxes)), js]
        ubs = ms + slacks(np.array([r for _, r in boxes], dtype=np.float64).reshape(len(boxes), k - 1))
        for (centre, r), h, m, j, ub in zip(boxes, highs, ms.tolist(), js.tolist(), ubs.tolist()):
            key = (-m, _lex(h))
            if best is None or key < best[0]:
                best = (key, h, j / M1)
            lb = max(lb, m)
            if ub > lb + eps:
                heapq.heappush(heap, (-ub, centre, r))
            counter += 1

    push([(tuple(0.5 for _ in range(k - 1)), tuple(0.5 for _ in range(k - 1)))])
    while heap:
        if prob.evaluations > cfg.budget:
            raise CertificationBudgetError(prob.evaluations, cfg.budget, uniform)
        kids = []
        while heap and len(kids) < 2 * _BNB_BATCH:
            neg_ub, centre, r = heapq.heappop(heap)
            if -neg_ub <= lb + eps:
                continue
            weights = [r[i] * float(np.mean(ab * npw[i + 2])) for i in range(k - 1)]
            ax = int(np.argmax(weights))
            half = r[ax] / 2.0
            for sgn in (-1.0, 1.0):
                c = list(centre)
                c[ax] += sgn * half
                rr = list(r)
                rr[ax] = half
                kids.append((tuple(c), tuple(rr)))
        if kids:
            push(kids)
    log.append({"stage": "branch_and_bound", "bins": M1, "boxes": counter, "lower_bound": lb,
                "uniform_grid_equivalent": uniform})
    if k == 1:
        return (), best[2]
    return best[1], best[2]


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def sup_average_weights(b, k: int, cfg: SearchConfig | None = None) -> SupEstimate:
    """``sup_{P of degree <= k} |(1/N) sum_{n=1}^N e(P(n)) b(n)|`` for weights ``b(1..N)``."""
    cfg = cfg or SearchConfig()
    if k < 1:
        raise ValueError("k must be >= 1; for k = 0 use the plain average")
    b = np.asarray(b, dtype=np.complex128)
    if b.size < 1:
        raise ValueError("need at least one weight")
    prob = _Problem(b, k, cfg)
    log: list[dict] = []
    try:
        if cfg.certify:
            high, c1 = _certified(prob, log)
        else:
            high, c1 = _heuristic(prob, log)
        base = (0, to_fixed(frac(c1)), *high)
        value = prob.exact_value(base)
        # polish the certified grid point along c_1
        if cfg.certify:
            w = prob.row_weights(high)
            row = prob.rows_abs([high])[0]
            v2, c12 = prob.refine_c1(w, row)
            alt = (0, to_fixed(frac(c12)), *high)
            v2 = prob.exact_value(alt)
            if v2 > value:
                base, value = alt, v2
    finally:
        prob.close()
    return SupEstimate(float(value), PolynomialPhase(base), "certified" if cfg.certify else "heuristic",
                       cfg.target_eps if cfg.certify else None, prob.evaluations, log)


def sup_average(spec: System, f: Observable, x: SystemState, k: int, N: int,
                cfg: SearchConfig | None = None) -> SupEstimate:
    """Uniformity functional of the orbit weights ``f(T^n x)``, ``n = 1..N``."""
    if N < 1:
        raise ValueError("N must be positive")
    if k < 1:
        raise ValueError("k must be >= 1; for k = 0 use twisted_average")
    b = observable_along_orbit(spec, f, x, N)
    est = sup_average_weights(b, k, cfg)
    est.search_log.insert(0, {"stage": "orbit", "system": spec.record(), "N": N})
    return est


def witness_phase_counterexample(alpha: float, x: SystemState) -> PolynomialPhase:
    """Quadratic phase with ``e(P(2n)) f(T^{2n} x) = 1`` for ``f = e(t_2)``, ``x = (1, t_1, t_2)``.

    Coefficients ``(-t_2, -t_1/2 + alpha/4, -alpha/8)`` mod 1; on odd indices
    ``e(P(2n+1)) f(T^{2n+1} x) = e(t_1/2 + alpha/8) e(n alpha/2)``.
    """
    if x.group_index != 1:
        raise ValueError("the witness phase is defined on the fibre {1} x T^2")
    if x.dim != 2:
        raise ValueError("the counterexample lives on Z_2 x T^2")
    A = to_fixed(alpha)
    T1, T2 = x.fixed
    return PolynomialPhase((-T2, -(T1 >> 1) + (A >> 2), -(A >> 3)))


# ---------------------------------------------------------------------------
# block decomposition
# ---------------------------------------------------------------------------

@dataclass
class BlockReport:
    M: int
    N: int
    full: complex
    reconstruction: complex
    difference: float
    bound: float
    A: complex | None = None
    B: complex | None = None

    @property
    def ok(self) -> bool:
        return self.difference <= self.bound + 1e-10

    def to_dict(self) -> dict:
        d = {"M": self.M, "N": self.N, "full": [self.full.real, self.full.imag],
             "reconstruction": [self.reconstruction.real, self.reconstruction.imag],
             "difference": self.difference, "bound": self.bound, "ok": self.ok}
        for name in ("A", "B"):
            v = getattr(self, name)
            d[name] = None if v is None else [v.real, v.imag]
        return d


def block_decomposition_check(spec: System, f: Observable, x: SystemState, alpha: float, M: int, N: int,
                              k: int, lower: PolynomialPhase | None = None,
                              beta: float | None = None) -> BlockReport:
    """Compare the average of ``e(n^k beta + P(n)) f(T^n x)`` with its length-``M`` block form.

    ``P = lower`` has degree ``< k`` (zero when omitted) and ``beta`` defaults to
    ``alpha``.  The block form averages the terms with indices
    ``M n + m``, ``1 <= n <= [N/M]``, ``1 <= m <= M``; it differs from the
    full average by at most ``2M/N`` when ``|f| <= 1``.  The block form splits
    as ``A + B`` where ``B`` swaps ``m^k beta`` for ``m^k alpha`` inside each block.
    """
    if not 1 <= M <= N:
        raise ValueError(f"need 1 <= M <= N, got M={M}, N={N}")
    if k < 1:
        raise ValueError("k must be >= 1")
    beta = alpha if beta is None else beta
    lower = lower or PolynomialPhase.zero(k - 1)
    if lower.degree >= k:
        raise ValueError("the lower-order phase must have degree < k")
    fx = list(lower.fixed) + [0] * (k + 1 - len(lower.fixed))
    fx[k] = (fx[k] + to_fixed(beta)) & FIX_MASK
    P = PolynomialPhase(tuple(fx))
    L = N // M
    last = max(N, M * (L + 1))
    terms = twisted_terms(spec, f, x, P, last)  # indices 1..last
    full = compensated_sum(terms[:N]) / N
    block = terms[M:M * (L + 1)].reshape(L, M)
    recon = compensated_sum(block) / (L * M)
    m = np.arange(1, M + 1, dtype=np.uint64)
    d = np.uint64((to_fixed(alpha) - to_fixed(beta)) & FIX_MASK)
    twist = cexp_fixed(m ** np.uint64(k) * d)
    Bv = compensated_sum(block * twist[None, :]) / (L * M)
    Av = compensated_sum(block * (1.0 - twist)[None, :]) / (L * M)
    return BlockReport(M, N, full, recon, abs(full - recon), 2.0 * M / N * f.sup_bound, Av, Bv)
