import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyww.phases import (DifferenceTable, PolynomialPhase, batched_linear_scan, eval_phase, eval_phase_array,
                           phase_stream, weyl_average)
from polyww.torus import cexp, from_fixed_array

coef = st.floats(0.0, 1.0, exclude_max=True)


def P(*c):
    return PolynomialPhase.from_coeffs(c)


def test_eval_examples():
    assert eval_phase(P(0, 0.25), 3) == 0.75
    assert eval_phase(P(0, 0, 1 / 8), 3) == 0.125
    assert eval_phase(P(0.3, 0.7, 0.2), 0) == 0.3


def test_stream_examples():
    assert phase_stream(P(0, 0.25), 4).tolist() == [0.25, 0.5, 0.75, 0.0]
    assert phase_stream(P(0, 0, 1 / 8), 4).tolist() == [0.125, 0.5, 0.125, 0.0]


@pytest.mark.parametrize("deg", [1, 2, 3, 5, 8])
def test_stream_matches_direct_evaluation(deg):
    rng = np.random.Generator(np.random.PCG64(deg))
    ph = P(*rng.uniform(size=deg + 1))
    s = phase_stream(ph, 10 ** 6)
    n = np.arange(1, 10 ** 6 + 1)
    d = np.abs(s - from_fixed_array(eval_phase_array(ph, n)))
    assert np.minimum(d, 1 - d).max() <= 1e-9
    for m in (1, 2, 777, 65536, 65537, 999_999, 10 ** 6):
        assert abs(s[m - 1] - eval_phase(ph, m)) < 1e-15 or abs(abs(s[m - 1] - eval_phase(ph, m)) - 1) < 1e-15


def test_degree_cap():
    with pytest.raises(ValueError):
        phase_stream(P(*([0.1] * 10)), 5)


def test_difference_table_advance():
    ph = P(0.1, 0.2, 0.3, 0.4)
    t = DifferenceTable.at(ph, 5)
    for n in range(5, 40):
        assert t.current == pytest.approx(eval_phase(ph, n), abs=1e-15)
        t.advance()


def test_weyl_examples():
    assert abs(weyl_average(P(0, 0.25), None, 4)) < 1e-15
    w = np.arange(1, 11) * (1 + 0.5j)
    assert weyl_average(PolynomialPhase.zero(3), w, 10) == pytest.approx(np.mean(w))
    with pytest.raises(ValueError):
        weyl_average(P(0, 0.1), np.ones(3), 4)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 1 - 1e-4), st.integers(1, 5000))
def test_weyl_is_dirichlet_kernel(a, N):
    got = abs(N * weyl_average(P(0, a), None, N))
    b = a if a < 0.5 else a - 1.0  # exact; keeps the oracle well conditioned near 1
    assert got == pytest.approx(abs(math.sin(math.pi * N * b) / math.sin(math.pi * b)), abs=1e-9)


def test_batched_scan_examples():
    v = batched_linear_scan(np.ones(8), 8, 8)
    assert abs(v[0] - 1) < 1e-15
    for j in range(1, 8):
        assert abs(v[j]) <= 1 / (8 * abs(math.sin(math.pi * j / 8))) + 1e-15
    M0 = 16
    n = np.arange(1, 101)
    v = batched_linear_scan(np.exp(-2j * np.pi * n / M0), 100, 64)
    assert abs(v[64 // M0] - 1) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 300), st.integers(1, 130), st.integers(0, 2 ** 31))
def test_batched_scan_matches_direct_sum(N, M, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    b = rng.normal(size=N) + 1j * rng.normal(size=N)
    v = batched_linear_scan(b, N, M)
    n = np.arange(1, N + 1)
    for j in range(0, M, max(1, M // 7)):
        want = np.mean(np.exp(2j * np.pi * n * j / M) * b)
        assert abs(v[j] - want) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 2 ** 30 - 1), min_size=2, max_size=4),
       st.lists(st.integers(-5, 5), min_size=4, max_size=4), st.integers(1, 2000))
def test_integer_shifts_do_not_matter(num, z, N):
    # dyadic coefficients, so that c + z is exact in floating point
    c = [v / 2 ** 30 for v in num]
    shifted = PolynomialPhase.from_coeffs([a + b for a, b in zip(c, z)])
    assert abs(weyl_average(P(*c), None, N) - weyl_average(shifted, None, N)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(coef, min_size=2, max_size=4), coef, st.integers(1, 2000))
def test_constant_term_only_rotates(c, c0, N):
    a = weyl_average(P(*c), None, N)
    b = weyl_average(P(c0, *c[1:]), None, N)
    assert abs(abs(a) - abs(b)) < 1e-12
    assert abs(b - a * cexp(c0 - c[0])) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(coef, min_size=2, max_size=4), st.integers(1, 2000), st.integers(0, 2 ** 31))
def test_conjugate_symmetry(c, N, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    w = rng.normal(size=N) + 1j * rng.normal(size=N)
    ph = P(*c)
    assert abs(weyl_average(-ph, np.conj(w), N) - np.conj(weyl_average(ph, w, N))) < 1e-12


@pytest.mark.parametrize("deg", [1, 2, 3, 4])
def test_kth_difference_is_constant(deg):
    rng = np.random.Generator(np.random.PCG64(10 + deg))
    c = rng.uniform(size=deg + 1)
    s = phase_stream(P(*c), 70_000).astype(np.float64)
    d = s.copy()
    for _ in range(deg):
        d = np.diff(d)
    d = np.mod(d, 1.0)
    want = (math.factorial(deg) * c[deg]) % 1.0
    dist = np.abs(d - want)
    assert np.minimum(dist, 1 - dist).max() <= 1e-9


def test_phase_record_and_arithmetic():
    a = P(0.25, 0.5, 0.125)
    assert a.degree == 2 and a.coeffs == (0.25, 0.5, 0.125)
    assert (a + -a).coeffs == (0.0, 0.0, 0.0)
    assert PolynomialPhase.zero(2).coeffs == (0.0, 0.0, 0.0)
    assert a.record() == [0.25, 0.5, 0.125]
