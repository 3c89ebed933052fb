import math

import numpy as np
import pytest

from polyww.spectral import (E2_counterexample_family, catalog_E1_counterexample, catalog_E2_counterexample,
                             catalog_rotation, catalog_skew_character, orthogonality_report, skew_family,
                             verify_eigen_relation, verify_quasi_level)
from polyww.systems import Counterexample, Power, Rotation, UnipotentSkew
from polyww.torus import GridDomain, Observable, inner_product

SQ = math.sqrt(2) - 1
CE = Counterexample(SQ)
E_T2 = Observable.character((0, 1))


def test_rotation_characters_are_eigenfunctions():
    spec = Rotation((SQ, 0.2))
    for m in [(1, 0), (2, -3), (0, 5)]:
        chk = verify_eigen_relation(spec, Observable.character(m))
        assert chk.accepted and chk.residual < 1e-12
        assert abs(chk.c - catalog_rotation(spec.alpha, m).eigenvalue) < 1e-12


@pytest.mark.parametrize("m", [-3, -1, 0, 1, 2, 7])
@pytest.mark.parametrize("sign", [1, -1])
def test_E1_catalog(m, sign):
    h = catalog_E1_counterexample(SQ, m, sign)
    chk = verify_eigen_relation(CE, h)
    assert chk.residual < 1e-12 and chk.accepted
    assert abs(chk.c - sign * np.exp(1j * np.pi * m * SQ)) < 1e-12
    assert abs(chk.c - h.eigenvalue) < 1e-12


def test_E1_small_cases():
    gi = np.array([0, 1])
    c = np.zeros((2, 2), dtype=np.uint64)
    assert np.allclose(catalog_E1_counterexample(SQ, 0, 1).form.evaluate_fixed(gi, c, 2), [1, 1])
    assert np.allclose(catalog_E1_counterexample(SQ, 0, -1).form.evaluate_fixed(gi, c, 2), [1, -1])
    assert catalog_E1_counterexample(SQ, 0, -1).eigenvalue == -1
    assert catalog_E1_counterexample(SQ, 0, 1).level == 0


def test_e_t2_is_not_an_eigenfunction():
    chk = verify_eigen_relation(CE, E_T2, samples=1000)
    assert not chk.accepted and chk.residual >= 0.5


def test_level_ladder_examples():
    r = verify_quasi_level(Power(CE, 2), E_T2, 2)
    assert r.exact and r.level == 2 and r.residuals[2] < 1e-9
    r = verify_quasi_level(UnipotentSkew(3, SQ), Observable.character((0, 0, 1)), 3)
    assert r.exact and r.residuals[3] < 1e-12 and all(v > 0.1 for v in r.residuals[:3])
    r = verify_quasi_level(CE, Observable.constant(2), 0)
    assert r.level == 0 and r.exact
    r = verify_quasi_level(CE, E_T2, 2, depth=5)
    assert r.level is None and not r.member


def test_level_rejects_non_unimodular():
    with pytest.raises(ValueError):
        verify_quasi_level(CE, Observable.constant(2, 0.5), 1)
    with pytest.raises(ValueError):
        verify_quasi_level(CE, E_T2, -1)


def test_E2_catalog_levels_match_the_ladder():
    for m in range(-3, 4):
        for p in range(-3, 4):
            for r in range(4):
                h = catalog_E2_counterexample(SQ, m, p, r)
                rep = verify_quasi_level(CE, h, h.level, samples=200, seed=m * 100 + p * 10 + r + 500)
                assert rep.exact, (m, p, r, rep.level)


def test_E2_catalog_examples():
    dom = GridDomain(2, 2, (64,))
    h = catalog_E2_counterexample(SQ, 0)
    rep = verify_quasi_level(CE, h, 0)
    assert rep.level == 0
    two_t1 = Observable.character((2, 0))
    assert abs(inner_product(E_T2, two_t1, GridDomain(2, 2, (128,)))) < 1e-12
    for p in (0, 1):
        assert abs(inner_product(E_T2, catalog_E2_counterexample(SQ, 1, p).form, dom)) < 1e-12
    with pytest.raises(ValueError):
        catalog_E2_counterexample(SQ, 1, 0, 4)


def test_definition_recursion_on_catalogs():
    members = [catalog_E2_counterexample(SQ, m, p, r) for m in (1, -2) for p in (0, 3) for r in (0, 1)]
    members += [catalog_E1_counterexample(SQ, 2, -1)]
    for h in members:
        def derivative(gi, coords, h=h):
            g2, c2 = CE.step_fixed(gi, coords)
            return h.form.evaluate_fixed(g2, c2, 2) * np.conj(h.form.evaluate_fixed(gi, coords, 2))

        rep = verify_quasi_level(CE, derivative, h.level - 1)
        assert rep.exact and rep.residuals[h.level - 1] < 1e-9


def test_products_stay_in_the_class():
    a = catalog_E2_counterexample(SQ, 1, 2, 1)
    b = catalog_E2_counterexample(SQ, -2, 0, 3)
    e = catalog_E1_counterexample(SQ, 3, -1)
    for x, y in [(a, b), (a, e), (e, e)]:
        rep = verify_quasi_level(CE, x.form * y.form, max(x.level, y.level))
        assert rep.member


def test_skew_classes_are_stable_under_powers():
    spec = UnipotentSkew(3, SQ)
    fam = skew_family(3, 2, 2)
    for j in (2, 3):
        for h in fam:
            assert verify_quasi_level(Power(spec, j), h.form, h.level, samples=200).member


def test_skew_character_levels():
    assert catalog_skew_character((0, 0, 0)).level == 0
    assert catalog_skew_character((3, 0, 0)).level == 1
    assert catalog_skew_character((1, -1, 0)).level == 2
    assert len(skew_family(3, 2, 8)) == 17 * 17


def test_orthogonality_examples():
    dom = GridDomain(2, 2, (64,))
    fam = E2_counterexample_family(SQ, 8)
    assert len(fam) == 17 * 17 * 4
    rep = orthogonality_report(E_T2, fam, dom)
    assert rep.orthogonal and rep.max_abs < 1e-10 and rep.count == len(fam)
    rep = orthogonality_report(E_T2, [E_T2], dom)
    assert rep.max_abs == pytest.approx(1.0)
    rep = orthogonality_report(Observable.character((0, 0, 1)), skew_family(3, 2, 8), GridDomain(1, 3, (32,)))
    assert rep.max_abs < 1e-10
    with pytest.raises(ValueError):
        orthogonality_report(E_T2, [], dom)


def test_catalog_members_are_unimodular():
    rng = np.random.Generator(np.random.PCG64(1))
    gi = rng.integers(0, 2, 500)
    c = rng.integers(0, 2 ** 64, size=(500, 2), dtype=np.uint64)
    for h in E2_counterexample_family(SQ, 2) + [catalog_E1_counterexample(SQ, m, s) for m in range(-2, 3)
                                                 for s in (1, -1)]:
        assert np.allclose(np.abs(h.form.evaluate_fixed(gi, c, 2)), 1.0, atol=1e-12)
        assert h.to_dict()["level"] == h.level
