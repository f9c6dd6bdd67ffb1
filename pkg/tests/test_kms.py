import math
from fractions import Fraction as F

import numpy as np
import pytest

from kmsfractal.basis import build_patched_basis
from kmsfractal.errors import DomainError
from kmsfractal.functions import Constant, Polynomial
from kmsfractal.kms import (Member, TestFunctionFamily, check_basis_conditions, check_condition3,
                            check_condition4, check_orbit_identity, classify, decompose, min_beta, parse_beta,
                            point_mass_law, random_weights, standard_family)
from kmsfractal.measures import DiscreteMeasure, Mixture, OrbitMeasure, hutchinson_iterate
from kmsfractal.presets import B1, B2, B3

HALF = (F(1, 2),)


def family(*fns, vanish=True, positive=False):
    return TestFunctionFamily(tuple(Member(f, vanish, positive, f.name, float(f.sup or 1.0)) for f in fns), "test")


def test_standard_family_size(tent, tent_report, gasket, gasket_report):
    for p, r in ((tent, tent_report), (gasket, gasket_report)):
        fam = standard_family(p.ifs, r, seed=0)
        assert len(fam) >= 60
        assert fam.vanishing() and fam.positive()
    a = standard_family(tent.ifs, tent_report, seed=3)
    b = standard_family(tent.ifs, tent_report, seed=3)
    assert [m.tag for m in a.members] == [m.tag for m in b.members]


def test_condition3_hutchinson(tent, tent_report):
    mu = hutchinson_iterate(tent.ifs, steps=14)
    fam = standard_family(tent.ifs, tent_report)
    assert check_condition3(mu, 2, fam, tent.ifs, restrict=False, tol=1e-6).passed
    bad = check_condition3(mu, 3, fam, tent.ifs, restrict=False, tol=1e-6)
    assert not bad.passed and bad.value >= 1 * 1.0 - 1e-9


def test_condition3_orbit_measure(tent):
    depth = 30
    mu = OrbitMeasure(tent.ifs, HALF, 4, depth)
    a = Polynomial({(1,): 1, (2,): -1}) * Polynomial({(2,): 1, (1,): -1, (0,): F(1, 4)})
    a.sup = 1.0
    rep = check_condition3(mu, 4, family(a), tent.ifs)
    assert rep.value <= 10 * (2 / 4) ** (depth + 1)
    b = Polynomial({(3,): 4, (2,): -4, (1,): 1})
    wrong = check_condition3(mu, 3, family(b), tent.ifs)
    assert wrong.value >= 0.05 and not wrong.passed


def test_condition4(tent, tent_report):
    one = family(Constant(1), vanish=False, positive=True)
    mu = OrbitMeasure(tent.ifs, HALF, 4, 30)
    rep = check_condition4(mu, 4, one, tent.ifs, tent_report)
    assert rep.passed and rep.value == pytest.approx(4 - 2 * float(mu.total))
    h = hutchinson_iterate(tent.ifs, steps=14)
    rep = check_condition4(h, 2, one, tent.ifs, tent_report, tol=1e-6)
    assert rep.passed and abs(rep.value) <= 1e-6
    big = OrbitMeasure(tent.ifs, HALF, 100, 4)
    pos = family(Constant(1), Polynomial({(0,): 1, (2,): 1}), vanish=False, positive=True)
    assert check_condition4(big, 100, pos, tent.ifs, tent_report).value >= 98 * float(big.total) - 1e-9


def test_orbit_identity(tent, tent_report):
    mu = OrbitMeasure(tent.ifs, HALF, 4, 30)
    y = Polynomial({(1,): 1}, sup=1.0)
    rep = check_orbit_identity(mu, family(y, Constant(1)), tent_report)
    assert rep.passed and rep.value <= 4 * 0.5 ** 31
    from kmsfractal.functions import hat
    off = hat(F(1, 3), F(1, 1000))  # misses every k/64, so the depth-5 orbit
    shallow = OrbitMeasure(tent.ifs, HALF, 4, 5)
    assert shallow.integrate(off).value == 0
    assert check_orbit_identity(shallow, family(off), tent_report).value == 0


def test_basis_conditions(doubling, doubling_report, tent, tent_report):
    basis = build_patched_basis(doubling.ifs, doubling_report)
    leb = hutchinson_iterate(doubling.ifs, steps=12)
    y = Polynomial({(1,): 1}, sup=1.0)
    rep = check_basis_conditions(leb, 2, basis, family(y), 2)
    assert rep.equality.value <= 1e-9
    tb = build_patched_basis(tent.ifs, tent_report)
    mu = OrbitMeasure(tent.ifs, HALF, 4, 12)
    fam = standard_family(tent.ifs, tent_report)
    rep = check_basis_conditions(mu, 4, tb, fam, 120)
    assert rep.monotone and max(rep.unit_partial_sums) <= 4 + 1e-7
    c3 = check_condition3(mu, 4, fam, tent.ifs)
    assert rep.equality.value <= c3.value + 2 * 4 * float(mu.defect) + 1e-6


def test_point_mass_law(tent, tent_report, gasket, gasket_report):
    mu = OrbitMeasure(tent.ifs, HALF, 4, 12)
    checked, bad = point_mass_law(mu, tent_report)
    assert checked > 1000 and bad == []
    g = OrbitMeasure(gasket.ifs, B2, 5, 5)
    assert point_mass_law(g, gasket_report)[1] == []


def test_parse_beta():
    b, lam = parse_beta("ln4")
    assert lam == 4 and b == pytest.approx(math.log(4))
    assert parse_beta("log(3)")[1] == 3
    assert parse_beta(math.log(5))[1] == 5
    with pytest.raises(DomainError):
        parse_beta(-1)


def test_classify_tent(tent, tent_report):
    assert classify(tent.ifs, tent_report, 0.5).regime == "empty"
    h = classify(tent.ifs, tent_report, "ln2")
    assert h.regime == "hutchinson" and h.passed
    c = classify(tent.ifs, tent_report, "ln4")
    assert c.regime == "simplex" and len(c.vertices) == 1 and c.passed
    v = c.vertices[0].candidate
    assert v.y == HALF and v.measure.point_mass((F(0),)) == 0 and v.measure.point_mass((F(1),)) == 0


def test_classify_doubling(doubling, doubling_report):
    assert classify(doubling.ifs, doubling_report, "ln2").regime == "hutchinson"
    c = classify(doubling.ifs, doubling_report, "ln3")
    assert c.regime == "empty" and c.vertices == []


def test_classify_non_preset_unverified():
    from kmsfractal.branching import branch_values
    from kmsfractal.ifs_core import ContractionMap, IfsSystem
    ifs = IfsSystem([ContractionMap([[F(1, 3)]], [F(0)]), ContractionMap([[F(-1, 3)]], [F(1)])], (F(0),), (F(1),))
    rep = branch_values(ifs)
    assert classify(ifs, rep, "ln3").status == "UNVERIFIED"


def test_decompose_tent(tent, tent_report):
    mu = OrbitMeasure(tent.ifs, HALF, 4, 13)
    dec = decompose(mu, 4, tent_report, tent.ifs)
    assert dec.weights == (F(1),) and dec.passed
    assert dec.residual <= 2 * float(mu.defect)


def test_decompose_gasket_pair(gasket, gasket_report):
    parts = [OrbitMeasure(gasket.ifs, b, 5, 6, gasket_report) for b in (B1, B2)]
    mix = Mixture([F(1, 2), F(1, 2)], parts)
    dec = decompose(mix, 5, gasket_report, gasket.ifs, check_preconditions=False)
    assert dec.weight_at(B1) == F(1, 2) and dec.weight_at(B2) == F(1, 2) and dec.weight_at(B3) == 0
    assert dec.passed


def test_decompose_rejects_hutchinson(gasket, gasket_report):
    h = hutchinson_iterate(gasket.ifs, steps=7)
    dec = decompose(h, 4, gasket_report, gasket.ifs)
    assert not dec.passed and "condition (3)" in dec.reason


def test_mixtures_of_vertices_pass(gasket, gasket_report):
    fam = standard_family(gasket.ifs, gasket_report)
    parts = [OrbitMeasure(gasket.ifs, b, 5, 6, gasket_report) for b in (B1, B2, B3)]
    for seed in range(3):
        mix = Mixture(random_weights(3, seed), parts)
        assert check_condition3(mix, 5, fam, gasket.ifs).passed
        assert check_condition4(mix, 5, fam, gasket.ifs, gasket_report).passed


def test_random_weights():
    w = random_weights(3, 11)
    assert sum(w) == 1 and all(x > 0 for x in w) and w == random_weights(3, 11)


def test_min_beta(tent, doubling, gasket):
    assert min_beta(tent.ifs).value == pytest.approx(math.log(2))
    assert min_beta(doubling.ifs).value == pytest.approx(math.log(2))
    assert min_beta(gasket.ifs).value == pytest.approx(math.log(3))
