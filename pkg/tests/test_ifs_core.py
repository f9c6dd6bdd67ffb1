import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kmsfractal.errors import BudgetError, ConfigurationError, NotAProperContractionError
from kmsfractal.ifs_core import (ContractionMap, IfsSystem, apply_word, attractor_approx, check_open_set_condition,
                                 check_self_similar, contraction_ratios, hausdorff, load_ifs, open_interval,
                                 word_at)
from kmsfractal.presets import C2, C3


def test_apply_word_oracles(tent, gasket):
    assert apply_word(tent.ifs, (1,), (F(1),)) == (F(1, 2),)
    assert apply_word(tent.ifs, (), (F(3, 7),)) == (F(3, 7),)
    assert apply_word(gasket.ifs, (2,), C3) == C2


def test_apply_word_last_letter_first(tent):
    # g1(g2(1/2)) = (3/4)/2
    assert apply_word(tent.ifs, (1, 2), (F(1, 2),)) == (F(3, 8),)


def test_attractor_tent_dyadic(tent):
    cloud = attractor_approx(tent.ifs, 10, seed=(F(0),))
    assert len(cloud) == 1024
    k = cloud.points[:, 0] * 1024
    assert np.allclose(k, np.round(k), atol=1e-9)
    assert cloud.resolution <= 2.0 ** -10 + 1e-15


def test_attractor_doubling_set(doubling):
    cloud = attractor_approx(doubling.ifs, 3, seed=(F(0),))
    assert sorted(np.round(cloud.points[:, 0] * 8).astype(int)) == list(range(8))


def test_attractor_gasket_depth1(gasket):
    cloud = attractor_approx(gasket.ifs, 1)
    assert len(cloud) == 3


def test_attractor_budget(tent):
    with pytest.raises(BudgetError):
        attractor_approx(tent.ifs, 30)
    with pytest.raises(ConfigurationError):
        attractor_approx(tent.ifs, 0)


def test_word_ordering(tent):
    cloud = attractor_approx(tent.ifs, 3, seed=(F(1, 3),))
    for i in range(8):
        w = cloud.word(i)
        assert np.isclose(cloud.points[i, 0], float(apply_word(tent.ifs, w, (F(1, 3),))[0]))
    assert word_at(0, 3, 2) == (1, 1, 1) and word_at(7, 3, 2) == (2, 2, 2)


def test_self_similar(tent):
    cloud = attractor_approx(tent.ifs, 12)
    v = check_self_similar(tent.ifs, cloud, 1e-3)
    assert v.passed and v.defect <= 2.0 ** -12 + 1e-3


def test_self_similar_fails_when_image_escapes():
    maps = [ContractionMap([[0.5]], [0.0]), ContractionMap([[0.5]], [0.9])]
    ifs = IfsSystem(maps, (0.0,), (2.0,))
    cloud = np.linspace(0, 1, 200).reshape(-1, 1)
    assert not check_self_similar(ifs, cloud, 1e-3).passed


def test_single_point_cloud_fails(tent):
    assert not check_self_similar(tent.ifs, np.array([[0.0]]), 1e-6).passed


def test_open_set_condition(tent, gasket):
    assert check_open_set_condition(tent.ifs, open_interval(0, 1), 10 ** 5).passed
    assert check_open_set_condition(gasket.ifs, gasket.open_set, 20000).passed


def test_open_set_overlap_witness():
    maps = [ContractionMap([[F(1, 2)]], [F(0)]), ContractionMap([[F(1, 2)]], [F(1, 4)])]
    ifs = IfsSystem(maps, (F(0),), (F(1),))
    v = check_open_set_condition(ifs, open_interval(0, 1), 5000)
    assert not v.passed and v.overlap_witness is not None
    x = v.overlap_witness[2][0]
    assert 0.25 < x < 0.5


def test_contraction_ratios(gasket):
    assert tuple(contraction_ratios(ContractionMap([[F(1, 2)]], [F(0)]))) == pytest.approx((0.5, 0.5))
    assert tuple(gasket.ifs.maps[1].ratios) == pytest.approx((0.5, 0.5))
    r = contraction_ratios(ContractionMap([[0.99]], [0.0]))
    assert r.passed and r.near_unit
    with pytest.raises(NotAProperContractionError):
        ContractionMap([[1.0]], [0.0])


def test_load_ifs_roundtrip(gasket):
    doc = gasket.ifs.to_json()
    ifs = load_ifs({"dimension": 1, "maps": [{"matrix": [["1/2"]], "translation": ["0"]},
                                             {"matrix": [["-1/2"]], "translation": ["1"]}],
                    "box": {"lo": ["0"], "hi": ["1"]}, "rational": True})
    assert ifs.exact and ifs.maps[1]((F(0),)) == (F(1),)
    assert doc["dimension"] == 2
    with pytest.raises(ConfigurationError):
        load_ifs({"dimension": 1})


words = st.lists(st.integers(1, 3), max_size=6)
coords = st.floats(0, 1)


@given(words, coords, coords, coords, coords)
def test_word_lipschitz_bounds(gasket, w, a, b, c, d):
    ifs = gasket.ifs
    p, q = (a, b * 0.8), (c, d * 0.8)
    dist = math.dist(p, q)
    img = math.dist(apply_word(ifs, w, p), apply_word(ifs, w, q))
    n = len(w)
    assert img <= ifs.c2_max ** n * dist + 1e-12
    assert img >= ifs.c1_min ** n * dist - 1e-12


@pytest.mark.parametrize("n", [3, 5, 7])
def test_attractor_depth_convergence(gasket, n):
    ifs = gasket.ifs
    a, b = attractor_approx(ifs, n), attractor_approx(ifs, n + 1)
    assert hausdorff(a.points, b.points) <= ifs.c2_max ** n * ifs.diam + 1e-12
