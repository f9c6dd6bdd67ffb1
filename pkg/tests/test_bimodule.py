from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kmsfractal.bimodule import (BimoduleElement, inner_product, left_act, norm2, read_element_csv, right_act,
                                 tilde, write_element_csv)
from kmsfractal.errors import BranchCompatibilityError
from kmsfractal.functions import Constant, Lambda, Polynomial, hat

grid = np.linspace(0, 1, 101).reshape(-1, 1)
ident = Polynomial({(1,): 1}, name="y")


def test_inner_product_constant(tent, tent_report):
    one = BimoduleElement.constant(1, tent.ifs, tent_report)
    assert np.allclose(inner_product(one, one)(grid), 2)


def test_incompatible_element_rejected(tent, tent_report):
    with pytest.raises(BranchCompatibilityError):
        BimoduleElement([Constant(1), Constant(0)], tent.ifs, tent_report)


def test_inner_product_identity(tent, tent_report):
    f = BimoduleElement([ident, ident], tent.ifs, tent_report)
    ip = inner_product(f, f)
    assert np.allclose(ip(grid), 2 * grid[:, 0] ** 2)
    assert ip.at((F(1, 3),)) == F(2, 9)


def test_actions(tent, tent_report):
    one = BimoduleElement.constant(1, tent.ifs, tent_report)
    assert np.allclose(left_act(Constant(1), one).values(grid), one.values(grid))
    la = left_act(ident, one).values(grid)
    assert np.allclose(la[0], grid[:, 0] / 2) and np.allclose(la[1], 1 - grid[:, 0] / 2)
    ra = right_act(one, ident).values(grid)
    assert np.allclose(ra, np.vstack([grid[:, 0], grid[:, 0]]))


def test_norm2(tent, tent_report):
    one = BimoduleElement.constant(1, tent.ifs, tent_report)
    assert norm2(one).value == pytest.approx(2 ** 0.5)
    zero = BimoduleElement.constant(0, tent.ifs, tent_report)
    assert norm2(zero).value == 0
    f = BimoduleElement([ident, ident], tent.ifs, tent_report)
    est = norm2(f, np.array([[0.0], [0.5], [1.0]]))
    assert est.value == pytest.approx(2 ** 0.5) and est.argmax == (1.0,)


def test_tilde_oracles(tent, tent_report, doubling, doubling_report):
    a = hat(F(1, 2), F(1, 2))
    at = tilde(a, tent_report, tent.ifs)
    assert at.at((F(1),)) == a.at((F(1, 2),))
    one = tilde(Constant(1), tent_report, tent.ifs)
    assert one.at((F(1),)) == 1 and one.at((F(1, 3),)) == 2
    assert np.allclose(one(np.array([[0.2], [1.0]])), [2, 1])
    d = tilde(Constant(1), doubling_report, doubling.ifs)
    assert np.allclose(d(grid), 2)


def test_tilde_jump_equals_branch_correction(tent, tent_report):
    # one-sided limits at c = 1 exceed a~(1) by (e - 1) a(1/2)
    a = hat(F(1, 2), F(1, 2))
    at = tilde(a, tent_report, tent.ifs)
    left = at(np.array([[1 - 1e-7]]))[0]
    assert left - float(at.at((F(1),))) == pytest.approx(float(a.at((F(1, 2),))), abs=1e-6)
    assert at.jump((F(1),)) == 1


def test_tilde_continuous_when_vanishing_on_B(tent, tent_report):
    a = Polynomial({(1,): 1, (0,): F(-1, 2)})
    at = tilde(a, tent_report, tent.ifs)
    for y in (F(0), F(1, 3), F(1)):
        assert at.at((y,)) == sum(a.at(g((y,))) for g in tent.ifs.maps)


def test_element_csv_roundtrip(tmp_path, tent, tent_report):
    f = BimoduleElement([ident, Constant(F(1, 2)) + Scaled_half()], tent.ifs, tent_report, check=False)
    write_element_csv(tmp_path / "f.csv", f)
    g = read_element_csv(tmp_path / "f.csv", tent.ifs)
    assert np.allclose(g.values(grid), f.values(grid))


def Scaled_half():
    return Lambda(lambda p: 0.5 * p[:, 0])


coef = st.floats(-3, 3)


@given(coef, coef, coef)
def test_inner_product_properties(tent, tent_report, p, q, r):
    f = BimoduleElement.from_xy(lambda x, y: p * x[:, 0] + q, tent.ifs, tent_report)
    g = BimoduleElement.from_xy(lambda x, y: np.cos(r * x[:, 0]) * y[:, 0], tent.ifs, tent_report)
    a = Lambda(lambda y: 1 + r * y[:, 0])
    assert np.all(inner_product(f, f)(grid) >= 0)
    assert np.allclose(inner_product(f, right_act(g, a))(grid), inner_product(f, g)(grid) * a(grid))
    lhs = left_act(a, right_act(f, ident)).values(grid)
    rhs = right_act(left_act(a, f), ident).values(grid)
    assert np.allclose(lhs, rhs)
