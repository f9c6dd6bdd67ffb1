import warnings
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kmsfractal.errors import ConfigurationError, UnboundedSeriesError
from kmsfractal.functions import Constant, Polynomial
from kmsfractal.measures import (DiscreteMeasure, Lebesgue, Mixture, OrbitMeasure, barycenter, chaos_game,
                                 default_orbit_depth, hutchinson_iterate, parse_lambda, point_mass_measure,
                                 pushforward, w1_distance, w1_to_uniform)
from kmsfractal.presets import B1

HALF = (F(1, 2),)
ident = Polynomial({(1,): 1})


def test_pushforward_oracles(tent):
    g1, g2 = tent.ifs.maps
    assert pushforward(point_mass_measure((F(0),)), g1).exact_atoms == (((F(0),), 1),)
    assert pushforward(point_mass_measure((F(1),)), g2).exact_atoms == (((F(1, 2),), 1),)
    m = DiscreteMeasure.from_exact([((F(0),), F(1, 2)), ((F(1),), F(1, 2))])
    assert pushforward(m, g1).as_dict() == {(F(0),): F(1, 2), (F(1, 2),): F(1, 2)}


def test_barycenters(tent, gasket):
    assert barycenter(tent.ifs) == HALF
    b = barycenter(gasket.ifs)
    assert float(b[0]) == pytest.approx(0.5) and float(b[1]) == pytest.approx(3 ** 0.5 / 6)


@pytest.mark.parametrize("name", ["tent", "doubling"])
def test_hutchinson_converges_to_lebesgue(request, name):
    ifs = request.getfixturevalue(name).ifs
    mu = hutchinson_iterate(ifs, init=point_mass_measure((0.0,)), steps=14)
    assert w1_to_uniform(mu) <= 2.0 ** -14 + mu.resolution
    one_step = DiscreteMeasure(np.concatenate([g.apply_array(mu.points) for g in ifs.maps]),
                               np.tile(mu.weights, 2) / 2)
    assert float(w1_distance(mu, one_step)) <= 2 * mu.resolution + 2.0 ** -14
    assert hutchinson_iterate(ifs, steps=14).max_atom() <= 2.0 ** -14


def test_hutchinson_certificate_decays(gasket):
    mu = hutchinson_iterate(gasket.ifs, steps=8)
    c = mu.certificate
    assert len(c) == 8
    for a, b in zip(c[:-1], c[1:]):
        assert b <= gasket.ifs.c2_max * a * 1.05 + 1e-12


def test_hutchinson_integral(tent):
    mu = hutchinson_iterate(tent.ifs, steps=14)
    assert float(mu.integrate(ident).value) == pytest.approx(0.5, abs=1e-3)


def test_chaos_game(tent):
    m = chaos_game(tent.ifs, 10 ** 6, 1000, seed=42)
    assert w1_distance(m, Lebesgue()).value <= 5e-3
    one = chaos_game(tent.ifs, 1001, 1000, seed=1)
    assert len(one) == 1 and one.total == pytest.approx(1.0)
    a, b = chaos_game(tent.ifs, 5000, 100, seed=7), chaos_game(tent.ifs, 5000, 100, seed=7)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)
    with pytest.raises(ConfigurationError):
        chaos_game(tent.ifs, 10, 10)


@pytest.mark.parametrize("name,tol", [("tent", 5e-3), ("doubling", 5e-3), ("gasket", 5e-3)])
def test_chaos_and_hutchinson_agree(request, name, tol):
    ifs = request.getfixturevalue(name).ifs
    h = hutchinson_iterate(ifs, steps=10)
    c = chaos_game(ifs, 200000, 1000, seed=3)
    assert float(w1_distance(h, c)) <= tol


def test_w1_oracles():
    d0, d1 = point_mass_measure((0.0,)), point_mass_measure((1.0,))
    assert float(w1_distance(d0, d0)) == 0
    assert float(w1_distance(d0, d1)) == pytest.approx(1.0)
    quarter = DiscreteMeasure(np.array([[0.0], [0.25], [0.5], [0.75]]), np.full(4, 0.25))
    assert float(w1_distance(quarter, Lebesgue())) == pytest.approx(1 / 8)


def test_orbit_measure_depth0(tent):
    m = OrbitMeasure(tent.ifs, HALF, 3, 0)
    assert m.atoms().exact_atoms == ((HALF, F(1, 3)),)
    assert m.defect == F(2, 3)


def test_orbit_point_masses(tent):
    m = OrbitMeasure(tent.ifs, HALF, 4, 20)
    assert m.point_mass(HALF) == F(1, 2)
    assert m.point_mass((F(3, 8),)) == F(1, 32)
    assert m.point_mass((F(0),)) == 0 and m.point_mass((F(1),)) == 0


@given(st.integers(0, 12), st.sampled_from([3, 4, F(5, 2), 10]))
def test_orbit_mass_plus_defect(tent, depth, lam):
    m = OrbitMeasure(tent.ifs, HALF, lam, depth)
    assert m.total == 1 - (F(2) / F(lam)) ** (depth + 1)
    assert m.atoms().total + m.defect == 1


def test_orbit_measure_rejects_small_lambda(tent):
    with pytest.raises(UnboundedSeriesError):
        OrbitMeasure(tent.ifs, HALF, 2, 5)


def test_orbit_measure_warns_off_branch(tent, tent_report):
    with pytest.warns(UserWarning):
        OrbitMeasure(tent.ifs, (F(1, 3),), 4, 3, tent_report)


def test_series_matches_atoms(tent):
    m = OrbitMeasure(tent.ifs, HALF, 4, 10)
    a = Polynomial({(2,): 1, (0,): F(1, 3)})
    assert m.integrate(a).value == m.atoms().integrate(a).value


def test_gasket_orbit_exact(gasket, gasket_report):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        m = OrbitMeasure(gasket.ifs, B1, 5, 5, gasket_report)
    assert m.point_mass(B1) == F(2, 5)
    assert m.atoms().total == 1 - F(3, 5) ** 6


def test_mixture_exact(tent):
    a, b = OrbitMeasure(tent.ifs, HALF, 4, 6), OrbitMeasure(tent.ifs, HALF, 5, 6)
    mix = Mixture([F(1, 3), F(2, 3)], [a, b])
    assert mix.point_mass(HALF) == F(1, 3) * F(1, 2) + F(2, 3) * F(3, 5)
    assert mix.exact
    with pytest.raises(Exception):
        Mixture([F(1, 2), F(1, 3)], [a, b])


def test_parse_lambda_and_depth():
    assert parse_lambda(4.0) == F(4) and parse_lambda(2.5) == F(5, 2)
    assert isinstance(parse_lambda(np.e), float)
    assert default_orbit_depth(2, 4) == 29
    assert default_orbit_depth(2, 4, node_cap=2 ** 14) == 13
