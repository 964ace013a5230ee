import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

import oracles
from ultraheat.filtration import Filtration, taibleson_filtration, FiltrationError
from ultraheat.sadic import (INFINITY, SAdicPoint, WindowLimitedOrder, WindowOverflow,
                             CosetCapExceeded, char_phase, coset_count, coset_digits,
                             coset_index, distance, enumerate_cosets, norm, order, pairing, point,
                             sample_uniform_ball, sample_uniform_sphere, sphere_level, zero)

F23 = Filtration.sadic([2, 3])


def coord(p):
    return st.builds(lambda a, e: Fraction(a, p ** e), st.integers(-500, 500), st.integers(0, 5))


points23 = st.builds(lambda a, b: SAdicPoint(F23, (a, b)), coord(2), coord(3))


@settings(max_examples=80, deadline=None)
@given(points23)
def test_norm_matches_membership_oracle(x):
    lvl = oracles.norm_level([2, 3], x.coords)
    if lvl is None:
        assert norm(x) == 0 and sphere_level(x) is None and order(x) == INFINITY
    else:
        assert sphere_level(x) == lvl
        assert norm(x) == oracles.radius([2, 3], lvl)
        assert order(x) == -lvl


@settings(max_examples=80, deadline=None)
@given(points23, points23)
def test_strong_triangle_inequality(x, y):
    assert norm(x + y) <= max(norm(x), norm(y))
    if norm(x) != norm(y):
        assert norm(x + y) == max(norm(x), norm(y))
    assert distance(x, y) == distance(y, x)


@settings(max_examples=80, deadline=None)
@given(points23, points23)
def test_character_is_additive(x, y):
    assert char_phase(x + y) == char_phase(x) + char_phase(y)
    assert char_phase(x).phase == oracles.char_phase(x.coords)


def test_character_trivial_on_integers_only():
    assert char_phase(point(F23, [7, 11])).phase == 0
    assert char_phase(point(F23, [Fraction(1, 2), 0])).phase == Fraction(1, 2)
    assert char_phase(point(F23, [Fraction(1, 4), Fraction(2, 3)])).phase == Fraction(11, 12)


@pytest.mark.parametrize("n", [-2, -1, 0, 1, 2, 3])
def test_balls_are_mutual_annihilators(n):
    # xi in B_{-n} pairs trivially with B_n; outside B_{-n} some element of B_n pairs nontrivially
    f = F23
    big = enumerate_cosets(f, n + 2, n - 3)
    dual = enumerate_cosets(f, -n + 3, -n - 2)
    xs = [x.with_resolution(None) for x in big if sphere_level(x) is None or sphere_level(x) <= n]
    for xi in dual:
        xi = xi.with_resolution(None)
        inside = sphere_level(xi) is None or sphere_level(xi) <= -n
        trivial = all(pairing(xi, x).phase == 0 for x in xs)
        assert inside == trivial


def test_zero_orders():
    assert order(zero(F23)) == INFINITY
    o = order(zero(F23, -4))
    assert isinstance(o, WindowLimitedOrder) and o == 4
    # reduction modulo the window makes a small point vanish
    x = point(F23, [Fraction(16), Fraction(0)], resolution=-4)
    assert x.is_zero()


def test_resolution_reduces_coordinates():
    x = point(F23, [Fraction(37, 2), Fraction(10)], resolution=0)
    assert x.coords == (Fraction(1, 2), Fraction(0))
    with pytest.raises(WindowOverflow):
        x.with_resolution(-1)
    with pytest.raises(WindowOverflow):
        char_phase(point(F23, [1, 1], resolution=1))


def test_bad_coordinates():
    with pytest.raises(ValueError):
        point(F23, [Fraction(1, 3), 0])
    with pytest.raises(ValueError):
        point(F23, [1])
    with pytest.raises(FiltrationError):
        point(F23, [1, 1]) + point(Filtration.sadic([2, 5]), [1, 1])
    with pytest.raises(FiltrationError):
        SAdicPoint(taibleson_filtration(2, 2), (Fraction(1),))


@settings(max_examples=60, deadline=None)
@given(points23)
def test_json_round_trip(x):
    data = x.to_json()
    assert [c["p"] for c in data] == [2, 3]
    assert all(c["den_exp"] >= 0 for c in data)
    assert SAdicPoint.from_json(F23, data) == x


@settings(max_examples=60, deadline=None)
@given(points23, points23, st.integers(0, 2 ** 32))
def test_product_resolution_is_sound(x, y, seed):
    # any representatives of the two windows give the same product modulo its window
    rng = np.random.default_rng(seed)
    rx, ry = -2, -1
    prod = x.with_resolution(rx) * y.with_resolution(ry)
    bx = sample_uniform_ball(F23, rx, rng, rx - 8).with_resolution(None)
    by = sample_uniform_ball(F23, ry, rng, ry - 8).with_resolution(None)
    moved = (x + bx) * (y + by)
    assert moved.with_resolution(prod.resolution) == prod


@pytest.mark.parametrize("k,l", [(2, 0), (3, -1), (1, -2), (0, 0), (4, 2)])
def test_coset_enumeration(k, l):
    f = F23
    reps = enumerate_cosets(f, k, l)
    assert len(reps) == coset_count(f, k, l) == f.radius(k) / f.radius(l)
    assert all(x.resolution == l for x in reps)
    assert [coset_index(x, k, l) for x in reps] == list(range(len(reps)))
    assert all(oracles.in_ball([2, 3], x.coords, k) for x in reps)
    seen = {tuple(x.coords) for x in reps}
    assert len(seen) == len(reps)


def test_coset_order_is_c_order_over_primes():
    d = coset_digits(F23, 2, 0)
    # B_2 / B_0 = Z/2 x Z/3 with the digit of 3 varying fastest
    assert d.tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]
    reps = enumerate_cosets(F23, 2, 0)
    assert reps[1].coords == (Fraction(0), Fraction(1, 3))
    assert reps[3].coords == (Fraction(1, 2), Fraction(0))


def test_coset_index_outside_and_cap():
    assert coset_index(point(F23, [Fraction(1, 8), 0]), 2, 0) is None
    with pytest.raises(CosetCapExceeded):
        coset_digits(F23, 12, -12, cap=1000)


@pytest.mark.parametrize("n", [-3, 0, 1, 4])
def test_sphere_sampling_stays_on_sphere(n):
    rng = np.random.default_rng(n + 10)
    for _ in range(200):
        x = sample_uniform_sphere(F23, n, rng, n - 6)
        assert sphere_level(x) == n


def test_ball_sampling_is_uniform_over_cosets():
    rng = np.random.default_rng(5)
    k, l = 3, -1
    counts = np.zeros(coset_count(F23, k, l))
    for _ in range(6000):
        x = sample_uniform_ball(F23, k, rng, -4)
        counts[coset_index(x.with_resolution(l), k, l)] += 1
    assert stats.chisquare(counts).pvalue > 1e-3


def test_sphere_sampling_matches_sphere_cosets():
    rng = np.random.default_rng(9)
    n = 3
    reps = enumerate_cosets(F23, n, n - 2)
    on_sphere = [i for i, x in enumerate(reps) if sphere_level(x) == n]
    counts = np.zeros(len(reps))
    for _ in range(4000):
        counts[coset_index(sample_uniform_sphere(F23, n, rng, n - 4).with_resolution(n - 2), n, n - 2)] += 1
    assert set(np.flatnonzero(counts)) == set(on_sphere)
    assert stats.chisquare(counts[on_sphere]).pvalue > 1e-3


def test_large_radius_sampling():
    f = Filtration.sadic([2, 3], level_cap=200)
    x = sample_uniform_sphere(f, 150, np.random.default_rng(0), -150)
    assert sphere_level(x) == 150
    assert math.log2(float(norm(x))) > 100
