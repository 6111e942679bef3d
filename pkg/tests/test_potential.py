import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles as O
from skorokhod import errors as E
from skorokhod.measure import from_atoms, mass_geq
from skorokhod.potential import (
    barrier_b,
    barrier_table,
    build_potential,
    eval_c,
    left_derivative,
    max_law_bound,
    normalize_h,
    tangent_frame,
    theta_zero,
    touch_point_u,
)

TWO = [(-1, 0.5), (1, 0.5)]
NEG = [(-2, 0.5), (0, 0.5)]
POS = [(0, 0.5), (2, 0.5)]

atoms_st = st.lists(
    st.tuples(st.integers(-24, 24).map(lambda k: k / 4), st.floats(0.05, 1.0)),
    min_size=1,
    max_size=7,
)


def pf_of(atoms):
    return build_potential(from_atoms(atoms))


# construction ---------------------------------------------------------------


def test_build_potential_two_point():
    pf = pf_of(TWO)
    assert list(pf.cs) == [1.0, 1.0]
    assert eval_c(pf, 0.0) == 1.0
    assert [k[2] for k in pf.kinks] == [-1.0, 0.0]
    assert [k[3] for k in pf.kinks] == [0.0, 1.0]


def test_build_potential_negative_mean():
    pf = pf_of(NEG)
    assert pf.m == -1.0
    assert eval_c(pf, -2.0) == 2.0 and eval_c(pf, 0.0) == 2.0


def test_point_mass_at_zero():
    pf = pf_of([(0, 1)])
    assert len(pf.kinks) == 1
    assert np.array_equal(eval_c(pf, np.array([-3.0, 0.0, 2.5])), [3.0, 0.0, 2.5])


def test_eval_c_examples():
    assert eval_c(pf_of(TWO), 0.5) == 1.0
    assert eval_c(pf_of(NEG), 3.0) == 5.0
    pf = pf_of([(-3, 0.2), (0.5, 0.5), (2, 0.3)])
    x = pf.mu.support_hi + 1e3
    assert eval_c(pf, x) - x == abs(pf.m) - pf.m


def test_eval_c_matches_direct_sum():
    atoms = [(-3, 0.1), (-1, 0.25), (0, 0.3), (1.5, 0.2), (4, 0.15)]
    xs = np.linspace(-6, 7, 131)
    assert np.allclose(eval_c(pf_of(atoms), xs), O.c_direct(atoms, xs), atol=1e-12)


@pytest.mark.parametrize("x, d", [(0.0, 0.0), (-1.0, -1.0), (2.0, 1.0), (-5.0, -1.0)])
def test_left_derivative(x, d):
    assert left_derivative(pf_of(TWO), x) == d


@pytest.mark.parametrize(
    "atoms, theta, u",
    [(TWO, -0.5, -1.0), (TWO, 0.0, -1.0), (NEG, 0.5, 0.0), (TWO, -1.0, -math.inf)],
)
def test_touch_point(atoms, theta, u):
    assert touch_point_u(pf_of(atoms), theta) == u


def test_touch_point_rejects_bad_slope():
    with pytest.raises(ValueError):
        touch_point_u(pf_of(TWO), 1.5)


def test_tangent_frame_examples():
    fr = tangent_frame(pf_of(TWO), 0.0)
    assert (fr.u, fr.z_plus, fr.z_minus) == (-1.0, 1.0, 1.0)
    fr = tangent_frame(pf_of(NEG), 0.0)
    assert (fr.u, fr.z_plus, fr.z_minus) == (-2.0, 2.0, 2.0)
    fr = tangent_frame(pf_of(POS), -0.5)
    assert fr.u == 0.0
    assert math.isclose(fr.z_plus, 4 / 3) and math.isclose(fr.z_minus, 4.0)


def test_tangent_frame_diagonal_slopes():
    # negative mean: the slope-1 line lies strictly above the diagonal
    assert tangent_frame(pf_of(NEG), 1.0).z_plus == math.inf
    # positive mean: the right tail is the diagonal, crossing taken at the top atom
    assert tangent_frame(pf_of(POS), 1.0).z_plus == 2.0
    assert tangent_frame(pf_of(POS), -1.0).z_minus == math.inf
    assert tangent_frame(pf_of(NEG), -1.0).z_minus == 2.0


# barrier and bound ------------------------------------------------------------


def test_barrier_two_point():
    pf = pf_of(TWO)
    assert [barrier_b(pf, x) for x in (0.25, 1.0, 1.5)] == [-1.0, -1.0, 1.0]
    assert barrier_table(pf) == [(0.0, -1.0), (1.0, 1.0)]


def test_barrier_negative_mean():
    pf = pf_of(NEG)
    assert [barrier_b(pf, x) for x in (0.5, 2.0, 2.5)] == [-2.0, -2.0, 0.0]
    assert barrier_table(pf) == [(0.0, -2.0), (2.0, 0.0)]


def test_barrier_positive_mean():
    pf = pf_of(POS)
    assert barrier_b(pf, 0.5) == -math.inf
    assert barrier_table(pf) == [(0.0, -math.inf), (1.0, 0.0), (2.0, 2.0)]


def test_barrier_point_targets():
    assert barrier_table(pf_of([(-1.5, 1)])) == [(0.0, -1.5)]
    assert barrier_table(pf_of([(0, 1)])) == [(0.0, 0.0)]


@pytest.mark.parametrize(
    "atoms, x, expected",
    [(TWO, 1.0, 0.5), (NEG, 1.0, 2 / 3), (NEG, 4.0, 0.25), (NEG, 0.5, 0.8), (NEG, 3.0, 1 / 3)],
)
def test_max_law_bound_examples(atoms, x, expected):
    assert math.isclose(max_law_bound(pf_of(atoms), x), expected, rel_tol=1e-12)


def test_max_law_bound_positive_mean_below_mean():
    assert max_law_bound(pf_of(POS), 0.5) == 1.0
    assert max_law_bound(pf_of(POS), 2.5) == 0.0


def test_max_law_bound_rejects_non_positive_level():
    with pytest.raises(ValueError):
        max_law_bound(pf_of(TWO), 0.0)


# h normalisation and theta0 --------------------------------------------------


def test_normalize_abs_is_identity():
    ht = normalize_h(abs, 5.0, 1001)
    xs = np.linspace(-5, 5, 77)
    assert np.allclose(ht(xs), np.abs(xs), atol=1e-12)


def test_normalize_quadratic():
    ht = normalize_h(lambda x: x * x - 1, 3.0, 3001)
    assert ht(0.0) == 0.0
    # |y^2 - 1| peaks at 1 on [0, 1]; beyond sqrt(2) the square wins
    assert ht(0.5) == 0.0
    assert math.isclose(ht(2.0), 2.0) and math.isclose(ht(-2.0), 2.0)


def test_normalize_constant():
    ht = normalize_h(lambda x: 3.0 + 0 * x, 2.0, 101)
    assert np.all(ht(np.linspace(-2, 2, 9)) == 0.0)


def test_theta_zero_worked_example():
    fr = theta_zero(pf_of(POS), normalize_h(abs, 10.0, 2001, [2.0, -2.0]))
    assert (fr.theta, fr.u, fr.z_plus, fr.z_minus) == (0.0, 0.0, 2.0, 2.0)


def test_theta_zero_symmetric():
    mu = [(-2, 0.25), (-1, 0.25), (1, 0.25), (2, 0.25)]
    fr = theta_zero(pf_of(mu), normalize_h(abs, 10.0, 2001))
    assert abs(fr.theta) <= 1e-9
    assert math.isclose(fr.z_plus, fr.z_minus)


def test_theta_zero_null_function():
    fr = theta_zero(pf_of(POS), normalize_h(lambda x: 0 * x, 10.0, 101))
    assert fr.theta == -1.0


def test_theta_zero_no_crossing():
    # a normalised h always crosses at slope 1 (z_minus = 0 there), so only
    # a callable violating the normalisation can leave the set empty
    with pytest.raises(E.NoCrossing):
        theta_zero(pf_of(POS), lambda x: -np.asarray(x, float))


# properties -----------------------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(atoms_st)
def test_slopes_non_decreasing(atoms):
    pf = pf_of(atoms)
    s = np.column_stack([pf.slope_left, pf.slope_right]).ravel()
    assert np.all(np.diff(s) >= 0)


@settings(max_examples=150, deadline=None)
@given(atoms_st, st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_midpoint_convexity(atoms, pair):
    pf = pf_of(atoms)
    a, b = pair
    assert eval_c(pf, 0.5 * (a + b)) <= 0.5 * (eval_c(pf, a) + eval_c(pf, b)) + 1e-12


@settings(max_examples=150, deadline=None)
@given(atoms_st, st.floats(0.0, 1e4))
def test_tail_identity(atoms, d):
    pf = pf_of(atoms)
    m = pf.m
    hi = pf.mu.support_hi + d + 1e-3
    lo = pf.mu.support_lo - d - 1e-3
    assert math.isclose(eval_c(pf, hi) - hi, abs(m) - m, abs_tol=1e-9)
    assert math.isclose(eval_c(pf, lo) + lo, abs(m) + m, abs_tol=1e-9)


@settings(max_examples=150, deadline=None)
@given(atoms_st, st.floats(-10, 10))
def test_jensen_lower_bound(atoms, x):
    pf = pf_of(atoms)
    assert eval_c(pf, x) >= abs(x - pf.m) + abs(pf.m) - 1e-12


@settings(max_examples=60, deadline=None)
@given(atoms_st, st.lists(st.floats(-1, 1), min_size=1, max_size=20))
def test_support_line(atoms, thetas):
    pf = pf_of(atoms)
    for th in thetas:
        fr = tangent_frame(pf, th)
        assert np.all(fr.line(pf.xs) <= pf.cs + 1e-10)
        if -1 < th < 1:
            assert math.isclose(fr.line(fr.z_plus), fr.z_plus, abs_tol=1e-9)
            assert math.isclose(fr.line(-fr.z_minus), fr.z_minus, abs_tol=1e-9)


@settings(max_examples=150, deadline=None)
@given(atoms_st, st.floats(-12, 12))
def test_law_identity(atoms, y):
    pf = pf_of(atoms)
    assert math.isclose(0.5 * (1 - left_derivative(pf, y)), mass_geq(pf.mu, y), abs_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(atoms_st, st.floats(0.01, 12))
def test_barrier_bound_consistency(atoms, x):
    pf = pf_of(atoms)
    b = barrier_b(pf, x)
    assert b < x
    if math.isfinite(b):
        formula = 0.5 * (1 + (eval_c(pf, b) - x) / (x - b))
        assert math.isclose(max_law_bound(pf, x), min(1.0, max(0.0, formula)), abs_tol=1e-9)
    else:
        assert pf.m > 0 and x < pf.m + 1e-12
        assert max_law_bound(pf, x) == 1.0


@settings(max_examples=40, deadline=None)
@given(atoms_st, st.floats(0.05, 8))
def test_bound_and_barrier_match_brute_force(atoms, x):
    pf = pf_of(atoms)
    assert math.isclose(max_law_bound(pf, x), O.bound_bruteforce(atoms, x), abs_tol=1e-6)
    b = barrier_b(pf, x)
    assume(x not in pf.xs)
    assert b == O.barrier_bruteforce(atoms, x) or (
        math.isfinite(b) and b >= pf.mu.support_hi
    )


@settings(max_examples=80, deadline=None)
@given(atoms_st)
def test_barrier_table_monotone(atoms):
    table = barrier_table(pf_of(atoms))
    t = [a for a, _ in table]
    b = [c for _, c in table]
    assert t == sorted(t) and b == sorted(b)
    assert all(bb < tt or (tt == bb) for tt, bb in table[1:] + table[:1] if math.isfinite(bb))
