import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from skorokhod import errors as E
from skorokhod.measure import from_atoms
from skorokhod.rules import Stage, StoppingRule, compile_tmax, compile_tmod, first_exit, hitting
from skorokhod.simulate import (
    RandomStream,
    euler_path,
    exact_walk,
    monte_carlo,
    read_samples_csv,
    write_samples_csv,
)

TWO = from_atoms([(-1, 0.5), (1, 0.5)])
NEG = from_atoms([(-2, 0.5), (0, 0.5)])
POS = from_atoms([(0, 0.5), (2, 0.5)])


def within(p_hat, p, n, k=4.0):
    return abs(p_hat - p) <= k * math.sqrt(max(p * (1 - p), 1e-12) / n)


# exact engine --------------------------------------------------------------


def test_exact_two_point_frequencies():
    s = monte_carlo(compile_tmax(TWO), 100_000, 1)
    assert set(np.unique(s.b_T)) == {-1.0, 1.0}
    assert within(np.mean(s.b_T == 1.0), 0.5, len(s), 3)
    assert abs(s.b_T.mean()) <= 3 / math.sqrt(len(s))


def test_exact_hitting_max_law():
    s = monte_carlo(hitting(-1.0), 100_000, 2)
    assert np.all(s.b_T == -1.0)
    for y in (0.5, 1.0, 3.0, 9.0):
        assert within(np.mean(s.m_T >= y), 1 / (1 + y), len(s))


def test_exact_negative_mean_law():
    s = monte_carlo(compile_tmax(NEG), 100_000, 3)
    assert within(np.mean(s.b_T == -2.0), 0.5, len(s))
    assert within(np.mean(s.m_T >= 1.0), 2 / 3, len(s))


def test_conditional_pre_exit_maximum():
    # from 0 in (-1, 2): P(max >= y | exit at -1) = (x-a)(c-y) / ((y-a)(c-x))
    s = monte_carlo(first_exit(-1.0, 2.0), 200_000, 4)
    low = s.b_T == -1.0
    assert within(low.mean(), 2 / 3, len(s))
    m = s.m_T[low]
    for y in (0.25, 0.5, 1.0, 1.5):
        p = (1.0 * (2 - y)) / ((y + 1) * 2)
        assert within(np.mean(m >= y), p, m.size)
    j = s.j_T[~low]
    for y in (0.25, 0.5, 0.9):
        # mirror law of the pre-exit minimum given the upper exit
        p = (2.0 * (1 - y)) / ((2 + y) * 1.0)
        assert within(np.mean(j <= -y), p, j.size)


def test_exact_tmod_two_point():
    s = monte_carlo(compile_tmod(POS, abs), 100_000, 5)
    assert within(np.mean(s.b_T == 2.0), 0.5, len(s))
    assert np.all(s.m_T <= 2.0)
    for y in (2.5, 4.0):
        sup = np.maximum(s.m_T, -s.j_T)
        assert within(np.mean(sup >= y), O.tmod_two_point_tail(y), len(s))


def test_exact_walk_single_record():
    rec = exact_walk(compile_tmax(NEG), RandomStream(17, 3))
    again = exact_walk(compile_tmax(NEG), RandomStream(17, 3))
    assert rec == again
    assert rec.clock is None and not rec.censored
    assert rec.j_T <= rec.b_T <= rec.m_T


def test_unbounded_segment():
    rule = StoppingRule("Broken", (Stage("interval"),))
    with pytest.raises(E.UnboundedSegment):
        exact_walk(rule, RandomStream(0, 0))
    with pytest.raises(E.UnboundedSegment):
        monte_carlo(rule, 10, 0)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(-12, 12).map(lambda k: k / 4), st.floats(0.05, 1.0)),
        min_size=1,
        max_size=5,
    ),
    st.integers(0, 2**63),
)
def test_record_invariants(atoms, seed):
    s = monte_carlo(compile_tmax(from_atoms(atoms)), 300, seed)
    assert np.all(s.j_T <= s.b_T) and np.all(s.b_T <= s.m_T)
    assert np.all(s.m_T >= 0) and np.all(s.j_T <= 0)
    assert set(np.unique(s.b_T)) <= set(from_atoms(atoms).values)


# Euler engine --------------------------------------------------------------


def test_euler_hitting_zero_stops_at_once():
    rec = euler_path(hitting(0.0), 1e-4, 10.0, RandomStream(1, 0))
    assert (rec.b_T, rec.m_T, rec.j_T, rec.clock) == (0.0, 0.0, 0.0, 0.0)


def test_euler_rejects_bad_step():
    with pytest.raises(E.InvalidStep):
        euler_path(hitting(1.0), 0.0, 10.0, RandomStream(1, 0))
    with pytest.raises(E.InvalidStep):
        monte_carlo(hitting(1.0), 5, 0, engine="euler", dt=-1e-3)
    with pytest.raises(E.InvalidStep):
        monte_carlo(hitting(1.0), 5, 0, engine="euler")


def test_euler_first_exit_symmetric():
    s = monte_carlo(first_exit(-1, 1), 20_000, 6, engine="euler", dt=1e-4, aggregate=False)
    assert s.n_censored == 0
    assert within(np.mean(s.b_T == 1.0), 0.5, len(s), 3)
    assert np.allclose(s.clock, s.clock.round(8))


def test_euler_censoring_reported():
    s = monte_carlo(hitting(1.0), 2000, 7, engine="euler", dt=1e-3, horizon=0.5)
    assert 0 < s.n_censored < len(s)
    assert np.all(s.clock[s.censored] >= 0.5 - 1e-12)
    with pytest.raises(E.NoSamples):
        monte_carlo(hitting(5.0), 20, 7, engine="euler", dt=1e-2, horizon=1e-2).valid()


def test_bridge_off_bias_shrinks_with_dt():
    rule = first_exit(-1, 1)
    ref = math.log(2.0)  # E[max] before leaving (-1, 1), see the exact engine check below
    exact = monte_carlo(rule, 200_000, 8)
    assert abs(exact.m_T.mean() - ref) < 4 * exact.m_T.std() / math.sqrt(len(exact))
    bias = {}
    for dt in (1e-2, 1e-3, 1e-4):
        s = monte_carlo(rule, 20_000, 9, engine="euler", dt=dt, bridge=False, aggregate=False)
        bias[dt] = s.m_T.mean() - ref
    assert bias[1e-2] < bias[1e-3] - 0.005 < 0
    assert abs(bias[1e-4]) < abs(bias[1e-3])
    on = monte_carlo(rule, 20_000, 9, engine="euler", dt=1e-2, aggregate=False)
    assert abs(on.m_T.mean() - ref) < 0.01


def test_aggregation_matches_plain_steps():
    rule = compile_tmax(NEG)
    a = monte_carlo(rule, 20_000, 10, engine="euler", dt=1e-3, horizon=1e12)
    assert a.n_censored == 0
    assert within(np.mean(a.b_T == -2.0), 0.5, len(a))
    for x in (1.0, 3.0):
        assert within(np.mean(a.m_T >= x), O.ay_max_tail([(0, -2), (2, 0)], x), len(a))


# driver --------------------------------------------------------------------


def test_monte_carlo_single_path_repeatable():
    a = monte_carlo(compile_tmax(NEG), 1, 99)
    b = monte_carlo(compile_tmax(NEG), 1, 99)
    assert a.record(0) == b.record(0)
    assert a.record(0) == exact_walk(compile_tmax(NEG), RandomStream(99, 0))


@pytest.mark.parametrize("engine, dt", [("exact", None), ("euler", 1e-3)])
def test_worker_count_irrelevant(engine, dt):
    rule = compile_tmax(NEG)
    n = 100_000 if engine == "exact" else 2_000
    runs = [monte_carlo(rule, n, 5, engine=engine, dt=dt, workers=w) for w in (1, 2, 8)]
    for r in runs[1:]:
        for f in ("b_T", "m_T", "j_T", "status", "stage_count"):
            assert np.array_equal(getattr(r, f), getattr(runs[0], f))


def test_unknown_engine():
    with pytest.raises(ValueError):
        monte_carlo(hitting(1.0), 5, 0, engine="magic")


def test_csv_round_trip(tmp_path):
    s = monte_carlo(compile_tmax(NEG), 50, 3)
    text = write_samples_csv(s, tmp_path / "s.csv")
    assert text.splitlines()[0] == "path_index,b_T,m_T,j_T,censored,stage_count"
    assert "\r" not in text
    back = read_samples_csv(tmp_path / "s.csv")
    assert np.array_equal(back.b_T, s.b_T) and np.array_equal(back.m_T, s.m_T)
    e = monte_carlo(hitting(0.5), 5, 3, engine="euler", dt=1e-3)
    assert write_samples_csv(e).splitlines()[0].endswith(",clock")


def test_csv_empty_file(tmp_path):
    f = tmp_path / "empty.csv"
    f.write_text("path_index,b_T,m_T,j_T,censored,stage_count\n")
    with pytest.raises(E.NoSamples):
        read_samples_csv(f)
