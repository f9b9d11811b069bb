import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mpf

from inerter_iep.plan import (
    InfeasibleSpectrum,
    TargetSpectrum,
    build_plan,
    feasibility_violations,
    feasible,
    spectrum_from_json,
    spectrum_to_json,
    strategy_for,
)

EX2_MULTS = (1, 2, 3, 2, 1, 4, 1, 1)


def _spec(mults):
    return TargetSpectrum(tuple(range(1, len(mults) + 1)), mults)


def test_feasibility_examples():
    assert feasible(_spec((1, 1, 3)))
    assert not feasible(_spec((2,)))
    assert feasibility_violations(_spec((2, 3, 1))) == [(1, 2), (2, 3)]
    assert feasible(_spec(EX2_MULTS))


def test_fifteen_mass_schedule():
    plan = build_plan(_spec(EX2_MULTS))
    assert plan.n == 15 and plan.T == 4
    assert plan.S_sets == ((2, 3, 4, 6), (3, 6), (6,))
    assert plan.q == (4, 2, 1)
    assert plan.schedule == {2: 6, 3: 4, 4: 3, 5: 2, 7: 6, 8: 3, 10: 6}
    assert plan.pinned_indices == (1, 6, 9, 11, 12, 13, 14, 15)
    assert plan.S_values(2) == (3, 6)


def test_fifteen_mass_strategies():
    plan = build_plan(_spec(EX2_MULTS))
    s = strategy_for(plan, 1)
    assert (s.kind, s.block, s.lambda_index, s.lambda_star) == ("B", 0, 6, 6)
    assert [strategy_for(plan, j).kind for j in range(1, 15)] == list("BBBBABBABAAAAA")
    assert strategy_for(plan, 6).block == 1 and strategy_for(plan, 9).block == 2


def test_all_simple_eigenvalues():
    plan = build_plan(_spec((1, 1, 1, 1)))
    assert plan.S_sets == () and plan.schedule == {}
    assert plan.pinned_indices == (1, 2, 3, 4)
    assert all(strategy_for(plan, j).kind == "A" for j in range(1, 4))


def test_double_second_eigenvalue():
    plan = build_plan(TargetSpectrum((1, 2), (1, 2)))
    assert plan.T == 2 and plan.S_sets == ((2,),) and plan.q == (1,)
    assert plan.schedule == {2: 2}
    assert plan.pinned_indices == (1, 3)
    b = strategy_for(plan, 1)
    assert (b.kind, b.block, b.lambda_star) == ("B", 0, 2)
    assert strategy_for(plan, 2).kind == "A"
    with pytest.raises(ValueError):
        strategy_for(plan, 3)


def test_build_plan_rejects_bad_input():
    with pytest.raises(InfeasibleSpectrum) as err:
        build_plan(_spec((1, 3)))
    assert err.value.violations == [(2, 3)]
    with pytest.raises(ValueError):
        build_plan(_spec((1, 2)), pinned=[1])
    with pytest.raises(ValueError):
        build_plan(_spec((1, 2)), pinned=[1, 0])
    with pytest.raises(ValueError):
        TargetSpectrum((2, 1), (1, 1))
    with pytest.raises(ValueError):
        TargetSpectrum((0, 1), (1, 1))
    with pytest.raises(ValueError):
        TargetSpectrum((1,), (True,))


@st.composite
def feasible_mults(draw, m_max=8):
    m = draw(st.integers(1, m_max))
    return tuple(draw(st.integers(1, i)) for i in range(1, m + 1))


@settings(max_examples=200, deadline=None)
@given(feasible_mults())
def test_plan_invariants(mults):
    spec = _spec(mults)
    plan = build_plan(spec)
    n, m = spec.n, spec.m
    assert sum(plan.q) == n - m == len(plan.schedule)
    assert len(plan.pinned_indices) == m and plan.pinned_indices[0] == 1
    assert set(plan.pinned_indices) | set(plan.schedule) == set(range(1, n + 1))
    for j, sj in enumerate(plan.S_sets, 1):
        assert sj == tuple(i for i, t in enumerate(mults, 1) if t >= j + 1)
    # eigenvalue index i is placed exactly t_i - 1 times
    for i, t in enumerate(mults, 1):
        assert list(plan.schedule.values()).count(i) == t - 1
    if plan.schedule:
        top = max(plan.schedule)
        assert top == n - m + plan.T - 1
        gaps = [i for i in range(2, top) if i not in plan.schedule]
        assert len(gaps) == plan.T - 2
    b_steps = [j for j in range(1, n) if strategy_for(plan, j).kind == "B"]
    assert len(b_steps) == n - m
    assert all(plan.schedule[j + 1] == strategy_for(plan, j).lambda_index for j in b_steps)


@settings(max_examples=200, deadline=None)
@given(feasible_mults(), st.data())
def test_lowering_a_multiplicity_keeps_feasibility(mults, data):
    i = data.draw(st.integers(0, len(mults) - 1))
    lowered = list(mults)
    lowered[i] = max(1, lowered[i] - data.draw(st.integers(1, 3)))
    assert feasible(_spec(tuple(lowered)))


def test_spectrum_json_round_trip_and_errors():
    spec, pinned = spectrum_from_json({"lambdas": ["1", "2.5"], "mults": [1, 2], "pinned_masses": ["3", "4"]})
    assert spec.lambdas == (1, mpf("2.5")) and spec.mults == (1, 2) and pinned == (3, 4)
    again = spectrum_from_json(spectrum_to_json(spec, pinned))
    assert again == (spec, pinned)
    assert spectrum_from_json({"lambdas": ["1"], "mults": [1]})[1] is None
    for bad, msg in [
        ([], "expected a JSON object"),
        ({"mults": [1]}, "missing field 'lambdas'"),
        ({"lambdas": "1", "mults": [1]}, r"spectrum.lambdas: expected a list"),
        ({"lambdas": ["1", "x"], "mults": [1, 1]}, r"spectrum.lambdas\[1\]"),
        ({"lambdas": ["1"], "mults": [1.5]}, r"spectrum.mults\[0\]"),
        ({"lambdas": ["2", "1"], "mults": [1, 1]}, "strictly increasing"),
        ({"lambdas": ["1"], "mults": [1], "pinned_masses": ["y"]}, r"pinned_masses\[0\]"),
    ]:
        with pytest.raises(ValueError, match=msg):
            spectrum_from_json(bad)
