import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railsched.schedule import (
    BoundError,
    CapacityError,
    InfeasibleSplitError,
    SchedulingProblem,
    ScheduleSolution,
    TaskSpec,
    ValidationError,
    effective_period,
    hyperperiod,
    objective,
    split_blocks,
    utilization_feasible,
    validate_solution,
)


def single(tau=1.0, period=10, p=0.0):
    return SchedulingProblem((TaskSpec("a", period, (tau,)),), cores=1, switch_cost=p)


@pytest.mark.parametrize("T,L,expected", [(10, 1, 10), (10, 3, 9), (7, 7, 7)])
def test_effective_period_examples(T, L, expected):
    assert effective_period(T, L) == expected


def test_effective_period_rejects_long_cycle():
    with pytest.raises(BoundError):
        effective_period(5, 6)
    with pytest.raises(BoundError):
        effective_period(5, 0)


@settings(max_examples=300)
@given(T=st.integers(1, 10_000), data=st.data())
def test_effective_period_properties(T, data):
    L = data.draw(st.integers(1, T))
    tp = effective_period(T, L)
    assert tp <= T and tp % L == 0
    assert (tp == T) == (T % L == 0)
    assert T - tp < L


@pytest.mark.parametrize("periods,expected", [((2, 3), 6), ((4, 4, 4), 4), ((6, 10, 15), 30)])
def test_hyperperiod_examples(periods, expected):
    assert hyperperiod(periods) == expected


def test_hyperperiod_overflow_is_reported():
    primes = [1_000_003, 1_000_033, 1_000_037, 1_000_039]
    with pytest.raises(CapacityError):
        hyperperiod(primes)


def test_objective_examples():
    assert objective(single(), ScheduleSolution((0,), (10,))) == 0.0
    assert objective(single(p=0.01), ScheduleSolution((0,), (10,))) == pytest.approx(0.001, abs=1e-15)
    assert objective(single(p=0.01), ScheduleSolution((0,), (4,))) == pytest.approx(0.0275, abs=1e-15)


def test_objective_ignores_empty_core():
    prob = SchedulingProblem((TaskSpec("a", 10, (1.0, 1.0)),), cores=2, switch_cost=0.01)
    assert objective(prob, ScheduleSolution((0,), (10, 7))) == pytest.approx(0.001, abs=1e-15)


def test_objective_rejects_structural_violation():
    sol = ScheduleSolution.from_matrix([[1, 1]], (10, 10))
    prob = SchedulingProblem((TaskSpec("a", 10, (1.0, 1.0)),), cores=2)
    with pytest.raises(ValidationError):
        objective(prob, sol)


@settings(max_examples=200)
@given(periods=st.lists(st.sampled_from([12, 24, 36, 60]), min_size=1, max_size=4),
       p=st.floats(0.001, 5.0))
def test_objective_reduces_to_switch_term_on_divisors(periods, p):
    tasks = tuple(TaskSpec(f"t{i}", T, (0.1,)) for i, T in enumerate(periods))
    prob = SchedulingProblem(tasks, cores=1, switch_cost=p)
    values = []
    for L in (1, 2, 3, 4, 6, 12):
        F = objective(prob, ScheduleSolution((0,) * len(tasks), (L,)))
        assert F == pytest.approx(len(tasks) * p / L, rel=1e-12)
        values.append(F)
    assert values == sorted(values, reverse=True)


def test_utilization_examples():
    assert utilization_feasible([]) == (True, 0.0)
    two = [TaskSpec("a", 2, (1.0,)), TaskSpec("b", 2, (1.0,))]
    assert utilization_feasible(two) == (True, 1.0)
    us = [TaskSpec("t1", 100, (18.0,)), TaskSpec("t2", 100, (18.0,)), TaskSpec("c", 500, (17.0,))]
    ok, u = utilization_feasible(us)
    assert ok and u == pytest.approx(0.394, abs=1e-12)


@given(st.permutations([TaskSpec("a", 3, (1.0,)), TaskSpec("b", 7, (2.0,)), TaskSpec("c", 11, (5.0,))]))
def test_utilization_permutation_invariant(tasks):
    assert utilization_feasible(tasks).utilization == pytest.approx(1 / 3 + 2 / 7 + 5 / 11, rel=1e-15)


def test_validate_valid_solution():
    assert validate_solution(single(), ScheduleSolution((0,), (5,))) == []


def test_validate_duplicate_task():
    prob = SchedulingProblem((TaskSpec("a", 10, (1.0, 1.0)), TaskSpec("b", 10, (1.0, 1.0))), cores=2)
    sol = ScheduleSolution.from_matrix([[1, 1], [0, 1]], (5, 5))
    v = validate_solution(prob, sol)
    assert any(x.constraint == "one_core_per_task" and x.index == 0 for x in v)
    assert any(x.constraint == "all_tasks_scheduled" for x in v)


def test_validate_overloaded_core():
    prob = SchedulingProblem((TaskSpec("a", 5, (3.0,)), TaskSpec("b", 5, (3.0,))), cores=1)
    v = validate_solution(prob, ScheduleSolution((0, 0), (5,)))
    loads = {x.constraint: x for x in v}
    assert loads["core_load"].index == 0
    assert loads["core_load"].excess == pytest.approx(0.2)
    assert "core_load_effective" in loads


def test_validate_quantized_load_only():
    # nominal 3/7 + 4/7 = 1.0 fits; with L=3 the periods shrink to 6
    prob = SchedulingProblem((TaskSpec("a", 7, (3.0,)), TaskSpec("b", 7, (4.0,))), cores=1)
    v = validate_solution(prob, ScheduleSolution((0, 0), (3,)))
    assert [x.constraint for x in v] == ["core_load_effective"]


def test_validate_cycle_bounds():
    prob = single()
    assert validate_solution(prob, ScheduleSolution((0,), (11,)))[0].constraint == "cycle_bound"
    assert validate_solution(prob, ScheduleSolution((0,), (0,)))[0].constraint == "cycle_natural"
    assert validate_solution(prob, ScheduleSolution((0,), (2.5,)))[0].constraint == "cycle_natural"
    assert validate_solution(prob, ScheduleSolution((0,), (1, 1)))[0].constraint == "shape"


@pytest.mark.parametrize("tau,delta,expected", [
    (4.0, 1.0, (4.0,)),
    (4.0, 0.25, (1.0, 1.0, 1.0, 1.0)),
    (5.0, 0.4, (2.0, 2.0, 1.0)),
])
def test_split_blocks_examples(tau, delta, expected):
    plan = split_blocks(tau, delta, 10)
    assert plan.blocks == pytest.approx(expected, abs=1e-12)
    assert plan.count == len(expected)


def test_split_blocks_errors():
    with pytest.raises(InfeasibleSplitError):
        split_blocks(10.0, 1.0, 5)
    with pytest.raises(InfeasibleSplitError):
        split_blocks(1.0, 0.0, 5)


@settings(max_examples=300)
@given(tau=st.floats(1e-3, 1e3), delta=st.floats(0.01, 1.0))
def test_split_blocks_properties(tau, delta):
    plan = split_blocks(tau, delta, math.inf)
    assert math.fsum(plan.blocks) == pytest.approx(tau, abs=1e-12 * max(1.0, tau))
    assert all(b <= plan.window + 1e-12 * max(1.0, tau) for b in plan.blocks)
    assert plan.count == math.ceil(1 / delta - 1e-12)


def test_problem_json_round_trip():
    prob = SchedulingProblem(
        (TaskSpec("carriage", 500, (17.0, 17.5), group="carriage"), TaskSpec("t1", 100, (18.0, 18.0))),
        cores=2, switch_cost=0.5)
    assert SchedulingProblem.from_json(prob.to_json()) == prob


def test_problem_rejects_bad_input():
    with pytest.raises(ValidationError, match="unknown key"):
        SchedulingProblem.from_dict({"cores": 1, "tasks": [], "colour": 1})
    with pytest.raises(ValidationError):
        SchedulingProblem((TaskSpec("a", 10, (1.0,)),), cores=2)
    with pytest.raises(ValidationError):
        TaskSpec("a", 0, (1.0,))
    with pytest.raises(ValidationError):
        SchedulingProblem((TaskSpec("a", 10, (1.0,)), TaskSpec("a", 10, (1.0,))), cores=1)
