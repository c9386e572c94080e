import json
import random

import pytest

from instances import feasible_instance
from railsched.colony import (
    AbcParams,
    brute_force,
    neighbor,
    optimize,
    random_solution,
    search_space_size,
)
from railsched.schedule import (
    CapacityError,
    SchedulingProblem,
    ScheduleSolution,
    TaskSpec,
    objective,
    validate_solution,
)

FAST = AbcParams(max_iterations=200)


def uniform(periods, tau, cores, p):
    tasks = tuple(TaskSpec(f"t{i}", T, (tau,) * cores) for i, T in enumerate(periods))
    return SchedulingProblem(tasks, cores, p)


def test_single_task_reaches_zero():
    prob = uniform([10], 1.0, 1, 0.0)
    res = optimize(prob, FAST)
    assert res.F == 0.0
    assert 10 % res.best.cycle_lengths[0] == 0
    assert validate_solution(prob, res.best) == []


def test_three_task_instance_matches_oracle():
    prob = uniform([4, 6, 12], 1.0, 2, 0.1)
    oracle = brute_force(prob)
    res = optimize(prob, AbcParams(seed=3))
    assert res.F == pytest.approx(oracle.F, abs=1e-9)
    assert res.F >= oracle.F - 1e-12


def test_four_task_two_core_batch():
    matches = 0
    for seed in range(1, 21):
        prob, oracle = feasible_instance(500 + seed, tasks=4, cores=2)
        res = optimize(prob, AbcParams(seed=seed))
        assert res.F >= oracle.F - 1e-12
        matches += abs(res.F - oracle.F) <= 1e-9
    assert matches >= 18


def test_neighbor_keeps_structure():
    prob = uniform([4, 6, 12, 9], 0.5, 3, 0.1)
    rng = random.Random(11)
    sol = random_solution(prob, rng)
    for _ in range(1000):
        cand = neighbor(sol, prob, rng)
        shape = [v for v in validate_solution(prob, cand)
                 if v.constraint not in ("core_load", "core_load_effective")]
        assert shape == []
        assert cand != sol


def test_neighbor_move_flips_one_row():
    prob = uniform([4, 6, 12], 1.0, 2, 0.1)
    rng = random.Random(5)
    sol = ScheduleSolution((0, 0, 1), (2, 12))
    for _ in range(50):
        cand = neighbor(sol, prob, rng, kind="move")
        changed = [i for i in range(3) if cand.assignment[i] != sol.assignment[i]]
        assert len(changed) == 1


def test_neighbor_single_core_changes_only_cycle():
    prob = uniform([10], 1.0, 1, 0.0)
    rng = random.Random(0)
    sol = ScheduleSolution((0,), (5,))
    for _ in range(100):
        cand = neighbor(sol, prob, rng)
        assert cand.assignment == (0,)
        assert cand.cycle_lengths != (5,)
        assert 1 <= cand.cycle_lengths[0] <= 10


def test_neighbor_reclamps_cycle_after_move():
    prob = uniform([20, 4], 1.0, 2, 0.0)
    sol = ScheduleSolution((0, 1), (20, 4))
    rng = random.Random(1)
    while True:
        cand = neighbor(sol, prob, rng, kind="move")
        if cand.assignment == (0, 0):
            break
    assert cand.cycle_lengths[0] == 4


def test_brute_force_worked_example():
    res = brute_force(uniform([10], 1.0, 1, 0.01))
    assert res.best.cycle_lengths == (10,)
    assert res.F == pytest.approx(0.001, abs=1e-15)
    assert res.evaluated == 10
    assert brute_force(uniform([10], 1.0, 1, 0.0)).F == 0.0


def test_brute_force_two_identical_tasks_split():
    # both fitting on one core: 2p/L on one core equals p/L + p/L split, so
    # the tie-break picks the smallest flattened x, [0,1,0,1]
    prob = uniform([5, 5], 1.0, 2, 0.5)
    res = brute_force(prob)
    split = objective(prob, ScheduleSolution((0, 1), (5, 5)))
    assert res.F == pytest.approx(split, abs=1e-12)
    assert res.best.assignment == (1, 1)
    # over half a core each: only the split is feasible
    res = brute_force(uniform([5, 5], 3.0, 2, 0.5))
    assert sorted(res.best.assignment) == [0, 1]
    assert res.F == pytest.approx(0.2)


def test_brute_force_capacity_guard():
    prob = uniform([1000] * 5, 1.0, 3, 0.1)
    assert search_space_size(prob) > 10**7
    with pytest.raises(CapacityError):
        brute_force(prob)


def test_optimize_deterministic():
    prob = uniform([4, 6, 12, 9], 0.5, 2, 0.1)
    a = optimize(prob, AbcParams(seed=42, max_iterations=100))
    b = optimize(prob, AbcParams(seed=42, max_iterations=100))
    assert a.to_json(2) == b.to_json(2)


def test_history_monotone_and_feasible():
    prob, _ = feasible_instance(77, tasks=4, cores=2)
    res = optimize(prob, AbcParams(seed=9, max_iterations=150))
    values = [h for h in res.history if h is not None]
    assert values == sorted(values, reverse=True)
    assert len(res.history) == res.iterations_used == 150
    assert validate_solution(prob, res.best) == []
    assert objective(prob, res.best) == res.F


def test_infeasible_instance_is_reported():
    prob = uniform([5, 5], 3.0, 1, 0.1)
    res = optimize(prob, AbcParams(max_iterations=20))
    assert not res.feasible and res.best is None
    doc = json.loads(res.to_json(1))
    assert doc["feasible"] is False and doc["F"] is None
    assert brute_force(prob).best is None


@pytest.mark.parametrize("kwargs", [{"colony_size": 3}, {"colony_size": 0}, {"max_iterations": 0},
                                    {"abandonment_limit": 0}, {"seed": -1}])
def test_abc_params_validation(kwargs):
    with pytest.raises(ValueError):
        AbcParams(**kwargs)


def test_result_json_shape():
    prob = uniform([4, 6, 12], 1.0, 2, 0.1)
    doc = json.loads(optimize(prob, FAST).to_json(2))
    assert set(doc) == {"feasible", "assignment", "cycle_lengths", "F", "iterations_used", "history"}
    assert all(sum(row) == 1 for row in doc["assignment"])
