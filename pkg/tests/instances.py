"""Seeded random scheduling instances shared by the optimizer tests."""

import random

from railsched.colony import brute_force
from railsched.schedule import SchedulingProblem, TaskSpec


def random_problem(rng: random.Random, tasks: int, cores: int, max_period: int = 20) -> SchedulingProblem:
    specs = []
    for i in range(tasks):
        T = rng.randint(1, max_period)
        wcet = tuple(round(rng.uniform(0.05, 0.45) * T, 3) for _ in range(cores))
        specs.append(TaskSpec(f"t{i}", T, wcet))
    return SchedulingProblem(tuple(specs), cores, round(rng.uniform(0.0, 2.0), 3))


def feasible_instance(seed: int, tasks: int | None = None, cores: int | None = None):
    """First instance drawn from ``seed`` that has a feasible schedule, with its exact optimum."""
    rng = random.Random(seed)
    while True:
        m = tasks if tasks is not None else rng.randint(1, 4)
        n = cores if cores is not None else rng.randint(1, 2)
        problem = random_problem(rng, m, n)
        oracle = brute_force(problem)
        if oracle.best is not None:
            return problem, oracle
