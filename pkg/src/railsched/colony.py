"""Artificial bee colony search over task-to-core assignments and cycle lengths.

Each food source is a complete ``ScheduleSolution``.  Employed bees perturb
their own source, onlookers pick sources by fitness-proportional roulette,
and a source that has not improved for ``abandonment_limit`` trials is
replaced by a random one.  Infeasible sources stay in the colony with a
penalized fitness; only feasible solutions are ever reported as best.

``brute_force`` enumerates every assignment and every cycle length and is
the reference the heuristic is checked against on small instances.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field

from .schedule import (
    CapacityError,
    SchedulingProblem,
    ScheduleSolution,
    objective,
    validate_solution,
)

BRUTE_FORCE_LIMIT = 10**7
TIE_TOL = 1e-12


@dataclass(frozen=True)
class AbcParams:
    colony_size: int = 20
    abandonment_limit: int = 30
    max_iterations: int = 500
    seed: int = 0

    def __post_init__(self):
        for name in ("colony_size", "abandonment_limit", "max_iterations", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError(f"{name}: must be an integer, got {value!r}")
        if self.colony_size < 2 or self.colony_size % 2:
            raise ValueError(f"colony_size: must be even and >= 2, got {self.colony_size}")
        if self.abandonment_limit < 1:
            raise ValueError(f"abandonment_limit: must be >= 1, got {self.abandonment_limit}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations: must be >= 1, got {self.max_iterations}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed: must be a 64-bit unsigned integer, got {self.seed}")


@dataclass
class CandidateSolution:
    solution: ScheduleSolution
    fitness: float
    objective: float
    feasible: bool
    trial_counter: int = 0


@dataclass
class OptimizeResult:
    best: ScheduleSolution | None
    F: float
    iterations_used: int
    history: list[float | None] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.best is not None

    def to_dict(self, cores: int) -> dict:
        return {
            "feasible": self.feasible,
            "assignment": self.best.x(cores) if self.best else None,
            "cycle_lengths": list(self.best.cycle_lengths) if self.best else None,
            "F": self.F if self.feasible else None,
            "iterations_used": self.iterations_used,
            "history": self.history,
        }

    def to_json(self, cores: int) -> str:
        return json.dumps(self.to_dict(cores), indent=2)


@dataclass
class BruteForceResult:
    best: ScheduleSolution | None
    F: float
    evaluated: int = 0


def _min_periods(problem: SchedulingProblem, assignment) -> list[int | None]:
    out: list[int | None] = [None] * problem.cores
    for i, core in enumerate(assignment):
        T = problem.tasks[i].period
        if out[core] is None or T < out[core]:
            out[core] = T
    return out


def random_solution(problem: SchedulingProblem, rng: random.Random) -> ScheduleSolution:
    assignment = tuple(rng.randrange(problem.cores) for _ in problem.tasks)
    bounds = _min_periods(problem, assignment)
    cycles = tuple(1 if b is None else rng.randint(1, b) for b in bounds)
    return ScheduleSolution(assignment, cycles)


def _divisors(n: int, bound: int) -> list[int]:
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted({d for s in small for d in (s, n // s) if d <= bound})


def _draw_cycle(problem, assignment, core: int, bound: int, current: int,
                rng: random.Random) -> int:
    """A new cycle length in [1, bound] other than ``current``.

    Half the draws are uniform; the other half pick a divisor of one of the
    core's periods, where the quantization loss vanishes.
    """
    if rng.random() < 0.5:
        periods = [problem.tasks[i].period for i, a in enumerate(assignment) if a == core]
        options = [d for d in _divisors(rng.choice(periods), bound) if d != current]
        if options:
            return rng.choice(options)
    new = rng.randint(1, bound - 1)
    return new if new < current else new + 1


def neighbor(sol: ScheduleSolution, problem: SchedulingProblem, rng: random.Random,
             kind: str | None = None) -> ScheduleSolution:
    """Apply one random mutation: move a task to another core, or redraw one cycle length.

    ``kind`` ("move" or "cycle") forces the mutation type when it is applicable.
    """
    bounds = _min_periods(problem, sol.assignment)
    resizable = [j for j, b in enumerate(bounds) if b is not None and b >= 2]
    kinds = []
    if problem.cores >= 2:
        kinds.append("move")
    if resizable:
        kinds.append("cycle")
    if kind is not None:
        kinds = [k for k in kinds if k == kind]
    if not kinds:
        return sol

    cycles = list(sol.cycle_lengths)
    if rng.choice(kinds) == "cycle":
        j = rng.choice(resizable)
        cycles[j] = _draw_cycle(problem, sol.assignment, j, bounds[j], cycles[j], rng)
        return ScheduleSolution(sol.assignment, tuple(cycles))

    assignment = list(sol.assignment)
    i = rng.randrange(problem.m)
    src = assignment[i]
    dst = rng.randrange(problem.cores - 1)
    dst = dst + 1 if dst >= src else dst
    assignment[i] = dst
    bounds = _min_periods(problem, assignment)
    for j in (src, dst):
        cycles[j] = 1 if bounds[j] is None else min(cycles[j], bounds[j])
    return ScheduleSolution(tuple(assignment), tuple(cycles))


def penalty(problem: SchedulingProblem, sol: ScheduleSolution) -> float:
    violations = validate_solution(problem, sol)
    return 10.0 * (len(violations) + math.fsum(v.excess for v in violations))


class _Evaluator:
    def __init__(self, problem: SchedulingProblem):
        self.problem = problem
        self.cache: dict = {}

    def __call__(self, sol: ScheduleSolution) -> CandidateSolution:
        key = (sol.assignment, sol.cycle_lengths)
        hit = self.cache.get(key)
        if hit is None:
            F = objective(self.problem, sol, check=False)
            pen = penalty(self.problem, sol)
            hit = self.cache[key] = (F, pen)
        F, pen = hit
        return CandidateSolution(sol, 1.0 / (1.0 + F + pen), F, pen == 0.0)


def optimize(problem: SchedulingProblem, params: AbcParams = AbcParams()) -> OptimizeResult:
    rng = random.Random(params.seed)
    evaluate = _Evaluator(problem)
    n_sources = params.colony_size // 2
    sources = [evaluate(random_solution(problem, rng)) for _ in range(n_sources)]

    best: CandidateSolution | None = None

    def remember(c: CandidateSolution) -> None:
        nonlocal best
        if c.feasible and (best is None or c.objective < best.objective):
            best = c

    def try_improve(i: int) -> None:
        current = sources[i]
        cand = evaluate(neighbor(current.solution, problem, rng))
        remember(cand)
        if cand.fitness > current.fitness:
            sources[i] = cand
        else:
            if cand.fitness == current.fitness:
                # sideways move across plateaus; does not reset the trial count
                sources[i] = cand
            sources[i].trial_counter = current.trial_counter + 1

    for c in sources:
        remember(c)
    history: list[float | None] = []
    for _ in range(params.max_iterations):
        for i in range(n_sources):
            try_improve(i)
        weights = [c.fitness for c in sources]
        for _ in range(n_sources):
            try_improve(rng.choices(range(n_sources), weights=weights)[0])
        worst = max(range(n_sources), key=lambda k: sources[k].trial_counter)
        if sources[worst].trial_counter > params.abandonment_limit:
            sources[worst] = evaluate(random_solution(problem, rng))
            remember(sources[worst])
        history.append(best.objective if best else None)

    if best is None:
        return OptimizeResult(None, math.inf, params.max_iterations, history)
    return OptimizeResult(best.solution, best.objective, params.max_iterations, history)


def search_space_size(problem: SchedulingProblem) -> int:
    max_period = max(t.period for t in problem.tasks)
    return problem.cores ** problem.m * max_period ** problem.cores


def brute_force(problem: SchedulingProblem, limit: int = BRUTE_FORCE_LIMIT) -> BruteForceResult:
    """Exact optimum by enumeration.

    Ties within 1e-12 go to the lexicographically smallest flattened x matrix,
    then the smallest cycle-length vector.
    """
    size = search_space_size(problem)
    if size > limit:
        raise CapacityError(f"search space {size} exceeds brute-force limit {limit}")
    n = problem.cores
    best: ScheduleSolution | None = None
    best_F, best_key = math.inf, None
    evaluated = 0
    for assignment in itertools.product(range(n), repeat=problem.m):
        bounds = _min_periods(problem, assignment)
        ranges = [range(1, 2) if b is None else range(1, b + 1) for b in bounds]
        x_flat = tuple(1 if a == j else 0 for a in assignment for j in range(n))
        for cycles in itertools.product(*ranges):
            sol = ScheduleSolution(tuple(assignment), tuple(cycles))
            evaluated += 1
            if validate_solution(problem, sol):
                continue
            F = objective(problem, sol, check=False)
            key = (x_flat, cycles)
            if F < best_F - TIE_TOL or (abs(F - best_F) <= TIE_TOL and key < best_key):
                best, best_F, best_key = sol, F, key
    return BruteForceResult(best, best_F, evaluated)
