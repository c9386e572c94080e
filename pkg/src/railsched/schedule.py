"""Cyclic real-time scheduling model.

Periods are integers in a base time unit (``time_unit``, microseconds by
default) so that cycle arithmetic is exact; WCETs are reals in the same unit.
A core ``j`` runs in RT-cycles of length ``L_j``.  Quantizing a task's period
to the cycle grid gives its effective period ``T' = L * floor(T / L)``, which
is what the table-driven schedule actually honours.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import NamedTuple

__all__ = [
    "INT_RANGE",
    "ScheduleError",
    "BoundError",
    "CapacityError",
    "ValidationError",
    "InfeasibleSplitError",
    "TaskSpec",
    "SchedulingProblem",
    "ScheduleSolution",
    "Violation",
    "BlockPlan",
    "Feasibility",
    "utilization_feasible",
    "effective_period",
    "hyperperiod",
    "objective",
    "validate_solution",
    "split_blocks",
]

# time values must fit a signed 64-bit integer
INT_RANGE = 2**63 - 1


class ScheduleError(ValueError):
    pass


class BoundError(ScheduleError):
    pass


class CapacityError(ScheduleError):
    pass


class ValidationError(ScheduleError):
    pass


class InfeasibleSplitError(ScheduleError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    id: str
    period: int
    wcet: tuple[float, ...]
    group: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "wcet", tuple(float(w) for w in self.wcet))
        if isinstance(self.period, bool) or not isinstance(self.period, int) or self.period < 1:
            raise ValidationError(f"task {self.id}: period must be a positive integer, got {self.period!r}")
        if not self.wcet:
            raise ValidationError(f"task {self.id}: wcet needs at least one core")
        if any(not (w > 0 and math.isfinite(w)) for w in self.wcet):
            raise ValidationError(f"task {self.id}: every wcet must be positive and finite")
        if min(self.wcet) > self.period:
            raise ValidationError(f"task {self.id}: wcet exceeds period on every core")


@dataclass(frozen=True)
class SchedulingProblem:
    tasks: tuple[TaskSpec, ...]
    cores: int
    switch_cost: float = 0.0
    time_unit: str = "us"

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise ValidationError("problem needs at least one task")
        if isinstance(self.cores, bool) or not isinstance(self.cores, int) or self.cores < 1:
            raise ValidationError(f"cores must be a positive integer, got {self.cores!r}")
        if not (self.switch_cost >= 0 and math.isfinite(self.switch_cost)):
            raise ValidationError(f"switch_cost must be >= 0, got {self.switch_cost!r}")
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValidationError("task ids must be unique")
        for t in self.tasks:
            if len(t.wcet) != self.cores:
                raise ValidationError(f"task {t.id}: wcet has {len(t.wcet)} entries, expected {self.cores}")

    @property
    def m(self) -> int:
        return len(self.tasks)

    def to_dict(self) -> dict:
        tasks = []
        for t in self.tasks:
            entry = {"id": t.id, "period": t.period, "wcet": list(t.wcet)}
            if t.group is not None:
                entry["group"] = t.group
            tasks.append(entry)
        return {
            "time_unit": self.time_unit,
            "cores": self.cores,
            "switch_cost": self.switch_cost,
            "tasks": tasks,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SchedulingProblem":
        allowed = {"time_unit", "cores", "switch_cost", "tasks"}
        unknown = set(doc) - allowed
        if unknown:
            raise ValidationError(f"unknown key: {sorted(unknown)[0]}")
        tasks = []
        for entry in doc.get("tasks", []):
            extra = set(entry) - {"id", "period", "wcet", "group"}
            if extra:
                raise ValidationError(f"unknown key: tasks.{sorted(extra)[0]}")
            wcet = entry["wcet"]
            if not isinstance(wcet, list):
                wcet = [wcet]
            tasks.append(TaskSpec(id=str(entry["id"]), period=entry["period"],
                                  wcet=tuple(wcet), group=entry.get("group")))
        return cls(tasks=tuple(tasks), cores=doc.get("cores", 1),
                   switch_cost=float(doc.get("switch_cost", 0.0)),
                   time_unit=doc.get("time_unit", "us"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SchedulingProblem":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ScheduleSolution:
    """Task-to-core assignment and per-core RT-cycle lengths.

    ``assignment[i]`` is the core running task ``i``; the 0/1 matrix form is
    available as ``x``.  ``x`` may also be built directly from a matrix via
    ``from_matrix`` which keeps malformed rows around for validation.
    """

    assignment: tuple[int, ...]
    cycle_lengths: tuple[int, ...]
    matrix: tuple[tuple[int, ...], ...] | None = field(default=None, compare=False)

    @classmethod
    def from_matrix(cls, x, cycle_lengths) -> "ScheduleSolution":
        x = tuple(tuple(int(v) for v in row) for row in x)
        assignment = tuple(row.index(1) if 1 in row else -1 for row in x)
        return cls(assignment=assignment, cycle_lengths=tuple(cycle_lengths), matrix=x)

    def x(self, cores: int) -> list[list[int]]:
        if self.matrix is not None:
            return [list(row) for row in self.matrix]
        return [[1 if a == j else 0 for j in range(cores)] for a in self.assignment]

    def tasks_on(self, core: int) -> list[int]:
        return [i for i, a in enumerate(self.assignment) if a == core]

    def to_dict(self, cores: int) -> dict:
        return {"assignment": self.x(cores), "cycle_lengths": list(self.cycle_lengths)}


@dataclass(frozen=True)
class Violation:
    constraint: str
    index: int
    excess: float = 0.0
    message: str = ""

    def __str__(self) -> str:
        return f"{self.constraint}[{self.index}]: {self.message}"


@dataclass(frozen=True)
class BlockPlan:
    delta: float
    blocks: tuple[float, ...]
    window: float

    @property
    def count(self) -> int:
        return len(self.blocks)


class Feasibility(NamedTuple):
    feasible: bool
    utilization: float


def utilization_feasible(tasks, core: int = 0) -> Feasibility:
    """Necessary condition for a cyclic schedule on one core: sum(tau / T) <= 1."""
    u = math.fsum(t.wcet[core] / t.period for t in tasks)
    return Feasibility(u <= 1.0, u)


def effective_period(period: int, cycle: int) -> int:
    if cycle < 1 or period < 1:
        raise BoundError(f"period and cycle must be >= 1, got T={period}, L={cycle}")
    if cycle > period:
        raise BoundError(f"cycle length {cycle} exceeds period {period}")
    return cycle * (period // cycle)


def hyperperiod(periods) -> int:
    periods = list(periods)
    if not periods or any(p < 1 for p in periods):
        raise BoundError("periods must be a non-empty list of positive integers")

    def lcm(a: int, b: int) -> int:
        r = a * b // math.gcd(a, b)
        if r > INT_RANGE:
            raise CapacityError(f"hyperperiod exceeds the time-unit range ({INT_RANGE})")
        return r

    return reduce(lcm, periods)


def _min_period(problem: SchedulingProblem, members) -> int:
    return min(problem.tasks[i].period for i in members)


def validate_solution(problem: SchedulingProblem, sol: ScheduleSolution) -> list[Violation]:
    out: list[Violation] = []
    n, m = problem.cores, problem.m
    x = sol.x(n)
    if len(x) != m or any(len(row) != n for row in x):
        return [Violation("shape", -1, 1.0, f"assignment must be {m}x{n}")]
    if len(sol.cycle_lengths) != n:
        return [Violation("shape", -1, 1.0, f"cycle_lengths must have {n} entries")]

    for i, row in enumerate(x):
        if any(v not in (0, 1) for v in row):
            out.append(Violation("integrality", i, 1.0, "x entries must be 0 or 1"))
        s = sum(row)
        if s != 1:
            out.append(Violation("one_core_per_task", i, float(abs(s - 1)),
                                 f"task {problem.tasks[i].id} is on {s} cores"))
    total = sum(map(sum, x))
    if total != m:
        out.append(Violation("all_tasks_scheduled", -1, float(abs(total - m)),
                             f"sum of x is {total}, expected {m}"))

    for j in range(n):
        members = [i for i in range(m) if x[i][j] == 1]
        L = sol.cycle_lengths[j]
        if not members:
            continue
        if isinstance(L, bool) or not isinstance(L, int) or L < 1:
            out.append(Violation("cycle_natural", j, 1.0, f"L={L!r} is not a natural number"))
            continue
        t_min = _min_period(problem, members)
        if L > t_min:
            out.append(Violation("cycle_bound", j, float(L - t_min),
                                 f"L={L} exceeds min assigned period {t_min}"))
            continue
        u = math.fsum(problem.tasks[i].wcet[j] / problem.tasks[i].period for i in members)
        if u > 1.0:
            out.append(Violation("core_load", j, u - 1.0, f"load {u:.6g} > 1 on nominal periods"))
        u_eff = math.fsum(problem.tasks[i].wcet[j] / effective_period(problem.tasks[i].period, L)
                          for i in members)
        if u_eff > 1.0:
            out.append(Violation("core_load_effective", j, u_eff - 1.0,
                                 f"load {u_eff:.6g} > 1 on effective periods"))
    return out


def objective(problem: SchedulingProblem, sol: ScheduleSolution, check: bool = True) -> float:
    """Processor time lost to period quantization plus cycle switching, summed over cores."""
    if check:
        structural = [v for v in validate_solution(problem, sol)
                      if v.constraint not in ("core_load", "core_load_effective")]
        if structural:
            raise ValidationError("; ".join(map(str, structural)))
    total = 0.0
    for j in range(problem.cores):
        members = sol.tasks_on(j)
        if not members:
            continue
        L = sol.cycle_lengths[j]
        quant = 0.0
        for i in members:
            t = problem.tasks[i]
            tau = t.wcet[j]
            quant += tau / effective_period(t.period, L) - tau / t.period
        total += quant + len(members) * problem.switch_cost / L
    return total


def split_blocks(tau: float, delta: float, cycle: float) -> BlockPlan:
    if not (0 < delta <= 1):
        raise InfeasibleSplitError(f"delta must be in (0, 1], got {delta!r}")
    if not tau > 0:
        raise InfeasibleSplitError(f"tau must be > 0, got {tau!r}")
    window = delta * tau
    if window > cycle:
        raise InfeasibleSplitError(f"block window {window} exceeds cycle length {cycle}")
    full = math.floor(1.0 / delta + 1e-12)
    blocks = [window] * full
    rest = tau - window * full
    if rest > 1e-12 * tau:
        blocks.append(rest)
    else:
        # absorb rounding so the pieces sum to tau
        blocks[-1] = tau - window * (full - 1)
    return BlockPlan(delta=delta, blocks=tuple(blocks), window=window)
