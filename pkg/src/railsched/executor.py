"""Table-driven cyclic executive for the multi-rate integration.

``build_table`` expands a ``ScheduleSolution`` into explicit slots over one
hyperperiod.  ``run_logical`` and ``run_realtime`` walk that table and
advance the integration groups bound to each task.  Both follow the same
data-exchange rule: every activation released at instant ``r`` reads the
state published at ``r`` and its result is published at the next barrier.
That makes the numerics depend only on the table, never on timing, and the
result is bit-identical to ``integrator.simulate`` with the matching
divisors.
"""

from __future__ import annotations

import json
import logging
import math
import os
import statistics
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .dynamics import TrackExcitation, VehicleParams, VehicleState
from .integrator import (
    GROUP_OFFSET,
    GROUPS,
    Trajectory,
    advance_group,
    check_finite,
    config_digest,
    step_count,
)
from .schedule import (
    ScheduleError,
    SchedulingProblem,
    ScheduleSolution,
    ValidationError,
    effective_period,
    hyperperiod,
    split_blocks,
    validate_solution,
)

log = logging.getLogger(__name__)

TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
MIN_WALL_PERIOD = 1e-3


class TableOverflowError(ScheduleError):
    def __init__(self, core: int, cycle: int, load: float, length: int):
        super().__init__(f"core {core}, cycle {cycle}: due work {load:g} exceeds cycle length {length}")
        self.core = core
        self.cycle = cycle


class ConfigurationError(ValueError):
    pass


class WorkerError(RuntimeError):
    pass


@dataclass(frozen=True)
class Slot:
    core: int
    cycle: int
    task: str
    block: int
    start: float
    length: float
    release: int
    deadline: int

    @property
    def end(self) -> float:
        return self.start + self.length


@dataclass(frozen=True)
class CoreTable:
    core: int
    cycle_length: int
    slots: tuple[Slot, ...]


@dataclass(frozen=True)
class ScheduleTable:
    time_unit: str
    hyperperiod: int
    cores: tuple[CoreTable, ...]
    effective_periods: dict[str, int]
    core_of: dict[str, int]

    def slots(self) -> list[Slot]:
        return [s for c in self.cores for s in c.slots]

    @property
    def tasks(self) -> list[str]:
        return sorted(self.effective_periods)

    @property
    def base_period(self) -> int:
        """Largest tick every effective period is a multiple of."""
        return reduce(math.gcd, self.effective_periods.values())

    def activations(self, task: str) -> int:
        return sum(1 for s in self.slots() if s.task == task and s.block == 0)

    def dump(self) -> str:
        lines = ["# core cycle task release deadline"]
        for s in sorted(self.slots(), key=lambda s: (s.core, s.cycle, s.start)):
            lines.append(f"{s.core} {s.cycle} {s.task} {s.release} {s.deadline}")
        return "\n".join(lines) + "\n"


def build_table(problem: SchedulingProblem, sol: ScheduleSolution,
                blocks: dict[str, float] | None = None) -> ScheduleTable:
    """Lay out every activation over one hyperperiod.

    ``blocks`` maps task ids to a split fraction; tasks not listed run as a
    single block.  Within an RT-cycle, due blocks go in EDF order with the
    task id as tie-break.
    """
    violations = validate_solution(problem, sol)
    if violations:
        raise ValidationError("; ".join(map(str, violations)))
    blocks = blocks or {}
    unknown = set(blocks) - {t.id for t in problem.tasks}
    if unknown:
        raise ConfigurationError(f"block plan names unknown task {sorted(unknown)[0]}")

    eff = {}
    for i, t in enumerate(problem.tasks):
        eff[t.id] = effective_period(t.period, sol.cycle_lengths[sol.assignment[i]])
    t_c = hyperperiod(eff.values())

    cores = []
    for j in range(problem.cores):
        members = sol.tasks_on(j)
        if not members:
            continue
        L = sol.cycle_lengths[j]
        due = defaultdict(list)
        for i in members:
            task = problem.tasks[i]
            T = eff[task.id]
            plan = split_blocks(task.wcet[j], blocks.get(task.id, 1.0), L)
            if plan.count > T // L:
                raise TableOverflowError(j, 0, task.wcet[j], L)
            for release in range(0, t_c, T):
                for b, length in enumerate(plan.blocks):
                    cycle = release // L + b
                    due[cycle].append((release + T, task.id, b, length, release))
        slots = []
        for cycle in sorted(due):
            start = cycle * L
            load = math.fsum(item[3] for item in due[cycle])
            if load > L + 1e-9:
                raise TableOverflowError(j, cycle, load, L)
            for deadline, task_id, b, length, release in sorted(due[cycle]):
                slots.append(Slot(j, cycle, task_id, b, start, length, release, deadline))
                start += length
        cores.append(CoreTable(j, L, tuple(slots)))

    core_of = {t.id: sol.assignment[i] for i, t in enumerate(problem.tasks)}
    return ScheduleTable(problem.time_unit, t_c, tuple(cores), eff, core_of)


@dataclass(frozen=True)
class Workload:
    """What the scheduled tasks compute: one integration group per task id."""

    params: VehicleParams
    track: TrackExcitation
    h: float
    groups: dict[str, str]
    initial: VehicleState = field(default_factory=VehicleState)
    output_stride: int = 1


@dataclass
class TaskStats:
    activations: int = 0
    misses: int = 0
    max_lateness: float = -math.inf
    min_offset: float = math.inf
    max_offset: float = -math.inf
    durations: list[float] = field(default_factory=list)

    @property
    def jitter(self) -> float:
        return self.max_offset - self.min_offset if self.activations else 0.0

    def record(self, offset: float, lateness: float) -> None:
        self.activations += 1
        self.min_offset = min(self.min_offset, offset)
        self.max_offset = max(self.max_offset, offset)
        self.max_lateness = max(self.max_lateness, lateness)
        if lateness > 0:
            self.misses += 1


@dataclass
class ExecutionReport:
    mode: str
    tasks: dict[str, TaskStats]
    steps: int
    warnings: list[str] = field(default_factory=list)

    @property
    def total_activations(self) -> int:
        return sum(s.activations for s in self.tasks.values())

    @property
    def total_misses(self) -> int:
        return sum(s.misses for s in self.tasks.values())

    @property
    def miss_rate(self) -> float:
        n = self.total_activations
        return self.total_misses / n if n else 0.0

    def to_dict(self) -> dict:
        tasks = {}
        for tid, s in sorted(self.tasks.items()):
            entry = {
                "activations": s.activations,
                "deadline_misses": s.misses,
                "max_lateness": s.max_lateness if s.activations else 0.0,
                "jitter": s.jitter,
            }
            if self.mode == "realtime":
                entry["slot_durations"] = s.durations
            tasks[tid] = entry
        return {"mode": self.mode, "steps": self.steps, "tasks": tasks, "warnings": self.warnings}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _bindings(table: ScheduleTable, workload: Workload) -> dict[str, str]:
    stray = set(workload.groups) - set(table.effective_periods)
    if stray:
        raise ConfigurationError(f"workload task {sorted(stray)[0]} is not in the table")
    missing = set(table.effective_periods) - set(workload.groups)
    if missing:
        raise ConfigurationError(f"table task {sorted(missing)[0]} has no workload")
    bound = list(workload.groups.values())
    for g in bound:
        if g not in GROUPS:
            raise ConfigurationError(f"unknown integration group {g!r}")
    if sorted(bound) != sorted(GROUPS):
        raise ConfigurationError(f"each of {GROUPS} must be bound to exactly one task")
    return dict(workload.groups)


def equivalent_divisors(table: ScheduleTable, workload: Workload) -> tuple[int, int, int]:
    by_group = {g: tid for tid, g in _bindings(table, workload).items()}
    base = table.base_period
    return tuple(table.effective_periods[by_group[g]] // base for g in GROUPS)


class _Run:
    """State shared by both execution modes."""

    def __init__(self, table: ScheduleTable, workload: Workload, n_steps: int):
        self.table = table
        self.w = workload
        self.bind = _bindings(table, workload)
        self.base = table.base_period
        self.n_steps = n_steps
        self.delays = workload.track.delays(workload.params.a_k, workload.params.a_t)
        self.state = tuple(workload.initial.as_tuple())
        self.times = [0.0]
        self.samples = [self.state]
        self.staged: dict[str, tuple] = {}

    def step_of(self, release: int) -> int:
        return release // self.base

    def execute(self, task: str, release: int) -> None:
        """Run one activation against the published state; result is staged."""
        group = self.bind[task]
        n = self.step_of(release)
        H = (self.table.effective_periods[task] // self.base) * self.w.h
        t = n * self.w.h
        new = advance_group(group, self.state, t, H, self.w.params, self.w.track, self.delays)
        check_finite(new, t)
        self.staged[group] = new

    def publish(self, completed_steps: int) -> None:
        if self.staged:
            s = list(self.state)
            for group, new in self.staged.items():
                o = GROUP_OFFSET[group]
                s[o:o + 4] = new
            self.state = tuple(s)
            self.staged = {}
        if completed_steps % self.w.output_stride == 0:
            self.times.append(completed_steps * self.w.h)
            self.samples.append(self.state)

    def trajectory(self, duration: float) -> Trajectory:
        w = self.w
        divisors = equivalent_divisors(self.table, w)
        return Trajectory(
            h=w.h,
            output_stride=w.output_stride,
            times=np.array(self.times),
            states=np.array(self.samples, dtype=float).reshape(-1, 12),
            divisors=divisors,
            track=w.track,
            digest=config_digest(p=w.params.to_dict(), track=w.track.to_dict(), h=w.h,
                                 duration=duration, divisors=divisors,
                                 initial=w.initial.as_tuple(), output_stride=w.output_stride),
        )


def _releases(table: ScheduleTable) -> dict[int, list[Slot]]:
    """First-block slots keyed by release offset within the hyperperiod."""
    out = defaultdict(list)
    for s in sorted(table.slots(), key=lambda s: (s.start, s.core)):
        if s.block == 0:
            out[s.release].append(s)
    return out


def run_logical(table: ScheduleTable, workload: Workload,
                duration: float) -> tuple[Trajectory, ExecutionReport]:
    """Execute the table in logical time; ``duration`` is simulated seconds."""
    if not duration > 0:
        raise ConfigurationError("duration must be positive")
    try:
        n_steps = step_count(workload.h, duration)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    run = _Run(table, workload, n_steps)
    releases = _releases(table)
    finish = _activation_ends(table)
    stats = {tid: TaskStats() for tid in table.effective_periods}

    for n in range(n_steps):
        now = n * run.base
        offset = now % table.hyperperiod
        for slot in releases.get(offset, ()):
            run.execute(slot.task, now)
            # planned timing: offset of the first block, lateness of the last
            stats[slot.task].record(slot.start - slot.release,
                                    finish[slot.task, slot.release] - slot.deadline)
        run.publish(n + 1)

    return run.trajectory(duration), ExecutionReport("logical", stats, n_steps)


def _activation_ends(table: ScheduleTable) -> dict[tuple[str, int], float]:
    ends: dict[tuple[str, int], float] = {}
    for s in table.slots():
        key = (s.task, s.release)
        ends[key] = max(ends.get(key, -math.inf), s.end)
    return ends


def _pin_current_thread(cpu: int) -> str | None:
    if not hasattr(os, "sched_setaffinity"):
        return "thread pinning is not supported on this platform"
    try:
        os.sched_setaffinity(0, {cpu})
    except OSError as exc:
        return f"pinning to cpu {cpu} failed: {exc}"
    return None


def run_realtime(table: ScheduleTable, workload: Workload, duration: float,
                 pin: bool = True) -> tuple[Trajectory, ExecutionReport]:
    """Execute the table against the wall clock with one worker thread per core.

    ``duration`` is wall-clock seconds.  The base period of the table is
    mapped onto one integration step.  Workers meet at a barrier on every
    frame boundary (the gcd of the cycle lengths); results are published by
    the barrier action, so no buffer is written and read in the same frame.
    """
    if not duration > 0:
        raise ConfigurationError("duration must be positive")
    unit = TIME_UNITS.get(table.time_unit)
    if unit is None:
        raise ConfigurationError(f"unknown time unit {table.time_unit!r}")
    if min(table.effective_periods.values()) * unit < MIN_WALL_PERIOD:
        raise ConfigurationError("effective periods below 1 ms cannot be run in wall time")
    base = table.base_period
    n_steps = int(duration / (base * unit) + 1e-9)
    if n_steps < 1:
        raise ConfigurationError("duration is shorter than one base period")

    run = _Run(table, workload, n_steps)
    stats = {tid: TaskStats() for tid in table.effective_periods}
    frame = reduce(math.gcd, (c.cycle_length for c in table.cores))
    n_frames = n_steps * base // frame
    warnings: list[str] = []
    lock = threading.Lock()
    failure: list[BaseException] = []

    def on_barrier() -> None:
        on_barrier.frames += 1
        end = on_barrier.frames * frame
        if end % base == 0:
            run.publish(end // base)

    on_barrier.frames = 0
    barrier = threading.Barrier(len(table.cores), action=on_barrier)

    # an activation runs in the frame of its release, so it reads the state
    # published at that release even if its planned start is later
    per_core = {}
    for c in table.cores:
        by_frame = defaultdict(list)
        for s in c.slots:
            if s.block == 0:
                by_frame[s.release // frame].append(s)
        per_core[c.core] = by_frame

    cpus = sorted(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else []
    if pin and cpus and len(cpus) < len(table.cores):
        warnings.append(f"{len(table.cores)} workers share {len(cpus)} cpus")

    t0 = time.perf_counter() + 0.05

    def worker(k: int, core: CoreTable) -> None:
        if pin and cpus:
            msg = _pin_current_thread(cpus[k % len(cpus)])
            if msg:
                with lock:
                    warnings.append(msg)
        slots_by_frame = per_core[core.core]
        period = table.hyperperiod // frame
        try:
            for f in range(n_frames):
                frame_start = f * frame
                target = t0 + frame_start * unit
                delay = target - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
                hyper_base = (frame_start // table.hyperperiod) * table.hyperperiod
                for slot in slots_by_frame.get(f % period, ()):
                    release = hyper_base + slot.release
                    begin = time.perf_counter()
                    run.execute(slot.task, release)
                    end = time.perf_counter()
                    deadline = t0 + (hyper_base + slot.deadline) * unit
                    with lock:
                        st = stats[slot.task]
                        st.record(begin - (t0 + release * unit), end - deadline)
                        st.durations.append(end - begin)
                barrier.wait()
        except threading.BrokenBarrierError:
            pass
        except BaseException as exc:  # noqa: BLE001 - reported to the caller
            failure.append(exc)
            barrier.abort()

    threads = [threading.Thread(target=worker, args=(k, c), name=f"core-{c.core}", daemon=True)
               for k, c in enumerate(table.cores)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if failure:
        raise WorkerError(f"worker failed: {failure[0]!r}") from failure[0]

    report = ExecutionReport("realtime", stats, n_steps, warnings)
    for w in warnings:
        log.warning(w)
    return run.trajectory(n_steps * workload.h), report


@dataclass(frozen=True)
class WcetEstimate:
    samples: int
    max: float
    mean: float
    stddev: float
    timer_overhead: float
    warning: str | None = None

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "max_ns": self.max,
            "mean_ns": self.mean,
            "stddev_ns": self.stddev,
            "timer_overhead_ns": self.timer_overhead,
            "warning": self.warning,
        }


def measure_wcet(body, iterations: int = 1000, warmup: int = 100) -> WcetEstimate:
    """Time ``body()`` with the monotonic performance counter, net of timer overhead."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    clock = time.perf_counter_ns
    empty = []
    for _ in range(1000):
        a = clock()
        b = clock()
        empty.append(b - a)
    overhead = max(0.0, float(statistics.median(empty)))

    for _ in range(warmup):
        body()
    samples = []
    for _ in range(iterations):
        a = clock()
        body()
        b = clock()
        samples.append(max(0.0, (b - a) - overhead))

    warning = None
    resolution = time.get_clock_info("perf_counter").resolution
    if resolution > 1e-6:
        warning = f"clock resolution {resolution:g} s is coarser than 1 us"
    return WcetEstimate(
        samples=len(samples),
        max=max(samples),
        mean=statistics.fmean(samples),
        stddev=statistics.pstdev(samples),
        timer_overhead=overhead,
        warning=warning,
    )
