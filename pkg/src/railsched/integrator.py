"""Fixed-step explicit Euler integration with per-body update rates.

The twelve phase variables are split into three rate groups (carriage and
the two trolleys).  A group with divisor ``d`` is advanced on base steps
``n`` with ``n % d == 0`` by a single Euler step of length ``d * h``; between
updates every other group sees its last value (zero-order hold).  All groups
due at step ``n`` read the same snapshot of the state taken at the start of
that step, so the order in which they are written back does not matter.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    STATE_NAMES,
    TrackExcitation,
    VehicleParams,
    VehicleState,
    carriage_accel,
    trolley_accel,
    wheelset_input,
)

GROUPS = ("carriage", "trolley1", "trolley2")
GROUP_OFFSET = {"carriage": 0, "trolley1": 4, "trolley2": 8}


class DivergenceError(ArithmeticError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state at t={t!r}")
        self.t = t


class ComparisonError(ValueError):
    pass


@dataclass(frozen=True)
class RateGroups:
    carriage: int = 5
    trolley1: int = 1
    trolley2: int = 1

    def __post_init__(self):
        for name in GROUPS:
            d = getattr(self, name)
            if isinstance(d, bool) or not isinstance(d, int) or d < 1:
                raise ValueError(f"divisor for {name} must be a positive integer, got {d!r}")

    @classmethod
    def from_sequence(cls, divisors) -> "RateGroups":
        divisors = list(divisors)
        if len(divisors) != 3:
            raise ValueError(f"expected 3 divisors, got {len(divisors)}")
        return cls(*divisors)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.carriage, self.trolley1, self.trolley2)


@dataclass(frozen=True)
class Trajectory:
    h: float
    output_stride: int
    times: np.ndarray
    states: np.ndarray  # (samples, 12), columns in STATE_NAMES order
    divisors: tuple[int, int, int]
    track: TrackExcitation
    digest: str = ""
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, STATE_NAMES.index(name)]

    def state(self, i: int) -> VehicleState:
        return VehicleState.from_sequence(self.states[i])


@dataclass(frozen=True)
class DeviationReport:
    max_abs: dict[str, float]
    relative_to_peak: dict[str, float]

    def worst_relative(self, names=None) -> float:
        names = names or list(self.relative_to_peak)
        return max(self.relative_to_peak[n] for n in names)

    def to_dict(self) -> dict:
        return {"max_abs": dict(self.max_abs), "relative_to_peak": dict(self.relative_to_peak)}


def advance_group(group: str, s, t: float, H: float, p: VehicleParams,
                  track: TrackExcitation, delays) -> tuple[float, float, float, float]:
    """One explicit Euler step of length ``H`` for one group, reading snapshot ``s``.

    Returns the group's new (z, v, phi, w).
    """
    if group == "carriage":
        a_z, a_phi = carriage_accel(s, p)
        o = 0
    else:
        which, o, first = (1, 4, 0) if group == "trolley1" else (2, 8, 2)
        w = track.w
        e_a, ed_a = wheelset_input(t, delays[first], track.a1, track.a2, w)
        e_b, ed_b = wheelset_input(t, delays[first + 1], track.a1, track.a2, w)
        a_z, a_phi = trolley_accel(which, s, e_a, e_b, ed_a, ed_b, p)
    return (
        s[o] + H * s[o + 1],
        s[o + 1] + H * a_z,
        s[o + 2] + H * s[o + 3],
        s[o + 3] + H * a_phi,
    )


def check_finite(values, t: float) -> None:
    if not math.isfinite(sum(values)):
        raise DivergenceError(t)


def step_count(h: float, duration: float) -> int:
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"h must be positive, got {h!r}")
    if not duration >= h:
        raise ValueError(f"duration must be >= h, got {duration!r}")
    return int(round(duration / h))


def config_digest(**config) -> str:
    blob = json.dumps(config, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def simulate(p: VehicleParams, track: TrackExcitation, groups: RateGroups, h: float,
             duration: float, initial: VehicleState | None = None,
             output_stride: int = 1) -> Trajectory:
    p.validate()
    if output_stride < 1:
        raise ValueError(f"output_stride must be >= 1, got {output_stride!r}")
    n_steps = step_count(h, duration)
    initial = initial or VehicleState()
    s = list(initial.as_tuple())
    delays = track.delays(p.a_k, p.a_t)
    plan = [(g, d, GROUP_OFFSET[g]) for g, d in zip(GROUPS, groups.as_tuple())]

    times, samples = [0.0], [tuple(s)]
    for n in range(n_steps):
        t = n * h
        due = [(g, d, o) for g, d, o in plan if n % d == 0]
        # every due group reads the same snapshot
        snapshot = tuple(s)
        for g, d, o in due:
            new = advance_group(g, snapshot, t, d * h, p, track, delays)
            check_finite(new, t)
            s[o:o + 4] = new
        if (n + 1) % output_stride == 0:
            times.append((n + 1) * h)
            samples.append(tuple(s))

    return Trajectory(
        h=h,
        output_stride=output_stride,
        times=np.array(times),
        states=np.array(samples, dtype=float).reshape(-1, 12),
        divisors=groups.as_tuple(),
        track=track,
        digest=config_digest(p=p.to_dict(), track=track.to_dict(), h=h, duration=duration,
                             divisors=groups.as_tuple(), initial=initial.as_tuple(),
                             output_stride=output_stride),
    )


def compare_trajectories(a: Trajectory, b: Trajectory) -> DeviationReport:
    """Per-variable max |a - b| and its ratio to the peak |a|."""
    if a.states.shape != b.states.shape or not np.array_equal(a.times, b.times):
        raise ComparisonError("trajectories are not on the same time grid")
    diff = np.abs(a.states - b.states).max(axis=0) if len(a) else np.zeros(12)
    peak = np.abs(a.states).max(axis=0) if len(a) else np.zeros(12)
    max_abs, rel = {}, {}
    for i, name in enumerate(STATE_NAMES):
        max_abs[name] = float(diff[i])
        if peak[i] > 0:
            rel[name] = float(diff[i] / peak[i])
        else:
            rel[name] = 0.0 if diff[i] == 0 else math.inf
    return DeviationReport(max_abs=max_abs, relative_to_peak=rel)
