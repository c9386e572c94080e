"""JSON run configuration.

Every block is optional; omitted blocks and keys take the defaults below.
Unknown keys are rejected so a typo never silently falls back to a default.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

from .colony import AbcParams
from .dynamics import ParameterError, TrackExcitation, VehicleParams
from .integrator import RateGroups
from .schedule import ScheduleError, SchedulingProblem, TaskSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class IntegrationConfig:
    h: float = 1e-4
    duration: float = 10.0
    divisors: tuple[int, int, int] = (5, 1, 1)
    output_stride: int = 10

    def __post_init__(self):
        object.__setattr__(self, "divisors", tuple(self.divisors))
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigError(f"integration.h: must be > 0, got {self.h!r}")
        if not (self.duration >= self.h and math.isfinite(self.duration)):
            raise ConfigError(f"integration.duration: must be >= h, got {self.duration!r}")
        try:
            RateGroups.from_sequence(self.divisors)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"integration.divisors: {exc}") from None
        if isinstance(self.output_stride, bool) or not isinstance(self.output_stride, int) \
                or self.output_stride < 1:
            raise ConfigError(f"integration.output_stride: must be a positive integer, got {self.output_stride!r}")

    @property
    def groups(self) -> RateGroups:
        return RateGroups.from_sequence(self.divisors)


def default_problem() -> SchedulingProblem:
    """Three integration threads; the carriage runs five times slower."""
    return SchedulingProblem(
        tasks=(
            TaskSpec("carriage", 500, (17.0, 17.0, 17.0), group="carriage"),
            TaskSpec("trolley1", 100, (18.0, 18.0, 18.0), group="trolley1"),
            TaskSpec("trolley2", 100, (18.0, 18.0, 18.0), group="trolley2"),
        ),
        cores=3,
        switch_cost=1.0,
        time_unit="us",
    )


@dataclass(frozen=True)
class SimConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    track: TrackExcitation = field(default_factory=TrackExcitation)
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    scheduling: SchedulingProblem = field(default_factory=default_problem)
    abc: AbcParams = field(default_factory=AbcParams)
    seed: int = 0

    def to_dict(self) -> dict:
        integ = self.integration
        return {
            "vehicle": self.vehicle.to_dict(),
            "track": self.track.to_dict(),
            "integration": {
                "h": integ.h,
                "duration": integ.duration,
                "divisors": list(integ.divisors),
                "output_stride": integ.output_stride,
            },
            "scheduling": self.scheduling.to_dict(),
            "abc": {f.name: getattr(self.abc, f.name) for f in fields(self.abc)},
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _check_keys(block: str, doc, allowed) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(f"{block}: must be a JSON object")
    for key in doc:
        if key not in allowed:
            prefix = f"{block}." if block else ""
            raise ConfigError(f"unknown key: {prefix}{key}")
    return doc


def _numbers(block: str, doc: dict, names) -> dict:
    out = {}
    for name in names:
        if name in doc:
            value = doc[name]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{block}.{name}: must be a number, got {value!r}")
            out[name] = float(value)
    return out


def _integer(block: str, name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{block}.{name}: must be an integer, got {value!r}")
    return value


def parse_config(text: str) -> SimConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}: {exc.msg}") from None
    top = _check_keys("", doc, {"vehicle", "track", "integration", "scheduling", "abc", "seed"})

    seed = _integer("config", "seed", top.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed: must be a 64-bit unsigned integer, got {seed}")

    vehicle_names = [f.name for f in fields(VehicleParams)]
    vdoc = _check_keys("vehicle", top.get("vehicle", {}), vehicle_names)
    try:
        vehicle = VehicleParams(**_numbers("vehicle", vdoc, vehicle_names)).validate()
    except ParameterError as exc:
        raise ConfigError(f"vehicle.{exc}") from None

    track_names = [f.name for f in fields(TrackExcitation)]
    tdoc = _check_keys("track", top.get("track", {}), track_names)
    try:
        track = TrackExcitation(**_numbers("track", tdoc, track_names))
    except ParameterError as exc:
        raise ConfigError(f"track.{exc}") from None

    idoc = _check_keys("integration", top.get("integration", {}),
                       {"h", "duration", "divisors", "output_stride"})
    ikw = _numbers("integration", idoc, ("h", "duration"))
    if "divisors" in idoc:
        divs = idoc["divisors"]
        if not isinstance(divs, list):
            raise ConfigError("integration.divisors: must be a list of 3 integers")
        ikw["divisors"] = tuple(_integer("integration", "divisors", d) for d in divs)
    if "output_stride" in idoc:
        ikw["output_stride"] = _integer("integration", "output_stride", idoc["output_stride"])
    integration = IntegrationConfig(**ikw)

    if "scheduling" in top:
        try:
            scheduling = SchedulingProblem.from_dict(_check_keys("scheduling", top["scheduling"],
                                                                 {"time_unit", "cores", "switch_cost", "tasks"}))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"scheduling: missing or malformed field {exc}") from None
        except ScheduleError as exc:
            raise ConfigError(f"scheduling: {exc}") from None
    else:
        scheduling = default_problem()

    adoc = _check_keys("abc", top.get("abc", {}), [f.name for f in fields(AbcParams)])
    akw = {k: _integer("abc", k, v) for k, v in adoc.items()}
    akw.setdefault("seed", seed)
    try:
        abc = AbcParams(**akw)
    except ValueError as exc:
        raise ConfigError(f"abc.{exc}") from None

    return SimConfig(vehicle, track, integration, scheduling, abc, seed)
