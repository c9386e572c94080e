"""Command-line front end.

Exit codes: 0 success, 1 infeasible / validation / tolerance failure,
2 bad input or I/O problem.  Failures print one line starting with
``error:`` on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .colony import brute_force, optimize, search_space_size, BRUTE_FORCE_LIMIT
from .config import ConfigError, SimConfig, parse_config
from .dynamics import COORD_NAMES, STATE_NAMES, assemble_system, carriage_energy_fraction, modal_analysis
from .executor import build_table, measure_wcet
from .integrator import GROUPS, DivergenceError, RateGroups, advance_group, compare_trajectories, simulate
from .schedule import ScheduleError

VERIFY_TOLERANCE = 0.02
CSV_HEADER = "t," + ",".join(COORD_NAMES)


class Failure(Exception):
    """Run completed but the outcome is a failure (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, traj) -> None:
    cols = [STATE_NAMES.index(n) for n in COORD_NAMES]
    lines = [CSV_HEADER]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join([_fmt(t)] + [_fmt(row[c]) for c in cols]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_plot_script(path: Path, csv_name: str) -> None:
    plots = ", \\\n     ".join(
        f"'{csv_name}' using 1:{k + 2} with lines title '{name}'" for k, name in enumerate(COORD_NAMES)
    )
    script = (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        "set xlabel 't [s]'\n"
        "set grid\n"
        "set terminal pngcairo size 1200,800\n"
        "set output 'trajectory.png'\n"
        f"plot {plots}\n"
    )
    path.write_text(script, encoding="utf-8")


def _dump_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_config(args) -> SimConfig:
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
    else:
        text = "{}"
    cfg = parse_config(text)
    integ = cfg.integration
    if args.duration is not None:
        integ = dataclasses.replace(integ, duration=args.duration)
    if args.divisors is not None:
        try:
            divs = tuple(int(d) for d in args.divisors.split(","))
        except ValueError:
            raise ConfigError(f"--divisors: expected a,b,c integers, got {args.divisors!r}") from None
        integ = dataclasses.replace(integ, divisors=divs)
    cfg = dataclasses.replace(cfg, integration=integ)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed, abc=dataclasses.replace(cfg.abc, seed=args.seed))
    return cfg


def cmd_simulate(cfg: SimConfig, args) -> int:
    integ = cfg.integration
    traj = simulate(cfg.vehicle, cfg.track, integ.groups, integ.h, integ.duration,
                    output_stride=integ.output_stride)
    out = _out_dir(args)
    write_csv(out / "trajectory.csv", traj)
    write_plot_script(out / "plot.gp", "trajectory.csv")
    print(f"wrote {len(traj)} samples to {out / 'trajectory.csv'}")
    return 0


def cmd_verify(cfg: SimConfig, args) -> int:
    integ = cfg.integration
    multi = simulate(cfg.vehicle, cfg.track, integ.groups, integ.h, integ.duration,
                     output_stride=integ.output_stride)
    ref = simulate(cfg.vehicle, cfg.track, RateGroups(1, 1, 1), integ.h, integ.duration,
                   output_stride=integ.output_stride)
    report = compare_trajectories(ref, multi)
    worst = report.worst_relative()
    ok = worst <= args.tolerance
    doc = {
        "divisors": list(integ.divisors),
        "reference_divisors": [1, 1, 1],
        "tolerance": args.tolerance,
        "worst_relative": worst,
        "within_tolerance": ok,
        **report.to_dict(),
    }
    out = _out_dir(args)
    _dump_json(out / "deviation.json", doc)
    print(f"worst deviation {worst:.6g} of peak (tolerance {args.tolerance})")
    if not ok:
        raise Failure(f"deviation {worst:.6g} exceeds tolerance {args.tolerance}")
    return 0


def cmd_schedule(cfg: SimConfig, args) -> int:
    problem = cfg.scheduling
    result = optimize(problem, cfg.abc)
    doc = {
        "problem": problem.to_dict(),
        "abc": dataclasses.asdict(cfg.abc),
        "solution": result.to_dict(problem.cores),
        "oracle": None,
        "matches_oracle": None,
    }
    if search_space_size(problem) <= BRUTE_FORCE_LIMIT:
        oracle = brute_force(problem)
        if oracle.best is not None:
            doc["oracle"] = {
                "assignment": oracle.best.x(problem.cores),
                "cycle_lengths": list(oracle.best.cycle_lengths),
                "F": oracle.F,
            }
            doc["matches_oracle"] = result.feasible and abs(result.F - oracle.F) <= 1e-9
    out = _out_dir(args)
    _dump_json(out / "solution.json", doc)
    if not result.feasible:
        raise Failure("no feasible schedule found within the iteration budget")
    table = build_table(problem, result.best)
    (out / "table.txt").write_text(table.dump(), encoding="utf-8")
    print(f"F = {result.F!r}, cycle lengths {list(result.best.cycle_lengths)}")
    return 0


def cmd_eigen(cfg: SimConfig, args) -> int:
    sys_m = assemble_system(cfg.vehicle)
    freqs, shapes = modal_analysis(sys_m)
    share = carriage_energy_fraction(sys_m, shapes)
    for k, (f, s) in enumerate(zip(freqs, share)):
        body = "carriage" if s > 0.5 else "trolley"
        print(f"mode {k + 1}: {f:.6f} Hz ({body})")
    if args.out:
        _dump_json(_out_dir(args) / "eigen.json",
                   {"frequencies_hz": [float(f) for f in freqs],
                    "carriage_energy_fraction": [float(s) for s in share]})
    return 0


def task_bodies(cfg: SimConfig):
    p, track, h = cfg.vehicle, cfg.track, cfg.integration.h
    delays = track.delays(p.a_k, p.a_t)
    state = tuple(0.001 * (k + 1) for k in range(12))
    bodies = {}
    for g, d in zip(GROUPS, cfg.integration.divisors):
        def body(g=g, H=d * h):
            advance_group(g, state, 1.0, H, p, track, delays)
        bodies[g] = body
    return bodies


def cmd_measure(cfg: SimConfig, args) -> int:
    results = {}
    for name, body in task_bodies(cfg).items():
        est = measure_wcet(body, iterations=args.iterations, warmup=args.warmup)
        results[name] = est.to_dict()
        print(json.dumps({"task": name, **est.to_dict()}, sort_keys=True))
    if args.out:
        _dump_json(_out_dir(args) / "wcet.json", results)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "schedule": cmd_schedule,
    "eigen": cmd_eigen,
    "measure": cmd_measure,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="seed for the optimizer")
    common.add_argument("--duration", type=float, metavar="S", help="simulated time in seconds")
    common.add_argument("--divisors", metavar="a,b,c", help="rate divisors for carriage,trolley1,trolley2")

    parser = _Parser(prog="railsched", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="integrate and write trajectory.csv + plot.gp")
    verify = sub.add_parser("verify", parents=[common], help="compare multi-rate run with uniform rate")
    verify.add_argument("--tolerance", type=float, default=VERIFY_TOLERANCE,
                        help="max deviation as a fraction of peak amplitude")
    sub.add_parser("schedule", parents=[common], help="optimize the cyclic schedule")
    sub.add_parser("eigen", parents=[common], help="print undamped natural frequencies")
    measure = sub.add_parser("measure", parents=[common], help="measure WCET of the task bodies")
    measure.add_argument("--iterations", type=int, default=2000)
    measure.add_argument("--warmup", type=int, default=200)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DivergenceError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
