"""Command-line entry point: gen, train, solve, check, bench.

Exit codes: 0 ok, 1 usage, 2 infeasible or invalid input, 3 internal error.
Set CREWROSTER_LOG=DEBUG|INFO|WARNING to control log verbosity (stderr).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import errors
from .bench import CLOCKS, METHODS, normalize_method, run_bench, run_method, to_csv, to_text, write_figures
from .bnp import PRESETS, BnpParams
from .instance_io import (
    GeneratorSpec, ScenarioSpec, generate_instance, generate_scenario, parse_instance, parse_roster,
    split_scenarios, write_instance, write_roster,
)
from .model import RuleParams, check_roster, roster_objective
from .seqasg import PolicyNet, TrainConfig, train_cmaes

log = logging.getLogger("crewroster")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3

_INPUT_ERRORS = (errors.ParseError, errors.InfeasibleInput, errors.CoverageError, errors.GenerationError,
                 errors.BuildError, errors.FreezeConflictError, errors.SizeError, errors.MetricError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: kind=usage {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise errors.ParseError(f"cannot read {path}: {e.strerror}") from e


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _method(name: str) -> str:
    try:
        return normalize_method(name)
    except errors.ParameterError as e:
        raise argparse.ArgumentTypeError(str(e))


def _load_params(path: str | None, method: str) -> BnpParams | None:
    if path is None:
        return None
    obj = json.loads(_read(path))
    base = PRESETS.get(method, PRESETS["alg_basic"]).as_dict()
    base.update(obj)
    if base.get("N_iter") in ("inf", None):
        base["N_iter"] = float("inf")
    return BnpParams.from_dict(base)


def _policy(args) -> PolicyNet | None:
    if args.policy:
        return PolicyNet.from_json(_read(args.policy))
    if args.seed is not None:
        return PolicyNet.random(args.seed)
    return None


# ------------------------------------------------------------------ commands

def cmd_gen(args) -> int:
    rules = RuleParams(T_off=args.t_off, T_work=args.t_work, T_min=args.t_min, T_flight=args.t_flight)
    spec = GeneratorSpec(seed=args.seed, horizon_days=args.horizon, n_bases=args.bases, n_airports=args.airports,
                         n_pairings=args.pairings, total_flight_minutes=args.flight_minutes,
                         target_hours=args.target_hours, n_pilots=args.pilots, rules=rules, name=args.name)
    base = generate_instance(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{base.name}.json").write_text(write_instance(base))
    seeds = list(range(args.scenarios))
    train, test = split_scenarios(seeds) if len(seeds) >= 6 else (seeds, [])
    for s in seeds:
        sc = generate_scenario(base, ScenarioSpec(seed=s))
        sub = out / ("test" if s in test else "train")
        sub.mkdir(exist_ok=True)
        (sub / f"{sc.name}.json").write_text(write_instance(sc))
    print(f"wrote {base.name}: {len(base.pilots)} pilots, {len(base.pairings)} pairings, "
          f"{len(train)} train / {len(test)} test scenarios -> {out}")
    return EXIT_OK


def _instances(paths: list[str]):
    files = []
    for p in paths:
        pp = Path(p)
        files += sorted(pp.glob("*.json")) if pp.is_dir() else [pp]
    if not files:
        raise errors.ParseError("no instance files found")
    return [parse_instance(_read(str(f))) for f in files]


def cmd_train(args) -> int:
    insts = _instances(args.scenarios)
    cfg = TrainConfig(popsize=args.popsize, max_generations=args.generations, sigma0=args.sigma, seed=args.seed)
    lines = []

    def progress(line):
        lines.append(line)
        log.info(line)

    res = train_cmaes(insts, cfg, progress)
    _write(args.out, res.policy.to_json())
    if args.log:
        _write(args.log, "\n".join(lines) + "\n")
    print(f"best fitness {res.fitness:.4f} after {len(res.history)} generations")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = parse_instance(_read(args.instance))
    params = _load_params(args.params, args.method)
    lines = []
    run = run_method(inst, args.method, _policy(args), args.window_len, args.overlap, params, lines.append)
    for line in lines:
        log.info(line)
    _write(args.out, write_roster(run.roster, inst))
    if args.log:
        _write(args.log, "\n".join(lines) + "\n")
    if args.out not in (None, "-"):
        print(f"{run.method}: S={run.S:.2f}")
    return EXIT_OK


def cmd_check(args) -> int:
    inst = parse_instance(_read(args.instance))
    roster = parse_roster(_read(args.roster), inst)
    rep = check_roster(inst, roster)
    for line in rep.lines():
        print(line)
    try:
        obj = roster_objective(inst, roster)
        print(f"objective {obj.objective:.2f} satisfaction {obj.satisfaction_total:.2f} "
              f"flight_penalty {obj.flight_penalty:.2f} dayoff_penalty {obj.dayoff_penalty:.2f}")
    except errors.CoverageError:
        pass  # already listed by the report; no objective for a double-covered roster
    print("feasible" if rep.feasible else "infeasible")
    return EXIT_OK if rep.feasible else EXIT_INPUT


def cmd_bench(args) -> int:
    insts = _instances(args.instances)
    methods = [_method(m) for m in args.methods.split(",")]
    params = _load_params(args.params, "alg_basic")
    recs = run_bench(insts, methods, _policy(args), args.window_len, args.overlap, params, args.clock, args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.csv").write_text(to_csv(recs, args.clock))
    text = to_text(recs)
    (out / "bench.txt").write_text(text)
    if not args.no_figures:
        write_figures(recs, out)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crewroster", description="Pilot rostering by branch-and-price with windowing.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic instance and preference scenarios")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--horizon", type=int, default=31)
    g.add_argument("--bases", type=int, default=3)
    g.add_argument("--airports", type=int, default=20)
    g.add_argument("--pairings", type=int, default=250)
    g.add_argument("--flight-minutes", type=int, default=234_000)
    g.add_argument("--target-hours", type=float, default=65.0)
    g.add_argument("--pilots", type=int, default=None)
    g.add_argument("--t-off", type=int, default=10)
    g.add_argument("--t-work", type=int, default=6)
    g.add_argument("--t-min", type=float, default=12.0)
    g.add_argument("--t-flight", type=float, default=85.0)
    g.add_argument("--scenarios", type=int, default=30)
    g.add_argument("--name", default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a seqAsg policy with CMA-ES")
    t.add_argument("scenarios", nargs="+", help="instance files or directories")
    t.add_argument("--generations", type=int, default=120)
    t.add_argument("--popsize", type=int, default=17)
    t.add_argument("--sigma", type=float, default=0.3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.add_argument("--log", default=None)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("instance")
    s.add_argument("--method", type=_method, default="alg_basic", help="|".join(METHODS))
    s.add_argument("--window-len", type=int, default=10)
    s.add_argument("--overlap", type=int, default=3)
    s.add_argument("--policy", default=None)
    s.add_argument("--params", default=None, help="JSON file overriding branch-and-price parameters")
    s.add_argument("--seed", type=int, default=None, help="random policy seed when --policy is absent")
    s.add_argument("--out", default=None)
    s.add_argument("--log", default=None)
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="validate a roster against an instance")
    c.add_argument("instance")
    c.add_argument("roster")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bench", help="compare methods over a set of instances")
    b.add_argument("instances", nargs="+")
    b.add_argument("--methods", default="alg_basic,win_basic,win_ml")
    b.add_argument("--window-len", type=int, default=10)
    b.add_argument("--overlap", type=int, default=3)
    b.add_argument("--policy", default=None)
    b.add_argument("--params", default=None)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--clock", choices=CLOCKS, default="wall",
                   help="wall seconds, or a deterministic work count for reproducible tables")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--no-figures", action="store_true")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return p


_handler: logging.Handler | None = None


def _configure_logging(level_name: str):
    # rebind on every call so repeated in-process runs write to the current stderr
    global _handler
    if _handler is not None:
        log.removeHandler(_handler)
    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(_handler)
    log.setLevel(getattr(logging, level_name.upper(), logging.WARNING))
    log.propagate = False


def main(argv: list[str] | None = None) -> int:
    _configure_logging(os.environ.get("CREWROSTER_LOG", "WARNING"))
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except errors.ParameterError as e:
        print(f"error: kind={e.kind} {e}", file=sys.stderr)
        return EXIT_USAGE
    except _INPUT_ERRORS as e:
        print(f"error: kind={e.kind} {e}", file=sys.stderr)
        return EXIT_INPUT
    except errors.CrewRosterError as e:
        print(f"error: kind={e.kind} {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except json.JSONDecodeError as e:
        print(f"error: kind=parse {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001 - last-resort mapping to the internal exit code
        log.debug("internal error", exc_info=True)
        print(f"error: kind=internal {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
