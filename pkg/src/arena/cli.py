"""Command-line experiment runner.

    arena run --algo coop --n 8 --sched random:5000:seed=7 --out out/
    arena lowerbound --algo trivial --n 64 --m 8 --phases 10 --out out/
    arena compose --upper snapshot --lower trivial --n 4 --corpus random:100 --out out/

Exit codes: 0 success, 1 checker or validator failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from . import metrics, objects
from .adversary import ConstructionInfeasible
from .composition import export_composition, get_layer, run_composition_corpus
from .experiments import VALIDATORS, evaluate, lower_bound_experiment, parse_schedule, run_algorithm
from .algorithms import get_algorithm
from .sim import ArenaError, ConfigurationError, RequestStream

OK, FAILED, CONFIG_ERROR = 0, 1, 2


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment.  Keys use the long
    flag names without dashes (``algo``, ``n``, ``sched``, ...)."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def csv_to_json(text: str) -> str:
    rows = list(csv.DictReader(io.StringIO(text)))
    return json.dumps(rows, indent=2, sort_keys=True) + "\n"


def _emit(out: str | None, files: dict[str, str]) -> None:
    if out is None:
        return
    for name, text in files.items():
        write_atomic(Path(out) / name, text)


def _env_seed() -> int | None:
    raw = os.environ.get("ARENA_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"ARENA_SEED must be an integer, got {raw!r}") from None


def _validators(spec: str) -> tuple[str, ...]:
    if spec == "all":
        return VALIDATORS
    names = tuple(s for s in spec.split(",") if s)
    unknown = sorted(set(names) - set(VALIDATORS))
    if unknown:
        raise ConfigurationError(f"unknown validators {unknown}; choose from {list(VALIDATORS)}")
    return names


# -- commands ----------------------------------------------------------------

def cmd_run(args) -> int:
    get_algorithm(args.algo)
    RequestStream.named(args.requests)
    validators = _validators(args.validators)
    schedule, seed = parse_schedule(args.sched, args.n, _env_seed())
    trace = run_algorithm(args.algo, schedule, args.requests)
    ev = evaluate(trace, validators)
    row = metrics.metrics_row(args.algo, args.n, args.sched, seed, ev.report)
    table = metrics.export_metrics([row])
    _emit(args.out, {
        "metrics.csv": table,
        "metrics.json": csv_to_json(table),
        "trace_ops.csv": trace.export_ops(),
        "trace_tasks.csv": trace.export_tasks(),
        "violations.csv": objects.export_violations(ev.violations),
    })
    print(table, end="")
    for v in ev.violations:
        print(f"violation: {v.predicate} owner={v.task.owner} "
              f"[{v.task.start},{v.task.finish}] {v.detail}", file=sys.stderr)
    for name, passed in ev.validations.items():
        if not passed:
            print(f"validator failed: {name}", file=sys.stderr)
    return OK if ev.ok else FAILED


LOWERBOUND_HEADER = ["phase", "candidate", "champion", "candidate_bound", "champion_bound"]


def cmd_lowerbound(args) -> int:
    get_algorithm(args.algo)
    if args.phases == 0:
        table = ",".join(LOWERBOUND_HEADER) + "\n"
        _emit(args.out, {"lowerbound.csv": table, "lowerbound.json": csv_to_json(table)})
        print(table, end="")
        return OK
    res = lower_bound_experiment(args.algo, args.n, args.m, args.phases)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOWERBOUND_HEADER)
    for r in res.rows:
        w.writerow([r.phase, r.candidate, r.champion, res.candidate_bound, res.champion_bound])
    table = buf.getvalue()
    _emit(args.out, {"lowerbound.csv": table, "lowerbound.json": csv_to_json(table),
                     "plan.txt": res.plan.manifest()})
    print(table, end="")
    print(f"n={res.n} m={res.m} champion/candidate={res.ratio:.4f}")
    ok = (res.champion_violations == 0
          and all(r.candidate <= res.candidate_bound and r.champion >= res.champion_bound
                  for r in res.rows))
    return OK if ok else FAILED


def _corpus(spec: str, n: int, seed: int | None):
    parts = spec.split(":")
    try:
        kind, count = parts[0], int(parts[1])
        opts = dict(p.split("=", 1) for p in parts[2:])
        length = int(opts.get("len", 1000))
        base = int(opts["seed"]) if "seed" in opts else seed
    except (IndexError, ValueError) as exc:
        raise ConfigurationError(f"bad corpus spec {spec!r}: {exc}") from None
    if kind != "round-robin" and base is None:
        raise ConfigurationError("corpus needs a seed (seed=.. or ARENA_SEED)")
    out = []
    for i in range(count):
        s = None if base is None else base + i
        sched, _ = parse_schedule(f"{kind}:{length}" + ("" if s is None else f":seed={s}"), n)
        out.append((s, sched))
    return out


def cmd_compose(args) -> int:
    get_layer(args.upper)
    get_algorithm(args.lower)
    corpus = _corpus(args.corpus, args.n, _env_seed())
    rows = run_composition_corpus(args.upper, args.lower, corpus)
    table = export_composition(rows)
    _emit(args.out, {"composition.csv": table, "composition.json": csv_to_json(table)})
    print(table, end="")
    ok = all(r.holds and r.relative.status != "fail" and r.relative.within_budget
             and r.max_u_tasks <= r.report.n + 2 for r in rows)
    return OK if ok else FAILED


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arena", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="flat key = value file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one schedule and check it")
    run.add_argument("--algo", default="trivial")
    run.add_argument("--n", type=int, default=4)
    run.add_argument("--sched", default="round-robin:100")
    run.add_argument("--requests", default="all-collects")
    run.add_argument("--validators", default="all")
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    lb = sub.add_parser("lowerbound", help="starvation schedule against an algorithm")
    lb.add_argument("--algo", default="trivial")
    lb.add_argument("--n", type=int, default=16)
    lb.add_argument("--m", type=int)
    lb.add_argument("--phases", type=int, default=10)
    lb.add_argument("--out")
    lb.set_defaults(func=cmd_lowerbound)

    comp = sub.add_parser("compose", help="layered algorithm over a collect corpus")
    comp.add_argument("--upper", default="rounds")
    comp.add_argument("--lower", default="trivial")
    comp.add_argument("--n", type=int, default=4)
    comp.add_argument("--corpus", default="random:100")
    comp.add_argument("--out")
    comp.set_defaults(func=cmd_compose)
    return parser


def _apply_config(parser, argv):
    """Config values become defaults, so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        values = read_config(known.config)
        for action in parser._subparsers._group_actions[0].choices.values():
            valid = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in values.items() if k in valid})


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return CONFIG_ERROR if exc.code else OK
    for key in ("n", "m", "phases"):
        val = getattr(args, key, None)
        if isinstance(val, str):
            try:
                setattr(args, key, int(val))
            except ValueError:
                print(f"error: {key} must be an integer, got {val!r}", file=sys.stderr)
                return CONFIG_ERROR
    try:
        return args.func(args)
    except (ConfigurationError, ConstructionInfeasible) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except ArenaError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
