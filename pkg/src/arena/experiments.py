"""Corpus builders and per-trace evaluation shared by the CLI and tests."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import metrics, objects
from .adversary import (build_lower_bound_schedule, bursty, candidate_phase_bound,
                        champion_phase_bound, done_per_phase, round_robin, seeded_random)
from .algorithms import get_algorithm
from .sim import ConfigurationError, ExecutionTrace, RequestStream, Schedule, run_simulation

CORPUS_SIZES = (2, 3, 4, 8, 16)


@dataclass(frozen=True)
class CorpusEntry:
    label: str
    seed: int
    schedule: Schedule


def random_corpus(count: int, seed: int, sizes=CORPUS_SIZES, max_length: int = 5000,
                  min_length: int = 1) -> list[CorpusEntry]:
    """Mixed random, bursty and round-robin schedules, fully determined by
    ``seed``."""
    rng = random.Random(seed)
    out = []
    for i in range(count):
        n = rng.choice(sizes)
        length = rng.randint(min_length, max_length)
        s = rng.randrange(2 ** 31)
        kind = ("random", "random", "bursty", "round-robin")[i % 4]
        if kind == "random":
            sched = seeded_random(n, length, s)
        elif kind == "bursty":
            sched = bursty(n, length, rng.randint(1, 3 * n), s)
        else:
            sched = round_robin(n, length)
        out.append(CorpusEntry(f"{kind}:{length}", s, sched))
    return out


def parse_schedule(spec: str, n: int, default_seed: int | None = None) -> tuple[Schedule, int | None]:
    """``kind:len[:key=value...]`` with kinds round-robin, random, bursty."""
    parts = spec.split(":")
    if len(parts) < 2:
        raise ConfigurationError(f"schedule spec {spec!r} must look like kind:len[:seed=..]")
    kind = parts[0]
    try:
        length = int(parts[1])
        opts = dict(p.split("=", 1) for p in parts[2:])
        seed = int(opts["seed"]) if "seed" in opts else default_seed
        burst = int(opts.get("burst", 4))
    except ValueError as exc:
        raise ConfigurationError(f"bad schedule spec {spec!r}: {exc}") from None
    if kind == "round-robin":
        return round_robin(n, length), None
    if kind in ("random", "bursty"):
        if seed is None:
            raise ConfigurationError(f"{kind} schedules need a seed (seed=.. or ARENA_SEED)")
        if kind == "random":
            return seeded_random(n, length, seed), seed
        return bursty(n, length, burst, seed), seed
    raise ConfigurationError(f"unknown schedule kind {kind!r}")


@dataclass
class TraceEvaluation:
    trace: ExecutionTrace
    violations: list = field(default_factory=list)
    validations: dict = field(default_factory=dict)
    report: metrics.RatioReport | None = None

    @property
    def ok(self) -> bool:
        return not self.violations and all(self.validations.values())


VALIDATORS = ("freshness", "serialization", "progress", "per-collect", "rises",
              "champion", "throughput")


def evaluate(trace: ExecutionTrace, validators=VALIDATORS) -> TraceEvaluation:
    """Run the requested checkers and validators on a collect trace."""
    ev = TraceEvaluation(trace)
    if "freshness" in validators:
        ev.violations += objects.check_collect_freshness(trace)
    if "serialization" in validators:
        ev.violations += objects.check_write_collect_serialization(trace)
    if "champion" in validators:
        ev.validations["champion"] = metrics.validate_lemma_champion(trace).ok
    profile = metrics.latency_profile(trace)
    if profile.private and {"progress", "per-collect", "rises", "throughput"} & set(validators):
        series = metrics.compute_progress(trace, profile)
        if "progress" in validators:
            ev.validations["progress"] = metrics.validate_lemma_progress(trace, series).ok
        if "per-collect" in validators:
            ev.validations["per-collect"] = \
                metrics.validate_progress_per_collect(trace, series).ok
        if "rises" in validators:
            ev.validations["rises"] = metrics.validate_lemma_rises(trace, series).ok
        if "throughput" in validators:
            check = metrics.throughput_bound_check(trace, series,
                                                   metrics.opt_upper_bound(trace))
            ev.validations["throughput"] = check.status != "fail"
    ev.report = metrics.ratio_report(trace)
    return ev


def run_algorithm(algo: str, schedule: Schedule, requests: str = "all-collects") -> ExecutionTrace:
    return run_simulation(get_algorithm(algo), schedule, RequestStream.named(requests))


@dataclass(frozen=True)
class PhaseRow:
    phase: int
    candidate: int
    champion: int


@dataclass(frozen=True)
class LowerBoundResult:
    n: int
    m: int
    plan: object
    rows: tuple[PhaseRow, ...]
    candidate_bound: int
    champion_bound: int
    champion_violations: int

    @property
    def ratio(self) -> float:
        cand = sum(r.candidate for r in self.rows)
        champ = sum(r.champion for r in self.rows)
        return champ / cand if cand else float("inf")


def lower_bound_experiment(algo: str, n: int, m: int | None, phases: int) -> LowerBoundResult:
    """Build the starvation schedule against ``algo``, then run it and the
    plan-aware champion on it."""
    factory = get_algorithm(algo)
    schedule, plan = build_lower_bound_schedule(factory, n, m, phases)
    cand = run_simulation(factory, schedule)
    champ = run_simulation(plan.champion(), schedule)
    bad = (objects.check_collect_freshness(champ)
           + objects.check_write_collect_serialization(champ))
    rows = tuple(PhaseRow(i, c, h) for i, (c, h) in
                 enumerate(zip(done_per_phase(cand, plan), done_per_phase(champ, plan))))
    return LowerBoundResult(n, plan.m, plan, rows, candidate_phase_bound(n, plan.m),
                            champion_phase_bound(n, plan.m), len(bad))
