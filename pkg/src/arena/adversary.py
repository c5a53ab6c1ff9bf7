"""Schedule generators: fixed patterns, adaptive adversaries that inspect the
whole simulated state, and the phase-by-phase construction that starves a
deterministic collect algorithm while a timestamp-gathering champion thrives.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Protocol

from .algorithms import champion_factory
from .sim import ArenaError, ConfigurationError, Read, RequestStream, Schedule, Simulator


class ConstructionInfeasible(ArenaError):
    """No process outside the starved set escaped being read."""


class NonProgress(ArenaError):
    """A process failed to finish a collect running solo."""


def _check_n(n: int) -> None:
    if n <= 0:
        raise ConfigurationError(f"process count must be positive, got {n}")


def _check_length(length: int) -> None:
    if length < 0:
        raise ConfigurationError(f"schedule length must be non-negative, got {length}")


# -- fixed patterns ----------------------------------------------------------

def round_robin(n: int, length: int) -> Schedule:
    _check_n(n)
    _check_length(length)
    return Schedule(n, tuple(t % n for t in range(length)))


def seeded_random(n: int, length: int, seed: int) -> Schedule:
    _check_n(n)
    _check_length(length)
    rng = random.Random(seed)
    return Schedule(n, tuple(rng.randrange(n) for _ in range(length)))


def bursty(n: int, length: int, burst: int, seed: int) -> Schedule:
    """Runs of ``burst`` consecutive steps by one process; each run's process
    is drawn uniformly, never repeating the previous run's (when n > 1)."""
    _check_n(n)
    _check_length(length)
    if burst < 1:
        raise ConfigurationError(f"burst must be at least 1, got {burst}")
    rng = random.Random(seed)
    slots: list[int] = []
    prev = None
    while len(slots) < length:
        pid = rng.randrange(n)
        if n > 1:
            while pid == prev:
                pid = rng.randrange(n)
        slots.extend([pid] * min(burst, length - len(slots)))
        prev = pid
    return Schedule(n, tuple(slots))


# -- adaptive adversaries ----------------------------------------------------

class ScheduleGenerator(Protocol):
    def next(self, state: Simulator) -> int: ...


class StarveNewestWriter:
    """Adaptive adversary: always run the process whose register was written
    longest ago, so fresh values pile up unread and helping is scarce."""

    def next(self, state: Simulator) -> int:
        def last_write(pid):
            hist = state.histories[pid]
            return hist[-1][0] if hist else -1
        return min(range(state.n), key=lambda pid: (last_write(pid), pid))


class ReadersFirst:
    """Adaptive adversary: prefer processes whose pending op is a read, so
    writes (and thus help) are delayed as long as possible."""

    def __init__(self) -> None:
        self._turn = 0

    def next(self, state: Simulator) -> int:
        n = state.n
        for k in range(n):
            pid = (self._turn + k) % n
            if isinstance(state.pending(pid), Read):
                self._turn = pid + 1
                return pid
        pid = self._turn % n
        self._turn = pid + 1
        return pid


def run_adaptive(factory, n: int, generator: ScheduleGenerator, length: int,
                 requests: RequestStream | None = None):
    """Drive a simulation for ``length`` steps, asking the generator for
    every slot; returns the trace (its schedule records the choices)."""
    _check_length(length)
    sim = Simulator(factory, n, requests)
    for _ in range(length):
        pid = generator.next(sim)
        if not 0 <= pid < n:
            raise ConfigurationError(f"adversary emitted process {pid} outside [0, {n})")
        sim.step(pid)
    return sim.trace()


# -- lower-bound construction ------------------------------------------------

def ceil_sqrt(n: int) -> int:
    return math.isqrt(n - 1) + 1 if n > 0 else 0


def segment_count(n: int, m: int) -> int:
    return (n - m - 1) // (2 * m)


def segment_length(n: int, m: int) -> int:
    return 3 * m + n + 1


def sigma_prime(n: int, S: tuple[int, ...], p: int) -> list[int]:
    m = len(S)
    seg = list(S) + [p] * (m + n + 1) + list(S)
    return seg * segment_count(n, m)


@dataclass(frozen=True)
class PhasePlan:
    start: int            # offset of the phase in the schedule
    p: int                # process none of S read during the probe
    sigma_length: int     # slots of the segment part
    extensions: tuple[tuple[int, int], ...]  # (process, solo steps) in order
    read: tuple[int, ...]  # registers S read during the probe

    @property
    def length(self) -> int:
        return self.sigma_length + sum(k for _, k in self.extensions)


@dataclass(frozen=True)
class LowerBoundPlan:
    n: int
    m: int
    S: tuple[int, ...]
    segments: int
    phases: tuple[PhasePlan, ...]
    labels: tuple = field(default=(), repr=False, compare=False)

    @property
    def segment_length(self) -> int:
        return segment_length(self.n, self.m)

    def phase_bounds(self) -> list[tuple[int, int]]:
        return [(ph.start, ph.start + ph.length) for ph in self.phases]

    def champion_roles(self) -> dict[int, dict[int, tuple]]:
        """Per-process maps from own step index to the slot's role label."""
        roles: dict[int, dict[int, tuple]] = {}
        count = [0] * self.n
        slots = [pid for ph in self._slot_iter() for pid in ph]
        for pid, label in zip(slots, self.labels):
            if label is not None:
                roles.setdefault(pid, {})[count[pid]] = label
            count[pid] += 1
        return roles

    def _slot_iter(self):
        for ph in self.phases:
            yield sigma_prime(self.n, self.S, ph.p)
            for pid, k in ph.extensions:
                yield [pid] * k

    def champion(self):
        return champion_factory(self.champion_roles())

    def manifest(self) -> str:
        lines = [f"n={self.n}", f"m={self.m}",
                 f"S={','.join(map(str, self.S))}",
                 f"segments={self.segments}",
                 f"segment_length={self.segment_length}",
                 f"phases={len(self.phases)}"]
        for i, ph in enumerate(self.phases):
            ext = ",".join(f"{pid}x{k}" for pid, k in ph.extensions)
            lines.append(f"phase {i} start={ph.start} p={ph.p} sigma={ph.sigma_length} "
                         f"ext={ext or '-'} read={','.join(map(str, ph.read)) or '-'}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_manifest(cls, text: str) -> "LowerBoundPlan":
        head: dict[str, str] = {}
        phases = []
        for line in text.splitlines():
            if line.startswith("phase "):
                kv = dict(part.split("=", 1) for part in line.split()[2:])
                ext = () if kv["ext"] == "-" else tuple(
                    tuple(map(int, e.split("x"))) for e in kv["ext"].split(","))
                read = () if kv["read"] == "-" else tuple(map(int, kv["read"].split(",")))
                phases.append(PhasePlan(int(kv["start"]), int(kv["p"]),
                                        int(kv["sigma"]), ext, read))
            elif "=" in line:
                k, v = line.split("=", 1)
                head[k] = v
        n, m = int(head["n"]), int(head["m"])
        S = tuple(map(int, head["S"].split(","))) if head["S"] else ()
        plan = cls(n, m, S, int(head["segments"]), tuple(phases))
        return cls(n, m, S, plan.segments, plan.phases, tuple(_labels(plan)))

    def schedule(self) -> Schedule:
        return Schedule(self.n, tuple(pid for part in self._slot_iter() for pid in part))


def _segment_labels(n: int, S: tuple[int, ...], p: int, block: tuple) -> list:
    m = len(S)
    length = m + n + 1
    return ([("ts",)] * m
            + [("help", block, pos, length, S) for pos in range(length)]
            + [("fetch", p)] * m)


def _labels(plan: LowerBoundPlan) -> list:
    out: list = []
    for i, ph in enumerate(plan.phases):
        for j in range(plan.segments):
            out += _segment_labels(plan.n, plan.S, ph.p, (i, j))
        out += [None] * sum(k for _, k in ph.extensions)
    return out


def _probe_reads(factory, n: int, prefix: list[int], S: tuple[int, ...],
                 requests) -> set[int]:
    """Registers read by S when S alone runs round-robin for n - m - 1 steps
    after ``prefix``."""
    sim = Simulator(factory, n, requests)
    for pid in prefix:
        sim.step(pid)
    read: set[int] = set()
    m = len(S)
    for k in range(n - m - 1):
        op = sim.step(S[k % m])
        if op.kind == "read":
            read.add(op.target)
    return read


def build_lower_bound_schedule(factory, n: int, m: int | None = None, phases: int = 1,
                               requests: RequestStream | None = None):
    """Construct ``phases`` starvation phases against ``factory``.

    Returns ``(schedule, plan)``.  Each phase runs S = {0..m-1} with a
    process p that S never reads inserted between two round-robin rounds of
    every segment, then runs p and each member of S solo until it sits
    between collects.
    """
    if m is None:
        m = ceil_sqrt(n)
    if m < 1 or phases < 0:
        raise ConfigurationError(f"need m >= 1 and phases >= 0, got m={m}, phases={phases}")
    if m >= n - 1:
        raise ConstructionInfeasible(
            f"m={m} leaves no room: the construction needs m < n - 1 = {n - 1}")
    S = tuple(range(m))
    cap = 4 * n
    slots: list[int] = []
    plans: list[PhasePlan] = []
    sim = Simulator(factory, n, requests)
    for _ in range(phases):
        read = _probe_reads(factory, n, slots, S, requests)
        free = [q for q in range(m, n) if q not in read]
        if not free:
            raise ConstructionInfeasible(
                f"S={list(S)} read registers {sorted(read)} within {n - m - 1} steps; "
                "no process outside S was left unread")
        p = free[0]
        start = len(slots)
        sig = sigma_prime(n, S, p)
        for pid in sig:
            sim.step(pid)
        exts = []
        for pid in (p, *S):
            k = 0
            while sim.in_task(pid):
                if k >= cap:
                    raise NonProgress(
                        f"process {pid} did not finish a collect within {cap} solo steps")
                sim.step(pid)
                k += 1
            exts.append((pid, k))
        slots = list(sim.slots)
        plans.append(PhasePlan(start, p, len(sig), tuple(exts), tuple(sorted(read))))
    plan = LowerBoundPlan(n, m, S, segment_count(n, m), tuple(plans))
    plan = LowerBoundPlan(n, m, S, plan.segments, plan.phases, tuple(_labels(plan)))
    return Schedule(n, tuple(slots)), plan


def done_per_phase(trace, plan: LowerBoundPlan, kinds=("collect", "write-collect")) -> list[int]:
    """Collects completed inside each phase's slot range."""
    bounds = plan.phase_bounds()
    counts = [0] * len(bounds)
    for task in trace.tasks:
        if task.kind in kinds and task.finish is not None:
            for i, (a, b) in enumerate(bounds):
                if a <= task.finish < b:
                    counts[i] += 1
                    break
    return counts


def candidate_phase_bound(n: int, m: int) -> int:
    """Collects the starved algorithm can finish in one phase: p's share of
    the segments plus one per extension."""
    segs = segment_count(n, m)
    return (segment_length(n, m) * segs) // (n - 1) + 1 + m


def champion_phase_bound(n: int, m: int) -> int:
    return (m + 1) * segment_count(n, m)
