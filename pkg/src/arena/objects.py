"""Ground-truth correctness predicates for collect, write-collect, snapshot
and advance-collect objects.

Every checker is exhaustive: it returns all violations it finds rather than
stopping at the first.  A violation carries a ``witness`` dict of step
indices and values from which :func:`recheck` can re-fail the predicate.
"""

from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .algorithms import logical
from .sim import BOTTOM, ExecutionTrace, MalformedTrace, TaskRecord, register_contents_at

COLLECT_KINDS = ("collect", "write-collect")


@dataclass(frozen=True)
class CollectResult:
    collector: int
    interval: tuple[int, int]
    values: tuple[Any, ...]


@dataclass(frozen=True)
class Violation:
    predicate: str
    task: TaskRecord
    detail: str
    witness: dict = field(default_factory=dict, compare=False)

    def row(self) -> list:
        return [self.predicate, self.task.owner, self.task.start, self.task.finish,
                self.detail]


def export_violations(violations: Iterable[Violation]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["predicate", "owner", "start", "finish", "detail"])
    for v in violations:
        w.writerow(v.row())
    return buf.getvalue()


def collect_results(trace: ExecutionTrace, kinds=COLLECT_KINDS) -> list[tuple[TaskRecord, CollectResult]]:
    out = []
    for task in trace.tasks:
        if task.kind not in kinds or task.finish is None:
            continue
        if not isinstance(task.result, tuple) or len(task.result) != trace.n:
            raise MalformedTrace(
                f"{task.kind} task {task.tid} of process {task.owner} has no "
                f"{trace.n}-entry result")
        out.append((task, CollectResult(task.owner, (task.start, task.finish), task.result)))
    return out


def values_during(trace: ExecutionTrace, reg: int, s: int, f: int,
                  value_of: Callable[[Any], Any] = logical) -> list[tuple[int, Any]]:
    """``(time, value)`` pairs covering every value ``reg`` holds in ``[s, f]``:
    the value in place after step ``s`` followed by each later write."""
    times = trace._times[reg]
    hist = trace.histories[reg]
    i = bisect.bisect_right(times, s)
    first = (s, value_of(hist[i - 1][1] if i else BOTTOM))
    j = bisect.bisect_right(times, f)
    return [first] + [(t, value_of(v)) for t, v in hist[i:j]]


# -- collect freshness -------------------------------------------------------

def check_collect_freshness(trace: ExecutionTrace, kinds=COLLECT_KINDS,
                            value_of: Callable[[Any], Any] = logical) -> list[Violation]:
    violations = []
    for task, res in collect_results(trace, kinds):
        s, f = res.interval
        for r, v in enumerate(res.values):
            present = values_during(trace, r, s, f, value_of)
            if not any(v == w for _, w in present):
                violations.append(Violation(
                    "freshness", task,
                    f"register {r} returned {v!r}, absent throughout [{s},{f}]",
                    {"register": r, "start": s, "finish": f, "returned": v}))
    return violations


# -- write-collect serialization ---------------------------------------------

def _seq_of(v: Any) -> int | None:
    if v is BOTTOM:
        return 0
    return getattr(v, "seq", None)


def check_write_collect_serialization(trace: ExecutionTrace,
                                      kinds=COLLECT_KINDS) -> list[Violation]:
    """Pairwise serialization of write-collects, per register owner.

    For a returned value of register r written by r's ``k``-th write-collect
    (``k = 0`` for the initial value), b passes against every write-collect a
    of r when: a starts before b starts implies ``k >= seq(a)``; a starts
    after b finishes implies ``k != seq(a)``; a starts during b implies
    ``k >= seq(a) - 1``.  The first and third conditions accept values newer
    than a's, since a's owner may already have overwritten them; so when
    several write-collects of r begin during b only the earliest binds.
    """
    by_owner: dict[int, list[TaskRecord]] = {r: [] for r in range(trace.n)}
    by_value: dict[tuple[int, int], TaskRecord] = {}
    for task in trace.tasks:
        if task.kind in kinds and task.start is not None:
            by_owner[task.owner].append(task)
            seq = _seq_of(task.written)
            if seq is not None:
                by_value[(task.owner, seq)] = task
    starts = {r: [a.start for a in tasks] for r, tasks in by_owner.items()}
    violations = []
    for b, res in collect_results(trace, kinds):
        s, f = res.interval
        for r, v in enumerate(res.values):
            if r == b.owner:
                continue
            k = _seq_of(v)
            w = {"register": r, "b": b.tid, "start": s, "finish": f, "returned": v}
            if k is None or (v is not BOTTOM and (v.pid != r or (r, k) not in by_value)):
                violations.append(Violation(
                    "serialization", b, f"register {r} returned {v!r}, never written there",
                    {**w, "case": "unknown"}))
                continue
            tasks, st = by_owner[r], starts[r]
            before = bisect.bisect_left(st, s)
            after = bisect.bisect_right(st, f)
            if before:
                a = tasks[before - 1]
                if k < _seq_of(a.written):
                    violations.append(Violation(
                        "serialization", b,
                        f"write-collect {a.tid} of {r} began at {a.start} before b "
                        f"began at {s}, but b returned the older {v!r}",
                        {**w, "case": "precedes", "a": a.tid}))
            if k and by_value[(r, k)].start > f:
                a = by_value[(r, k)]
                violations.append(Violation(
                    "serialization", b,
                    f"b returned {v!r} written by write-collect {a.tid}, which began "
                    f"at {a.start} after b finished at {f}",
                    {**w, "case": "follows", "a": a.tid}))
            if before < after:
                a = tasks[before]
                if k < _seq_of(a.written) - 1:
                    violations.append(Violation(
                        "serialization", b,
                        f"write-collect {a.tid} of {r} began during b; b returned "
                        f"{v!r}, older than the value it overwrote",
                        {**w, "case": "overlaps", "a": a.tid}))
    return violations


# -- snapshot atomicity ------------------------------------------------------

def snapshot_value(payload: Any) -> Any:
    """Snapshot register value inside a write-collect payload, for the layout
    ``payload.value.data.value`` written by the snapshot layer."""
    if payload is BOTTOM:
        return BOTTOM
    cell = payload.value.data
    return BOTTOM if cell is None else cell.value


def snapshot_vector_at(trace: ExecutionTrace, t: int,
                       value_of: Callable[[Any], Any] = snapshot_value) -> tuple:
    return tuple(value_of(register_contents_at(trace, r, t)) for r in range(trace.n))


def witness_instant(trace: ExecutionTrace, vector: tuple, s: int, f: int,
                    value_of: Callable[[Any], Any] = snapshot_value) -> int | None:
    """First instant in ``[s, f]`` at which the logical registers equal
    ``vector``; the contents only change at writes, so those are the only
    candidate instants besides ``s``."""
    instants = {s}
    for r in range(trace.n):
        times = trace._times[r]
        lo = bisect.bisect_right(times, s)
        hi = bisect.bisect_right(times, f)
        instants.update(times[lo:hi])
    for t in sorted(instants):
        if snapshot_vector_at(trace, t, value_of) == tuple(vector):
            return t
    return None


def check_snapshot_atomicity(trace: ExecutionTrace, kind: str = "scan-update",
                             value_of: Callable[[Any], Any] = snapshot_value) -> list[Violation]:
    violations = []
    for task in trace.tasks:
        if task.kind != kind or task.finish is None:
            continue
        vector = task.result
        if not isinstance(vector, tuple) or len(vector) != trace.n:
            raise MalformedTrace(f"scan-update task {task.tid} has no {trace.n}-entry result")
        if witness_instant(trace, vector, task.start, task.finish, value_of) is None:
            violations.append(Violation(
                "snapshot-atomicity", task,
                f"no instant in [{task.start},{task.finish}] shows {list(vector)!r}",
                {"start": task.start, "finish": task.finish, "returned": vector}))
    return violations


# -- advance-collect ---------------------------------------------------------

def round_value(payload: Any) -> int:
    """Round number published in a write-collect payload (0 if unwritten)."""
    if payload is BOTTOM:
        return 0
    data = payload.value.data
    return 0 if data is None else data


def check_advance_collect(trace: ExecutionTrace, kind: str = "advance-collect",
                          value_of: Callable[[Any], Any] = round_value) -> list[Violation]:
    violations = []
    last = [0] * trace.n
    for task in trace.tasks:
        if task.kind != kind or task.start is None:
            continue
        rnd = task.info.get("round")
        if rnd != last[task.owner] + 1:
            violations.append(Violation(
                "advance-round", task,
                f"process {task.owner} advanced from round {last[task.owner]} to {rnd}",
                {"previous": last[task.owner], "round": rnd}))
        last[task.owner] = rnd if isinstance(rnd, int) else last[task.owner]
        if task.finish is None:
            continue
        vector = task.result
        if not isinstance(vector, tuple) or len(vector) != trace.n:
            raise MalformedTrace(f"advance-collect task {task.tid} has no round vector")
        for q, got in enumerate(vector):
            present = values_during(trace, q, task.start, task.finish, value_of)
            if not any(got == w for _, w in present):
                violations.append(Violation(
                    "advance-freshness", task,
                    f"reported round {got} for process {q}, not held during "
                    f"[{task.start},{task.finish}]",
                    {"register": q, "start": task.start, "finish": task.finish,
                     "returned": got}))
    return violations


# -- witness replay ----------------------------------------------------------

def recheck(trace: ExecutionTrace, violation: Violation,
            value_of: Callable[[Any], Any] | None = None) -> bool:
    """True iff the violation's witness still fails against ``trace``.
    ``value_of`` must match the one the checker used, if it was not the
    default."""
    w = violation.witness
    if violation.predicate == "freshness":
        present = values_during(trace, w["register"], w["start"], w["finish"],
                                value_of or logical)
        return not any(w["returned"] == v for _, v in present)
    if violation.predicate == "advance-freshness":
        present = values_during(trace, w["register"], w["start"], w["finish"],
                                value_of or round_value)
        return not any(w["returned"] == v for _, v in present)
    if violation.predicate == "snapshot-atomicity":
        return witness_instant(trace, w["returned"], w["start"], w["finish"],
                               value_of or snapshot_value) is None
    if violation.predicate == "advance-round":
        return w["round"] != w["previous"] + 1
    if violation.predicate == "serialization":
        b = trace.tasks[w["b"]]
        return any(v.witness.get("register") == w["register"]
                   and v.witness.get("case") == w["case"]
                   for v in check_write_collect_serialization(trace)
                   if v.task.tid == b.tid)
    raise ValueError(f"unknown predicate {violation.predicate!r}")
