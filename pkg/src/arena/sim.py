"""Deterministic step-by-step simulation of n processes over n atomic
single-writer multi-reader registers.

Processes are generators.  A process yields register operations
(:class:`Read` / :class:`Write`) and task markers (:class:`Begin` /
:class:`End`).  Markers cost no time; each scheduled slot executes exactly
one register operation.  After executing an operation the simulator advances
the process up to its next pending register operation, so a task's final
operation is recognised at the very step it executes.

Time convention: step ``t`` is the ``t``-th slot of the schedule (0-based).
A write at step ``t`` is visible to reads at steps ``>= t + 1``, and
``register_contents_at(trace, r, t)`` is the register state *after* step
``t``.
"""

from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Sequence


class ArenaError(Exception):
    """Base class for simulator and harness errors."""


class ConfigurationError(ArenaError):
    pass


class ModelViolation(ArenaError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class MalformedTrace(ArenaError):
    pass


class _Bottom:
    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "⊥"

    def __reduce__(self):
        return (_Bottom, ())


#: Initial value of every register.
BOTTOM = _Bottom()


# -- operations and markers --------------------------------------------------

class Read:
    __slots__ = ("reg",)

    def __init__(self, reg: int):
        self.reg = reg

    def __repr__(self) -> str:
        return f"Read({self.reg})"


class Write:
    """Write to the caller's own register (``reg`` may only name it)."""

    __slots__ = ("value", "reg")

    def __init__(self, value: Any, reg: int | None = None):
        self.value = value
        self.reg = reg

    def __repr__(self) -> str:
        return f"Write({self.value!r})"


class Begin:
    """Opens a task; its initial operation is the process's next register op."""

    __slots__ = ("kind", "written", "info")

    def __init__(self, kind: str, written: Any = None, info: dict | None = None):
        self.kind = kind
        self.written = written
        self.info = info


class End:
    """Closes the innermost open task at the process's last executed op."""

    __slots__ = ("result", "info")

    def __init__(self, result: Any = None, info: dict | None = None):
        self.result = result
        self.info = info


# -- schedules and request streams -------------------------------------------

@dataclass(frozen=True)
class Schedule:
    n: int
    slots: tuple[int, ...]

    def __post_init__(self):
        if self.n <= 0:
            raise ConfigurationError(f"process count must be positive, got {self.n}")
        for t, pid in enumerate(self.slots):
            if not 0 <= pid < self.n:
                raise ConfigurationError(
                    f"slot {t} names process {pid}, outside [0, {self.n})")

    def __len__(self) -> int:
        return len(self.slots)

    def __iter__(self) -> Iterator[int]:
        return iter(self.slots)

    def __add__(self, other: "Schedule") -> "Schedule":
        if other.n != self.n:
            raise ConfigurationError("cannot concatenate schedules over different n")
        return Schedule(self.n, self.slots + other.slots)

    @classmethod
    def of(cls, n: int, slots: Iterable[int]) -> "Schedule":
        return cls(n, tuple(slots))


class RequestStream:
    """Infinite per-process task sequences.

    ``rule`` is either a task kind (every request is that kind) or a callable
    ``(pid, index) -> kind``.
    """

    RULES = {
        "all-collects": "collect",
        "all-write-collects": "write-collect",
        "all-scan-updates": "scan-update",
        "all-advance-collects": "advance-collect",
    }

    def __init__(self, rule: str | Callable[[int, int], str] = "collect"):
        if isinstance(rule, str):
            kind = self.RULES.get(rule, rule)
            self._rule = lambda pid, i: kind
            self.name = rule
        else:
            self._rule = rule
            self.name = getattr(rule, "__name__", "custom")

    @classmethod
    def named(cls, name: str) -> "RequestStream":
        if name not in cls.RULES:
            raise ConfigurationError(
                f"unknown request rule {name!r}; choose from {sorted(cls.RULES)}")
        return cls(name)

    def for_process(self, pid: int) -> Iterator[str]:
        i = 0
        while True:
            yield self._rule(pid, i)
            i += 1


# -- trace records -----------------------------------------------------------

@dataclass(frozen=True)
class RegisterOp:
    time: int
    pid: int
    kind: str  # "read" | "write"
    target: int
    value: Any  # value written, or value returned by the read


@dataclass
class TaskRecord:
    tid: int
    owner: int
    kind: str
    start: int | None = None
    finish: int | None = None
    parent: int | None = None
    written: Any = None
    result: Any = None
    info: dict = field(default_factory=dict)
    ops: int = 0

    @property
    def finished(self) -> bool:
        return self.finish is not None


@dataclass(frozen=True, eq=False)
class ExecutionTrace:
    n: int
    schedule: Schedule
    ops: tuple[RegisterOp, ...]
    tasks: tuple[TaskRecord, ...]
    histories: tuple[tuple[tuple[int, Any], ...], ...]

    def __post_init__(self):
        times = tuple(tuple(t for t, _ in h) for h in self.histories)
        object.__setattr__(self, "_times", times)

    def __len__(self) -> int:
        return len(self.ops)

    def tasks_of(self, *kinds: str) -> list[TaskRecord]:
        if not kinds:
            return list(self.tasks)
        return [task for task in self.tasks if task.kind in kinds]

    def steps_of(self, pid: int) -> list[int]:
        return [t for t, p in enumerate(self.schedule.slots) if p == pid]

    def children(self, task: TaskRecord) -> list[TaskRecord]:
        return [c for c in self.tasks if c.parent == task.tid]

    def export_ops(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "pid", "kind", "reg", "value"])
        for op in self.ops:
            w.writerow([op.time, op.pid, op.kind, op.target, encode(op.value)])
        return buf.getvalue()

    def export_tasks(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["owner", "kind", "start", "finish"])
        for task in self.tasks:
            w.writerow([task.owner, task.kind,
                        "" if task.start is None else task.start,
                        "" if task.finish is None else task.finish])
        return buf.getvalue()


def encode(value: Any) -> str:
    """Stable text form of a register payload."""
    if isinstance(value, dict):
        return "{" + ",".join(f"{k}:{encode(v)}" for k, v in sorted(value.items())) + "}"
    return repr(value)


# -- the simulator -----------------------------------------------------------

ProcessFactory = Callable[[int, int], Any]


class Simulator:
    """Incremental simulator; :func:`run_simulation` drives it over a schedule.

    The adaptive adversary gets the simulator itself as the system state:
    ``registers``, ``processes`` (with their local attributes) and the trace
    so far are all visible.
    """

    def __init__(self, factory: ProcessFactory, n: int,
                 requests: RequestStream | None = None):
        if n <= 0:
            raise ConfigurationError(f"process count must be positive, got {n}")
        self.n = n
        self.requests = requests or RequestStream()
        self.registers: list[Any] = [BOTTOM] * n
        self.histories: list[list[tuple[int, Any]]] = [[] for _ in range(n)]
        self.processes = [factory(pid, n) for pid in range(n)]
        self.ops: list[RegisterOp] = []
        self.slots: list[int] = []
        self.tasks: list[TaskRecord] = []
        # Per-process stack of open tasks and the pending register op.
        self._open: list[list[TaskRecord]] = [[] for _ in range(n)]
        self._pending: list[Any] = [None] * n
        self._gens = []
        self._last_op: list[int | None] = [None] * n
        for pid, proc in enumerate(self.processes):
            gen = proc.program(self.requests.for_process(pid))
            self._gens.append(gen)
            self._advance(pid, None)

    @property
    def time(self) -> int:
        return len(self.ops)

    def _advance(self, pid: int, result: Any) -> None:
        gen = self._gens[pid]
        msg = result
        while True:
            try:
                item = gen.send(msg)
            except StopIteration:
                raise ModelViolation(f"process {pid} ran out of work", self.time)
            msg = None
            if isinstance(item, (Read, Write)):
                self._pending[pid] = item
                return
            if isinstance(item, Begin):
                stack = self._open[pid]
                task = TaskRecord(
                    tid=len(self.tasks), owner=pid, kind=item.kind,
                    parent=stack[-1].tid if stack else None,
                    written=item.written, info=dict(item.info or {}))
                self.tasks.append(task)
                stack.append(task)
            elif isinstance(item, End):
                stack = self._open[pid]
                if not stack:
                    raise ModelViolation(f"process {pid} closed a task it never opened",
                                         self.time)
                task = stack.pop()
                if task.start is None:
                    raise ModelViolation(
                        f"process {pid} closed {task.kind} task without any operation",
                        self.time)
                task.finish = self._last_op[pid]
                task.result = item.result
                if item.info:
                    task.info.update(item.info)
            else:
                raise ModelViolation(f"process {pid} yielded {item!r}", self.time)

    def step(self, pid: int) -> RegisterOp:
        if not 0 <= pid < self.n:
            raise ConfigurationError(f"process {pid} outside [0, {self.n})")
        t = len(self.ops)
        op = self._pending[pid]
        if isinstance(op, Write):
            if op.reg is not None and op.reg != pid:
                raise ModelViolation(
                    f"process {pid} wrote register {op.reg} it does not own", t)
            value = op.value
            self.registers[pid] = value
            self.histories[pid].append((t, value))
            rec = RegisterOp(t, pid, "write", pid, value)
            result = None
        else:
            reg = op.reg
            if not 0 <= reg < self.n:
                raise ModelViolation(f"process {pid} read register {reg}", t)
            value = self.registers[reg]
            rec = RegisterOp(t, pid, "read", reg, value)
            result = value
        self.ops.append(rec)
        self.slots.append(pid)
        self._last_op[pid] = t
        for task in self._open[pid]:
            if task.start is None:
                task.start = t
            task.ops += 1
        self._advance(pid, result)
        return rec

    # -- state queries used by adversaries --------------------------------

    def pending(self, pid: int):
        return self._pending[pid]

    def in_task(self, pid: int) -> bool:
        """True iff ``pid`` has a task whose initial operation has executed
        but whose final operation has not."""
        return any(task.start is not None for task in self._open[pid])

    def open_tasks(self, pid: int) -> list[TaskRecord]:
        return list(self._open[pid])

    def trace(self) -> ExecutionTrace:
        tasks = tuple(TaskRecord(**{**t.__dict__, "info": dict(t.info)})
                      for t in self.tasks)
        return ExecutionTrace(
            n=self.n,
            schedule=Schedule(self.n, tuple(self.slots)),
            ops=tuple(self.ops),
            tasks=tasks,
            histories=tuple(tuple(h) for h in self.histories),
        )


def run_simulation(factory: ProcessFactory, schedule: Schedule | Sequence[int],
                   requests: RequestStream | str | None = None,
                   n: int | None = None) -> ExecutionTrace:
    """Run ``factory``'s processes under ``schedule`` and return the trace."""
    if not isinstance(schedule, Schedule):
        if n is None:
            raise ConfigurationError("a bare slot sequence needs an explicit n")
        schedule = Schedule.of(n, schedule)
    elif n is not None and n != schedule.n:
        raise ConfigurationError(f"schedule is over {schedule.n} processes, not {n}")
    if isinstance(requests, str):
        requests = RequestStream(requests)
    sim = Simulator(factory, schedule.n, requests)
    for pid in schedule.slots:
        sim.step(pid)
    return sim.trace()


def register_contents_at(trace: ExecutionTrace, reg: int, t: int) -> Any:
    """Value of register ``reg`` after step ``t`` (``BOTTOM`` if unwritten)."""
    if not 0 <= reg < trace.n:
        raise IndexError(f"register {reg} outside [0, {trace.n})")
    times = trace._times[reg]
    i = bisect.bisect_right(times, t)
    return trace.histories[reg][i - 1][1] if i else BOTTOM


def count_done(trace: ExecutionTrace, layer: str | Iterable[str] | None = None):
    """Completed tasks matching ``layer``: ``(per_process, total)``."""
    if isinstance(layer, str):
        kinds = {layer}
    elif layer is None:
        kinds = None
    else:
        kinds = set(layer)
    per = [0] * trace.n
    for task in trace.tasks:
        if task.finish is not None and (kinds is None or task.kind in kinds):
            per[task.owner] += 1
    return per, sum(per)
