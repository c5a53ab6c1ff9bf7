"""Collect / write-collect algorithms expressed as process generators.

Every algorithm writes ``Stamped`` values: ``(pid, seq)`` is unique per
write-collect, so checkers can compare returned values against register
histories by equality.  A register payload always exposes the logical
write-collect value as ``payload.value``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping

from .sim import BOTTOM, Begin, ConfigurationError, End, ModelViolation, Read, Write


@dataclass(frozen=True)
class Stamped:
    pid: int
    seq: int
    data: Any = None

    def __repr__(self) -> str:
        if self.data is None:
            return f"v{self.pid}.{self.seq}"
        return f"v{self.pid}.{self.seq}[{self.data!r}]"


def logical(payload: Any) -> Any:
    """The write-collect value held by a raw register payload."""
    return BOTTOM if payload is BOTTOM else payload.value


class CollectProcess:
    """Shared request loop; subclasses implement ``_collect``."""

    name = "abstract"

    def __init__(self, pid: int, n: int):
        self.pid = pid
        self.n = n
        self.wseq = 0

    def program(self, requests):
        for kind in requests:
            if kind not in ("collect", "write-collect"):
                raise ModelViolation(f"{self.name} cannot perform {kind!r} tasks")
            yield from self.write_collect(None, kind)

    def write_collect(self, data: Any = None, kind: str = "write-collect"):
        """One write-collect; returns the tuple of values, one per register.

        The write rides on the collect's initial write, so a plain collect is
        the same task with ``data=None``.
        """
        self.wseq += 1
        value = Stamped(self.pid, self.wseq, data)
        yield Begin(kind, written=value)
        vector = yield from self._collect(value)
        yield End(vector)
        return vector

    def _collect(self, value):  # pragma: no cover - abstract
        raise NotImplementedError
        yield


# -- trivial -----------------------------------------------------------------

@dataclass(frozen=True)
class TrivialCell:
    value: Stamped
    epoch: int

    def __repr__(self) -> str:
        return f"({self.value!r},e{self.epoch})"


class TrivialCollect(CollectProcess):
    """Write, then read the other n - 1 registers in rotation order."""

    name = "trivial"

    def _collect(self, value):
        n, me = self.n, self.pid
        yield Write(TrivialCell(value, self.wseq))
        out = [BOTTOM] * n
        out[me] = value
        for k in range(1, n):
            r = (me + k) % n
            cell = yield Read(r)
            out[r] = logical(cell)
        return tuple(out)


# -- cooperative collect with epoch certificates -----------------------------

@dataclass(frozen=True)
class EpochCertificate:
    """A direct read of ``source_register`` by ``reader``.

    ``observed_epochs[q]`` is the latest collect epoch of q that the reader
    had causally observed when it performed the read, so the read happened
    after q's write of that epoch.
    """

    reader: int
    observed_epochs: tuple[int, ...]
    read_value: Any
    source_register: int


@dataclass(frozen=True)
class CoopCell:
    value: Stamped
    epoch: int
    known: tuple[int, ...]
    view: tuple[EpochCertificate | None, ...]

    def __repr__(self) -> str:
        entries = ";".join(
            "-" if c is None else
            f"{c.read_value!r}@{c.reader}:{'.'.join(map(str, c.observed_epochs))}"
            for c in self.view)
        return (f"({self.value!r},e{self.epoch},k{'.'.join(map(str, self.known))},"
                f"[{entries}])")


class CoopCollect(CollectProcess):
    """Cooperative collect that adopts values other processes read for it.

    A collect increments the epoch and writes it together with the view
    gathered so far.  Reading q's register yields q's value directly plus q's
    view; a view entry is adopted iff its certificate shows the reader
    already knew our current epoch, which orders the certified read after
    our collect began.  Registers of recently active processes are read
    first, since their views are the ones likely to carry usable
    certificates.  Views are published only by the initial write, so a
    collect never takes more than n steps.
    """

    name = "coop"

    def __init__(self, pid: int, n: int):
        super().__init__(pid, n)
        self.epoch = 0
        self.known = [0] * n
        self.view: list[EpochCertificate | None] = [None] * n
        self.value: Stamped | None = None
        # Own epoch at which q's epoch was last seen to advance.
        self.seen_active = [-1] * n

    def _cell(self) -> CoopCell:
        return CoopCell(self.value, self.epoch, tuple(self.known), tuple(self.view))

    def _collect(self, value):
        n, me = self.n, self.pid
        self.epoch += 1
        self.known[me] = self.epoch
        self.value = value
        yield Write(self._cell())
        out: dict[int, Any] = {me: value}
        rotation = [(me + k) % n for k in range(1, n)]
        recent = self.epoch - 1
        order = ([q for q in rotation if self.seen_active[q] >= recent]
                 + [q for q in rotation if self.seen_active[q] < recent])
        for r in order:
            if r in out:
                continue
            cell = yield Read(r)
            self._absorb(r, cell, out)
            if len(out) == n:
                break
        return tuple(out[r] for r in range(n))

    def _absorb(self, r: int, cell: Any, out: dict[int, Any]) -> None:
        me, known = self.pid, self.known
        if cell is not BOTTOM:
            for q, e in enumerate(cell.known):
                if e > known[q]:
                    known[q] = e
                    self.seen_active[q] = self.epoch
            if cell.epoch > known[r]:
                known[r] = cell.epoch
                self.seen_active[r] = self.epoch
        value = logical(cell)
        direct = EpochCertificate(me, tuple(known), value, r)
        out[r] = value
        self._keep(r, direct)
        if cell is BOTTOM:
            return
        epoch = self.epoch
        for x, cert in enumerate(cell.view):
            if cert is None or x == me:
                continue
            if x not in out and cert.observed_epochs[me] >= epoch:
                out[x] = cert.read_value
            self._keep(x, cert)

    def _keep(self, x: int, cert: EpochCertificate) -> None:
        old = self.view[x]
        if old is None or sum(cert.observed_epochs) > sum(old.observed_epochs):
            self.view[x] = cert


# -- champion for the lower-bound schedule -----------------------------------

@dataclass(frozen=True)
class Gathered:
    """Vector a helper publishes: the timestamps it gathered first, then the
    register values it read afterwards."""

    stamps: tuple[int, ...]
    values: tuple[Any, ...]


@dataclass(frozen=True)
class ChampionCell:
    value: Stamped
    ts: int
    vector: Gathered | None = None

    def __repr__(self) -> str:
        if self.vector is None:
            return f"({self.value!r},ts{self.ts})"
        stamps = ".".join(map(str, self.vector.stamps))
        return f"({self.value!r},ts{self.ts},g{stamps},{list(self.vector.values)!r})"


class ChampionTimestamp(CollectProcess):
    """Timestamp-gathering collect driven by per-step role labels.

    ``roles`` maps this process's own step index to a label:

    * ``("ts",)`` write (or rewrite) the current timestamp;
    * ``("fetch", h)`` read helper ``h``'s register and adopt its vector if it
      gathered our current timestamp;
    * ``("help", block, pos, length, group)`` helper block: gather the
      group's timestamps, read every other register, publish at the last
      position and finish the collect there.

    Labels only choose *which* operation to take; every completion rule is
    justified by reads ordered after the collect's first write, so the
    algorithm is correct under any schedule.  Without labels it behaves like
    the trivial collect.
    """

    name = "champion-ts"

    def __init__(self, pid: int, n: int, roles: Mapping[int, tuple] | None = None):
        super().__init__(pid, n)
        self.roles = roles or {}
        self.steps = 0
        self.ts = 0
        self.value: Stamped | None = None
        self.published: Gathered | None = None
        self._block = None
        self._gather: list[int] = []
        self._reads: list[int] = []
        self._stamps: dict[int, int] = {}
        self._vals: dict[int, Any] = {}

    def _label(self):
        return self.roles.get(self.steps)

    def _enter_block(self, label) -> None:
        if label is None or label[0] != "help" or label[1] == self._block:
            return
        self._block = label[1]
        group = label[4]
        self._gather = [g for g in group if g != self.pid]
        self._reads = [(self.pid + k) % self.n for k in range(1, self.n)]
        self._stamps = {}
        self._vals = {}

    def _cell(self) -> ChampionCell:
        return ChampionCell(self.value, self.ts, self.published)

    def _collect(self, value):
        n, me = self.n, self.pid
        self.ts += 1
        self.value = value
        self._enter_block(self._label())
        helping = (self._label() or ("",))[0] == "help"
        yield Write(self._cell())
        self.steps += 1
        out: dict[int, Any] = {me: value}
        while True:
            label = self._label()
            self._enter_block(label)
            tag = label[0] if label else None
            if tag == "ts":
                yield Write(self._cell())
                self.steps += 1
            elif tag == "fetch":
                h = label[1]
                cell = yield Read(h)
                self.steps += 1
                out[h] = logical(cell)
                vec = None if cell is BOTTOM else cell.vector
                if vec is not None and vec.stamps[me] == self.ts:
                    for r, v in enumerate(vec.values):
                        if r != me:
                            out[r] = v
            elif tag == "help":
                helping = True
                pos, length = label[2], label[3]
                if self._gather:
                    g = self._gather.pop(0)
                    cell = yield Read(g)
                    self._stamps[g] = 0 if cell is BOTTOM else cell.ts
                    self._vals[g] = out[g] = logical(cell)
                elif self._reads:
                    r = self._reads.pop(0)
                    cell = yield Read(r)
                    self._vals[r] = out[r] = logical(cell)
                elif pos == length - 1:
                    stamps = tuple(self._stamps.get(q, 0) for q in range(n))
                    values = tuple(value if q == me else self._vals[q] for q in range(n))
                    self.published = Gathered(stamps, values)
                    yield Write(self._cell())
                    self.steps += 1
                    return tuple(out[r] for r in range(n))
                else:
                    cell = yield Read(me)
                self.steps += 1
            else:
                helping = False
                r = next((q for q in ((me + k) % n for k in range(1, n))
                          if q not in out), None)
                if r is None:
                    r = (me + 1) % n
                cell = yield Read(r)
                self.steps += 1
                out[r] = logical(cell)
            if not helping and len(out) == n:
                return tuple(out[r] for r in range(n))


def champion_factory(roles: Mapping[int, Mapping[int, tuple]] | None = None):
    """Factory for :class:`ChampionTimestamp` with per-process role tables."""
    roles = roles or {}

    def make(pid: int, n: int) -> ChampionTimestamp:
        return ChampionTimestamp(pid, n, roles.get(pid))

    make.algorithm_name = "champion-ts"
    return make


REGISTRY: dict[str, Callable[[int, int], CollectProcess]] = {
    "trivial": TrivialCollect,
    "coop": CoopCollect,
    "champion-ts": champion_factory(),
}


def get_algorithm(name: str):
    try:
        return REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown algorithm {name!r}; choose from {sorted(REGISTRY)}") from None
