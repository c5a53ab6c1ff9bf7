"""Hand-built traces for checker tests."""

from arena.algorithms import CollectProcess, TrivialCell, logical
from arena.sim import BOTTOM, Begin, End, Read, Schedule, Write, run_simulation


def scripted(scripts):
    """Factory whose process ``pid`` yields ``scripts[pid]`` (Read, Write,
    Begin, End items) and then idles reading its own register."""

    class Scripted:
        def __init__(self, pid, n):
            self.pid = pid

        def program(self, requests):
            for item in scripts.get(self.pid, ()):
                yield item
            while True:
                yield Read(self.pid)

    return Scripted


def run_script(n, scripts, slots):
    return run_simulation(scripted(scripts), Schedule(n, tuple(slots)))


def identity(v):
    return v


class StaleCollect(CollectProcess):
    """Broken on purpose: after its first collect it returns the first
    vector again, reading only its own register."""

    name = "stale"

    def __init__(self, pid, n):
        super().__init__(pid, n)
        self.cached = None

    def _collect(self, value):
        n, me = self.n, self.pid
        yield Write(TrivialCell(value, self.wseq))
        if self.cached is None:
            out = [BOTTOM] * n
            out[me] = value
            for k in range(1, n):
                r = (me + k) % n
                out[r] = logical((yield Read(r)))
            self.cached = tuple(out)
            return self.cached
        for _ in range(n - 1):
            yield Read(me)
        return tuple(value if r == me else v for r, v in enumerate(self.cached))
