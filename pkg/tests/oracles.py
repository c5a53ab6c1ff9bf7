"""Slow, direct re-implementations used as test oracles.

Nothing here shares code with the package beyond reading trace fields; each
quantity is recomputed straight from its definition by scanning.
"""

from arena.sim import BOTTOM

COLLECTS = ("collect", "write-collect")


def _collects(trace):
    return [t for t in trace.tasks if t.kind in COLLECTS and t.start is not None]


def _collect_at(trace, pid, t):
    """p's collect with start <= t <= finish (finish open = until the end)."""
    for task in _collects(trace):
        if task.owner != pid:
            continue
        end = len(trace) - 1 if task.finish is None else task.finish
        if task.start <= t <= end:
            return task
    return None


def reference_tags(trace):
    """Returns (useful, extraneous) as sets of (p, t)."""
    n, L = trace.n, len(trace)
    slots = trace.schedule.slots
    useful, extr = set(), set()
    for p in range(n):
        for t in range(L):
            q = slots[t]
            if q == p:
                continue
            mine = _collect_at(trace, p, t)
            if mine is not None:
                theirs = _collect_at(trace, q, t)
                if theirs is not None and theirs.start < mine.start:
                    useful.add((p, t))
                continue
            # p is between collects: find the whole gap around t.
            lo = t
            while lo > 0 and _collect_at(trace, p, lo - 1) is None:
                lo -= 1
            hi = t
            while hi < L - 1 and _collect_at(trace, p, hi + 1) is None:
                hi += 1
            qs = [u for u in range(lo, hi + 1) if slots[u] == q]
            if t in (qs[0], qs[-1]):
                extr.add((p, t))
    return useful, extr


def reference_latency(trace):
    """(CL, PL) by scanning every instant."""
    L = len(trace)
    collects = _collects(trace)
    pl = max((c.ops for c in collects), default=0)
    cl = 0
    for t in range(L):
        total = 0
        for c in collects:
            end = L - 1 if c.finish is None else c.finish
            if c.start <= t <= end:
                total += sum(1 for u in range(t, end + 1) if trace.schedule.slots[u] == c.owner)
        cl = max(cl, total)
    return cl, pl


def reference_opt_upper(n, slots):
    if n == 1:
        return len(slots)
    total, i = 0, 0
    while i < len(slots):
        total += len(set(slots[i:i + n - 1]))
        i += n - 1
    return total


def contents(trace, reg, t):
    """Register contents after step t, by a linear scan of the ops."""
    value = BOTTOM
    for op in trace.ops[:t + 1]:
        if op.kind == "write" and op.target == reg:
            value = op.value
    return value


def fresh(trace, reg, s, f, returned, value_of):
    return any(value_of(contents(trace, reg, t)) == returned for t in range(s, f + 1))


def snapshot_witness(trace, vector, s, f, value_of):
    for t in range(s, f + 1):
        if tuple(value_of(contents(trace, r, t)) for r in range(trace.n)) == tuple(vector):
            return t
    return None
