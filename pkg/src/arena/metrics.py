"""Progress measures and latency bounds for collect traces, with executable
validators for each step of the throughput argument.

Index conventions: per-step arrays have one entry per executed step
``t = 0 .. L-1``.  Cumulative series have ``L + 1`` entries; entry ``k``
covers the first ``k`` steps, so ``series[..., 0]`` is the initial state and
a collect finishing at step ``t`` is accounted for at entry ``t + 1``.

Validators compare exact rationals (integers or :class:`fractions.Fraction`),
never floats.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .objects import COLLECT_KINDS
from .sim import ArenaError, ExecutionTrace, Schedule


class UndefinedProfile(ArenaError):
    """No finished collect to calibrate CL/PL against."""


@dataclass(frozen=True)
class LatencyProfile:
    collective: int
    private: int

    @property
    def calibration(self) -> int:
        return self.collective


@dataclass(frozen=True)
class StepTags:
    useful: np.ndarray       # bool (n, L): step t useful for p
    extraneous: np.ndarray   # bool (n, L): step t extraneous for p

    @property
    def counted(self) -> np.ndarray:
        return self.useful | self.extraneous


@dataclass(frozen=True)
class ProgressSeries:
    n: int
    profile: LatencyProfile
    M: np.ndarray  # int (n, L+1)
    N: np.ndarray  # int (n, L+1)

    @property
    def x(self) -> int:
        """Denominator of the M term: CL + 2(n - 1)."""
        return self.profile.collective + 2 * (self.n - 1)

    @property
    def F(self) -> np.ndarray:
        return 0.5 * (self.M / self.x + self.N / self.profile.private)

    def exact_F(self, p: int, k: int) -> Fraction:
        return Fraction(int(self.M[p, k]), 2 * self.x) + \
            Fraction(int(self.N[p, k]), 2 * self.profile.private)


@dataclass(frozen=True)
class Validation:
    ok: bool
    witness: dict | None = None
    checked: int = 0

    def __bool__(self) -> bool:
        return self.ok


# -- collect intervals -------------------------------------------------------

def collect_spans(trace: ExecutionTrace, kinds=COLLECT_KINDS) -> list[tuple[int, int, int | None, int]]:
    """``(owner, start, finish, ops)`` of every started collect."""
    return [(task.owner, task.start, task.finish, task.ops)
            for task in trace.tasks if task.kind in kinds and task.start is not None]


def _collect_start_per_step(trace: ExecutionTrace, kinds) -> np.ndarray:
    """For each step, the start of the collect that step belongs to (-1 if
    the step belongs to no collect)."""
    L = len(trace)
    out = np.full(L, -1, dtype=np.int64)
    sched = np.asarray(trace.schedule.slots, dtype=np.int64)
    for owner, s, f, _ in collect_spans(trace, kinds):
        hi = L if f is None else f + 1
        seg = out[s:hi]
        seg[sched[s:hi] == owner] = s
    return out


def _cover(trace: ExecutionTrace, p: int, kinds) -> np.ndarray:
    """Start of p's collect in progress at each step, -1 where p sits
    between collects."""
    L = len(trace)
    cover = np.full(L, -1, dtype=np.int64)
    for owner, s, f, _ in collect_spans(trace, kinds):
        if owner == p:
            cover[s:L if f is None else f + 1] = s
    return cover


# -- latency -----------------------------------------------------------------

def latency_profile(trace: ExecutionTrace, kinds=COLLECT_KINDS) -> LatencyProfile:
    """Measured collective and private latency.

    CL is the maximum over t of the number of operations, at steps ``>= t``,
    of collects in progress at t.  PL is the most operations one collect
    took.  Unfinished collects count with the operations they executed.
    """
    L = len(trace)
    diff = np.zeros(L + 1, dtype=np.int64)
    private = 0
    steps = [[] for _ in range(trace.n)]
    for t, pid in enumerate(trace.schedule.slots):
        steps[pid].append(t)
    pos = [np.asarray(s, dtype=np.int64) for s in steps]
    for owner, s, f, ops in collect_spans(trace, kinds):
        private = max(private, ops)
        own = pos[owner]
        lo = np.searchsorted(own, s)
        hi = np.searchsorted(own, L if f is None else f, side="right")
        times = own[lo:hi]
        diff[s] += len(times)
        np.subtract.at(diff, times + 1, 1)
    collective = int(np.cumsum(diff[:L]).max()) if L else 0
    return LatencyProfile(collective, private)


# -- step classification -----------------------------------------------------

def classify_steps(trace: ExecutionTrace, kinds=COLLECT_KINDS) -> StepTags:
    """Tag every step as useful and/or extraneous for every process.

    Useful for p: q != p steps while p is inside a collect, as part of a
    collect of q that started before p's.  Extraneous for p: the first and
    the last step of each q != p inside one interval where p is between
    collects (including the stretch before p's first collect).
    """
    n, L = trace.n, len(trace)
    sched = np.asarray(trace.schedule.slots, dtype=np.int64)
    cstart = _collect_start_per_step(trace, kinds)
    useful = np.zeros((n, L), dtype=bool)
    extr = np.zeros((n, L), dtype=bool)
    slots = trace.schedule.slots
    for p in range(n):
        cover = _cover(trace, p, kinds)
        inside = cover >= 0
        useful[p] = inside & (sched != p) & (cstart >= 0) & (cstart < cover)
        gap = ~inside
        if not gap.any():
            continue
        # Maximal runs of gap steps.
        edges = np.flatnonzero(np.diff(np.concatenate(([0], gap.view(np.int8), [0]))))
        row = extr[p]
        for g0, g1 in zip(edges[::2], edges[1::2]):
            first: dict[int, int] = {}
            last: dict[int, int] = {}
            for t in range(g0, g1):
                q = slots[t]
                if q == p:
                    continue
                if q not in first:
                    first[q] = t
                last[q] = t
            for q, t in first.items():
                row[t] = True
                row[last[q]] = True
    return StepTags(useful, extr)


# -- progress ----------------------------------------------------------------

def compute_progress(trace: ExecutionTrace, profile: LatencyProfile,
                     tags: StepTags | None = None, kinds=COLLECT_KINDS) -> ProgressSeries:
    if profile.private <= 0 or profile.collective <= 0:
        raise UndefinedProfile(
            f"CL={profile.collective}, PL={profile.private}: no collect to calibrate")
    n, L = trace.n, len(trace)
    tags = tags if tags is not None else classify_steps(trace, kinds)
    M = np.zeros((n, L + 1), dtype=np.int64)
    M[:, 1:] = np.cumsum(tags.counted, axis=1)
    sched = np.asarray(trace.schedule.slots, dtype=np.int64)
    N = np.zeros((n, L + 1), dtype=np.int64)
    for p in range(n):
        N[p, 1:] = np.cumsum(sched == p)
    return ProgressSeries(n, profile, M, N)


def interval_optimal_m(n: int, collective: int, private: int) -> float:
    """Window activity minimising the per-window progress ratio."""
    return math.sqrt(2 * (n - 1) * (collective + 2 * (n - 1)) / private)


def interval_ratio_bound(n: int, collective: int, private: int) -> float:
    """Lower bound on per-window progress per champion collect."""
    x = collective + 2 * (n - 1)
    return math.sqrt((n - 1) / (2 * private * x)) - 1 / (4 * x)


# -- champion bound ----------------------------------------------------------

def windows(length: int, n: int) -> list[tuple[int, int]]:
    """Consecutive ``[k1, k2)`` step windows of n - 1 steps; a partial final
    window is kept."""
    w = max(n - 1, 1)
    return [(k, min(k + w, length)) for k in range(0, length, w)]


def _slots(obj) -> tuple[int, tuple[int, ...]]:
    if isinstance(obj, ExecutionTrace):
        return obj.n, obj.schedule.slots
    if isinstance(obj, Schedule):
        return obj.n, obj.slots
    raise TypeError(f"expected a trace or schedule, got {type(obj).__name__}")


def opt_upper_bound(obj) -> int:
    """Upper bound on collects any correct algorithm completes under the
    schedule: distinct active processes summed over (n-1)-step windows.

    With n = 1 a collect is a single write, so every step may complete one.
    """
    n, slots = _slots(obj)
    if n == 1:
        return len(slots)
    return sum(len(set(slots[a:b])) for a, b in windows(len(slots), n))


# -- validators --------------------------------------------------------------

def completions(trace: ExecutionTrace, kinds=COLLECT_KINDS) -> list[list[int]]:
    """Per process, the sorted finish steps of its completed collects."""
    out = [[] for _ in range(trace.n)]
    for task in trace.tasks:
        if task.kind in kinds and task.finish is not None:
            out[task.owner].append(task.finish)
    for lst in out:
        lst.sort()
    return out


def validate_lemma_progress(trace: ExecutionTrace, series: ProgressSeries,
                            kinds=COLLECT_KINDS) -> Validation:
    """At each completion by p at step t: completed(p) >= F_p(t+1) - 1."""
    x, pl = series.x, series.profile.private
    checked = 0
    for p, finishes in enumerate(completions(trace, kinds)):
        for i, t in enumerate(finishes, start=1):
            m, nn = int(series.M[p, t + 1]), int(series.N[p, t + 1])
            checked += 1
            # i >= F - 1  <=>  2*x*pl*(i + 1) >= m*pl + nn*x
            if 2 * x * pl * (i + 1) < m * pl + nn * x:
                return Validation(False, {"process": p, "step": t, "completed": i,
                                          "F": float(series.exact_F(p, t + 1))}, checked)
    return Validation(True, checked=checked)


def validate_progress_per_collect(trace: ExecutionTrace, series: ProgressSeries,
                                  kinds=COLLECT_KINDS) -> Validation:
    """F_p rises by at most 1 between successive completions of p."""
    x, pl = series.x, series.profile.private
    checked = 0
    for p, finishes in enumerate(completions(trace, kinds)):
        prev = 0
        for t in finishes:
            dm = int(series.M[p, t + 1] - series.M[p, prev])
            dn = int(series.N[p, t + 1] - series.N[p, prev])
            checked += 1
            if dm * pl + dn * x > 2 * x * pl:
                return Validation(False, {"process": p, "from": prev, "to": t + 1,
                                          "dM": dm, "dN": dn}, checked)
            prev = t + 1
    return Validation(True, checked=checked)


def validate_lemma_rises(trace: ExecutionTrace, series: ProgressSeries,
                         spans: Sequence[tuple[int, int]] | None = None) -> Validation:
    """Over each window ``[k1, k2)``: sum_p dM_p >= C(m, 2), with m the
    number of distinct processes stepping in the window."""
    slots = trace.schedule.slots
    spans = windows(len(trace), trace.n) if spans is None else spans
    total = series.M.sum(axis=0)
    for k1, k2 in spans:
        m = len(set(slots[k1:k2]))
        rise = int(total[k2] - total[k1])
        if rise < m * (m - 1) // 2:
            return Validation(False, {"window": (k1, k2), "m": m, "rise": rise}, len(spans))
    return Validation(True, checked=len(spans))


def validate_lemma_champion(trace: ExecutionTrace, kinds=COLLECT_KINDS) -> Validation:
    """Completed collects per (n-1)-step window never exceed the number of
    distinct active processes."""
    slots = trace.schedule.slots
    spans = windows(len(trace), trace.n)
    finish_count = np.zeros(len(trace) + 1, dtype=np.int64)
    for lst in completions(trace, kinds):
        for t in lst:
            finish_count[t + 1] += 1
    cum = np.cumsum(finish_count)
    if trace.n == 1:
        return Validation(True, checked=0)
    for k1, k2 in spans:
        done = int(cum[k2] - cum[k1])
        m = len(set(slots[k1:k2]))
        if done > m:
            return Validation(False, {"window": (k1, k2), "m": m, "completed": done},
                              len(spans))
    return Validation(True, checked=len(spans))


@dataclass(frozen=True)
class BoundCheck:
    status: str  # "pass" | "fail" | "inconclusive"
    progress: float
    required: float
    bracket: float
    k_hat: float | None

    @property
    def ok(self) -> bool:
        return self.status == "pass"


def throughput_bound_check(trace: ExecutionTrace, series: ProgressSeries,
                           opt_upper: int) -> BoundCheck:
    """sum_p F_p(T) >= opt_upper * bracket, decided exactly.

    ``bracket`` is the per-window progress bound; its inverse is the
    competitive ratio the run certifies.  A non-positive bracket makes the
    check inconclusive.
    """
    n, L = series.n, series.M.shape[1] - 1
    x, pl = series.x, series.profile.private
    a = Fraction(n - 1, 2 * pl * x)
    b = Fraction(1, 4 * x)
    bracket = math.sqrt(a) - float(b)
    lhs = sum((series.exact_F(p, L) for p in range(n)), Fraction(0))
    if a <= b * b:
        return BoundCheck("inconclusive", float(lhs), float("nan"), bracket, None)
    # lhs >= U*(sqrt(a) - b)  <=>  (lhs + U*b)^2 >= U^2 * a
    u = opt_upper
    ok = (lhs + u * b) ** 2 >= u * u * a
    return BoundCheck("pass" if ok else "fail", float(lhs), u * bracket, bracket,
                      1 / bracket)


# -- ratio reports -----------------------------------------------------------

@dataclass(frozen=True)
class RatioReport:
    done: int
    opt_upper: int
    opt_lower: int
    c: int
    profile: LatencyProfile | None = None

    @property
    def estimated_ratio(self) -> float:
        return self.opt_upper / (self.done + self.c)


def ratio_report(trace: ExecutionTrace, champion_done: Iterable[int] = (),
                 kinds=COLLECT_KINDS) -> RatioReport:
    """Done count against the window bound; ``champion_done`` are done counts
    of other correct algorithms on the same schedule (the best is the lower
    surrogate for the optimum).  The additive constant is n."""
    done = sum(len(c) for c in completions(trace, kinds))
    opt_lb = max([done, *champion_done])
    profile = latency_profile(trace, kinds)
    return RatioReport(done, opt_upper_bound(trace), opt_lb, trace.n, profile)


METRICS_HEADER = ["algo", "n", "schedule", "seed", "done", "opt_ub", "opt_lb",
                  "CL", "PL", "k_hat"]


def metrics_row(algo: str, n: int, schedule: str, seed, report: RatioReport) -> list:
    prof = report.profile
    return [algo, n, schedule, "" if seed is None else seed, report.done,
            report.opt_upper, report.opt_lower,
            prof.collective if prof else "", prof.private if prof else "",
            f"{report.estimated_ratio:.6f}"]


def export_metrics(rows: Iterable[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()
