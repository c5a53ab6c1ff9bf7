import pytest
from hypothesis import given, settings, strategies as st

from arena.algorithms import TrivialCollect, get_algorithm
from arena.sim import (BOTTOM, Begin, ConfigurationError, End, ModelViolation, Read,
                       RequestStream, Schedule, Write, count_done, register_contents_at,
                       run_simulation)


def schedules(max_n=5, max_len=200):
    return st.integers(1, max_n).flatmap(
        lambda n: st.lists(st.integers(0, n - 1), max_size=max_len).map(
            lambda slots: Schedule(n, tuple(slots))))


def test_two_process_example():
    tr = run_simulation(TrivialCollect, Schedule(2, (0, 1, 0)))
    assert [(op.pid, op.kind, op.target) for op in tr.ops] == [
        (0, "write", 0), (1, "write", 1), (0, "read", 1)]
    first = tr.tasks_of("collect")[0]
    assert (first.owner, first.start, first.finish, first.ops) == (0, 0, 2, 2)


def test_single_process_collect_is_one_write():
    tr = run_simulation(TrivialCollect, Schedule(1, (0,)))
    assert count_done(tr) == ([1], 1)
    assert tr.tasks[0].result == (tr.ops[0].value.value,)


def test_empty_schedule():
    tr = run_simulation(TrivialCollect, Schedule(3, ()))
    assert len(tr.ops) == 0
    assert count_done(tr)[1] == 0


def test_round_robin_three_processes_done_three():
    tr = run_simulation(TrivialCollect, Schedule(3, tuple(t % 3 for t in range(9))))
    assert count_done(tr) == ([1, 1, 1], 3)


def test_count_done_excludes_in_progress():
    # n=3, p0 finishes after 3 steps; p1 and p2 begin but do not finish.
    tr = run_simulation(TrivialCollect, Schedule(3, (0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 2)))
    per, total = count_done(tr)
    assert total == 3 and per == [3, 0, 0]
    assert sum(1 for t in tr.tasks if t.start is not None and t.finish is None) == 2


def test_schedule_rejects_out_of_range_ids():
    with pytest.raises(ConfigurationError):
        Schedule(2, (0, 2))
    with pytest.raises(ConfigurationError):
        run_simulation(TrivialCollect, [0, 5], n=2)


class _Thief:
    def __init__(self, pid, n):
        self.pid = pid

    def program(self, requests):
        yield Begin("collect")
        yield Write("x", reg=(self.pid + 1) % 2)
        yield End(())


def test_foreign_write_is_model_violation_with_step():
    with pytest.raises(ModelViolation) as err:
        run_simulation(_Thief, Schedule(2, (1,)))
    assert err.value.step == 0


def test_register_contents_at_examples():
    class Writer:
        def __init__(self, pid, n):
            pass

        def program(self, requests):
            yield Begin("collect")
            for _ in range(3):
                yield Read(0)
            yield Write("a")
            for _ in range(3):
                yield Read(0)
            yield Write("b")
            yield Read(0)
            yield End(("b",))
            while True:
                yield Read(0)

    tr = run_simulation(Writer, Schedule(1, (0,) * 9))
    assert register_contents_at(tr, 0, 5) == "a"
    assert register_contents_at(tr, 0, 0) is BOTTOM
    assert register_contents_at(tr, 0, 7) == "b"
    assert register_contents_at(tr, 0, 6) == "a"
    with pytest.raises(IndexError):
        register_contents_at(tr, 1, 0)


def test_request_stream_rules():
    stream = RequestStream.named("all-scan-updates")
    it = stream.for_process(0)
    assert [next(it) for _ in range(3)] == ["scan-update"] * 3
    with pytest.raises(ConfigurationError):
        RequestStream.named("some-collects")


def test_trace_exports_have_stable_headers():
    tr = run_simulation(TrivialCollect, Schedule(2, (0, 1, 0, 1)))
    ops = tr.export_ops().splitlines()
    assert ops[0] == "t,pid,kind,reg,value"
    assert ops[1].startswith("0,0,write,0,")
    tasks = tr.export_tasks().splitlines()
    assert tasks[0] == "owner,kind,start,finish"
    assert tasks[1] == "0,collect,0,2"


@settings(max_examples=60, deadline=None)
@given(schedules(), st.sampled_from(["trivial", "coop", "champion-ts"]))
def test_trace_invariants(sched, algo):
    tr = run_simulation(get_algorithm(algo), sched)
    assert len(tr.ops) == len(sched)
    for op in tr.ops:
        assert op.pid == sched.slots[op.time]
        if op.kind == "write":
            assert op.target == op.pid
        else:
            before = register_contents_at(tr, op.target, op.time - 1) if op.time else BOTTOM
            assert op.value == before
    # Contiguity: each task starts at the owner's first step after the
    # previous one finished.
    for pid in range(sched.n):
        steps = tr.steps_of(pid)
        tasks = [t for t in tr.tasks if t.owner == pid and t.parent is None
                 and t.start is not None]
        for a, b in zip(tasks, tasks[1:]):
            assert a.finish is not None
            assert b.start == steps[steps.index(a.finish) + 1]
        for t in tasks:
            assert t.finish is None or t.start <= t.finish


@settings(max_examples=30, deadline=None)
@given(schedules(max_n=4, max_len=120))
def test_determinism(sched):
    a = run_simulation(get_algorithm("coop"), sched)
    b = run_simulation(get_algorithm("coop"), sched)
    assert a.export_ops() == b.export_ops()
    assert a.export_tasks() == b.export_tasks()
