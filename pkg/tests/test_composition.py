import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from arena import objects
from arena.adversary import build_lower_bound_schedule, round_robin, seeded_random
from arena.algorithms import TrivialCollect
from arena.composition import (RelativeReport, check_composition_bound, check_feasibility,
                               check_relative_competitiveness, compose, export_composition,
                               layer_isolation_violations, relative_report, run_composed,
                               run_composition_corpus, u_tasks_per_task)
from arena.sim import ConfigurationError, Schedule, count_done, run_simulation

from test_sim import schedules


def test_solo_scan_update_uses_three_write_collects():
    tr = run_composed("snapshot", "trivial", Schedule(3, (1,) * 30))
    scans = [t for t in tr.tasks_of("scan-update") if t.finish is not None]
    assert scans and all(t.info["u_tasks"] == 3 and t.info["scan"] == "direct" for t in scans)
    assert set(u_tasks_per_task(tr, "scan-update")) == {3}


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 3), max_size=400), st.sampled_from(["trivial", "coop"]))
def test_scan_update_within_n_plus_2(slots, lower):
    tr = run_composed("snapshot", lower, Schedule(4, tuple(slots)))
    assert max(u_tasks_per_task(tr, "scan-update"), default=0) <= 6
    assert objects.check_snapshot_atomicity(tr) == []


def test_worst_case_search_n4():
    # Randomised search for the schedule maximising write-collects per scan.
    worst = 0
    for seed in range(300):
        rng = random.Random(seed)
        # Let one scanner crawl while the others update in bursts.
        slots = []
        while len(slots) < 300:
            slots += [0] if rng.random() < 0.3 else [rng.randrange(1, 4)] * rng.randint(1, 8)
        tr = run_composed("snapshot", "trivial", Schedule(4, tuple(slots)))
        worst = max(worst, max(u_tasks_per_task(tr, "scan-update"), default=0))
        assert objects.check_snapshot_atomicity(tr) == []
    assert 3 < worst <= 6


def test_borrowed_scans_occur_and_are_atomic():
    borrowed = 0
    for seed in range(100):
        tr = run_composed("snapshot", "coop", seeded_random(3, 300, seed))
        borrowed += sum(1 for t in tr.tasks_of("scan-update")
                        if str(t.info.get("scan", "")).startswith("borrowed"))
        assert objects.check_snapshot_atomicity(tr) == []
    assert borrowed > 0


def test_two_alternating_processes_corpus():
    for seed in range(1000):
        rng = random.Random(seed)
        a, b = rng.sample(range(4), 2)
        slots = tuple(rng.choice((a, b)) for _ in range(rng.randint(0, 60)))
        tr = run_composed("snapshot", "trivial", Schedule(4, slots))
        assert objects.check_snapshot_atomicity(tr) == []


def test_rounds_layer_one_u_task_each():
    tr = run_composed("rounds", "coop", seeded_random(4, 500, 3))
    assert set(u_tasks_per_task(tr, "advance-collect")) == {1}
    assert count_done(tr, "advance-collect")[1] == count_done(tr, "write-collect")[1]
    assert objects.check_advance_collect(tr) == []


@settings(max_examples=40, deadline=None)
@given(schedules(max_n=4, max_len=200), st.sampled_from(["rounds", "snapshot"]),
       st.sampled_from(["trivial", "coop"]))
def test_layer_isolation_and_accounting(sched, upper, lower):
    tr = run_composed(upper, lower, sched)
    assert layer_isolation_violations(tr) == []
    rep = relative_report(tr, upper, lower)
    assert rep.doneU >= rep.doneT
    assert rep.doneU <= rep.budget * rep.doneT + rep.budget * rep.n
    assert objects.check_write_collect_serialization(tr) == []


def test_relative_check_vacuous_on_empty_schedule():
    tr = run_composed("snapshot", "trivial", Schedule(3, ()))
    rep = relative_report(tr, "snapshot", "trivial")
    assert check_relative_competitiveness(rep, rep.budget).status == "vacuous"


def test_relative_check_statuses():
    rep = RelativeReport("snapshot", "trivial", 4, doneT=10, doneU=70, optT_ub=100, optU_ub=100,
                         optU_lb=70, c=4, budget=7)
    assert check_relative_competitiveness(rep, 7).status == "pass"
    assert check_relative_competitiveness(rep, 4).status == "fail"
    assert rep.measured_ratio == Fraction(70, 14)


def test_snapshot_relative_ratio_within_budget():
    for seed in range(30):
        tr = run_composed("snapshot", "trivial", seeded_random(4, 800, seed))
        rep = relative_report(tr, "snapshot", "trivial")
        check = check_relative_competitiveness(rep, rep.budget)
        assert check.status == "pass" and check.within_budget
        assert check.k_rel <= rep.n + 3


def test_feasibility():
    assert check_feasibility([Schedule(3, ())]) == [True]
    assert all(check_feasibility([seeded_random(5, 300, s) for s in range(10)]))
    sched, plan = build_lower_bound_schedule(TrivialCollect, 16, 4, 2)
    champ = count_done(run_simulation(plan.champion(), sched))[1]
    snap = count_done(run_composed("snapshot", "trivial", sched), "scan-update")[1]
    assert check_feasibility([sched], t_bound=lambda s: snap, u_bound=lambda s: champ) == [True]


def test_composition_bound_degenerate_single_process():
    rows = run_composition_corpus("rounds", "trivial", [(0, round_robin(1, 50))])
    assert rows[0].holds
    assert check_composition_bound(0, 0, 1, 1, 1, 1)


@pytest.mark.parametrize("upper", ["rounds", "snapshot"])
@pytest.mark.parametrize("lower", ["trivial", "coop"])
def test_composition_corpus_holds(upper, lower):
    corpus = [(s, seeded_random(4, 600, s)) for s in range(20)]
    rows = run_composition_corpus(upper, lower, corpus)
    assert all(r.holds for r in rows)
    text = export_composition(rows)
    assert text.splitlines()[0] == "upper,lower,n,seed,doneT,doneU,budget,k_rel,l_hat,kl_bound_holds"
    assert len(text.splitlines()) == 21


def test_unknown_layer():
    with pytest.raises(ConfigurationError):
        compose("timestamps", "trivial")
