import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crewroster.errors import BuildError, FreezeConflictError, ParameterError
from crewroster.model import Pilot, RuleParams, check_schedule, schedule_satisfaction
from crewroster.network import (
    FreezeMask, WindowSpec, apply_duals, build_network, compute_windows, enumerate_paths, forbid_succession,
    impose_succession, path_resources, restrict_for_window, restrict_pairings, schedule_reduced_cost,
)

from helpers import make_instance, make_pairing, random_duals, tiny_instance


def _net(pairings, pilot=None, horizon=3, rules=None):
    pilot = pilot or Pilot("K1", "B")
    inst = make_instance(pairings, [pilot], horizon=horizon, rules=rules or RuleParams(T_off=1), bases=("B", "C"))
    return inst, build_network(inst, inst.pilots[0])


def test_single_pairing_counts():
    _, net = _net([make_pairing("W1", 1)])
    assert len(net.nodes) == 8
    assert net.count_by_kind() == {"roster_start": 1, "roster_end": 1, "rest": 3, "pairing": 1,
                                   "midnight_start": 1, "postpairing_rest": 1}
    # day off, day off, day off; or W1 then two days off
    assert len(enumerate_paths(net)) == 2


def test_vacation_arcs():
    k = Pilot("K1", "B", preferred_vacations={1: 30.0, 2: 10.0})
    _, net = _net([make_pairing("W1", 1)], pilot=k, horizon=5)
    kinds = net.count_by_kind()
    assert kinds["vacation"] == 2 and kinds["postpairing_vacation"] == 1


def test_connection_needs_min_rest():
    a = make_pairing("A", 1, dep_hour=6, last_arrival_hour=20)
    ok = make_pairing("OK", 2, dep_hour=(20 * 60 + 15 + 12 * 60 + 45 - 1440) / 60)
    short = make_pairing("SH", 2, dep_hour=(20 * 60 + 15 + 11 * 60 + 45 - 1440) / 60)
    assert ok.start_minute - a.end_minute == 12 * 60
    assert short.start_minute - a.end_minute == 11 * 60
    _, net = _net([a, ok, short])
    idx = net.node_index
    conns = {(a_.tail, a_.head) for a_ in net.arcs if a_.kind == "pairing_connection"}
    assert (idx[("pairing_end", "A")], idx[("pairing_start", "OK")]) in conns
    assert all(h != idx[("pairing_start", "SH")] for t, h in conns)


def test_preassigned_day_excludes_pairings():
    k = Pilot("K1", "B", preassigned_days_off=frozenset({2}))
    _, net = _net([make_pairing("W1", 1, span=2), make_pairing("W2", 3)], pilot=k, horizon=4)
    assert net.pairing_ids() == {"W2"}


def test_other_base_excluded():
    _, net = _net([make_pairing("W1", 1, base="C")])
    assert net.pairing_ids() == set()


def test_vacation_past_horizon_is_build_error():
    k = Pilot("K1", "B", preferred_vacations={3: 5.0})
    inst = make_instance([], [k], horizon=4, rules=RuleParams(T_off=1))
    with pytest.raises(BuildError):
        build_network(inst, inst.pilots[0])


def test_path_cost_is_satisfaction_and_resources_are_sound():
    # every resource-feasible path is a rule-feasible schedule with matching cost
    for seed in range(5):
        inst = tiny_instance(seed, horizon=8)
        for k in inst.pilots:
            net = build_network(inst, k)
            for p in enumerate_paths(net):
                s = net.path_schedule(p)
                assert sum(net.arcs[i].cost for i in p) == pytest.approx(schedule_satisfaction(k, s))
                _, ok = path_resources(net, p)
                viol = check_schedule(k, s, inst.rules, inst.horizon_days)
                assert ok == (not viol), (s, viol)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 500), st.integers(0, 2**32 - 1))
def test_dual_identity(seed, dseed):
    inst = tiny_instance(seed % 40, horizon=8)
    duals = random_duals(inst, np.random.default_rng(dseed))
    for k in inst.pilots:
        net = apply_duals(build_network(inst, k), duals)
        for p in enumerate_paths(net)[:200]:
            s = net.path_schedule(p)
            rc = sum(net.reduced[i] for i in p)
            cost = sum(net.arcs[i].cost for i in p)
            assert rc == pytest.approx(schedule_reduced_cost(cost, s, k, duals, inst.horizon_days), abs=1e-6)


@pytest.mark.parametrize("H,L,O,expected", [
    (31, 10, 3, [(1, 10), (8, 17), (15, 24), (22, 31)]),
    (31, 15, 7, [(1, 15), (9, 23), (17, 31)]),
    (10, 10, 0, [(1, 10)]),
])
def test_windows(H, L, O, expected):
    assert [(w.first_day, w.last_day) for w in compute_windows(H, L, O)] == expected


@given(st.integers(1, 31), st.integers(1, 31), st.integers(0, 30))
def test_windows_cover_horizon(H, L, O):
    if not 0 <= O < L <= H:
        with pytest.raises(ParameterError):
            compute_windows(H, L, O)
        return
    ws = compute_windows(H, L, O)
    assert ws[0].first_day == 1 and ws[-1].last_day == H
    for a, b in zip(ws, ws[1:]):
        assert b.first_day == a.first_day + L - O and b.first_day <= a.last_day + 1


def test_restrict_and_impose():
    ws = [make_pairing("W1", 1), make_pairing("W2", 2), make_pairing("W3", 3)]
    _, net = _net(ws, horizon=4)
    r = restrict_pairings(net, allowed={"W1", "W2"})
    assert r.pairing_ids() == {"W1", "W2"}
    forced = restrict_pairings(net, imposed={"W2"})
    for p in enumerate_paths(forced):
        assert "W2" in forced.path_schedule(p).pairing_ids


def test_impose_and_forbid_succession():
    ws = [make_pairing("W1", 1), make_pairing("W2", 2), make_pairing("W3", 3)]
    _, net = _net(ws, horizon=4)
    im = impose_succession(net, "W1", "W3")
    for p in enumerate_paths(im):
        ids = im.path_schedule(p).pairing_ids
        if "W1" in ids:
            assert "W3" in ids and "W2" not in ids
    fb = forbid_succession(net, "W1", "W2")
    for p in enumerate_paths(fb):
        acts = [a.pairing.id for a in fb.path_schedule(p).activities if a.kind == "pairing"]
        assert ("W1", "W2") not in set(zip(acts, acts[1:]))


def test_freeze_conflicts():
    with pytest.raises(FreezeConflictError):
        FreezeMask(frozenset({("K1", "W1")}), frozenset({("K1", "W1")}))
    ws = [make_pairing("W1", 1, span=2), make_pairing("W2", 2)]
    _, net = _net(ws, horizon=4)
    with pytest.raises(FreezeConflictError):
        restrict_pairings(net, imposed={"W1", "W2"})
    with pytest.raises(FreezeConflictError):
        restrict_pairings(net, imposed={"NOPE"})


def test_window_restriction_keeps_imposed_outside_pairings():
    ws = [make_pairing("W1", 1), make_pairing("W5", 5), make_pairing("W8", 8)]
    _, net = _net(ws, horizon=10)
    mask = FreezeMask(imposed=frozenset({("K1", "W1")}))
    r = restrict_for_window(net, WindowSpec(1, 4, 6), mask)
    assert r.pairing_ids() == {"W1", "W5"}


def test_dump_is_stable():
    _, a = _net([make_pairing("W1", 1)])
    _, b = _net([make_pairing("W1", 1)])
    assert a.dump() == b.dump() and a.dump().startswith("network K1 horizon=3 nodes=8 arcs=8")
