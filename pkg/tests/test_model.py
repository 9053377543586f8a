import pytest
from hypothesis import given, settings, strategies as st

from crewroster.errors import ContractViolation, CoverageError
from crewroster.model import (
    Activity, Instance, Pilot, Roster, RuleParams, Schedule, check_roster, check_schedule, roster_objective,
    schedule_satisfaction,
)

from helpers import make_instance, make_pairing, schedule_of


def test_empty_schedule_scores_zero():
    k = Pilot("K1", "B", {"x": 10.0}, {2: 5.0})
    assert schedule_satisfaction(k, Schedule("K1")) == 0


def test_flight_and_vacation_preferences_sum():
    w = make_pairing("W1", 1, n_flights=2)
    k = Pilot("K1", "B", {w.flights[0].id: 30.0}, {4: 20.0})
    s = schedule_of("K1", 7, [w], vacations=[4])
    assert schedule_satisfaction(k, s) == 50


def test_vacation_on_non_preferred_day_scores_nothing():
    w = make_pairing("W1", 1, n_flights=2)
    k = Pilot("K1", "B", {w.flights[0].id: 10.0, w.flights[1].id: 15.0}, {2: 40.0})
    s = schedule_of("K1", 7, [w], vacations=[4])
    assert schedule_satisfaction(k, s) == 25


def test_satisfaction_rejects_foreign_schedule():
    with pytest.raises(ContractViolation):
        schedule_satisfaction(Pilot("K1", "B"), Schedule("K2"))


def test_objective_all_unassigned():
    w1, w2 = make_pairing("W1", 1, n_flights=3), make_pairing("W2", 3, n_flights=4)
    inst = make_instance([w1, w2], [Pilot("K1", "B")])
    r = Roster.from_schedules(inst, [schedule_of("K1", 7)])
    assert roster_objective(inst, r).objective == -700


def test_objective_mixed_penalties():
    ws = [make_pairing("W0", 1, n_flights=2), make_pairing("W1", 3, n_flights=2)]
    k = Pilot("K1", "B", {f.id: 250.0 for f in ws[0].flights}, preassigned_days_off=frozenset({1}))
    inst = make_instance(ws, [k])
    # W0 scores 500 but works the preassigned day 1; W1 is left open
    r = Roster.from_schedules(inst, [schedule_of("K1", 7, [ws[0]])])
    assert r.unassigned_pairings == {"W1"} and r.missed_preassigned == {("K1", 1)}
    br = roster_objective(inst, r)
    assert br.objective == 500 - 200 - 1_000_000
    assert br.objective == br.satisfaction_total - br.flight_penalty - br.dayoff_penalty


def test_objective_no_penalties():
    w = make_pairing("W1", 1, n_flights=2)
    k = Pilot("K1", "B", {w.flights[0].id: 1000.0, w.flights[1].id: 234.0})
    inst = make_instance([w], [k])
    r = Roster.from_schedules(inst, [schedule_of("K1", 7, [w])])
    assert roster_objective(inst, r).objective == 1234


def test_double_coverage_raises():
    w = make_pairing("W1", 1)
    inst = make_instance([w], [Pilot("K1", "B"), Pilot("K2", "B")])
    r = Roster.from_schedules(inst, [schedule_of("K1", 7, [w]), schedule_of("K2", 7, [w])])
    with pytest.raises(CoverageError):
        roster_objective(inst, r)
    assert check_roster(inst, r).coverage_errors


def test_unknown_pilot_raises():
    inst = make_instance([], [Pilot("K1", "B")])
    with pytest.raises(ContractViolation):
        roster_objective(inst, Roster((Schedule("K9"),), frozenset(), frozenset()))


def test_missing_pilot_is_structural_error():
    inst = make_instance([], [Pilot("K1", "B"), Pilot("K2", "B")])
    r = Roster((schedule_of("K1", 7),), frozenset(), frozenset())
    rep = check_roster(inst, r)
    assert not rep.feasible and rep.structural_errors


def _kinds(v):
    return {x.kind for x in v}


def test_seven_consecutive_duties():
    ws = [make_pairing(f"W{d}", d, n_flights=2, dep_hour=6, leg_min=60) for d in range(1, 8)]
    k = Pilot("K1", "B")
    rules = RuleParams(T_off=1, T_min=8)
    s = schedule_of("K1", 9, ws)
    assert "max_consecutive_duties" in _kinds(check_schedule(k, s, rules, 9))
    assert "max_consecutive_duties" not in _kinds(check_schedule(k, schedule_of("K1", 9, ws[:6]), rules, 9))


def test_flight_time_exceeded():
    # ten day trips of 2 x 228 min flying plus 60 min briefing: 86 h
    ws = [make_pairing(f"W{d}", d, n_flights=2, leg_min=228) for d in range(1, 20, 2)]
    assert sum(w.work_minutes for w in ws) == 86 * 60
    s = schedule_of("K1", 31, ws)
    assert "flight_time_exceeded" in _kinds(check_schedule(Pilot("K1", "B"), s, RuleParams(), 31))


def test_insufficient_rest():
    a = make_pairing("A", 1, n_flights=2, dep_hour=6, leg_min=120)
    # B reports exactly 11 h after A releases
    gap_start = a.end_minute + 11 * 60 + 45
    b = make_pairing("Bp", 2, n_flights=2, dep_hour=(gap_start - 1440) / 60, leg_min=60)
    assert b.start_minute - a.end_minute == 11 * 60
    s = schedule_of("K1", 7, [a, b])
    assert "insufficient_rest" in _kinds(check_schedule(Pilot("K1", "B"), s, RuleParams(T_off=2), 7))


def test_insufficient_days_off_and_preassigned_worked():
    ws = [make_pairing(f"W{d}", d, n_flights=2) for d in (1, 2, 3)]
    k = Pilot("K1", "B", preassigned_days_off=frozenset({2}))
    v = _kinds(check_schedule(k, schedule_of("K1", 4, ws), RuleParams(T_off=2), 4))
    assert {"insufficient_days_off", "preassigned_day_off_worked"} <= v


def test_base_mismatch_and_overlap():
    w = make_pairing("W1", 1, span=2, n_flights=2, base="C")
    k = Pilot("K1", "B")
    s = Schedule("K1", (Activity.of_pairing(w), Activity.day_off(2)))
    v = _kinds(check_schedule(k, s, RuleParams(T_off=1), 4))
    assert {"base_mismatch", "overlap"} <= v


def test_unrostered_schedule_has_no_violations():
    assert check_schedule(Pilot("K1", "B"), Schedule.unrostered("K1"), RuleParams(), 31) == []


def test_instance_validation():
    w = make_pairing("W1", 1, base="C")
    with pytest.raises(ContractViolation):
        Instance(7, ("B",), (Pilot("K1", "B"),), (w,))
    with pytest.raises(ContractViolation):
        Instance(7, ("B",), (), (make_pairing("W1", 1), make_pairing("W1", 2)))
    with pytest.raises(ContractViolation):
        RuleParams(T_work=0)


def test_generated_pairings_are_structurally_sound():
    w = make_pairing("W1", 2, span=3, n_flights=5)
    assert w.structural_problems() == []
    assert w.duty_days == (2, 3, 4)


# --- properties

_rules = st.builds(RuleParams, T_work=st.integers(1, 8), T_off=st.integers(1, 12),
                   T_min=st.floats(1, 16), T_flight=st.floats(5, 100))


@st.composite
def _schedules(draw):
    days = draw(st.lists(st.integers(1, 12), unique=True, max_size=6))
    ws = []
    used = set()
    for d in sorted(days):
        span = draw(st.integers(1, 3))
        if any(x in used for x in range(d, d + span + 1)) or d + span - 1 > 14:
            continue
        used.update(range(d, d + span + 1))
        ws.append(make_pairing(f"W{d}", d, span=span, n_flights=span + 1))
    q = frozenset(draw(st.lists(st.integers(1, 14), max_size=3)))
    return Pilot("K", "B", preassigned_days_off=q), schedule_of("K", 14, ws)


@settings(max_examples=60, deadline=None)
@given(_schedules(), _rules, st.integers(0, 4))
def test_relaxing_rules_never_adds_violations(ks, rules, which):
    k, s = ks
    field = ("T_work", "T_off", "T_min", "T_flight", None)[which]
    loose = RuleParams(
        T_work=rules.T_work + (field == "T_work"),
        T_off=max(1, rules.T_off - (field == "T_off")),
        T_min=rules.T_min / (2 if field == "T_min" else 1),
        T_flight=rules.T_flight * (2 if field == "T_flight" else 1),
    )
    strict = _kinds(check_schedule(k, s, rules, 14))
    assert _kinds(check_schedule(k, s, loose, 14)) <= strict


@settings(max_examples=40, deadline=None)
@given(_schedules(), st.randoms(use_true_random=False))
def test_satisfaction_is_permutation_invariant(ks, rnd):
    _, s = ks
    fl = [f.id for w in s.pairings for f in w.flights]
    weights = {f: float(i + 1) for i, f in enumerate(fl)}
    items = list(weights.items())
    rnd.shuffle(items)
    a = schedule_satisfaction(Pilot("K", "B", weights), s)
    b = schedule_satisfaction(Pilot("K", "B", dict(items)), s)
    assert a == b == sum(weights.values())


@settings(max_examples=40, deadline=None)
@given(_schedules())
def test_singleton_roster_objective_identity(ks):
    k, s = ks
    extra = make_pairing("Z", 13, n_flights=3)
    inst = make_instance(list(s.pairings) + [extra], [k], horizon=14)
    r = Roster.from_schedules(inst, [s])
    br = roster_objective(inst, r)
    missed = len(k.preassigned_days_off - s.off_days(14))
    assert br.objective == schedule_satisfaction(k, s) - 100 * 3 - 1_000_000 * missed
