import math

import numpy as np
import pytest

from crewroster.bnp import (
    ALG_BASIC, ALG_FAST, EXACT, BnpParams, PricingContext, RunLog, build_networks, column_generation,
    select_branch, solve_bnp,
)
from crewroster.errors import ContractViolation, ParameterError
from crewroster.master import Column, RestrictedMaster, RmpSolution, brute_force_solve
from crewroster.model import Pilot, check_roster, roster_objective
from crewroster.network import Duals, restrict_pairings
from crewroster.rcspp import PricingStats

from helpers import branching_instance, make_instance, make_pairing, schedule_of, tiny_instance


def _sol(cols, values):
    return RmpSolution(0.0, list(cols), np.asarray(values, float), {}, {}, Duals({}, {}, {}), [], "fake")


def _col(pilot_id, pairings, H=10):
    k = Pilot(pilot_id, "B")
    return Column.from_schedule(k, schedule_of(pilot_id, H, pairings), H)


W = {d: make_pairing(f"W{d}", d) for d in range(1, 9)}
# same-day alternatives so successions can differ
W2b = make_pairing("W2b", 2, dep_hour=13)


def test_params_validation_and_round_trip():
    assert BnpParams.from_dict(ALG_FAST.as_dict()) == ALG_FAST
    assert EXACT.N_iter == math.inf and EXACT.m_iter == 0
    with pytest.raises(ParameterError):
        BnpParams(cfix_threshold=0)
    with pytest.raises(ParameterError):
        BnpParams(N_iter=0)
    with pytest.raises(ParameterError):
        BnpParams.from_dict({"bogus": 1})


def test_fix_up_to_three_compatible_columns():
    cols = [_col("K1", [W[1]]), _col("K2", [W[2]]), _col("K3", [W[3]]), _col("K1", [W[4]])]
    picks = select_branch(_sol(cols, [0.85, 0.72, 0.64, 0.15]), ALG_BASIC)
    assert [p.kind for p in picks] == ["fix_column", "fix_column"]
    assert [p.column.pilot_id for p in picks] == ["K1", "K2"]


def test_fixing_skips_incompatible_columns():
    cols = [_col("K1", [W[1]]), _col("K2", [W[1]]), _col("K3", [W[3]]), _col("K4", [W[5]]), _col("K5", [W[7]])]
    picks = select_branch(_sol(cols, [0.9, 0.8, 0.75, 0.71, 0.5]), ALG_BASIC)
    assert [p.column.pilot_id for p in picks] == ["K1", "K3", "K4"]


def test_impose_successions_by_normalized_flow():
    # no column reaches 0.70; successions carry flows 0.6, 0.48 and 0.3
    cols = [_col("K1", [W[1], W[2]]), _col("K2", [W[4], W[5]]), _col("K3", [W[7], W[8]]), _col("K1", [W[6]])]
    picks = select_branch(_sol(cols, [0.6, 0.48, 0.3, 0.4]), ALG_BASIC)
    assert [(p.kind, p.pilot_id, p.first, p.second) for p in picks] == [
        ("impose_succession", "K1", "W1", "W2"), ("impose_succession", "K2", "W4", "W5")]
    assert picks[1].score == pytest.approx(0.8)


def test_flow_ties_break_by_start_then_pilot():
    cols = [_col("K2", [W[4], W[5]]), _col("K1", [W[4], W[5]]), _col("K3", [W[1], W[2]])]
    picks = select_branch(_sol(cols, [0.5, 0.5, 0.5]), ALG_BASIC)
    assert [(p.pilot_id, p.first) for p in picks] == [("K3", "W1"), ("K1", "W4"), ("K2", "W4")]


def test_one_succession_per_first_pairing():
    cols = [_col("K1", [W[1], W[2]]), _col("K1", [W[1], W2b])]
    picks = select_branch(_sol(cols, [0.5, 0.5]), ALG_BASIC)
    assert len(picks) == 1 and picks[0].second == "W2"


def test_fallback_fixes_highest_fraction():
    cols = [_col("K1", [W[1]]), _col("K2", [W[3]]), _col("K1", [])]
    picks = select_branch(_sol(cols, [0.3, 0.55, 0.7 - 1e-3]), ALG_BASIC)
    assert len(picks) == 1 and picks[0].kind == "fix_column" and picks[0].column.pilot_id == "K1"
    assert picks[0].score == pytest.approx(0.699)


def test_integral_solution_is_a_contract_violation():
    with pytest.raises(ContractViolation):
        select_branch(_sol([_col("K1", [W[1]])], [1.0]), ALG_BASIC)


@pytest.mark.parametrize("seed", range(8))
def test_tiny_instances_match_brute_force(seed):
    inst = tiny_instance(seed)
    res = solve_bnp(inst, params=EXACT)
    assert res.objective == pytest.approx(brute_force_solve(inst)[0])


@pytest.mark.parametrize("seed", [3, 6, 7])
def test_branching_reaches_a_feasible_roster(seed):
    inst = branching_instance(seed)
    lines = []
    res = solve_bnp(inst, params=EXACT, log=RunLog(lines.append))
    assert res.branch_steps > 0
    assert check_roster(inst, res.roster).feasible
    assert res.objective == roster_objective(inst, res.roster).objective
    # the exact root LP bounds every integer roster
    assert res.objective <= res.root_lp + 1e-6
    assert any(line.startswith("branch ") for line in lines)


def test_solve_is_deterministic():
    inst = branching_instance(6)
    a, b = solve_bnp(inst), solve_bnp(inst)
    assert a.roster == b.roster and a.objective == b.objective and a.work == b.work


def test_fast_stopping_rule():
    inst = branching_instance(3)
    state = RestrictedMaster(inst)
    ctx = PricingContext(inst, build_networks(inst), state)
    sol, tr = column_generation(state, ctx, ALG_FAST)
    assert tr.stop in ("no_improving_column", "min_improvement")
    if tr.stop == "min_improvement":
        obj = tr.objectives
        assert 100 * (obj[-1] - obj[-5]) / max(abs(max(obj)), 1) < ALG_FAST.m_iter


def test_exact_cg_leaves_no_improving_column():
    inst = tiny_instance(4)
    state = RestrictedMaster(inst)
    ctx = PricingContext(inst, build_networks(inst), state)
    sol, tr = column_generation(state, ctx, EXACT)
    assert tr.stop == "no_improving_column"
    assert ctx.price(sol, EXACT, PricingStats()) == []


def test_warm_start_keeps_incumbent_reachable():
    inst = tiny_instance(2)
    best, r = brute_force_solve(inst)
    warm = [Column.from_schedule(inst.pilot_by_id[s.pilot_id], s, inst.horizon_days) for s in r.schedules]
    res = solve_bnp(inst, warm_columns=warm, params=ALG_FAST)
    assert res.objective == pytest.approx(best)


def test_must_fly_survives_fixings():
    ws = [make_pairing("W1", 1), make_pairing("W3", 3)]
    inst = make_instance(ws, [Pilot("K1", "B"), Pilot("K2", "B")], horizon=5)
    nets = build_networks(inst)
    nets["K2"] = restrict_pairings(nets["K2"], imposed={"W3"})
    res = solve_bnp(inst, networks=nets, must_fly={"K2": {"W3"}})
    by = {s.pilot_id: s.pairing_ids for s in res.roster.schedules}
    assert "W3" in by["K2"]
