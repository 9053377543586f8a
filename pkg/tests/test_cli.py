import json

import pytest

from crewroster.cli import main
from crewroster.instance_io import parse_roster, write_instance
from crewroster.model import roster_objective

from helpers import branching_instance


@pytest.fixture
def inst_file(tmp_path):
    inst = branching_instance(6)
    p = tmp_path / "inst.json"
    p.write_text(write_instance(inst))
    return inst, p


def test_solve_then_check(inst_file, tmp_path, capsys):
    inst, p = inst_file
    out = tmp_path / "r.json"
    assert main(["solve", str(p), "--method", "alg-fast", "--out", str(out)]) == 0
    obj = json.loads(out.read_text())
    r = parse_roster(out.read_text(), inst)
    assert obj["objective"]["S"] == pytest.approx(roster_objective(inst, r).objective)
    capsys.readouterr()
    assert main(["check", str(p), str(out)]) == 0
    text = capsys.readouterr().out
    assert text.rstrip().endswith("feasible")
    assert f"objective {obj['objective']['S']:.2f}" in text


def test_check_flags_a_corrupted_roster(inst_file, tmp_path, capsys):
    inst, p = inst_file
    out = tmp_path / "r.json"
    main(["solve", str(p), "--method", "alg_fast", "--out", str(out)])
    obj = json.loads(out.read_text())
    flown = [s for s in obj["schedules"] if any(a[0] == "pairing" for a in s["activities"])]
    # give a second pilot the first pilot's pairing
    victim = next(s for s in obj["schedules"] if s is not flown[0])
    pair = next(a for a in flown[0]["activities"] if a[0] == "pairing")
    victim["rostered"] = True
    victim["activities"] = [pair]
    out.write_text(json.dumps(obj))
    capsys.readouterr()
    assert main(["check", str(p), str(out)]) == 2
    text = capsys.readouterr().out
    assert text.rstrip().endswith("infeasible")
    assert pair[1] in text


def test_usage_errors_exit_1(inst_file, capsys):
    _, p = inst_file
    with pytest.raises(SystemExit) as e:
        main(["solve", str(p), "--method", "simplex"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 1
    assert main(["solve", str(p), "--method", "seqasg"]) == 1
    assert "kind=parameter" in capsys.readouterr().err


def test_bad_input_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "crewroster.instance", "version": 1, "pilots": [')
    assert main(["solve", str(bad)]) == 2
    assert main(["solve", str(tmp_path / "missing.json")]) == 2
    assert "kind=parse" in capsys.readouterr().err


def test_params_file(inst_file, tmp_path):
    _, p = inst_file
    prm = tmp_path / "p.json"
    prm.write_text(json.dumps({"N_iter": 2, "m_iter": 5.0}))
    assert main(["solve", str(p), "--params", str(prm), "--out", str(tmp_path / "r.json")]) == 0
    prm.write_text(json.dumps({"cfix_threshold": 2}))
    assert main(["solve", str(p), "--params", str(prm)]) == 1


def test_stdout_roster_is_deterministic(inst_file, capsys):
    _, p = inst_file
    main(["solve", str(p), "--method", "win_basic", "--window-len", "5", "--overlap", "2"])
    a = capsys.readouterr().out
    main(["solve", str(p), "--method", "win_basic", "--window-len", "5", "--overlap", "2"])
    assert capsys.readouterr().out == a and json.loads(a)["schedules"]


def test_gen_layout(tmp_path, capsys):
    assert main(["gen", "--seed", "2", "--horizon", "10", "--bases", "1", "--airports", "6", "--pairings", "20",
                 "--flight-minutes", "18000", "--pilots", "5", "--t-off", "3", "--scenarios", "12",
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "gen-s2.json").exists()
    assert len(list((tmp_path / "train").glob("*.json"))) == 10
    assert len(list((tmp_path / "test").glob("*.json"))) == 2


def test_log_level_env(inst_file, tmp_path, monkeypatch, capsys):
    _, p = inst_file
    monkeypatch.setenv("CREWROSTER_LOG", "INFO")
    main(["solve", str(p), "--method", "alg_fast", "--out", str(tmp_path / "r.json")])
    assert "result method=alg_fast" in capsys.readouterr().err
