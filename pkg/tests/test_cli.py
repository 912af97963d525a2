import json

import pytest

from pesynth.aggregator import PESolution
from pesynth.cli import main, read_config
from pesynth.datagen import AggregatorInstance, read_dataset, write_jsonl
from pesynth.dsl import parse_program, solution_score


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["datagen", "--train-out", str(d / "train.jsonl"), "--test-out", str(d / "test.jsonl"),
                 "--train-counts", "1:5,2:15", "--test-counts", "2:4", "--seed", "1"]) == 0
    for kind in ("gps", "pe"):
        assert main([f"train-{kind}", "--data", str(d / "train.jsonl"), "--out", str(d / f"{kind}.ckpt"),
                     "--z", "16", "--epochs", "1", "--metrics", str(d / f"{kind}.metrics")]) == 0
    _, train = read_dataset(d / "train.jsonl")
    rec = train[-1]
    half = parse_program("a <- LIST\nb <- REVERSE a") if rec.program.inputs == ("LIST",) else rec.program
    u, sat = solution_score(half, rec.examples)
    inst = AggregatorInstance(rec.examples, [PESolution(half, u, sat, 0)], rec.program)
    write_jsonl(d / "inst.jsonl", {"kind": "instances"}, [inst, inst])
    assert main(["train-ca", "--instances", str(d / "inst.jsonl"), "--gps", str(d / "gps.ckpt"),
                 "--pe", str(d / "pe.ckpt"), "--out", str(d / "ca.ckpt"), "--epochs", "1"]) == 0
    _, test = read_dataset(d / "test.jsonl")
    (d / "task.jsonl").write_text(json.dumps(test[0].to_json()) + "\n")
    return d


def _models(d):
    return ["--gps", str(d / "gps.ckpt"), "--pe", str(d / "pe.ckpt"), "--ca", str(d / "ca.ckpt")]


def test_datagen_outputs_and_header(work):
    header, train = read_dataset(work / "train.jsonl")
    assert len(train) == 20 and header["seed"] == 1


def test_synth_prints_result(work, capsys):
    assert main(["synth", "--task", str(work / "task.jsonl"), *_models(work), "--alpha", "0.8",
                 "--budget", "nodes:60"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] in ("solved", "failed") and out["config"]["alpha"] == 0.8
    assert out["nodes"]["total"] <= 60


def test_eval_deterministic(work):
    args = ["eval", "--split", str(work / "test.jsonl"), *_models(work), "--budget", "nodes:50", "--seed", "3"]
    assert main(args + ["--out", str(work / "r1.jsonl")]) == 0
    assert main(args + ["--out", str(work / "r2.jsonl")]) == 0
    assert (work / "r1.jsonl").read_bytes() == (work / "r2.jsonl").read_bytes()
    summary = json.loads((work / "r1.jsonl").read_text().splitlines()[-1])
    assert summary["seed"] == 3 and summary["config"]["total_budget"] == "nodes:50"


def test_eval_gps_mode_only_needs_gps(work):
    assert main(["eval", "--split", str(work / "test.jsonl"), "--gps", str(work / "gps.ckpt"), "--mode", "gps",
                 "--budget", "nodes:20", "--out", str(work / "g.jsonl")]) == 0


@pytest.mark.parametrize("what", ["overlap", "failures", "perfect", "intent"])
def test_report_analyses(work, what, capsys):
    report = work / "r1.jsonl"
    if not report.exists():
        main(["eval", "--split", str(work / "test.jsonl"), *_models(work), "--budget", "nodes:50",
              "--out", str(report)])
    capsys.readouterr()
    assert main(["analyze", what, "--split", str(work / "test.jsonl"), "--report", str(report)]) == 0
    assert what in json.loads(capsys.readouterr().out)


def test_analyze_tot_ind_table(work, capsys):
    assert main(["analyze", "tot-ind", "--split", str(work / "test.jsonl"), "--pe", str(work / "pe.ckpt"),
                 "--gps", str(work / "gps.ckpt"), "--budget", "nodes:5", "--k", "1..5"]) == 0
    rows = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [r["k"] for r in rows] == [1, 2, 3, 4, 5]
    assert all({"ind", "tot", "gps"} <= set(r) for r in rows)


def test_analyze_nearest_and_attention(work, capsys):
    assert main(["analyze", "nearest", "--ca", str(work / "ca.ckpt"), "--statement", "3", "--top", "4"]) == 0
    assert len(json.loads(capsys.readouterr().out)["neighbours"]) == 4
    assert main(["analyze", "attention", "--task", str(work / "inst.jsonl"), *_models(work)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "keys" in json.loads(lines[0]) and len(lines) > 1


def test_gen_agg(work, capsys):
    assert main(["gen-agg", "--data", str(work / "train.jsonl"), "--pe", str(work / "pe.ckpt"),
                 "--out", str(work / "gen.jsonl"), "--unit", "nodes:10", "--limit", "6"]) == 0
    assert "instances" in json.loads(capsys.readouterr().out)


def test_config_file_and_set(work, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# desk run\nbudget = nodes:30\nalpha=0.5\n")
    assert read_config(cfg) == {"budget": "nodes:30", "alpha": "0.5"}
    out = tmp_path / "o.jsonl"
    assert main(["synth", "--task", str(work / "task.jsonl"), *_models(work), "--config", str(cfg),
                 "--set", "mode=mean", "--out", str(out)]) == 0
    conf = json.loads(out.read_text())["config"]
    assert conf["alpha"] == 0.5 and conf["mode"] == "mean" and conf["total_budget"] == "nodes:30"


def test_usage_errors_exit_2(work, tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["synth", "--task", "x", "--budget", "minutes:3", "--gps", "g"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["bogus"])
    assert e.value.code == 2
    assert main(["analyze", "overlap", "--split", "s"]) == 2
    assert main(["synth", "--task", str(work / "task.jsonl"), "--gps", str(work / "gps.ckpt"),
                 "--set", "nonsense=1"]) == 2
    assert main(["eval", "--split", str(work / "test.jsonl"), "--gps", str(work / "gps.ckpt")]) == 2
    assert main(["synth", "--task", str(work / "task.jsonl"), *_models(work),
                 "--peps-budget", "nodes:20", "--budget", "nodes:50"]) == 1


def test_runtime_error_exit_1(tmp_path, capsys):
    assert main(["train-gps", "--data", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path / "m")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "FileNotFoundError"
