import json

import pytest

from petrishop.cli import main
from petrishop.instances import generate_random, load_instance
from petrishop.mppo import load_checkpoint, read_metrics


def test_gen_writes_parseable_instance(tmp_path):
    out = tmp_path / "inst.txt"
    assert main(["gen", "--jobs", "4", "--machines", "3", "--time-seed", "11", "--machine-seed", "22", "--out", str(out)]) == 0
    assert load_instance(out) == generate_random(4, 3, 11, 22)


def test_run_produces_report_and_figure(tmp_path, capsys):
    inst = tmp_path / "inst.txt"
    main(["gen", "--jobs", "3", "--machines", "3", "--time-seed", "5", "--machine-seed", "6", "--out", str(inst)])
    report = tmp_path / "report.csv"
    code = main([
        "run",
        "--instances", str(inst),
        "--policy", "spt,lpt,random",
        "--seed", "1",
        "--out", str(report),
    ])
    assert code == 0
    assert report.exists()
    assert (tmp_path / "report.png").exists()
    rows = report.read_text().strip().splitlines()
    assert len(rows) == 4
    printed = capsys.readouterr().out
    assert "makespan" in printed


def test_run_rejects_unknown_policy(tmp_path):
    inst = tmp_path / "inst.txt"
    main(["gen", "--jobs", "2", "--machines", "2", "--time-seed", "5", "--machine-seed", "6", "--out", str(inst)])
    with pytest.raises(ValueError):
        main(["run", "--instances", str(inst), "--policy", "bogus", "--out", str(tmp_path / "r.csv")])


def test_run_requires_matching_files(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--instances", str(tmp_path / "missing*.txt"), "--policy", "spt", "--out", str(tmp_path / "r.csv")])


def test_agent_policy_needs_checkpoint(tmp_path):
    inst = tmp_path / "inst.txt"
    main(["gen", "--jobs", "2", "--machines", "2", "--time-seed", "5", "--machine-seed", "6", "--out", str(inst)])
    with pytest.raises(SystemExit):
        main(["run", "--instances", str(inst), "--policy", "agent", "--out", str(tmp_path / "r.csv")])


def test_train_writes_artifacts(tmp_path):
    inst = tmp_path / "inst.txt"
    main(["gen", "--jobs", "3", "--machines", "3", "--time-seed", "7", "--machine-seed", "8", "--out", str(inst)])
    config = tmp_path / "train.json"
    config.write_text(json.dumps({"rollout_steps": 128, "minibatch_size": 32}))
    out = tmp_path / "run"
    code = main([
        "train",
        "--instance", str(inst),
        "--steps", "384",
        "--seed", "3",
        "--config", str(config),
        "--out", str(out),
    ])
    assert code == 0
    params, meta = load_checkpoint(out / "checkpoint.json")
    assert meta["train_config"]["total_steps"] == 384
    assert params.obs_dim == 3 + 3 * 2 + 1
    rows = read_metrics(out / "metrics.csv")
    assert [r.step for r in rows] == [128, 256, 384]
    assert (out / "training_curves.png").exists()


def test_train_then_evaluate_through_run(tmp_path):
    inst = tmp_path / "inst.txt"
    main(["gen", "--jobs", "3", "--machines", "3", "--time-seed", "7", "--machine-seed", "8", "--out", str(inst)])
    config = tmp_path / "train.json"
    config.write_text(json.dumps({"rollout_steps": 128, "minibatch_size": 32}))
    out = tmp_path / "run"
    main(["train", "--instance", str(inst), "--steps", "256", "--seed", "3", "--config", str(config), "--out", str(out)])
    report = tmp_path / "agent.csv"
    code = main([
        "run",
        "--instances", str(inst),
        "--policy", "agent,spt",
        "--checkpoint", str(out / "checkpoint.json"),
        "--out", str(report),
    ])
    assert code == 0
    lines = report.read_text().strip().splitlines()
    assert len(lines) == 3


def test_train_config_rejects_unknown_keys(tmp_path):
    inst = tmp_path / "inst.txt"
    main(["gen", "--jobs", "2", "--machines", "2", "--time-seed", "5", "--machine-seed", "6", "--out", str(inst)])
    config = tmp_path / "train.json"
    config.write_text(json.dumps({"warp_factor": 9}))
    with pytest.raises(SystemExit):
        main(["train", "--instance", str(inst), "--steps", "128", "--config", str(config), "--out", str(tmp_path / "run")])


def test_ablate_writes_metrics_per_mode(tmp_path):
    inst = tmp_path / "inst.txt"
    main(["gen", "--jobs", "2", "--machines", "2", "--time-seed", "9", "--machine-seed", "10", "--out", str(inst)])
    config = tmp_path / "train.json"
    config.write_text(json.dumps({"rollout_steps": 128, "minibatch_size": 32}))
    out = tmp_path / "ab"
    code = main([
        "ablate",
        "--mode", "reference,fixed_reward",
        "--instance", str(inst),
        "--steps", "256",
        "--seed", "2",
        "--config", str(config),
        "--out", str(out),
    ])
    assert code == 0
    assert (out / "reference_metrics.csv").exists()
    assert (out / "fixed_reward_metrics.csv").exists()
    assert (out / "ablation_curves.png").exists()


def test_gantt_formats(tmp_path):
    inst = tmp_path / "inst.txt"
    main(["gen", "--jobs", "3", "--machines", "2", "--time-seed", "3", "--machine-seed", "4", "--out", str(inst)])
    report = tmp_path / "r.csv"
    main(["run", "--instances", str(inst), "--policy", "spt", "--out", str(report)])

    # build a schedule file through the library, then export it via the CLI
    from petrishop.bench import schedule_to_json
    from petrishop.policies import PolicyKind, run_episode

    episode = run_episode(PolicyKind.SPT, load_instance(inst))
    sched = tmp_path / "sched.json"
    sched.write_text(json.dumps(schedule_to_json(episode.schedule)))
    svg = tmp_path / "out.svg"
    csv_path = tmp_path / "out.csv"
    code = main(["gantt", "--schedule", str(sched), "--svg", str(svg), "--csv", str(csv_path)])
    assert code == 0
    assert svg.read_text().count("<rect") == 6
    assert len(csv_path.read_text().strip().splitlines()) == 7


def test_gantt_requires_an_output(tmp_path):
    sched = tmp_path / "sched.json"
    sched.write_text(json.dumps({"makespan": 5, "operations": [{"job": 0, "op": 0, "machine": 0, "start": 0, "end": 5}]}))
    with pytest.raises(SystemExit):
        main(["gantt", "--schedule", str(sched)])
