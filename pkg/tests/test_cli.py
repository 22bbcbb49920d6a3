import csv
import json
from pathlib import Path

import numpy as np
import pytest

from swarmlift.checkpoint import load_policy, save_policy
from swarmlift.cli import main
from swarmlift.nets import init_policy

TINY_TRAIN = """
env:
  num_agents: 1
  episode_length: 64
  disturbance:
    per_step_probability: 0.0
train:
  total_steps: 192
  num_envs: 4
  rollout_steps: 8
  minibatches: 4
  epochs: 2
  checkpoint_interval: 4
  seed: 5
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture
def trained_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("train")
    cfg = write(base, "tiny.yaml", TINY_TRAIN)
    out = base / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    return cfg, out


def test_commands_do_not_mutate_inputs(trained_run, tmp_path):
    cfg, run = trained_run
    ckpt = run / "checkpoint_final.ckpt"
    cfg_before = cfg.read_bytes()
    ckpt_before = ckpt.read_bytes()
    assert main(
        ["rollout", "--checkpoint", str(ckpt), "--config", str(cfg), "--seed", "1",
         "--out", str(tmp_path / "t.csv")]
    ) == 0
    assert cfg.read_bytes() == cfg_before
    assert ckpt.read_bytes() == ckpt_before


def test_train_writes_artifacts(trained_run):
    _, out = trained_run
    assert (out / "manifest.json").exists()
    assert (out / "learning_curve.csv").exists()
    assert (out / "learning_curve.png").exists()
    assert (out / "checkpoint_final.ckpt").exists()
    checkpoints = sorted((out / "checkpoints").glob("*.ckpt"))
    assert len(checkpoints) >= 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["seed"] == 5
    assert manifest["config"]["train"]["total_steps"] == 192
    rows = read_csv(out / "learning_curve.csv")
    assert rows[0][0] == "update"
    assert len(rows) == 1 + 6  # header + ceil(192 / 32) updates
    params, header, _ = load_policy(out / "checkpoint_final.ckpt")
    assert header["num_agents"] == 1
    assert params.obs_dim == 28


def test_train_determinism_byte_identical(tmp_path):
    cfg = write(tmp_path, "tiny.yaml", TINY_TRAIN)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append((out / "learning_curve.csv").read_bytes())
    assert outs[0] == outs[1]


def test_train_missing_field_names_it(tmp_path, capsys):
    cfg = write(
        tmp_path, "bad.yaml", "env:\n  num_agents: 1\ntrain:\n  num_envs: 4\n"
    )
    code = main(["train", "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert code == 2
    assert "train.total_steps" in capsys.readouterr().err


def test_train_unknown_key_rejected(tmp_path, capsys):
    cfg = write(
        tmp_path,
        "bad.yaml",
        "env:\n  num_agents: 1\ntrain:\n  total_steps: 64\n  num_envs: 4\n  lr: 0.1\n",
    )
    code = main(["train", "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert code == 2
    assert "train.lr" in capsys.readouterr().err


def test_eval_unknown_scenario_lists_names(tmp_path, capsys):
    params = init_policy(28, np.random.default_rng(0))
    ckpt = tmp_path / "p.ckpt"
    save_policy(params, ckpt, num_agents=1)
    code = main(
        ["eval", "--checkpoint", str(ckpt), "--scenario", "dance", "--out", str(tmp_path / "e")]
    )
    assert code == 2
    err = capsys.readouterr().err
    assert "recover" in err and "fig8" in err and "sweep:" in err


def test_eval_recover_schema(tmp_path):
    params = init_policy(28, np.random.default_rng(1))
    ckpt = tmp_path / "p.ckpt"
    save_policy(params, ckpt, num_agents=1)
    cfg = write(
        tmp_path,
        "eval.yaml",
        "env:\n  num_agents: 1\n  disturbance:\n    per_step_probability: 0.0\n"
        "eval:\n  timeout_seconds: 1.0\n",
    )
    out = tmp_path / "evalout"
    code = main(
        [
            "eval", "--checkpoint", str(ckpt), "--scenario", "recover",
            "--trials", "10", "--out", str(out), "--config", str(cfg), "--seed", "0",
        ]
    )
    assert code == 0
    rows = read_csv(out / "recover.csv")
    assert rows[0][0] == "row_type"
    assert len(rows) == 1 + 1 + 10  # header + summary + trials
    assert rows[1][0] == "summary"
    assert all(r[0] == "trial" for r in rows[2:])
    assert (out / "recover.png").exists()


def test_eval_sweep_row_count(tmp_path):
    params = init_policy(28, np.random.default_rng(2))
    ckpt = tmp_path / "p.ckpt"
    save_policy(params, ckpt, num_agents=1)
    cfg = write(
        tmp_path,
        "eval.yaml",
        "env:\n  num_agents: 1\n  disturbance:\n    per_step_probability: 0.0\n"
        "eval:\n  timeout_seconds: 0.5\n",
    )
    out = tmp_path / "sweepout"
    code = main(
        [
            "eval", "--checkpoint", str(ckpt), "--scenario", "sweep:cable_length",
            "--trials", "2", "--out", str(out), "--config", str(cfg),
            "--values", "0.2,0.3,0.5",
        ]
    )
    assert code == 0
    rows = read_csv(out / "sweep_cable_length.csv")
    assert rows[0] == ["axis", "value", "rate", "mean_speed", "n"]
    assert len(rows) == 1 + 3
    assert (out / "sweep_cable_length.png").exists()


def test_eval_fig8_has_error_columns(tmp_path):
    params = init_policy(28, np.random.default_rng(3))
    ckpt = tmp_path / "p.ckpt"
    save_policy(params, ckpt, num_agents=1)
    cfg = write(
        tmp_path,
        "eval.yaml",
        "env:\n  num_agents: 1\n  episode_length: 100\n"
        "  disturbance:\n    per_step_probability: 0.0\n",
    )
    out = tmp_path / "figout"
    code = main(
        [
            "eval", "--checkpoint", str(ckpt), "--scenario", "fig8",
            "--trials", "2", "--out", str(out), "--config", str(cfg),
        ]
    )
    assert code == 0
    rows = read_csv(out / "fig8.csv")
    assert "rmse_m" in rows[0] and "max_error_m" in rows[0]
    assert len(rows) == 1 + 2
    assert (out / "fig8.png").exists()


def test_rollout_csv_shape_and_determinism(trained_run, tmp_path):
    _, run = trained_run
    ckpt = run / "checkpoint_final.ckpt"
    cfg_text = (
        "env:\n  num_agents: 1\n  episode_length: 50\n"
        "  disturbance:\n    per_step_probability: 0.0\n"
    )
    cfg = write(tmp_path, "roll.yaml", cfg_text)
    outputs = []
    for name in ("r1.csv", "r2.csv"):
        out = tmp_path / name
        code = main(
            [
                "rollout", "--checkpoint", str(ckpt), "--config", str(cfg),
                "--seed", "3", "--out", str(out),
            ]
        )
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]

    rows = read_csv(tmp_path / "r1.csv")
    header, data = rows[0], rows[1:]
    assert len(data) >= 1
    times = [float(r[header.index("time")]) for r in data]
    diffs = np.diff(times)
    assert np.allclose(diffs, 0.004)
    assert times[0] == pytest.approx(0.004)
    for col in ("payload_px", "q0_qw", "q0_cmd0", "q0_thrust3", "r_track", "total"):
        assert col in header
    assert (tmp_path / "r1.png").exists()
    assert (tmp_path / "r1_manifest.json").exists()


def test_rollout_checkpoint_env_mismatch(tmp_path, capsys):
    params = init_policy(31, np.random.default_rng(4))  # two-agent policy
    ckpt = tmp_path / "p.ckpt"
    save_policy(params, ckpt, num_agents=2)
    cfg = write(tmp_path, "one.yaml", "env:\n  num_agents: 1\n")
    code = main(
        ["rollout", "--checkpoint", str(ckpt), "--config", str(cfg), "--out",
         str(tmp_path / "t.csv")]
    )
    assert code == 2
    assert "obs_dim" in capsys.readouterr().err


def test_corrupt_checkpoint_reported(tmp_path, capsys):
    bogus = tmp_path / "bad.ckpt"
    bogus.write_bytes(b"garbage")
    code = main(
        ["rollout", "--checkpoint", str(bogus), "--out", str(tmp_path / "t.csv")]
    )
    assert code == 2
    assert "checkpoint" in capsys.readouterr().err.lower()
