import numpy as np
import pytest

from swarmlift.config import ConfigError, load_config, parse_config


def write_yaml(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text)
    return path


def test_minimal_config_defaults():
    cfg = parse_config({"env": {"num_agents": 2}})
    assert cfg.env.num_agents == 2
    assert cfg.physics.dt == 0.004
    assert cfg.physics.cable_length == 0.3
    assert cfg.env.episode_length == 3072
    assert cfg.env.reward.max_speed == 1.5
    assert cfg.train is None
    assert cfg.eval.success_radius == 0.10


def test_missing_num_agents_is_named():
    with pytest.raises(ConfigError, match="env.num_agents"):
        parse_config({"env": {}})


def test_missing_train_fields_named():
    with pytest.raises(ConfigError, match="train.total_steps"):
        parse_config({"env": {"num_agents": 1}, "train": {"num_envs": 8}})
    with pytest.raises(ConfigError, match="train.num_envs"):
        parse_config({"env": {"num_agents": 1}, "train": {"total_steps": 100}})


def test_require_train_section():
    with pytest.raises(ConfigError, match="train"):
        parse_config({"env": {"num_agents": 1}}, require_train=True)


def test_unknown_keys_rejected_at_every_level():
    with pytest.raises(ConfigError, match="env.quads"):
        parse_config({"env": {"num_agents": 1, "quads": 3}})
    with pytest.raises(ConfigError, match="physics.mass"):
        parse_config({"env": {"num_agents": 1}, "physics": {"mass": 1.0}})
    with pytest.raises(ConfigError, match="reward.foo"):
        parse_config({"env": {"num_agents": 1}, "reward": {"foo": 2}})
    with pytest.raises(ConfigError, match="env.dr.bar"):
        parse_config({"env": {"num_agents": 1, "dr": {"bar": 1}}})
    with pytest.raises(ConfigError, match="'junk'"):
        parse_config({"env": {"num_agents": 1}, "junk": {}})


def test_invalid_values_surface_section():
    with pytest.raises(ConfigError, match="train"):
        parse_config(
            {"env": {"num_agents": 1}, "train": {"total_steps": 10, "num_envs": 2, "gamma": 1.5}}
        )
    with pytest.raises(ConfigError, match="physics"):
        parse_config({"env": {"num_agents": 1}, "physics": {"quad_mass": -1.0}})


def test_full_yaml_round_trip(tmp_path):
    path = write_yaml(
        tmp_path,
        """
physics:
  cable_length: 0.4
  payload_mass: 0.02
reward:
  max_speed: 2.0
env:
  num_agents: 2
  target_position: [0.0, 0.0, 1.2]
  observation_noise_std: 0.5
  max_spawn_tilt_deg: 30.0
  dr:
    lag_time_range: [0.01, 0.02]
  disturbance:
    per_step_probability: 0.0
train:
  total_steps: 4096
  num_envs: 8
  rollout_steps: 16
  minibatches: 16
  seed: 7
eval:
  success_radius: 0.2
  trials: 10
""",
    )
    cfg = load_config(path, require_train=True)
    assert cfg.physics.cable_length == 0.4
    assert cfg.physics.payload_mass == 0.02
    assert cfg.env.reward.max_speed == 2.0
    assert np.allclose(cfg.env.target_position, [0, 0, 1.2])
    assert cfg.env.max_spawn_tilt == pytest.approx(np.deg2rad(30))
    assert cfg.env.dr.lag_time_range == (0.01, 0.02)
    assert cfg.env.disturbance.per_step_probability == 0.0
    assert cfg.train.seed == 7
    assert cfg.eval.trials == 10
    snapshot = cfg.to_dict()
    assert snapshot["physics"]["cable_length"] == 0.4
    assert snapshot["train"]["seed"] == 7
    assert snapshot["env"]["max_spawn_tilt_deg"] == pytest.approx(30.0)


def test_empty_config_file(tmp_path):
    path = write_yaml(tmp_path, "env:\n  num_agents: 1\n")
    cfg = load_config(path)
    assert cfg.env.num_agents == 1


def test_invalid_yaml_reports_file(tmp_path):
    path = write_yaml(tmp_path, "env: [unclosed\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(path)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")


def test_physics_dict_round_trip():
    from swarmlift.physics import PhysicalParams

    params = PhysicalParams(cable_length=0.5)
    rebuilt = PhysicalParams.from_dict(params.to_dict())
    assert rebuilt.cable_length == 0.5
    assert np.allclose(rebuilt.motor_positions, params.motor_positions)
    assert np.allclose(rebuilt.quad_inertia, params.quad_inertia)
