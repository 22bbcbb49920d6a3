"""Command-line entry points: train, eval, rollout.

Every command resolves its configuration, writes a manifest describing the
run (config snapshot, seed, artifact paths) before producing artifacts, and
emits CSV files with a figure rendered alongside each one.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_policy, save_policy
from .config import ConfigError, RunConfig, load_config, parse_config
from .env import agent_obs_dim
from .evaluate import (
    ReferenceTrajectory,
    SWEEP_AXES,
    generalization_sweep,
    recovery_rate,
    run_episode,
    tracking_error,
)
from .ppo import TrainingFault, curve_columns, train
from .rewards import RewardBreakdown

DEFAULT_SWEEP_VALUES = {
    "cable_length": [0.2, 0.25, 0.3, 0.4, 0.5, 0.75, 1.0],
    "payload_mass": [0.005, 0.01, 0.02, 0.03, 0.05],
    "obs_noise": [0.0, 0.5, 1.0, 1.5, 2.0],
    "seed": [0, 1, 2, 3, 4],
}


def _write_csv(path, columns: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row[c]) for c in columns])


def _format(value):
    if isinstance(value, float) and np.isnan(value):
        return "nan"
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _write_manifest(path, command: str, config: RunConfig, seed, artifacts: dict) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "started": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "config": config.to_dict(),
        "artifacts": {name: str(p) for name, p in artifacts.items()},
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def cmd_train(args) -> int:
    config = load_config(args.config, require_train=True)
    if args.seed is not None:
        config = replace(config, train=replace(config.train, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    curve_path = out / "learning_curve.csv"
    final_path = out / "checkpoint_final.ckpt"
    _write_manifest(
        out / "manifest.json",
        "train",
        config,
        config.train.seed,
        {
            "learning_curve": curve_path,
            "learning_curve_figure": out / "learning_curve.png",
            "checkpoints": ckpt_dir,
            "final_checkpoint": final_path,
        },
    )

    num_agents = config.env.num_agents

    def checkpoint_fn(update, env_steps, params, opt_state):
        save_policy(
            params,
            ckpt_dir / f"update_{update:06d}.ckpt",
            num_agents,
            metadata={"update": update, "env_steps": env_steps, "seed": config.train.seed},
            opt_state=opt_state,
        )

    result = train(config.train, config.env, config.physics, checkpoint_fn=checkpoint_fn)
    save_policy(
        result.params,
        final_path,
        num_agents,
        metadata={
            "update": len(result.curve),
            "env_steps": result.env_steps,
            "seed": config.train.seed,
        },
        opt_state=result.opt_state,
    )
    _write_csv(curve_path, curve_columns(), result.curve)
    from .plots import plot_learning_curve

    plot_learning_curve(result.curve, out / "learning_curve.png")
    print(f"trained {result.env_steps} env steps over {len(result.curve)} updates -> {out}")
    return 0


def _load_checkpoint_and_config(args) -> tuple:
    params, header, _ = load_policy(args.checkpoint)
    if args.config:
        config = load_config(args.config)
    else:
        config = parse_config({"env": {"num_agents": header["num_agents"]}})
    expected = agent_obs_dim(config.env.num_agents)
    if params.obs_dim != expected:
        raise ConfigError(
            f"checkpoint obs_dim {params.obs_dim} does not match env.num_agents="
            f"{config.env.num_agents} (needs obs_dim {expected})"
        )
    return params, header, config


def cmd_eval(args) -> int:
    params, _, config = _load_checkpoint_and_config(args)
    scenario = args.scenario
    axis = None
    if scenario.startswith("sweep:"):
        axis = scenario.split(":", 1)[1]
        if axis not in SWEEP_AXES:
            raise ConfigError(
                f"unknown sweep axis '{axis}'; valid: {', '.join(SWEEP_AXES)}"
            )
    elif scenario not in ("recover", "fig8"):
        raise ConfigError(
            f"unknown scenario '{scenario}'; valid: recover, fig8, "
            + ", ".join(f"sweep:{a}" for a in SWEEP_AXES)
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trials = args.trials if args.trials is not None else config.eval.trials
    seed = args.seed if args.seed is not None else 0
    ev = config.eval

    if scenario == "recover":
        csv_path = out / "recover.csv"
        fig_path = out / "recover.png"
        _write_manifest(out / "manifest.json", "eval:recover", config, seed,
                        {"metrics": csv_path, "figure": fig_path})
        rate, mean_speed, rows = recovery_rate(
            params,
            config.env,
            config.physics,
            trials,
            seed=seed,
            timeout_s=ev.timeout_seconds,
            success_radius=ev.success_radius,
            hold_s=ev.hold_seconds,
            noisy=ev.noisy,
        )
        columns = ["row_type", "trial", "success", "recovery_time_s", "mean_speed",
                   "final_distance_m", "done_reason"]
        summary = {
            "row_type": "summary",
            "trial": trials,
            "success": rate,
            "recovery_time_s": float(np.nanmean([r["recovery_time_s"] for r in rows]))
            if rate > 0
            else float("nan"),
            "mean_speed": mean_speed,
            "final_distance_m": float(np.mean([r["final_distance_m"] for r in rows])),
            "done_reason": "",
        }
        table = [summary] + [{"row_type": "trial", **row} for row in rows]
        _write_csv(csv_path, columns, table)
        from .plots import plot_recovery_trials

        plot_recovery_trials(rows, fig_path)
        print(f"recovery rate {100 * rate:.1f}% over {trials} trials, "
              f"mean speed {mean_speed:.3f} m/s -> {csv_path}")
    elif scenario == "fig8":
        csv_path = out / "fig8.csv"
        fig_path = out / "fig8.png"
        _write_manifest(out / "manifest.json", "eval:fig8", config, seed,
                        {"metrics": csv_path, "figure": fig_path})
        ref = ReferenceTrajectory(
            center=config.env.target_position,
            amp_x=ev.fig8_amp_x,
            amp_y=ev.fig8_amp_y,
            period=ev.fig8_period,
        )
        rows = []
        first_record = None
        for trial, trial_seed in enumerate(np.random.SeedSequence(seed).spawn(trials)):
            record = run_episode(
                params, config.env, config.physics, trial_seed, reference=ref,
                noisy=ev.noisy,
            )
            rmse, max_err = tracking_error(record, ref)
            rows.append(
                {
                    "trial": trial,
                    "rmse_m": rmse,
                    "max_error_m": max_err,
                    "mean_speed": record.mean_payload_speed,
                    "steps": record.steps,
                    "done_reason": record.done_reason,
                }
            )
            if first_record is None:
                first_record = record
        _write_csv(
            csv_path,
            ["trial", "rmse_m", "max_error_m", "mean_speed", "steps", "done_reason"],
            rows,
        )
        from .plots import plot_fig8

        plot_fig8(first_record, ref, fig_path)
        mean_rmse = float(np.mean([r["rmse_m"] for r in rows]))
        print(f"figure-eight rmse {mean_rmse:.3f} m over {trials} trials -> {csv_path}")
    else:
        csv_path = out / f"sweep_{axis}.csv"
        fig_path = out / f"sweep_{axis}.png"
        _write_manifest(out / "manifest.json", f"eval:sweep:{axis}", config, seed,
                        {"metrics": csv_path, "figure": fig_path})
        values = (
            [float(v) for v in args.values.split(",")]
            if args.values
            else DEFAULT_SWEEP_VALUES[axis]
        )
        rows = generalization_sweep(
            params,
            config.env,
            config.physics,
            axis,
            values,
            trials,
            seed=seed,
            timeout_s=ev.timeout_seconds,
            success_radius=ev.success_radius,
            hold_s=ev.hold_seconds,
        )
        _write_csv(csv_path, ["axis", "value", "rate", "mean_speed", "n"], rows)
        from .plots import plot_sweep

        plot_sweep(rows, fig_path)
        print(f"swept {axis} over {len(values)} values -> {csv_path}")
    return 0


def cmd_rollout(args) -> int:
    params, _, config = _load_checkpoint_and_config(args)
    seed = args.seed if args.seed is not None else 0
    out_path = Path(args.out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    fig_path = out_path.with_suffix(".png")
    _write_manifest(
        out_path.parent / (out_path.stem + "_manifest.json"),
        "rollout",
        config,
        seed,
        {"trajectory": out_path, "figure": fig_path},
    )
    record = run_episode(
        params, config.env, config.physics, seed, noisy=config.eval.noisy
    )

    num_quads = record.quad_pos.shape[1]
    columns = ["time", "target_x", "target_y", "target_z"]
    columns += ["payload_px", "payload_py", "payload_pz", "payload_vx", "payload_vy", "payload_vz"]
    for i in range(num_quads):
        columns += [f"q{i}_px", f"q{i}_py", f"q{i}_pz"]
        columns += [f"q{i}_qw", f"q{i}_qx", f"q{i}_qy", f"q{i}_qz"]
        columns += [f"q{i}_vx", f"q{i}_vy", f"q{i}_vz"]
        columns += [f"q{i}_wx", f"q{i}_wy", f"q{i}_wz"]
        columns += [f"q{i}_cmd{j}" for j in range(4)]
        columns += [f"q{i}_thrust{j}" for j in range(4)]
    columns += RewardBreakdown.field_names()

    rows = []
    for s in range(record.steps):
        row = {"time": record.times[s + 1]}
        row.update(zip(["target_x", "target_y", "target_z"], record.targets[s + 1]))
        row.update(
            zip(
                ["payload_px", "payload_py", "payload_pz"],
                record.payload_pos[s + 1],
            )
        )
        row.update(
            zip(
                ["payload_vx", "payload_vy", "payload_vz"],
                record.payload_vel[s + 1],
            )
        )
        for i in range(num_quads):
            row.update(zip([f"q{i}_px", f"q{i}_py", f"q{i}_pz"], record.quad_pos[s + 1, i]))
            row.update(
                zip(
                    [f"q{i}_qw", f"q{i}_qx", f"q{i}_qy", f"q{i}_qz"],
                    record.quad_quat[s + 1, i],
                )
            )
            row.update(zip([f"q{i}_vx", f"q{i}_vy", f"q{i}_vz"], record.quad_vel[s + 1, i]))
            row.update(zip([f"q{i}_wx", f"q{i}_wy", f"q{i}_wz"], record.quad_omega[s + 1, i]))
            row.update({f"q{i}_cmd{j}": record.f_cmd[s, i, j] for j in range(4)})
            row.update({f"q{i}_thrust{j}": record.f_applied[s, i, j] for j in range(4)})
        for name in RewardBreakdown.field_names():
            row[name] = record.breakdowns[name][s]
        rows.append(row)
    _write_csv(out_path, columns, rows)
    from .plots import plot_rollout

    plot_rollout(record, fig_path)
    print(f"rolled out {record.steps} steps ({record.done_reason}) -> {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmlift",
        description="Train and evaluate decentralized multi-quadrotor payload policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the PPO training loop")
    p_train.add_argument("--config", required=True, help="YAML run configuration")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--seed", type=int, default=None, help="override train.seed")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument(
        "--scenario",
        required=True,
        help="recover, fig8, or sweep:<axis> with axis in "
        + ", ".join(SWEEP_AXES),
    )
    p_eval.add_argument("--trials", type=int, default=None)
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.add_argument("--config", default=None, help="optional YAML run configuration")
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--values", default=None, help="comma-separated sweep values")
    p_eval.set_defaults(func=cmd_eval)

    p_roll = sub.add_parser("rollout", help="record one deterministic episode to CSV")
    p_roll.add_argument("--checkpoint", required=True)
    p_roll.add_argument("--config", default=None, help="optional YAML run configuration")
    p_roll.add_argument("--seed", type=int, default=None)
    p_roll.add_argument("--out", required=True, help="output CSV path")
    p_roll.set_defaults(func=cmd_rollout)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return 2
    except TrainingFault as exc:
        print(f"training fault: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
