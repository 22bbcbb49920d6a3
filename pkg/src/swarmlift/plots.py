"""Report figures rendered next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import EpisodeRecord, ReferenceTrajectory, figure_eight_target


def plot_learning_curve(rows: list, path) -> None:
    updates = [row["update"] for row in rows]
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    axes[0, 0].plot(updates, [row["mean_episode_return"] for row in rows])
    axes[0, 0].set_xlabel("update")
    axes[0, 0].set_ylabel("mean episode return")
    axes[0, 1].plot(updates, [row["policy_loss"] for row in rows], label="policy")
    axes[0, 1].plot(updates, [row["value_loss"] for row in rows], label="value")
    axes[0, 1].set_xlabel("update")
    axes[0, 1].set_ylabel("loss")
    axes[0, 1].legend()
    axes[1, 0].plot(updates, [row["entropy"] for row in rows])
    axes[1, 0].set_xlabel("update")
    axes[1, 0].set_ylabel("policy entropy")
    for name in ("r_track", "r_stable", "r_safe"):
        axes[1, 1].plot(updates, [row[name] for row in rows], label=name)
    axes[1, 1].set_xlabel("update")
    axes[1, 1].set_ylabel("mean reward term")
    axes[1, 1].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rollout(record: EpisodeRecord, path) -> None:
    fig, axes = plt.subplots(1, 3, figsize=(14, 4.2))
    num_quads = record.quad_pos.shape[1]

    ax = axes[0]
    ax.plot(record.payload_pos[:, 0], record.payload_pos[:, 1], label="payload")
    for i in range(num_quads):
        ax.plot(
            record.quad_pos[:, i, 0],
            record.quad_pos[:, i, 1],
            linestyle=":",
            label=f"quad {i}",
        )
    ax.plot(record.targets[:, 0], record.targets[:, 1], "k--", alpha=0.6, label="target")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=8)

    ax = axes[1]
    ax.plot(record.times, record.payload_pos[:, 2], label="payload z")
    for i in range(num_quads):
        ax.plot(record.times, record.quad_pos[:, i, 2], linestyle=":", label=f"quad {i} z")
    ax.plot(record.times, record.targets[:, 2], "k--", alpha=0.6, label="target z")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("z [m]")
    ax.legend(fontsize=8)

    ax = axes[2]
    err = np.linalg.norm(record.payload_pos - record.targets, axis=-1)
    ax.plot(record.times, err)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("payload-target distance [m]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_recovery_trials(rows: list, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ok = [row for row in rows if row["success"]]
    bad = [row for row in rows if not row["success"]]
    if ok:
        ax.scatter(
            [row["recovery_time_s"] for row in ok],
            [row["mean_speed"] for row in ok],
            c="tab:green",
            label=f"recovered ({len(ok)})",
        )
    if bad:
        ax.scatter(
            [row["final_distance_m"] for row in bad],
            [row["mean_speed"] for row in bad],
            c="tab:red",
            marker="x",
            label=f"failed ({len(bad)}), x = final distance",
        )
    ax.set_xlabel("recovery time [s] / final distance [m]")
    ax.set_ylabel("mean payload speed [m/s]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_fig8(record: EpisodeRecord, ref: ReferenceTrajectory, path) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 5))
    dense_t = np.linspace(0.0, ref.period, 400)
    curve = figure_eight_target(dense_t, ref)
    ax.plot(curve[:, 0], curve[:, 1], "k--", alpha=0.7, label="reference")
    speed = np.linalg.norm(record.payload_vel, axis=-1)
    sc = ax.scatter(
        record.payload_pos[:, 0], record.payload_pos[:, 1], c=speed, s=4, cmap="viridis"
    )
    fig.colorbar(sc, ax=ax, label="payload speed [m/s]")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(rows: list, path) -> None:
    fig, ax1 = plt.subplots(figsize=(7, 4.5))
    values = [row["value"] for row in rows]
    ax1.plot(values, [100.0 * row["rate"] for row in rows], "o-", color="tab:blue")
    ax1.set_xlabel(rows[0]["axis"])
    ax1.set_ylabel("recovery rate [%]", color="tab:blue")
    ax1.set_ylim(-2, 102)
    ax2 = ax1.twinx()
    ax2.plot(values, [row["mean_speed"] for row in rows], "s--", color="tab:orange")
    ax2.set_ylabel("mean payload speed [m/s]", color="tab:orange")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
