import math

import numpy as np
import pytest

from swarmlift import quaternions as quat
from swarmlift.physics import PhysicalParams, WorldState, default_motor_bank
from swarmlift.rewards import (
    RewardConstants,
    distance_gate,
    reward_safe,
    reward_stable,
    reward_total,
    reward_track,
    shaping_phi,
)

K = RewardConstants()
PHYS = PhysicalParams()


def reference_reward(world, target, actions, prev_actions, collided, oob, k, cable_length):
    """Independent literal transcription of the composite reward (scalar math).

    Kept deliberately separate from the production implementation: plain
    Python loops, math.* functions, no shared helpers.
    """
    num_quads = len(world.quad_pos)

    def phi(s, x):
        return math.exp(-s * abs(x))

    e_p = [target[i] - world.payload_pos[i] for i in range(3)]
    d = math.sqrt(sum(c * c for c in e_p))
    g = min(3.0 * d, 1.0) + k.speed_gate_floor

    # tracking
    r_pos = phi(k.shaping_sharpness, d)
    vp_norm = math.sqrt(sum(c * c for c in world.payload_vel))
    v_dir = [c / (vp_norm + k.direction_epsilon) for c in world.payload_vel]
    e_dir = [c / (d + k.direction_epsilon) for c in e_p]
    s_align = min(k.align_sharpness_gain * d, k.align_sharpness_cap)
    r_dir = phi(s_align, 1.0 - sum(a * b for a, b in zip(v_dir, e_dir)))
    r_track = 0.5 * (r_pos + r_dir)

    # stability
    r_velP = math.exp(
        -((vp_norm / (k.payload_speed_fraction * k.max_speed * g)) ** k.speed_wall_exponent)
    )
    r_velQ = 0.0
    r_yaw = 0.0
    r_up = 0.0
    r_taut = 0.0
    for i in range(num_quads):
        vi = math.sqrt(sum(c * c for c in world.quad_vel[i]))
        r_velQ += math.exp(-((vi / (k.max_speed * g)) ** k.speed_wall_exponent))
        r_yaw += phi(k.shaping_sharpness, world.quad_omega[i][2])
        body_z = quat.rotate(np.asarray(world.quad_quat[i]), np.array([0.0, 0.0, 1.0]))
        tilt = math.acos(max(-1.0, min(1.0, float(body_z[2]))))
        r_up += phi(k.shaping_sharpness, tilt)
        rel = [world.quad_pos[i][c] - world.payload_pos[c] for c in range(3)]
        r_taut += math.sqrt(sum(c * c for c in rel)) + rel[2]
    r_velQ /= num_quads
    r_yaw /= num_quads
    r_up /= num_quads
    r_taut /= num_quads * cable_length
    r_stable = (
        r_velP + r_velQ + k.yaw_weight * r_yaw + k.upright_weight * r_up + r_taut
    ) / 5.0

    # safety
    if num_quads == 1:
        r_dist = 1.0
    else:
        pair_terms = []
        for i in range(num_quads):
            for j in range(num_quads):
                if i == j:
                    continue
                sep = math.sqrt(
                    sum((world.quad_pos[i][c] - world.quad_pos[j][c]) ** 2 for c in range(3))
                )
                val = (sep - k.collision_distance) / (k.safe_distance - k.collision_distance)
                pair_terms.append(max(0.0, min(1.0, val)))
        r_dist = sum(pair_terms) / len(pair_terms)
    r_coll = k.collision_penalty * (1.0 if collided else 0.0)
    r_oob = k.out_of_bounds_penalty * (1.0 if oob else 0.0)
    smooth_a = 0.0
    smooth_b = 0.0
    r_energy = 0.0
    for i in range(num_quads):
        smooth_a += sum(abs(actions[i][j] - prev_actions[i][j]) for j in range(4))
        mean_cmd = sum(actions[i]) / 4.0
        smooth_b += sum(abs(actions[i][j] - mean_cmd) for j in range(4))
        for j in range(4):
            u = 0.5 * (actions[i][j] + 1.0)
            r_energy += math.exp(-k.saturation_barrier_gain * abs(u)) + math.exp(
                k.saturation_barrier_gain * (u - 1.0)
            )
    r_smooth = 0.5 * (smooth_a / num_quads + smooth_b / num_quads)
    r_energy /= num_quads * 4
    r_safe = (-r_coll - r_oob - k.smoothness_weight * r_smooth - r_energy + r_dist) / 5.0

    return r_track * r_stable + r_safe


def random_world(rng, num_quads):
    quad_quat = np.stack(
        [q / np.linalg.norm(q) for q in rng.standard_normal((num_quads, 4))]
    )
    return WorldState(
        quad_pos=rng.uniform(-2.0, 2.0, (num_quads, 3)) + [0.0, 0.0, 2.0],
        quad_quat=quad_quat,
        quad_vel=rng.uniform(-3.0, 3.0, (num_quads, 3)),
        quad_omega=rng.uniform(-10.0, 10.0, (num_quads, 3)),
        payload_pos=rng.uniform(-2.0, 2.0, 3) + [0.0, 0.0, 1.5],
        payload_vel=rng.uniform(-3.0, 3.0, 3),
        motors=default_motor_bank(num_quads, PHYS),
    )


# ------------------------------------------------------------- shaping/gate


def test_phi_at_zero_is_one():
    for s in (0.0, 1.0, 2.0, 50.0):
        assert shaping_phi(s, 0.0) == 1.0


def test_phi_hand_evaluation():
    assert shaping_phi(2.0, 0.5) == pytest.approx(math.exp(-1.0))
    assert shaping_phi(2.0, 0.5) == pytest.approx(0.36788, abs=1e-5)


def test_phi_monotone_non_increasing():
    xs = np.linspace(0.0, 5.0, 200)
    vals = shaping_phi(2.0, xs)
    assert np.all(np.diff(vals) <= 0.0)
    assert np.all((vals > 0.0) & (vals <= 1.0))


def test_distance_gate_values():
    assert distance_gate(0.0, 0.02) == pytest.approx(0.02)
    assert distance_gate(1.0, 0.02) == pytest.approx(1.02)
    assert distance_gate(1.0 / 3.0, 0.02) == pytest.approx(1.02)


# ---------------------------------------------------------------- tracking


def test_track_at_rest_on_target():
    # zero error, zero velocity: alignment sharpness collapses to zero
    r_track, r_pos, r_dir = reward_track(np.zeros(3), np.zeros(3), K)
    assert r_pos == pytest.approx(1.0)
    assert r_dir == pytest.approx(1.0)
    assert r_track == pytest.approx(1.0)


def test_track_perfect_alignment():
    e = np.array([2.0, 0.0, 0.0])
    v = np.array([1.3, 0.0, 0.0])
    _, _, r_dir = reward_track(e, v, K)
    assert r_dir == pytest.approx(1.0, abs=1e-4)


def test_track_position_shaping_at_half_meter():
    _, r_pos, _ = reward_track(np.array([0.5, 0.0, 0.0]), np.zeros(3), K)
    assert r_pos == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_alignment_sharpness_cap():
    # for ||e|| >= cap/gain = 0.05 m the sharpness saturates at the cap
    for dist in (0.05, 0.1, 1.0):
        e = np.array([dist, 0.0, 0.0])
        v = np.array([0.0, 1.0, 0.0])  # orthogonal: argument is exactly 1
        _, _, r_dir = reward_track(e, v, K)
        assert r_dir == pytest.approx(math.exp(-K.align_sharpness_cap), rel=1e-6)


# --------------------------------------------------------------- stability


def test_stable_all_static_terms():
    world = random_world(np.random.default_rng(0), 2)
    world.quad_vel[:] = 0.0
    world.payload_vel[:] = 0.0
    world.quad_omega[:] = 0.0
    world.quad_quat[:] = quat.identity()
    _, r_velP, r_velQ, r_yaw, r_up, _ = reward_stable(
        world, np.array([0.3, 0.0, 0.0]), K, PHYS.cable_length
    )
    assert r_velP == pytest.approx(1.0)
    assert r_velQ == pytest.approx(1.0)
    assert r_yaw == pytest.approx(1.0)
    assert r_up == pytest.approx(1.0)


def test_taut_term_quad_directly_above():
    world = random_world(np.random.default_rng(1), 1)
    world.payload_pos = np.array([0.0, 0.0, 1.0])
    world.quad_pos = np.array([[0.0, 0.0, 1.0 + PHYS.cable_length]])
    _, _, _, _, _, r_taut = reward_stable(world, np.zeros(3), K, PHYS.cable_length)
    assert r_taut == pytest.approx(2.0)


def test_velocity_soft_wall_crossing():
    # r_velP is strictly decreasing in payload speed and equals 1/e exactly
    # at the gated cap
    world = random_world(np.random.default_rng(2), 1)
    e_p = np.array([0.4, 0.0, 0.0])
    d = np.linalg.norm(e_p)
    cap = K.payload_speed_fraction * K.max_speed * distance_gate(d, K.speed_gate_floor)
    # stay below the float64 underflow of the soft wall so values remain distinct
    speeds = np.linspace(0.01, 2.0, 120)
    vals = []
    for s in speeds:
        world.payload_vel = np.array([s, 0.0, 0.0])
        _, r_velP, *_ = reward_stable(world, e_p, K, PHYS.cable_length)
        vals.append(float(r_velP))
    assert np.all(np.diff(vals) < 0.0)
    world.payload_vel = np.array([cap, 0.0, 0.0])
    _, r_at_cap, *_ = reward_stable(world, e_p, K, PHYS.cable_length)
    assert r_at_cap == pytest.approx(math.exp(-1.0), rel=1e-12)


# ------------------------------------------------------------------ safety


def test_dist_single_quad_is_one():
    world = random_world(np.random.default_rng(3), 1)
    _, r_dist, *_ = reward_safe(
        world, np.zeros((1, 4)), np.zeros((1, 4)), False, False, K
    )
    assert r_dist == pytest.approx(1.0)


def test_energy_barrier_midpoint():
    world = random_world(np.random.default_rng(4), 1)
    # u = 0.5 on all motors -> 2 exp(-25)
    actions = np.zeros((1, 4))
    _, _, _, _, _, r_energy = reward_safe(world, actions, actions, False, False, K)
    assert r_energy == pytest.approx(2.0 * math.exp(-25.0), rel=1e-12)
    assert r_energy == pytest.approx(2.8e-11, rel=0.05)


def test_collision_flag_contribution():
    world = random_world(np.random.default_rng(5), 1)
    actions = np.zeros((1, 4))
    r_safe_clear, *_ = reward_safe(world, actions, actions, False, False, K)
    r_safe_coll, *_ = reward_safe(world, actions, actions, True, False, K)
    assert r_safe_clear - r_safe_coll == pytest.approx(10.0 / 5.0)


def test_dist_term_interpolates():
    world = random_world(np.random.default_rng(6), 2)
    world.quad_pos = np.array([[0.0, 0.0, 1.0], [0.165, 0.0, 1.0]])
    _, r_dist, *_ = reward_safe(
        world, np.zeros((2, 4)), np.zeros((2, 4)), False, False, K
    )
    assert r_dist == pytest.approx(0.5)


# ------------------------------------------------------------------- total


def test_total_matches_reference_on_random_states():
    rng = np.random.default_rng(42)
    for trial in range(500):
        num_quads = int(rng.integers(1, 4))
        world = random_world(rng, num_quads)
        target = rng.uniform(-1.0, 1.0, 3) + [0.0, 0.0, 1.5]
        actions = rng.uniform(-1.0, 1.0, (num_quads, 4))
        prev = rng.uniform(-1.0, 1.0, (num_quads, 4))
        collided = bool(rng.random() < 0.2)
        oob = bool(rng.random() < 0.2)
        total, _ = reward_total(
            world, target, actions, prev, collided, oob, K, PHYS.cable_length
        )
        expected = reference_reward(
            world, target, actions, prev, collided, oob, K, PHYS.cable_length
        )
        assert float(total) == pytest.approx(expected, abs=1e-12)


def test_flags_dominate_on_collision_consistent_states():
    # states geometrically consistent with a collision (quads inside the
    # minimum separation, cables within reach): penalties outweigh every
    # bounded positive term
    rng = np.random.default_rng(7)
    for _ in range(100):
        world = random_world(rng, 2)
        base = rng.uniform(-1.0, 1.0, 3) + [0.0, 0.0, 1.5]
        offset = rng.uniform(-1.0, 1.0, 3)
        offset *= rng.uniform(0.0, 0.14) / np.linalg.norm(offset)
        world.quad_pos = np.stack([base, base + offset])
        world.payload_pos = base + np.array([0.0, 0.0, -0.25])
        actions = rng.uniform(-1, 1, (2, 4))
        total, _ = reward_total(
            world, world.payload_pos, actions, actions, True, True, K, PHYS.cable_length
        )
        assert float(total) < 0.0


def test_multiplicative_structure():
    # total is exactly r_track * r_stable + r_safe, so zeroing the tracking
    # factor leaves only the safety term
    rng = np.random.default_rng(8)
    for _ in range(50):
        world = random_world(rng, 2)
        target = rng.uniform(-1, 1, 3)
        actions = rng.uniform(-1, 1, (2, 4))
        total, bd = reward_total(
            world, target, actions, actions, False, False, K, PHYS.cable_length
        )
        assert float(total) == float(bd.r_track) * float(bd.r_stable) + float(bd.r_safe)


def test_agent_relabeling_invariance():
    rng = np.random.default_rng(9)
    for _ in range(20):
        world = random_world(rng, 3)
        target = rng.uniform(-1, 1, 3)
        actions = rng.uniform(-1, 1, (3, 4))
        prev = rng.uniform(-1, 1, (3, 4))
        total, _ = reward_total(world, target, actions, prev, False, False, K, PHYS.cable_length)
        perm = rng.permutation(3)
        world2 = WorldState(
            quad_pos=world.quad_pos[perm],
            quad_quat=world.quad_quat[perm],
            quad_vel=world.quad_vel[perm],
            quad_omega=world.quad_omega[perm],
            payload_pos=world.payload_pos,
            payload_vel=world.payload_vel,
            motors=world.motors,
        )
        total2, _ = reward_total(
            world2, target, actions[perm], prev[perm], False, False, K, PHYS.cable_length
        )
        assert float(total2) == pytest.approx(float(total), rel=1e-12)


def test_non_finite_term_is_reported():
    world = random_world(np.random.default_rng(10), 1)
    world.payload_vel = np.array([np.inf, 0.0, 0.0])
    with np.errstate(all="ignore"), pytest.raises(FloatingPointError):
        reward_total(
            world,
            np.zeros(3),
            np.zeros((1, 4)),
            np.zeros((1, 4)),
            False,
            False,
            K,
            PHYS.cable_length,
        )


def test_batched_evaluation_matches_loop():
    rng = np.random.default_rng(11)
    batch = 64
    num_quads = 2
    worlds = [random_world(rng, num_quads) for _ in range(batch)]
    stacked = WorldState(
        quad_pos=np.stack([w.quad_pos for w in worlds]),
        quad_quat=np.stack([w.quad_quat for w in worlds]),
        quad_vel=np.stack([w.quad_vel for w in worlds]),
        quad_omega=np.stack([w.quad_omega for w in worlds]),
        payload_pos=np.stack([w.payload_pos for w in worlds]),
        payload_vel=np.stack([w.payload_vel for w in worlds]),
        motors=worlds[0].motors,
    )
    target = rng.uniform(-1, 1, (batch, 3))
    actions = rng.uniform(-1, 1, (batch, num_quads, 4))
    prev = rng.uniform(-1, 1, (batch, num_quads, 4))
    coll = rng.random(batch) < 0.5
    oob = rng.random(batch) < 0.5
    totals, _ = reward_total(stacked, target, actions, prev, coll, oob, K, PHYS.cable_length)
    for b in range(batch):
        single, _ = reward_total(
            worlds[b], target[b], actions[b], prev[b], bool(coll[b]), bool(oob[b]),
            K, PHYS.cable_length,
        )
        assert float(totals[b]) == pytest.approx(float(single), rel=1e-12)
