"""Rigid-body simulation core.

Quadrotors are free rigid bodies, the payload is a point mass, and each cable
is a unilateral spring-damper that pulls only when stretched past its natural
length.  Motors respond through a first-order lag on a rotor-speed proxy
(sqrt of thrust), and ground contact is a penalty-force model with
Coulomb-capped friction.

Every function here is a pure state transition: no globals, no hidden RNG.
Many worlds can be stepped concurrently by the caller.  The vector kernels
(cable, contact, wrench, lag) broadcast over leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import quaternions as quat

PAYLOAD = "payload"  # ExternalWrench target sentinel

_Z = np.array([0.0, 0.0, 1.0])


class IntegrationFault(RuntimeError):
    """A dynamics step produced a non-finite quantity."""

    def __init__(self, quantity: str, value):
        self.quantity = quantity
        self.value = value
        super().__init__(f"non-finite {quantity} after dynamics step: {value!r}")


def x_config_motor_positions(half_span: float) -> np.ndarray:
    """Four motor positions (body frame, meters) in an X layout.

    `half_span` is the |x| = |y| offset of each motor; arm length is
    half_span * sqrt(2).  Order runs counterclockwise from the front-right
    arm so that alternating spin signs (+,-,+,-) balance yaw.
    """
    a = float(half_span)
    return np.array(
        [
            [a, a, 0.0],
            [-a, a, 0.0],
            [-a, -a, 0.0],
            [a, -a, 0.0],
        ]
    )


@dataclass
class PhysicalParams:
    """Plant constants, SI units throughout."""

    quad_mass: float = 0.034
    quad_inertia: np.ndarray = field(
        default_factory=lambda: np.array([1.7e-5, 1.7e-5, 2.9e-5])
    )  # diagonal, kg m^2
    motor_positions: np.ndarray = field(
        default_factory=lambda: x_config_motor_positions(0.0325)
    )
    rotor_spin_signs: np.ndarray = field(
        default_factory=lambda: np.array([1.0, -1.0, 1.0, -1.0])
    )
    thrust_to_torque: float = 0.006  # reaction torque per newton of thrust
    nominal_thrust_cap: float = 0.12  # per-motor cap without randomization, N
    payload_mass: float = 0.01
    payload_radius: float = 0.01
    # stiffness/damping chosen inside the 250 Hz semi-implicit stability
    # region for every body mass in the supported sweep range
    cable_length: float = 0.3
    cable_stiffness: float = 500.0
    cable_damping: float = 0.5
    ground_stiffness: float = 500.0
    ground_damping: float = 1.0
    friction_coefficient: float = 0.5
    quad_collision_radius: float = 0.05
    gravity: float = 9.81
    dt: float = 0.004

    def __post_init__(self):
        self.quad_inertia = np.asarray(self.quad_inertia, dtype=float)
        self.motor_positions = np.asarray(self.motor_positions, dtype=float)
        self.rotor_spin_signs = np.asarray(self.rotor_spin_signs, dtype=float)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        for name in ("quad_mass", "payload_mass", "cable_length", "cable_stiffness"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def arm_half_span(self) -> float:
        return float(abs(self.motor_positions[0, 0]))

    def hover_thrust_per_motor(self) -> float:
        return self.quad_mass * self.gravity / 4.0

    def to_dict(self) -> dict:
        """Flat key/value form used by the config file."""
        return {
            "quad_mass": self.quad_mass,
            "quad_inertia": [float(v) for v in self.quad_inertia],
            "arm_half_span": self.arm_half_span,
            "thrust_to_torque": self.thrust_to_torque,
            "nominal_thrust_cap": self.nominal_thrust_cap,
            "payload_mass": self.payload_mass,
            "payload_radius": self.payload_radius,
            "cable_length": self.cable_length,
            "cable_stiffness": self.cable_stiffness,
            "cable_damping": self.cable_damping,
            "ground_stiffness": self.ground_stiffness,
            "ground_damping": self.ground_damping,
            "friction_coefficient": self.friction_coefficient,
            "quad_collision_radius": self.quad_collision_radius,
            "gravity": self.gravity,
            "dt": self.dt,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicalParams":
        data = dict(data)
        half_span = data.pop("arm_half_span", 0.0325)
        data["motor_positions"] = x_config_motor_positions(half_span)
        return cls(**data)


@dataclass
class MotorBank:
    """Per-quad motor state: filtered speed proxy, thrust caps, lag constant."""

    filtered_speed_proxy: np.ndarray  # (..., 4), sqrt-newton units
    thrust_cap: np.ndarray  # (..., 4), N
    lag_time_constant: np.ndarray  # (...,), s

    def __post_init__(self):
        self.filtered_speed_proxy = np.asarray(self.filtered_speed_proxy, dtype=float)
        self.thrust_cap = np.asarray(self.thrust_cap, dtype=float)
        self.lag_time_constant = np.asarray(self.lag_time_constant, dtype=float)

    def copy(self) -> "MotorBank":
        return MotorBank(
            self.filtered_speed_proxy.copy(),
            self.thrust_cap.copy(),
            self.lag_time_constant.copy(),
        )


@dataclass
class ExternalWrench:
    """One-step disturbance: world-frame force, body-frame torque."""

    force: np.ndarray  # (3,), N
    torque: np.ndarray  # (3,), N m
    target: int | str = PAYLOAD  # quad index, or PAYLOAD

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=float)
        self.torque = np.asarray(self.torque, dtype=float)


@dataclass
class WorldState:
    """Full simulator state for Q quads plus the payload.

    Quad arrays are stacked along the first axis; the attitude quaternions
    are (w, x, y, z), world <- body.
    """

    quad_pos: np.ndarray  # (Q, 3), m, world frame
    quad_quat: np.ndarray  # (Q, 4), unit
    quad_vel: np.ndarray  # (Q, 3), m/s, world frame
    quad_omega: np.ndarray  # (Q, 3), rad/s, body frame
    payload_pos: np.ndarray  # (3,), m
    payload_vel: np.ndarray  # (3,), m/s
    motors: MotorBank  # arrays shaped (Q, 4) / (Q,)
    time: float = 0.0
    step_count: int = 0

    def __post_init__(self):
        self.quad_pos = np.asarray(self.quad_pos, dtype=float)
        self.quad_quat = np.asarray(self.quad_quat, dtype=float)
        self.quad_vel = np.asarray(self.quad_vel, dtype=float)
        self.quad_omega = np.asarray(self.quad_omega, dtype=float)
        self.payload_pos = np.asarray(self.payload_pos, dtype=float)
        self.payload_vel = np.asarray(self.payload_vel, dtype=float)

    @property
    def num_quads(self) -> int:
        return self.quad_pos.shape[0]

    def copy(self) -> "WorldState":
        return WorldState(
            self.quad_pos.copy(),
            self.quad_quat.copy(),
            self.quad_vel.copy(),
            self.quad_omega.copy(),
            self.payload_pos.copy(),
            self.payload_vel.copy(),
            self.motors.copy(),
            self.time,
            self.step_count,
        )

    def body_z_world(self) -> np.ndarray:
        """(Q, 3) world-frame direction of each quad's body z axis."""
        return quat.body_z(self.quad_quat)


def default_motor_bank(num_quads: int, params: PhysicalParams) -> MotorBank:
    """Nominal motors: hover-level filtered state, uniform caps, fast lag."""
    hover = params.hover_thrust_per_motor()
    return MotorBank(
        filtered_speed_proxy=np.full((num_quads, 4), np.sqrt(hover)),
        thrust_cap=np.full((num_quads, 4), params.nominal_thrust_cap),
        lag_time_constant=np.full(num_quads, params.dt),
    )


def attitude_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Express body-frame vector v in the world frame."""
    return quat.rotate(q, v)


def motor_lag_step(
    motors: MotorBank, f_cmd: np.ndarray, dt: float
) -> tuple[MotorBank, np.ndarray]:
    """Advance the first-order rotor-speed filter and return applied thrusts.

    The filter runs on nu = sqrt(thrust); alpha = dt / tau, clipped to 1 so
    a lag faster than the step responds instantly.  Applied thrust is the
    squared filtered proxy, clipped to the per-motor cap.
    """
    f_cmd = np.asarray(f_cmd, dtype=float)
    if np.any(f_cmd < 0.0):
        raise ValueError("commanded thrusts must be non-negative")
    alpha = np.minimum(dt / motors.lag_time_constant, 1.0)[..., None]
    nu_cmd = np.sqrt(f_cmd)
    nu = motors.filtered_speed_proxy + alpha * (nu_cmd - motors.filtered_speed_proxy)
    nu = np.clip(nu, 0.0, np.sqrt(motors.thrust_cap))
    f_applied = np.clip(nu * nu, 0.0, motors.thrust_cap)
    return replace(motors, filtered_speed_proxy=nu), f_applied


def body_wrench_from_thrusts(
    f: np.ndarray, params: PhysicalParams
) -> tuple[np.ndarray, np.ndarray]:
    """Total body-frame force and torque from four motor thrusts.

    Each motor pushes along body z at its mount point and adds a reaction
    torque about body z with its spin sign.
    """
    f = np.asarray(f, dtype=float)
    zeros = np.zeros_like(f[..., 0])
    force = np.stack([zeros, zeros, f.sum(axis=-1)], axis=-1)
    pos = params.motor_positions
    torque = np.stack(
        [
            (f * pos[:, 1]).sum(axis=-1),
            -(f * pos[:, 0]).sum(axis=-1),
            params.thrust_to_torque * (f * params.rotor_spin_signs).sum(axis=-1),
        ],
        axis=-1,
    )
    return force, torque


def cable_force(
    quad_pos: np.ndarray,
    quad_vel: np.ndarray,
    payload_pos: np.ndarray,
    payload_vel: np.ndarray,
    params: PhysicalParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Hybrid taut/slack cable forces: (force_on_quad, force_on_payload).

    Slack (separation <= natural length) exerts nothing.  Taut tension is a
    spring on the stretch plus damping on the separation rate, only while
    separating, and can never push.  Coincident endpoints are degenerate and
    return zero force.
    """
    quad_pos = np.asarray(quad_pos, dtype=float)
    payload_pos = np.asarray(payload_pos, dtype=float)
    rel = quad_pos - payload_pos
    d = np.linalg.norm(rel, axis=-1, keepdims=True)
    safe_d = np.where(d > 0.0, d, 1.0)
    u = rel / safe_d
    sep_speed = np.sum(
        (np.asarray(quad_vel, dtype=float) - np.asarray(payload_vel, dtype=float)) * u,
        axis=-1,
        keepdims=True,
    )
    tension = params.cable_stiffness * (d - params.cable_length)
    tension = tension + params.cable_damping * np.maximum(sep_speed, 0.0)
    taut = (d > params.cable_length) & (d > 0.0)
    tension = np.where(taut, np.maximum(tension, 0.0), 0.0)
    force_on_payload = tension * u
    return -force_on_payload, force_on_payload


def ground_contact_force(
    position: np.ndarray,
    velocity: np.ndarray,
    radius: float,
    params: PhysicalParams,
) -> np.ndarray:
    """Penalty contact for a sphere against the z=0 plane.

    Normal force is stiffness * penetration plus damping on downward speed,
    never negative.  Tangential friction opposes horizontal velocity,
    viscous but capped at mu * normal (Coulomb limit).
    """
    position = np.asarray(position, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    penetration = np.maximum(radius - position[..., 2], 0.0)
    in_contact = penetration > 0.0
    normal = params.ground_stiffness * penetration + params.ground_damping * np.maximum(
        -velocity[..., 2], 0.0
    )
    normal = np.where(in_contact, np.maximum(normal, 0.0), 0.0)

    v_h = velocity[..., :2]
    speed_h = np.linalg.norm(v_h, axis=-1)
    friction_mag = np.minimum(
        params.friction_coefficient * normal, params.ground_damping * speed_h
    )
    safe_speed = np.where(speed_h > 0.0, speed_h, 1.0)
    friction = -friction_mag[..., None] * v_h / safe_speed[..., None]
    friction = np.where(in_contact[..., None], friction, 0.0)
    return np.concatenate([friction, normal[..., None]], axis=-1)


def step_dynamics(
    world: WorldState,
    f_applied: np.ndarray,
    external: list[ExternalWrench] | tuple,
    params: PhysicalParams,
) -> WorldState:
    """One semi-implicit Euler step of the full multi-body system.

    Aggregates rotor wrenches, cable tension, ground contact, gravity, and
    external disturbances; integrates velocities first, then positions; the
    attitude quaternion is advanced with the updated body rates and
    renormalized.
    """
    q = world.num_quads
    dt = params.dt

    body_force, body_torque = body_wrench_from_thrusts(f_applied, params)
    thrust_world = quat.rotate(world.quad_quat, body_force)

    f_quad_cable, f_payload_cable = cable_force(
        world.quad_pos, world.quad_vel, world.payload_pos, world.payload_vel, params
    )
    contact_quad = ground_contact_force(
        world.quad_pos, world.quad_vel, params.quad_collision_radius, params
    )
    contact_payload = ground_contact_force(
        world.payload_pos, world.payload_vel, params.payload_radius, params
    )

    ext_force_quad = np.zeros((q, 3))
    ext_torque_quad = np.zeros((q, 3))
    ext_force_payload = np.zeros(3)
    for w in external:
        if w.target == PAYLOAD:
            ext_force_payload = ext_force_payload + w.force
        else:
            ext_force_quad[w.target] += w.force
            ext_torque_quad[w.target] += w.torque

    gravity = np.array([0.0, 0.0, -params.gravity])
    acc_quad = (
        thrust_world + f_quad_cable + contact_quad + ext_force_quad
    ) / params.quad_mass + gravity
    acc_payload = (
        f_payload_cable.sum(axis=0) + contact_payload + ext_force_payload
    ) / params.payload_mass + gravity

    inertia = params.quad_inertia
    torque_total = body_torque + ext_torque_quad
    omega = world.quad_omega
    iw = inertia * omega
    gyroscopic = np.stack(
        [
            omega[..., 1] * iw[..., 2] - omega[..., 2] * iw[..., 1],
            omega[..., 2] * iw[..., 0] - omega[..., 0] * iw[..., 2],
            omega[..., 0] * iw[..., 1] - omega[..., 1] * iw[..., 0],
        ],
        axis=-1,
    )
    omega_dot = (torque_total - gyroscopic) / inertia

    quad_vel = world.quad_vel + dt * acc_quad
    quad_pos = world.quad_pos + dt * quad_vel
    payload_vel = world.payload_vel + dt * acc_payload
    payload_pos = world.payload_pos + dt * payload_vel
    quad_omega = world.quad_omega + dt * omega_dot
    quad_quat = quat.integrate(world.quad_quat, quad_omega, dt)

    new = WorldState(
        quad_pos=quad_pos,
        quad_quat=quad_quat,
        quad_vel=quad_vel,
        quad_omega=quad_omega,
        payload_pos=payload_pos,
        payload_vel=payload_vel,
        motors=world.motors,
        time=world.time + dt,
        step_count=world.step_count + 1,
    )
    # single cheap sentinel; only name the offender on the failure path
    sentinel = (
        quad_pos.sum()
        + quad_quat.sum()
        + quad_vel.sum()
        + quad_omega.sum()
        + payload_pos.sum()
        + payload_vel.sum()
    )
    if not np.isfinite(sentinel):
        for name in (
            "quad_pos",
            "quad_quat",
            "quad_vel",
            "quad_omega",
            "payload_pos",
            "payload_vel",
        ):
            value = getattr(new, name)
            if not np.all(np.isfinite(value)):
                raise IntegrationFault(name, value)
        raise IntegrationFault("state", sentinel)
    return new


def check_collision(world: WorldState, d_min: float, params: PhysicalParams) -> bool:
    """True on inter-quad proximity, quad-payload contact, or a tilted ground hit."""
    q = world.num_quads
    for i in range(q):
        for j in range(i + 1, q):
            if np.linalg.norm(world.quad_pos[i] - world.quad_pos[j]) < d_min:
                return True
    dist_payload = np.linalg.norm(world.quad_pos - world.payload_pos, axis=-1)
    if np.any(dist_payload < params.quad_collision_radius):
        return True
    cos_tilt = world.body_z_world()[:, 2]
    on_ground = world.quad_pos[:, 2] < params.quad_collision_radius
    crashed = on_ground & (cos_tilt < 0.5)  # tilt beyond 60 degrees
    return bool(np.any(crashed))
