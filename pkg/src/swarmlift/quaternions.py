"""Unit-quaternion helpers.

Convention: q = (w, x, y, z), scalar first, representing the rotation that
takes body-frame vectors into the world frame.  All functions broadcast over
leading axes, so a (Q, 4) stack of attitudes works the same as a single (4,).
"""

import numpy as np


def normalize(q: np.ndarray) -> np.ndarray:
    """Rescale to unit norm."""
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a * b."""
    aw, ax, ay, az = (a[..., i] for i in range(4))
    bw, bx, by, bz = (b[..., i] for i in range(4))
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate body-frame vector v into the world frame.

    q is renormalized defensively; the operation is norm-preserving.
    Cross products are spelled out component-wise (np.cross is slow on
    small arrays and this sits on the simulation hot path).
    """
    q = normalize(q)
    v = np.asarray(v, dtype=float)
    w, x, y, z = (q[..., i] for i in range(4))
    vx, vy, vz = (v[..., i] for i in range(3))
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.stack(
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ],
        axis=-1,
    )


def body_z(q: np.ndarray) -> np.ndarray:
    """World-frame direction of the body z axis (third column of the matrix)."""
    q = normalize(q)
    w, x, y, z = (q[..., i] for i in range(4))
    return np.stack(
        [2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y)],
        axis=-1,
    )


def to_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix (world <- body) with columns = rotated body axes."""
    q = normalize(q)
    w, x, y, z = (q[..., i] for i in range(4))
    row0 = np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1)
    row1 = np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1)
    row2 = np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def from_axis_angle(axis: np.ndarray, angle) -> np.ndarray:
    """Quaternion for a rotation of `angle` radians about `axis`."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    angle = np.asarray(angle, dtype=float)
    half = 0.5 * angle
    return np.concatenate(
        [np.cos(half)[..., None], np.sin(half)[..., None] * axis], axis=-1
    )


def identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def integrate(q: np.ndarray, omega_body: np.ndarray, dt: float) -> np.ndarray:
    """Advance attitude by body rates over dt (exact exponential map), renormalized."""
    half = 0.5 * dt * np.asarray(omega_body, dtype=float)
    theta = np.linalg.norm(half, axis=-1, keepdims=True)
    # sinc is sin(pi x)/(pi x); theta/pi gives sin(theta)/theta, finite at 0
    xyz = np.sinc(theta / np.pi) * half
    delta = np.concatenate([np.cos(theta), xyz], axis=-1)
    return normalize(multiply(q, delta))
