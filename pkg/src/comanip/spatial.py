"""Small 3-D rotation / quaternion / screw helpers shared by all modules.

Quaternions are unit, ordered (w, x, y, z).  Rotation matrices map
body-frame vectors into the world frame.
"""

from __future__ import annotations

import numpy as np

EPS = np.finfo(float).eps


def skew(v) -> np.ndarray:
    """Cross-product matrix S(v) with S(v) @ u == cross(v, u)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def cross3(a, b) -> np.ndarray:
    """a x b for 3-vectors; avoids np.cross overhead in hot loops."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def cross_rows(a, B) -> np.ndarray:
    """a x each row of B, shape (n, 3)."""
    out = np.empty_like(B)
    out[:, 0] = a[1] * B[:, 2] - a[2] * B[:, 1]
    out[:, 1] = a[2] * B[:, 0] - a[0] * B[:, 2]
    out[:, 2] = a[0] * B[:, 1] - a[1] * B[:, 0]
    return out


def rows_cross(B, a) -> np.ndarray:
    """each row of B x a, shape (n, 3)."""
    out = np.empty_like(B)
    out[:, 0] = B[:, 1] * a[2] - B[:, 2] * a[1]
    out[:, 1] = B[:, 2] * a[0] - B[:, 0] * a[2]
    out[:, 2] = B[:, 0] * a[1] - B[:, 1] * a[0]
    return out


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def quat_to_rot(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rot_to_quat(R) -> np.ndarray:
    """Unit quaternion (w,x,y,z) of a rotation matrix, w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def quat_mul(q1, q2) -> np.ndarray:
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_exp(phi) -> np.ndarray:
    """Unit quaternion exp(phi/2) for a rotation vector phi."""
    phi = np.asarray(phi, dtype=float)
    th = np.linalg.norm(phi)
    if th < 1e-12:
        # second-order series keeps the update exact to O(th^4)
        return quat_normalize(np.array([1.0 - th * th / 8.0, *(0.5 * (1.0 - th * th / 24.0) * phi)]))
    axis = phi / th
    return np.array([np.cos(0.5 * th), *(np.sin(0.5 * th) * axis)])


def rot_exp(phi) -> np.ndarray:
    """Rodrigues formula: matrix exponential of skew(phi)."""
    phi = np.asarray(phi, dtype=float)
    th = np.linalg.norm(phi)
    K = skew(phi)
    if th < 1e-12:
        return np.eye(3) + K + 0.5 * (K @ K)
    A = np.sin(th) / th
    B = (1.0 - np.cos(th)) / (th * th)
    return np.eye(3) + A * K + B * (K @ K)


def rot_log(R) -> np.ndarray:
    """Rotation vector of R (inverse of rot_exp), |phi| <= pi."""
    R = np.asarray(R, dtype=float)
    c = 0.5 * (np.trace(R) - 1.0)
    c = min(1.0, max(-1.0, c))
    th = np.arccos(c)
    if th < 1e-10:
        w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        return w
    if np.pi - th < 1e-7:
        # near pi: use the symmetric part
        A = 0.5 * (R + np.eye(3))
        axis = np.sqrt(np.maximum(np.diag(A), 0.0))
        # fix signs from off-diagonals
        i = int(np.argmax(axis))
        if axis[i] > 0:
            axis = A[:, i] / axis[i]
            axis = axis / np.linalg.norm(axis)
        return th * axis
    w = 0.5 / np.sin(th) * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return th * w


def integrate_quat(q, omega_body, dt) -> np.ndarray:
    """q  ⊗ exp(omega_body * dt / 2), renormalized."""
    return quat_normalize(quat_mul(q, quat_exp(np.asarray(omega_body) * dt)))


def truncated_pinv(A, rcond_scale: float | None = None):
    """Moore-Penrose pseudoinverse with the numerical-rank truncation rule
    sigma < max(shape) * eps * sigma_max treated as zero.

    Returns (pinv, rank, (U, s, Vt)).  All projector algebra in this package
    must go through this helper so that P, B and (Jc^T)^+ stay mutually
    consistent.
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return A.T.copy(), 0, (np.zeros((A.shape[0], 0)), np.zeros(0), np.zeros((0, A.shape[1])))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    scale = rcond_scale if rcond_scale is not None else max(A.shape) * EPS
    tol = scale * (s[0] if s.size else 0.0)
    r = int(np.sum(s > tol))
    if r == 0:
        return np.zeros(A.T.shape), 0, (U[:, :0], s[:0], Vt[:0])
    Ur, sr, Vtr = U[:, :r], s[:r], Vt[:r]
    pinv = (Vtr.T / sr) @ Ur.T
    return pinv, r, (Ur, sr, Vtr)


def rpy_to_rot(roll, pitch, yaw) -> np.ndarray:
    """Extrinsic x-y-z (equivalently intrinsic Z-Y-X) roll/pitch/yaw."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1.0]])
    Ry = np.array([[cp, 0, sp], [0, 1.0, 0], [-sp, 0, cp]])
    Rx = np.array([[1.0, 0, 0], [0, cr, -sr], [0, sr, cr]])
    return Rz @ Ry @ Rx


def yaw_of(R) -> float:
    return float(np.arctan2(R[1, 0], R[0, 0]))
