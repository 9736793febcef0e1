"""Numba-compiled kernels for the kinematics/dynamics recursions.

Pure-numpy fallbacks live in model.py; these kernels compute identical
quantities on flattened model arrays.  Joint type codes: 0 floating,
1 revolute, 2 prismatic, 3 fixed.
"""

from __future__ import annotations

import os

import numpy as np

HAVE_NUMBA = False
if not os.environ.get("COMANIP_NO_NUMBA"):
    try:
        from numba import njit
        HAVE_NUMBA = True
    except ImportError:      # pragma: no cover - exercised only without numba
        pass

if not HAVE_NUMBA:           # pragma: no cover
    def njit(*a, **k):
        def wrap(f):
            return f
        return wrap(a[0]) if a and callable(a[0]) else wrap


@njit(cache=True)
def _quat_to_rot(qw, qx, qy, qz, R):
    R[0, 0] = 1 - 2 * (qy * qy + qz * qz)
    R[0, 1] = 2 * (qx * qy - qz * qw)
    R[0, 2] = 2 * (qx * qz + qy * qw)
    R[1, 0] = 2 * (qx * qy + qz * qw)
    R[1, 1] = 1 - 2 * (qx * qx + qz * qz)
    R[1, 2] = 2 * (qy * qz - qx * qw)
    R[2, 0] = 2 * (qx * qz - qy * qw)
    R[2, 1] = 2 * (qy * qz + qx * qw)
    R[2, 2] = 1 - 2 * (qx * qx + qy * qy)


@njit(cache=True)
def forward_pass(parent, jtype, axis, t_pos, t_rot, q_off, v_off, q, qd, gravity):
    n = parent.shape[0]
    D = qd.shape[0]
    R = np.zeros((n, 3, 3))
    p = np.zeros((n, 3))
    ax_w = np.zeros((D, 3))
    ax_v = np.zeros((D, 3))
    vel = np.zeros((n, 6))
    bias = np.zeros((n, 6))
    vj = np.zeros(6)
    for i in range(n):
        par = parent[i]
        jt = jtype[i]
        qo = q_off[i]
        vo = v_off[i]
        if jt == 0:  # floating
            _quat_to_rot(q[qo + 3], q[qo + 4], q[qo + 5], q[qo + 6], R[i])
            for k in range(3):
                p[i, k] = q[qo + k]
        else:
            # joint frame from parent
            for r in range(3):
                pr = 0.0
                for c in range(3):
                    acc = 0.0
                    for m in range(3):
                        Rparm = t_rot[i, m, c]
                        if par >= 0:
                            acc += R[par, r, m] * Rparm
                        elif r == m:
                            acc += Rparm
                    R[i, r, c] = acc
                    pr += (R[par, r, c] if par >= 0 else (1.0 if r == c else 0.0)) * t_pos[i, c]
                p[i, r] = pr + (p[par, r] if par >= 0 else 0.0)
            if jt == 1:  # revolute: R[i] @ Rodrigues(axis, q)
                th = q[qo]
                cth = np.cos(th)
                sth = np.sin(th)
                ux, uy, uz = axis[i, 0], axis[i, 1], axis[i, 2]
                Rj = np.empty((3, 3))
                Rj[0, 0] = cth + ux * ux * (1 - cth)
                Rj[0, 1] = ux * uy * (1 - cth) - uz * sth
                Rj[0, 2] = ux * uz * (1 - cth) + uy * sth
                Rj[1, 0] = uy * ux * (1 - cth) + uz * sth
                Rj[1, 1] = cth + uy * uy * (1 - cth)
                Rj[1, 2] = uy * uz * (1 - cth) - ux * sth
                Rj[2, 0] = uz * ux * (1 - cth) - uy * sth
                Rj[2, 1] = uz * uy * (1 - cth) + ux * sth
                Rj[2, 2] = cth + uz * uz * (1 - cth)
                Rtmp = R[i] @ Rj
                R[i] = Rtmp
            elif jt == 2:  # prismatic
                d = q[qo]
                for r in range(3):
                    p[i, r] += (R[i, r, 0] * axis[i, 0] + R[i, r, 1] * axis[i, 1]
                                + R[i, r, 2] * axis[i, 2]) * d

        for k in range(6):
            vj[k] = 0.0
        if jt == 0:
            for k in range(3):
                # rotation axes: columns of R through p; translations: columns of R
                wx, wy, wz = R[i, 0, k], R[i, 1, k], R[i, 2, k]
                ax_w[vo + k, 0] = wx
                ax_w[vo + k, 1] = wy
                ax_w[vo + k, 2] = wz
                ax_v[vo + k, 0] = p[i, 1] * wz - p[i, 2] * wy
                ax_v[vo + k, 1] = p[i, 2] * wx - p[i, 0] * wz
                ax_v[vo + k, 2] = p[i, 0] * wy - p[i, 1] * wx
                ax_v[vo + 3 + k, 0] = wx
                ax_v[vo + 3 + k, 1] = wy
                ax_v[vo + 3 + k, 2] = wz
            for k in range(3):
                for m in range(3):
                    vj[m] += ax_w[vo + k, m] * qd[vo + k]
                    vj[3 + m] += ax_v[vo + k, m] * qd[vo + k]
                    vj[3 + m] += ax_v[vo + 3 + k, m] * qd[vo + 3 + k]
        elif jt == 1 or jt == 2:
            # world joint axis: (R_par @ t_rot) @ axis
            wx = 0.0
            wy = 0.0
            wz = 0.0
            for c in range(3):
                acc = 0.0
                for m in range(3):
                    acc += t_rot[i, c, m] * axis[i, m]
                if par >= 0:
                    wx += R[par, 0, c] * acc
                    wy += R[par, 1, c] * acc
                    wz += R[par, 2, c] * acc
                else:
                    if c == 0:
                        wx += acc
                    elif c == 1:
                        wy += acc
                    else:
                        wz += acc
            rate = qd[vo]
            if jt == 1:
                ax_w[vo, 0] = wx
                ax_w[vo, 1] = wy
                ax_w[vo, 2] = wz
                dx = p[i, 1] * wz - p[i, 2] * wy
                dy = p[i, 2] * wx - p[i, 0] * wz
                dz = p[i, 0] * wy - p[i, 1] * wx
                ax_v[vo, 0] = dx
                ax_v[vo, 1] = dy
                ax_v[vo, 2] = dz
                vj[0] = wx * rate
                vj[1] = wy * rate
                vj[2] = wz * rate
                vj[3] = dx * rate
                vj[4] = dy * rate
                vj[5] = dz * rate
            else:
                ax_v[vo, 0] = wx
                ax_v[vo, 1] = wy
                ax_v[vo, 2] = wz
                vj[3] = wx * rate
                vj[4] = wy * rate
                vj[5] = wz * rate

        for k in range(6):
            vel[i, k] = (vel[par, k] if par >= 0 else 0.0) + vj[k]
        wlx, wly, wlz = vel[i, 0], vel[i, 1], vel[i, 2]
        vlx, vly, vlz = vel[i, 3], vel[i, 4], vel[i, 5]
        if par >= 0:
            for k in range(6):
                bias[i, k] = bias[par, k]
        else:
            bias[i, 0] = 0.0
            bias[i, 1] = 0.0
            bias[i, 2] = 0.0
            bias[i, 3] = -gravity[0]
            bias[i, 4] = -gravity[1]
            bias[i, 5] = -gravity[2]
        bias[i, 0] += wly * vj[2] - wlz * vj[1]
        bias[i, 1] += wlz * vj[0] - wlx * vj[2]
        bias[i, 2] += wlx * vj[1] - wly * vj[0]
        bias[i, 3] += (wly * vj[5] - wlz * vj[4]) + (vly * vj[2] - vlz * vj[1])
        bias[i, 4] += (wlz * vj[3] - wlx * vj[5]) + (vlz * vj[0] - vlx * vj[2])
        bias[i, 5] += (wlx * vj[4] - wly * vj[3]) + (vlx * vj[1] - vly * vj[0])
    return R, p, ax_w, ax_v, vel, bias


@njit(cache=True)
def inertia_origin(mass, com, inertia, R, p):
    n = mass.shape[0]
    IO = np.zeros((n, 6, 6))
    for i in range(n):
        m = mass[i]
        if m == 0.0:
            continue
        cx = p[i, 0] + R[i, 0, 0] * com[i, 0] + R[i, 0, 1] * com[i, 1] + R[i, 0, 2] * com[i, 2]
        cy = p[i, 1] + R[i, 1, 0] * com[i, 0] + R[i, 1, 1] * com[i, 1] + R[i, 1, 2] * com[i, 2]
        cz = p[i, 2] + R[i, 2, 0] * com[i, 0] + R[i, 2, 1] * com[i, 1] + R[i, 2, 2] * com[i, 2]
        Iw = R[i] @ inertia[i] @ R[i].T
        # Sc @ Sc
        sxx = -(cy * cy + cz * cz)
        syy = -(cx * cx + cz * cz)
        szz = -(cx * cx + cy * cy)
        sxy = cx * cy
        sxz = cx * cz
        syz = cy * cz
        IO[i, 0, 0] = Iw[0, 0] - m * sxx
        IO[i, 0, 1] = Iw[0, 1] - m * sxy
        IO[i, 0, 2] = Iw[0, 2] - m * sxz
        IO[i, 1, 0] = Iw[1, 0] - m * sxy
        IO[i, 1, 1] = Iw[1, 1] - m * syy
        IO[i, 1, 2] = Iw[1, 2] - m * syz
        IO[i, 2, 0] = Iw[2, 0] - m * sxz
        IO[i, 2, 1] = Iw[2, 1] - m * syz
        IO[i, 2, 2] = Iw[2, 2] - m * szz
        # m S(c) block
        IO[i, 0, 4] = -m * cz
        IO[i, 0, 5] = m * cy
        IO[i, 1, 3] = m * cz
        IO[i, 1, 5] = -m * cx
        IO[i, 2, 3] = -m * cy
        IO[i, 2, 4] = m * cx
        IO[i, 3, 1] = m * cz
        IO[i, 3, 2] = -m * cy
        IO[i, 4, 0] = -m * cz
        IO[i, 4, 2] = m * cx
        IO[i, 5, 0] = m * cy
        IO[i, 5, 1] = -m * cx
        IO[i, 3, 3] = m
        IO[i, 4, 4] = m
        IO[i, 5, 5] = m
    return IO


@njit(cache=True)
def bias_force_pass(parent, IO, vel, bias):
    n = parent.shape[0]
    f = np.zeros((n, 6))
    for i in range(n):
        Iv = IO[i] @ vel[i]
        fb = IO[i] @ bias[i]
        w0, w1, w2 = vel[i, 0], vel[i, 1], vel[i, 2]
        v0, v1, v2 = vel[i, 3], vel[i, 4], vel[i, 5]
        f[i, 0] = fb[0] + (w1 * Iv[2] - w2 * Iv[1]) + (v1 * Iv[5] - v2 * Iv[4])
        f[i, 1] = fb[1] + (w2 * Iv[0] - w0 * Iv[2]) + (v2 * Iv[3] - v0 * Iv[5])
        f[i, 2] = fb[2] + (w0 * Iv[1] - w1 * Iv[0]) + (v0 * Iv[4] - v1 * Iv[3])
        f[i, 3] = fb[3] + (w1 * Iv[5] - w2 * Iv[4])
        f[i, 4] = fb[4] + (w2 * Iv[3] - w0 * Iv[5])
        f[i, 5] = fb[5] + (w0 * Iv[4] - w1 * Iv[3])
    for i in range(n - 1, -1, -1):
        if parent[i] >= 0:
            for k in range(6):
                f[parent[i], k] += f[i, k]
    return f


@njit(cache=True)
def composite_inertia_pass(parent, IO):
    n = parent.shape[0]
    IC = IO.copy()
    for i in range(n - 1, -1, -1):
        if parent[i] >= 0:
            IC[parent[i]] += IC[i]
    return IC


@njit(cache=True)
def gather_point_rows(ax_w, ax_v, idx, x):
    """Linear point-velocity rows at world point x for the given coordinates."""
    k = idx.shape[0]
    out = np.empty((3, k))
    for j in range(k):
        i = idx[j]
        wx, wy, wz = ax_w[i, 0], ax_w[i, 1], ax_w[i, 2]
        out[0, j] = ax_v[i, 0] + wy * x[2] - wz * x[1]
        out[1, j] = ax_v[i, 1] + wz * x[0] - wx * x[2]
        out[2, j] = ax_v[i, 2] + wx * x[1] - wy * x[0]
    return out


@njit(cache=True)
def gather_full_rows(ax_w, ax_v, idx, x):
    """(angular; linear) frame rows at world point x for the given coordinates."""
    k = idx.shape[0]
    out = np.empty((6, k))
    for j in range(k):
        i = idx[j]
        wx, wy, wz = ax_w[i, 0], ax_w[i, 1], ax_w[i, 2]
        out[0, j] = wx
        out[1, j] = wy
        out[2, j] = wz
        out[3, j] = ax_v[i, 0] + wy * x[2] - wz * x[1]
        out[4, j] = ax_v[i, 1] + wz * x[0] - wx * x[2]
        out[5, j] = ax_v[i, 2] + wx * x[1] - wy * x[0]
    return out


@njit(cache=True)
def coordinate_forces(IC, coord_link, ax_w, ax_v):
    """F[j] = IC[link(j)] @ axis_j for the composite-inertia mass matrix."""
    D = coord_link.shape[0]
    F = np.empty((D, 6))
    for j in range(D):
        I6 = IC[coord_link[j]]
        for r in range(6):
            acc = 0.0
            for c in range(3):
                acc += I6[r, c] * ax_w[j, c]
                acc += I6[r, 3 + c] * ax_v[j, c]
            F[j, r] = acc
    return F
