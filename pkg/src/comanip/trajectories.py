"""Analytic reference-trajectory suppliers.

Every supplier returns position, orientation, velocity and acceleration as
closed-form functions of time; references are never differentiated from
samples.  6-DoF references use world-frame (linear; angular) velocity and
acceleration; orientations compose moving-axes roll/pitch/yaw offsets on a
base rotation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spatial import cross3, rot_exp


@dataclass
class Pose6Ref:
    pos: np.ndarray
    rot: np.ndarray
    vel: np.ndarray      # (v; w) world
    acc: np.ndarray


@dataclass
class Point3Ref:
    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray


class ConstantPose:
    def __init__(self, pos, rot=None):
        self.pos = np.asarray(pos, dtype=float)
        self.rot = np.eye(3) if rot is None else np.asarray(rot, dtype=float)

    def __call__(self, t: float) -> Pose6Ref:
        return Pose6Ref(self.pos.copy(), self.rot.copy(), np.zeros(6), np.zeros(6))


class ConstantPoint:
    def __init__(self, pos):
        self.pos = np.asarray(pos, dtype=float)

    def __call__(self, t: float) -> Point3Ref:
        return Point3Ref(self.pos.copy(), np.zeros(3), np.zeros(3))


@dataclass
class Sinusoid:
    """amp * sin(2 pi freq (t - t0) + phase) per axis, zero before t0."""

    amp: np.ndarray
    freq: np.ndarray
    phase: np.ndarray
    t0: float = 0.0

    def eval(self, t: float):
        if t < self.t0:
            return np.zeros_like(self.amp), np.zeros_like(self.amp), np.zeros_like(self.amp)
        w = 2.0 * np.pi * self.freq
        arg = w * (t - self.t0) + self.phase
        x = self.amp * np.sin(arg)
        xd = self.amp * w * np.cos(arg)
        xdd = -self.amp * w * w * np.sin(arg)
        return x, xd, xdd


def _axes_rates(phi, phid, phidd):
    """Moving-axes roll/pitch/yaw composition R = Rx(a) Ry(b) Rz(c):
    world angular velocity and acceleration of the composed rotation."""
    a, b, c = phi
    ad, bd, cd = phid
    add, bdd, cdd = phidd
    ex = np.array([1.0, 0, 0])
    Rx = rot_exp(a * ex)
    ey_x = Rx @ np.array([0, 1.0, 0])
    Rxy = Rx @ rot_exp(b * np.array([0, 1.0, 0]))
    ez_xy = Rxy @ np.array([0, 0, 1.0])
    w = ad * ex + bd * ey_x + cd * ez_xy
    # axis rates: ey_x rotates with Rx, ez_xy with Rxy
    ey_x_dot = cross3(ad * ex, ey_x)
    ez_xy_dot = cross3(ad * ex + bd * ey_x, ez_xy)
    al = add * ex + bdd * ey_x + bd * ey_x_dot + cdd * ez_xy + cd * ez_xy_dot
    R = Rxy @ rot_exp(c * np.array([0, 0, 1.0]))
    return R, w, al


class SinusoidPose:
    """Sinusoidal offsets around a base pose: per-axis translation sinusoids
    plus roll/pitch/yaw orientation sinusoids (moving axes on the base)."""

    def __init__(self, base_pos, base_rot, lin: Sinusoid | None = None,
                 ang: Sinusoid | None = None):
        self.base_pos = np.asarray(base_pos, dtype=float)
        self.base_rot = np.asarray(base_rot, dtype=float)
        zero = Sinusoid(np.zeros(3), np.zeros(3), np.zeros(3))
        self.lin = lin or zero
        self.ang = ang or zero

    def __call__(self, t: float) -> Pose6Ref:
        dp, dv, da = self.lin.eval(t)
        phi, phid, phidd = self.ang.eval(t)
        R_off, w, al = _axes_rates(phi, phid, phidd)
        return Pose6Ref(self.base_pos + dp, R_off @ self.base_rot,
                        np.concatenate([dv, w]), np.concatenate([da, al]))


class CirclePose:
    """Circle in the world X-Z plane through the start pose, with a smooth
    quintic speed ramp over the first ramp_s seconds."""

    def __init__(self, start_pos, rot, radius, period_s, ramp_s=2.0):
        self.start = np.asarray(start_pos, dtype=float)
        self.rot = np.asarray(rot, dtype=float)
        self.radius = float(radius)
        self.omega = 2.0 * np.pi / float(period_s)
        self.ramp = float(ramp_s)

    def _warp(self, t):
        """s(t): 0 at 0, unit rate after ramp; C2-continuous."""
        T = self.ramp
        if T <= 0 or t >= T:
            return t - 0.5 * T, 1.0, 0.0
        u = t / T
        s = T * (u ** 3 - 0.5 * u ** 4)          # integral of the cubic ramp 3u^2-2u^3
        sd = 3 * u ** 2 - 2 * u ** 3
        sdd = (6 * u - 6 * u ** 2) / T
        return s, sd, sdd

    def __call__(self, t: float) -> Pose6Ref:
        s, sd, sdd = self._warp(max(t, 0.0))
        th = self.omega * s
        thd = self.omega * sd
        thdd = self.omega * sdd
        r = self.radius
        # circle center sits above the start point; start at angle -pi/2
        c = self.start + np.array([0.0, 0.0, r])
        ang = th - np.pi / 2
        pos = c + r * np.array([np.cos(ang), 0.0, np.sin(ang)])
        vel = r * thd * np.array([-np.sin(ang), 0.0, np.cos(ang)])
        acc = (r * thdd * np.array([-np.sin(ang), 0.0, np.cos(ang)])
               - r * thd * thd * np.array([np.cos(ang), 0.0, np.sin(ang)]))
        return Pose6Ref(pos, self.rot.copy(), np.concatenate([vel, np.zeros(3)]),
                        np.concatenate([acc, np.zeros(3)]))


def quintic_scalars(t, t0, t1):
    """Quintic time scaling u(t) on [t0, t1] with zero boundary vel/acc."""
    if t <= t0:
        return 0.0, 0.0, 0.0
    if t >= t1:
        return 1.0, 0.0, 0.0
    T = t1 - t0
    u = (t - t0) / T
    s = 10 * u ** 3 - 15 * u ** 4 + 6 * u ** 5
    sd = (30 * u ** 2 - 60 * u ** 3 + 30 * u ** 4) / T
    sdd = (60 * u - 180 * u ** 2 + 120 * u ** 3) / (T * T)
    return s, sd, sdd


@dataclass
class Segment:
    t0: float
    t1: float
    p0: np.ndarray
    p1: np.ndarray
    bump: float = 0.0      # mid-segment z lift (swing feet)


class PiecewisePath:
    """Point trajectory through quintic segments separated by holds."""

    def __init__(self, start: np.ndarray, segments: list[Segment] | None = None):
        self.start = np.asarray(start, dtype=float)
        self.segments = sorted(segments or [], key=lambda s: s.t0)

    def add(self, seg: Segment):
        self.segments.append(seg)
        self.segments.sort(key=lambda s: s.t0)

    def __call__(self, t: float) -> Point3Ref:
        pos = self.start.copy()
        vel = np.zeros(3)
        acc = np.zeros(3)
        for seg in self.segments:
            if t >= seg.t1:
                pos = seg.p1.copy()
                continue
            if t <= seg.t0:
                break
            s, sd, sdd = quintic_scalars(t, seg.t0, seg.t1)
            d = seg.p1 - seg.p0
            pos = seg.p0 + s * d
            vel = sd * d
            acc = sdd * d
            if seg.bump:
                # vertical arc h sin^2(pi s): zero boundary velocity
                pos[2] += seg.bump * np.sin(np.pi * s) ** 2
                vel[2] += seg.bump * np.pi * np.sin(2 * np.pi * s) * sd
                acc[2] += seg.bump * np.pi * (2 * np.pi * np.cos(2 * np.pi * s) * sd * sd
                                              + np.sin(2 * np.pi * s) * sdd)
            break
        return Point3Ref(pos, vel, acc)


class PiecewisePose:
    """6-DoF hold-and-move reference: quintic position segments plus yaw
    ramps, built incrementally by the gait scheduler."""

    def __init__(self, start_pos, start_rot):
        self.path = PiecewisePath(np.asarray(start_pos, dtype=float))
        self.rot0 = np.asarray(start_rot, dtype=float)
        self.yaw_segments: list[tuple[float, float, float, float]] = []  # t0, t1, y0, y1

    def add_move(self, t0, t1, p0, p1):
        self.path.add(Segment(t0, t1, np.asarray(p0, float), np.asarray(p1, float)))

    def add_yaw(self, t0, t1, y0, y1):
        self.yaw_segments.append((t0, t1, y0, y1))
        self.yaw_segments.sort(key=lambda s: s[0])

    def _yaw(self, t):
        yaw, yawd, yawdd = 0.0, 0.0, 0.0
        for (t0, t1, y0, y1) in self.yaw_segments:
            if t >= t1:
                yaw = y1
                continue
            if t <= t0:
                break
            s, sd, sdd = quintic_scalars(t, t0, t1)
            yaw = y0 + s * (y1 - y0)
            yawd = sd * (y1 - y0)
            yawdd = sdd * (y1 - y0)
            break
        return yaw, yawd, yawdd

    def __call__(self, t: float) -> Pose6Ref:
        p = self.path(t)
        yaw, yawd, yawdd = self._yaw(t)
        R = rot_exp(yaw * np.array([0, 0, 1.0])) @ self.rot0
        vel = np.concatenate([p.vel, [0.0, 0.0, yawd]])
        acc = np.concatenate([p.acc, [0.0, 0.0, yawdd]])
        return Pose6Ref(p.pos, R, vel, acc)
