"""Dense convex QP solver: infeasible-start Mehrotra predictor-corrector
primal-dual interior point method.

    min 1/2 x^T H x + g^T x
    s.t. A_eq x = b_eq,   l <= C x <= u   (two-sided rows, +-inf allowed)

Correctness contract: scaled KKT residuals (stationarity, equality,
inequality feasibility, complementarity) at the reported solution, plus
agreement with an active-set enumeration oracle on small instances (see the
test suite).  Deterministic for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class QPResult:
    x: np.ndarray
    status: str          # optimal | max_iter | infeasible
    iterations: int
    objective: float
    residuals: dict = field(default_factory=dict)
    most_violated: int | None = None     # row index of l <= Cx <= u, worst side
    z: np.ndarray | None = None          # multipliers of the stacked A x >= b form
    y: np.ndarray | None = None          # equality multipliers


def _stack_one_sided(C, l, u):
    """Convert two-sided rows into A x >= b; returns (A, b, row_map, side)."""
    fl = np.isfinite(l)
    fu = np.isfinite(u)
    A = np.vstack([C[fl], -C[fu]])
    b = np.concatenate([l[fl], -u[fu]])
    row_map = np.concatenate([np.flatnonzero(fl), np.flatnonzero(fu)])
    side = np.concatenate([np.ones(fl.sum(), dtype=int), -np.ones(fu.sum(), dtype=int)])
    return A, b, row_map, side


def solve_qp(H, g, C=None, l=None, u=None, A_eq=None, b_eq=None, x0=None,
             max_iter: int = 200, tol_abs: float = 1e-8, tol_rel: float = 1e-6) -> QPResult:
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    g = np.asarray(g, dtype=float).reshape(n) if n else np.zeros(0)
    if n == 0:
        return QPResult(np.zeros(0), "optimal", 0, 0.0,
                        {"stationarity": 0.0, "primal": 0.0, "complementarity": 0.0})
    if C is None or C.shape[0] == 0:
        C = np.zeros((0, n))
        l = np.zeros(0)
        u = np.zeros(0)
    C = np.asarray(C, dtype=float)
    l = np.asarray(l, dtype=float).reshape(C.shape[0])
    u = np.asarray(u, dtype=float).reshape(C.shape[0])
    if np.any(l > u + 1e-12):
        bad = int(np.argmax(l - u))
        return QPResult(np.zeros(n) if x0 is None else np.asarray(x0, float).copy(),
                        "infeasible", 0, np.inf, {"primal": float((l - u).max())}, bad)
    E = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float)
    be = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(E.shape[0])
    A, b, row_map, _ = _stack_one_sided(C, l, u)
    m = A.shape[0]
    me = E.shape[0]

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n).copy()

    def residuals(x, y, z, s):
        r_d = H @ x + g + (E.T @ y if me else 0.0) - (A.T @ z if m else 0.0)
        r_e = E @ x - be if me else np.zeros(0)
        r_p = A @ x - s - b if m else np.zeros(0)
        return r_d, r_e, r_p

    def scaled_report(x, y, z, s):
        scale = 1.0 + max(np.abs(g).max(initial=0.0), np.abs(H).max(initial=0.0))
        r_d, r_e, r_p = residuals(x, y, z, s)
        viol_ineq = float(np.maximum(b - A @ x, 0.0).max(initial=0.0)) if m else 0.0
        viol_eq = float(np.abs(r_e).max(initial=0.0)) if me else 0.0
        comp = float(abs(s @ z) / max(1, m)) if m else 0.0
        return {
            "stationarity": float(np.abs(r_d).max(initial=0.0)) / scale,
            "primal": max(viol_ineq, viol_eq),
            "complementarity": comp / scale,
        }

    if m == 0 and me == 0:
        x, *_ = np.linalg.lstsq(H, -g, rcond=None)
        rep = scaled_report(x, np.zeros(0), np.zeros(0), np.zeros(0))
        return QPResult(x, "optimal", 0, 0.5 * x @ H @ x + g @ x, rep)

    # strictly interior start
    s = np.maximum(A @ x - b, 1.0) if m else np.zeros(0)
    z = np.ones(m)
    y = np.zeros(me)

    stat_scale = 1.0 + max(np.abs(g).max(initial=0.0), np.abs(H).max(initial=0.0))
    big_scale = 1.0 + max(np.abs(g).max(initial=0.0), np.abs(b).max(initial=0.0),
                          np.abs(be).max(initial=0.0))
    status = "max_iter"
    it = 0
    best_x = x.copy()
    best_viol = np.inf
    for it in range(1, max_iter + 1):
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z)) and np.all(np.isfinite(s))):
            x = best_x
            break
        if m and (s.min() < 1e-300 or np.abs(z).max() > 1e14):
            # barrier collapse without feasibility: primal infeasible in practice
            x = best_x
            break
        viol_now = float(np.maximum(b - A @ x, 0.0).max(initial=0.0)) if m else 0.0
        if me:
            viol_now = max(viol_now, float(np.abs(E @ x - be).max(initial=0.0)))
        if viol_now < best_viol:
            best_viol = viol_now
            best_x = x.copy()
        r_d, r_e, r_p = residuals(x, y, z, s)
        mu = (s @ z) / m if m else 0.0
        conv = (np.abs(r_d).max(initial=0.0) <= tol_abs + 0.05 * tol_rel * stat_scale
                and np.abs(r_e).max(initial=0.0) <= tol_abs + 0.1 * tol_rel * big_scale
                and np.abs(r_p).max(initial=0.0) <= tol_abs + 0.1 * tol_rel * big_scale
                and mu <= 1e-9 * min(big_scale, stat_scale))
        if conv:
            status = "optimal"
            break

        W = np.clip(z / s, 1e-12, 1e13) if m else np.zeros(0)
        KKT = np.zeros((n + me, n + me))
        KKT[:n, :n] = H + (A.T * W) @ A if m else H
        if me:
            KKT[:n, n:] = E.T
            KKT[n:, :n] = E

        def newton(rs):
            rhs = np.concatenate([
                -r_d - (A.T @ ((rs + z * r_p) / s) if m else 0.0),
                -r_e,
            ])
            try:
                d = np.linalg.solve(KKT, rhs)
            except np.linalg.LinAlgError:
                d, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
            dx = d[:n]
            dy = d[n:]
            ds = A @ dx + r_p if m else np.zeros(0)
            dz = -(rs + z * ds) / s if m else np.zeros(0)
            return dx, dy, ds, dz

        # affine scaling (predictor)
        rs_aff = s * z
        dx_a, dy_a, ds_a, dz_a = newton(rs_aff)
        if m:
            alpha_p = min(1.0, 0.995 * min((-s[ds_a < 0] / ds_a[ds_a < 0]).min(initial=np.inf), np.inf))
            alpha_d = min(1.0, 0.995 * min((-z[dz_a < 0] / dz_a[dz_a < 0]).min(initial=np.inf), np.inf))
            mu_aff = ((s + alpha_p * ds_a) @ (z + alpha_d * dz_a)) / m
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            rs_cor = s * z + ds_a * dz_a - sigma * mu
            dx, dy, ds, dz = newton(rs_cor)
            alpha_p = min(1.0, 0.995 * min((-s[ds < 0] / ds[ds < 0]).min(initial=np.inf), np.inf))
            alpha_d = min(1.0, 0.995 * min((-z[dz < 0] / dz[dz < 0]).min(initial=np.inf), np.inf))
        else:
            dx, dy, ds, dz = dx_a, dy_a, ds_a, dz_a
            alpha_p = alpha_d = 1.0
        x = x + alpha_p * dx
        s = s + alpha_p * ds
        y = y + alpha_d * dy
        z = z + alpha_d * dz

    if not np.all(np.isfinite(x)):
        x = best_x if np.all(np.isfinite(best_x)) else np.zeros(n)
    if m and not np.all(np.isfinite(z)):
        z = np.zeros(m)
        s = np.maximum(A @ x - b, 0.0)
    rep = scaled_report(x, y, z, s)
    most_violated = None
    if m:
        viol = b - A @ x
        if viol.max() > tol_rel:
            most_violated = int(row_map[int(np.argmax(viol))])
    if status != "optimal" and most_violated is not None and rep["primal"] > 1e-5:
        status = "infeasible"
    obj = float(0.5 * x @ H @ x + g @ x)
    return QPResult(x, status, it, obj, rep, most_violated, z, y)
