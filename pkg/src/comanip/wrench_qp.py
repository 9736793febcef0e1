"""Per-tick contact-wrench quadratic program.

Decision variable F_c stacks commanded wrenches in the constraint-row layout
of the contact module (foot forces world-frame, hand wrenches (force; moment)
contact-frame).  The objective minimizes the actuated-torque norm of the
constraint-space command; unilateral/friction-pyramid rows, contact-moment
rows and actuator-saturation rows bound the predicted wrench
lambda = rho F_c + eta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contact import ContactSet, ProjectionBundle
from .qpsolver import QPResult, solve_qp

TIKHONOV = 1e-9


@dataclass
class WrenchQP:
    H: np.ndarray                 # K x K: J_c B^T B J_c^T
    rho: np.ndarray               # K x K: lambda = rho F_c + eta
    eta: np.ndarray
    C: np.ndarray                 # inequality rows on F_c (already composed)
    lo: np.ndarray
    hi: np.ndarray
    row_labels: list[str]
    Xi: np.ndarray                # torque rows S_ns^T B J_c^T
    tau_lo: np.ndarray
    tau_hi: np.ndarray
    tick: float
    cross_term_residual: float
    F_c: np.ndarray | None = None
    status: str = "unsolved"
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    most_violated: int | None = None

    @property
    def n(self) -> int:
        return self.H.shape[0]


def build_objective(bundle: ProjectionBundle) -> np.ndarray:
    """H = J_c B^T B J_c^T (positive semidefinite by construction)."""
    BJt = bundle.B @ bundle.J_c.T
    H = BJt.T @ BJt
    return 0.5 * (H + H.T)


def cross_term_residual(bundle: ProjectionBundle, tau_M: np.ndarray,
                        tau_C: np.ndarray) -> float:
    """Relative size of ([PS]^+ P tau_M)^T B (I-P) tau_C, which the
    decomposition requires to vanish (orthogonal subspaces)."""
    x = bundle.PS_pinv @ (bundle.P @ tau_M)
    y = bundle.B @ (tau_C - bundle.P @ tau_C)
    return float(abs(x @ y) / (1e-30 + np.linalg.norm(x) * np.linalg.norm(y)))


def lambda_map(bundle: ProjectionBundle, tau_M: np.ndarray,
               F_ext: np.ndarray | None = None,
               J_x: np.ndarray | None = None):
    """(rho, eta) of the affine map from commanded wrenches to predicted
    constraint wrenches:

        rho = (J_c^T)^+ (I-P)(Mbar P - I) S B J_c^T
        eta = (J_c^T)^+ (I-P)[eps tau_M + Mbar(-P h + Pdot qd) + h
                              + (Mbar P - I) J_x^T F]
        eps = (Mbar P - I) S [P S]^+ P
    """
    D = bundle.D
    I = np.eye(D)
    P, S, Mbar = bundle.P, np.diag(bundle.S_diag), bundle.Mbar
    ImP = I - P
    MbarP_I = Mbar @ P - I
    JcTp = bundle.Jc_T_pinv
    rho = JcTp @ ImP @ MbarP_I @ S @ bundle.B @ bundle.J_c.T
    eps = MbarP_I @ S @ bundle.PS_pinv @ P
    core = eps @ tau_M + Mbar @ (-P @ bundle.h + bundle.Pdot_qd) + bundle.h
    if F_ext is not None and J_x is not None:
        core = core + MbarP_I @ (J_x.T @ F_ext)
    eta = JcTp @ ImP @ core
    return rho, eta


def friction_rows(n_x, n_y, n_z, mu):
    """Unilateral + friction-pyramid rows on a 3-vector contact force."""
    C = np.vstack([
        n_x - mu * n_z,
        n_y - mu * n_z,
        n_x + mu * n_z,
        n_y + mu * n_z,
        n_z,
    ])
    lo = np.array([-np.inf, -np.inf, 0.0, 0.0, 0.0])
    hi = np.array([0.0, 0.0, np.inf, np.inf, np.inf])
    return C, lo, hi


def moment_rows(xi, half_x, half_y):
    """Torsional and shear moment rows on a 6-vector (force; moment) wrench."""
    C = np.array([
        [0, 0, xi, 0, 0, -1.0],
        [0, 0, xi, 0, 0, 1.0],
        [0, 0, half_x, -1.0, 0, 0],
        [0, 0, half_x, 1.0, 0, 0],
        [0, 0, half_y, 0, -1.0, 0],
        [0, 0, half_y, 0, 1.0, 0],
    ])
    lo = np.zeros(6)
    hi = np.full(6, np.inf)
    return C, lo, hi


def build_inequalities(contacts: ContactSet, rho: np.ndarray, eta: np.ndarray,
                       bundle: ProjectionBundle, tau_M: np.ndarray,
                       limits: tuple[np.ndarray, np.ndarray] | None = None):
    """All constraint rows expressed in the decision variable F_c.

    Wrench rows bind lambda = rho F_c + eta; torque rows bind
    Xi F_c within [tau_min, tau_max] shifted by the motion-space torque.
    Returns (C, lo, hi, labels, Xi, tau_lo, tau_hi).
    """
    K = bundle.K
    rows_l = []
    lo_l = []
    hi_l = []
    labels = []
    unit = np.eye(3)
    for i, fc in enumerate(contacts.foot_contacts):
        Ci, lo, hi = friction_rows(fc.n_x, fc.n_y, fc.n_z, fc.mu)
        block = np.zeros((5, K))
        block[:, contacts.foot_slice(i)] = Ci
        rows_l.append(block)
        lo_l.append(lo)
        hi_l.append(hi)
        labels += [f"foot[{fc.frame}].{nm}" for nm in
                   ("fric_x_lo", "fric_y_lo", "fric_x_hi", "fric_y_hi", "normal")]
    for i, hc in enumerate(contacts.grasp_contacts()):
        sl = contacts.hand_slice(i)
        Ci, lo, hi = friction_rows(unit[0], unit[1], unit[2], hc.mu)
        block = np.zeros((5, K))
        block[:, sl.start:sl.start + 3] = Ci
        rows_l.append(block)
        lo_l.append(lo)
        hi_l.append(hi)
        nm = hc.frame or f"env{i}"
        labels += [f"hand[{nm}].{s}" for s in
                   ("fric_x_lo", "fric_y_lo", "fric_x_hi", "fric_y_hi", "normal")]
        Cm, lo_m, hi_m = moment_rows(hc.xi, hc.half_x, hc.half_y)
        block = np.zeros((6, K))
        block[:, sl] = Cm
        rows_l.append(block)
        lo_l.append(lo_m)
        hi_l.append(hi_m)
        labels += [f"hand[{nm}].{s}" for s in
                   ("torsion_lo", "torsion_hi", "shear_x_lo", "shear_x_hi",
                    "shear_y_lo", "shear_y_hi")]
    if rows_l:
        C_lam = np.vstack(rows_l)
        lo = np.concatenate(lo_l)
        hi = np.concatenate(hi_l)
        # compose with lambda = rho F_c + eta
        C = C_lam @ rho
        shift = C_lam @ eta
        lo = lo - shift
        hi = hi - shift
    else:
        C = np.zeros((0, K))
        lo = np.zeros(0)
        hi = np.zeros(0)

    S_ns = _selection_ns(bundle.S_diag)
    Xi = S_ns.T @ bundle.B @ bundle.J_c.T
    shift = S_ns.T @ (bundle.PS_pinv @ (bundle.P @ tau_M))
    if limits is None:
        n_act = S_ns.shape[1]
        limits = (-np.full(n_act, np.inf), np.full(n_act, np.inf))
    tau_lo = limits[0] - shift
    tau_hi = limits[1] - shift
    return C, lo, hi, labels, Xi, tau_lo, tau_hi


def _selection_ns(S_diag: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(S_diag > 0.5)
    S_ns = np.zeros((S_diag.size, idx.size))
    S_ns[idx, np.arange(idx.size)] = 1.0
    return S_ns


def assemble(bundle: ProjectionBundle, tau_M: np.ndarray, contacts: ContactSet,
             limits: tuple[np.ndarray, np.ndarray] | None = None,
             F_ext: np.ndarray | None = None,
             J_x: np.ndarray | None = None) -> WrenchQP:
    H = build_objective(bundle)
    rho, eta = lambda_map(bundle, tau_M, F_ext, J_x)
    C, lo, hi, labels, Xi, tau_lo, tau_hi = build_inequalities(
        contacts, rho, eta, bundle, tau_M, limits)
    # the vanished cross terms are asserted, not assumed
    probe = bundle.J_c.T @ np.ones(bundle.K) if bundle.K else np.zeros(bundle.D)
    resid = cross_term_residual(bundle, tau_M, probe)
    return WrenchQP(H=H, rho=rho, eta=eta, C=C, lo=lo, hi=hi, row_labels=labels,
                    Xi=Xi, tau_lo=tau_lo, tau_hi=tau_hi, tick=bundle.tick,
                    cross_term_residual=resid)


def solve(qp: WrenchQP, warm_start: np.ndarray | None = None,
          max_iter: int = 200, tol_abs: float = 1e-8, tol_rel: float = 1e-6) -> QPResult:
    """Solve for F_c; Tikhonov-regularized for a deterministic unique
    minimizer, results written back into the WrenchQP."""
    K = qp.n
    if K == 0:
        qp.F_c = np.zeros(0)
        qp.status = "optimal"
        qp.residuals = {"stationarity": 0.0, "primal": 0.0, "complementarity": 0.0}
        return QPResult(np.zeros(0), "optimal", 0, 0.0, qp.residuals)
    C = np.vstack([qp.C, qp.Xi])
    lo = np.concatenate([qp.lo, qp.tau_lo])
    hi = np.concatenate([qp.hi, qp.tau_hi])
    res = solve_qp(qp.H + TIKHONOV * np.eye(K), np.zeros(K), C, lo, hi,
                   x0=warm_start, max_iter=max_iter, tol_abs=tol_abs, tol_rel=tol_rel)
    if res.status != "optimal" and warm_start is not None:
        # the warm start can poison the interior-point path; retry cold
        res = solve_qp(qp.H + TIKHONOV * np.eye(K), np.zeros(K), C, lo, hi,
                       x0=None, max_iter=max_iter, tol_abs=tol_abs, tol_rel=tol_rel)
    qp.F_c = res.x
    qp.status = res.status
    qp.iterations = res.iterations
    qp.residuals = res.residuals
    qp.most_violated = res.most_violated
    return res


def constraint_slacks(qp: WrenchQP, F_c: np.ndarray):
    """Per-row slack of the wrench rows and torque rows at a candidate F_c
    (positive = strictly inside)."""
    lam_rows = qp.C @ F_c
    tau_rows = qp.Xi @ F_c
    s_w = np.minimum(lam_rows - qp.lo, qp.hi - lam_rows)
    s_t = np.minimum(tau_rows - qp.tau_lo, qp.tau_hi - tau_rows)
    return s_w, s_t
