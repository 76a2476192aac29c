"""Simultaneous sparse sensing and actuation for output-feedback control.

Instead of per-channel H2 bounds, sparsity is induced directly on the
transformed controller matrices: weighted 2-norms of the rows of
[CKhat DKhat] (one per actuator) and of the columns of [BKhat; DKhat]
(one per sensor) are minimized subject to a closed-loop performance LMI.
Zero rows/columns of the hat matrices reconstruct to zero rows/columns
of the actual controller, so pruning survives the inverse transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import analysis, lmi
from .errors import (
    DimensionError,
    InfeasiblePerformance,
    NonzeroFeedthroughError,
    SynthesisNumericalError,
)
from .model import GeneralizedPlant, close_output_feedback, validate_plant
from .outputfb import (
    HatController,
    _channel_lyapunov_block,
    _of_common_exprs,
    _positivity_block,
    reconstruct_controller,
)
from .sdp import SdpSolution, SolverOptions, solve_sdp
from .statefb import ACTIVE_THRESHOLD_RATIO, GAMMA_BACKOFF, VERIFY_RTOL, active_set_from_values

__all__ = [
    "JointSpec",
    "GroupNormReport",
    "JointSynthesisResult",
    "synth_joint",
    "group_norms",
    "verify_sparsity_preservation",
]


@dataclass(frozen=True)
class JointSpec:
    """Inputs to a joint sparse sensing/actuation design.

    mu weights the per-actuator row norms, nu the per-sensor column norms;
    a zero weight leaves that group unpenalized.
    """

    plant: GeneralizedPlant
    performance_kind: str = "h2"
    gamma0: float = 1.0
    mu: np.ndarray | None = None
    nu: np.ndarray | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.performance_kind not in ("hinf", "h2"):
            raise ValueError(f"performance_kind must be 'hinf' or 'h2', got {self.performance_kind!r}")
        if not (self.gamma0 > 0):
            raise ValueError("gamma0 must be positive")
        n_act, n_sen = self.plant.nu, self.plant.ny
        mu = np.ones(n_act) if self.mu is None else np.asarray(self.mu, dtype=float).ravel()
        nu = np.ones(n_sen) if self.nu is None else np.asarray(self.nu, dtype=float).ravel()
        if mu.shape != (n_act,):
            raise DimensionError(f"mu must have length {n_act}")
        if nu.shape != (n_sen,):
            raise DimensionError(f"nu must have length {n_sen}")
        if np.any(mu < 0) or np.any(nu < 0):
            raise ValueError("mu and nu must be nonnegative")
        if not (np.any(mu > 0) or np.any(nu > 0)):
            raise ValueError("mu and nu cannot both be identically zero")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        if self.performance_kind == "h2" and np.any(self.plant.Dw != 0.0):
            raise NonzeroFeedthroughError("H2 performance needs Dw = 0")


@dataclass(frozen=True)
class GroupNormReport:
    row_norms: np.ndarray       # per actuator, rows of [CKhat DKhat]
    col_norms: np.ndarray       # per sensor, columns of [BKhat; DKhat]
    active_actuators: list
    active_sensors: list

    def to_csv(self):
        lines = ["kind,index,norm,active"]
        for i, v in enumerate(self.row_norms):
            lines.append(f"actuator,{i},{v!r},{int(i in self.active_actuators)}")
        for j, v in enumerate(self.col_norms):
            lines.append(f"sensor,{j},{v!r},{int(j in self.active_sensors)}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class JointSynthesisResult:
    hat: HatController
    controller: object
    report: GroupNormReport
    objective: float
    verified_closed_loop: analysis.NormReport
    solution: SdpSolution
    feedthrough_constrained: bool  # DKhat @ Dyw = 0 was imposed beyond the LMI set

    def to_dict(self):
        return {
            "AK": self.controller.AK.tolist(),
            "BK": self.controller.BK.tolist(),
            "CK": self.controller.CK.tolist(),
            "DK": self.controller.DK.tolist(),
            "row_norms": self.report.row_norms.tolist(),
            "col_norms": self.report.col_norms.tolist(),
            "active_actuators": self.report.active_actuators,
            "active_sensors": self.report.active_sensors,
            "objective": self.objective,
            "closed_loop_norm": self.verified_closed_loop.value,
            "closed_loop_kind": self.verified_closed_loop.kind,
        }


def group_norms(hat: HatController, threshold_ratio=ACTIVE_THRESHOLD_RATIO) -> GroupNormReport:
    """Row norms of [CKhat DKhat] and column norms of [BKhat; DKhat]."""
    rows = np.hstack([hat.CKhat, hat.DKhat])
    cols = np.vstack([hat.BKhat, hat.DKhat])
    row_norms = np.linalg.norm(rows, axis=1)
    col_norms = np.linalg.norm(cols, axis=0)
    return GroupNormReport(
        row_norms=row_norms,
        col_norms=col_norms,
        active_actuators=active_set_from_values(row_norms, threshold_ratio),
        active_sensors=active_set_from_values(col_norms, threshold_ratio),
    )


def _arrow_block(t_expr, v_expr):
    """PSD epigraph of the 2-norm: [[t, v^T], [v, t*I]] >= 0."""
    m = v_expr.shape[0]
    return lmi.pos_semidef(lmi.bmat([
        [t_expr, v_expr.T],
        [None, lmi.scalar_mult(t_expr, np.eye(m))],
    ]))


def synth_joint(spec: JointSpec) -> JointSynthesisResult:
    """Minimize weighted hat-matrix group norms under a gamma0 performance LMI."""
    p = spec.plant
    diags = validate_plant(p)
    feed = [d for d in diags if "Dyu" in d]
    if feed:
        raise NonzeroFeedthroughError(feed[0])
    if diags:
        raise InfeasiblePerformance("; ".join(diags), status="infeasible")

    nx, n_act, n_sen = p.nx, p.nu, p.ny
    X = lmi.MatVar("X", (nx, nx), "symmetric")
    Y = lmi.MatVar("Y", (nx, nx), "symmetric")
    AKh = lmi.MatVar("AKhat", (nx, nx))
    BKh = lmi.MatVar("BKhat", (nx, n_sen))
    CKh = lmi.MatVar("CKhat", (n_act, nx))
    DKh = lmi.MatVar("DKhat", (n_act, n_sen))
    variables = [X, Y, AKh, BKh, CKh, DKh]
    b11, b21, b22, b31, b32 = parts = _of_common_exprs(p, X, Y, AKh, BKh, CKh, DKh)
    g0 = spec.gamma0 * (1.0 - GAMMA_BACKOFF)

    cons = [_positivity_block(X, Y, nx)]
    if spec.performance_kind == "hinf":
        cons.append(lmi.neg_def(lmi.bmat([
            [b11, None, None, None],
            [b21, b22, None, None],
            [b31, b32, lmi.const(-g0 * np.eye(p.nw)), None],
            [p.Cz @ X + p.Du @ CKh,
             lmi.const(p.Cz) + p.Du @ DKh @ p.Cy,
             lmi.const(p.Dw) + p.Du @ DKh @ p.Dyw,
             lmi.const(-g0 * np.eye(p.nz))],
        ])))
    else:
        Q = lmi.MatVar("Q", (p.nz, p.nz), "symmetric")
        variables.append(Q)
        cons.append(lmi.neg_def(_channel_lyapunov_block(p, parts)))
        cons.append(lmi.pos_def(lmi.bmat([
            [X.as_expr(), lmi.const(np.eye(nx)), (p.Cz @ X + p.Du @ CKh).T],
            [None, Y.as_expr(), (lmi.const(p.Cz) + p.Du @ DKh @ p.Cy).T],
            [None, None, Q.as_expr()],
        ])))
        cons.append(lmi.neg_def(lmi.trace(Q) - g0 ** 2 * np.eye(1)))
        if np.any(p.Dyw != 0.0):
            cons.append(lmi.equal_zero(lmi.const(p.Dw) + p.Du @ DKh @ p.Dyw))

    # Beyond the performance LMIs: keep the disturbance-to-control
    # feedthrough zero so post-hoc channel H2 norms stay finite.
    feedthrough_constrained = bool(np.any(p.Dyw != 0.0))
    if feedthrough_constrained:
        cons.append(lmi.equal_zero(DKh @ p.Dyw))

    objective = lmi.Expr.wrap(np.zeros((1, 1)))
    for i in range(n_act):
        if spec.mu[i] == 0.0:
            continue
        t = lmi.MatVar(f"t_act_{i}", (1, 1), "scalar")
        variables.append(t)
        v = lmi.bmat([[CKh.row(i).T], [DKh.row(i).T]])
        cons.append(_arrow_block(t.as_expr(), v))
        objective = objective + spec.mu[i] * t
    for j in range(n_sen):
        if spec.nu[j] == 0.0:
            continue
        t = lmi.MatVar(f"t_sen_{j}", (1, 1), "scalar")
        variables.append(t)
        v = lmi.bmat([[BKh.col(j)], [DKh.col(j)]])
        cons.append(_arrow_block(t.as_expr(), v))
        objective = objective + spec.nu[j] * t

    problem, vm = lmi.compile_lmis(variables, cons, objective=objective)
    sol = solve_sdp(problem, spec.solver)
    if sol.status != "optimal":
        if sol.status == "infeasible":
            raise InfeasiblePerformance(
                f"no Lyapunov certificate exists for gamma0 ({sol.message})",
                status=sol.status)
        raise SynthesisNumericalError(
            f"SDP solve ended with status {sol.status}: {sol.message}", solution=sol)

    hat = HatController(
        AKhat=vm.value(sol.x, AKh),
        BKhat=vm.value(sol.x, BKh),
        CKhat=vm.value(sol.x, CKh),
        DKhat=vm.value(sol.x, DKh),
        X=vm.value(sol.x, X),
        Y=vm.value(sol.x, Y),
    )
    ctrl = reconstruct_controller(hat, p)
    cl = close_output_feedback(p, ctrl)
    if spec.performance_kind == "hinf":
        report = analysis.hinf_norm(cl)
    else:
        report = analysis.h2_norm(cl)
    if report.value >= spec.gamma0 * (1.0 + VERIFY_RTOL):
        raise SynthesisNumericalError(
            f"verification failed: closed-loop {report.kind} norm "
            f"{report.value:.6g} exceeds the bound {spec.gamma0:.6g}")
    gn = group_norms(hat)
    return JointSynthesisResult(
        hat=hat,
        controller=ctrl,
        report=gn,
        objective=float(spec.mu @ gn.row_norms + spec.nu @ gn.col_norms),
        verified_closed_loop=report,
        solution=sol,
        feedthrough_constrained=feedthrough_constrained,
    )


def verify_sparsity_preservation(hat: HatController, plant: GeneralizedPlant,
                                 threshold=1e-9):
    """Check that zero hat groups reconstruct to zero controller groups.

    Returns a list of violation strings; empty means the reconstruction
    preserved every (near-)zero actuator row and sensor column.
    """
    ctrl = reconstruct_controller(hat, plant)
    hat_rows = np.hstack([hat.CKhat, hat.DKhat])
    hat_cols = np.vstack([hat.BKhat, hat.DKhat])
    out_rows = np.hstack([ctrl.CK, ctrl.DK])
    out_cols = np.vstack([ctrl.BK, ctrl.DK])
    row_scale = max(np.linalg.norm(out_rows), 1e-30)
    col_scale = max(np.linalg.norm(out_cols), 1e-30)
    violations = []
    for i in range(hat_rows.shape[0]):
        if np.linalg.norm(hat_rows[i]) <= threshold:
            rel = np.linalg.norm(out_rows[i]) / row_scale
            if rel > 1e-9:
                violations.append(
                    f"actuator row {i}: zero in hat variables but relative "
                    f"norm {rel:.3e} after reconstruction")
    for j in range(hat_cols.shape[1]):
        if np.linalg.norm(hat_cols[:, j]) <= threshold:
            rel = np.linalg.norm(out_cols[:, j]) / col_scale
            if rel > 1e-9:
                violations.append(
                    f"sensor column {j}: zero in hat variables but relative "
                    f"norm {rel:.3e} after reconstruction")
    return violations
