"""Dynamic output-feedback synthesis with sparse actuation.

The synthesis works in transformed ("hat") controller variables that make
the closed-loop performance conditions affine; the actual controller is
recovered afterwards by inverting the change of variables.  Per-actuator
squared-H2 bounds Gamma play the same sparsity-surrogate role as in the
state-feedback design.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import analysis, lmi
from .errors import (
    DimensionError,
    InfeasiblePerformance,
    NonzeroFeedthroughError,
    ReconstructionFailure,
    SynthesisNumericalError,
)
from .model import DynamicController, GeneralizedPlant, close_output_feedback, validate_plant
from .sdp import SdpSolution, SolverOptions, solve_sdp
from .statefb import (
    ACTIVE_THRESHOLD_RATIO,
    COND_LIMIT,
    GAMMA_BACKOFF,
    VERIFY_RTOL,
    SfSynthesisSpec,
    active_set_from_values,
)

__all__ = [
    "HatController",
    "OfSynthesisResult",
    "synth_of_hinf",
    "synth_of_h2",
    "synth_of",
    "reconstruct_controller",
    "hat_transform",
]


@dataclass(frozen=True)
class HatController:
    """Transformed controller variables plus the Lyapunov partitions X, Y."""

    AKhat: np.ndarray
    BKhat: np.ndarray
    CKhat: np.ndarray
    DKhat: np.ndarray
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        for name in ("AKhat", "BKhat", "CKhat", "DKhat", "X", "Y"):
            M = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, M)
        nx = self.X.shape[0]
        if self.X.shape != (nx, nx) or self.Y.shape != (nx, nx):
            raise DimensionError("X and Y must be square with matching size")
        if self.AKhat.shape != (nx, nx):
            raise DimensionError(f"AKhat must be {nx}x{nx}")
        if self.BKhat.shape[0] != nx or self.CKhat.shape[1] != nx:
            raise DimensionError("BKhat/CKhat dimensions inconsistent with X")

    def to_dict(self):
        return {name: getattr(self, name).tolist()
                for name in ("AKhat", "BKhat", "CKhat", "DKhat", "X", "Y")}


@dataclass(frozen=True)
class OfSynthesisResult:
    hat: HatController
    controller: DynamicController
    gamma: np.ndarray
    objective: float
    active_set: list
    verified_closed_loop: analysis.NormReport
    verified_channels: list
    solution: SdpSolution

    def to_dict(self):
        return {
            "AK": self.controller.AK.tolist(),
            "BK": self.controller.BK.tolist(),
            "CK": self.controller.CK.tolist(),
            "DK": self.controller.DK.tolist(),
            "gamma": self.gamma.tolist(),
            "objective": self.objective,
            "active_set": self.active_set,
            "closed_loop_norm": self.verified_closed_loop.value,
            "closed_loop_kind": self.verified_closed_loop.kind,
            "channel_h2_norms": [r.value for r in self.verified_channels],
        }


def _check_of_preconditions(plant, *, need_dw_zero):
    diags = validate_plant(plant)
    feed = [d for d in diags if "Dyu" in d]
    if feed:
        raise NonzeroFeedthroughError(feed[0])
    if diags:
        raise InfeasiblePerformance("; ".join(diags), status="infeasible")
    if need_dw_zero and np.any(plant.Dw != 0.0):
        raise NonzeroFeedthroughError("H2 performance needs Dw = 0")


def _declare_of_variables(plant):
    nx, nu, ny = plant.nx, plant.nu, plant.ny
    X = lmi.MatVar("X", (nx, nx), "symmetric")
    Y = lmi.MatVar("Y", (nx, nx), "symmetric")
    AKh = lmi.MatVar("AKhat", (nx, nx))
    BKh = lmi.MatVar("BKhat", (nx, ny))
    CKh = lmi.MatVar("CKhat", (nu, nx))
    DKh = lmi.MatVar("DKhat", (nu, ny))
    return X, Y, AKh, BKh, CKh, DKh


def _of_common_exprs(p, X, Y, AKh, BKh, CKh, DKh):
    """The repeated sub-expressions of the transformed closed-loop blocks."""
    b11 = lmi.sym(p.A @ X + p.Bu @ CKh)
    b21 = AKh + lmi.const(p.A.T) + (p.Bu @ DKh @ p.Cy).T
    b22 = lmi.sym(Y @ p.A + BKh @ p.Cy)
    b31 = (lmi.const(p.Bw) + p.Bu @ DKh @ p.Dyw).T
    b32 = (Y @ p.Bw + BKh @ p.Dyw).T
    return b11, b21, b22, b31, b32


def _channel_lyapunov_block(p, parts):
    b11, b21, b22, b31, b32 = parts
    return lmi.bmat([
        [b11, None, None],
        [b21, b22, None],
        [b31, b32, lmi.const(-np.eye(p.nw))],
    ])


def _of_channel_blocks(p, X, Y, CKh, DKh, G):
    cons = []
    for i in range(p.nu):
        ei = np.zeros((1, p.nu))
        ei[0, i] = 1.0
        gi = ei @ G @ ei.T
        cons.append(lmi.pos_def(lmi.bmat([
            [gi, CKh.row(i), DKh.row(i) @ p.Cy],
            [None, X.as_expr(), lmi.const(np.eye(p.nx))],
            [None, None, Y.as_expr()],
        ])))
    return cons


def _positivity_block(X, Y, nx):
    return lmi.pos_def(lmi.bmat([
        [X.as_expr(), lmi.const(np.eye(nx))],
        [None, Y.as_expr()],
    ]))


def _zero_feedthrough_equalities(p, DKh):
    """DKhat @ Dyw = 0, added only when Dyw is nonzero."""
    if np.all(p.Dyw == 0.0):
        return []
    return [lmi.equal_zero(DKh @ p.Dyw)]


def _raise_for_status(sol: SdpSolution):
    if sol.status == "optimal":
        return
    if sol.status == "infeasible":
        raise InfeasiblePerformance(
            f"no Lyapunov certificate exists for the requested bounds ({sol.message})",
            status=sol.status)
    raise SynthesisNumericalError(
        f"SDP solve ended with status {sol.status}: {sol.message}", solution=sol)


def synth_of_hinf(spec: SfSynthesisSpec) -> OfSynthesisResult:
    """Dynamic output feedback with ||w -> z||_inf < gamma0."""
    if spec.performance_kind != "hinf":
        raise ValueError("spec.performance_kind must be 'hinf'")
    p = spec.plant
    _check_of_preconditions(p, need_dw_zero=False)
    X, Y, AKh, BKh, CKh, DKh = _declare_of_variables(p)
    G = lmi.MatVar("Gamma", (p.nu, p.nu), "diagonal")
    b11, b21, b22, b31, b32 = parts = _of_common_exprs(p, X, Y, AKh, BKh, CKh, DKh)
    g0 = spec.gamma0 * (1.0 - GAMMA_BACKOFF)

    perf = lmi.bmat([
        [b11, None, None, None],
        [b21, b22, None, None],
        [b31, b32, lmi.const(-g0 * np.eye(p.nw)), None],
        [p.Cz @ X + p.Du @ CKh,
         lmi.const(p.Cz) + p.Du @ DKh @ p.Cy,
         lmi.const(p.Dw) + p.Du @ DKh @ p.Dyw,
         lmi.const(-g0 * np.eye(p.nz))],
    ])
    cons = [
        lmi.neg_def(perf),
        lmi.neg_def(_channel_lyapunov_block(p, parts)),
        _positivity_block(X, Y, p.nx),
    ]
    cons += _of_channel_blocks(p, X, Y, CKh, DKh, G)
    cons += _zero_feedthrough_equalities(p, DKh)
    if spec.gamma_max is not None:
        cons += _gamma_caps(G, spec.gamma_max)

    objective = lmi.trace(np.diag(spec.rho) @ G)
    problem, vm = lmi.compile_lmis([X, Y, AKh, BKh, CKh, DKh, G], cons,
                                   objective=objective)
    sol = solve_sdp(problem, spec.solver)
    _raise_for_status(sol)
    return _finish_of(spec, vm, sol, X, Y, AKh, BKh, CKh, DKh, G)


def synth_of_h2(spec: SfSynthesisSpec) -> OfSynthesisResult:
    """Dynamic output feedback with ||w -> z||_H2 < gamma0 (needs Dw = 0)."""
    if spec.performance_kind != "h2":
        raise ValueError("spec.performance_kind must be 'h2'")
    p = spec.plant
    _check_of_preconditions(p, need_dw_zero=True)
    X, Y, AKh, BKh, CKh, DKh = _declare_of_variables(p)
    G = lmi.MatVar("Gamma", (p.nu, p.nu), "diagonal")
    Q = lmi.MatVar("Q", (p.nz, p.nz), "symmetric")
    parts = _of_common_exprs(p, X, Y, AKh, BKh, CKh, DKh)
    g0 = spec.gamma0 * (1.0 - GAMMA_BACKOFF)

    q_block = lmi.bmat([
        [X.as_expr(), lmi.const(np.eye(p.nx)), (p.Cz @ X + p.Du @ CKh).T],
        [None, Y.as_expr(), (lmi.const(p.Cz) + p.Du @ DKh @ p.Cy).T],
        [None, None, Q.as_expr()],
    ])
    cons = [
        lmi.neg_def(_channel_lyapunov_block(p, parts)),
        lmi.pos_def(q_block),
        lmi.neg_def(lmi.trace(Q) - g0 ** 2 * np.eye(1)),
        _positivity_block(X, Y, p.nx),
    ]
    if np.any(p.Dyw != 0.0):
        cons.append(lmi.equal_zero(lmi.const(p.Dw) + p.Du @ DKh @ p.Dyw))
        cons.append(lmi.equal_zero(DKh @ p.Dyw))
    cons += _of_channel_blocks(p, X, Y, CKh, DKh, G)
    if spec.gamma_max is not None:
        cons += _gamma_caps(G, spec.gamma_max)

    objective = lmi.trace(np.diag(spec.rho) @ G)
    problem, vm = lmi.compile_lmis([X, Y, AKh, BKh, CKh, DKh, G, Q], cons,
                                   objective=objective)
    sol = solve_sdp(problem, spec.solver)
    _raise_for_status(sol)
    return _finish_of(spec, vm, sol, X, Y, AKh, BKh, CKh, DKh, G)


def _gamma_caps(G, gamma_max):
    cons = []
    nu = G.shape[0]
    for i in range(nu):
        ei = np.zeros((1, nu))
        ei[0, i] = 1.0
        cons.append(lmi.neg_semidef(ei @ G @ ei.T - gamma_max[i] * np.eye(1)))
    return cons


def _finish_of(spec, vm, sol, X, Y, AKh, BKh, CKh, DKh, G):
    p = spec.plant
    hat = HatController(
        AKhat=vm.value(sol.x, AKh),
        BKhat=vm.value(sol.x, BKh),
        CKhat=vm.value(sol.x, CKh),
        DKhat=vm.value(sol.x, DKh),
        X=vm.value(sol.x, X),
        Y=vm.value(sol.x, Y),
    )
    ctrl = reconstruct_controller(hat, p)
    gamma = np.diag(vm.value(sol.x, G)).copy()
    if spec.gamma_max is not None:
        gamma = np.minimum(gamma, spec.gamma_max)
    cl = close_output_feedback(p, ctrl)
    if spec.performance_kind == "hinf":
        report = analysis.hinf_norm(cl)
    else:
        report = analysis.h2_norm(cl)
    if report.value >= spec.gamma0 * (1.0 + VERIFY_RTOL):
        raise SynthesisNumericalError(
            f"verification failed: closed-loop {report.kind} norm "
            f"{report.value:.6g} exceeds the bound {spec.gamma0:.6g}")
    channels = analysis.channel_h2_norms(p, cl)
    for i, rep in enumerate(channels):
        bound = float(np.sqrt(max(gamma[i], 0.0)))
        if rep.value >= bound * (1.0 + VERIFY_RTOL) + 1e-12:
            raise SynthesisNumericalError(
                f"verification failed: channel {i} H2 norm {rep.value:.6g} "
                f"exceeds its bound {bound:.6g}")
    return OfSynthesisResult(
        hat=hat,
        controller=ctrl,
        gamma=gamma,
        objective=float(spec.rho @ gamma),
        active_set=active_set_from_values(np.sqrt(np.maximum(gamma, 0.0))),
        verified_closed_loop=report,
        verified_channels=channels,
        solution=sol,
    )


def synth_of(spec: SfSynthesisSpec) -> OfSynthesisResult:
    """Dispatch on spec.performance_kind."""
    if spec.performance_kind == "hinf":
        return synth_of_hinf(spec)
    return synth_of_h2(spec)


def factor_lyapunov_partitions(X, Y):
    """Nonsingular M, N with M @ N.T = I - X @ Y (LU with partial pivoting)."""
    nx = X.shape[0]
    S = np.eye(nx) - X @ Y
    cond = float(np.linalg.cond(S))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ReconstructionFailure(
            f"I - X@Y is numerically singular (condition number {cond:.3e}); "
            "the Lyapunov positivity margin was too small")
    P, L, U = scipy.linalg.lu(S)
    M = P @ L
    N = U.T
    return M, N


def reconstruct_controller(hat: HatController, plant: GeneralizedPlant) -> DynamicController:
    """Invert the change of variables to obtain (AK, BK, CK, DK)."""
    X, Y = hat.X, hat.Y
    A, Bu, Cy = plant.A, plant.Bu, plant.Cy
    M, N = factor_lyapunov_partitions(X, Y)
    DK = hat.DKhat
    CK = np.linalg.solve(M, (hat.CKhat - DK @ Cy @ X).T).T
    BK = np.linalg.solve(N, hat.BKhat - Y @ Bu @ DK)
    core = (hat.AKhat - N @ BK @ Cy @ X - Y @ Bu @ CK @ M.T
            - Y @ (A + Bu @ DK @ Cy) @ X)
    AK = np.linalg.solve(M, np.linalg.solve(N, core).T).T
    return DynamicController(AK=AK, BK=BK, CK=CK, DK=DK)


def hat_transform(ctrl: DynamicController, plant: GeneralizedPlant, X, Y, M, N) -> HatController:
    """Forward change of variables; the inverse of reconstruct_controller.

    Exists for testing the reconstruction round trip.
    """
    A, Bu, Cy = plant.A, plant.Bu, plant.Cy
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    N = np.atleast_2d(np.asarray(N, dtype=float))
    AK, BK, CK, DK = ctrl.AK, ctrl.BK, ctrl.CK, ctrl.DK
    AKhat = (N @ AK @ M.T + N @ BK @ Cy @ X + Y @ Bu @ CK @ M.T
             + Y @ (A + Bu @ DK @ Cy) @ X)
    BKhat = N @ BK + Y @ Bu @ DK
    CKhat = CK @ M.T + DK @ Cy @ X
    DKhat = DK
    return HatController(AKhat=AKhat, BKhat=BKhat, CKhat=CKhat, DKhat=DKhat, X=X, Y=Y)
