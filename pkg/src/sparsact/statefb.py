"""State-feedback synthesis with sparse actuation.

Minimizes a weighted l1 norm of per-actuator squared-H2 bounds Gamma
subject to a closed-loop performance constraint (H-infinity or H2) on
the disturbance-to-output channel.  Small per-actuator bounds mean the
corresponding actuator does little work and can eventually be pruned.
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
from .model import GeneralizedPlant, StateFeedbackGain, close_state_feedback, validate_plant
from .sdp import SdpSolution, SolverOptions, solve_sdp

__all__ = [
    "SfSynthesisSpec",
    "SfSynthesisResult",
    "synth_sf_hinf",
    "synth_sf_h2",
    "synth_sf",
    "active_set_from_values",
    "ACTIVE_THRESHOLD_RATIO",
    "VERIFY_RTOL",
    "COND_LIMIT",
    "GAMMA_BACKOFF",
]

ACTIVE_THRESHOLD_RATIO = 1e-3
VERIFY_RTOL = 1e-5
COND_LIMIT = 1e12
# The synthesis LMIs use gamma0 shrunk by this relative amount so that the
# independent verification against the requested gamma0 always has headroom,
# even when the performance constraint is active at the optimum.
GAMMA_BACKOFF = 1e-3


ACTIVE_ABS_FLOOR = 1e-8


def active_set_from_values(values, threshold_ratio=ACTIVE_THRESHOLD_RATIO):
    """Indices whose value exceeds threshold_ratio times the largest value.

    Values below an absolute floor are never active: when a design needs
    essentially no control at all, every group is inactive rather than
    every group trivially clearing a relative threshold of ~zero.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    cut = max(threshold_ratio * float(values.max()), ACTIVE_ABS_FLOOR)
    return [int(i) for i in np.flatnonzero(values > cut)]


@dataclass(frozen=True)
class SfSynthesisSpec:
    """Inputs to a state-feedback design.

    gamma0 bounds the closed-loop norm of the chosen kind; rho weights the
    per-actuator bounds in the objective; gamma_max optionally caps each
    gamma_i (hardware actuator limits).
    """

    plant: GeneralizedPlant
    performance_kind: str = "hinf"
    gamma0: float = 1.0
    rho: np.ndarray | None = None
    gamma_max: np.ndarray | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.performance_kind not in ("hinf", "h2"):
            raise ValueError(f"performance_kind must be 'hinf' or 'h2', got {self.performance_kind!r}")
        if not (self.gamma0 > 0):
            raise ValueError("gamma0 must be positive")
        nu = self.plant.nu
        rho = np.ones(nu) if self.rho is None else np.asarray(self.rho, dtype=float).ravel()
        if rho.shape != (nu,):
            raise DimensionError(f"rho must have length {nu}")
        if np.any(rho <= 0):
            raise ValueError("rho must be positive elementwise")
        object.__setattr__(self, "rho", rho)
        if self.gamma_max is not None:
            gm = np.asarray(self.gamma_max, dtype=float).ravel()
            if gm.shape != (nu,):
                raise DimensionError(f"gamma_max must have length {nu}")
            if np.any(gm <= 0):
                raise ValueError("gamma_max must be positive elementwise")
            object.__setattr__(self, "gamma_max", gm)
        if self.performance_kind == "h2" and np.any(self.plant.Dw != 0.0):
            raise NonzeroFeedthroughError(
                "H2 performance needs Dw = 0: the disturbance-to-output "
                "feedthrough makes the H2 norm unbounded")


@dataclass(frozen=True)
class SfSynthesisResult:
    K: StateFeedbackGain
    gamma: np.ndarray            # per-actuator squared-H2 bounds
    objective: float             # rho . gamma
    active_set: list
    verified_closed_loop: analysis.NormReport
    verified_channels: list
    X: np.ndarray                # Lyapunov-type certificate variable
    solution: SdpSolution

    def to_dict(self):
        return {
            "K": self.K.K.tolist(),
            "gamma": self.gamma.tolist(),
            "objective": self.objective,
            "active_set": self.active_set,
            "closed_loop_norm": self.verified_closed_loop.value,
            "closed_loop_kind": self.verified_closed_loop.kind,
            "channel_h2_norms": [r.value for r in self.verified_channels],
        }


def _check_stabilizable(plant):
    diags = [d for d in validate_plant(plant) if "unstabilizable" in d]
    if diags:
        raise InfeasiblePerformance("; ".join(diags), status="infeasible")


def _raise_for_status(sol: SdpSolution):
    if sol.status == "optimal":
        return
    if sol.status == "infeasible":
        raise InfeasiblePerformance(
            f"no Lyapunov certificate exists for the requested bounds ({sol.message})",
            status=sol.status)
    raise SynthesisNumericalError(
        f"SDP solve ended with status {sol.status}: {sol.message}", solution=sol)


def _declare_sf_variables(plant):
    nx, nu = plant.nx, plant.nu
    X = lmi.MatVar("X", (nx, nx), "symmetric")
    W = lmi.MatVar("W", (nu, nx))
    G = lmi.MatVar("Gamma", (nu, nu), "diagonal")
    return X, W, G


def _channel_blocks(X, W, G, nu):
    cons = []
    for i in range(nu):
        ei = np.zeros((1, nu))
        ei[0, i] = 1.0
        gi = ei @ G @ ei.T
        cons.append(lmi.neg_def(lmi.bmat([[-gi, W.row(i)], [None, -X]])))
    return cons


def _gamma_cap_blocks(G, gamma_max):
    cons = []
    nu = G.shape[0]
    for i in range(nu):
        ei = np.zeros((1, nu))
        ei[0, i] = 1.0
        cons.append(lmi.neg_semidef(ei @ G @ ei.T - gamma_max[i] * np.eye(1)))
    return cons


def _recover_gain(vm, sol, X, W):
    Xv = vm.value(sol.x, X)
    Xv = 0.5 * (Xv + Xv.T)
    cond = float(np.linalg.cond(Xv))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SynthesisNumericalError(
            f"certificate matrix is numerically singular at recovery "
            f"(condition number {cond:.3e} > {COND_LIMIT:.0e})", solution=sol)
    K = np.linalg.solve(Xv.T, vm.value(sol.x, W).T).T
    return StateFeedbackGain(K), Xv


def _verify(plant, gain, spec, gamma):
    cl = close_state_feedback(plant, gain)
    if spec.performance_kind == "hinf":
        report = analysis.hinf_norm(cl)
    else:
        report = analysis.h2_norm(cl)
    if report.value >= spec.gamma0 * (1.0 + VERIFY_RTOL):
        raise SynthesisNumericalError(
            f"verification failed: closed-loop {report.kind} norm "
            f"{report.value:.6g} exceeds the bound {spec.gamma0:.6g}")
    channels = analysis.channel_h2_norms(plant, cl)
    for i, rep in enumerate(channels):
        bound = float(np.sqrt(max(gamma[i], 0.0)))
        if rep.value >= bound * (1.0 + VERIFY_RTOL) + 1e-12:
            raise SynthesisNumericalError(
                f"verification failed: channel {i} H2 norm {rep.value:.6g} "
                f"exceeds its bound {bound:.6g}")
    return report, channels


def synth_sf_hinf(spec: SfSynthesisSpec) -> SfSynthesisResult:
    """Design u = Kx with ||w -> z||_inf < gamma0, minimizing rho . Gamma."""
    if spec.performance_kind != "hinf":
        raise ValueError("spec.performance_kind must be 'hinf'")
    p = spec.plant
    _check_stabilizable(p)
    X, W, G = _declare_sf_variables(p)
    AXBW = p.A @ X + p.Bu @ W
    g0 = spec.gamma0 * (1.0 - GAMMA_BACKOFF)

    bounded_real = lmi.bmat([
        [lmi.sym(AXBW), lmi.const(p.Bw), (p.Cz @ X + p.Du @ W).T],
        [None, lmi.const(-g0 * np.eye(p.nw)), lmi.const(p.Dw.T)],
        [None, None, lmi.const(-g0 * np.eye(p.nz))],
    ])
    gramian = lmi.sym(AXBW) + lmi.const(p.Bw @ p.Bw.T)
    cons = [lmi.neg_def(bounded_real), lmi.neg_def(gramian), lmi.pos_def(X)]
    cons += _channel_blocks(X, W, G, p.nu)
    if spec.gamma_max is not None:
        cons += _gamma_cap_blocks(G, spec.gamma_max)

    objective = lmi.trace(np.diag(spec.rho) @ G)
    problem, vm = lmi.compile_lmis([X, W, G], cons, objective=objective)
    sol = solve_sdp(problem, spec.solver)
    _raise_for_status(sol)
    return _finish(spec, vm, sol, X, W, G)


def synth_sf_h2(spec: SfSynthesisSpec) -> SfSynthesisResult:
    """Design u = Kx with ||w -> z||_H2 < gamma0, minimizing rho . Gamma."""
    if spec.performance_kind != "h2":
        raise ValueError("spec.performance_kind must be 'h2'")
    p = spec.plant
    if np.any(p.Dw != 0.0):
        raise NonzeroFeedthroughError("H2 performance needs Dw = 0")
    _check_stabilizable(p)
    X, W, G = _declare_sf_variables(p)
    Z = lmi.MatVar("Z", (p.nz, p.nz), "symmetric")
    AXBW = p.A @ X + p.Bu @ W

    gramian = lmi.sym(AXBW) + lmi.const(p.Bw @ p.Bw.T)
    z_block = lmi.bmat([[-(Z.as_expr()), p.Cz @ X + p.Du @ W], [None, -X]])
    cons = [
        lmi.neg_def(gramian),
        lmi.neg_def(z_block),
        lmi.neg_def(lmi.trace(Z) - (spec.gamma0 * (1.0 - GAMMA_BACKOFF)) ** 2 * np.eye(1)),
        lmi.pos_def(X),
    ]
    cons += _channel_blocks(X, W, G, p.nu)
    if spec.gamma_max is not None:
        cons += _gamma_cap_blocks(G, spec.gamma_max)

    objective = lmi.trace(np.diag(spec.rho) @ G)
    problem, vm = lmi.compile_lmis([X, W, G, Z], cons, objective=objective)
    sol = solve_sdp(problem, spec.solver)
    _raise_for_status(sol)
    return _finish(spec, vm, sol, X, W, G)


def _finish(spec, vm, sol, X, W, G):
    gain, Xv = _recover_gain(vm, sol, X, W)
    gamma = np.diag(vm.value(sol.x, G)).copy()
    if spec.gamma_max is not None:
        gamma = np.minimum(gamma, spec.gamma_max)
    report, channels = _verify(spec.plant, gain, spec, gamma)
    return SfSynthesisResult(
        K=gain,
        gamma=gamma,
        objective=float(spec.rho @ gamma),
        active_set=active_set_from_values(np.sqrt(np.maximum(gamma, 0.0))),
        verified_closed_loop=report,
        verified_channels=channels,
        X=Xv,
        solution=sol,
    )


def synth_sf(spec: SfSynthesisSpec) -> SfSynthesisResult:
    """Dispatch on spec.performance_kind."""
    if spec.performance_kind == "hinf":
        return synth_sf_hinf(spec)
    return synth_sf_h2(spec)
