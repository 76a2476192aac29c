"""Benchmark plants, closed-loop time simulation, and sweep studies.

Three plant families:

* ScalarOracle -- the 1-state plant whose optimal designs are known in
  closed form; used to pin down synthesis accuracy.
* MassSpringChain(n) -- standard chain of unit masses and springs with
  light damping; actuators and disturbances act as forces on each mass.
* TensegrityApprox -- a planar cantilever of two three-bar pendulum
  chains cross-linked by nine elastic cables, linearized about its
  documented trim geometry.  Inputs are cable force-density
  perturbations, disturbances are bar torques.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NonHurwitzError
from .model import DynamicController, GeneralizedPlant, StateFeedbackGain, \
    close_output_feedback, close_state_feedback
from .sparsify import ReweightPolicy, prune_and_resolve, reweight_iterate
from .errors import InfeasiblePerformance, SparsactError

__all__ = [
    "ScalarOracle",
    "MassSpringChain",
    "TensegrityApprox",
    "make_plant",
    "SimResult",
    "simulate_closed_loop",
    "gamma_sweep",
]


# ---------------------------------------------------------------------------
# plant catalog


@dataclass(frozen=True)
class ScalarOracle:
    """A=Bu=Bw=Cz=1, everything else zero; optimal gains known analytically."""

    def build(self) -> GeneralizedPlant:
        one = [[1.0]]
        zero = [[0.0]]
        return GeneralizedPlant(A=one, Bu=one, Bw=one, Cz=one, Du=zero,
                                Dw=zero, Cy=one, Dyw=zero)


@dataclass(frozen=True)
class MassSpringChain:
    """n unit masses in a line, unit springs to neighbors and ground ends."""

    n: int
    damping: float = 0.01

    def build(self) -> GeneralizedPlant:
        n = self.n
        if n < 1:
            raise ValueError("chain needs at least one mass")
        K = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
        A = np.block([
            [np.zeros((n, n)), np.eye(n)],
            [-K, -self.damping * np.eye(n)],
        ])
        Bf = np.vstack([np.zeros((n, n)), np.eye(n)])
        Cz = np.vstack([
            np.hstack([np.eye(n), np.zeros((n, n))]),
            np.zeros((n, 2 * n)),
        ])
        Du = np.vstack([np.zeros((n, n)), 0.1 * np.eye(n)])
        return GeneralizedPlant(
            A=A, Bu=Bf, Bw=Bf, Cz=Cz, Du=Du, Dw=np.zeros((2 * n, n)),
            Cy=np.eye(2 * n), Dyw=np.zeros((2 * n, n)))


@dataclass(frozen=True)
class TensegrityApprox:
    """Planar two-chain, nine-cable cantilever approximation.

    Bars: aluminum rods, length 1 m, radius 5 mm.  Cables: 2 mm diameter
    at a 0.26 GPa Young's modulus, zero pretension at trim.  The first
    chain hangs at absolute tip angles (55, -45, 23) degrees from its
    anchor, the second chain is the mirror image from an anchor offset
    vertically; the nine cables connect every free node of one chain to
    every free node of the other.
    """

    bar_length: float = 1.0
    bar_radius: float = 5e-3
    bar_density: float = 2700.0
    cable_diameter: float = 2e-3
    cable_modulus: float = 0.26e9
    anchor_offset: float = 1.0
    joint_stiffness: float = 2.0
    rayleigh_alpha: float = 0.05
    rayleigh_beta: float = 1e-4
    disturbance_scale: float = 0.1
    control_weight: float = 0.1

    @property
    def trim_angles(self):
        base = np.deg2rad([55.0, -45.0, 23.0])
        return np.concatenate([base, -base])

    def _node_positions(self, q):
        """Free-node coordinates of both chains for absolute angles q."""
        L = self.bar_length
        a = [np.array([0.0, 0.0])]
        for k in range(3):
            a.append(a[-1] + L * np.array([math.cos(q[k]), math.sin(q[k])]))
        b = [np.array([0.0, -self.anchor_offset])]
        for k in range(3):
            b.append(b[-1] + L * np.array([math.cos(q[3 + k]), math.sin(q[3 + k])]))
        return a[1:], b[1:]

    def _cable_endpoints(self):
        # cable c = 3*i + j connects free node i of chain one to free node
        # j of chain two (i, j in 0..2)
        return [(i, j) for i in range(3) for j in range(3)]

    def cable_lengths(self, q):
        a, b = self._node_positions(q)
        return np.array([np.linalg.norm(a[i] - b[j])
                         for i, j in self._cable_endpoints()])

    def _length_jacobian(self, q, step=1e-6):
        base = self.cable_lengths(q)
        Gm = np.zeros((9, 6))
        for k in range(6):
            qp = q.copy()
            qp[k] += step
            qm = q.copy()
            qm[k] -= step
            Gm[:, k] = (self.cable_lengths(qp) - self.cable_lengths(qm)) / (2 * step)
        return Gm, base

    def _mass_matrix(self, q, step=1e-6):
        """M(q) from the bar center-of-mass Jacobians plus rod inertia."""
        L = self.bar_length
        m = self.bar_density * math.pi * self.bar_radius ** 2 * L
        I_com = m * L ** 2 / 12.0

        def coms(qv):
            a, b = self._node_positions(qv)
            a = [np.array([0.0, 0.0])] + a
            b = [np.array([0.0, -self.anchor_offset])] + b
            out = []
            for k in range(3):
                out.append(0.5 * (a[k] + a[k + 1]))
            for k in range(3):
                out.append(0.5 * (b[k] + b[k + 1]))
            return np.concatenate(out)

        J = np.zeros((12, 6))
        for k in range(6):
            qp = q.copy()
            qp[k] += step
            qm = q.copy()
            qm[k] -= step
            J[:, k] = (coms(qp) - coms(qm)) / (2 * step)
        M = m * (J.T @ J) + I_com * np.eye(6)
        return 0.5 * (M + M.T)

    def _raw_dynamics(self):
        """Unbalanced (A, Bu, Bw) in physical angle/rate coordinates."""
        q0 = self.trim_angles
        M = self._mass_matrix(q0)
        Gm, lengths = self._length_jacobian(q0)
        area = math.pi * (self.cable_diameter / 2.0) ** 2
        k_cable = self.cable_modulus * area / lengths  # EA / l0, zero pretension
        Kq = Gm.T @ np.diag(k_cable) @ Gm
        # flexural stiffness of the pin joints, on relative angles; without
        # it the mirror-symmetric scissor motion changes no cable length
        D = np.eye(3) - np.eye(3, k=-1)
        Dj = np.block([[D, np.zeros((3, 3))], [np.zeros((3, 3)), D]])
        Kq = Kq + self.joint_stiffness * Dj.T @ Dj
        Kq = 0.5 * (Kq + Kq.T)
        Cq = self.rayleigh_alpha * M + self.rayleigh_beta * Kq

        Minv = np.linalg.inv(M)
        A = np.block([
            [np.zeros((6, 6)), np.eye(6)],
            [-Minv @ Kq, -Minv @ Cq],
        ])
        # force-density input sigma_c produces generalized force -|s_c| g_c
        Bu = np.vstack([np.zeros((6, 9)), -Minv @ (Gm.T * lengths)])
        Bw = np.vstack([np.zeros((6, 6)),
                        Minv @ (self.disturbance_scale * np.eye(6))])
        return A, Bu, Bw

    def _balance_transform(self):
        A, _, _ = self._raw_dynamics()
        _, T = scipy.linalg.matrix_balance(A)
        return T

    def build(self) -> GeneralizedPlant:
        A, Bu, Bw = self._raw_dynamics()
        Cz = np.vstack([np.hstack([np.eye(6), np.zeros((6, 6))]),
                        np.zeros((9, 12))])
        Du = np.vstack([np.zeros((6, 9)), self.control_weight * np.eye(9)])
        Cy = np.eye(12)
        # diagonal state balancing: the stiffness-to-inertia ratios make raw
        # A entries span four orders of magnitude, which the interior-point
        # certificates cannot resolve in double precision.  A similarity
        # folded into the input/output maps leaves every signal unchanged.
        A, T = scipy.linalg.matrix_balance(A)
        Tinv = np.diag(1.0 / np.diag(T))
        Bu, Bw, Cz, Cy = Tinv @ Bu, Tinv @ Bw, Cz @ T, Cy @ T
        return GeneralizedPlant(
            A=A, Bu=Bu, Bw=Bw, Cz=Cz, Du=Du, Dw=np.zeros((15, 6)),
            Cy=Cy, Dyw=np.zeros((12, 6)),
            actuator_names=[f"cable{c + 1}" for c in range(9)],
            sensor_names=[f"angle{k + 1}" for k in range(6)]
            + [f"rate{k + 1}" for k in range(6)])

    def cubic_stiffening(self, strength=10.0):
        """State-dependent extra force for the nonlinear simulation flag.

        Models stiffening cables: tension picks up a cubic term in the
        elongation, so the added generalized force is
        -sum_c k_c * strength * (g_c . dq)^3 * g_c mapped through M^{-1},
        expressed in the same balanced coordinates the plant uses.
        """
        q0 = self.trim_angles
        M = self._mass_matrix(q0)
        Gm, lengths = self._length_jacobian(q0)
        area = math.pi * (self.cable_diameter / 2.0) ** 2
        k_cable = self.cable_modulus * area / lengths
        Minv = np.linalg.inv(M)
        t_diag = np.diag(self._balance_transform())

        def extra(xstate):
            dq = t_diag[:6] * xstate[:6]   # balanced state -> physical angles
            e = Gm @ dq
            force = -Gm.T @ (k_cable * strength * e ** 3)
            return np.concatenate([np.zeros(6), Minv @ force]) / t_diag

        return extra


def make_plant(family) -> GeneralizedPlant:
    return family.build()


# ---------------------------------------------------------------------------
# closed-loop simulation


@dataclass(frozen=True)
class SimResult:
    time: np.ndarray
    states: np.ndarray            # (len(time), n_cl)
    controls: np.ndarray          # (len(time), nu)
    peaks: np.ndarray             # per-channel max |u_i(t)|
    disturbance: dict             # descriptor used, seed included


def _disturbance_fn(descriptor, nw, rng):
    kind = descriptor.get("kind", "step")
    if kind == "zero":
        return lambda t: np.zeros(nw)
    if kind in ("step", "fixed"):
        d = np.asarray(descriptor.get("direction", np.ones(nw)), dtype=float)
        d = d / max(np.linalg.norm(d), 1e-30)
        return lambda t: d
    if kind == "sinusoid":
        omega = float(descriptor.get("omega", 1.0))
        d = np.asarray(descriptor.get("direction", np.ones(nw)), dtype=float)
        d = d / max(np.linalg.norm(d), 1e-30)
        # two orthogonal phases keep ||d(t)|| = 1 pointwise when possible
        if nw >= 2:
            d2 = np.zeros(nw)
            d2[(np.argmax(np.abs(d)) + 1) % nw] = 1.0
            d2 = d2 - (d2 @ d) * d
            d2 = d2 / max(np.linalg.norm(d2), 1e-30)
            return lambda t: math.cos(omega * t) * d + math.sin(omega * t) * d2
        return lambda t: math.cos(omega * t) * d
    if kind == "noise":
        n_comp = int(descriptor.get("components", 16))
        omegas = rng.uniform(0.05, 5.0, size=n_comp)
        phases = rng.uniform(0.0, 2.0 * math.pi, size=n_comp)
        dirs = rng.standard_normal((n_comp, nw))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

        def d_of_t(t):
            v = np.sum([math.sin(w * t + ph) * dd
                        for w, ph, dd in zip(omegas, phases, dirs)], axis=0)
            nv = np.linalg.norm(v)
            return v / nv if nv > 1e-12 else np.zeros(nw)

        return d_of_t
    raise ValueError(f"unknown disturbance kind {kind!r}")


def simulate_closed_loop(plant: GeneralizedPlant, controller, disturbance=None,
                         horizon=20.0, dt=1e-3, x0=None, nonlinear_extra=None,
                         seed=0) -> SimResult:
    """Fixed-step RK4 simulation of the closed loop.

    `disturbance` is a descriptor dict (kind step|fixed|sinusoid|noise|zero
    plus parameters); `nonlinear_extra`, if given, is a function of the
    plant state appended to the plant state derivative (e.g. cubic cable
    stiffening).  Controls are recorded per step along with their peaks.
    """
    if isinstance(controller, DynamicController):
        cl = close_output_feedback(plant, controller)
    elif isinstance(controller, StateFeedbackGain) or not hasattr(controller, "Acl"):
        cl = close_state_feedback(plant, controller)
    else:
        cl = controller
    Acl, Bcl = cl.Acl, cl.Bcl
    Ct, Dt = cl.Ctilde, cl.Dtilde
    eigs = np.linalg.eigvals(Acl)
    if np.max(eigs.real) >= 0.0:
        raise NonHurwitzError("closed loop is not asymptotically stable")
    n_cl = Acl.shape[0]
    nx = plant.nx
    descriptor = dict(disturbance or {"kind": "step"})
    descriptor.setdefault("seed", seed)
    rng = np.random.default_rng(descriptor["seed"])
    d_of = _disturbance_fn(descriptor, plant.nw, rng)

    def f(t, xv):
        dx = Acl @ xv + Bcl @ d_of(t)
        if nonlinear_extra is not None:
            dx[:nx] += nonlinear_extra(xv[:nx])
        return dx

    steps = int(round(horizon / dt))
    times = np.linspace(0.0, steps * dt, steps + 1)
    xv = np.zeros(n_cl) if x0 is None else np.asarray(x0, dtype=float).copy()
    states = np.empty((steps + 1, n_cl))
    controls = np.empty((steps + 1, Ct.shape[0]))
    energy_limit = 1e6 * max(1.0, np.linalg.norm(xv))
    for k, t in enumerate(times):
        states[k] = xv
        controls[k] = Ct @ xv + Dt @ d_of(t)
        if k == steps:
            break
        k1 = f(t, xv)
        k2 = f(t + dt / 2, xv + dt / 2 * k1)
        k3 = f(t + dt / 2, xv + dt / 2 * k2)
        k4 = f(t + dt, xv + dt * k3)
        xv = xv + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.linalg.norm(xv) > energy_limit:
            raise NonHurwitzError(
                f"trajectory energy blew past {energy_limit:.1e} at t={t:.3f}; "
                "the step size is too large for these dynamics")
    return SimResult(time=times, states=states, controls=controls,
                     peaks=np.abs(controls).max(axis=0), disturbance=descriptor)


# ---------------------------------------------------------------------------
# gamma sweeps


def gamma_sweep(spec_for, gamma0_list, policy: ReweightPolicy = ReweightPolicy(),
                synthesize=None):
    """Reweighted synthesis across gamma0 values; one result row per gamma0.

    `spec_for(gamma0)` builds the synthesis spec for a given bound.  Rows
    record the active sets, sparsity values, and verified norms; an
    infeasible gamma0 is recorded and the sweep continues.
    """
    if not len(gamma0_list):
        raise ValueError("gamma0_list must be nonempty")
    rows = []
    for g0 in gamma0_list:
        spec = spec_for(float(g0))
        row = {"gamma0": float(g0)}
        try:
            if synthesize is None:
                trace = reweight_iterate(spec, policy)
                pruned = prune_and_resolve(trace, spec)
            else:
                trace = reweight_iterate(spec, policy, synthesize)
                pruned = prune_and_resolve(trace, spec, synthesize)
        except InfeasiblePerformance as exc:
            row.update(status="infeasible", message=str(exc))
            rows.append(row)
            continue
        except SparsactError as exc:
            row.update(status="error", message=str(exc))
            rows.append(row)
            continue
        final = trace.final
        row.update(
            status="ok",
            iterations=len(trace),
            active=trace.active_sets[-1],
            values=trace.values[-1],
            kept_actuators=pruned.kept_actuators,
            kept_sensors=pruned.kept_sensors,
            verified_norm=pruned.result.verified_closed_loop.value,
        )
        rows.append(row)
    return rows


def sweep_to_csv(rows):
    lines = ["gamma0,status,iterations,kept_actuators,kept_sensors,verified_norm,message"]
    for r in rows:
        ka = ";".join(map(str, r.get("kept_actuators", [])))
        ks = ";".join(map(str, r.get("kept_sensors", [])))
        lines.append(
            f"{r['gamma0']!r},{r['status']},{r.get('iterations', '')},"
            f"\"{ka}\",\"{ks}\",{r.get('verified_norm', '')},"
            f"\"{r.get('message', '')}\"")
    return "\n".join(lines) + "\n"
