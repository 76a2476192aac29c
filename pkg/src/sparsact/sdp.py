"""Dense semidefinite-programming solver.

Problems are given in LMI form: a vector x of free scalar variables, a
linear objective c'x, linear equalities A x = b, and a set of PSD blocks
F_j(x) = F0_j + sum_i x_i C_ji  >= 0.

The solver is a primal-dual interior-point method on the homogeneous
self-dual embedding with Nesterov-Todd scaling and a Mehrotra corrector.
All linear algebra is dense; target problems have at most a few hundred
variables and LMI rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "LmiBlock",
    "SdpProblem",
    "SdpSolution",
    "SolverOptions",
    "IterateRecord",
    "CertificateReport",
    "solve_sdp",
    "check_certificate",
]


# ---------------------------------------------------------------------------
# problem containers


@dataclass(frozen=True)
class LmiBlock:
    """One PSD constraint F0 + sum_j coefs[j] * x[var_idx[j]] >= 0."""

    F0: np.ndarray
    var_idx: np.ndarray
    coefs: np.ndarray  # (k, n, n), symmetric slices

    def __post_init__(self):
        F0 = np.atleast_2d(np.asarray(self.F0, dtype=float))
        vi = np.asarray(self.var_idx, dtype=int)
        co = np.asarray(self.coefs, dtype=float)
        n = F0.shape[0]
        if F0.shape != (n, n):
            raise ValueError("block constant must be square")
        if co.shape != (len(vi), n, n):
            raise ValueError("coefficient tensor shape mismatch")
        object.__setattr__(self, "F0", F0)
        object.__setattr__(self, "var_idx", vi)
        object.__setattr__(self, "coefs", co)

    @property
    def dim(self):
        return self.F0.shape[0]

    def evaluate(self, x):
        M = self.F0.copy()
        if len(self.var_idx):
            M = M + np.tensordot(x[self.var_idx], self.coefs, axes=1)
        return M


class SdpProblem:
    """LMI-form SDP: min c'x  s.t.  A_eq x = b_eq,  each block >= 0."""

    def __init__(self, num_vars, c, blocks, eq_A=None, eq_b=None, obj_const=0.0):
        self.num_vars = int(num_vars)
        self.c = np.zeros(num_vars) if c is None else np.asarray(c, dtype=float)
        if self.c.shape != (self.num_vars,):
            raise ValueError("objective vector has wrong length")
        self.blocks = list(blocks)
        for blk in self.blocks:
            if blk.dim < 1:
                raise ValueError("block dimensions must be >= 1")
            if len(blk.var_idx) and (blk.var_idx.min() < 0 or blk.var_idx.max() >= num_vars):
                raise ValueError("block references undeclared variables")
        if eq_A is None:
            eq_A = np.zeros((0, num_vars))
        self.eq_A = np.atleast_2d(np.asarray(eq_A, dtype=float))
        if self.eq_A.size == 0:
            self.eq_A = self.eq_A.reshape(0, num_vars)
        self.eq_b = np.zeros(self.eq_A.shape[0]) if eq_b is None else np.asarray(eq_b, dtype=float)
        if self.eq_A.shape != (len(self.eq_b), num_vars):
            raise ValueError("equality system has inconsistent shape")
        self.obj_const = float(obj_const)

    @property
    def block_dims(self):
        return [blk.dim for blk in self.blocks]

    def dump_triplets(self, path):
        """Write the packed problem as plain-text sparse triplets.

        Line format: ``block row col variable coefficient``.  Variable -1
        denotes the constant term.  PSD blocks are numbered from 0; the
        equality rows use block index ``len(blocks)`` (row = equality index,
        col = 0, with the right-hand side as the constant); the objective
        uses block index -1 (row = col = 0).
        """
        with open(path, "w") as f:
            for i, ci in enumerate(self.c):
                if ci != 0.0:
                    f.write(f"-1 0 0 {i} {ci:.17g}\n")
            for bidx, blk in enumerate(self.blocks):
                rows, cols = np.nonzero(blk.F0)
                for r, cc in zip(rows, cols):
                    f.write(f"{bidx} {r} {cc} -1 {blk.F0[r, cc]:.17g}\n")
                for j, vi in enumerate(blk.var_idx):
                    rows, cols = np.nonzero(blk.coefs[j])
                    for r, cc in zip(rows, cols):
                        f.write(f"{bidx} {r} {cc} {vi} {blk.coefs[j][r, cc]:.17g}\n")
            eb = len(self.blocks)
            for r in range(self.eq_A.shape[0]):
                if self.eq_b[r] != 0.0:
                    f.write(f"{eb} {r} 0 -1 {-self.eq_b[r]:.17g}\n")
                for i in np.nonzero(self.eq_A[r])[0]:
                    f.write(f"{eb} {r} 0 {i} {self.eq_A[r, i]:.17g}\n")


@dataclass
class IterateRecord:
    iteration: int
    pobj: float
    dobj: float
    gap: float
    pres: float
    dres: float
    tau: float
    kappa: float
    mu: float
    rtau_over_tau: float


@dataclass
class SdpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded" | "max_iter"
    x: np.ndarray
    objective: float
    eq_dual: np.ndarray
    block_duals: list
    pres: float
    dres: float
    gap: float
    iterations: int
    iterates: list = field(default_factory=list)
    message: str = ""


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    infeas_tol: float = 1e-4
    # accuracy at which a stalled solve is still reported optimal; loose on
    # purpose because every synthesis result is re-verified independently
    reduced_tol: float = 1e-3
    step_frac: float = 0.99
    dump_path: str = None


# ---------------------------------------------------------------------------
# symmetric vectorization helpers


class _SvecMap:
    _cache = {}

    def __new__(cls, n):
        if n in cls._cache:
            return cls._cache[n]
        obj = super().__new__(cls)
        obj.n = n
        obj.rows, obj.cols = np.triu_indices(n)
        obj.w = np.where(obj.rows == obj.cols, 1.0, np.sqrt(2.0))
        obj.dim = len(obj.rows)
        cls._cache[n] = obj
        return obj

    def svec(self, M):
        return M[self.rows, self.cols] * self.w

    def svec_batch(self, T):
        return T[:, self.rows, self.cols] * self.w

    def smat(self, v):
        M = np.zeros((self.n, self.n))
        off = v / self.w
        M[self.rows, self.cols] = off
        M[self.cols, self.rows] = off
        return M


def _conj(R1, M, R2):
    return R1 @ M @ R2


def _conj_batch(R1, T, R2):
    return np.matmul(np.matmul(R1, T), R2)


# ---------------------------------------------------------------------------
# cone machinery


class _Cone:
    """Static conic data for one PSD block plus per-iteration NT scaling."""

    def __init__(self, blk: LmiBlock):
        self.blk = blk
        self.sv = _SvecMap(blk.dim)
        self.h = self.sv.svec(0.5 * (blk.F0 + blk.F0.T))
        co = 0.5 * (blk.coefs + np.transpose(blk.coefs, (0, 2, 1)))
        self.T = co  # (k, n, n)
        self.Gmat = -self.sv.svec_batch(co).T  # (d, k)
        self.vi = blk.var_idx
        self.R = None
        self.Rinv = None
        self.lam = None  # (n,) eigenvalues of the scaled point

    @property
    def dim(self):
        return self.blk.dim

    @property
    def sdim(self):
        return self.sv.dim

    # --- exact linear maps -------------------------------------------------
    def Gx(self, x):
        if len(self.vi) == 0:
            return np.zeros(self.sdim)
        return self.Gmat @ x[self.vi]

    def add_GTz(self, out, z):
        if len(self.vi):
            out[self.vi] += self.Gmat.T @ z

    # --- NT scaling --------------------------------------------------------
    def update_scaling(self, s, z):
        S = self.sv.smat(s)
        Z = self.sv.smat(z)
        Ls = np.linalg.cholesky(S)
        Lz = np.linalg.cholesky(Z)
        U, sig, Vt = np.linalg.svd(Lz.T @ Ls)
        if sig.min() <= 0:
            raise np.linalg.LinAlgError("NT scaling breakdown")
        sig_isqrt = 1.0 / np.sqrt(sig)
        self.R = Ls @ Vt.T * sig_isqrt
        self.Rinv = (sig_isqrt[:, None] * U.T) @ Lz.T
        self.lam = sig
        # scaled coefficient rows: S = W^{-T} G for this block
        Tsc = _conj_batch(self.Rinv, self.T, self.Rinv.T)
        self.Ssc = -self.sv.svec_batch(Tsc).T  # (d, k)

    # scaled-space operators
    def W_z(self, z):
        return self.sv.svec(_conj(self.R.T, self.sv.smat(z), self.R))

    def Winv_T_s(self, s):
        return self.sv.svec(_conj(self.Rinv, self.sv.smat(s), self.Rinv.T))

    def WT_u(self, u):
        return self.sv.svec(_conj(self.R, self.sv.smat(u), self.R.T))

    def Winv_u(self, u):
        return self.sv.svec(_conj(self.Rinv.T, self.sv.smat(u), self.Rinv))

    def WtW(self, u):
        Q = self.R @ self.R.T
        return self.sv.svec(_conj(Q, self.sv.smat(u), Q))

    # symmetrized product of two scaled svec vectors
    def jprod(self, u, v):
        U = self.sv.smat(u)
        V = self.sv.smat(v)
        return self.sv.svec(0.5 * (U @ V + V @ U))

    def lam_solve(self, rhs_mat):
        denom = 0.5 * (self.lam[:, None] + self.lam[None, :])
        return self.sv.svec(rhs_mat / denom)

    def max_step(self, d_scaled):
        """Largest alpha with lambda + alpha*smat(d) >= 0 (scaled space)."""
        M = self.sv.smat(d_scaled)
        isq = 1.0 / np.sqrt(self.lam)
        Mn = isq[:, None] * M * isq[None, :]
        w = np.linalg.eigvalsh(Mn)
        wmin = w[0]
        if wmin >= 0:
            return np.inf
        return -1.0 / wmin


# ---------------------------------------------------------------------------
# main solver


def _reduce_equalities(A, b):
    """Drop linearly dependent equality rows; detect inconsistency.

    Returns the reduced system plus the map from reduced to original dual
    multipliers (y_orig = U_r @ y_reduced).
    """
    p = A.shape[0]
    if p == 0:
        return A, b, np.zeros((0, 0)), False
    U, sig, Vt = np.linalg.svd(A, full_matrices=True)
    tol = max(A.shape) * np.finfo(float).eps * (sig[0] if len(sig) else 0.0)
    r = int(np.sum(sig > tol))
    resid = U[:, r:].T @ b if r < p else np.zeros(0)
    inconsistent = np.linalg.norm(resid) > 1e-10 * (1.0 + np.linalg.norm(b))
    Ar = (sig[:r, None] * Vt[:r])
    br = U[:, :r].T @ b
    return Ar, br, U[:, :r], inconsistent


def solve_sdp(problem: SdpProblem, opts: SolverOptions = None) -> SdpSolution:
    """Solve an LMI-form SDP; see the module docstring for the algorithm."""
    opts = opts or SolverOptions()
    if opts.dump_path:
        problem.dump_triplets(opts.dump_path)

    n = problem.num_vars
    c = problem.c
    cones = [_Cone(blk) for blk in problem.blocks]
    A, b, Umap, inconsistent = _reduce_equalities(problem.eq_A, problem.eq_b)
    p = A.shape[0]
    if inconsistent:
        return SdpSolution(status="infeasible", x=np.zeros(n),
                           objective=np.nan, eq_dual=np.zeros(problem.eq_A.shape[0]),
                           block_duals=[None] * len(cones),
                           pres=np.inf, dres=np.inf, gap=np.inf, iterations=0,
                           message="inconsistent equality constraints")

    h = np.concatenate([co.h for co in cones]) if cones else np.zeros(0)
    offs = np.cumsum([0] + [co.sdim for co in cones])
    kdim = offs[-1]
    m1 = sum(co.dim for co in cones) + 1

    def split(v):
        return [v[offs[i]:offs[i + 1]] for i in range(len(cones))]

    def G_of(x):
        return np.concatenate([co.Gx(x) for co in cones]) if cones else np.zeros(0)

    def GT_of(z):
        out = np.zeros(n)
        for co, zb in zip(cones, split(z)):
            co.add_GTz(out, zb)
        return out

    # start at the identity in every cone
    x = np.zeros(n)
    y = np.zeros(p)
    s = np.concatenate([co.sv.svec(np.eye(co.dim)) for co in cones]) if cones else np.zeros(0)
    z = s.copy()
    tau, kappa = 1.0, 1.0

    norm_b = 1.0 + np.linalg.norm(b)
    norm_h = 1.0 + np.linalg.norm(h)
    norm_c = 1.0 + np.linalg.norm(c)

    iterates = []
    status, message = "max_iter", "iteration limit reached"
    pres = dres = gap = np.inf
    it = 0
    # best-so-far snapshot: near-degenerate problems can reach the optimum
    # and then drift as the scaled KKT system turns singular, so the final
    # answer is taken from the cleanest iterate, not the last one
    best_score = np.inf
    best = None

    for it in range(opts.max_iter):
        finite = all(np.all(np.isfinite(v)) for v in (x, y, z, s)) and \
            np.isfinite(tau) and np.isfinite(kappa) and tau > 0 and kappa >= 0
        if not finite:
            status, message = "max_iter", "numerical breakdown (non-finite iterate)"
            break
        rx = (A.T @ y if p else 0.0) + GT_of(z) + c * tau
        ry = A @ x - b * tau
        rz = G_of(x) + s - h * tau
        rtau = float(c @ x + b @ y + h @ z + kappa)
        mu = (float(s @ z) + tau * kappa) / m1

        xh = x / tau
        sh = s / tau
        yh = y / tau
        zh = z / tau
        pres = max(np.linalg.norm(A @ xh - b) / norm_b if p else 0.0,
                   np.linalg.norm(G_of(xh) + sh - h) / norm_h)
        dres = np.linalg.norm((A.T @ yh if p else 0.0) + GT_of(zh) + c) / norm_c
        pobj = float(c @ xh)
        dobj = float(-(h @ zh) - (b @ yh))
        gap = float(sh @ zh)
        iterates.append(IterateRecord(
            iteration=it, pobj=pobj, dobj=dobj, gap=gap, pres=pres, dres=dres,
            tau=tau, kappa=kappa, mu=mu, rtau_over_tau=abs(rtau) / tau))

        score = max(pres, dres, gap / (1.0 + abs(pobj) + abs(dobj)))
        if score < best_score:
            best_score = score
            best = (x.copy(), y.copy(), z.copy(), s.copy(), tau, kappa,
                    pres, dres, gap)

        if pres <= opts.feas_tol and dres <= opts.feas_tol and \
                gap <= opts.gap_tol * (1.0 + abs(pobj) + abs(dobj)):
            status, message = "optimal", "converged"
            break

        # infeasibility certificates (raw, unnormalized iterates); only
        # probed once the homogenizing variable starts to collapse
        viol_p = -(h @ z + b @ y)
        if kappa > tau and viol_p > 0:
            ray_res = np.linalg.norm((A.T @ y if p else 0.0) + GT_of(z))
            if ray_res <= opts.infeas_tol * viol_p and viol_p >= opts.infeas_tol * max(1.0, np.linalg.norm(z)):
                status, message = "infeasible", "dual improving ray found"
                y = y / viol_p
                z = z / viol_p
                break
        viol_d = -float(c @ x)
        if kappa > tau and viol_d > 0:
            ray_res = max(np.linalg.norm(A @ x) if p else 0.0,
                          np.linalg.norm(G_of(x) + s))
            if ray_res <= opts.infeas_tol * viol_d and viol_d >= opts.infeas_tol * max(1.0, np.linalg.norm(x)):
                status, message = "unbounded", "primal improving ray found"
                x = x / viol_d
                s = s / viol_d
                break

        # homogenizing variable collapsed: classify by the better certificate
        if tau <= 1e-10 * max(1.0, kappa):
            res_p = np.linalg.norm((A.T @ y if p else 0.0) + GT_of(z)) / max(viol_p, 1e-300)
            res_d = max(np.linalg.norm(A @ x) if p else 0.0,
                        np.linalg.norm(G_of(x) + s)) / max(viol_d, 1e-300)
            if viol_p > 0 and res_p <= min(res_d, 1e-4):
                status, message = "infeasible", "dual improving ray found (tau collapse)"
                y, z = y / viol_p, z / viol_p
            elif viol_d > 0 and res_d <= 1e-4:
                status, message = "unbounded", "primal improving ray found (tau collapse)"
                x, s = x / viol_d, s / viol_d
            else:
                status, message = "max_iter", "tau collapse without certificate"
            break

        try:
            for co, sb, zb in zip(cones, split(s), split(z)):
                co.update_scaling(sb, zb)
        except np.linalg.LinAlgError:
            status, message = "max_iter", "NT scaling breakdown"
            break

        # assemble and factor the reduced KKT system
        H = np.zeros((n, n))
        for co in cones:
            if len(co.vi):
                H[np.ix_(co.vi, co.vi)] += co.Ssc.T @ co.Ssc
        delta = 1e-12 * (1.0 + (np.abs(np.diag(H)).max() if n else 0.0))
        KKT = np.zeros((n + p, n + p))
        KKT[:n, :n] = H + delta * np.eye(n)
        if p:
            KKT[:n, n:] = A.T
            KKT[n:, :n] = A
            KKT[n:, n:] = -delta * np.eye(p)
        try:
            lu = scipy.linalg.lu_factor(KKT)
        except (np.linalg.LinAlgError, ValueError):
            status, message = "max_iter", "KKT factorization failure"
            break

        def solve3(bx, by, bz):
            bz_t = np.concatenate([co.Winv_T_s(v) for co, v in zip(cones, split(bz))]) \
                if cones else np.zeros(0)
            rhs = np.concatenate([bx.copy(), by]) if p else bx.copy()
            top = rhs[:n]
            for co, v in zip(cones, split(bz_t)):
                if len(co.vi):
                    top[co.vi] += co.Ssc.T @ v
            sol = scipy.linalg.lu_solve(lu, rhs)
            for _ in range(2):  # refinement against the unregularized system
                ux, uy = sol[:n], sol[n:]
                r_top = rhs[:n] - H @ ux - (A.T @ uy if p else 0.0)
                r_bot = rhs[n:] - A @ ux if p else np.zeros(0)
                corr = scipy.linalg.lu_solve(lu, np.concatenate([r_top, r_bot]))
                sol = sol + corr
            ux, uy = sol[:n], sol[n:]
            uz_parts = []
            for co, v in zip(cones, split(bz_t)):
                w = (co.Ssc @ ux[co.vi] if len(co.vi) else np.zeros(co.sdim)) - v
                uz_parts.append(co.Winv_u(w))
            uz = np.concatenate(uz_parts) if cones else np.zeros(0)
            return ux, uy, uz

        dx1, dy1, dz1 = solve3(-c, b.copy(), h)

        def direction(eta_c, q, rkap):
            bx0 = -(1.0 - eta_c) * rx
            by0 = -(1.0 - eta_c) * ry
            wq = np.concatenate([co.WT_u(v) for co, v in zip(cones, split(q))]) \
                if cones else np.zeros(0)
            bz0 = -(1.0 - eta_c) * rz + wq
            dx0, dy0, dz0 = solve3(bx0, by0, bz0)
            denom = float(c @ dx1 + b @ dy1 + h @ dz1) - kappa / tau
            numer = -(1.0 - eta_c) * rtau - float(c @ dx0 + b @ dy0 + h @ dz0) - rkap / tau
            dtau = numer / denom
            dx = dx0 + dtau * dx1
            dy = dy0 + dtau * dy1
            dz = dz0 + dtau * dz1
            dz_sc = np.concatenate([co.W_z(v) for co, v in zip(cones, split(dz))]) \
                if cones else np.zeros(0)
            ds_sc = -q - dz_sc
            ds = np.concatenate([co.WT_u(v) for co, v in zip(cones, split(ds_sc))]) \
                if cones else np.zeros(0)
            dkap = (rkap - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkap, ds_sc, dz_sc

        def max_step(ds_sc, dz_sc, dtau, dkap):
            alpha = np.inf
            for co, us, uz in zip(cones, split(ds_sc), split(dz_sc)):
                alpha = min(alpha, co.max_step(us), co.max_step(uz))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkap < 0:
                alpha = min(alpha, -kappa / dkap)
            return alpha

        # predictor
        q_aff = np.concatenate([co.sv.svec(np.diag(co.lam)) for co in cones]) \
            if cones else np.zeros(0)
        aff = direction(0.0, q_aff, -tau * kappa)
        a_aff = min(1.0, max_step(aff[6], aff[7], aff[4], aff[5]))
        sigma = min(1.0, max(0.0, 1.0 - a_aff)) ** 3

        # corrector
        q_parts = []
        for co, us, uz in zip(cones, split(aff[6]), split(aff[7])):
            lam2 = np.diag(co.lam ** 2)
            corr = co.sv.smat(co.jprod(us, uz))
            q_parts.append(co.lam_solve(lam2 + corr - sigma * mu * np.eye(co.dim)))
        q_comb = np.concatenate(q_parts) if cones else np.zeros(0)
        rkap = sigma * mu - tau * kappa - aff[4] * aff[5]
        dx, dy, dz, ds, dtau, dkap, ds_sc, dz_sc = direction(sigma, q_comb, rkap)

        alpha = opts.step_frac * max_step(ds_sc, dz_sc, dtau, dkap)
        alpha = min(1.0, alpha)
        if not np.isfinite(alpha) or alpha <= 1e-10:
            status, message = "max_iter", "step size collapsed"
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkap

    if status == "max_iter" and best is not None:
        # fall back to the cleanest iterate; accept it outright when it is
        # within a modest factor of the requested tolerances
        x, y, z, s, tau, kappa, pres, dres, gap = best
        if best_score <= opts.reduced_tol:
            status = "optimal"
            message = f"converged at reduced accuracy ({message})"

    if status in ("infeasible", "unbounded"):
        x_out = x
        y_out = y
        duals = [co.sv.smat(zb) for co, zb in zip(cones, split(z))]
    else:
        sc = tau if (np.isfinite(tau) and tau > 1e-100) else 1.0
        x_out = x / sc
        y_out = y / sc
        duals = [co.sv.smat(zb) / sc for co, zb in zip(cones, split(z))]
    # map equality duals back to the original (unreduced) rows
    y_out = Umap @ y_out if p else np.zeros(problem.eq_A.shape[0])

    obj = float(c @ x_out) + problem.obj_const if status == "optimal" else np.nan
    return SdpSolution(status=status, x=x_out, objective=obj, eq_dual=y_out,
                       block_duals=duals, pres=pres, dres=dres, gap=gap,
                       iterations=it + 1, iterates=iterates, message=message)


# ---------------------------------------------------------------------------
# independent certificate check


@dataclass
class CertificateReport:
    eq_residual: float
    psd_min_eigs: list
    dual_residual: float
    dual_psd_min_eigs: list
    duality_gap: float
    flags: list

    @property
    def clean(self):
        return not self.flags


def check_certificate(problem: SdpProblem, solution: SdpSolution,
                      opts: SolverOptions = None) -> CertificateReport:
    """Recompute all optimality residuals from scratch.

    Nothing from the solver run is reused except the reported primal/dual
    values.  Any violation beyond 10x the solver tolerances is flagged.
    """
    opts = opts or SolverOptions()
    flags = []
    x = solution.x
    eq_res = 0.0
    if problem.eq_A.shape[0]:
        eq_res = float(np.linalg.norm(problem.eq_A @ x - problem.eq_b)
                       / (1.0 + np.linalg.norm(problem.eq_b)))
        if eq_res > 10 * opts.feas_tol:
            flags.append(f"equality residual {eq_res:.3e}")
    mins = []
    for j, blk in enumerate(problem.blocks):
        M = blk.evaluate(x)
        w = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
        mins.append(w)
        if w < -1e-8 * (1.0 + np.linalg.norm(M, 2)):
            flags.append(f"block {j} PSD violation: min eig {w:.3e}")
    # dual side
    dual_mins = []
    grad = problem.c.copy()
    dobj = 0.0
    for j, (blk, Z) in enumerate(zip(problem.blocks, solution.block_duals)):
        if Z is None:
            continue
        wz = float(np.linalg.eigvalsh(0.5 * (Z + Z.T))[0])
        dual_mins.append(wz)
        if wz < -1e-8 * (1.0 + np.linalg.norm(Z, 2)):
            flags.append(f"dual block {j} PSD violation: min eig {wz:.3e}")
        for k, vi in enumerate(blk.var_idx):
            grad[vi] -= float(np.sum(blk.coefs[k] * Z))
        dobj -= float(np.sum(blk.F0 * Z))
    if problem.eq_A.shape[0]:
        grad += problem.eq_A.T @ solution.eq_dual
        dobj -= float(problem.eq_b @ solution.eq_dual)
    dres = float(np.linalg.norm(grad) / (1.0 + np.linalg.norm(problem.c)))
    if dres > 10 * opts.feas_tol:
        flags.append(f"dual residual {dres:.3e}")
    pobj = float(problem.c @ x)
    gap = pobj - dobj
    if abs(gap) > 10 * opts.gap_tol * (1.0 + abs(pobj) + abs(dobj)):
        flags.append(f"duality gap {gap:.3e}")
    return CertificateReport(eq_residual=eq_res, psd_min_eigs=mins,
                             dual_residual=dres, dual_psd_min_eigs=dual_mins,
                             duality_gap=gap, flags=flags)
