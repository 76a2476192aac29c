import numpy as np
import pytest

from sparsact import lmi
from sparsact.errors import ModelingError
from sparsact.sdp import solve_sdp


def rand_assignment(rng, *variables):
    out = {}
    for v in variables:
        M = rng.standard_normal(v.shape)
        if v.structure == "symmetric":
            M = 0.5 * (M + M.T)
        elif v.structure == "diagonal":
            M = np.diag(np.diag(M))
        out[v] = M
    return out


class TestExprAlgebra:
    def test_affine_term_evaluation(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((3, 3))
        X = lmi.MatVar("X", (3, 3), "symmetric")
        W = lmi.MatVar("W", (2, 3))
        expr = A @ X + X @ A.T + lmi.const(np.eye(3)) + 0.0 * (W.T @ np.ones((2, 3)))
        vals = rand_assignment(rng, X, W)
        got = lmi.evaluate(expr, vals)
        assert got == pytest.approx(A @ vals[X] + vals[X] @ A.T + np.eye(3))

    def test_transpose_and_scaling(self):
        rng = np.random.default_rng(1)
        W = lmi.MatVar("W", (2, 3))
        L = rng.standard_normal((4, 2))
        expr = 2.0 * (L @ W).T - lmi.const(np.ones((3, 4)))
        vals = rand_assignment(rng, W)
        assert lmi.evaluate(expr, vals) == pytest.approx(
            2.0 * (L @ vals[W]).T - np.ones((3, 4)))

    def test_row_col_selectors(self):
        rng = np.random.default_rng(2)
        W = lmi.MatVar("W", (3, 4))
        vals = rand_assignment(rng, W)
        assert lmi.evaluate(W.row(1), vals) == pytest.approx(vals[W][1:2, :])
        assert lmi.evaluate(W.col(2), vals) == pytest.approx(vals[W][:, 2:3])

    def test_sym_operator(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((3, 3))
        X = lmi.MatVar("X", (3, 3), "symmetric")
        vals = rand_assignment(rng, X)
        M = A @ vals[X]
        assert lmi.evaluate(lmi.sym(A @ X), vals) == pytest.approx(M + M.T)

    def test_trace_operator(self):
        rng = np.random.default_rng(4)
        Z = lmi.MatVar("Z", (3, 3), "symmetric")
        vals = rand_assignment(rng, Z)
        got = lmi.evaluate(lmi.trace(Z), vals)
        assert got.shape == (1, 1)
        assert got[0, 0] == pytest.approx(np.trace(vals[Z]))

    def test_scalar_mult(self):
        rng = np.random.default_rng(5)
        t = lmi.MatVar("t", (1, 1), "scalar")
        M = rng.standard_normal((3, 3))
        vals = rand_assignment(rng, t)
        assert lmi.evaluate(lmi.scalar_mult(t.as_expr(), M), vals) == pytest.approx(
            vals[t][0, 0] * M)

    def test_bilinear_product_rejected(self):
        X = lmi.MatVar("X", (2, 2), "symmetric")
        W = lmi.MatVar("W", (2, 2))
        with pytest.raises(ModelingError):
            _ = X @ W

    def test_shape_mismatch_rejected(self):
        X = lmi.MatVar("X", (2, 2), "symmetric")
        with pytest.raises((ModelingError, ValueError)):
            _ = X + lmi.const(np.eye(3))


class TestBmat:
    def test_mirror_fill(self):
        rng = np.random.default_rng(6)
        X = lmi.MatVar("X", (2, 2), "symmetric")
        W = lmi.MatVar("W", (1, 2))
        vals = rand_assignment(rng, X, W)
        B = lmi.bmat([
            [-1.0 * X, W.T],
            [None, lmi.const(-np.eye(1))],
        ])
        got = lmi.evaluate(B, vals)
        expect = np.block([
            [-vals[X], vals[W].T],
            [vals[W], -np.eye(1)],
        ])
        assert got == pytest.approx(expect)

    def test_full_grid(self):
        rng = np.random.default_rng(7)
        W = lmi.MatVar("W", (2, 2))
        vals = rand_assignment(rng, W)
        B = lmi.bmat([[W, lmi.const(np.eye(2))], [lmi.const(2 * np.eye(2)), W.T]])
        assert lmi.evaluate(B, vals) == pytest.approx(np.block(
            [[vals[W], np.eye(2)], [2 * np.eye(2), vals[W].T]]))


class TestCompileAndSolve:
    def test_lyapunov_feasibility(self):
        A = np.array([[-1.0, 2.0], [0.0, -3.0]])
        X = lmi.MatVar("X", (2, 2), "symmetric")
        cons = [lmi.pos_def(X), lmi.neg_def(lmi.sym(A @ X)),
                lmi.neg_semidef(lmi.trace(X) - 10.0 * np.eye(1))]
        prob, vm = lmi.compile_lmis([X], cons, objective=-1.0 * lmi.trace(X))
        sol = solve_sdp(prob)
        assert sol.status == "optimal"
        Xv = vm.value(sol.x, X)
        assert np.linalg.eigvalsh(Xv)[0] > 0
        S = A @ Xv + Xv @ A.T
        assert np.linalg.eigvalsh(0.5 * (S + S.T))[-1] < 0
        assert np.trace(Xv) == pytest.approx(10.0, rel=1e-5)

    def test_strict_margin_enforced(self):
        # minimizing a strictly positive scalar leaves the shifted margin
        t = lmi.MatVar("t", (1, 1), "scalar")
        prob, vm = lmi.compile_lmis([t], [lmi.pos_def(t)], objective=t.as_expr())
        sol = solve_sdp(prob)
        assert sol.status == "optimal"
        assert vm.value(sol.x, t)[0, 0] > 0

    def test_equality_constraint(self):
        W = lmi.MatVar("W", (1, 2))
        target = np.array([[1.0, -2.0]])
        cons = [lmi.equal_zero(W - lmi.const(target)),
                lmi.pos_semidef(lmi.const(np.eye(1)))]
        prob, vm = lmi.compile_lmis([W], cons)
        sol = solve_sdp(prob)
        assert vm.value(sol.x, W) == pytest.approx(target, abs=1e-7)

    def test_nonsymmetric_inequality_rejected(self):
        W = lmi.MatVar("W", (2, 2))
        with pytest.raises(ModelingError):
            lmi.compile_lmis([W], [lmi.neg_def(W)])

    def test_objective_must_be_scalar(self):
        X = lmi.MatVar("X", (2, 2), "symmetric")
        with pytest.raises(ModelingError):
            lmi.compile_lmis([X], [lmi.pos_def(X)], objective=X.as_expr())

    def test_diagonal_structure(self):
        G = lmi.MatVar("G", (2, 2), "diagonal")
        assert G.num_scalars == 2
        cons = [lmi.equal_zero(G - lmi.const(np.diag([2.0, 3.0]))),
                lmi.pos_semidef(lmi.const(np.eye(1)))]
        prob, vm = lmi.compile_lmis([G], cons)
        sol = solve_sdp(prob)
        assert vm.value(sol.x, G) == pytest.approx(np.diag([2.0, 3.0]), abs=1e-7)


class TestVarMap:
    def test_symmetric_round_trip(self):
        rng = np.random.default_rng(8)
        X = lmi.MatVar("X", (3, 3), "symmetric")
        prob, vm = lmi.compile_lmis([X], [lmi.pos_semidef(X)])
        M = rng.standard_normal((3, 3))
        M = M @ M.T
        x = np.zeros(prob.num_vars)
        # scatter entries through the variable's storage order and read back
        for idx, (i, j) in enumerate(X.entry_pairs()):
            x[vm.offsets[X] + idx] = M[i, j]
        assert vm.value(x, X) == pytest.approx(M)
