import json

import numpy as np
import pytest

from sparsact import lmi
from sparsact.errors import (
    DimensionError,
    NonzeroFeedthroughError,
)
from sparsact.joint import (
    JointSpec,
    _arrow_block,
    group_norms,
    synth_joint,
    verify_sparsity_preservation,
)
from sparsact.model import close_output_feedback
from sparsact.outputfb import HatController
from sparsact.sdp import solve_sdp

from conftest import coupled_lyapunov_pair, random_plant


class TestArrowEpigraph:
    def test_minimizing_t_recovers_vector_norm(self):
        v = np.array([[3.0], [4.0]])
        t = lmi.MatVar("t", (1, 1), "scalar")
        cons = [_arrow_block(t.as_expr(), lmi.const(v))]
        prob, vm = lmi.compile_lmis([t], cons, objective=t.as_expr())
        sol = solve_sdp(prob)
        assert sol.status == "optimal"
        assert vm.value(sol.x, t)[0, 0] == pytest.approx(5.0, rel=1e-6)


class TestScalarJoint:
    def test_verified_and_feasible(self, scalar_plant):
        res = synth_joint(JointSpec(plant=scalar_plant, performance_kind="h2",
                                    gamma0=2.0))
        assert res.verified_closed_loop.value < 2.0 * (1 + 1e-5)
        cl = close_output_feedback(scalar_plant, res.controller)
        assert np.max(np.linalg.eigvals(cl.Acl).real) < 0

    def test_hinf_kind(self, scalar_plant):
        res = synth_joint(JointSpec(plant=scalar_plant, performance_kind="hinf",
                                    gamma0=2.0))
        assert res.verified_closed_loop.kind == "Hinf"
        assert res.verified_closed_loop.value < 2.0 * (1 + 1e-5)

    def test_to_dict_serializable(self, scalar_plant):
        res = synth_joint(JointSpec(plant=scalar_plant, performance_kind="h2",
                                    gamma0=2.0))
        json.dumps(res.to_dict())


class TestDuplicatedSensors:
    def test_penalized_duplicate_column_collapses(self, dup_sensor_plant):
        # two identical measurements: pressure on the second column should
        # drive it to (near) zero without losing performance; gamma0 is set
        # below the open-loop norm so a nontrivial controller is required
        res = synth_joint(JointSpec(plant=dup_sensor_plant,
                                    performance_kind="h2", gamma0=0.5,
                                    nu=[1.0, 50.0], mu=[0.0]))
        assert res.verified_closed_loop.value < 0.5 * (1 + 1e-5)
        cols = res.report.col_norms
        assert cols[1] <= 1e-3 * max(cols[0], 1e-30)

    def test_group_norms_report(self, dup_sensor_plant):
        res = synth_joint(JointSpec(plant=dup_sensor_plant,
                                    performance_kind="h2", gamma0=0.5,
                                    nu=[1.0, 50.0], mu=[0.0]))
        rep = group_norms(res.hat)
        assert rep.row_norms.shape == (dup_sensor_plant.nu,)
        assert rep.col_norms.shape == (dup_sensor_plant.ny,)
        assert 1 not in rep.active_sensors


class TestSparsityPreservation:
    def test_forced_zero_groups_survive_reconstruction(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            nx, nu, ny = 3, 3, 3
            plant = random_plant(rng, nx=nx, nu=nu, ny=ny)
            X, Y = coupled_lyapunov_pair(rng, nx)
            CKh = rng.standard_normal((nu, nx))
            BKh = rng.standard_normal((nx, ny))
            DKh = rng.standard_normal((nu, ny))
            # zero out one actuator row and one sensor column in hat space
            i, j = trial % nu, (trial + 1) % ny
            CKh[i, :] = 0.0
            DKh[i, :] = 0.0
            BKh[:, j] = 0.0
            DKh[:, j] = 0.0
            hat = HatController(AKhat=rng.standard_normal((nx, nx)),
                                BKhat=BKh, CKhat=CKh, DKhat=DKh, X=X, Y=Y)
            assert verify_sparsity_preservation(hat, plant) == []

    def test_reports_nonpreserving_transform(self):
        # a dense hat controller has no zero groups, so nothing to report
        rng = np.random.default_rng(12)
        plant = random_plant(rng, nx=2, nu=1, ny=1)
        X, Y = coupled_lyapunov_pair(rng, 2)
        hat = HatController(AKhat=rng.standard_normal((2, 2)),
                            BKhat=rng.standard_normal((2, 1)),
                            CKhat=rng.standard_normal((1, 2)),
                            DKhat=rng.standard_normal((1, 1)), X=X, Y=Y)
        assert verify_sparsity_preservation(hat, plant) == []


class TestSpecValidation:
    def test_h2_rejects_feedthrough(self, scalar_plant):
        from sparsact.model import GeneralizedPlant
        p = GeneralizedPlant(A=[[1.0]], Bu=[[1.0]], Bw=[[1.0]], Cz=[[1.0]],
                             Du=[[0.0]], Dw=[[1.0]], Cy=[[1.0]], Dyw=[[0.0]])
        with pytest.raises(NonzeroFeedthroughError):
            JointSpec(plant=p, performance_kind="h2", gamma0=2.0)

    def test_bad_weight_lengths(self, scalar_plant):
        with pytest.raises(DimensionError):
            JointSpec(plant=scalar_plant, gamma0=1.0, mu=[1.0, 1.0])

    def test_all_zero_weights_rejected(self, scalar_plant):
        with pytest.raises(ValueError):
            JointSpec(plant=scalar_plant, gamma0=1.0, mu=[0.0], nu=[0.0])

    def test_negative_weights_rejected(self, scalar_plant):
        with pytest.raises(ValueError):
            JointSpec(plant=scalar_plant, gamma0=1.0, mu=[-1.0])

    def test_bad_kind(self, scalar_plant):
        with pytest.raises(ValueError):
            JointSpec(plant=scalar_plant, performance_kind="lqr", gamma0=1.0)
