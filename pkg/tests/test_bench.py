import numpy as np
import pytest

from sparsact import analysis, bench
from sparsact.errors import NonHurwitzError
from sparsact.model import StateFeedbackGain, validate_plant
from sparsact.statefb import SfSynthesisSpec


class TestPlantCatalog:
    def test_scalar_oracle(self):
        p = bench.make_plant(bench.ScalarOracle())
        assert (p.nx, p.nu, p.nw, p.ny, p.nz) == (1, 1, 1, 1, 1)
        assert p.A[0, 0] == 1.0

    def test_mass_spring_chain_dims(self):
        p = bench.make_plant(bench.MassSpringChain(3))
        assert (p.nx, p.nu, p.nw, p.ny, p.nz) == (6, 3, 3, 6, 6)
        assert validate_plant(p) == []
        # undamped-ish oscillator: marginally stable open loop, poles near jw axis
        assert np.max(np.linalg.eigvals(p.A).real) < 0

    def test_chain_needs_a_mass(self):
        with pytest.raises(ValueError):
            bench.MassSpringChain(0).build()

    def test_tensegrity_dims_and_names(self):
        p = bench.make_plant(bench.TensegrityApprox())
        assert (p.nx, p.nu, p.nw, p.ny, p.nz) == (12, 9, 6, 12, 15)
        assert validate_plant(p) == []
        assert p.actuator_names[0] == "cable1" and p.actuator_names[-1] == "cable9"
        assert p.sensor_names[0] == "angle1" and p.sensor_names[-1] == "rate6"

    def test_tensegrity_open_loop_stable(self):
        p = bench.make_plant(bench.TensegrityApprox())
        assert analysis.is_hurwitz(p.A)

    def test_tensegrity_cable_geometry(self):
        fam = bench.TensegrityApprox()
        lengths = fam.cable_lengths(fam.trim_angles)
        assert lengths.shape == (9,)
        assert np.all(lengths > 0)


class TestSimulator:
    def test_first_order_step_matches_closed_form(self):
        # A + Bu K = -1, so x' = -x + w; step w = 1 gives x(t) = 1 - exp(-t)
        p = bench.make_plant(bench.ScalarOracle())
        res = bench.simulate_closed_loop(
            p, StateFeedbackGain([[-2.0]]), {"kind": "step"},
            horizon=5.0, dt=1e-3)
        expect = 1.0 - np.exp(-res.time)
        assert res.states[:, 0] == pytest.approx(expect, abs=1e-6)

    def test_controls_recorded_with_peaks(self):
        p = bench.make_plant(bench.ScalarOracle())
        res = bench.simulate_closed_loop(
            p, StateFeedbackGain([[-2.0]]), {"kind": "step"}, horizon=5.0)
        assert res.controls.shape == (len(res.time), 1)
        assert res.peaks[0] == pytest.approx(np.abs(res.controls[:, 0]).max())

    def test_unit_norm_disturbances(self):
        p = bench.make_plant(bench.MassSpringChain(2))
        for kind in ("step", "sinusoid", "noise"):
            res = bench.simulate_closed_loop(
                p, StateFeedbackGain(np.zeros((2, 4))), {"kind": kind},
                horizon=0.01, dt=1e-3, seed=3)
            fn = bench._disturbance_fn(res.disturbance, p.nw,
                                       np.random.default_rng(3))
            for t in (0.0, 0.3, 1.7):
                assert np.linalg.norm(fn(t)) == pytest.approx(1.0, abs=1e-9)

    def test_noise_deterministic_per_seed(self):
        p = bench.make_plant(bench.ScalarOracle())
        a = bench.simulate_closed_loop(p, StateFeedbackGain([[-2.0]]),
                                       {"kind": "noise"}, horizon=1.0, seed=7)
        b = bench.simulate_closed_loop(p, StateFeedbackGain([[-2.0]]),
                                       {"kind": "noise"}, horizon=1.0, seed=7)
        assert a.states == pytest.approx(b.states)

    def test_unstable_loop_rejected(self):
        p = bench.make_plant(bench.ScalarOracle())
        with pytest.raises(NonHurwitzError):
            bench.simulate_closed_loop(p, StateFeedbackGain([[0.5]]))

    def test_destabilizing_nonlinearity_caught(self):
        p = bench.make_plant(bench.ScalarOracle())
        with pytest.raises(NonHurwitzError):
            bench.simulate_closed_loop(
                p, StateFeedbackGain([[-2.0]]), {"kind": "step"},
                horizon=10.0, dt=1e-2,
                nonlinear_extra=lambda x: 10.0 * x ** 3)

    def test_cubic_stiffening_changes_trajectory(self):
        fam = bench.TensegrityApprox()
        p = bench.make_plant(fam)
        K = np.zeros((9, 12))
        x0 = np.zeros(12)
        x0[:6] = 0.2
        lin = bench.simulate_closed_loop(p, StateFeedbackGain(K), {"kind": "zero"},
                                         horizon=1.0, dt=1e-3, x0=x0)
        non = bench.simulate_closed_loop(p, StateFeedbackGain(K), {"kind": "zero"},
                                         horizon=1.0, dt=1e-3, x0=x0,
                                         nonlinear_extra=fam.cubic_stiffening())
        assert np.linalg.norm(lin.states - non.states) > 1e-6


class TestGammaSweep:
    def test_rows_record_feasible_and_infeasible(self):
        # direct disturbance feedthrough Dw = 1 puts a hard floor of 1 on the
        # achievable closed-loop gain, so gamma0 = 0.5 must come back infeasible
        from sparsact.model import GeneralizedPlant
        p = GeneralizedPlant(A=[[1.0]], Bu=[[1.0, 1.0]], Bw=[[1.0]],
                             Cz=[[1.0]], Du=[[0.0, 0.0]], Dw=[[1.0]],
                             Cy=[[1.0]], Dyw=[[0.0]])

        def spec_for(g0):
            return SfSynthesisSpec(plant=p, performance_kind="hinf", gamma0=g0)

        rows = bench.gamma_sweep(spec_for, [0.5, 3.0])
        assert [r["status"] for r in rows] == ["infeasible", "ok"]
        ok = rows[1]
        assert len(ok["kept_actuators"]) == 1
        assert ok["verified_norm"] < 3.0 * (1 + 1e-5)
        assert ok["iterations"] >= 1

    def test_csv_render(self, dup_actuator_plant):
        def spec_for(g0):
            return SfSynthesisSpec(plant=dup_actuator_plant,
                                   performance_kind="hinf", gamma0=g0)

        rows = bench.gamma_sweep(spec_for, [3.0])
        text = bench.sweep_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0].startswith("gamma0,status")
        assert len(lines) == 2 and ",ok," in lines[1]

    def test_empty_sweep_rejected(self, dup_actuator_plant):
        with pytest.raises(ValueError):
            bench.gamma_sweep(lambda g: None, [])
