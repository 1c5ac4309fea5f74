import dataclasses

import numpy as np
import pytest

from ajtwin.errors import RejectedInputError
from ajtwin.params import NoiseSpec
from ajtwin.profiles import cfd_profile_metrics, extract_grayscale_metrics, \
    material_flow
from ajtwin.simulator import (FaultSpec, Scenario, load_scenario,
                              parse_scenario, probe_latent, render_grayscale,
                              save_scenario, shipped_scenario, simulate,
                              synth_profile)
from ajtwin.types import InputVector, StateVector, ThetaParams
from ajtwin.units import from_si, to_si

from conftest import fixed_point_params


def _u(ia=370.0, qc=25.0, qs=50.0):
    return InputVector(to_si(ia, "mA"), to_si(qc, "sccm"), to_si(qs, "sccm"))


def _scenario(**kw):
    base = dict(duration=50.0, dt=1.0, seed=3,
                init=StateVector(3e-6, 1e-6, 0.0, 0.0, 5e-7),
                theta_true=ThetaParams.zero(),
                schedule=((0.0, _u()),))
    base.update(kw)
    return Scenario(**base)


class TestSimulate:
    def test_fixed_point_constant_trace(self, params):
        p = fixed_point_params(params)
        p = dataclasses.replace(p, noise=NoiseSpec(sigma_xi=(0.0,) * 5,
                                                   sigma_w=(0.0,) * 5))
        sc = _scenario(init=StateVector(3e-6, 1e-6, 0.0, 0.0, 0.0))
        trace = simulate(sc, p)
        np.testing.assert_array_equal(trace.xs, np.tile(trace.xs[0], (50, 1)))
        np.testing.assert_array_equal(trace.ys_noisy,
                                      np.tile(trace.ys_noisy[0], (50, 1)))

    def test_same_seed_identical(self, params):
        sc = _scenario()
        a = simulate(sc, params)
        b = simulate(sc, params)
        assert np.array_equal(a.xs, b.xs)
        assert np.array_equal(a.ys_noisy, b.ys_noisy)

    def test_different_seed_differs(self, params):
        a = simulate(_scenario(seed=1), params)
        b = simulate(_scenario(seed=2), params)
        assert not np.array_equal(a.ys_noisy, b.ys_noisy)

    def test_measurement_noise_calibrated(self, params):
        # residuals between noisy and clean outputs reproduce sigma_w
        sc = _scenario(duration=10000.0)
        trace = simulate(sc, params)
        resid = trace.ys_noisy - trace.ys_clean
        stds = resid.std(axis=0)
        np.testing.assert_allclose(stds, params.noise.sigma_w, rtol=0.10)

    def test_exp1_outputs_drift_under_theta(self, params):
        sc = shipped_scenario("exp1")
        trace = simulate(sc, params)
        inputs_steps = np.unique(trace.us, axis=0)
        assert len(inputs_steps) == 1  # constant inputs
        early = trace.ys_clean[:300, 0].mean()
        late = trace.ys_clean[-300:, 0].mean()
        assert abs(late - early) > 5 * trace.ys_clean[:300, 0].std()

    def test_scheduled_steps_applied(self, params):
        sc = _scenario(duration=20.0,
                       schedule=((0.0, _u(qc=25.0)), (10.0, _u(qc=28.0))))
        trace = simulate(sc, params)
        assert trace.us[9, 1] == pytest.approx(to_si(25, "sccm"))
        assert trace.us[10, 1] == pytest.approx(to_si(28, "sccm"))

    def test_zero_duration_empty_trace(self, params):
        trace = simulate(_scenario(duration=0.0), params)
        assert len(trace.t) == 0

    def test_terminal_clog_event(self, params):
        sc = _scenario(duration=200.0,
                       faults=(FaultSpec("nozzle-clog-acceleration", 5.0,
                                         5e-7),))
        trace = simulate(sc, params)
        assert trace.terminated
        assert len(trace.t) < 200
        assert any(kind == "terminal-clog" for _, kind, _ in trace.events)

    def test_atomizer_dropout_reduces_aerosol(self, params):
        healthy = simulate(_scenario(duration=400.0), params)
        dropped = simulate(_scenario(
            duration=400.0,
            faults=(FaultSpec("atomizer-dropout", 100.0, 1.0),)), params)
        assert dropped.xs[-1, 4] < 0.5 * healthy.xs[-1, 4]


class TestFaultIsolation:
    def test_mfc_drift_touches_only_carrier_pressure(self, params):
        base = _scenario(duration=120.0)
        faulty = _scenario(duration=120.0,
                           faults=(FaultSpec("mfc-pressure-drift", 60.0,
                                             50.0),))
        a = simulate(base, params)
        b = simulate(faulty, params)
        # identical noise streams: every non-P_c column is bitwise equal
        cols = [0, 1, 3, 4]
        assert np.array_equal(a.ys_noisy[:, cols], b.ys_noisy[:, cols])
        assert np.array_equal(a.xs, b.xs)
        after = b.t >= 60.0
        assert np.array_equal(a.ys_noisy[~after, 2], b.ys_noisy[~after, 2])
        assert np.all(b.ys_noisy[after, 2] - a.ys_noisy[after, 2]
                      == pytest.approx(50.0 * (b.t[after] - 60.0)))


class TestProbe:
    def test_probe_initial_state(self, params):
        sc = _scenario()
        trace = simulate(sc, params)
        state, same = probe_latent(trace, 0.0)
        assert state == sc.init
        assert same is trace

    def test_probe_without_disturbance_pure(self, params):
        trace = simulate(_scenario(), params)
        before = trace.ys_noisy.copy()
        probe_latent(trace, 20.0)
        np.testing.assert_array_equal(trace.ys_noisy, before)

    def test_probe_disturbance_steps_outputs(self, params):
        trace = simulate(_scenario(), params)
        state, disturbed = probe_latent(trace, 20.0,
                                        disturbance=(2e-6, 3e-6))
        np.testing.assert_array_equal(disturbed.ys_noisy[:20],
                                      trace.ys_noisy[:20])
        np.testing.assert_allclose(disturbed.ys_noisy[20:, 0],
                                   trace.ys_noisy[20:, 0] + 2e-6)
        np.testing.assert_allclose(disturbed.ys_noisy[20:, 1],
                                   trace.ys_noisy[20:, 1] + 3e-6)
        assert any(kind == "probe-disturbance"
                   for _, kind, _ in disturbed.events)

    def test_probe_out_of_range(self, params):
        trace = simulate(_scenario(), params)
        with pytest.raises(RejectedInputError):
            probe_latent(trace, 1e6)


class TestSynthProfile:
    def test_round_trip_height_metrics(self):
        y = np.array([40e-6, 70e-6, 0.0, 0.0, to_si(1e-5, "sccm")])
        cs = synth_profile(y, 0.16e-6, 2e-3)
        m = cfd_profile_metrics(cs)
        assert m.L_w == pytest.approx(40e-6, rel=0.02)
        assert m.L_o == pytest.approx(70e-6, rel=0.02)

    def test_integral_matches_material_flow(self):
        q_m = to_si(8e-6, "sccm")
        y = np.array([40e-6, 70e-6, 0.0, 0.0, q_m])
        cs = synth_profile(y, 0.16e-6, 2e-3)
        assert material_flow(cs, 2e-3) == pytest.approx(q_m, rel=0.005)

    def test_zero_linewidth_rejected(self):
        with pytest.raises(RejectedInputError):
            synth_profile(np.array([0.0, 1e-6, 0, 0, 1e-14]), 0.2e-6, 2e-3)

    def test_overspray_below_linewidth_rejected(self):
        with pytest.raises(RejectedInputError):
            synth_profile(np.array([40e-6, 30e-6, 0, 0, 1e-14]), 0.2e-6, 2e-3)


class TestRenderGrayscale:
    def test_flat_profile_uniform_background(self):
        from ajtwin.profiles import CrossSection
        r = 0.5e-6 * np.arange(64)
        cs = CrossSection(positions=r, values=np.full(64, 1e-6), kind="height")
        g = render_grayscale(cs, background=200.0)
        np.testing.assert_array_equal(g.values, np.full(64, 200.0))

    def test_symmetric_profile_symmetric_render(self):
        y = np.array([40e-6, 70e-6, 0.0, 0.0, to_si(1e-5, "sccm")])
        cs = synth_profile(y, 0.2e-6, 2e-3)
        g = render_grayscale(cs)
        np.testing.assert_allclose(g.values, g.values[::-1], atol=1e-9)

    def test_render_extract_round_trip(self):
        y = np.array([40e-6, 70e-6, 0.0, 0.0, to_si(1e-5, "sccm")])
        cs = synth_profile(y, 0.16e-6, 2e-3)
        m = extract_grayscale_metrics(render_grayscale(cs), background=200.0)
        assert m.found
        assert m.L_w == pytest.approx(40e-6, rel=0.05)
        assert m.L_o == pytest.approx(70e-6, rel=0.10)


class TestScenarioFiles:
    def test_round_trip(self, tmp_path, params):
        sc = _scenario(faults=(FaultSpec("mfc-pressure-drift", 10.0, 5.0),),
                       noise_overrides={"noise.sigma_da": 0.02},
                       label="round")
        path = tmp_path / "sc.cfg"
        save_scenario(sc, path)
        again = load_scenario(path)
        assert again == sc

    def test_bad_keys_rejected(self):
        with pytest.raises(RejectedInputError):
            parse_scenario("duration = 10\nbogus = 1\n"
                           "init.d_a_median = 3 um\ninit.V_l = 1 mL\n"
                           "init.phi_A = 1e-7\ninput0.t = 0\n"
                           "input0.I_A = 370 mA\ninput0.Q_c = 25 sccm\n"
                           "input0.Q_s = 50 sccm\n")

    def test_schedule_must_start_at_zero(self):
        with pytest.raises(RejectedInputError):
            _scenario(schedule=((5.0, _u()),))

    def test_shipped_experiment_schedules(self):
        # experiment 2: carrier 20 -> 23 sccm and atomizer 330 -> 375 mA
        exp2 = shipped_scenario("exp2")
        qc = [from_si(u.Q_c, "sccm") for _, u in exp2.schedule]
        ia = [from_si(u.I_A, "mA") for _, u in exp2.schedule]
        assert qc[0] == 20.0 and qc[-1] == 23.0
        assert ia[0] == 330.0 and 375.0 in ia
        # experiment 3: carrier 24 -> 26 sccm at 37.6 min, sheath
        # 51 -> 48 sccm at 68.5 min
        exp3 = shipped_scenario("exp3")
        times = [t for t, _ in exp3.schedule]
        assert times[1] == pytest.approx(37.6 * 60.0)
        assert times[2] == pytest.approx(68.5 * 60.0)
        qc3 = [from_si(u.Q_c, "sccm") for _, u in exp3.schedule]
        qs3 = [from_si(u.Q_s, "sccm") for _, u in exp3.schedule]
        assert qc3 == [24.0, 26.0, 26.0]
        assert qs3 == [51.0, 51.0, 48.0]
        # experiment 1: constant nominal inputs
        exp1 = shipped_scenario("exp1")
        assert len(exp1.schedule) == 1
        u0 = exp1.schedule[0][1]
        assert from_si(u0.Q_c, "sccm") == 23.0
        assert from_si(u0.Q_s, "sccm") == 50.0
        assert from_si(u0.I_A, "mA") == 375.0
