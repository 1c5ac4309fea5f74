import dataclasses
import math

import numpy as np
import pytest

from ajtwin import physics as ph
from ajtwin.errors import (BlockedTubeError, DegenerateHeadspaceError,
                           RejectedInputError, UndefinedTransportError)
from ajtwin.physics import DropletDistribution, QuadratureRule, lognormal_pdf
from ajtwin.types import InputVector, StateVector, ThetaParams
from ajtwin.units import to_si

from conftest import (fixed_point_params, random_valid_inputs,
                      random_valid_states)


# ---------------------------------------------------------------------------
# Droplet distribution
# ---------------------------------------------------------------------------

class TestDropletDistribution:
    def test_mode_is_lognormal_identity(self):
        dist = DropletDistribution.from_median(3e-6)
        mode = dist.mode()
        d = np.linspace(0.9 * mode, 1.1 * mode, 20001)
        p = lognormal_pdf(d, dist)
        assert d[np.argmax(p)] == pytest.approx(mode, rel=1e-4)

    def test_normalization(self, quad):
        for median in (0.5e-6, 1e-6, 3e-6, 5e-6):
            dist = DropletDistribution.from_median(median)
            mass = quad.integrate(lognormal_pdf(quad.d_nodes, dist))
            assert mass == pytest.approx(1.0, abs=1e-6)

    def test_median_halves_probability_mass(self, params):
        # numeric CDF: dedicated quadrature from the lower diameter bound up
        # to the median must carry half the probability
        median = 3e-6
        dist = DropletDistribution.from_median(median)
        spec = dataclasses.replace(params.quadrature, d_hi=median)
        half = QuadratureRule(spec)
        mass = half.integrate(lognormal_pdf(half.d_nodes, dist))
        assert mass == pytest.approx(0.5, abs=1e-6)

    def test_std_is_quarter_of_median(self, quad):
        median = 3e-6
        dist = DropletDistribution.from_median(median)
        p = lognormal_pdf(quad.d_nodes, dist)
        mean = quad.integrate(quad.d_nodes * p)
        var = quad.integrate((quad.d_nodes - mean) ** 2 * p)
        assert math.sqrt(var) == pytest.approx(median / 4.0, rel=1e-6)

    def test_rejects_nonpositive_diameter(self):
        dist = DropletDistribution.from_median(3e-6)
        with pytest.raises(RejectedInputError):
            lognormal_pdf(0.0, dist)
        with pytest.raises(RejectedInputError):
            DropletDistribution.from_median(-1e-6)


class TestQuadrature:
    def test_weights_positive(self, quad):
        assert np.all(quad.d_weights > 0)

    def test_doubling_nodes_stable(self, params, nominal_state, nominal_input):
        q64 = QuadratureRule(params.quadrature)
        q128 = QuadratureRule(params.quadrature, n_nodes=128)
        x, u = nominal_state.as_array(), nominal_input.as_array()
        for rate in (ph.tube_deposition_rate, ph.nozzle_deposition_rate):
            a = float(rate(x, u, params, q64))
            b = float(rate(x, u, params, q128))
            assert a == pytest.approx(b, rel=1e-6)


# ---------------------------------------------------------------------------
# Survival probabilities
# ---------------------------------------------------------------------------

class TestGravitationalSurvival:
    def test_massless_droplet_survives(self, params):
        p = ph.survival_gravitational(1e-12, to_si(25, "sccm"), 0.0,
                                      params.geometry)
        assert p == pytest.approx(1.0, abs=1e-9)

    def test_full_settling_at_alpha_one(self, params):
        # a huge droplet pushes alpha past 1 -> zero survival
        p = ph.survival_gravitational(5e-3, to_si(15, "sccm"), 0.0,
                                      params.geometry)
        assert p == 0.0

    def test_monotone_decreasing_in_diameter(self, params):
        d = np.linspace(0.5e-6, 20e-6, 200)
        p = ph.survival_gravitational(d, to_si(25, "sccm"), 0.0,
                                      params.geometry)
        assert np.all(np.diff(p) <= 1e-15)
        assert np.all((0.0 <= p) & (p <= 1.0))

    def test_monotone_decreasing_in_tube_length(self, params):
        vals = []
        for lt in (0.2, 0.4572, 0.9):
            geom = dataclasses.replace(params.geometry, L_T=lt)
            vals.append(float(ph.survival_gravitational(
                3e-6, to_si(25, "sccm"), 0.0, geom)))
        assert vals[0] >= vals[1] >= vals[2]

    def test_golden_value_from_direct_formula(self, params):
        # independent scripted evaluation of the closed form
        geom = params.geometry
        d, qc = 3e-6, to_si(25, "sccm")
        mu_ts = geom.rho_p * d * d * geom.g * geom.C_c / (18 * geom.eta_g)
        mu_a = qc / (math.pi * geom.r_T0 ** 2)
        a = (3 * geom.L_T * mu_ts / (8 * mu_a * geom.r_T0)) ** (1 / 3)
        b = math.sqrt(1 - a * a)
        expected = (2 / math.pi) * (a * b + math.asin(b) - 2 * a ** 3 * b)
        got = float(ph.survival_gravitational(d, qc, 0.0, geom))
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(0.9993171843325522, rel=1e-12)

    def test_zero_flow_rejected(self, params):
        with pytest.raises(UndefinedTransportError):
            ph.survival_gravitational(3e-6, 0.0, 0.0, params.geometry)


class TestStokesEinstein:
    def test_inverse_diameter_scaling(self, params):
        g = params.geometry
        assert ph.stokes_einstein_D(6e-6, g) == pytest.approx(
            ph.stokes_einstein_D(3e-6, g) / 2.0, rel=1e-12)

    def test_positive(self, params):
        d = np.linspace(0.1e-6, 20e-6, 100)
        assert np.all(ph.stokes_einstein_D(d, params.geometry) > 0)

    def test_golden_value(self, params):
        g = params.geometry
        expected = g.k_B * 293.0 * 1.0 / (2 * math.pi * g.eta_g * 3e-6)
        got = float(ph.stokes_einstein_D(3e-6, g))
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(2.98069324612456e-15, rel=1e-12)


class TestDiffusionSurvival:
    def test_zero_rhs_full_survival(self):
        assert ph.critical_radius(0.0) == 1.0
        x = ph.critical_radius(np.array([0.0]))
        assert float(x[0] ** 2 * (2 - x[0] ** 2)) == 1.0

    def test_rhs_above_one_full_deposition(self):
        assert ph.critical_radius(1.5) == 0.0

    def test_quartic_scan_oracle(self):
        # brute-force two-stage scan of (1-x)^3 (1+x) = 0.25 over [0, 1]
        xs = np.linspace(0.0, 1.0, 10_000_001)  # 1e-7 step
        q = (1 - xs) ** 3 * (1 + xs)
        i = int(np.argmin(np.abs(q - 0.25)))
        fine = np.linspace(xs[max(i - 2, 0)], xs[min(i + 2, xs.size - 1)],
                           4_000_001)
        qf = (1 - fine) ** 3 * (1 + fine)
        x_scan = fine[int(np.argmin(np.abs(qf - 0.25)))]
        x_impl = float(ph.critical_radius(0.25))
        assert abs(x_impl - x_scan) < 1e-9
        assert x_impl == pytest.approx(0.4424560026600758, abs=1e-12)
        p = x_impl ** 2 * (2 - x_impl ** 2)
        assert p == pytest.approx(0.353209787235607, abs=1e-9)

    def test_monotone_in_flow(self, params):
        q = to_si(np.linspace(20, 90, 50), "sccm")
        p = ph.survival_diffusion(3e-6, q, params.geometry.L_N, params.geometry)
        assert np.all(np.diff(p) >= -1e-15)
        assert np.all((0.0 <= p) & (p <= 1.0))

    def test_zero_flow_rejected(self, params):
        with pytest.raises(UndefinedTransportError):
            ph.survival_diffusion(3e-6, 0.0, params.geometry.L_N,
                                  params.geometry)


# ---------------------------------------------------------------------------
# Deposition rates
# ---------------------------------------------------------------------------

class TestDepositionRates:
    def test_no_aerosol_no_deposition(self, params, nominal_input):
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 0.0])
        u = nominal_input.as_array()
        assert float(ph.tube_deposition_rate(x, u, params)) == 0.0
        assert float(ph.nozzle_deposition_rate(x, u, params)) == 0.0

    def test_rates_nonnegative(self, params):
        rng = np.random.default_rng(3)
        X = random_valid_states(rng, 50)
        U = random_valid_inputs(rng, 50)
        assert np.all(ph.tube_deposition_rate(X, U, params) >= 0)
        assert np.all(ph.nozzle_deposition_rate(X, U, params) >= 0)

    def test_nozzle_rate_grows_as_flow_drops(self, params):
        # same aerosol throughput, longer residence at lower total flow
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 3e-7])
        slow = ph.nozzle_deposition_rate(
            x, np.array([0.37, to_si(25, "sccm"), to_si(30, "sccm")]), params)
        fast = ph.nozzle_deposition_rate(
            x, np.array([0.37, to_si(25, "sccm"), to_si(60, "sccm")]), params)
        assert float(slow) > float(fast)

    def test_tube_rate_matches_dense_trapezoid_oracle(self, params):
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 3e-7])
        u = np.array([to_si(370, "mA"), to_si(25, "sccm"), to_si(50, "sccm")])
        got = float(ph.tube_deposition_rate(x, u, params))
        # frozen from a 1e5-node trapezoid integration of the closed form
        assert got == pytest.approx(4.221772000631e-14, rel=1e-9)

    def test_nozzle_rate_matches_dense_oracle(self, params):
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 3e-7])
        u = np.array([to_si(370, "mA"), to_si(25, "sccm"), to_si(50, "sccm")])
        got = float(ph.nozzle_deposition_rate(x, u, params))
        # frozen from a 2e4-node trapezoid + brentq root oracle
        assert got == pytest.approx(3.0034287705e-14, rel=1e-8)

    def test_blocked_tube_raises(self, params, nominal_input):
        x = np.array([3e-6, 1e-6, params.geometry.r_T0, 0.0, 3e-7])
        with pytest.raises(BlockedTubeError):
            ph.tube_deposition_rate(x, nominal_input.as_array(), params)


# ---------------------------------------------------------------------------
# Aerosol generation
# ---------------------------------------------------------------------------

class TestGeneration:
    def test_center_point_value(self, params):
        h = ph.net_generation_H(to_si(25, "sccm"), to_si(1, "mL"),
                                to_si(370, "mA"), params)
        assert h == pytest.approx(2.1245e5 * 1e-18, rel=1e-3)
        assert h == pytest.approx(2.1245e-13, rel=1e-12)

    def test_quadratic_carrier_curvature(self, params):
        # second difference in sccm units recovers 2 * c_qq
        f = lambda qc: float(ph.net_generation_H(
            to_si(qc, "sccm"), to_si(1, "mL"), to_si(370, "mA"), params)) / 1e-18
        d2 = f(26.0) - 2 * f(25.0) + f(24.0)
        assert d2 == pytest.approx(2 * 3.3e2, rel=1e-6)

    def test_box_corner_matches_polynomial(self, params):
        qc, vl, ia = 15.0, 0.5, 300.0
        expected = (3.3e2 * qc ** 2 + 2.7e4 * vl * qc + 66 * qc * ia
                    + 2.1e2 * ia * vl - 5.2e5 * vl - 4.8e4 * qc - 1.1e3 * ia
                    + 7.7e5)
        got = ph.net_generation_H(to_si(qc, "sccm"), to_si(vl, "mL"),
                                  to_si(ia, "mA"), params) / 1e-18
        assert got == pytest.approx(expected, rel=1e-12)

    def test_extrapolation_flag(self, params):
        assert not ph.generation_extrapolating(
            to_si(25, "sccm"), to_si(1, "mL"), to_si(370, "mA"), params)
        assert ph.generation_extrapolating(
            to_si(40, "sccm"), to_si(1, "mL"), to_si(370, "mA"), params)

    def test_nan_rejected(self, params):
        with pytest.raises(RejectedInputError):
            ph.net_generation_H(float("nan"), 1e-6, 0.37, params)


# ---------------------------------------------------------------------------
# Transition field and stepping
# ---------------------------------------------------------------------------

class TestTransition:
    def test_empty_aerosol_fixed_point(self, params, nominal_input):
        p = fixed_point_params(params)
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 0.0])
        f = ph.transition_f(x, nominal_input.as_array(), ThetaParams.zero(), p)
        assert np.all(f == 0.0)

    def test_vial_rate_is_minus_phi_qc(self, params, nominal_input):
        x = np.array([3e-6, 1e-6, 0.2e-6, 0.5e-6, 4e-7])
        u = nominal_input.as_array()
        f = ph.transition_f(x, u, ThetaParams.zero(), params)
        assert f[1] == pytest.approx(-x[4] * u[1], rel=1e-15)

    def test_componentwise_against_standalone_ops(self, params, quad):
        x = np.array([3e-6, 1e-6, 0.3e-6, 0.8e-6, 4e-7])
        u = np.array([to_si(370, "mA"), to_si(25, "sccm"), to_si(50, "sccm")])
        th = ThetaParams(1e-5, -2e-5, 3e-6, -4e-6, 5e-5)
        f = ph.transition_f(x, u, th, params, quad)
        assert f[0] == pytest.approx(th.theta_da * x[0], rel=1e-14)
        assert f[1] == pytest.approx(-x[4] * u[1] + th.theta_Vl * x[1], rel=1e-14)
        assert f[2] == pytest.approx(
            th.theta_drT * x[2] + float(ph.tube_deposition_rate(x, u, params, quad)),
            rel=1e-14)
        assert f[3] == pytest.approx(
            th.theta_drN * x[3] + float(ph.nozzle_deposition_rate(x, u, params, quad)),
            rel=1e-14)
        h = float(ph.net_generation_H(u[1], x[1], u[0], params))
        expected_phi = ((h - x[4] * u[1] + x[4] * (-x[4] * u[1]))
                        / (params.geometry.V_v - x[1]) + th.theta_phiA * x[4])
        assert f[4] == pytest.approx(expected_phi, rel=1e-14)

    def test_headspace_error(self, params, nominal_input):
        x = np.array([3e-6, params.geometry.V_v, 0.0, 0.0, 0.0])
        with pytest.raises(DegenerateHeadspaceError):
            ph.transition_f(x, nominal_input.as_array(), None, params)


class TestEulerStep:
    def test_zero_dt_is_identity(self, params, nominal_state, nominal_input):
        x = nominal_state.as_array()
        nxt, clamped = ph.step_euler(x, nominal_input.as_array(), None, 0.0,
                                     params)
        assert np.array_equal(nxt, x)
        assert not clamped.any()

    def test_half_step_consistency(self, params, nominal_input):
        # Euler local error: two half steps vs one full step differ at
        # O(dt^2), so halving dt shrinks the gap ~4x
        x = np.array([3e-6, 1e-6, 0.2e-6, 0.5e-6, 3e-7])
        u = nominal_input.as_array()

        def gap(dt):
            full, _ = ph.step_euler(x, u, None, dt, params)
            half, _ = ph.step_euler(x, u, None, dt / 2, params)
            half2, _ = ph.step_euler(half, u, None, dt / 2, params)
            return np.linalg.norm((full - half2) / np.maximum(np.abs(x), 1e-12))

        g1, g2 = gap(1.0), gap(0.5)
        assert g2 < g1
        assert g1 / g2 == pytest.approx(4.0, rel=0.5)

    def test_hundred_steps_match_fine_reference(self, params, nominal_input):
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 3e-7])
        u = nominal_input.as_array()
        for _ in range(100):
            x, _ = ph.step_euler(x, u, None, 1.0, params)
        # frozen endpoint of the dt/100 reference integration
        reference = np.array([3.00000000e-06, 9.99979595e-07, 6.89172435e-12,
                              4.90287127e-12, 5.09863235e-07])
        np.testing.assert_allclose(x, reference, rtol=1e-5)

    def test_clamping_reported(self, params, nominal_input):
        # huge negative drift pushes phi_A through zero -> clamped
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 1e-9])
        th = ThetaParams(theta_phiA=-10.0)
        nxt, clamped = ph.step_euler(x, nominal_input.as_array(), th, 1.0,
                                     fixed_point_params(params))
        assert clamped[4]
        assert nxt[4] == 0.0


class TestMassBalance:
    def test_discrete_mass_conservation(self, params, nominal_input):
        # theta = 0, no noise: V_l decrement equals sum(phi_A Q_c dt) exactly
        x = np.array([3e-6, 1e-6, 0.1e-6, 0.2e-6, 4e-7])
        u = nominal_input.as_array()
        dt = 1.0
        v0 = x[1]
        outflow = []
        for _ in range(200):
            outflow.append(x[4] * u[1] * dt)
            x, clamped = ph.step_euler(x, u, None, dt, params)
            assert not clamped.any()
        assert v0 - x[1] == pytest.approx(math.fsum(outflow), rel=1e-13)


# ---------------------------------------------------------------------------
# Resistance network / pressures
# ---------------------------------------------------------------------------

class TestResistances:
    def test_tube_resistance_clean(self, params):
        g = params.geometry
        expected = 8 * 17.5 * 0.4572 / (math.pi * (7.89e-4) ** 4)
        assert float(ph.resistance_tube(0.0, g)) == pytest.approx(expected,
                                                                  rel=1e-12)

    def test_tube_resistance_monotone(self, params):
        dr = np.linspace(0, 0.5 * params.geometry.r_T0, 100)
        r = ph.resistance_tube(dr, params.geometry)
        assert np.all(np.diff(r) > 0)

    def test_quartic_law(self, params):
        g = params.geometry
        half = g.r_T0 / 2
        assert float(ph.resistance_tube(half, g)) == pytest.approx(
            16 * float(ph.resistance_tube(0.0, g)), rel=1e-12)

    def test_tip_poly_at_zero(self, params):
        assert float(ph.resistance_nozzle_tip(0.0, params.geometry)) == 4.57e9

    def test_tip_poly_at_one_micron(self, params):
        expected = sum(params.geometry.tip_poly)
        assert float(ph.resistance_nozzle_tip(1e-6, params.geometry)) == \
            pytest.approx(expected, rel=1e-12)

    def test_tip_poly_matches_power_sum(self, params):
        # Horner form vs direct power-series evaluation on a grid
        g = params.geometry
        z = np.linspace(0.0, 20.0, 100)
        direct = sum(a * z ** i for i, a in enumerate(g.tip_poly))
        np.testing.assert_allclose(ph.resistance_nozzle_tip(z * 1e-6, g),
                                   direct, rtol=1e-12)

    def test_tip_extrapolation_flag(self):
        assert not ph.nozzle_tip_extrapolating(5e-6)
        assert ph.nozzle_tip_extrapolating(25e-6)


class TestPressures:
    def test_zero_flow_zero_pressure(self, params, nominal_state):
        x = nominal_state.as_array()
        pc, ps = ph.pressures(x, np.array([0.37, 0.0, 0.0]), params.geometry)
        assert pc == 0.0 and ps == 0.0

    def test_carrier_slope_is_total_resistance(self, params):
        g = params.geometry
        x = np.array([3e-6, 1e-6, 0.2e-6, 0.5e-6, 3e-7])
        u0 = np.array([0.37, to_si(25, "sccm"), to_si(50, "sccm")])
        u1 = u0.copy()
        u1[1] += 1e-9
        pc0, _ = ph.pressures(x, u0, g)
        pc1, _ = ph.pressures(x, u1, g)
        r_total = (float(ph.resistance_tube(x[2], g)) + g.R_1 + g.R_2 + g.R_3
                   + g.R_1N + g.R_2N + float(ph.resistance_nozzle_tip(x[3], g)))
        assert (pc1 - pc0) / 1e-9 == pytest.approx(r_total, rel=1e-6)

    def test_linearity_in_flows(self, params, nominal_state):
        x = nominal_state.as_array()
        u = np.array([0.37, to_si(25, "sccm"), to_si(50, "sccm")])
        u2 = u.copy()
        u2[1:] *= 3.0
        pc1, ps1 = ph.pressures(x, u, params.geometry)
        pc2, ps2 = ph.pressures(x, u2, params.geometry)
        assert pc2 == pytest.approx(3 * pc1, rel=1e-12)
        assert ps2 == pytest.approx(3 * ps1, rel=1e-12)

    def test_nominal_pinned_sum(self, params):
        # spreadsheet-style totals for 25/50 sccm at zero deposition
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 3e-7])
        u = np.array([0.37, to_si(25, "sccm"), to_si(50, "sccm")])
        pc, ps = ph.pressures(x, u, params.geometry)
        assert pc == pytest.approx(21911898.63636592, rel=1e-12)
        assert ps == pytest.approx(5795.699448191666, rel=1e-12)


# ---------------------------------------------------------------------------
# Output map
# ---------------------------------------------------------------------------

class TestOutputMap:
    def test_no_aerosol_no_material_flow(self, params, nominal_input):
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 0.0])
        y = ph.output_g(x, nominal_input.as_array(), params)
        assert y[4] == 0.0

    def test_linewidth_carrier_slope(self, params, nominal_state):
        x = nominal_state.as_array()
        u0 = np.array([0.37, to_si(25, "sccm"), to_si(50, "sccm")])
        u1 = u0.copy()
        u1[1] += to_si(1, "sccm")
        y0 = ph.output_g(x, u0, params)
        y1 = ph.output_g(x, u1, params)
        slope = (y1[0] - y0[0]) / to_si(1, "sccm")
        assert slope == pytest.approx(params.output.lw.beta_c, rel=1e-9)

    def test_nominal_pinned_output(self, params):
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 3e-7])
        u = np.array([to_si(370, "mA"), to_si(25, "sccm"), to_si(50, "sccm")])
        y = ph.output_g(x, u, params)
        expected = np.array([3.685e-05, 6.792e-05, 2.1911898636365920e+07,
                             5.7956994481916660e+03, 1.0875e-14])
        np.testing.assert_allclose(y, expected, rtol=1e-10)

    def test_overspray_exceeds_linewidth_in_envelope(self, params):
        rng = np.random.default_rng(5)
        X = random_valid_states(rng, 200)
        X[:, 4] = rng.uniform(5e-8, 1.2e-6, 200)
        U = random_valid_inputs(rng, 200)
        Y = ph.output_g(X, U, params)
        assert np.all(Y[:, 1] > Y[:, 0])


# ---------------------------------------------------------------------------
# Jacobians
# ---------------------------------------------------------------------------

class TestJacobians:
    def test_vial_row_structure(self, params, nominal_input):
        x = np.array([3e-6, 1e-6, 0.0, 0.0, 0.0])
        u = nominal_input.as_array()
        F = ph.jacobian_F(x, u, ThetaParams.zero(), params)
        assert F[1, 4] == pytest.approx(-u[1], rel=1e-7)
        assert F[1, 0] == pytest.approx(0.0, abs=1e-12)

    def test_material_flow_row(self, params, nominal_state, nominal_input):
        H = ph.jacobian_H(nominal_state.as_array(), nominal_input.as_array(),
                          params)
        expected = np.array([0, 0, 0, 0,
                             params.output.phi_m * nominal_input.Q_c])
        np.testing.assert_allclose(H[4], expected, atol=1e-18)

    def test_against_independent_step_oracle(self, params, quad):
        rng = np.random.default_rng(11)
        X = random_valid_states(rng, 20)
        U = random_valid_inputs(rng, 20)
        th = ThetaParams(1e-5, 0.0, -1e-5, 2e-5, -3e-5)
        for x, u in zip(X, U):
            F = ph.jacobian_F(x, u, th, params, quad)
            F10 = ph.jacobian_F(x, u, th, params, quad, step_scale=0.1)
            assert np.linalg.norm(F - F10) <= 1e-5 * np.linalg.norm(F10)
            Hm = ph.jacobian_H(x, u, params)
            H10 = ph.jacobian_H(x, u, params, step_scale=0.1)
            assert np.linalg.norm(Hm - H10) <= 1e-5 * np.linalg.norm(H10)

    def test_combined_helper_matches_parts(self, params, quad, nominal_state,
                                           nominal_input):
        x, u = nominal_state.as_array(), nominal_input.as_array()
        f, F = ph.transition_with_jacobian(x, u, None, params, quad)
        np.testing.assert_array_equal(f, ph.transition_f(x, u, None, params,
                                                         quad))
        np.testing.assert_array_equal(F, ph.jacobian_F(x, u, None, params,
                                                       quad))
