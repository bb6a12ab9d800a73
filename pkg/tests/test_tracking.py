import numpy as np
import pytest

from nrcdamp import (
    ModeSpec,
    NotchSpec,
    ObjectiveTargets,
    PiSpec,
    PlantSpec,
    RationalTF,
    TrackerSpec,
    bandwidth,
    build_plant,
    build_tracker,
    dual_sensitivities,
    freq_response,
    kp_plant_inverse_approx,
    log_grid,
    margins,
    nrc,
    nyquist_net_crossings,
    objective_report,
    pm_feasibility,
    real_error_budget,
    steady_state_error,
    tf_feedback,
    tune_kp,
)

TWO_PI = 2.0 * np.pi


def single_mode(g=1.0, wn=1.0, zeta=0.01):
    return PlantSpec(gain=g, modes=(ModeSpec(wn, zeta),))


class TestBuildTracker:
    def test_pure_proportional_flat(self):
        ct = build_tracker(TrackerSpec(pi=PiSpec(kp=3.5)))
        w = np.logspace(-2, 4, 50)
        np.testing.assert_allclose(freq_response(ct, w), 3.5, rtol=1e-14)

    def test_notch_center_depth(self):
        # depth at the center frequency is q_den/q_num
        spec = TrackerSpec(
            pi=PiSpec(kp=1.0),
            notches=(NotchSpec(omega_rad_s=10.0, q_num=1.1, q_den=1.0),),
        )
        v = freq_response(build_tracker(spec), 10.0)
        assert abs(v) == pytest.approx(1.0 / 1.1, rel=1e-12)
        assert 20 * np.log10(abs(v)) == pytest.approx(-0.83, abs=0.01)

    def test_reference_parameter_set_assembly(self):
        # PI + two notches + low-pass evaluated against the factor product
        kp, wi = 298.3569, TWO_PI * 28.0
        wn1, wn2, wl = TWO_PI * 1000.0, TWO_PI * 2600.0, TWO_PI * 5000.0
        q1, q2, q3, q4 = 1.1, 1.0, 12.0, 10.0
        spec = TrackerSpec(
            pi=PiSpec(kp=kp, omega_i_rad_s=wi),
            notches=(
                NotchSpec(wn1, q1, q2),
                NotchSpec(wn2, q3, q4),
            ),
            lowpass_corner_rad_s=wl,
        )
        ct = build_tracker(spec)
        for f in (5.0, 100.0, 1000.0, 2600.0, 8000.0):
            s = 1j * TWO_PI * f
            manual = (
                kp
                * (1 + wi / s)
                * ((s / wn1) ** 2 + s / (q1 * wn1) + 1)
                / ((s / wn1) ** 2 + s / (q2 * wn1) + 1)
                * ((s / wn2) ** 2 + s / (q3 * wn2) + 1)
                / ((s / wn2) ** 2 + s / (q4 * wn2) + 1)
                * wl
                / (s + wl)
            )
            assert freq_response(ct, TWO_PI * f) == pytest.approx(manual, rel=1e-10)

    def test_distinct_notch_frequencies(self):
        with pytest.raises(ValueError, match="distinct"):
            TrackerSpec(
                pi=PiSpec(kp=1.0),
                notches=(NotchSpec(10.0, 1.0, 2.0), NotchSpec(10.0, 2.0, 1.0)),
            )


class TestTuneKp:
    def test_unity_magnitude(self):
        assert tune_kp(RationalTF.gain(1.0), 5.0) == pytest.approx(1.0)

    def test_rational_frf_and_callable_paths(self):
        gd = tf_feedback(build_plant(single_mode()), nrc(1.0, 3.0))
        wb = 0.5
        direct = tune_kp(gd, wb)
        grid = log_grid(0.001, 10.0, 400)
        via_frf = tune_kp((grid, freq_response(gd, grid)), wb)
        assert via_frf == pytest.approx(direct, rel=1e-4)
        via_eval = tune_kp(lambda w: freq_response(gd, w), wb)
        assert via_eval == pytest.approx(direct, rel=1e-12)

    def test_plant_inverse_approx(self):
        assert kp_plant_inverse_approx(1.0, 0.5) == pytest.approx(0.75)

    def test_out_of_grid(self):
        with pytest.raises(ValueError, match="outside"):
            tune_kp((np.array([1.0, 2.0]), np.array([1.0 + 0j, 1.0 + 0j])), 5.0)


class TestPmFeasibility:
    def test_upper_bound_at_nu_2(self):
        # 7 n^2 - 16 n - 12.25 <= 0 has upper root (16 + sqrt(599))/14
        n_upper = (16.0 + np.sqrt(599.0)) / 14.0
        value, feasible = pm_feasibility(2.0, n_upper)
        assert value == pytest.approx(0.0, abs=1e-9)
        assert pm_feasibility(2.0, n_upper - 1e-6)[1]
        assert not pm_feasibility(2.0, n_upper + 1e-6)[1]

    def test_interior_point(self):
        value, feasible = pm_feasibility(1.0, 1.0)
        assert value == pytest.approx(-2.0, rel=1e-12)
        assert feasible

    def test_near_boundary_reference_tuning(self):
        # nu = 4/3, n = 2.2 sits just outside the feasible set
        value, feasible = pm_feasibility(4.0 / 3.0, 2.2)
        assert value == pytest.approx(0.15593, abs=1e-4)
        assert not feasible

    def test_exact_tan60_variant(self):
        v175, _ = pm_feasibility(2.0, 2.0)
        vtan, _ = pm_feasibility(2.0, 2.0, exact_tan60=True)
        assert v175 != vtan
        c = np.tan(np.radians(60.0))
        assert vtan == pytest.approx(c * 4 * 4 - 2 * 8 * 2 + c * (1 - 8), rel=1e-12)


class TestSteadyStateError:
    def test_values(self):
        assert steady_state_error(2.0) == pytest.approx(0.5)
        assert steady_state_error(1e9) < 1e-8
        assert steady_state_error(298.3569) == pytest.approx(6.658742e-3, rel=1e-6)

    def test_domain(self):
        with pytest.raises(ValueError):
            steady_state_error(0.0)


def bundle_for(plant_tf, ct_tf, cd_tf, grid):
    return dual_sensitivities(
        freq_response(plant_tf, grid),
        freq_response(ct_tf, grid) if ct_tf is not None else np.zeros(grid.size, complex),
        freq_response(cd_tf, grid) if cd_tf is not None else np.zeros(grid.size, complex),
        grid,
    )


class TestDualSensitivities:
    def test_open_loop_limits(self):
        grid = log_grid(0.01, 100.0, 100)
        b = bundle_for(build_plant(single_mode()), None, None, grid)
        np.testing.assert_allclose(b.s_yn, 1.0)
        np.testing.assert_allclose(b.t_yr, 0.0)

    def test_complementarity_identities(self):
        grid = log_grid(0.01, 100.0, 150)
        g = build_plant(single_mode())
        ct = build_tracker(TrackerSpec(pi=PiSpec(kp=2.0, omega_i_rad_s=0.3)))
        cd = nrc(1.0, 3.0)
        b = bundle_for(g, ct, cd, grid)
        assert np.max(np.abs(b.t_yr + b.t_xr_comp - 1.0)) < 1e-9
        assert np.max(np.abs(b.s_yn - b.s_xn - 1.0)) < 1e-9

    def test_process_sensitivity_factorization(self):
        grid = log_grid(0.01, 100.0, 150)
        g = build_plant(single_mode())
        b = bundle_for(g, build_tracker(TrackerSpec(pi=PiSpec(kp=1.5))), nrc(0.8, 2.0), grid)
        np.testing.assert_allclose(
            b.ps_yd, freq_response(g, grid) * b.s_yn, rtol=1e-12
        )

    def test_low_frequency_real_error_suppressed_without_integrator(self):
        # marginal damping tuning gives |T'_xr| << 1 at low frequency even
        # with a plain proportional tracker
        grid = log_grid(1e-4, 10.0, 100)
        b = bundle_for(
            build_plant(single_mode()),
            build_tracker(TrackerSpec(pi=PiSpec(kp=1.0))),
            nrc(1.0, 3.0),
            grid,
        )
        low = grid < 1e-2
        assert np.max(np.abs(b.t_xr_comp[low])) < 0.05

    def test_alignment_required(self):
        with pytest.raises(ValueError, match="aligned"):
            dual_sensitivities(
                np.ones(3, complex), np.ones(4, complex), np.ones(3, complex), np.ones(3)
            )


class TestRealErrorBudget:
    def test_single_term_collapse(self):
        grid = log_grid(0.01, 10.0, 60)
        b = bundle_for(
            build_plant(single_mode()),
            build_tracker(TrackerSpec(pi=PiSpec(kp=1.0))),
            nrc(0.9, 3.0),
            grid,
        )
        e = real_error_budget(b, 2.0, 0.0, 0.0)
        np.testing.assert_allclose(e, 2.0 * np.abs(b.t_xr_comp), rtol=1e-12)

    def test_noise_asymptote(self):
        # with |L_D| >> 1, S_xn -> -1 so the noise term passes through
        grid = np.array([1e-4])
        b = dual_sensitivities(
            np.array([1.0 + 0j]), np.array([1e6 + 0j]), np.array([0j]), grid
        )
        e = real_error_budget(b, 0.0, 0.0, 1.0)
        assert e[0] == pytest.approx(1.0, rel=1e-5)

    def test_root_sum_square(self):
        grid = np.array([1.0])
        b = dual_sensitivities(
            np.array([0.5 + 0.5j]), np.array([2.0 + 0j]), np.array([1.0 + 0j]), grid
        )
        e = real_error_budget(b, 1.0, 1.0, 1.0)
        expected = np.sqrt(
            np.abs(b.t_xr_comp) ** 2 + np.abs(b.ps_yd) ** 2 + np.abs(b.s_xn) ** 2
        )
        assert e[0] == pytest.approx(expected[0], rel=1e-12)

    def test_negative_amplitude_rejected(self):
        grid = np.array([1.0])
        b = dual_sensitivities(
            np.array([1.0 + 0j]), np.array([1.0 + 0j]), np.array([0j]), grid
        )
        with pytest.raises(ValueError):
            real_error_budget(b, -1.0, 0.0, 0.0)


class TestBandwidth:
    def test_flat_response_never_exits(self):
        grid = log_grid(0.1, 100.0, 50)
        rep = bandwidth(grid, np.ones(grid.size, complex), 3.0)
        assert rep.grid_end and rep.omega_c_rad_s is None

    def test_second_order_reference(self):
        # T = 1/(1 - w^2 + i*sqrt(2)*w) leaves the +/-3 dB band at w ~ 1
        grid = log_grid(1e-3 / TWO_PI, 10.0 / TWO_PI, 400)
        t = 1.0 / (1.0 - grid**2 + 1j * np.sqrt(2.0) * grid)
        rep = bandwidth(grid, t, 3.0)
        assert not rep.grid_end
        assert rep.omega_c_rad_s == pytest.approx(1.0, rel=0.02)

    def test_refine_matches_interp(self):
        grid = log_grid(1e-3 / TWO_PI, 10.0 / TWO_PI, 400)

        def t_eval(w):
            return 1.0 / (1.0 - w**2 + 1j * np.sqrt(2.0) * w)

        t = t_eval(grid)
        coarse = bandwidth(grid, t, 3.0)
        fine = bandwidth(grid, t, 3.0, refine=t_eval)
        assert fine.omega_c_rad_s == pytest.approx(coarse.omega_c_rad_s, rel=1e-3)
        # the refined point sits on the band edge
        assert 20 * np.log10(abs(t_eval(fine.omega_c_rad_s))) == pytest.approx(
            -3.0, abs=1e-6
        )

    def test_monotone_in_bound(self):
        grid = log_grid(1e-3 / TWO_PI, 10.0 / TWO_PI, 400)
        t = 1.0 / (1.0 - grid**2 + 1j * 0.8 * grid)
        w1 = bandwidth(grid, t, 1.0).omega_c_rad_s
        w3 = bandwidth(grid, t, 3.0).omega_c_rad_s
        assert w1 <= w3

    def test_out_of_band_start_rejected(self):
        grid = log_grid(0.1, 10.0, 50)
        with pytest.raises(ValueError, match="outside the band"):
            bandwidth(grid, np.full(grid.size, 10.0 + 0j), 3.0)


class TestMargins:
    def test_integrator_loop(self):
        wb = 5.0
        grid = log_grid(0.01, 100.0, 400)
        loop = wb / (1j * grid)
        rep = margins(grid, loop, refine=lambda w: wb / (1j * w))
        assert len(rep.crossovers) == 1
        w, pm = rep.crossovers[0]
        assert w == pytest.approx(wb, rel=1e-9)
        assert pm == pytest.approx(90.0, abs=1e-6)

    def test_crossover_count_matches_frf(self):
        # marginal damping + low-bandwidth PI tracker: the integrator gives
        # a low-frequency down-crossing and the residual resonance bump two
        # more; the report must find exactly as many crossings as a dense
        # scan of |L|-1 sign changes
        grid = log_grid(1e-4 / TWO_PI, 100.0 / TWO_PI, 1000)
        g = build_plant(single_mode())
        ct = build_tracker(TrackerSpec(pi=PiSpec(kp=0.05, omega_i_rad_s=1e-3)))
        ld = freq_response(g, grid) * (
            freq_response(ct, grid) + freq_response(nrc(1.0, 3.0), grid)
        )
        expected = int(np.sum(np.diff(np.sign(np.abs(ld) - 1.0)) != 0))
        rep = margins(grid, ld)
        assert expected >= 3
        assert len(rep.crossovers) == expected

    def test_crossover_unity_with_refine(self):
        g = build_plant(single_mode())

        def l_eval(w):
            return freq_response(g, w) * (3.0 + freq_response(nrc(1.0, 3.0), w))

        grid = log_grid(1e-3 / TWO_PI, 100.0 / TWO_PI, 400)
        rep = margins(grid, l_eval(grid), refine=l_eval)
        for w, _ in rep.crossovers:
            assert abs(abs(complex(l_eval(w))) - 1.0) < 1e-4

    def test_gain_margin(self):
        # L = k/(s+1)^3 crosses -180 deg at w = sqrt(3) where |L| = k/8
        grid = log_grid(0.001, 100.0, 600)
        k = 4.0
        loop = k / (1j * grid + 1.0) ** 3
        rep = margins(grid, loop)
        assert rep.gain_margin_db == pytest.approx(20 * np.log10(8.0 / k), abs=1e-3)

    def test_no_crossing_empty(self):
        grid = log_grid(0.1, 10.0, 50)
        rep = margins(grid, np.full(grid.size, 0.1 + 0j))
        assert rep.crossovers == ()


class TestNyquist:
    def test_stable_loop_no_net_crossings(self):
        grid = log_grid(0.001, 100.0, 400)
        loop = 4.0 / (1j * grid + 1.0) ** 3  # GM = 2 -> stable
        assert nyquist_net_crossings(grid, loop) == 0

    def test_unstable_loop_detected(self):
        grid = log_grid(0.001, 100.0, 400)
        loop = 10.0 / (1j * grid + 1.0) ** 3  # gain above 8 -> encirclement
        assert nyquist_net_crossings(grid, loop) != 0


class TestObjectives:
    def test_resonance_loop_gain_value(self):
        # damping off, proportional tracker: |L_D(i wn)| = kp*g/(2 zeta)
        kp, g0, zeta = 2.0, 1.5, 0.01
        grid = log_grid(1e-2 / TWO_PI, 100.0 / TWO_PI, 400)
        g = build_plant(single_mode(g=g0, zeta=zeta))
        ct = np.full(grid.size, kp, dtype=complex)
        b = dual_sensitivities(freq_response(g, grid), ct, np.zeros(grid.size, complex), grid)
        rep = objective_report(
            b, ct, 1.0, (grid[-1] / 3.0, grid[-1]), ObjectiveTargets()
        )
        assert rep.resonance_loop_gain.value == pytest.approx(
            kp * g0 / (2 * zeta), rel=1e-3
        )

    def test_highband_rolloff_objective(self):
        # tracker low-pass keeps the high band quiet
        grid = log_grid(1e-2 / TWO_PI, 1000.0 / TWO_PI, 400)
        g = build_plant(single_mode())
        ct_tf = build_tracker(
            TrackerSpec(pi=PiSpec(kp=1.0), lowpass_corner_rad_s=5.0)
        )
        ct = freq_response(ct_tf, grid)
        cd = freq_response(nrc(0.9, 3.0), grid)
        b = dual_sensitivities(freq_response(g, grid), ct, cd, grid)
        rep = objective_report(
            b, ct, 1.0, (100.0, grid[-1]), ObjectiveTargets()
        )
        assert rep.highband_loop_gain.value < 1.0
        assert rep.highband_loop_gain.passed
