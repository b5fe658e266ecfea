import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qodimer import (
    DimerParams,
    build_linearized_system,
    default_omega_grid,
    dimer_spectrum,
    monomer_spectrum,
    output_carriers,
    shot_noise_level,
    single_mode_normal_spectrum,
    solve_symmetric_steady_states,
    spectral_matrix,
    spectral_matrix_from_matrices,
)
from qodimer.spectra import SpectralSingularityError, pair_weight_vector
from conftest import random_params
from test_model import params_from_d


def lower_state(p):
    return solve_symmetric_steady_states(p)[0]


def random_stable(rng, min_margin=0.05, pump_max=3.0):
    """Random parameter set whose lowest branch is safely stable."""
    while True:
        p = random_params(rng, pump_max=pump_max)
        if p.pump == 0.0:
            continue
        state = lower_state(p)
        sys = build_linearized_system(state, p)
        lam = np.linalg.eigvals(sys.drift)
        if lam.real.max() < -min_margin and state.i1 > 1e-3:
            return p, state, sys


CONJ_SWAP = np.zeros((8, 8))
for _k in range(0, 8, 2):
    CONJ_SWAP[_k, _k + 1] = CONJ_SWAP[_k + 1, _k] = 1.0


class TestSpectralMatrix:
    def test_lorentzian_toy(self):
        for w in (0.0, 0.5, 2.0, -3.0):
            s = spectral_matrix_from_matrices(
                np.array([[-1.0]]), np.array([[1.0]]), w)
            assert_allclose(s.entries[0, 0], 1.0 / (1.0 + w ** 2), rtol=1e-14)

    def test_zero_diffusion(self):
        p = params_from_d(1.0, 0.3, -0.2, 0.0)
        sys = build_linearized_system(lower_state(p), p)
        s = spectral_matrix(sys, 1.3)
        assert np.abs(s.entries).max() == 0.0

    def test_high_frequency_decay(self, fig4_params, fig4_lower):
        sys = build_linearized_system(fig4_lower, fig4_params)
        scale = np.linalg.norm(sys.drift)
        s = spectral_matrix(sys, 1e3 * scale)
        assert np.abs(s.entries).max() < 10.0 / (1e3 * scale) ** 2 * \
            np.abs(sys.diffusion).max() * 10

    def test_singularity_detected(self):
        # neutral oscillator: (-iw - A) singular exactly at w = -2
        a = np.array([[2j]])
        d = np.array([[1.0]])
        with pytest.raises(SpectralSingularityError):
            spectral_matrix_from_matrices(a, d, -2.0)

    def test_transpose_symmetry(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            p, state, sys = random_stable(rng)
            for w in (0.0, 0.7, 3.0):
                s_pos = spectral_matrix(sys, w).entries
                s_neg = spectral_matrix(sys, -w).entries
                assert np.abs(s_pos - s_neg.T).max() < 1e-10

    def test_conjugate_pairing_symmetry(self):
        # S_{jk}(w)* equals S at the conjugate-swapped transposed indices
        rng = np.random.default_rng(22)
        for _ in range(5):
            p, state, sys = random_stable(rng)
            for w in (0.0, 1.1, -2.3):
                s = spectral_matrix(sys, w).entries
                assert np.abs(np.conj(s)
                              - CONJ_SWAP @ s.T @ CONJ_SWAP).max() < 1e-10


class TestSingleModeSpectrum:
    def test_zero_pump(self):
        p = params_from_d(0.7, 0.4, -0.1, 0.0)
        state = lower_state(p)
        sys = build_linearized_system(state, p)
        for w in (0.0, 1.0, 5.0):
            assert single_mode_normal_spectrum(sys, state, "fh", w) == 0.0
            assert single_mode_normal_spectrum(sys, state, "sh", w) == 0.0

    def test_printed_closed_form_match(self, fig4_params, fig4_lower):
        # the intracavity-carrier spectra equal the closed forms assembled
        # from the single-mode pieces and the explicit cross entries
        p, state = fig4_params, fig4_lower
        sys = build_linearized_system(state, p)
        grid = np.linspace(-8.0, 8.0, 41)
        for sign, sgn in (("plus", 1.0), ("minus", -1.0)):
            series = dimer_spectrum(sys, state, p, "A1B1", sign, grid,
                                    carrier="intracavity")
            for k, w in enumerate(grid):
                s = spectral_matrix(sys, w).entries
                sn = spectral_matrix(sys, -w).entries
                vn = single_mode_normal_spectrum(sys, state, "fh", w)
                cross = 2.0 * np.real(
                    s[0, 5] + sn[0, 5]
                    + np.exp(-2j * state.phi1) * (s[0, 4] + s[4, 0]))
                expect = 1.0 + 2.0 * vn / state.i1 + sgn * cross
                assert_allclose(series.values[k], expect, rtol=1e-10)

    def test_sh_closed_form_match(self, fig7_params):
        p = fig7_params.with_pump(15.0)
        state = lower_state(p)
        sys = build_linearized_system(state, p)
        grid = np.linspace(-6.0, 6.0, 25)
        series = dimer_spectrum(sys, state, p, "A2B2", "plus", grid,
                                carrier="intracavity")
        for k, w in enumerate(grid):
            s = spectral_matrix(sys, w).entries
            sn = spectral_matrix(sys, -w).entries
            vn = single_mode_normal_spectrum(sys, state, "sh", w)
            cross = 2.0 * p.gamma * np.real(
                s[2, 7] + sn[2, 7]
                + np.exp(-2j * state.phi2) * (s[2, 6] + s[6, 2]))
            expect = 1.0 + 2.0 * p.gamma * vn / state.i2 + cross
            assert_allclose(series.values[k], expect, rtol=1e-10)

    def test_monomer_printed_form(self):
        p = params_from_d(0.5, -1.0, -0.5, 1.2)
        state = lower_state(p)
        sys = build_linearized_system(state, p)
        grid = np.linspace(-5, 5, 21)
        fh = monomer_spectrum(sys, state, p, "fh", grid, carrier="intracavity")
        sh = monomer_spectrum(sys, state, p, "sh", grid, carrier="intracavity")
        for k, w in enumerate(grid):
            vn1 = single_mode_normal_spectrum(sys, state, "fh", w)
            vn2 = single_mode_normal_spectrum(sys, state, "sh", w)
            assert_allclose(fh.values[k], 1 + 2 * vn1 / state.i1, rtol=1e-10)
            assert_allclose(sh.values[k],
                            1 + 2 * p.gamma * vn2 / state.i2, rtol=1e-10)


class TestSeriesProperties:
    def test_reality_and_evenness(self):
        rng = np.random.default_rng(31)
        grid = np.linspace(-12.0, 12.0, 49)
        for _ in range(4):
            p, state, sys = random_stable(rng)
            for obs in ("A1A2", "A1B2", "A1B1", "A2B2"):
                for sign in ("plus", "minus"):
                    series = dimer_spectrum(sys, state, p, obs, sign, grid)
                    assert np.all(np.isfinite(series.values))
                    # mirror invariance under (w -> -w, transpose pairing)
                    assert np.abs(series.values
                                  - series.values[::-1]).max() < 1e-9

    def test_high_frequency_limit(self):
        rng = np.random.default_rng(32)
        for _ in range(4):
            p, state, sys = random_stable(rng)
            w_max = 100.0 * max(1.0, np.linalg.norm(sys.drift))
            for obs, sign in (("A1B1", "plus"), ("A2B2", "minus")):
                series = dimer_spectrum(sys, state, p, obs, sign,
                                        np.array([-w_max, w_max]))
                assert np.abs(series.values - 1.0).max() < 0.01

    def test_vanishing_pump_monomer(self):
        p = params_from_d(0.8, 0.2, 0.4, 1e-4)
        state = lower_state(p)
        sys = build_linearized_system(state, p)
        grid = np.linspace(-4, 4, 17)
        series = monomer_spectrum(sys, state, p, "fh", grid)
        assert np.abs(series.values - 1.0).max() < 1e-3

    def test_zero_intensity_error(self):
        p = params_from_d(1.0, 0.0, 0.0, 0.0)
        state = lower_state(p)
        sys = build_linearized_system(state, p)
        with pytest.raises(ValueError, match="shot-noise|intensity"):
            monomer_spectrum(sys, state, p, "fh", np.array([0.0]))

    def test_state_mismatch_rejected(self, fig4_params):
        states = solve_symmetric_steady_states(fig4_params)
        sys = build_linearized_system(states[0], fig4_params)
        with pytest.raises(ValueError, match="match"):
            dimer_spectrum(sys, states[2], fig4_params, "A1B1", "plus",
                           np.array([0.0]))


class TestEquivalence:
    def test_monomer_dimer_pointwise(self):
        rng = np.random.default_rng(41)
        grid = np.linspace(-15.0, 15.0, 101)
        for _ in range(5):
            p, state, sys = random_stable(rng)
            mono_p = DimerParams(gamma=p.gamma, delta1=p.delta1 - p.j1,
                                 delta2=p.delta2 - p.j2, j1=0.0, j2=0.0,
                                 pump=p.pump, ns=p.ns)
            mono_state = lower_state(mono_p)
            mono_sys = build_linearized_system(mono_state, mono_p)
            for obs, mode in (("A1B1", "fh"), ("A2B2", "sh")):
                dim = dimer_spectrum(sys, state, p, obs, "plus", grid)
                mono = monomer_spectrum(mono_sys, mono_state, mono_p, mode,
                                        grid)
                assert np.abs(dim.values - mono.values).max() < 1e-8


class TestShotNoise:
    def test_zero_intensity(self):
        p = params_from_d(1.0, 0.0, 0.0, 0.0)
        state = lower_state(p)
        assert shot_noise_level(state, p, "A1B1") == 0.0

    def test_hand_value(self):
        # I1 = 2, gamma = 1, n_s = 1e8, FH pair: 2e-8 * (2 + 2) = 8e-8
        p = params_from_d(1.0, 0.0, 0.0, 2 * math.sqrt(2))
        state = lower_state(p)
        assert_allclose(shot_noise_level(state, p, "A1B1", "intracavity"),
                        8e-8, rtol=1e-12)

    def test_matches_output_flux_identity(self, fig4_params, fig4_lower):
        # intracavity carriers reproduce 2 n_s^-1 (g_j I_j + g_k I_k)
        p, s = fig4_params, fig4_lower
        expect = 2.0 / p.ns * (s.i1 + s.i1)
        assert_allclose(shot_noise_level(s, p, "A1B1", "intracavity"), expect)
        expect = 2.0 / p.ns * (s.i1 + p.gamma * s.i2)
        assert_allclose(shot_noise_level(s, p, "A1A2", "intracavity"), expect)

    def test_sh_carrier_free(self, fig7_params):
        p = fig7_params.with_pump(15.0)
        state = lower_state(p)
        a = shot_noise_level(state, p, "A2B2", "intracavity")
        b = shot_noise_level(state, p, "A2B2", "detected")
        assert_allclose(a, b, rtol=1e-12)

    def test_monomer_variant(self, fig4_params, fig4_lower):
        p, s = fig4_params, fig4_lower
        assert_allclose(shot_noise_level(s, p, "sh", "intracavity"),
                        2.0 * p.gamma * s.i2 / p.ns)


class TestPaperFigures:
    def test_fig4_detected_dip(self, fig4_params, fig4_lower):
        sys = build_linearized_system(fig4_lower, fig4_params)
        grid = np.linspace(-20, 20, 1001)
        vp = dimer_spectrum(sys, fig4_lower, fig4_params, "A1B1", "plus",
                            grid)
        w_min, v_min = vp.minimum()
        assert v_min == pytest.approx(0.205, abs=0.01)
        assert abs(w_min) < 0.5

    def test_fig4_intracavity_differs(self, fig4_params, fig4_lower):
        # dropping the pump carrier removes the dip entirely
        sys = build_linearized_system(fig4_lower, fig4_params)
        grid = np.linspace(-20, 20, 201)
        vp = dimer_spectrum(sys, fig4_lower, fig4_params, "A1B1", "plus",
                            grid, carrier="intracavity")
        assert vp.values.min() > 0.9

    def test_weight_vector_shapes(self, fig4_params, fig4_lower):
        u, csn = pair_weight_vector("A1B1", "minus", fig4_lower, fig4_params)
        w1, _ = output_carriers(fig4_lower, fig4_params)
        assert_allclose(u[0], math.sqrt(2) * np.conj(w1))
        assert_allclose(u[4], -math.sqrt(2) * np.conj(w1))
        assert_allclose(csn, 2 * abs(w1) ** 2)
