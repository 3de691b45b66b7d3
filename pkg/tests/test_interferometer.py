import logging
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirrorcoherence.analysis import Z95, default_phases, fit_fringe, fwhm, headline_visibility
from mirrorcoherence.beam import AveragingSpec, beam_samples
from mirrorcoherence.emission import EmissionConfig
from mirrorcoherence.interferometer import (
    BraggConfig,
    BraggSplitter,
    Detector,
    Scenario,
    beam_average,
    bragg_amplitudes,
    bragg_split,
    detect,
    prepare_emitted,
    run_sequence,
)
from mirrorcoherence.params import HBAR, ExperimentParams
from mirrorcoherence.states import MixedState, WavepacketSpec, build_wavepacket, make_grid

P = ExperimentParams()
HK0 = HBAR * P.k0
PHASES = default_phases(12)


@pytest.fixture(scope="module")
def splitter():
    return BraggSplitter.from_acceptance(P)


class TestBraggAmplitudes:
    def test_resonant_half_split(self, splitter):
        t, r = bragg_amplitudes(np.array([HK0, -HK0]), splitter)
        assert np.allclose(np.abs(t) ** 2, 0.5, atol=1e-12)
        assert np.allclose(np.abs(r) ** 2, 0.5, atol=1e-12)

    def test_far_detuned_transmits(self, splitter):
        # |r|^2 oscillates under the envelope omega^2 / (omega^2 + delta^2)
        p = (1.0 + np.array([1.0, 2.0, 4.0])) * HK0
        delta = (p**2 - (p - 2 * HK0) ** 2) / (2 * P.mass * HBAR)
        envelope = splitter.omega**2 / (splitter.omega**2 + delta**2)
        _, r = bragg_amplitudes(p, splitter)
        assert np.all(np.abs(r) ** 2 <= envelope + 1e-15)
        assert np.all(np.diff(envelope) < 0) and abs(r[-1]) ** 2 < 1e-2

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-4.0, 4.0))
    def test_unitary(self, p):
        s = BraggSplitter.from_acceptance(P)
        t, r = bragg_amplitudes(p * HK0, s)
        assert abs(abs(t) ** 2 + abs(r) ** 2 - 1) < 1e-12

    def test_calibrated_acceptance_width(self, splitter):
        p = np.linspace(0, 2, 20001)
        _, r = bragg_amplitudes(p * HK0, splitter)
        assert np.isclose(fwhm(p, np.abs(r) ** 2), 1.0, rtol=1e-3)

    def test_longer_pulse_narrows_acceptance(self):
        p = np.linspace(0, 2, 8001)
        base = BraggSplitter.from_acceptance(P)
        widths = []
        for scale in (0.5, 1.0, 2.0, 4.0):
            tau = base.tau * scale
            s = replace(base, tau=tau, omega=base.pulse_area / tau)
            _, r = bragg_amplitudes(p * HK0, s)
            widths.append(fwhm(p, np.abs(r) ** 2))
        assert np.all(np.diff(widths) < 0)

    def test_validation(self):
        with pytest.raises(ValueError, match="pulse area"):
            BraggSplitter(P.k0, 1e5, 1e-3, P.mass)
        with pytest.raises(ValueError, match="kB"):
            BraggSplitter(-1.0, 1e3, 1e-3, P.mass)

    def test_tabulated_acceptance(self):
        s = replace(
            BraggSplitter.from_acceptance(P), acceptance="table",
            table_p=(-0.5, 0.0, 0.5), table_r2=(0.0, 0.5, 0.0),
        )
        t, r = bragg_amplitudes(np.array([1.0, 1.25, 2.0]) * HK0, s)
        assert np.allclose(np.abs(r) ** 2, [0.5, 0.25, 0.0])
        assert np.allclose(np.abs(t) ** 2 + np.abs(r) ** 2, 1.0)


class TestBraggSplit:
    GRID = make_grid(2048, 8.0)

    def pure(self, p_center, sigma_p=0.05):
        psi = build_wavepacket(WavepacketSpec(sigma_p=sigma_p, d=0.0, p_center=p_center), self.GRID)
        return MixedState.pure(psi)

    def test_splits_plus_recoil_evenly(self, splitter):
        out = bragg_split(self.pure(1.0, sigma_p=0.04), splitter)
        rho = np.abs(out.amplitudes[0]) ** 2 * self.GRID.dp
        p = self.GRID.p
        assert np.isclose(rho[p > 0].sum(), 0.5, atol=0.01)
        assert np.isclose(rho[p < 0].sum(), 0.5, atol=0.01)
        assert abs(p[p < 0][np.argmax(rho[p < 0])] + 1.0) < 2 * self.GRID.dp

    def test_phase_periodic(self, splitter):
        state = self.pure(1.0)
        a = bragg_split(state, splitter.with_phase(0.7))
        b = bragg_split(state, splitter.with_phase(0.7 + 2 * np.pi))
        assert np.allclose(a.amplitudes, b.amplitudes, atol=1e-12)

    def test_norm_preserved(self, splitter):
        state = self.pure(0.6, sigma_p=0.3)
        out = bragg_split(state, splitter.with_phase(1.3))
        assert np.allclose(out.member_norms(), state.member_norms(), atol=1e-12)

    def test_diffracted_phase_conjugates(self, splitter):
        state = self.pure(1.0)
        low = self.GRID.p < 0
        a = bragg_split(state, splitter.with_phase(0.9)).amplitudes[0][low]
        b = bragg_split(state, splitter.with_phase(-0.9)).amplitudes[0][low]
        assert np.allclose(a * np.exp(-0.9j), b * np.exp(0.9j), atol=1e-12)

    def test_transfer_must_be_on_grid(self, splitter):
        with pytest.raises(ValueError, match="grid steps"):
            bragg_split(self.pure(1.0), replace(splitter, kB=splitter.kB * 1.001))


class TestDetector:
    GRID = make_grid(2048, 8.0)

    def test_bins_tile_grid(self):
        e = Detector().edges(self.GRID)
        assert e[0] == -8.0 and e[-1] == 8.0 and len(e) == 129
        with pytest.raises(ValueError, match="tile"):
            Detector(bin_width=0.3).edges(self.GRID)

    def test_narrow_packet_single_bin(self):
        psi = build_wavepacket(WavepacketSpec(sigma_p=0.01, p_center=0.5625), make_grid(8192, 8.0))
        counts = detect(MixedState.pure(psi), Detector())
        assert counts.max() / counts.sum() > 1 - 1e-9

    def test_total_counts(self):
        psi = build_wavepacket(WavepacketSpec(sigma_p=0.3), self.GRID)
        counts = detect(MixedState.pure(psi), Detector(atoms_per_run=1e5))
        assert abs(counts.sum() / 1e5 - 1) < 1e-9

    def test_symmetric_state_symmetric_histogram(self):
        psi = build_wavepacket(WavepacketSpec(sigma_p=0.3, d=1e-6), self.GRID)
        counts = detect(MixedState.pure(psi), Detector())
        assert np.allclose(counts, counts[::-1], rtol=1e-9, atol=1e-9)


class TestPipeline:
    def test_stages_preserve_probability(self, small_scenario):
        sc = small_scenario
        state = prepare_emitted(sc, 2.8e-6)
        assert abs(state.trace() - 1) < 1e-9
        out = bragg_split(state, sc.splitter(0.4))
        assert abs(out.trace() - 1) < 1e-9
        counts = detect(out, sc.detector)
        assert abs(counts.sum() / sc.detector.atoms_per_run - 1) < 1e-9

    def test_complementary_ports(self, small_scenario):
        series = run_sequence(small_scenario, PHASES, d=2.8e-6)
        plus, minus = series.bin_of(1.0), series.bin_of(-1.0)
        assert np.isclose(series.bin_centers[plus] - series.bin_centers[minus], 2.0)
        total = series.counts[:, plus] + series.counts[:, minus]
        assert np.ptp(total) / total.mean() < 1e-6
        assert np.ptp(series.counts.sum(axis=1)) / series.counts.sum(axis=1).mean() < 1e-9

    def test_near_mirror_ports_oscillate_in_antiphase(self, small_scenario):
        series = run_sequence(small_scenario, PHASES, d=2.8e-6)
        plus, minus = series.bin_of(1.0), series.bin_of(-1.0)
        f_plus = fit_fringe(PHASES, series.bin_series(plus))
        f_minus = fit_fringe(PHASES, series.bin_series(minus))
        assert f_plus.visibility > 0.01 and f_minus.visibility > 0.01
        diff = abs(np.angle(np.exp(1j * (f_plus.phi0 - f_minus.phi0))))
        assert abs(diff - np.pi) < 0.2

    def test_far_from_mirror_no_fringes(self):
        # 54 um needs the full default grid: the half grid's box ends at 51 um
        series = run_sequence(Scenario(), PHASES, d=54e-6)
        mean = series.counts.mean(axis=0)
        busy = mean > 1e-3 * mean.max()
        variation = np.ptp(series.counts[:, busy], axis=0) / mean[busy]
        assert variation.max() < 0.01

    def test_single_branch_emission_has_no_fringes(self, small_scenario):
        sc = replace(small_scenario, emission=EmissionConfig(rs=0, rp=0))
        series = run_sequence(sc, PHASES, d=2.8e-6)
        mean = series.counts.mean(axis=0)
        for i in np.nonzero(mean > 1.0)[0]:
            # the mirror clip at 2.8 um leaves faint momentum tails that can
            # beat at low count levels; the fit must see nothing beyond noise
            f = fit_fringe(PHASES, series.bin_series(i), poisson=True)
            assert f.visibility < max(Z95 * f.sigma_v, 1e-9)

    def test_deterministic(self, small_scenario):
        a = run_sequence(small_scenario, PHASES, d=2.0e-6)
        b = run_sequence(small_scenario, PHASES, d=2.0e-6)
        assert np.array_equal(a.counts, b.counts)

    def test_packet_must_fit_position_box(self, small_scenario):
        with pytest.raises(ValueError, match="position box"):
            run_sequence(small_scenario, PHASES, d=54e-6)

    def test_rejects_empty_phase_list(self, small_scenario):
        with pytest.raises(ValueError, match="non-empty"):
            run_sequence(small_scenario, [])

    @pytest.mark.parametrize("d", [0.8e-6, 2.8e-6])
    def test_quadrature_converged(self, small_scenario, d):
        def v(n):
            sc = replace(small_scenario, emission=EmissionConfig(n_u=n, adaptive=False))
            series = run_sequence(sc, PHASES, d=d)
            return np.array([f.visibility for f in headline_visibility(series)[1]])

        assert np.max(np.abs(v(64) - v(128))) < 1e-3

    def test_adaptive_quadrature_converged_far(self, small_scenario):
        def v(n):
            sc = replace(small_scenario, emission=EmissionConfig(n_u=n))
            series = run_sequence(sc, PHASES, d=20e-6)
            return np.array([f.visibility for f in headline_visibility(series)[1]])

        assert np.max(np.abs(v(64) - v(1024))) < 1e-3


class TestBeamAverage:
    def test_zero_width_matches_single_run(self, small_scenario):
        sc = replace(small_scenario.at_distance(2.8e-6), params=replace(small_scenario.params, beam_width=0.0))
        a = beam_average(sc, PHASES)
        b = run_sequence(sc, PHASES)
        assert np.array_equal(a.counts, b.counts)

    def test_shadow_logged(self, small_scenario, caplog):
        with caplog.at_level(logging.INFO):
            series = beam_average(replace(small_scenario, averaging=AveragingSpec(n_positions=4)), PHASES)
        assert series.metadata["shadow_fraction"] > 0
        assert "shadow" in caplog.text

    def test_averaging_does_not_raise_visibility(self, small_scenario):
        sc = replace(small_scenario, averaging=AveragingSpec(n_positions=6))
        avg = headline_visibility(beam_average(sc, PHASES))[0].visibility
        bs = beam_samples(sc.params.d_mean, sc.params.beam_width, sc.averaging)
        slices = [headline_visibility(run_sequence(sc, PHASES, d=d))[0].visibility for d in bs.distances]
        assert avg <= max(slices) + 1e-12

    def test_stratified_samples(self):
        bs = beam_samples(20e-6, 10e-6, AveragingSpec(n_positions=10))
        assert np.allclose(np.diff(bs.distances), 1e-6)
        assert bs.shadow_fraction == 0.0 and np.isclose(bs.weights.sum(), 1.0)
        clipped = beam_samples(2.8e-6, 10e-6, AveragingSpec())
        assert np.isclose(clipped.shadow_fraction, 0.22) and clipped.distances.min() >= 0

    def test_jitter_is_seeded(self):
        spec = AveragingSpec(n_positions=8, jitter=True)
        a = beam_samples(10e-6, 10e-6, spec, seed=3).distances
        b = beam_samples(10e-6, 10e-6, spec, seed=3).distances
        c = beam_samples(10e-6, 10e-6, spec, seed=4).distances
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_momentum_classes(self, small_scenario):
        spec = AveragingSpec(n_positions=2, momentum_classes=3, momentum_spread=0.02)
        series = beam_average(replace(small_scenario, averaging=spec), PHASES[:4])
        assert series.metadata["n_slices"] == 6
        assert np.isclose(series.counts.sum(axis=1), small_scenario.detector.atoms_per_run).all()


def test_bragg_config_table_override(small_scenario):
    sc = replace(small_scenario, bragg=BraggConfig(table_p=(-0.5, 0.0, 0.5), table_r2=(0.0, 0.5, 0.0)))
    assert sc.splitter().acceptance == "table"
