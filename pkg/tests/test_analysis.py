from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirrorcoherence.analysis import (
    Z95,
    VisibilityCurve,
    complementary_bin,
    convolve,
    deconvolve,
    default_phases,
    fit_fringe,
    fwhm,
    momentum_resolved_visibility,
    rebin_centered,
    visibility_vs_distance,
)
from mirrorcoherence.beam import AveragingSpec
from mirrorcoherence.emission import dipole_bin_masses
from mirrorcoherence.interferometer import run_sequence
from mirrorcoherence.states import make_grid

PHASES8 = np.linspace(0, 2 * np.pi, 8, endpoint=False)


def design(phases):
    return np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])


class TestFitFringe:
    def test_exact_recovery(self):
        y = 100 + 5 * np.cos(PHASES8 + 0.3)
        f = fit_fringe(PHASES8, y)
        assert abs(f.n0 - 100) < 1e-10 and abs(f.na - 5) < 1e-10
        assert abs(f.phi0 - 0.3) < 1e-12 and abs(f.visibility - 0.05) < 1e-12
        assert f.residual < 1e-10

    def test_constant_series(self):
        f = fit_fringe(PHASES8, np.full(8, 100.0))
        assert f.na < 1e-12 and f.visibility < 1e-14
        assert f.ci95[0] == 0.0

    def test_phase_wrapped(self):
        f = fit_fringe(PHASES8, 50 + 4 * np.cos(PHASES8 - 3.0))
        assert -np.pi < f.phi0 <= np.pi and np.isclose(f.phi0, -3.0)

    def test_uneven_phases(self):
        ph = np.array([0.0, 0.4, 1.1, 2.0, 3.3])
        f = fit_fringe(ph, 10 + 2 * np.cos(ph + 1.0))
        assert np.isclose(f.visibility, 0.2) and np.isclose(f.phi0, 1.0)

    @pytest.mark.parametrize(
        "phases, msg",
        [
            (np.zeros(8), "distinct"),
            (np.array([0.0, 2 * np.pi, 0.1, 0.2]), "distinct"),
            (np.linspace(0, 2.5, 6), "spanning"),
        ],
    )
    def test_phase_preconditions(self, phases, msg):
        with pytest.raises(ValueError, match=msg):
            fit_fringe(phases, np.ones(len(phases)))

    def test_rejects_nonpositive_mean(self):
        with pytest.raises(ValueError, match="positive"):
            fit_fringe(PHASES8, -5 + np.cos(PHASES8))

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            fit_fringe(PHASES8, np.ones(7))

    def test_poisson_covariance(self):
        y = 1000 + 60 * np.cos(PHASES8)
        f = fit_fringe(PHASES8, y, poisson=True)
        X = design(PHASES8)
        assert np.allclose(f.cov, np.linalg.inv(X.T @ (X / y[:, None])))

    def test_delta_method_matches_numeric_jacobian(self, rng):
        y = 1000 + 60 * np.cos(PHASES8 + 0.4) + rng.normal(0, 5, 8)
        f = fit_fringe(PHASES8, y)

        def v(c):
            return np.hypot(c[1], c[2]) / c[0]

        h = 1e-6
        grad = np.array([(v(f.coef + h * e) - v(f.coef - h * e)) / (2 * h) for e in np.eye(3)])
        assert np.isclose(f.sigma_v, np.sqrt(grad @ f.cov @ grad), rtol=1e-6)
        assert np.isclose(f.ci95[1] - f.visibility, Z95 * f.sigma_v)

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(10, 1e4), st.floats(0, 0.9), st.floats(-np.pi, np.pi),
        st.floats(0.01, 100), st.lists(st.floats(-1, 1), min_size=8, max_size=8),
    )
    def test_linear_in_counts(self, n0, v, phi0, scale, noise):
        y = n0 * (1 + v * np.cos(PHASES8 + phi0)) + np.array(noise) * 0.01 * n0
        a = fit_fringe(PHASES8, y)
        b = fit_fringe(PHASES8, scale * y)
        assert np.isclose(b.n0, scale * a.n0, rtol=1e-9)
        assert np.isclose(b.na, scale * a.na, rtol=1e-9, atol=1e-9 * scale * a.n0)
        assert np.isclose(b.visibility, a.visibility, rtol=1e-9, atol=1e-12)
        if a.na > 1e-6 * a.n0:
            assert np.isclose(np.cos(b.phi0 - a.phi0), 1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(1, 1e4), min_size=8, max_size=8))
    def test_residuals_orthogonal_to_basis(self, counts):
        y = np.array(counts)
        f = fit_fringe(PHASES8, y)
        X = design(PHASES8)
        resid = y - X @ f.coef
        assert np.all(np.abs(X.T @ resid) < 1e-10 * max(1.0, np.abs(y).sum()))


class TestVisibilityCurve:
    def test_validation(self):
        with pytest.raises(ValueError, match="increasing"):
            VisibilityCurve(np.array([2.0, 1.0]), np.ones(2), np.ones(2), np.ones(2), "quantum")
        with pytest.raises(ValueError, match="model"):
            VisibilityCurve(np.array([1.0, 2.0]), np.ones(2), np.ones(2), np.ones(2), "other")

    def test_half_distance(self):
        d = np.array([1.0, 2.0, 3.0, 4.0])
        v = np.array([0.8, 0.6, 0.2, 0.1])
        c = VisibilityCurve(d, v, v, v, "semiclassical")
        assert np.isclose(c.half_distance(), 2.5)
        flat = VisibilityCurve(d, np.ones(4), np.ones(4), np.ones(4), "quantum")
        assert np.isnan(flat.half_distance())


class TestCurves:
    def test_point_beam_dominates_averaged_near_mirror(self, small_scenario):
        # holds while the mean distance is small enough that no beam slice
        # sits much closer to the mirror than the point beam does
        sc = replace(small_scenario, averaging=AveragingSpec(n_positions=4))
        d = [1e-6, 2e-6]
        averaged, _ = visibility_vs_distance(d, sc)
        point, _ = visibility_vs_distance(d, sc.point_beam())
        assert np.all(point.visibility >= averaged.visibility)

    def test_averaged_curve_bounded_by_closest_slice(self, small_scenario):
        # further out the average picks up atoms nearer the mirror than d_mean,
        # so the bound is the best slice rather than the point beam at d_mean
        sc = replace(small_scenario, averaging=AveragingSpec(n_positions=4))
        averaged, _ = visibility_vs_distance([6e-6], sc)
        closest = sc.params.beam_width / 8 + 6e-6 - sc.params.beam_width / 2
        point, _ = visibility_vs_distance([closest], sc.point_beam())
        assert averaged.visibility[0] <= point.visibility[0]

    def test_rejects_negative_and_unsorted(self, small_scenario):
        with pytest.raises(ValueError):
            visibility_vs_distance([-1e-6], small_scenario)
        with pytest.raises(ValueError):
            visibility_vs_distance([3e-6, 2e-6], small_scenario)

    def test_flat_phase_gives_symmetric_momentum_visibility(self, small_scenario):
        mv, _ = momentum_resolved_visibility(small_scenario.point_beam())
        ok = np.nonzero(mv.populated)[0]
        for i in ok:
            j = len(mv.bin_centers) - 1 - i
            assert mv.populated[j]
            width = max(mv.ci_hi[i] - mv.ci_lo[i], 1e-12)
            assert abs(mv.visibility[i] - mv.visibility[j]) <= width
        assert np.all(np.isnan(mv.visibility[~mv.populated]))

    def test_quadratic_phase_breaks_symmetry(self, small_scenario):
        sc = replace(small_scenario.point_beam(), packet=replace(small_scenario.packet, phase="quadratic", chirp=400.0))
        mv, _ = momentum_resolved_visibility(sc)
        i = int(np.argmin(np.abs(mv.bin_centers - 1.0625)))
        j = len(mv.bin_centers) - 1 - i
        flat, _ = momentum_resolved_visibility(small_scenario.point_beam())
        assert abs(mv.visibility[i] - mv.visibility[j]) > 10 * abs(flat.visibility[i] - flat.visibility[j])

    def test_complementary_bin(self, small_scenario):
        series = run_sequence(small_scenario, default_phases(), d=2.8e-6)
        i = series.bin_of(1.0625)
        j = complementary_bin(series, i, 2.0)
        assert np.isclose(series.bin_centers[j], -0.9375)
        assert complementary_bin(series, j, 2.0) == i
        with pytest.raises(ValueError):
            complementary_bin(series, i, 1.95)
        with pytest.raises(ValueError, match="straddles"):
            complementary_bin(series, series.bin_of(-0.0625), 2.0)
        with pytest.raises(ValueError, match="straddles"):
            complementary_bin(series, series.bin_of(1.9375), 2.0)


class TestDeconvolution:
    BW = 1 / 8
    GRID = make_grid(4096, 8.0)

    def reference(self, sigma=0.05):
        rho = np.exp(-self.GRID.p**2 / (2 * sigma**2))
        rho /= rho.sum() * self.GRID.dp
        return rebin_centered(rho, self.GRID, self.BW)

    def test_rebin_centered(self):
        centers, r = self.reference()
        assert centers[len(centers) // 2] == 0.0
        assert np.isclose(r.sum(), 1.0, rtol=1e-12)
        assert np.allclose(r, r[::-1][np.r_[-1, 0:len(r) - 1]], atol=1e-3 * r.max())

    def test_identity(self):
        _, r = self.reference()
        k = deconvolve(r, r)
        assert k.max() >= 0.99 and np.argmax(k) == len(k) // 2

    def test_recovers_dipole_kernel(self):
        centers, r = self.reference()
        truth = dipole_bin_masses(centers, self.BW)
        measured = convolve(r, truth)
        k = deconvolve(measured, r)
        assert np.linalg.norm(k - truth) / np.linalg.norm(truth) < 0.05

    def test_reconvolution_reproduces_measured(self):
        centers, r = self.reference()
        measured = convolve(r, dipole_bin_masses(centers, self.BW))
        back = convolve(r, deconvolve(measured, r))
        assert np.linalg.norm(back - measured) / np.linalg.norm(measured) < 0.02

    def test_distortion_grows_with_regularization(self):
        centers, r = self.reference(sigma=0.15)
        truth = dipole_bin_masses(centers, self.BW)
        measured = convolve(r, truth)
        R2 = np.max(np.abs(np.fft.fft(r)) ** 2)
        errors = [
            np.linalg.norm(deconvolve(measured, r, eps * R2) - truth)
            for eps in (1e-3, 1e-2, 1e-1, 1.0, 10.0)
        ]
        assert np.all(np.diff(errors) > 0)

    def test_rejects_bad_eps_and_shapes(self):
        _, r = self.reference()
        with pytest.raises(ValueError, match="eps"):
            deconvolve(r, r, eps=0.0)
        with pytest.raises(ValueError, match="grid"):
            deconvolve(r, r[:-1])


def test_fwhm_of_gaussian():
    x = np.linspace(-5, 5, 100001)
    assert np.isclose(fwhm(x, np.exp(-(x**2) / 2)), 2 * np.sqrt(2 * np.log(2)), rtol=1e-6)
