"""Fringe fitting, visibility curves and recoil-kernel deconvolution."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .emission import semiclassical_visibility
from .interferometer import FringeSeries, Scenario, beam_average, bragg_amplitudes
from .params import HBAR

Z95 = 1.959963984540054


@dataclass(frozen=True)
class FitResult:
    """N(phi) = n0 + na cos(phi + phi0).

    ``visibility`` is na/n0 clipped at zero, ``ci95`` the first-order
    (delta-method) 95 % interval on it.  ``coef``/``cov`` are the raw linear
    coefficients (n0, a, b) of the basis (1, cos phi, sin phi) and their
    covariance.
    """

    n0: float
    na: float
    phi0: float
    visibility: float
    sigma_v: float
    ci95: tuple[float, float]
    coef: np.ndarray = field(repr=False)
    cov: np.ndarray = field(repr=False)
    residual: float = 0.0


def _arc_coverage(phases: np.ndarray) -> float:
    """Length of the smallest arc on the circle that contains all phases."""
    w = np.sort(np.mod(phases, 2 * np.pi))
    gaps = np.diff(np.concatenate([w, [w[0] + 2 * np.pi]]))
    return 2 * np.pi - gaps.max()


def check_phases(phases) -> np.ndarray:
    phases = np.asarray(phases, dtype=float)
    distinct = np.unique(np.round(np.mod(phases, 2 * np.pi), 12))
    if len(distinct) < 4:
        raise ValueError("fringe fit needs at least 4 distinct phases (mod 2 pi)")
    if _arc_coverage(phases) < np.pi - 1e-12:
        raise ValueError("fringe fit needs phases spanning at least pi")
    return phases


def fit_fringe(phases, counts, poisson: bool = False) -> FitResult:
    """Linear least squares of counts on (1, cos phi, sin phi).

    Without ``poisson`` the noise variance is estimated from the residuals;
    with it each point has variance equal to its counts (absolute weights).
    """
    phases = check_phases(phases)
    y = np.asarray(counts, dtype=float)
    if y.shape != phases.shape:
        raise ValueError("phases and counts differ in length")
    X = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    if poisson:
        var = np.maximum(y, 1.0)
        Xw = X / np.sqrt(var)[:, None]
        yw = y / np.sqrt(var)
    else:
        Xw, yw = X, y
    xtx = Xw.T @ Xw
    if np.linalg.cond(xtx) > 1e12:
        raise ValueError("degenerate fringe design matrix")
    xtx_inv = np.linalg.inv(xtx)
    coef = xtx_inv @ (Xw.T @ yw)
    resid = y - X @ coef
    if poisson:
        cov = xtx_inv
    else:
        dof = max(len(y) - 3, 1)
        cov = xtx_inv * (resid @ resid) / dof
    n0, a, b = coef
    if not n0 > 0:
        raise ValueError("fitted mean counts must be positive")
    na = float(np.hypot(a, b))
    phi0 = float(np.arctan2(-b, a))
    v = na / n0
    if na > 0:
        grad = np.array([-na / n0**2, a / (na * n0), b / (na * n0)])
    else:
        grad = np.array([0.0, 1 / n0, 0.0])
    sigma_v = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    lo = max(0.0, v - Z95 * sigma_v)
    return FitResult(
        n0=float(n0),
        na=na,
        phi0=phi0,
        visibility=v,
        sigma_v=sigma_v,
        ci95=(lo, v + Z95 * sigma_v),
        coef=coef,
        cov=cov,
        residual=float(np.sqrt(np.mean(resid**2))),
    )


def fit_series(series: FringeSeries, poisson: bool = True, floor: float = 0.0) -> list[FitResult | None]:
    """Fit every bin; bins whose mean counts fall below ``floor`` give None."""
    out = []
    for i in range(len(series.bin_centers)):
        y = series.bin_series(i)
        if y.mean() <= floor or y.mean() <= 0:
            out.append(None)
        else:
            out.append(fit_fringe(series.phases, y, poisson=poisson))
    return out


def populated_bins(series: FringeSeries, floor_fraction: float = 0.05) -> np.ndarray:
    """Bins holding at least ``floor_fraction`` of the peak bin of the emission pattern.

    The pre-grating pattern is used when available: the grating itself throws
    weakly diffracted atoms out to |p| ~ 2 hbar k0, which says nothing about
    the emission recoil.
    """
    mean = series.emitted if series.emitted is not None else series.counts.mean(axis=0)
    return np.nonzero(mean >= floor_fraction * mean.max())[0]


def outermost_bins(series: FringeSeries, floor_fraction: float = 0.05) -> tuple[int, int]:
    idx = populated_bins(series, floor_fraction)
    return int(idx[0]), int(idx[-1])


def headline_visibility(series: FringeSeries, floor_fraction: float = 0.05):
    """Visibility of the better-determined of the two outermost populated bins.

    Returns (chosen fit, (low-side fit, high-side fit), chosen bin index).
    """
    lo, hi = outermost_bins(series, floor_fraction)
    f_lo = fit_fringe(series.phases, series.bin_series(lo), poisson=True)
    f_hi = fit_fringe(series.phases, series.bin_series(hi), poisson=True)
    if f_lo.sigma_v <= f_hi.sigma_v:
        return f_lo, (f_lo, f_hi), lo
    return f_hi, (f_lo, f_hi), hi


def complementary_bin(series: FringeSeries, i: int, transfer: float) -> int:
    """Detector bin that exchanges atoms with bin ``i`` at the grating.

    The grating couples p with p - transfer * sign(p) (transfer = 2 kB / k0 in
    hbar k0), so the two bins are the complementary output ports whose counts
    oscillate in anti-phase.  Bins touching the edge of the coupled window
    (p = 0 or |p| = transfer) share boundary samples with a bin outside the
    pair and are rejected.
    """
    c = series.bin_centers[i]
    half = 0.5 * float(np.min(np.diff(series.bin_centers)))
    lo, hi = abs(c) - half, abs(c) + half
    if lo < 1e-9 or hi > transfer - 1e-9:
        raise ValueError(f"bin at {c:+.4f} straddles the edge of the grating's coupled window")
    target = c - transfer * (1.0 if c >= 0 else -1.0)
    j = int(np.argmin(np.abs(series.bin_centers - target)))
    if abs(series.bin_centers[j] - target) > 1e-9:
        raise ValueError("grating transfer does not map detector bins onto bins")
    return j


@dataclass(frozen=True)
class VisibilityCurve:
    d_mean: np.ndarray
    visibility: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    model: str

    def __post_init__(self):
        if self.model not in ("quantum", "semiclassical", "measured-import"):
            raise ValueError(f"unknown model tag {self.model!r}")
        if np.any(np.diff(self.d_mean) <= 0):
            raise ValueError("distances must be strictly increasing")

    def half_distance(self) -> float:
        """Distance where V first falls to half of its value at the first point (linear interp)."""
        v = self.visibility
        target = v[0] / 2
        below = np.nonzero(v <= target)[0]
        if len(below) == 0:
            return float("nan")
        i = below[0]
        if i == 0:
            return float(self.d_mean[0])
        d0, d1, v0, v1 = self.d_mean[i - 1], self.d_mean[i], v[i - 1], v[i]
        return float(d0 + (v0 - target) / (v0 - v1) * (d1 - d0))


def default_phases(n: int = 12) -> np.ndarray:
    return np.linspace(0, 2 * np.pi, n, endpoint=False)


def visibility_vs_distance(d_means, scenario: Scenario, phases=None, pool=None):
    """Quantum and semiclassical visibility curves on the same distances."""
    d_means = np.asarray(d_means, dtype=float)
    if np.any(d_means < 0):
        raise ValueError("distances must be non-negative")
    if np.any(np.diff(d_means) <= 0):
        raise ValueError("distances must be strictly increasing")
    phases = default_phases() if phases is None else phases
    qv, qlo, qhi, sv = [], [], [], []
    averaging = scenario.averaging if scenario.params.beam_width > 0 else None
    for d in d_means:
        sc = scenario.at_distance(float(d))
        fit, _, _ = headline_visibility(beam_average(sc, phases, pool))
        qv.append(fit.visibility)
        qlo.append(fit.ci95[0])
        qhi.append(fit.ci95[1])
        sv.append(
            semiclassical_visibility(
                float(d), sc.params, sc.detector.bin_width, averaging, seed=sc.seed
            )
        )
    quantum = VisibilityCurve(d_means, np.array(qv), np.array(qlo), np.array(qhi), "quantum")
    sv = np.array(sv)
    semi = VisibilityCurve(d_means, sv, sv, sv, "semiclassical")
    return quantum, semi


@dataclass(frozen=True)
class MomentumVisibility:
    bin_centers: np.ndarray
    visibility: np.ndarray  # NaN where the bin is below the count floor
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    acceptance: np.ndarray
    populated: np.ndarray

    def argmax(self) -> int:
        return int(np.nanargmax(self.visibility))


def acceptance_on_bins(scenario: Scenario, centers: np.ndarray) -> np.ndarray:
    s = scenario.splitter()
    _, r = bragg_amplitudes(centers * HBAR * scenario.params.k0, s)
    return np.abs(r) ** 2


def momentum_resolved_visibility(scenario: Scenario, phases=None, floor_fraction: float = 0.05, pool=None):
    phases = default_phases() if phases is None else phases
    series = beam_average(scenario, phases, pool)
    populated = np.zeros(len(series.bin_centers), dtype=bool)
    populated[populated_bins(series, floor_fraction)] = True
    n = len(series.bin_centers)
    v, lo, hi = np.full(n, np.nan), np.full(n, np.nan), np.full(n, np.nan)
    for i in np.nonzero(populated)[0]:
        f = fit_fringe(phases, series.bin_series(i), poisson=True)
        v[i], (lo[i], hi[i]) = f.visibility, f.ci95
    acc = acceptance_on_bins(scenario, series.bin_centers)
    return MomentumVisibility(series.bin_centers, v, lo, hi, acc, populated), series


def fwhm(x: np.ndarray, y: np.ndarray) -> float:
    """Full width at half maximum of a single-peaked sampled profile (NaNs ignored)."""
    y = np.nan_to_num(np.asarray(y, dtype=float), nan=0.0)
    i = int(np.argmax(y))
    half = y[i] / 2
    left = i
    while left > 0 and y[left - 1] >= half:
        left -= 1
    right = i
    while right < len(y) - 1 and y[right + 1] >= half:
        right += 1

    def cross(a, b):
        if y[a] == y[b]:
            return x[a]
        return x[a] + (half - y[a]) / (y[b] - y[a]) * (x[b] - x[a])

    xl = cross(left - 1, left) if left > 0 else x[0]
    xr = cross(right, right + 1) if right < len(y) - 1 else x[-1]
    return float(xr - xl)


def rebin_centered(density: np.ndarray, grid, width: float) -> tuple[np.ndarray, np.ndarray]:
    """Probability per bin on a coarse circular grid whose bins are centred on
    multiples of ``width`` (zero momentum at index n_bins // 2).

    Detector bins have an edge at p = 0; deconvolution needs a sample at
    p = 0 instead, hence this separate layout.
    """
    n_bins = int(round(2 * grid.p_max / width))
    per_bin = width / grid.dp
    if abs(n_bins * width - 2 * grid.p_max) > 1e-9 or abs(per_bin - round(per_bin)) > 1e-9:
        raise ValueError("bin width must tile the momentum grid")
    pos = (grid.p + width / 2) / width
    idx = np.floor(pos + 1e-9).astype(int) % n_bins
    on_edge = np.abs(pos - np.rint(pos)) < 1e-9
    mass = density * grid.dp
    # edge samples are shared by both neighbours, as in the detector binning
    probs = np.bincount(idx, np.where(on_edge, 0.5 * mass, mass), minlength=n_bins)
    probs += np.roll(np.bincount(idx[on_edge], 0.5 * mass[on_edge], minlength=n_bins), -1)
    probs = np.roll(probs, n_bins // 2)
    centers = (np.arange(n_bins) - n_bins // 2) * width
    return centers, probs


def convolve(a: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Circular convolution with the kernel centred on the middle sample."""
    fa = np.fft.fft(np.fft.ifftshift(a))
    fk = np.fft.fft(np.fft.ifftshift(kernel))
    return np.fft.fftshift(np.fft.ifft(fa * fk)).real


def deconvolve(measured, reference, eps: float | None = None) -> np.ndarray:
    """Tikhonov-regularized Fourier deconvolution of ``measured`` by ``reference``.

    K = M R* / (|R|^2 + eps), with eps = 1e-3 max|R|^2 by default.  Both inputs
    are sampled on the same grid with zero momentum at index N//2.  The
    returned kernel is clipped at zero and renormalized to unit sum.
    """
    m = np.asarray(measured, dtype=float)
    r = np.asarray(reference, dtype=float)
    if m.shape != r.shape:
        raise ValueError("measured and reference must share a grid")
    r = r / r.sum()
    R = np.fft.fft(np.fft.ifftshift(r))
    M = np.fft.fft(np.fft.ifftshift(m))
    if eps is None:
        eps = 1e-3 * np.max(np.abs(R) ** 2)
    if not eps > 0:
        raise ValueError("regularization eps must be positive")
    k = np.fft.fftshift(np.fft.ifft(M * np.conj(R) / (np.abs(R) ** 2 + eps))).real
    k = np.clip(k, 0, None)
    total = k.sum()
    if not total > 0:
        raise ValueError("deconvolved kernel vanished")
    return k / total
