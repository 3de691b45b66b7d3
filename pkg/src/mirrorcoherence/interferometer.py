"""Bragg readout of the post-emission superposition.

The standing light wave couples each momentum p >= 0 below 2 hbar kB with its
partner p - 2 hbar kB (a two-level Rabi problem); momenta outside that window
are left alone.  The diffracted amplitude picks up exp(+i phi_B) on the
downward transfer and exp(-i phi_B) on the way back, with phi_B = 2 kB L for
a retro-mirror displacement L.  Detection integrates the ensemble momentum
density over detector bins (far-field equivalence).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .beam import AveragingSpec, beam_samples, momentum_classes
from .emission import EmissionConfig, emit_mixture
from .params import HBAR, ExperimentParams
from .states import (
    MixedState,
    MomentumGrid,
    WavepacketSpec,
    build_wavepacket,
    clip_to_mirror,
    free_propagate,
    make_grid,
    momentum_density,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BraggSplitter:
    """Thin standing-wave grating: wavevector ``kB`` (rad/m), two-photon Rabi
    frequency ``omega`` (rad/s), interaction time ``tau`` (s), phase ``phi``.

    ``acceptance="table"`` replaces the Rabi reflectivity by an interpolated
    |r(p)|^2 table (``table_p`` in hbar kB relative to resonance); the phase of
    r is kept at -i and |t| follows from unitarity.
    """

    kB: float
    omega: float
    tau: float
    mass: float
    phi: float = 0.0
    acceptance: str = "rabi"
    table_p: tuple = ()
    table_r2: tuple = ()

    def __post_init__(self):
        if not self.kB > 0:
            raise ValueError("kB must be positive")
        area = self.omega * self.tau
        if not 0 < area <= np.pi + 1e-12:
            raise ValueError(f"pulse area omega*tau={area:.4g} outside (0, pi]")
        if self.acceptance not in ("rabi", "table"):
            raise ValueError(f"unknown acceptance model {self.acceptance!r}")
        if self.acceptance == "table" and len(self.table_p) != len(self.table_r2):
            raise ValueError("acceptance table columns differ in length")

    @property
    def pulse_area(self) -> float:
        return self.omega * self.tau

    def with_phase(self, phi: float) -> "BraggSplitter":
        return replace(self, phi=float(phi))

    @classmethod
    def from_acceptance(
        cls,
        params: ExperimentParams,
        fwhm: float = 1.0,
        pulse_area: float = np.pi / 2,
        kB: float | None = None,
        phi: float = 0.0,
    ) -> "BraggSplitter":
        """Choose omega, tau so that |r(p)|^2 has the requested FWHM (in hbar k0)."""
        kB = params.k0 if kB is None else kB
        p_res = HBAR * kB
        half = 0.5 * fwhm * HBAR * params.k0

        def excess(omega):
            s = cls(kB, omega, pulse_area / omega, params.mass)
            _, r = bragg_amplitudes(np.array([p_res, p_res + half]), s)
            return abs(r[1]) ** 2 - 0.5 * abs(r[0]) ** 2

        omega = brentq(excess, 1e-3 * params.recoil_frequency, 1e4 * params.recoil_frequency)
        return cls(kB, omega, pulse_area / omega, params.mass, phi)


def bragg_amplitudes(p, splitter: BraggSplitter):
    """Transmission and diffraction amplitudes for momentum ``p`` (SI, kg m/s).

    Two-level coupling of p with p - 2 hbar kB sign(p); |t|^2 + |r|^2 = 1.
    """
    p = np.asarray(p, dtype=float)
    q = 2 * HBAR * splitter.kB * np.where(p >= 0, 1.0, -1.0)
    delta = (p**2 - (p - q) ** 2) / (2 * splitter.mass * HBAR)
    if splitter.acceptance == "table":
        x = (np.abs(p) - HBAR * splitter.kB) / (HBAR * splitter.kB)
        r2 = np.clip(np.interp(x, splitter.table_p, splitter.table_r2, left=0, right=0), 0, 1)
        return np.sqrt(1 - r2) + 0j, -1j * np.sqrt(r2)
    om = splitter.omega
    oe = np.sqrt(om**2 + delta**2)
    half = oe * splitter.tau / 2
    t = np.cos(half) + 1j * (delta / oe) * np.sin(half)
    r = -1j * (om / oe) * np.sin(half)
    return t, r


def bragg_pairs(grid: MomentumGrid, splitter: BraggSplitter) -> tuple[np.ndarray, np.ndarray]:
    """Grid indices (upper, lower) of the coupled momentum pairs."""
    shift = 2 * splitter.kB / grid.k0 / grid.dp
    steps = int(np.rint(shift))
    if abs(shift - steps) > 1e-6:
        raise ValueError("2 hbar kB is not an integer number of grid steps")
    p = grid.p
    upper = np.nonzero((p >= 0) & (p < 2 * splitter.kB / grid.k0 - grid.dp / 2))[0]
    lower = upper - steps
    keep = lower >= 0
    return upper[keep], lower[keep]


def bragg_split(state: MixedState, splitter: BraggSplitter) -> MixedState:
    grid = state.grid
    hi, lo = bragg_pairs(grid, splitter)
    t, r = bragg_amplitudes(grid.p[hi] * HBAR * grid.k0, splitter)
    a_hi = state.amplitudes[:, hi]
    a_lo = state.amplitudes[:, lo]
    down = np.exp(1j * splitter.phi)
    out = np.array(state.amplitudes)
    out[:, lo] = np.conj(t) * a_lo + r * down * a_hi
    out[:, hi] = t * a_hi + r * np.conj(down) * a_lo
    return state.with_amplitudes(out)


@dataclass(frozen=True)
class Detector:
    """Momentum-resolving detector; bins of ``bin_width`` (hbar k0) tile the grid."""

    bin_width: float = 1 / 8
    atoms_per_run: float = 1e5
    flight_time: float = 1.0 / 600.0

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if not self.atoms_per_run > 0:
            raise ValueError("atoms_per_run must be positive")

    def edges(self, grid: MomentumGrid) -> np.ndarray:
        n_bins = 2 * grid.p_max / self.bin_width
        per_bin = self.bin_width / grid.dp
        if abs(n_bins - round(n_bins)) > 1e-9 or abs(per_bin - round(per_bin)) > 1e-9:
            raise ValueError("detector bins must tile the momentum grid exactly")
        return -grid.p_max + self.bin_width * np.arange(round(n_bins) + 1)

    def centers(self, grid: MomentumGrid) -> np.ndarray:
        e = self.edges(grid)
        return (e[:-1] + e[1:]) / 2

    def bin_index(self, grid: MomentumGrid) -> np.ndarray:
        per_bin = int(round(self.bin_width / grid.dp))
        return np.arange(grid.n_points) // per_bin


def bin_density(density: np.ndarray, grid: MomentumGrid, det: Detector) -> np.ndarray:
    """Probability per detector bin from a density on the grid.

    Each sample stands for a cell of width dp around it; samples that sit
    exactly on a bin edge are shared equally by the two neighbouring bins
    (circularly at +-p_max), so a mirror-symmetric density gives a
    mirror-symmetric histogram.
    """
    n_bins = len(det.edges(grid)) - 1
    mass = density * grid.dp
    idx = det.bin_index(grid)
    per_bin = int(round(det.bin_width / grid.dp))
    on_edge = np.arange(grid.n_points) % per_bin == 0
    own = np.where(on_edge, 0.5 * mass, mass)
    out = np.bincount(idx, own, minlength=n_bins)
    out += np.roll(np.bincount(idx[on_edge], 0.5 * mass[on_edge], minlength=n_bins), -1)
    return out


def detect(state, det: Detector) -> np.ndarray:
    """Expected counts per detector bin."""
    return det.atoms_per_run * bin_density(momentum_density(state), state.grid, det)


@dataclass(frozen=True)
class FringeSeries:
    phases: np.ndarray
    bin_centers: np.ndarray
    counts: np.ndarray
    emitted: np.ndarray | None = None  # pre-grating counts per bin
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=float)
        if c.shape != (len(self.phases), len(self.bin_centers)):
            raise ValueError("counts must be (n_phases, n_bins)")
        if np.any(c < -1e-9 * max(1.0, np.abs(c).max())):
            raise ValueError("negative counts")

    def bin_series(self, i: int) -> np.ndarray:
        return self.counts[:, i]

    def bin_of(self, p: float) -> int:
        return int(np.argmin(np.abs(self.bin_centers - p)))


@dataclass(frozen=True)
class BraggConfig:
    """How the grating is set up: target acceptance FWHM (hbar k0) and pulse
    area for the Rabi model, optional grating wavevector (default k0), or a
    tabulated |r|^2 acceptance that overrides the Rabi shape."""

    fwhm: float = 1.0
    pulse_area: float = np.pi / 2
    kB: float | None = None
    table_p: tuple = ()
    table_r2: tuple = ()

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError("Bragg acceptance FWHM must be positive")
        if not 0 < self.pulse_area <= np.pi:
            raise ValueError("Bragg pulse area must lie in (0, pi]")
        if len(self.table_p) != len(self.table_r2):
            raise ValueError("acceptance table columns differ in length")
        if self.table_p and np.any(np.diff(self.table_p) <= 0):
            raise ValueError("acceptance table momenta must increase")


@dataclass(frozen=True)
class Scenario:
    """Everything needed to run the interferometer for one configuration."""

    params: ExperimentParams = ExperimentParams()
    packet: WavepacketSpec = WavepacketSpec()
    emission: EmissionConfig = EmissionConfig()
    detector: Detector = Detector()
    averaging: AveragingSpec = AveragingSpec()
    n_points: int = 4096
    p_max: float = 8.0
    bragg: BraggConfig = BraggConfig()
    seed: int = 0

    def grid(self) -> MomentumGrid:
        return make_grid(self.n_points, self.p_max, self.params.k0)

    def splitter(self, phi: float = 0.0) -> BraggSplitter:
        b = self.bragg
        s = BraggSplitter.from_acceptance(self.params, b.fwhm, b.pulse_area, b.kB, phi)
        if b.table_p:
            s = replace(s, acceptance="table", table_p=tuple(b.table_p), table_r2=tuple(b.table_r2))
        return s

    def at_distance(self, d_mean: float) -> "Scenario":
        return replace(self, params=replace(self.params, d_mean=d_mean))

    def point_beam(self) -> "Scenario":
        return replace(self, params=replace(self.params, beam_width=0.0))


def prepare_emitted(scenario: Scenario, d: float, p_center: float = 0.0) -> MixedState:
    """Initial packet at distance ``d`` -> mirror clipping -> emission -> flight to the grating."""
    grid = scenario.grid()
    spec = replace(scenario.packet, d=d, p_center=scenario.packet.p_center + p_center)
    psi0 = build_wavepacket(spec, grid)
    if psi0.probability_behind_mirror() > 1e-6:
        psi0, lost = clip_to_mirror(psi0)
        log.debug("packet at d=%.3g m clipped by mirror (lost %.3g)", d, lost)
    state = emit_mixture(psi0, scenario.emission)
    return free_propagate(state, scenario.params.t_bragg, scenario.params.mass)


def readout(state: MixedState, scenario: Scenario, splitter: BraggSplitter, phases) -> np.ndarray:
    """Bragg split, flight to the detector and detection for each phase."""
    p = scenario.params
    t_rest = p.t_detector - p.t_bragg
    rows = []
    for phi in phases:
        out = bragg_split(state, splitter.with_phase(phi))
        out = free_propagate(out, t_rest, p.mass)
        rows.append(detect(out, scenario.detector))
    return np.array(rows)


def _check_phases(phases) -> np.ndarray:
    phases = np.asarray(phases, dtype=float)
    if phases.ndim != 1 or len(phases) == 0:
        raise ValueError("phase list must be a non-empty 1-D sequence")
    return phases


def run_sequence(scenario: Scenario, phases, d: float | None = None) -> FringeSeries:
    """Single atom-mirror distance (default: the scenario's mean distance)."""
    phases = _check_phases(phases)
    d = scenario.params.d_mean if d is None else d
    splitter = scenario.splitter()
    state = prepare_emitted(scenario, d)
    counts = readout(state, scenario, splitter, phases)
    emitted = detect(state, scenario.detector)
    meta = {"d": d, "seed": scenario.seed, "n_members": len(state)}
    return FringeSeries(phases, scenario.detector.centers(state.grid), counts, emitted, meta)


def beam_average(scenario: Scenario, phases, pool=None) -> FringeSeries:
    """Fringes averaged over the transverse beam profile (and momentum classes).

    ``pool`` may be a concurrent.futures executor; slices are independent and
    results are reduced in a fixed order.
    """
    phases = _check_phases(phases)
    p = scenario.params
    bs = beam_samples(p.d_mean, p.beam_width, scenario.averaging, scenario.seed)
    offsets, class_w = momentum_classes(scenario.averaging)
    splitter = scenario.splitter()
    jobs = [(d, wd * wc, dp) for d, wd in zip(bs.distances, bs.weights) for dp, wc in zip(offsets, class_w)]

    def one(job):
        d, _, dp = job
        state = prepare_emitted(scenario, d, dp)
        return readout(state, scenario, splitter, phases), detect(state, scenario.detector)

    results = list(pool.map(one, jobs)) if pool is not None else [one(j) for j in jobs]
    counts = sum(w * c for (_, w, _), (c, _) in zip(jobs, results))
    emitted = sum(w * e for (_, w, _), (_, e) in zip(jobs, results))
    meta = {
        "d_mean": p.d_mean,
        "beam_width": p.beam_width,
        "shadow_fraction": bs.shadow_fraction,
        "n_slices": len(jobs),
        "seed": scenario.seed,
    }
    return FringeSeries(phases, scenario.detector.centers(scenario.grid()), counts, emitted, meta)
