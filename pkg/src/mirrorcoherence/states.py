"""Momentum-space states of the atom's motion normal to the mirror.

Conventions
-----------
Momenta are in units of the photon recoil ``hbar*k0``; the momentum grid is
``p_j = (j - N/2) * dp`` with ``dp = 2 p_max / N``.  The conjugate position
grid is ``z_n = (n - N/2) * dz`` with ``dz = pi / (k0 p_max)`` (metres), so that
``dp * k0 * dz = 2 pi / N``.  Amplitudes are normalized as
``sum |c|^2 dp = 1`` and the transform pair is

    psi(z) = (2 pi)^(-1/2) sum_j c(p_j) exp(i p_j k0 z) dp

evaluated with FFTs.  The mirror surface sits at ``z = 0``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import interp1d

log = logging.getLogger(__name__)

MIN_POINTS = 64
MIN_PMAX = 4.0


@dataclass(frozen=True)
class MomentumGrid:
    n_points: int
    p_max: float
    k0: float = 2 * np.pi / 795e-9

    @property
    def dp(self) -> float:
        return 2 * self.p_max / self.n_points

    @property
    def p(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.n_points // 2) * self.dp

    @property
    def dz(self) -> float:
        """Position spacing in metres."""
        return np.pi / (self.p_max * self.k0)

    @property
    def z(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.n_points // 2) * self.dz

    def index_shift(self, q: float) -> tuple[int, float]:
        """Nearest whole number of grid steps for a kick ``q`` and the rounding residual."""
        steps = int(np.rint(q / self.dp))
        return steps, q - steps * self.dp


def make_grid(n_points: int, p_max: float, k0: float = 2 * np.pi / 795e-9) -> MomentumGrid:
    if n_points < MIN_POINTS:
        raise ValueError(f"n_points too small: {n_points} < {MIN_POINTS}")
    if n_points % 2:
        raise ValueError("n_points must be even")
    if p_max < MIN_PMAX:
        raise ValueError(f"p_max too small: {p_max} < {MIN_PMAX} hbar k0 (kicks would alias)")
    return MomentumGrid(int(n_points), float(p_max), float(k0))


def to_position(grid: MomentumGrid, c: np.ndarray) -> np.ndarray:
    """Momentum amplitudes -> position amplitudes (last axis), ``sum |psi|^2 k0 dz = 1``."""
    n = grid.n_points
    shifted = np.fft.ifftshift(c, axes=-1)
    psi = np.fft.ifft(shifted, axis=-1) * (n * grid.dp / np.sqrt(2 * np.pi))
    return np.fft.fftshift(psi, axes=-1)


def to_momentum(grid: MomentumGrid, psi: np.ndarray) -> np.ndarray:
    dz_scaled = np.pi / grid.p_max
    shifted = np.fft.ifftshift(psi, axes=-1)
    c = np.fft.fft(shifted, axis=-1) * (dz_scaled / np.sqrt(2 * np.pi))
    return np.fft.fftshift(c, axes=-1)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Wavepacket:
    grid: MomentumGrid
    amplitudes: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.grid.n_points,):
            raise ValueError("amplitude array does not match grid")
        object.__setattr__(self, "amplitudes", _readonly(a))

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dp)

    def position_amplitudes(self) -> np.ndarray:
        return to_position(self.grid, self.amplitudes)

    def mean_momentum(self) -> float:
        return float(np.sum(self.grid.p * np.abs(self.amplitudes) ** 2) * self.grid.dp)

    def mean_position(self) -> float:
        """<z> in metres."""
        rho = np.abs(self.position_amplitudes()) ** 2
        return float(np.sum(self.grid.z * rho) / np.sum(rho))

    def probability_behind_mirror(self) -> float:
        rho = np.abs(self.position_amplitudes()) ** 2
        return float(rho[self.grid.z < 0].sum() / rho.sum())


@dataclass(frozen=True)
class MixedState:
    """Weighted ensemble of normalized pure states on one grid.

    ``amplitudes`` has one row per member.  ``labels`` records how each member
    was produced (e.g. ``("s", u)``); ``alpha`` is the normalization constant
    of the channel that produced the ensemble.
    """

    grid: MomentumGrid
    amplitudes: np.ndarray
    weights: np.ndarray
    alpha: float = 1.0
    labels: tuple = ()

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.amplitudes, dtype=complex))
        w = np.asarray(self.weights, dtype=float)
        if a.shape[1] != self.grid.n_points or w.shape != (a.shape[0],):
            raise ValueError("member amplitudes and weights are inconsistent")
        if np.any(w < 0):
            raise ValueError("negative ensemble weight")
        if abs(w.sum() - 1) > 1e-10:
            raise ValueError(f"ensemble weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "amplitudes", _readonly(a))
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def pure(cls, psi: Wavepacket) -> "MixedState":
        return cls(psi.grid, psi.amplitudes[None, :], np.ones(1), labels=(("pure", 0.0),))

    def __len__(self):
        return len(self.weights)

    def member(self, i: int) -> Wavepacket:
        return Wavepacket(self.grid, self.amplitudes[i])

    def member_norms(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1) * self.grid.dp

    def trace(self) -> float:
        return float(self.weights @ self.member_norms())

    def with_amplitudes(self, amplitudes: np.ndarray) -> "MixedState":
        return MixedState(self.grid, amplitudes, self.weights, self.alpha, self.labels)


@dataclass(frozen=True)
class WavepacketSpec:
    """Initial transverse wavepacket.

    ``shape`` is ``"gaussian"`` (rms momentum width ``sigma_p`` in hbar k0) or
    ``"measured"`` (``table_p``/``table_density`` tabulate |f(p)|^2).
    ``phase`` is ``"flat"`` or ``"quadratic"`` with phi_f(p) = chirp * p^2.
    """

    shape: str = "gaussian"
    sigma_p: float = 0.05
    d: float = 2.8e-6
    phase: str = "flat"
    chirp: float = 0.0
    p_center: float = 0.0
    table_p: tuple = ()
    table_density: tuple = ()

    def __post_init__(self):
        if self.shape not in ("gaussian", "measured"):
            raise ValueError(f"unknown wavepacket shape {self.shape!r}")
        if self.phase not in ("flat", "quadratic"):
            raise ValueError(f"unknown phase model {self.phase!r}")
        if self.shape == "gaussian" and not self.sigma_p > 0:
            raise ValueError("sigma_p must be positive")
        if self.shape == "measured":
            if len(self.table_p) < 2 or len(self.table_p) != len(self.table_density):
                raise ValueError("measured profile needs matching p and density tables")
            if np.any(np.asarray(self.table_density) < 0):
                raise ValueError("tabulated density must be non-negative")

    @property
    def sigma_z(self) -> float:
        """Fourier-limited rms position width in units of 1/k0."""
        return 1.0 / (2 * self.sigma_p)

    def phase_of(self, p: np.ndarray) -> np.ndarray:
        if self.phase == "flat":
            return np.zeros_like(p)
        return self.chirp * p**2


def build_wavepacket(spec: WavepacketSpec, grid: MomentumGrid) -> Wavepacket:
    p = grid.p
    if spec.shape == "gaussian":
        if spec.sigma_p < 4 * grid.dp or spec.sigma_p > grid.p_max / 4:
            raise ValueError(
                f"sigma_p={spec.sigma_p} not resolvable on grid (dp={grid.dp}, p_max={grid.p_max})"
            )
        mag = np.exp(-((p - spec.p_center) ** 2) / (4 * spec.sigma_p**2))
    else:
        tp = np.asarray(spec.table_p, dtype=float)
        if tp.min() > p[0] or tp.max() < p[-1]:
            raise ValueError("tabulated momentum profile does not cover the grid range")
        dens = interp1d(tp, np.asarray(spec.table_density, dtype=float))(p)
        mag = np.sqrt(np.clip(dens, 0, None))
    half_box = grid.n_points * grid.dz / 2
    if spec.shape == "gaussian" and abs(spec.d) + 8 * spec.sigma_z / grid.k0 > half_box:
        raise ValueError(
            f"packet at d={spec.d:.3g} m does not fit in the position box (+-{half_box:.3g} m); "
            "use more grid points"
        )
    c = mag * np.exp(-1j * p * grid.k0 * spec.d) * np.exp(1j * spec.phase_of(p))
    norm = np.sum(np.abs(c) ** 2) * grid.dp
    if norm <= 0:
        raise ValueError("wavepacket profile vanishes on the grid")
    return Wavepacket(grid, c / np.sqrt(norm))


def apply_momentum_kick(psi: Wavepacket, q: float, tol: float = 1e-9) -> Wavepacket:
    """Shift the momentum distribution by ``q`` (hbar k0): c'(p) = c(p - q).

    The shift is rounded to whole grid steps; the residual is stored in
    ``meta["kick_residual"]``.  Content pushed past the grid edge is dropped,
    and an error is raised if more than ``tol`` of the norm would be lost.
    """
    grid = psi.grid
    if abs(q) > grid.p_max / 2:
        raise ValueError(f"kick {q} exceeds p_max/2")
    steps, residual = grid.index_shift(q)
    if residual:
        log.debug("kick %.6g rounded by %.3g hbar k0", q, residual)
    c = psi.amplitudes
    out = np.zeros_like(c)
    if steps > 0:
        out[steps:] = c[:-steps]
        lost = c[-steps:]
    elif steps < 0:
        out[:steps] = c[-steps:]
        lost = c[:-steps]
    else:
        out[:] = c
        lost = c[:0]
    lost_norm = float(np.sum(np.abs(lost) ** 2) * grid.dp)
    if lost_norm > tol:
        raise ValueError(f"kick pushes {lost_norm:.3g} of the norm off the grid")
    meta = dict(psi.meta)
    meta["kick_residual"] = meta.get("kick_residual", 0.0) + residual
    return Wavepacket(grid, out, meta)


def plane_wave_factor(grid: MomentumGrid, q: np.ndarray | float) -> np.ndarray:
    """exp(i q k0 z) on the position grid; rows for array-valued ``q``."""
    q = np.asarray(q, dtype=float)
    return np.exp(1j * np.multiply.outer(q, grid.z * grid.k0))


def phase_kick(psi: Wavepacket, q: float) -> Wavepacket:
    """Apply exp(i q k0 z) in the position representation (any ``q``, no rounding).

    For a packet localized inside the position box this is the exact momentum
    translation by ``q``; for on-grid ``q`` it agrees with apply_momentum_kick.
    """
    x = psi.position_amplitudes() * plane_wave_factor(psi.grid, q)
    return Wavepacket(psi.grid, to_momentum(psi.grid, x), dict(psi.meta))


def free_phase(grid: MomentumGrid, t: float, mass: float) -> np.ndarray:
    from .params import HBAR

    if t < 0:
        raise ValueError("propagation time must be non-negative")
    omega_r = HBAR * grid.k0**2 / (2 * mass)
    return np.exp(-1j * grid.p**2 * omega_r * t)


def free_propagate(state, t: float, mass: float):
    """Free flight for time ``t``: c(p) -> c(p) exp(-i p^2 t / 2 m hbar)."""
    phase = free_phase(state.grid, t, mass)
    if isinstance(state, MixedState):
        return state.with_amplitudes(state.amplitudes * phase)
    return Wavepacket(state.grid, state.amplitudes * phase, dict(state.meta))


def momentum_density(state) -> np.ndarray:
    """Momentum probability density per unit hbar k0 (integrates to 1 with dp)."""
    if isinstance(state, MixedState):
        return state.weights @ (np.abs(state.amplitudes) ** 2)
    return np.abs(state.amplitudes) ** 2


def clip_to_mirror(psi: Wavepacket) -> tuple[Wavepacket, float]:
    """Remove the part of the packet behind the mirror (z < 0) and renormalize.

    Returns the clipped packet and the removed probability.
    """
    x = psi.position_amplitudes()
    behind = psi.grid.z < 0
    rho = np.abs(x) ** 2
    lost = float(rho[behind].sum() / rho.sum())
    if lost == 0.0:
        return psi, 0.0
    if lost >= 1.0 - 1e-12:
        raise ValueError("wavepacket lies entirely behind the mirror")
    x = np.where(behind, 0.0, x)
    c = to_momentum(psi.grid, x)
    c = c / np.sqrt(np.sum(np.abs(c) ** 2) * psi.grid.dp)
    meta = dict(psi.meta)
    meta["mirror_clip"] = lost
    return Wavepacket(psi.grid, c, meta), lost
