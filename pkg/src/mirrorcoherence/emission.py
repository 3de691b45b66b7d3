"""Spontaneous emission next to a mirror.

Two models live here:

* the quantum channel that maps the incoming motional state onto a weighted
  ensemble of recoil superpositions, one s-polarized and one p-polarized
  member per direction node ``u`` (``u`` is the cosine of the emission angle
  with respect to the mirror normal, the recoil along z is ``-/+ hbar k0 u``);
* the semiclassical picture in which the atom and its mirror image are disks
  of the resonant absorption cross section, and the coherent fraction is the
  overlap of the two disks seen along the emission direction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .beam import AveragingSpec, beam_samples
from .params import ExperimentParams
from .states import MixedState, Wavepacket, plane_wave_factor, to_momentum

log = logging.getLogger(__name__)

DROP_NORM = 1e-14
SUPPORT_TOL = 1e-6

DIPOLE_PREFACTOR = 3.0 / 8.0


def dipole_pattern(u):
    """Recoil distribution along the mirror normal, (3/8)(1+u^2) on [-1, 1]."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1, DIPOLE_PREFACTOR * (1 + u**2), 0.0)


def dipole_bin_masses(centers, width: float) -> np.ndarray:
    """Exact integral of the recoil distribution over bins [c - width/2, c + width/2]."""
    centers = np.asarray(centers, dtype=float)

    def cdf(q):
        q = np.clip(q, -1.0, 1.0)
        return DIPOLE_PREFACTOR * (q + q**3 / 3)

    return cdf(centers + width / 2) - cdf(centers - width / 2)


@dataclass(frozen=True)
class EmissionConfig:
    """Mirror reflectivities and the u-quadrature.

    Defaults describe an ideal conductor: r_s = -1 for the TE mode, r_p = +1
    for the TM mode.  ``n_u`` is a floor: emit_mixture raises the node count
    when the packet sits far enough from the mirror that exp(2 i k0 u z)
    oscillates faster than ``n_u`` nodes resolve (``adaptive=False`` disables).
    """

    rs: complex = -1.0
    rp: complex = 1.0
    n_u: int = 64
    rule: str = "gauss-legendre"
    adaptive: bool = True

    def __post_init__(self):
        object.__setattr__(self, "rs", complex(self.rs))
        object.__setattr__(self, "rp", complex(self.rp))
        if abs(self.rs) > 1 + 1e-12 or abs(self.rp) > 1 + 1e-12:
            raise ValueError("|r_s| and |r_p| must not exceed 1")
        if self.n_u < 16:
            raise ValueError("n_u must be >= 16")
        if self.rule not in ("gauss-legendre", "midpoint"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")


def u_nodes(n: int, rule: str = "gauss-legendre") -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights on (0, 1]."""
    if rule == "gauss-legendre":
        x, w = np.polynomial.legendre.leggauss(n)
        return (x + 1) / 2, w / 2
    u = (np.arange(n) + 0.5) / n
    return u, np.full(n, 1.0 / n)


def required_nodes(psi: Wavepacket, floor: int) -> int:
    """Node count that resolves exp(2 i k0 u z) across the packet's extent."""
    rho = np.abs(psi.position_amplitudes()) ** 2
    rho /= rho.sum()
    z = psi.grid.z
    mean = rho @ z
    rms = np.sqrt(rho @ (z - mean) ** 2)
    z_far = abs(mean) + 5 * rms
    return max(floor, int(np.ceil(0.6 * psi.grid.k0 * z_far)) + 32)


def emit_mixture(psi0: Wavepacket, cfg: EmissionConfig = EmissionConfig()) -> MixedState:
    """Post-emission motional state as an ensemble of recoil superpositions.

    For every node u_j the members are

        psi_s ~ (conj(r_s) e^{+i k0 u z} + e^{-i k0 u z}) psi0,  raw weight 3/8 w_j |psi_s|^2
        psi_p ~ (-conj(r_p) e^{+i k0 u z} + e^{-i k0 u z}) psi0, raw weight 3/8 u_j^2 w_j |psi_p|^2

    evaluated in the position representation, so the recoil kicks are exact
    for any u.  Members are renormalized; ``alpha`` is 1 / sum(raw weights).
    """
    grid = psi0.grid
    behind = psi0.probability_behind_mirror()
    if behind > SUPPORT_TOL:
        raise ValueError(f"initial packet has {behind:.3g} probability behind the mirror")

    n = required_nodes(psi0, cfg.n_u) if cfg.adaptive else cfg.n_u
    u, w = u_nodes(n, cfg.rule)
    x0 = psi0.position_amplitudes()
    up = plane_wave_factor(grid, u) * x0
    down = plane_wave_factor(grid, -u) * x0

    branches = (
        ("s", np.conj(cfg.rs), DIPOLE_PREFACTOR * w),
        ("p", -np.conj(cfg.rp), DIPOLE_PREFACTOR * u**2 * w),
    )
    amps, raw, labels = [], [], []
    for name, r, kernel in branches:
        members = to_momentum(grid, r * up + down)
        norms = np.sum(np.abs(members) ** 2, axis=1) * grid.dp
        keep = norms >= DROP_NORM
        if not keep.all():
            log.info(
                "dropping %d %s-members with vanishing norm (weight %.3g)",
                (~keep).sum(), name, float(kernel[~keep] @ norms[~keep]),
            )
        amps.append(members[keep] / np.sqrt(norms[keep])[:, None])
        raw.append(kernel[keep] * norms[keep])
        labels.extend((name, float(uj)) for uj in u[keep])

    raw = np.concatenate(raw)
    total = raw.sum()
    if not total > 0:
        raise ValueError("emission channel annihilated the state")
    return MixedState(grid, np.concatenate(amps), raw / total, alpha=1.0 / total, labels=labels)


def coherence_vs_distance_pointatom(d: float, du: float, k0: float = 2 * np.pi / 795e-9) -> float:
    """|sinc(k0 du d)|: point-atom coherence averaged over a u-bin of width du at u = 1."""
    if d < 0:
        raise ValueError("distance must be non-negative")
    if not 0 < du <= 1:
        raise ValueError("du must lie in (0, 1]")
    return float(abs(np.sinc(k0 * du * d / np.pi)))


@dataclass(frozen=True)
class SemiclassicalConfig:
    """Atom modelled as a disk with the resonant cross section 3 lambda^2 / 2 pi."""

    wavelength: float = 795e-9

    @property
    def cross_section(self) -> float:
        return 3 * self.wavelength**2 / (2 * np.pi)

    @property
    def radius(self) -> float:
        return float(np.sqrt(self.cross_section / np.pi))


def disk_overlap_fraction(d, theta, sc: SemiclassicalConfig = SemiclassicalConfig()):
    """Projected overlap of the atom disk and its mirror image, as a fraction of one disk.

    Seen along polar angle ``theta`` from the mirror normal, the two disks
    (radius r_a) are separated by s = 2 d sin(theta).
    """
    d = np.asarray(d, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    if np.any((theta < 0) | (theta > np.pi / 2 + 1e-12)):
        raise ValueError("theta must lie in [0, pi/2]")
    r = sc.radius
    h = np.clip(d * np.sin(theta) / r, 0.0, 1.0)  # half separation / radius
    frac = (2 * np.arccos(h) - 2 * h * np.sqrt(1 - h**2)) / np.pi
    return frac if frac.ndim else float(frac)


def semiclassical_visibility(
    d_mean: float,
    params: ExperimentParams,
    bin_width: float = 1 / 8,
    averaging: AveragingSpec | None = AveragingSpec(),
    n_u: int = 256,
    seed: int = 0,
) -> float:
    """Coherent fraction in the outermost momentum bin from the disk-overlap picture.

    Averages the overlap over emission directions with u = cos(theta) in
    [1 - bin_width, 1], weighted by the dipole pattern, and over atom
    positions across the beam (``averaging=None`` gives a point beam at
    ``d_mean``).
    """
    if d_mean < 0:
        raise ValueError("mean distance must be non-negative")
    sc = SemiclassicalConfig(params.wavelength)
    x, w = np.polynomial.legendre.leggauss(n_u)
    u = 1 - bin_width * (x + 1) / 2
    w = w * dipole_pattern(u)
    w /= w.sum()
    theta = np.arccos(np.clip(u, 0, 1))
    if averaging is None:
        samples_d, samples_w = np.array([d_mean]), np.ones(1)
    else:
        # the overlap varies on the scale of r_a, far finer than the quantum sampling
        dense = AveragingSpec(max(averaging.n_positions, 512), averaging.jitter)
        bs = beam_samples(d_mean, params.beam_width, dense, seed)
        samples_d, samples_w = bs.distances, bs.weights
    overlap = disk_overlap_fraction(samples_d[:, None], theta[None, :], sc)
    return float(samples_w @ (overlap @ w))
