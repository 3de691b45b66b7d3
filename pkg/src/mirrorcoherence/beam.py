"""Transverse beam profile sampling shared by the quantum and overlap models."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AveragingSpec:
    """How the finite atomic beam is averaged.

    Atom centre distances are stratified uniformly over the beam width (one
    sample per stratum, at the midpoint unless ``jitter``).  Optional initial
    momentum classes add Gauss-Hermite distributed centre momenta with rms
    ``momentum_spread`` (hbar k0) on top of each packet's own spread.
    """

    n_positions: int = 24
    jitter: bool = False
    momentum_classes: int = 1
    momentum_spread: float = 0.0

    def __post_init__(self):
        if self.n_positions < 1:
            raise ValueError("n_positions must be >= 1")
        if self.momentum_classes < 1:
            raise ValueError("momentum_classes must be >= 1")
        if self.momentum_spread < 0:
            raise ValueError("momentum_spread must be non-negative")


@dataclass(frozen=True)
class BeamSamples:
    distances: np.ndarray
    weights: np.ndarray
    shadow_fraction: float


def beam_samples(d_mean: float, width: float, spec: AveragingSpec, seed: int = 0) -> BeamSamples:
    """Atom-mirror distances across a uniform beam of full ``width`` centred at ``d_mean``.

    The part of the beam behind the mirror surface (d < 0) is removed; its
    share is returned as ``shadow_fraction``.  Weights of the remaining samples
    sum to one.
    """
    if d_mean < 0:
        raise ValueError("mean distance must be non-negative")
    if width == 0 or spec.n_positions == 1:
        return BeamSamples(np.array([d_mean]), np.ones(1), 0.0)
    lo, hi = d_mean - width / 2, d_mean + width / 2
    shadow = max(0.0, -lo) / width
    lo = max(lo, 0.0)
    if shadow > 0:
        log.info("mirror shadow removes %.3f of the beam", shadow)
    n = spec.n_positions
    edges = np.linspace(lo, hi, n + 1)
    if spec.jitter:
        frac = np.random.default_rng(seed).random(n)
    else:
        frac = np.full(n, 0.5)
    d = edges[:-1] + frac * np.diff(edges)
    return BeamSamples(d, np.full(n, 1.0 / n), shadow)


def momentum_classes(spec: AveragingSpec) -> tuple[np.ndarray, np.ndarray]:
    """Centre-momentum offsets and weights (Gauss-Hermite)."""
    if spec.momentum_classes == 1 or spec.momentum_spread == 0:
        return np.zeros(1), np.ones(1)
    x, w = np.polynomial.hermite_e.hermegauss(spec.momentum_classes)
    return x * spec.momentum_spread, w / w.sum()
