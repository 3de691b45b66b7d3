"""Coherence of a single spontaneous-emission recoil next to a mirror.

The package simulates an atom that emits one photon close to a mirror, reads
out the resulting momentum superposition with a Bragg grating, and compares
the fringe visibility with a disk-overlap picture.
"""
from .analysis import (
    FitResult,
    MomentumVisibility,
    VisibilityCurve,
    deconvolve,
    fit_fringe,
    headline_visibility,
    momentum_resolved_visibility,
    visibility_vs_distance,
)
from .beam import AveragingSpec, beam_samples
from .emission import (
    EmissionConfig,
    coherence_vs_distance_pointatom,
    disk_overlap_fraction,
    emit_mixture,
    semiclassical_visibility,
)
from .interferometer import (
    BraggConfig,
    BraggSplitter,
    Detector,
    FringeSeries,
    Scenario,
    beam_average,
    bragg_amplitudes,
    bragg_split,
    detect,
    run_sequence,
)
from .params import ExperimentParams
from .states import (
    MixedState,
    MomentumGrid,
    Wavepacket,
    WavepacketSpec,
    apply_momentum_kick,
    build_wavepacket,
    free_propagate,
    make_grid,
)

__version__ = "0.1.0"
