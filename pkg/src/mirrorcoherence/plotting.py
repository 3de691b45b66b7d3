"""Optional SVG figures for the CLI (needs matplotlib)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SVG_META = {"Date": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)


def plot_emit_pattern(path, p, pre, post, centers, kernel, reference):
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
    a.plot(p, pre, label="before emission")
    a.plot(p, post, label="after emission")
    a.set_xlim(-2, 2)
    a.set_xlabel("p [hbar k0]")
    a.set_ylabel("density")
    a.legend()
    b.step(centers, kernel, where="mid", label="deconvolved")
    b.step(centers, reference, where="mid", ls="--", label="(3/8)(1+u^2)")
    b.set_xlim(-1.5, 1.5)
    b.set_xlabel("recoil [hbar k0]")
    b.legend()
    _save(fig, path)


def plot_fringes(path, series, bins):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i in bins:
        ax.plot(series.phases, series.bin_series(i), "o-", label=f"p = {series.bin_centers[i]:+.3f}")
    ax.set_xlabel("phi_B [rad]")
    ax.set_ylabel("counts")
    ax.legend()
    _save(fig, path)


def plot_visibility_curves(path, quantum, semi):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    d = quantum.d_mean * 1e6
    ax.errorbar(
        d, quantum.visibility,
        yerr=[quantum.visibility - quantum.ci_lo, quantum.ci_hi - quantum.visibility],
        fmt="o-", label="quantum",
    )
    ax.plot(semi.d_mean * 1e6, semi.visibility, "-", label="disk overlap")
    ax.set_xlabel("mean distance [um]")
    ax.set_ylabel("visibility")
    ax.legend()
    _save(fig, path)


def plot_momentum_visibility(path, mv):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ok = np.isfinite(mv.visibility)
    ax.errorbar(
        mv.bin_centers[ok], mv.visibility[ok],
        yerr=[mv.visibility[ok] - mv.ci_lo[ok], mv.ci_hi[ok] - mv.visibility[ok]],
        fmt="o", label="visibility",
    )
    ax2 = ax.twinx()
    ax2.plot(mv.bin_centers, mv.acceptance, color="gray", label="grating acceptance")
    ax.set_xlim(-2, 2)
    ax.set_xlabel("p [hbar k0]")
    ax.set_ylabel("visibility")
    ax2.set_ylabel("|r|^2")
    _save(fig, path)
