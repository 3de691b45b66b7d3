"""Command-line runner: ``mirrorcoherence <command> [--config PATH] [--out DIR] ...``.

Every command writes CSV files whose first line is a comment carrying the
tool version and a hash of the fully resolved config, so that a result can be
traced back to its inputs.  Identical config and seed give byte-identical
CSVs.  Exit codes: 0 success, 2 bad config or violated precondition,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

from . import __version__
from .analysis import (
    check_phases,
    complementary_bin,
    deconvolve,
    fit_fringe,
    fwhm,
    headline_visibility,
    momentum_resolved_visibility,
    populated_bins,
    rebin_centered,
    visibility_vs_distance,
)
from .config import ConfigError, ScenarioConfig, canonical_json, default_document, load_config
from .emission import dipole_bin_masses, emit_mixture
from .interferometer import FringeSeries, beam_average
from .states import build_wavepacket, clip_to_mirror, momentum_density

log = logging.getLogger("mirrorcoherence")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
FRINGE_COLUMNS = ["phi_B_rad", "bin_center_hbar_k0", "counts"]
VISIBILITY_COLUMNS = ["d_mean_m", "V", "CI95_lo", "CI95_hi", "model"]
FIT_COLUMNS = [
    "bin_center_hbar_k0", "fitted", "populated", "N0", "NA", "phi0_rad", "V", "sigma_V",
    "CI95_lo", "CI95_hi", "coef_a", "coef_b",
    "cov_00", "cov_01", "cov_02", "cov_11", "cov_12", "cov_22",
]


class NumericalError(RuntimeError):
    """A computation produced non-finite or inconsistent numbers (exit code 3)."""


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: str, columns, rows, header: str):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    log.info("wrote %s", path)


def write_summary(path: str, items: dict, header: str):
    write_csv(path, ["key", "value"], list(items.items()), header)


def header_line(cfg: ScenarioConfig | None, command: str, extra: str = "") -> str:
    h = cfg.config_hash if cfg is not None else "none"
    line = f"mirrorcoherence {__version__} command={command} config_sha256={h}"
    return f"{line} {extra}".rstrip()


def require_finite(name: str, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(np.asarray(a, dtype=float))):
            raise NumericalError(f"non-finite values in {name}")


@contextmanager
def worker_pool(threads: int):
    if threads <= 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield pool


def _fit_row(center, fit, populated):
    if fit is None:
        return [center, 0, populated] + [math.nan] * (len(FIT_COLUMNS) - 3)
    cov = fit.cov
    return [
        center, 1, populated, fit.n0, fit.na, fit.phi0, fit.visibility, fit.sigma_v,
        fit.ci95[0], fit.ci95[1], fit.coef[1], fit.coef[2],
        cov[0, 0], cov[0, 1], cov[0, 2], cov[1, 1], cov[1, 2], cov[2, 2],
    ]


def fit_all_bins(series: FringeSeries, poisson: bool, count_floor: float, populated=None):
    """Fit every bin whose mean counts reach ``count_floor``; others give None."""
    fits = []
    for i in range(len(series.bin_centers)):
        y = series.bin_series(i)
        if y.mean() < count_floor or y.mean() <= 0:
            fits.append(None)
        else:
            fits.append(fit_fringe(series.phases, y, poisson=poisson))
    flags = np.zeros(len(fits), dtype=bool)
    if populated is not None:
        flags[populated] = True
    rows = [_fit_row(c, f, p) for c, f, p in zip(series.bin_centers, fits, flags)]
    return fits, rows


def _wrap_angle(a: float) -> float:
    return float(np.angle(np.exp(1j * a)))


# ---------------------------------------------------------------- commands


def cmd_defaults(args, cfg):
    doc = default_document()
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "defaults.json"), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_emit_pattern(args, cfg: ScenarioConfig):
    sc = cfg.scenario
    grid = sc.grid()
    psi0 = build_wavepacket(sc.packet, grid)
    clipped = 0.0
    if psi0.probability_behind_mirror() > 1e-6:
        psi0, clipped = clip_to_mirror(psi0)
    state = emit_mixture(psi0, sc.emission)
    pre, post = momentum_density(psi0), momentum_density(state)
    require_finite("momentum densities", pre, post)

    width = sc.detector.bin_width
    centers, pre_b = rebin_centered(pre, grid, width)
    _, post_b = rebin_centered(post, grid, width)
    kernel = deconvolve(post_b, pre_b)
    reference = dipole_bin_masses(centers, width)
    l2 = float(np.linalg.norm(kernel - reference) / np.linalg.norm(reference))
    require_finite("deconvolved kernel", kernel)

    head = header_line(cfg, "emit-pattern")
    write_csv(
        os.path.join(args.out, "emit_pattern.csv"),
        ["p_hbar_k0", "pre_density", "post_density"],
        zip(grid.p, pre, post),
        head,
    )
    write_csv(
        os.path.join(args.out, "emit_kernel.csv"),
        ["bin_center_hbar_k0", "pre_probability", "post_probability", "kernel", "dipole_reference"],
        zip(centers, pre_b, post_b, kernel, reference),
        head,
    )
    write_summary(
        os.path.join(args.out, "emit_summary.csv"),
        {
            "d_m": sc.params.d_mean,
            "mirror_clip_fraction": clipped,
            "n_members": len(state),
            "alpha": state.alpha,
            "pre_integral": float(pre.sum() * grid.dp),
            "post_integral": float(post.sum() * grid.dp),
            "post_rms_hbar_k0": float(np.sqrt(np.sum(grid.p**2 * post) * grid.dp)),
            "kernel_l2_error_vs_dipole": l2,
        },
        head,
    )
    if args.plot:
        from .plotting import plot_emit_pattern

        plot_emit_pattern(os.path.join(args.out, "emit_pattern.svg"), grid.p, pre, post, centers, kernel, reference)


def _series_rows(series: FringeSeries):
    for k, phi in enumerate(series.phases):
        for j, c in enumerate(series.bin_centers):
            yield phi, c, series.counts[k, j]


def cmd_fringe(args, cfg: ScenarioConfig):
    sc = cfg.scenario
    phases = check_phases(cfg.scan.phases())
    with worker_pool(args.threads) as pool:
        series = beam_average(sc, phases, pool)
    require_finite("fringe counts", series.counts)
    populated = populated_bins(series, cfg.fit.floor_fraction)
    fits, rows = fit_all_bins(series, cfg.fit.poisson, cfg.fit.count_floor, populated)
    best, (f_lo, f_hi), i_best = headline_visibility(series, cfg.fit.floor_fraction)
    lo, hi = int(populated[0]), int(populated[-1])
    partner = complementary_bin(series, i_best, 2 * sc.splitter().kB / sc.params.k0)
    f_partner = fit_fringe(phases, series.bin_series(partner), poisson=cfg.fit.poisson)
    fitted_v = [f.visibility for f in fits if f is not None]

    head = header_line(cfg, "fringe")
    write_csv(os.path.join(args.out, "fringe.csv"), FRINGE_COLUMNS, _series_rows(series), head)
    write_csv(os.path.join(args.out, "fringe_fits.csv"), FIT_COLUMNS, rows, head)
    write_summary(
        os.path.join(args.out, "fringe_summary.csv"),
        {
            "d_mean_m": sc.params.d_mean,
            "beam_width_m": sc.params.beam_width,
            "shadow_fraction": series.metadata["shadow_fraction"],
            "n_slices": series.metadata["n_slices"],
            "headline_bin_center_hbar_k0": series.bin_centers[i_best],
            "V": best.visibility,
            "CI95_lo": best.ci95[0],
            "CI95_hi": best.ci95[1],
            "outer_low_bin_center_hbar_k0": series.bin_centers[lo],
            "V_outer_low": f_lo.visibility,
            "outer_high_bin_center_hbar_k0": series.bin_centers[hi],
            "V_outer_high": f_hi.visibility,
            "outer_phase_difference_rad": abs(_wrap_angle(f_lo.phi0 - f_hi.phi0)),
            "partner_bin_center_hbar_k0": series.bin_centers[partner],
            "V_partner": f_partner.visibility,
            "partner_phase_difference_rad": abs(_wrap_angle(best.phi0 - f_partner.phi0)),
            "n_fitted_bins": len(fitted_v),
            "max_V_fitted_bins": max(fitted_v),
        },
        head,
    )
    if args.plot:
        from .plotting import plot_fringes

        plot_fringes(os.path.join(args.out, "fringe.svg"), series, [lo, hi])


def cmd_scan_distance(args, cfg: ScenarioConfig):
    sc = cfg.scenario
    phases = check_phases(cfg.scan.phases())
    with worker_pool(args.threads) as pool:
        quantum, semi = visibility_vs_distance(cfg.scan.d_means_m, sc, phases, pool)
    require_finite("visibility curves", quantum.visibility, semi.visibility)
    rows = []
    for curve in (quantum, semi):
        for d, v, lo, hi in zip(curve.d_mean, curve.visibility, curve.ci_lo, curve.ci_hi):
            rows.append([d, v, lo, hi, curve.model])
    head = header_line(cfg, "scan-distance")
    write_csv(os.path.join(args.out, "visibility.csv"), VISIBILITY_COLUMNS, rows, head)
    hq, hs = quantum.half_distance(), semi.half_distance()
    write_summary(
        os.path.join(args.out, "visibility_summary.csv"),
        {
            "half_distance_quantum_m": hq,
            "half_distance_semiclassical_m": hs,
            "half_distance_ratio": hq / hs if hs > 0 else math.nan,
            "V_quantum_max": float(quantum.visibility.max()),
            "V_quantum_last_over_max": float(quantum.visibility[-1] / quantum.visibility.max())
            if quantum.visibility.max() > 0 else math.nan,
        },
        head,
    )
    if args.plot:
        from .plotting import plot_visibility_curves

        plot_visibility_curves(os.path.join(args.out, "visibility.svg"), quantum, semi)


def cmd_momentum_visibility(args, cfg: ScenarioConfig):
    sc = cfg.scenario
    phases = check_phases(cfg.scan.phases())
    with worker_pool(args.threads) as pool:
        mv, series = momentum_resolved_visibility(sc, phases, cfg.fit.floor_fraction, pool)
    require_finite("acceptance", mv.acceptance)
    head = header_line(cfg, "momentum-visibility")
    write_csv(
        os.path.join(args.out, "momentum_visibility.csv"),
        ["bin_center_hbar_k0", "V", "CI95_lo", "CI95_hi", "acceptance", "populated"],
        zip(mv.bin_centers, mv.visibility, mv.ci_lo, mv.ci_hi, mv.acceptance, mv.populated),
        head,
    )
    idx = np.nonzero(mv.populated)[0]
    write_summary(
        os.path.join(args.out, "momentum_summary.csv"),
        {
            "d_mean_m": sc.params.d_mean,
            "argmax_bin_center_hbar_k0": mv.bin_centers[mv.argmax()],
            "outer_low_bin_center_hbar_k0": mv.bin_centers[idx[0]],
            "outer_high_bin_center_hbar_k0": mv.bin_centers[idx[-1]],
            "fwhm_V_hbar_k0": fwhm(mv.bin_centers, mv.visibility),
            "fwhm_acceptance_hbar_k0": fwhm(mv.bin_centers, mv.acceptance),
        },
        head,
    )
    if args.plot:
        from .plotting import plot_momentum_visibility

        plot_momentum_visibility(os.path.join(args.out, "momentum_visibility.svg"), mv)


def read_fringe_csv(path: str) -> FringeSeries:
    """Parse a fringe CSV (comment lines start with '#')."""
    try:
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != FRINGE_COLUMNS:
        raise ConfigError(f"{path}: expected columns {','.join(FRINGE_COLUMNS)}, got {header}")
    try:
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
    if data.size == 0 or data.shape[1] != 3:
        raise ConfigError(f"{path}: no data rows")
    phases = np.unique(data[:, 0])
    centers = np.unique(data[:, 1])
    counts = np.full((len(phases), len(centers)), np.nan)
    counts[np.searchsorted(phases, data[:, 0]), np.searchsorted(centers, data[:, 1])] = data[:, 2]
    if np.isnan(counts).any() or len(data) != counts.size:
        raise ConfigError(f"{path}: every phase needs exactly one row per bin")
    return FringeSeries(phases, centers, counts)


def cmd_fit(args, cfg: ScenarioConfig):
    series = read_fringe_csv(args.input)
    check_phases(series.phases)
    populated = populated_bins(series, cfg.fit.floor_fraction)
    _, rows = fit_all_bins(series, cfg.fit.poisson, cfg.fit.count_floor, populated)
    head = header_line(cfg, "fit", f"input={os.path.basename(args.input)}")
    write_csv(os.path.join(args.out, "fits.csv"), FIT_COLUMNS, rows, head)


COMMANDS = {
    "emit-pattern": (cmd_emit_pattern, "pre/post-emission momentum densities and deconvolved recoil kernel"),
    "fringe": (cmd_fringe, "beam-averaged fringes per momentum bin with fits"),
    "scan-distance": (cmd_scan_distance, "visibility versus mean mirror distance, both models"),
    "momentum-visibility": (cmd_momentum_visibility, "visibility per momentum bin with the grating acceptance"),
    "fit": (cmd_fit, "fit an existing fringe CSV"),
    "defaults": (cmd_defaults, "print the default config"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config (defaults if omitted)")
    common.add_argument("--out", metavar="DIR", help="output directory (default: current)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for beam slices")
    common.add_argument("--plot", action="store_true", help="also write SVG plots")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mirrorcoherence", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "fit":
            p.add_argument("input", metavar="FILE", help="fringe CSV to fit")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    func = COMMANDS[args.command][0]
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = None if args.command == "defaults" else load_config(args.config, args.seed)
        if args.command != "defaults":
            args.out = args.out or "."
            os.makedirs(args.out, exist_ok=True)
            if args.verbose:
                log.info("resolved config: %s", canonical_json(cfg.document))
        func(args, cfg)
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:  # ConfigError is a ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
