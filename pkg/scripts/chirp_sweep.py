"""Sweep the quadratic momentum phase of the initial packet and report the
beam-averaged headline visibility at a fixed mirror distance.

    python scripts/chirp_sweep.py --d 2.8e-6 --chirps 0 250 500 750 1000
"""
import argparse
from dataclasses import replace

from mirrorcoherence.analysis import default_phases, headline_visibility
from mirrorcoherence.interferometer import Scenario, beam_average


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=float, default=2.8e-6, help="mean mirror distance (m)")
    ap.add_argument("--chirps", type=float, nargs="+", default=[0, 250, 500, 750, 1000])
    ap.add_argument("--n-points", type=int, default=4096)
    ap.add_argument("--positions", type=int, default=24, help="beam averaging positions")
    args = ap.parse_args()

    base = Scenario(n_points=args.n_points).at_distance(args.d)
    base = replace(base, averaging=replace(base.averaging, n_positions=args.positions))
    phases = default_phases()
    print("chirp  V_headline  V_low_bin  V_high_bin  sigma_V")
    for chirp in args.chirps:
        sc = replace(base, packet=replace(base.packet, phase="quadratic", chirp=chirp))
        best, (lo, hi), _ = headline_visibility(beam_average(sc, phases))
        print(f"{chirp:6g} {best.visibility:10.4f} {lo.visibility:10.4f} {hi.visibility:11.4f} {best.sigma_v:8.4f}")


if __name__ == "__main__":
    main()
