"""Quantum and semiclassical visibility versus mean mirror distance, with the
half-visibility distance of each curve.

    python scripts/distance_scan.py --positions 8 --n-points 4096
"""
import argparse
from dataclasses import replace

import numpy as np

from mirrorcoherence.analysis import default_phases, visibility_vs_distance
from mirrorcoherence.config import DEFAULT_DISTANCES
from mirrorcoherence.interferometer import Scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--distances", type=float, nargs="+", default=list(DEFAULT_DISTANCES))
    ap.add_argument("--n-points", type=int, default=4096)
    ap.add_argument("--positions", type=int, default=24)
    args = ap.parse_args()

    sc = Scenario(n_points=args.n_points)
    sc = replace(sc, averaging=replace(sc.averaging, n_positions=args.positions))
    quantum, semi = visibility_vs_distance(np.array(args.distances), sc, default_phases())
    print("d_um   V_quantum  CI95            V_semiclassical")
    for i, d in enumerate(quantum.d_mean):
        print(
            f"{d * 1e6:5.1f} {quantum.visibility[i]:9.4f}  "
            f"[{quantum.ci_lo[i]:.4f}, {quantum.ci_hi[i]:.4f}] {semi.visibility[i]:9.4f}"
        )
    hq, hs = quantum.half_distance(), semi.half_distance()
    print(f"half-visibility distance: quantum {hq * 1e6:.2f} um, semiclassical {hs * 1e6:.2f} um")


if __name__ == "__main__":
    main()
