"""Point-beam visibility against the ideal single-bin envelope |sinc(k0 du d)|.

    python scripts/decay_vs_envelope.py --d-max 5e-6 --step 0.25e-6
"""
import argparse

import numpy as np

from mirrorcoherence.analysis import default_phases, visibility_vs_distance
from mirrorcoherence.emission import coherence_vs_distance_pointatom
from mirrorcoherence.interferometer import Scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d-max", type=float, default=5e-6)
    ap.add_argument("--step", type=float, default=0.25e-6)
    ap.add_argument("--n-points", type=int, default=4096)
    args = ap.parse_args()

    sc = Scenario(n_points=args.n_points).point_beam()
    d = np.arange(0, args.d_max + args.step / 2, args.step)
    quantum, _ = visibility_vs_distance(d, sc, default_phases())
    print("d_um   V_sim    envelope")
    for x, v in zip(d, quantum.visibility):
        env = coherence_vs_distance_pointatom(x, sc.detector.bin_width, sc.params.k0)
        print(f"{x * 1e6:5.2f} {v:8.4f} {env:8.4f}")


if __name__ == "__main__":
    main()
