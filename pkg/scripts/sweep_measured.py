"""Measured rates along the dominant face next to the Gaussian rates.

Usage: python3 scripts/sweep_measured.py [STEPS [SOURCE]]
"""

import sys

from mdgs.harness import SourceSpec, sweep_dominant_face
from mdgs.lattice import G_OPT, redundancy_bits
from mdgs.region import DistortionTriple


def main(argv):
    steps = int(argv[0]) if argv else 5
    source = SourceSpec.parse(argv[1] if len(argv) > 1 else "gaussian")
    d = DistortionTriple(1.0, 0.1, 0.1, 0.05)
    red = redundancy_bits(G_OPT[1])
    print(f"scalar redundancy per stage {red:.7f} bits")
    print(f"{'sigma2_T3':>12} {'R1G':>9} {'R1':>9} {'R2G':>9} {'R2':>9} {'excess':>9}")
    for r in sweep_dominant_face(d, steps, measure=True, source=source):
        excess = r["R1_measured"] + r["R2_measured"] - r["sum"]
        print(f"{r['sigma2_T3']:>12.5g} {r['R1G']:9.5f} {r['R1_measured']:9.5f} "
              f"{r['R2G']:9.5f} {r['R2_measured']:9.5f} {excess:9.5f}")


if __name__ == "__main__":
    main(sys.argv[1:])
