"""Measured sum rate against the outer bound as the distortions shrink.

Usage: python3 scripts/highres_table.py [SOURCE [SAMPLES]]
"""

import sys

from mdgs.harness import SourceSpec, highres_acceptance
from mdgs.region import DistortionTriple


def main(argv):
    source = SourceSpec.parse(argv[0] if argv else "gaussian")
    n = int(argv[1]) if len(argv) > 1 else 1_000_000
    d = DistortionTriple(1.0, 0.1, 0.1, 0.05)
    rows = highres_acceptance(d, (1.0, 0.25, 0.0625, 1 / 64), source=source, n_samples=n)
    keys = ("scale", "measured_sum", "outer_sum", "excess", "budget", "vertex_excess",
            "vertex_budget", "phi_minus_psi")
    print(" ".join(f"{k:>14}" for k in keys))
    for r in rows:
        print(" ".join(f"{r[k]:>14.6g}" for k in keys))


if __name__ == "__main__":
    main(sys.argv[1:])
