"""Region quantities, codec parameters and the dominant face for one triple.

Usage: python3 scripts/region_report.py [VAR D1 D2 D3]
"""

import sys

from mdgs.harness import dumps, sweep_dominant_face
from mdgs.region import DistortionTriple, psi, split_params, sum_rate, vertices


def main(argv):
    d = DistortionTriple(*map(float, argv)) if argv else DistortionTriple(1.0, 0.1, 0.1, 0.05)
    v1, v2 = vertices(d)
    print(f"psi        {psi(d):.12f}")
    print(f"sum rate   {sum_rate(d):.12f} bits")
    print(f"V1         ({v1.r1:.9f}, {v1.r2:.9f})")
    print(f"V2         ({v2.r1:.9f}, {v2.r2:.9f})")
    print("balanced split parameters:")
    print(dumps(split_params(d, "balanced").report()))
    print("dominant face (theory):")
    print(f"{'sigma2_T3':>14} {'R1G':>12} {'R2G':>12} {'sum':>14}")
    for r in sweep_dominant_face(d, 9):
        print(f"{r['sigma2_T3']:>14.6g} {r['R1G']:>12.9f} {r['R2G']:>12.9f} {r['sum']:>14.11f}")


if __name__ == "__main__":
    main(sys.argv[1:])
