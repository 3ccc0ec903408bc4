"""Tune the S-leg pitch so the reference layout cancels the in-plane field at
the trap centre, then print the resulting metrics at 300 and 500 mA.

The half-turn symmetry of the layout already zeroes Bz there; the pitch trims
By and what remains is the small Bx left by the return branches.

    python scripts/calibrate_reference_geometry.py [--length 800] [--width 10] [--offset 40]
"""

import argparse

from scipy.optimize import brentq

from gradkit.magnetostatics import field_at
from gradkit.optimizer import SGeometryParams, build_geometry, evaluate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=float, default=800.0, help="S-leg length, um")
    ap.add_argument("--width", type=float, default=10.0, help="trace width, um")
    ap.add_argument("--offset", type=float, default=40.0, help="return path offset, um")
    ap.add_argument("--bracket", type=float, nargs=2, default=(30.0, 120.0),
                    help="pitch search interval, um")
    args = ap.parse_args()

    def by(pitch):
        p = SGeometryParams(args.length, pitch, args.width, args.offset, 1)
        return field_at(build_geometry(p, 300.0), (0.0, 0.0, p.trap_height))[1]

    pitch = brentq(by, *args.bracket, xtol=1e-6)
    print(f"pitch with By = 0: {pitch:.4f} um")
    p = SGeometryParams(args.length, round(pitch, 2), args.width, args.offset, 1)
    for current in (300.0, 500.0):
        m = evaluate(p, current)
        print(f"{current:g} mA: {m.gradient:.2f} G/mm, residual {m.residual:.2f} mG, "
              f"power {m.power:g} mW, feasible={m.feasible}")


if __name__ == "__main__":
    main()
