"""Find the Ornstein-Uhlenbeck correlation time that gives a 10 ms echo T2.

The noise amplitude is fixed by the 632 us Ramsey T2*.  The echo T2 is not
monotonic in the correlation time (very fast noise averages out too), so the
search is bracketed on the slow branch.  Prints a short scan and the root; the
root is frozen as CALIBRATED_CORRELATION_TIME_MS in gradkit.coherence.

    python scripts/calibrate_echo.py [--trajectories 2000] [--seeds 0 1 2]
"""

import argparse

import numpy as np

from gradkit.coherence import (CALIBRATED_CORRELATION_TIME_MS, NoiseModel,
                               calibrate_correlation_time, calibrate_sigma, echo_decay)
from gradkit.spectra import fit_decay


def echo_t2(sigma, tau_c, trajectories, seed):
    rows = echo_decay(NoiseModel("ornstein_uhlenbeck", sigma, tau_c), np.arange(1.0, 10.5, 1.0),
                      0.5, 1.0, trajectories, seed=seed)
    return fit_decay(rows[:, 0] * 1e3, rows[:, 1], "exponential").value("tau") * 1e-3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t2star", type=float, default=632.0, help="Ramsey T2* in us")
    ap.add_argument("--target", type=float, default=10.0, help="echo T2 in ms")
    ap.add_argument("--trajectories", type=int, default=2000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()

    sigma = calibrate_sigma(args.t2star)
    print(f"sigma = {sigma:.4f} kHz")
    print("tau_c_ms,echo_t2_ms")
    for tau_c in (0.3, 1.0, 3.0, 10.0, 30.0):
        print(f"{tau_c:g},{echo_t2(sigma, tau_c, args.trajectories, 0):.3f}")
    roots = [calibrate_correlation_time(sigma, args.target, trajectories=args.trajectories,
                                        seed=s) for s in args.seeds]
    for s, r in zip(args.seeds, roots):
        print(f"seed {s}: tau_c = {r:.3f} ms")
    print(f"mean {np.mean(roots):.3f} ms (frozen value {CALIBRATED_CORRELATION_TIME_MS} ms)")


if __name__ == "__main__":
    main()
