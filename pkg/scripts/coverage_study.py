"""Repeat the two-ion spectrum fit on independent synthetic scans and compare
the reported uncertainty with the scatter of the estimates.

    python scripts/coverage_study.py [--replications 200] [--trials 100]
"""

import argparse

import numpy as np

from gradkit.spectra import SpectrumModelParams, fit_spectrum, simulate_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replications", type=int, default=200)
    ap.add_argument("--trials", type=int, default=100, help="shots per frequency point")
    ap.add_argument("--step", type=float, default=2.0, help="grid step in kHz")
    ap.add_argument("--seed", type=int, default=8000)
    args = ap.parse_args()

    truth = SpectrumModelParams((-155.0, 155.0), (0.9, 0.9), 9.0, 50.0)
    grid = np.arange(-350.0, 350.0 + 1e-9, args.step)
    est, sig = [], []
    for k in range(args.replications):
        fit = fit_spectrum(simulate_scan(truth, grid, args.trials, seed=args.seed + k), 2)
        est.append(fit.derived["mean_splitting"])
        sig.append(fit.derived["mean_splitting_sigma"])
    est, sig = np.array(est), np.array(sig)
    err = est - 310.0
    print(f"replications        {len(est)}")
    print(f"mean estimate       {est.mean():.3f} kHz")
    print(f"scatter (std)       {est.std(ddof=1):.3f} kHz")
    print(f"median reported     {np.median(sig):.3f} kHz")
    print(f"1-sigma coverage    {100 * np.mean(np.abs(err) <= sig):.1f} %")
    print(f"2-sigma coverage    {100 * np.mean(np.abs(err) <= 2 * sig):.1f} %")


if __name__ == "__main__":
    main()
