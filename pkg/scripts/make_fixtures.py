"""Regenerate the data files shipped in src/gradkit/data."""

from pathlib import Path

import numpy as np

from gradkit.constants import DEFAULT_SEED
from gradkit.magnetostatics import format_geometry
from gradkit.optimizer import REFERENCE_PARAMS, build_geometry
from gradkit.spectra import (FlopParams, SpectrumModelParams, simulate_flop, simulate_scan,
                             write_counts_csv)

DATA = Path(__file__).resolve().parents[1] / "src" / "gradkit" / "data"


def main():
    DATA.mkdir(exist_ok=True)
    p = REFERENCE_PARAMS
    header = (f"reference S layout: leg length {p.s_leg_length:g} um, pitch {p.s_leg_pitch:g} um,\n"
              f"width {p.trace_width:g} um, return offset {p.return_path_offset:g} um, "
              f"{p.n_s_turns} turn(s); trap at z={p.trap_height:g} um\n"
              "currents in mA, coordinates in um")
    (DATA / "reference_geometry.txt").write_text(format_geometry(build_geometry(p, 300.0), header))

    (DATA / "bounds.txt").write_text(
        "# optimizer search box, um\n"
        "s_leg_length 300 1200\n"
        "s_leg_pitch 20 150\n"
        "trace_width 10 30\n"
        "return_path_offset 15 150\n")

    truth = SpectrumModelParams((-155.0, 155.0), (0.9, 0.9), 9.0, 50.0)
    grid = np.arange(-350.0, 350.0 + 1e-9, 2.0)
    pts = simulate_scan(truth, grid, 100, DEFAULT_SEED)
    write_counts_csv(DATA / "synthetic_scan.csv", grid, [q.successes for q in pts],
                     [q.trials for q in pts], "freq_offset_khz")

    flop = FlopParams(35.0, 170.0, 0.97)
    t = np.arange(0.0, 300.0 + 1e-9, 2.0)
    d = simulate_flop(flop, t, 100, DEFAULT_SEED)
    write_counts_csv(DATA / "synthetic_flop.csv", d.x, d.successes, d.trials, "time_us")


if __name__ == "__main__":
    main()
