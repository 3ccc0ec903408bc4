"""
Command-line entry point: ``gradkit <subcommand> ...`` or ``python -m gradkit``.

Exit status is 0 on success, 1 on a usage or input-file error and 2 when a
computation fails (no convergence, infeasible design, singular field point).
Tabular output is CSV with unit-suffixed headers; ``--json`` gives the same
content as a JSON document.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import addressing, coherence, ionchain, magnetostatics, optimizer, spectra
from .constants import DEFAULT_SEED
from .fitting import FitError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def data_path(name: str) -> Path:
    """Path of a file shipped in ``gradkit/data``."""
    return Path(str(resources.files("gradkit").joinpath("data", name)))


def default_seed() -> int:
    env = os.environ.get("GRADKIT_SEED")
    if env is None or env == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"GRADKIT_SEED must be an integer, got {env!r}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def render_table(rows: list[dict], meta: dict | None = None, as_json: bool = False) -> str:
    if as_json:
        doc = {"rows": _plain(rows)}
        if meta:
            doc["meta"] = _plain(meta)
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])
    if meta:
        for k, v in meta.items():
            buf.write(f"# {k}={_fmt(v) if not isinstance(v, (list, tuple)) else ' '.join(map(_fmt, v))}\n")
    return buf.getvalue()


def _emit(args, text: str):
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"{what}: expected a comma-separated list of numbers, got {text!r}")


def _load_paths(args):
    path = args.geometry or data_path("reference_geometry.txt")
    try:
        paths = magnetostatics.load_geometry(path)
    except OSError as exc:
        raise UsageError(f"cannot read geometry file: {exc}")
    except magnetostatics.GeometryError as exc:
        raise UsageError(str(exc))
    if args.current is not None:
        ref = magnetostatics.circuit_current(paths)
        if ref == 0:
            raise UsageError("geometry carries no current; cannot rescale")
        if abs(args.current) > magnetostatics.MAX_CURRENT_MA:
            raise UsageError(f"--current exceeds the {magnetostatics.MAX_CURRENT_MA:g} mA limit")
        paths = [p.scaled(args.current / ref) for p in paths]
    return paths


def _species(name):
    try:
        return ionchain.get_species(name)
    except ValueError as exc:
        raise UsageError(str(exc))


# -- subcommands -------------------------------------------------------------

def cmd_field(args):
    paths = _load_paths(args)
    rep = magnetostatics.site_report(paths, tuple(args.point), tuple(args.bias), args.resistance)
    b = rep.residual_b
    row = {"x_um": args.point[0], "y_um": args.point[1], "z_um": args.point[2],
           "bx_path_g": b[0], "by_path_g": b[1], "bz_path_g": b[2],
           "residual_mg": rep.residual_mg, "dbz_dy_g_per_mm": rep.dBz_dy,
           "b_total_g": float(np.linalg.norm(rep.b_total)), "power_mw": rep.power}
    _emit(args, render_table([row], as_json=args.json))


def cmd_chain(args):
    if not 1 <= args.n <= 50:
        raise UsageError(f"--n must be between 1 and 50, got {args.n}")
    sol = ionchain.equilibrium_positions(_species(args.species), args.secular, args.n)
    pos = sol.positions
    gaps = list(np.diff(pos)) + [None]
    rows = [{"index": i, "position_um": p, "spacing_to_next_um": g}
            for i, (p, g) in enumerate(zip(pos, gaps))]
    meta = {"length_scale_um": ionchain.length_scale(sol.species, args.secular),
            "min_spacing_um": float(np.min(np.diff(pos))) if sol.n > 1 else float("nan")}
    _emit(args, render_table(rows, meta, args.json))


def cmd_address(args):
    if args.spacing is not None or args.gradient is not None:
        if args.spacing is None or args.gradient is None:
            raise UsageError("--spacing and --gradient go together")
        sp = addressing.splitting(args.spacing, args.gradient)
        row = {"spacing_um": args.spacing, "gradient_g_per_mm": args.gradient, "splitting_khz": sp}
        if args.rabi is not None:
            ct = addressing.crosstalk_at_pi(args.rabi, sp)
            row.update({"rabi_khz": args.rabi, "crosstalk_instantaneous": ct.instantaneous,
                        "crosstalk_time_averaged": ct.time_averaged})
        _emit(args, render_table([row], as_json=args.json))
        return
    paths = _load_paths(args)
    site = magnetostatics.site_report(paths, magnetostatics.TRAP_CENTER_UM, tuple(args.bias))
    chain = ionchain.equilibrium_positions(_species(args.species), args.secular, args.n)
    rabi = args.rabi if args.rabi is not None else 35.0
    amap = addressing.build_address_map(chain, site, rabi)
    ct = amap.neighbour_crosstalk()
    rows = [{"ion_index": int(i), "position_um": p, "offset_khz": o,
             "crosstalk_to_neighbors": c}
            for i, p, o, c in zip(amap.ion_index, amap.positions, amap.offsets, ct)]
    meta = {"dbz_dy_g_per_mm": site.dBz_dy, "center_shift_khz": amap.center_shift,
            "rabi_khz": rabi}
    _emit(args, render_table(rows, meta, args.json))


def _read_counts(path, xname):
    try:
        return spectra.read_counts_csv(path, xname)
    except OSError as exc:
        raise UsageError(f"cannot read data file: {exc}")
    except ValueError as exc:
        raise UsageError(str(exc))


def _fit_rows(fit):
    return [{"parameter": n, "value": v, "sigma": s}
            for n, v, s in zip(fit.names, fit.values, fit.uncertainties)]


def _fit_text(fit, extra: dict) -> str:
    lines = [f"{'parameter':<14}{'value':>16}{'sigma':>14}"]
    for n, v, s in zip(fit.names, fit.values, fit.uncertainties):
        lines.append(f"{n:<14}{v:>16.8g}{s:>14.4g}")
    lines.append("")
    kv = {"converged": True, "iterations": fit.n_iter, "chi2_per_dof": fit.chi2_per_dof,
          "degenerate": fit.degenerate}
    kv.update(extra)
    for k, v in kv.items():
        lines.append(f"{k}={' '.join(map(_fmt, v)) if isinstance(v, (list, tuple)) else _fmt(v)}")
    return "\n".join(lines) + "\n"


def _write_plot(path, header, x, y):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([[_fmt(a), _fmt(b)] for a, b in zip(x, y)])
    Path(path).write_text(buf.getvalue())


def cmd_spectrum(args):
    if args.action == "sim":
        centers = _floats(args.centers, "--centers")
        amps = _floats(args.amplitudes, "--amplitudes") if args.amplitudes else [0.9] * len(centers)
        params = spectra.SpectrumModelParams(tuple(centers), tuple(amps), args.rabi, args.pulse)
        start, stop, step = args.grid
        if not step > 0 or stop < start:
            raise UsageError("--grid needs START STOP STEP with STEP > 0 and STOP >= START")
        grid = np.arange(start, stop + step * 1e-9, step)
        pts = spectra.simulate_scan(params, grid, args.trials, args.seed)
        rows = [{"freq_offset_khz": p.frequency_offset, "successes": p.successes,
                 "trials": p.trials} for p in pts]
        _emit(args, render_table(rows, as_json=args.json))
        return
    data = _read_counts(args.data or data_path("synthetic_scan.csv"), "freq_offset_khz")
    fit = spectra.fit_spectrum(data, args.n_peaks, pulse=args.pulse)
    extra = {}
    if "mean_splitting" in fit.derived:
        extra = {"mean_splitting_khz": fit.derived["mean_splitting"],
                 "mean_splitting_sigma_khz": fit.derived["mean_splitting_sigma"],
                 "splittings_khz": fit.derived["splittings"]}
    if args.plot_data:
        f = np.linspace(data.x.min(), data.x.max(), 2001)
        _write_plot(args.plot_data, ["freq_offset_khz", "probability"], f,
                    spectra.model_spectrum(fit.params, f))
    if args.json:
        _emit(args, render_table(_fit_rows(fit), {"chi2_per_dof": fit.chi2_per_dof,
                                                   "iterations": fit.n_iter, **extra}, True))
    else:
        _emit(args, _fit_text(fit, extra))


def cmd_flop(args):
    if args.action == "sim":
        flop = spectra.FlopParams(args.rabi, args.hwhm, args.contrast, args.offset)
        start, stop, step = args.times
        if not step > 0 or stop < start:
            raise UsageError("--times needs START STOP STEP with STEP > 0 and STOP >= START")
        t = np.arange(start, stop + step * 1e-9, step)
        d = spectra.simulate_flop(flop, t, args.trials, args.seed)
        rows = [{"time_us": a, "successes": int(k), "trials": int(n)}
                for a, k, n in zip(d.x, d.successes, d.trials)]
        _emit(args, render_table(rows, as_json=args.json))
        return
    data = _read_counts(args.data or data_path("synthetic_flop.csv"), "time_us")
    fit = spectra.fit_flop(data)
    extra = {"pi_time_us": fit.derived["pi_time_us"]}
    if args.plot_data:
        t = np.linspace(data.x.min(), data.x.max(), 2001)
        _write_plot(args.plot_data, ["time_us", "probability"], t,
                    spectra.model_flop(fit.params, t))
    if args.json:
        _emit(args, render_table(_fit_rows(fit), {"chi2_per_dof": fit.chi2_per_dof, **extra}, True))
    else:
        _emit(args, _fit_text(fit, extra))


def _noise(args):
    if args.sigma is not None and args.t2star is not None:
        raise UsageError("give --sigma or --t2star, not both")
    sigma = args.sigma if args.sigma is not None else coherence.calibrate_sigma(
        args.t2star if args.t2star is not None else 632.0)
    kind = "ornstein_uhlenbeck" if args.model == "ou" else "quasi_static"
    return coherence.NoiseModel(kind, sigma, args.tau_c)


def cmd_coherence(args):
    model = _noise(args)
    delays = _floats(args.delays, "--delays")
    if not delays or any(d <= 0 for d in delays):
        raise UsageError("--delays must be positive times in ms")
    if args.action == "ramsey":
        rows_arr = coherence.ramsey_contrast(model, delays, args.trajectories, args.seed,
                                             args.dt, lifetime=args.lifetime)
        rows = [{"delay_ms": d, "contrast": c} for d, c in rows_arr]
    else:
        rows = []
        for T in delays:
            try:
                sched = (coherence.parse_schedule(args.echo, T) if args.echo
                         else coherence.PulseSchedule.single_echo(T))
            except ValueError as exc:
                raise UsageError(str(exc))
            c = coherence.echo_contrast(model, sched, args.trajectories, args.seed, args.dt,
                                        lifetime=args.lifetime)
            rows.append({"delay_ms": T, "contrast": c})
    meta = {"model": model.kind, "sigma_khz": model.sigma, "trajectories": args.trajectories,
            "seed": args.seed}
    if model.kind == "ornstein_uhlenbeck":
        meta["tau_c_ms"] = model.correlation_time
    _emit(args, render_table(rows, meta, args.json))


def cmd_optimize(args):
    bounds = None
    if args.bounds:
        try:
            bounds = optimizer.parse_bounds(Path(args.bounds).read_text(), args.bounds)
        except OSError as exc:
            raise UsageError(f"cannot read bounds file: {exc}")
        except magnetostatics.GeometryError as exc:
            raise UsageError(str(exc))
    init = optimizer.DETUNED_START if args.start == "detuned" else optimizer.REFERENCE_PARAMS
    kw = dict(current=args.current, budget=args.budget, seed=args.seed,
              residual_max=args.residual_max, power_max=args.power_max)
    if bounds:
        kw["bounds"] = bounds
    try:
        spec = optimizer.OptimizeSpec(**kw)
    except ValueError as exc:
        raise UsageError(str(exc))
    best, m, trace = optimizer.optimize(spec, init)
    if args.trace_out:
        rows = optimizer.trace_rows(trace)
        Path(args.trace_out).write_text(render_table(rows))
    info = {**optimizer.params_to_dict(best), "gradient_g_per_mm": m.gradient,
            "residual_mg": m.residual, "power_mw": m.power, "feasible": m.feasible,
            "evaluations": len(trace), "current_ma": args.current}
    if args.json:
        doc = {"params_um": _plain(optimizer.params_to_dict(best)), "metrics": _plain(m.as_dict()),
               "evaluations": len(trace)}
        _emit(args, json.dumps(doc, indent=2) + "\n")
        return
    header = "\n".join(f"{k}={_fmt(v)}" for k, v in info.items())
    _emit(args, magnetostatics.format_geometry(optimizer.build_geometry(best, args.current),
                                               header))


def cmd_report(args):
    from .report import build_report

    text = build_report(seed=args.seed, as_json=args.json)
    _emit(args, text)


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gradkit", description="Field-gradient addressing of trapped ions: "
                "wire fields, chain spacing, qubit splittings, fits and coherence.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    seed = default_seed()

    def common(sp, seeded=False):
        sp.add_argument("--json", action="store_true", help="emit JSON instead of CSV/text")
        sp.add_argument("--out", help="write output to this file instead of stdout")
        if seeded:
            sp.add_argument("--seed", type=int, default=seed,
                            help=f"RNG seed (default {seed}; GRADKIT_SEED overrides)")

    def geometry(sp):
        sp.add_argument("--geometry", help="geometry file (um, mA); default: shipped reference")
        sp.add_argument("--current", type=float,
                        help="rescale the circuit so the main path carries this many mA")
        sp.add_argument("--bias", type=float, nargs=3, default=(0.0, 0.0, 4.0),
                        metavar=("BX", "BY", "BZ"), help="uniform bias field in gauss "
                        "(default 0 0 4)")

    sp = sub.add_parser("field", help="field, gradient and power at a point")
    geometry(sp)
    sp.add_argument("--point", type=float, nargs=3, default=magnetostatics.TRAP_CENTER_UM,
                    metavar=("X", "Y", "Z"), help="evaluation point in um (default 0 0 100)")
    sp.add_argument("--resistance", type=float, default=0.2, help="circuit resistance in ohm")
    common(sp)
    sp.set_defaults(func=cmd_field)

    sp = sub.add_parser("chain", help="equilibrium ion positions (um)")
    sp.add_argument("--species", default="Sr88", help="Sr88, Ca40 or a mass in amu")
    sp.add_argument("--secular", type=float, default=847.0, help="axial secular frequency in kHz")
    sp.add_argument("--n", type=int, default=2, help="number of ions")
    common(sp)
    sp.set_defaults(func=cmd_chain)

    sp = sub.add_parser("address", help="per-ion qubit offsets (kHz) and crosstalk")
    sp.add_argument("--spacing", type=float, help="ion spacing in um (direct mode)")
    sp.add_argument("--gradient", type=float, help="field gradient in G/mm (direct mode)")
    sp.add_argument("--rabi", type=float, help="Rabi frequency in kHz (default 35 in chain mode)")
    geometry(sp)
    sp.add_argument("--species", default="Sr88", help="Sr88, Ca40 or a mass in amu")
    sp.add_argument("--secular", type=float, default=847.0, help="axial secular frequency in kHz")
    sp.add_argument("--n", type=int, default=2, help="number of ions")
    common(sp)
    sp.set_defaults(func=cmd_address)

    sp = sub.add_parser("spectrum", help="simulate or fit a frequency scan (kHz)")
    sp.add_argument("action", choices=["sim", "fit"])
    sp.add_argument("--centers", default="-155,155", help="peak centers in kHz (sim)")
    sp.add_argument("--amplitudes", help="peak amplitudes 0..1 (sim; default 0.9 each)")
    sp.add_argument("--rabi", type=float, default=9.0, help="Rabi frequency in kHz (sim)")
    sp.add_argument("--pulse", type=float, default=50.0, help="probe pulse length in us")
    sp.add_argument("--grid", type=float, nargs=3, default=(-350.0, 350.0, 2.0),
                    metavar=("START", "STOP", "STEP"), help="scan grid in kHz (sim)")
    sp.add_argument("--trials", type=int, default=100, help="shots per point")
    sp.add_argument("--data", help="scan CSV freq_offset_khz,successes,trials (fit; default "
                    "shipped fixture)")
    sp.add_argument("--n-peaks", type=int, default=2, help="number of peaks to fit")
    sp.add_argument("--plot-data", help="write the fitted curve to this CSV (fit)")
    common(sp, seeded=True)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("flop", help="simulate or fit Rabi flops (time in us)")
    sp.add_argument("action", choices=["sim", "fit"])
    sp.add_argument("--rabi", type=float, default=35.0, help="Rabi frequency in kHz (sim)")
    sp.add_argument("--hwhm", type=float, default=170.0, help="envelope HWHM in us (sim)")
    sp.add_argument("--contrast", type=float, default=0.97, help="flop contrast 0..1 (sim)")
    sp.add_argument("--offset", type=float, default=0.0, help="baseline probability (sim)")
    sp.add_argument("--times", type=float, nargs=3, default=(0.0, 300.0, 2.0),
                    metavar=("START", "STOP", "STEP"), help="pulse lengths in us (sim)")
    sp.add_argument("--trials", type=int, default=100, help="shots per point")
    sp.add_argument("--data", help="flop CSV time_us,successes,trials (fit; default fixture)")
    sp.add_argument("--plot-data", help="write the fitted curve to this CSV (fit)")
    common(sp, seeded=True)
    sp.set_defaults(func=cmd_flop)

    sp = sub.add_parser("coherence", help="Monte Carlo Ramsey or echo contrast (times in ms)")
    sp.add_argument("action", choices=["ramsey", "echo"])
    sp.add_argument("--model", choices=["quasi_static", "ou"], default="quasi_static",
                    help="detuning noise process")
    sp.add_argument("--sigma", type=float, help="detuning standard deviation in kHz")
    sp.add_argument("--t2star", type=float,
                    help="set sigma from a gaussian T2* in us (default 632 if no --sigma)")
    sp.add_argument("--tau-c", type=float, default=coherence.CALIBRATED_CORRELATION_TIME_MS,
                    help="OU correlation time in ms")
    sp.add_argument("--delays", default="0.2,0.4,0.6,0.8,1.0",
                    help="Ramsey delays or echo total times in ms")
    sp.add_argument("--echo", help="pi pulse train 'FIRSTms+PERIODms', e.g. 0.5ms+1ms "
                    "(echo; default a single pulse at half time)")
    sp.add_argument("--trajectories", type=int, default=2000, help="Monte Carlo trajectories")
    sp.add_argument("--dt", type=float, default=coherence.DEFAULT_DT_MS, help="time step in ms")
    sp.add_argument("--lifetime", type=float, help="upper-state lifetime in ms (off by default)")
    common(sp, seeded=True)
    sp.set_defaults(func=cmd_coherence)

    sp = sub.add_parser("optimize", help="search the S layout for the largest gradient")
    sp.add_argument("--current", type=float, default=300.0, help="circuit current in mA")
    sp.add_argument("--budget", type=int, default=500, help="field evaluations allowed")
    sp.add_argument("--bounds", help="bounds file: 'name lo hi' per line, um")
    sp.add_argument("--start", choices=["detuned", "reference"], default="detuned",
                    help="starting layout")
    sp.add_argument("--residual-max", type=float, default=20.0, help="residual limit in mG")
    sp.add_argument("--power-max", type=float, default=50.0, help="power limit in mW")
    sp.add_argument("--trace-out", help="write the evaluation trace CSV here")
    common(sp, seeded=True)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("report", help="recompute the headline numbers against published values")
    common(sp, seeded=True)
    sp.set_defaults(func=cmd_report)
    return p


COMPUTATION_ERRORS = (ValueError, FitError, ionchain.ConvergenceError,
                      optimizer.OptimizationError, ArithmeticError)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except COMPUTATION_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
