"""
Monte Carlo Ramsey and spin-echo contrast under slow detuning noise.

Times are in ms and detunings in kHz, so the accumulated phase in cycles is
simply the time integral of the detuning. Each trajectory draws from its own
random stream keyed on ``(seed, trajectory_index)``; ensemble averages do not
depend on how trajectories are batched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

DEFAULT_DT_MS = 0.01
# OU correlation time (ms) that gives a ~10 ms exponential echo constant under
# sigma = calibrate_sigma(632 us) and pulses at 0.5 ms then every 1 ms.
# Regenerate with scripts/calibrate_echo.py.
CALIBRATED_CORRELATION_TIME_MS = 4.2


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "quasi_static"  # or "ornstein_uhlenbeck"
    sigma: float = 0.0  # kHz
    correlation_time: float = CALIBRATED_CORRELATION_TIME_MS  # ms, OU only

    def __post_init__(self):
        if self.kind not in ("quasi_static", "ornstein_uhlenbeck"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.kind == "ornstein_uhlenbeck" and not self.correlation_time > 0:
            raise ValueError("correlation_time must be positive")


@dataclass(frozen=True)
class PulseSchedule:
    pi_pulse_times: tuple  # ms
    total_time: float  # ms

    def __post_init__(self):
        t = tuple(float(v) for v in self.pi_pulse_times)
        object.__setattr__(self, "pi_pulse_times", t)
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("pulse times must be strictly increasing")
        if any(not 0 < v < self.total_time for v in t):
            raise ValueError("pulse times must lie inside (0, total_time)")

    @classmethod
    def periodic(cls, first: float, spacing: float, total_time: float) -> "PulseSchedule":
        """Pulses at ``first``, ``first + spacing``, ... strictly before ``total_time``."""
        n = int(np.floor((total_time - first) / spacing - 1e-9)) + 1 if total_time > first else 0
        times = [first + k * spacing for k in range(max(n, 0))]
        return cls(tuple(t for t in times if t < total_time), total_time)

    @classmethod
    def single_echo(cls, total_time: float) -> "PulseSchedule":
        return cls((total_time / 2,), total_time)


_SCHEDULE_RE = re.compile(r"^\s*([0-9.eE+-]+?)\s*ms\s*\+\s*([0-9.eE+-]+?)\s*ms\s*$")


def parse_schedule(text: str, total_time: float) -> PulseSchedule:
    """Parse ``"0.5ms+1ms"`` (first pulse, then period) into a schedule."""
    m = _SCHEDULE_RE.match(text)
    if not m:
        raise ValueError(f"bad echo schedule {text!r}; expected e.g. '0.5ms+1ms'")
    return PulseSchedule.periodic(float(m.group(1)), float(m.group(2)), total_time)


def calibrate_sigma(t2_star: float) -> float:
    """Quasi-static detuning spread (kHz) giving a Ramsey envelope exp(-(T/t2_star)^2).

    ``t2_star`` is in microseconds.
    """
    if not t2_star > 0:
        raise ValueError("t2_star must be positive")
    return float(np.sqrt(2.0) / (2 * np.pi * t2_star * 1e-3))


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _n_steps(duration: float, dt: float) -> int:
    return int(np.ceil(duration / dt - 1e-9))


def sample_detuning(model: NoiseModel, duration: float, dt: float = DEFAULT_DT_MS,
                    seed: int = 0, index: int = 0) -> np.ndarray:
    """One detuning trajectory in kHz on the grid ``0, dt, ..., n*dt >= duration``."""
    return _trajectories(model, duration, dt, seed, np.array([index]))[0]


def _trajectories(model: NoiseModel, duration: float, dt: float, seed: int,
                  indices: np.ndarray) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = _n_steps(duration, dt) + 1
    if model.kind == "ornstein_uhlenbeck" and dt > model.correlation_time / 10:
        raise ValueError(f"dt={dt} ms too coarse for correlation time "
                         f"{model.correlation_time} ms (need dt <= tau_c/10)")
    out = np.empty((len(indices), n))
    if model.sigma == 0:
        out[:] = 0.0
        return out
    if model.kind == "quasi_static":
        for row, i in enumerate(indices):
            out[row] = model.sigma * _rng(seed, i).standard_normal()
        return out
    a = np.exp(-dt / model.correlation_time)
    b = model.sigma * np.sqrt(1 - a * a)
    for row, i in enumerate(indices):
        xi = _rng(seed, i).standard_normal(n)
        xi[0] *= model.sigma
        xi[1:] *= b
        # exact AR(1) update x_{k+1} = a x_k + b xi_k, stationary start
        out[row] = lfilter([1.0], [1.0, -a], xi)
    return out


def _phase_integral(traj: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative trapezoidal integral of each trajectory (cycles), starting at 0."""
    inc = 0.5 * (traj[:, 1:] + traj[:, :-1]) * dt
    return np.concatenate([np.zeros((len(traj), 1)), np.cumsum(inc, axis=1)], axis=1)


def _interp_columns(phi: np.ndarray, dt: float, times) -> np.ndarray:
    """Linear interpolation of the cumulative phase at arbitrary ``times``."""
    times = np.asarray(times, dtype=float)
    pos = times / dt
    i0 = np.clip(np.floor(pos + 1e-9).astype(int), 0, phi.shape[1] - 1)
    frac = np.clip(pos - i0, 0.0, None)
    i1 = np.minimum(i0 + 1, phi.shape[1] - 1)
    return phi[:, i0] + frac * (phi[:, i1] - phi[:, i0])


def _batched(trajectories: int, chunk_size: int | None):
    chunk = trajectories if not chunk_size else int(chunk_size)
    for start in range(0, trajectories, chunk):
        yield np.arange(start, min(start + chunk, trajectories))


def _lifetime_factor(times, lifetime):
    if lifetime is None:
        return 1.0
    return np.exp(-np.asarray(times, dtype=float) / (2 * lifetime))


def ramsey_phases(model: NoiseModel, delays, trajectories: int, seed: int = 0,
                  dt: float = DEFAULT_DT_MS, chunk_size: int | None = None) -> np.ndarray:
    """Accumulated phase (cycles), shape (trajectories, len(delays))."""
    delays = np.asarray(delays, dtype=float)
    tmax = float(delays.max()) if delays.size else 0.0
    parts = []
    for idx in _batched(trajectories, chunk_size):
        if model.kind == "quasi_static" or model.sigma == 0:
            # constant detuning: the integral is exact
            d0 = _trajectories(model, 0.0, dt, seed, idx)[:, :1]
            parts.append(d0 * delays[None, :])
        else:
            phi = _phase_integral(_trajectories(model, tmax, dt, seed, idx), dt)
            parts.append(_interp_columns(phi, dt, delays))
    return np.concatenate(parts, axis=0)


def ensemble_contrast(phases: np.ndarray) -> np.ndarray:
    """|<exp(2 pi i phi)>| over the trajectory axis."""
    # reduce along a contiguous axis so the summation order depends only on
    # the trajectory count, not on how the phase array was assembled
    z = np.ascontiguousarray(np.exp(2j * np.pi * np.asarray(phases)).T)
    return np.abs(z.mean(axis=1))


def ramsey_contrast(model: NoiseModel, delays, trajectories: int = 1000, seed: int = 0,
                    dt: float = DEFAULT_DT_MS, chunk_size: int | None = None,
                    lifetime: float | None = None) -> np.ndarray:
    """Ramsey fringe contrast for each delay (ms); returns rows ``(delay, contrast)``.

    ``lifetime`` (ms) optionally multiplies in the upper-state decay of the coherence.
    """
    if trajectories < 100:
        raise ValueError("need at least 100 trajectories")
    delays = np.asarray(delays, dtype=float)
    c = ensemble_contrast(ramsey_phases(model, delays, trajectories, seed, dt, chunk_size))
    c = c * _lifetime_factor(delays, lifetime)
    return np.column_stack([delays, c])


def _echo_phase(phi, dt, schedule: PulseSchedule):
    bounds = np.r_[0.0, schedule.pi_pulse_times, schedule.total_time]
    at = _interp_columns(phi, dt, bounds)
    signs = (-1.0) ** np.arange(len(bounds) - 1)
    return np.diff(at, axis=1) @ signs


def echo_phases(model: NoiseModel, schedules, trajectories: int, seed: int = 0,
                dt: float = DEFAULT_DT_MS, chunk_size: int | None = None) -> np.ndarray:
    """Echo phase per trajectory for each schedule; the schedules share trajectories."""
    schedules = list(schedules)
    tmax = max(s.total_time for s in schedules)
    parts = []
    for idx in _batched(trajectories, chunk_size):
        phi = _phase_integral(_trajectories(model, tmax, dt, seed, idx), dt)
        parts.append(np.column_stack([_echo_phase(phi, dt, s) for s in schedules]))
    return np.concatenate(parts, axis=0)


def echo_contrast(model: NoiseModel, schedule: PulseSchedule, trajectories: int = 1000,
                  seed: int = 0, dt: float = DEFAULT_DT_MS, chunk_size: int | None = None,
                  lifetime: float | None = None) -> float:
    """Contrast at ``schedule.total_time`` with ideal instantaneous pi pulses."""
    if trajectories < 100:
        raise ValueError("need at least 100 trajectories")
    ph = echo_phases(model, [schedule], trajectories, seed, dt, chunk_size)
    return float(ensemble_contrast(ph)[0] * _lifetime_factor(schedule.total_time, lifetime))


def echo_decay(model: NoiseModel, totals, first: float = 0.5, spacing: float = 1.0,
               trajectories: int = 1000, seed: int = 0, dt: float = DEFAULT_DT_MS,
               chunk_size: int | None = None) -> np.ndarray:
    """Echo contrast versus total time for a periodic pulse train; rows ``(total, contrast)``."""
    totals = np.asarray(totals, dtype=float)
    scheds = [PulseSchedule.periodic(first, spacing, T) for T in totals]
    c = ensemble_contrast(echo_phases(model, scheds, trajectories, seed, dt, chunk_size))
    return np.column_stack([totals, c])


def calibrate_correlation_time(sigma: float, target_t2: float, totals=None,
                               first: float = 0.5, spacing: float = 1.0,
                               trajectories: int = 2000, seed: int = 0,
                               dt: float = DEFAULT_DT_MS, bracket=(1.0, 100.0)) -> float:
    """OU correlation time (ms) whose echo decay fits an exponential with time
    constant ``target_t2`` (ms).

    Uses common random numbers across candidates so the search is smooth. The
    echo constant is not monotonic in the correlation time (very fast noise
    also averages out), so the default bracket stays on the slow-noise branch.
    """
    from scipy.optimize import brentq

    from .spectra import fit_decay

    if totals is None:
        totals = np.arange(1.0, 10.0 + 1e-9, 1.0)

    def t2_of(log_tau):
        model = NoiseModel("ornstein_uhlenbeck", sigma, float(np.exp(log_tau)))
        step = min(dt, model.correlation_time / 10)
        rows = echo_decay(model, totals, first, spacing, trajectories, seed, step)
        return fit_decay(rows[:, 0] * 1e3, rows[:, 1], "exponential").values[1] * 1e-3

    lo, hi = np.log(bracket[0]), np.log(bracket[1])
    return float(np.exp(brentq(lambda x: np.log(t2_of(x) / target_t2), lo, hi, xtol=1e-4)))
