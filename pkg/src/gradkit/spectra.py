"""
Synthetic frequency scans and Rabi flops with shot noise, and their fits.

Scan lineshape: a sum of generalized-Rabi peaks (sin^2-modulated Lorentzian
envelopes). Flop model: offset + contrast * gaussian envelope * sin^2. Ramsey
and echo envelopes: gaussian or exponential decays.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .addressing import excitation_probability
from .fitting import FitResult, covariance_from_jacobian, levenberg_marquardt

P_CLIP = 1e-9
LN2 = np.log(2.0)


@dataclass(frozen=True)
class ScanPoint:
    frequency_offset: float  # kHz
    successes: int
    trials: int = 100

    def __post_init__(self):
        if self.trials <= 0 or not 0 <= self.successes <= self.trials:
            raise ValueError(f"invalid counts {self.successes}/{self.trials}")

    @property
    def fraction(self) -> float:
        return self.successes / self.trials


@dataclass(frozen=True)
class SpectrumModelParams:
    centers: tuple  # kHz, ascending
    amplitudes: tuple  # 0..1
    rabi: float  # kHz
    pulse: float = 50.0  # us

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        a = np.asarray(self.amplitudes, dtype=float)
        if c.shape != a.shape:
            raise ValueError("centers and amplitudes differ in length")
        order = np.argsort(c, kind="stable")
        object.__setattr__(self, "centers", tuple(float(v) for v in c[order]))
        object.__setattr__(self, "amplitudes", tuple(float(v) for v in a[order]))
        if not self.rabi > 0 or not self.pulse > 0:
            raise ValueError("rabi and pulse must be positive")

    @property
    def n_peaks(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class FlopParams:
    rabi: float  # kHz
    envelope_hwhm: float  # us
    contrast: float
    offset: float = 0.0

    def __post_init__(self):
        if not (self.rabi > 0 and self.envelope_hwhm > 0 and 0 < self.contrast <= 1):
            raise ValueError("invalid flop parameters")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")


@dataclass(frozen=True)
class CountData:
    """Binomial counts against a control variable (time in us or frequency in kHz)."""

    x: np.ndarray
    successes: np.ndarray
    trials: np.ndarray

    @property
    def fraction(self) -> np.ndarray:
        return self.successes / self.trials


# -- models ------------------------------------------------------------------

def model_spectrum(params: SpectrumModelParams, f):
    f = np.asarray(f, dtype=float)
    total = np.zeros_like(f)
    for c, a in zip(params.centers, params.amplitudes):
        total = total + a * excitation_probability(params.rabi, f - c, params.pulse)
    return np.clip(total, 0.0, 1.0)


def model_flop(flop: FlopParams, t):
    t = np.asarray(t, dtype=float)
    env = np.exp(-LN2 * (t / flop.envelope_hwhm) ** 2)
    p = flop.offset + flop.contrast * env * np.sin(np.pi * flop.rabi * t * 1e-3) ** 2
    return np.clip(p, 0.0, 1.0)


def model_decay(t, c0: float, tau: float, kind: str = "gaussian"):
    t = np.asarray(t, dtype=float)
    if kind == "gaussian":
        return c0 * np.exp(-((t / tau) ** 2))
    if kind == "exponential":
        return c0 * np.exp(-t / tau)
    raise ValueError(f"unknown decay model {kind!r}")


# -- simulation --------------------------------------------------------------

def _point_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _binomial(probs, trials: int, seed: int) -> np.ndarray:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return np.array([_point_rng(seed, i).binomial(trials, p) for i, p in enumerate(probs)],
                    dtype=int)


def simulate_scan(params: SpectrumModelParams, grid: Sequence[float], trials: int = 100,
                  seed: int = 0) -> list[ScanPoint]:
    """Binomially sampled scan; point ``i`` draws from a stream keyed on ``(seed, i)``."""
    grid = np.asarray(grid, dtype=float)
    k = _binomial(model_spectrum(params, grid), trials, seed)
    return [ScanPoint(float(f), int(s), trials) for f, s in zip(grid, k)]


def simulate_flop(flop: FlopParams, times: Sequence[float], trials: int = 100,
                  seed: int = 0) -> CountData:
    times = np.asarray(times, dtype=float)
    k = _binomial(model_flop(flop, times), trials, seed)
    return CountData(times, k, np.full(len(times), trials))


# -- fitting -----------------------------------------------------------------

def binomial_sigma(p, trials):
    """Binomial standard error with the probability clipped away from 0 and 1 and
    a floor of 1/(trials + 2)."""
    p = np.clip(p, P_CLIP, 1 - P_CLIP)
    return np.maximum(np.sqrt(p * (1 - p) / trials), 1.0 / (trials + 2))


def _weighted_fit(model, x, k, n, p0, reweight_rounds: int = 3, **lm):
    """Least squares with binomial errors, reweighted from the model between rounds."""
    y = k / n
    sigma = binomial_sigma(y, n)
    p = np.asarray(p0, dtype=float)
    out = None
    for _ in range(reweight_rounds):
        def resid(q, sigma=sigma):
            return (y - model(q, x)) / sigma
        out = levenberg_marquardt(resid, p, **lm)
        p = out.x
        sigma = binomial_sigma(model(p, x), n)
    r = (y - model(p, x)) / sigma
    chi2 = float(r @ r)
    J = out.jac
    cov, degenerate = covariance_from_jacobian(J)
    dof = max(len(x) - len(p), 1)
    return p, cov, chi2 / dof, out.n_iter, degenerate


def _smooth(y, window=5):
    kernel = np.ones(window) / window
    pad = window // 2
    return np.convolve(np.pad(y, pad, mode="edge"), kernel, mode="valid")


def seed_peaks(freqs, fractions, n_peaks: int, window: int = 5) -> list[int]:
    """Indices of the ``n_peaks`` highest local maxima of the smoothed scan.

    Ties go to the lower frequency.
    """
    order = np.argsort(freqs, kind="stable")
    f = np.asarray(freqs)[order]
    s = _smooth(np.asarray(fractions, dtype=float)[order], window)
    maxima = []
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        left = s[i - 1] if i > 0 else -np.inf
        right = s[j + 1] if j + 1 < len(s) else -np.inf
        if s[i] > left and s[i] > right:
            maxima.append((i + j) // 2)
        i = j + 1
    maxima.sort(key=lambda m: (-s[m], f[m]))
    picked = maxima[:n_peaks]
    if len(picked) < n_peaks:
        raise ValueError(f"found {len(picked)} local maxima, need {n_peaks}")
    return sorted(int(order[m]) for m in picked)


def _as_counts(data) -> CountData:
    if isinstance(data, CountData):
        return data
    pts = list(data)
    return CountData(np.array([p.frequency_offset for p in pts], dtype=float),
                     np.array([p.successes for p in pts], dtype=float),
                     np.array([p.trials for p in pts], dtype=float))


def fit_spectrum(data, n_peaks: int, init: SpectrumModelParams | None = None,
                 pulse: float = 50.0, **lm) -> FitResult:
    """Fit a sum of ``n_peaks`` generalized-Rabi peaks to scan counts.

    Free parameters: peak centers, peak amplitudes and a shared Rabi
    frequency. The pulse length is fixed (from ``init`` if given). ``derived``
    holds the mean adjacent splitting and its standard error.
    """
    d = _as_counts(data)
    o = np.argsort(d.x, kind="stable")
    d = CountData(d.x[o], d.successes[o], d.trials[o])
    n_par = 2 * n_peaks + 1
    if len(d.x) < 5 * n_par:
        raise ValueError(f"need at least {5 * n_par} points for {n_peaks} peaks")
    if init is None:
        idx = seed_peaks(d.x, d.fraction, n_peaks)
        rabi0 = 1e3 / (2 * pulse)
        peak0 = excitation_probability(rabi0, 0.0, pulse)
        sm = _smooth(d.fraction)
        amps = np.clip(sm[idx] / peak0, 0.05, 1.0)
        init = SpectrumModelParams(tuple(d.x[idx]), tuple(amps), rabi0, pulse)
    pulse = init.pulse

    def model(q, f):
        return model_spectrum(SpectrumModelParams(q[:n_peaks], q[n_peaks:2 * n_peaks],
                                                  abs(q[-1]) or 1e-12, pulse), f)

    p0 = np.r_[init.centers, init.amplitudes, init.rabi]
    p, cov, chi2, nit, degenerate = _weighted_fit(model, d.x, d.successes, d.trials, p0, **lm)
    p[-1] = abs(p[-1])
    order = np.argsort(p[:n_peaks], kind="stable")
    perm = np.r_[order, n_peaks + order, 2 * n_peaks]
    p = p[perm]
    cov = cov[np.ix_(perm, perm)]
    params = SpectrumModelParams(tuple(p[:n_peaks]), tuple(p[n_peaks:2 * n_peaks]), p[-1], pulse)
    names = ([f"center_{i}" for i in range(n_peaks)] + [f"amplitude_{i}" for i in range(n_peaks)]
             + ["rabi"])
    derived = {}
    if n_peaks >= 2:
        g = np.zeros(len(p))
        g[0], g[n_peaks - 1] = -1.0 / (n_peaks - 1), 1.0 / (n_peaks - 1)
        derived["mean_splitting"] = float(g @ p)
        derived["mean_splitting_sigma"] = float(np.sqrt(max(g @ cov @ g, 0.0)))
        derived["splittings"] = [float(v) for v in np.diff(p[:n_peaks])]
    return FitResult(params, p, names, cov, chi2, derived, nit, degenerate)


def dominant_frequency(t, y, pad: int = 8) -> float:
    """Frequency (kHz for t in us) of the largest non-DC discrete Fourier bin of ``y``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    dt = float(np.median(np.diff(t)))
    n = len(y) * pad
    spec = np.abs(np.fft.rfft(y - y.mean(), n=n))
    freqs = np.fft.rfftfreq(n, d=dt) * 1e3
    spec[0] = 0.0
    return float(freqs[int(np.argmax(spec))])


def fit_flop(data: CountData, init: FlopParams | None = None, **lm) -> FitResult:
    """Fit Rabi flops with a gaussian envelope; the initial Rabi frequency comes
    from the dominant Fourier component of the data."""
    if len(data.x) < 20:
        raise ValueError("need at least 20 points")
    y = data.fraction
    if init is None:
        rabi0 = dominant_frequency(data.x, y)
        span = float(data.x.max() - data.x.min())
        if rabi0 * span * 1e-3 < 3:
            raise ValueError("data must span at least three flop periods")
        lo, hi = float(np.percentile(y, 2)), float(np.percentile(y, 98))
        init = FlopParams(rabi0, span, min(max(hi - lo, 0.05), 1.0), max(lo, 0.0))

    # unclipped: a clip would put a kink at offset = 0, right where real data sit;
    # the binomial weights already keep probabilities away from 0 and 1
    def model(q, t):
        env = np.exp(-LN2 * (t / q[1]) ** 2)
        return q[3] + q[2] * env * np.sin(np.pi * q[0] * t * 1e-3) ** 2

    p0 = np.array([init.rabi, init.envelope_hwhm, init.contrast, init.offset])
    p, cov, chi2, nit, degenerate = _weighted_fit(model, data.x, data.successes, data.trials,
                                                  p0, **lm)
    p[1] = abs(p[1])
    params = FlopParams(p[0], p[1], float(np.clip(p[2], 1e-12, 1.0)), max(float(p[3]), 0.0))
    return FitResult(params, p, ["rabi", "envelope_hwhm", "contrast", "offset"], cov, chi2,
                     {"pi_time_us": 1e3 / (2 * p[0])}, nit, degenerate)


def fit_decay(times, contrasts, model: str = "gaussian", **lm) -> FitResult:
    """Fit C0*exp(-(t/T)^2) or C0*exp(-t/T); the time constant is ``values[1]``.

    Unweighted; the covariance is scaled by the residual variance.
    """
    t = np.asarray(times, dtype=float)
    c = np.asarray(contrasts, dtype=float)
    if len(t) < 5:
        raise ValueError("need at least 5 points")
    if np.any(c < 0) or np.any(c > 1):
        raise ValueError("contrasts must lie in [0, 1]")
    model_decay(t[:1], 1.0, 1.0, model)  # validates the name
    c0 = float(c[np.argmin(t)])
    target = c0 / np.e
    below = np.nonzero(c <= target)[0]
    tau0 = float(t[below[0]]) if len(below) else float(t.max()) * 2
    tau0 = max(tau0, float(np.min(t[t > 0])) if np.any(t > 0) else 1.0)
    scale_t = tau0

    def resid(q):
        return c - model_decay(t, q[0], q[1] * scale_t, model)

    out = levenberg_marquardt(resid, [max(c0, 1e-3), 1.0], **lm)
    q = out.x.copy()
    r = resid(q)
    dof = max(len(t) - 2, 1)
    s2 = float(r @ r) / dof
    cov, degenerate = covariance_from_jacobian(out.jac, scale=s2)
    D = np.diag([1.0, scale_t])
    q[1] *= scale_t
    q[1] = abs(q[1])
    cov = D @ cov @ D
    return FitResult({"c0": q[0], "tau": q[1], "model": model}, q, ["c0", "tau"], cov, s2,
                     {}, out.n_iter, degenerate)


# -- file formats ------------------------------------------------------------

def write_counts_csv(path_or_buf, x, successes, trials, xname: str):
    rows = [[f"{a:.10g}", int(k), int(n)] for a, k, n in zip(x, successes, trials)]
    return _write_csv(path_or_buf, [xname, "successes", "trials"], rows)


def _write_csv(path_or_buf, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path_or_buf is None:
        return text
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        Path(path_or_buf).write_text(text)
    return text


def read_counts_csv(path, xname: str) -> CountData:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {xname, "successes", "trials"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(need)}")
        x, k, n = [], [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                x.append(float(row[xname]))
                k.append(int(row["successes"]))
                n.append(int(row["trials"]))
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{lineno}: malformed row {row}")
            if n[-1] <= 0 or not 0 <= k[-1] <= n[-1]:
                raise ValueError(f"{path}:{lineno}: invalid counts {k[-1]}/{n[-1]}")
    return CountData(np.array(x), np.array(k, dtype=float), np.array(n, dtype=float))


def read_scan_csv(path) -> list[ScanPoint]:
    d = read_counts_csv(path, "freq_offset_khz")
    return [ScanPoint(float(f), int(k), int(n)) for f, k, n in zip(d.x, d.successes, d.trials)]


def read_decay_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"time_us", "contrast"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns time_us,contrast")
        t, c = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                t.append(float(row["time_us"]))
                c.append(float(row["contrast"]))
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{lineno}: malformed row {row}")
    return np.array(t), np.array(c)
