"""
Parameterized S-shaped current path and a constrained gradient search over it.

Layout (chip surface z = 0, trap at ``(0, 0, trap_height)``, chain along y)::

    return branch A   -X,+R ------------------------------ +X,+R
                        |                                    |
    out-feed            |        -c,+p ============ +X,+p ---+
                        |          |
    centre leg          |        -c, 0 ============ +c, 0
                        |                             |
    in-feed           -X,-p ================= +c,-p   |
                        |                                    |
    return branch B   -X,-R ------------------------------ +X,-R

The legs run along x, so the centre leg puts a field gradient dBz/dy on the
trap. The layout maps onto itself under a half turn about z with the current
reversed, which pins Bz(centre) to zero; the pitch then trims By, and Bx is the
leftover set by how far the return branches sit from the S.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .magnetostatics import CurrentPath, GeometryError, gradient_at, site_report

MIN_TRACE_WIDTH_UM = 10.0
PENALTY = 1.0e6
PARAM_NAMES = ("s_leg_length", "s_leg_pitch", "trace_width", "return_path_offset")


class OptimizationError(RuntimeError):
    """No feasible design within the budget; ``best`` is the least-infeasible point."""

    def __init__(self, message, best=None, metrics=None, trace=None):
        super().__init__(message)
        self.best = best
        self.metrics = metrics
        self.trace = trace


@dataclass(frozen=True)
class SGeometryParams:
    s_leg_length: float = 800.0  # um
    s_leg_pitch: float = 60.0  # um
    trace_width: float = 10.0  # um
    return_path_offset: float = 40.0  # um
    n_s_turns: int = 1
    trap_height: float = 100.0  # um

    def __post_init__(self):
        for name in ("s_leg_length", "s_leg_pitch", "trace_width",
                     "return_path_offset", "trap_height"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise GeometryError(f"{name} must be positive, got {v}")
        if int(self.n_s_turns) != self.n_s_turns or self.n_s_turns < 0:
            raise GeometryError(f"n_s_turns must be a non-negative integer, got {self.n_s_turns}")

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in PARAM_NAMES], dtype=float)

    def with_vector(self, v) -> "SGeometryParams":
        return replace(self, **{k: float(x) for k, x in zip(PARAM_NAMES, v)})


# Pitch trimmed so By at the trap is ~0.1 mG at this leg length and offset;
# gives ~13.9 G/mm and ~11 mG of residual Bx at 300 mA.
REFERENCE_PARAMS = SGeometryParams(800.0, 56.26, 10.0, 40.0, 1)
# Short legs, tight returns and an untrimmed pitch: ~4.6 G/mm, ~140 mG.
DETUNED_START = SGeometryParams(600.0, 45.0, 10.0, 30.0, 1)


def build_geometry(params: SGeometryParams, current: float = 300.0,
                   max_current: float = 500.0) -> list[CurrentPath]:
    """Centre S-path plus two return branches carrying half the current each.

    ``n_s_turns`` counts legs on each side of the centre leg; zero gives a
    single straight feed under the trap. Raises ``GeometryError`` when traces
    would overlap.
    """
    w = params.trace_width
    n = int(params.n_s_turns)
    p = params.s_leg_pitch
    c = params.s_leg_length / 2
    d = params.return_path_offset
    X = c + d
    R = n * p + d
    if n > 0 and p <= w:
        raise GeometryError(f"leg pitch {p} um does not clear trace width {w} um")
    if d <= w:
        raise GeometryError(f"return offset {d} um does not clear trace width {w} um")
    if c <= w:
        raise GeometryError(f"leg length {2 * c} um too short for trace width {w} um")

    ys = [k * p for k in range(-n, n + 1)]
    # in-feed direction chosen so the centre leg always runs along +x
    s = 1.0 if n % 2 == 0 else -1.0
    pts = [(-s * X, ys[0], 0.0)]
    x = s * c
    if n == 0:
        pts.append((s * X, 0.0, 0.0))
    else:
        pts.append((x, ys[0], 0.0))
        for y in ys[1:-1]:
            pts.append((x, y, 0.0))
            x = -x
            pts.append((x, y, 0.0))
        pts.append((x, ys[-1], 0.0))
        pts.append((-x / c * X, ys[-1], 0.0))
    end = pts[-1]
    start = pts[0]
    half = current / 2
    paths = [
        CurrentPath("s_path", tuple(pts), current, w, max_current),
        CurrentPath("return_a", (end, (end[0], R, 0.0), (start[0], R, 0.0), start),
                    half, w, max_current),
        CurrentPath("return_b", (end, (end[0], -R, 0.0), (start[0], -R, 0.0), start),
                    half, w, max_current),
    ]
    return paths


@dataclass(frozen=True)
class DesignMetrics:
    gradient: float  # G/mm, dBz/dy at the trap
    residual: float  # mG, |path field| at the trap
    power: float  # mW
    feasible: bool
    residual_vector: tuple = (0.0, 0.0, 0.0)  # mG
    gradient_variation: float = 0.0  # largest relative change of dBz/dy within +-5 um

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class OptimizeSpec:
    current: float = 300.0  # mA
    bounds: dict = field(default_factory=lambda: {
        "s_leg_length": (300.0, 1200.0),
        "s_leg_pitch": (20.0, 150.0),
        "trace_width": (10.0, 30.0),
        "return_path_offset": (15.0, 150.0),
    })
    residual_max: float = 20.0  # mG
    power_max: float = 50.0  # mW
    budget: int = 500
    seed: int = 0
    resistance: float = 0.2  # ohm

    def __post_init__(self):
        if not self.bounds:
            raise ValueError("bounds must be non-empty")
        for k, (lo, hi) in self.bounds.items():
            if k not in PARAM_NAMES:
                raise ValueError(f"unknown bound parameter {k!r}; expected one of {PARAM_NAMES}")
            if not lo < hi:
                raise ValueError(f"bound for {k} must have lo < hi, got ({lo}, {hi})")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")

    def limits(self, init: SGeometryParams):
        """Lower and upper vectors over all searchable parameters (fixed ones pinned)."""
        v = init.as_vector()
        lo, hi = v.copy(), v.copy()
        for i, k in enumerate(PARAM_NAMES):
            if k in self.bounds:
                lo[i], hi[i] = self.bounds[k]
        return lo, hi


def parse_bounds(text: str, source: str = "<string>") -> dict:
    """Read ``name lo hi`` lines (``#`` comments allowed) into a bounds dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GeometryError(f"{source}:{lineno}: expected 'name lo hi', got {raw.strip()!r}")
        name = parts[0]
        if name not in PARAM_NAMES:
            raise GeometryError(f"{source}:{lineno}: unknown parameter {name!r}")
        try:
            lo, hi = float(parts[1]), float(parts[2])
        except ValueError:
            raise GeometryError(f"{source}:{lineno}: bounds must be numbers")
        if not lo < hi:
            raise GeometryError(f"{source}:{lineno}: need lo < hi")
        out[name] = (lo, hi)
    if not out:
        raise GeometryError(f"{source}: no bounds given")
    return out


def evaluate(params: SGeometryParams, current: float = 300.0, residual_max: float = 20.0,
             power_max: float = 50.0, resistance: float = 0.2) -> DesignMetrics:
    """Field metrics at the trap centre for a given layout and current (mA)."""
    paths = build_geometry(params, current)
    centre = (0.0, 0.0, params.trap_height)
    rep = site_report(paths, centre, resistance=resistance)
    res_vec = rep.residual_b * 1e3
    residual = float(np.linalg.norm(res_vec))
    g0 = float(rep.dBz_dy)
    if g0 != 0.0:
        g = [gradient_at(paths, (0.0, y, params.trap_height))[2, 1] for y in (-5.0, 5.0)]
        variation = float(max(abs(v - g0) for v in g) / abs(g0))
    else:
        variation = 0.0
    feasible = (residual <= residual_max and rep.power <= power_max
                and params.trace_width >= MIN_TRACE_WIDTH_UM)
    return DesignMetrics(g0, residual, float(rep.power), bool(feasible),
                         tuple(float(v) for v in res_vec), variation)


def _violation(params: SGeometryParams, m: DesignMetrics, spec: OptimizeSpec) -> float:
    v = max(0.0, m.residual - spec.residual_max) / spec.residual_max
    v += max(0.0, m.power - spec.power_max) / spec.power_max
    v += max(0.0, MIN_TRACE_WIDTH_UM - params.trace_width) / MIN_TRACE_WIDTH_UM
    return v


@dataclass
class TraceRow:
    evaluation: int
    params: SGeometryParams
    metrics: DesignMetrics | None
    objective: float
    best_objective: float


def _objective(params, spec):
    try:
        m = evaluate(params, spec.current, spec.residual_max, spec.power_max, spec.resistance)
    except (GeometryError, ValueError):
        # overlapping traces and similar construction failures
        return 2 * PENALTY, None
    if m.feasible:
        return -m.gradient, m
    return PENALTY + _violation(params, m, spec), m


def _key(obj, m):
    if m is None:
        return (obj, np.inf, np.inf)
    return (obj, m.power, m.residual)


def optimize(spec: OptimizeSpec, init: SGeometryParams, xtol: float = 1e-4,
             stall_iters: int = 40):
    """Maximize the trap gradient subject to residual, power and width limits.

    Nelder-Mead on the bounded parameters (rescaled to the unit box, clipped
    after every move) with restarts around the incumbent when the simplex
    collapses or stops improving. Returns ``(best_params, metrics, trace)``.
    """
    lo, hi = spec.limits(init)
    free = hi > lo
    x0 = init.as_vector()
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("initial parameters lie outside the bounds")
    span = np.where(free, hi - lo, 1.0)
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 0x5E0]))
    idx = np.flatnonzero(free)
    dim = len(idx)

    trace: list[TraceRow] = []
    best = {"key": (np.inf,), "params": None, "metrics": None}

    def to_params(u):
        v = x0.copy()
        v[idx] = lo[idx] + np.clip(u, 0.0, 1.0) * span[idx]
        return init.with_vector(v)

    class Budget(Exception):
        pass

    def f(u):
        if len(trace) >= spec.budget:
            raise Budget
        prm = to_params(u)
        obj, m = _objective(prm, spec)
        k = _key(obj, m)
        if k < best["key"]:
            best.update(key=k, params=prm, metrics=m)
        trace.append(TraceRow(len(trace), prm, m, obj, best["key"][0]))
        return obj

    u0 = (x0[idx] - lo[idx]) / span[idx]
    try:
        f(u0)
        scale = 0.1
        start = u0
        while True:
            _nelder_mead(f, start, scale, xtol, stall_iters, dim)
            bu = (best["params"].as_vector()[idx] - lo[idx]) / span[idx]
            start = np.clip(bu + rng.normal(0.0, 0.02, dim), 0.0, 1.0)
            scale = 0.05
    except Budget:
        pass

    if best["metrics"] is None or not best["metrics"].feasible:
        raise OptimizationError("no feasible design found within budget",
                                best=best["params"], metrics=best["metrics"], trace=trace)
    return best["params"], best["metrics"], trace


def _nelder_mead(f, u0, scale, xtol, stall_iters, dim):
    """Standard reflect/expand/contract/shrink on the unit box; returns on collapse or stall."""
    clip = lambda u: np.clip(u, 0.0, 1.0)
    simplex = [clip(u0)]
    for i in range(dim):
        e = np.zeros(dim)
        step = scale if u0[i] + scale <= 1.0 else -scale
        e[i] = step
        simplex.append(clip(u0 + e))
    vals = [f(u) for u in simplex]
    best_val, stall = min(vals), 0
    while True:
        order = np.argsort(vals, kind="stable")
        simplex = [simplex[i] for i in order]
        vals = [vals[i] for i in order]
        if vals[0] < best_val:
            best_val, stall = vals[0], 0
        else:
            stall += 1
        size = max(np.max(np.abs(u - simplex[0])) for u in simplex[1:])
        if size < xtol or stall >= stall_iters:
            return
        centroid = np.mean(simplex[:-1], axis=0)
        xr = clip(centroid + (centroid - simplex[-1]))
        fr = f(xr)
        if fr < vals[0]:
            xe = clip(centroid + 2.0 * (centroid - simplex[-1]))
            fe = f(xe)
            simplex[-1], vals[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < vals[-2]:
            simplex[-1], vals[-1] = xr, fr
        else:
            if fr < vals[-1]:
                xc = clip(centroid + 0.5 * (xr - centroid))
            else:
                xc = clip(centroid + 0.5 * (simplex[-1] - centroid))
            fc = f(xc)
            if fc < min(fr, vals[-1]):
                simplex[-1], vals[-1] = xc, fc
            else:
                for i in range(1, len(simplex)):
                    simplex[i] = clip(simplex[0] + 0.5 * (simplex[i] - simplex[0]))
                    vals[i] = f(simplex[i])


def trace_rows(trace) -> list[dict]:
    """Flatten a trace for CSV output."""
    rows = []
    for t in trace:
        m = t.metrics
        row = {"evaluation": t.evaluation}
        row.update({f"{k}_um": getattr(t.params, k) for k in PARAM_NAMES})
        row.update({
            "gradient_g_per_mm": m.gradient if m else float("nan"),
            "residual_mg": m.residual if m else float("nan"),
            "power_mw": m.power if m else float("nan"),
            "feasible": int(bool(m and m.feasible)),
            "objective": t.objective,
            "best_objective": t.best_objective,
        })
        rows.append(row)
    return rows


def params_to_dict(params: SGeometryParams) -> dict:
    return {f.name: getattr(params, f.name) for f in fields(params)}
