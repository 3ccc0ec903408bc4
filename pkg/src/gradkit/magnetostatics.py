"""
Biot-Savart fields of polyline current paths.

Every current path is a chain of straight thin-filament segments. The field of
a finite straight segment has a closed form,

    B = mu0 I / (4 pi) * (r1 x r2) (|r1| + |r2|) / (|r1| |r2| (|r1| |r2| + r1 . r2))

with r1, r2 the vectors from the segment endpoints to the field point. The
gradient tensor is obtained by differentiating that expression analytically.

Interface units: positions in micrometers, currents in milliamps, fields in
gauss, gradients in gauss/mm, power in milliwatts. SI is used internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .constants import MA, MU0, TESLA_TO_GAUSS, TPM_TO_GPMM, UM

MAX_CURRENT_MA = 500.0
SINGULARITY_EPS_UM = 0.1
TRAP_CENTER_UM = (0.0, 0.0, 100.0)

_KM = MU0 / (4 * np.pi)


class SingularityError(ValueError):
    """Field point lies on (or within epsilon of) a conductor segment."""

    def __init__(self, segment_index: int, a, b, point, distance: float):
        self.segment_index = segment_index
        self.a = tuple(a)
        self.b = tuple(b)
        self.point = tuple(point)
        self.distance = distance
        super().__init__(
            f"field point {self.point} is {distance:.3g} um from segment "
            f"#{segment_index} {self.a} -> {self.b}"
        )


class GeometryError(ValueError):
    """Malformed geometry file or invalid current path."""


def _as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite coordinates {arr}")
    return arr


@dataclass(frozen=True)
class CurrentPath:
    """A named polyline carrying a signed current.

    Positive current flows from ``vertices[0]`` toward ``vertices[-1]``.
    ``trace_width`` is only used by constraints and by the optional
    multi-filament subdivision.
    """

    name: str
    vertices: np.ndarray
    current: float
    trace_width: float = 10.0
    max_current: float = field(default=MAX_CURRENT_MA, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) < 2:
            raise GeometryError(f"path {self.name!r}: need >= 2 three-dimensional vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError(f"path {self.name!r}: non-finite vertex")
        seglen = np.linalg.norm(np.diff(v, axis=0), axis=1)
        if np.any(seglen == 0):
            k = int(np.argmin(seglen))
            raise GeometryError(f"path {self.name!r}: zero-length segment at vertex {k}")
        if not self.trace_width > 0:
            raise GeometryError(f"path {self.name!r}: trace_width must be positive")
        if abs(self.current) > self.max_current:
            raise GeometryError(
                f"path {self.name!r}: |current| {abs(self.current)} mA exceeds "
                f"{self.max_current} mA"
            )
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def n_segments(self) -> int:
        return len(self.vertices) - 1

    def scaled(self, factor: float) -> "CurrentPath":
        return CurrentPath(self.name, self.vertices, self.current * factor,
                           self.trace_width, max(self.max_current, abs(self.current * factor)))

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1).sum())


@dataclass(frozen=True)
class FieldSample:
    b: np.ndarray  # gauss
    grad: np.ndarray  # gauss/mm, grad[i, j] = dB_i/dx_j


@dataclass(frozen=True)
class SiteReport:
    b_total: np.ndarray  # gauss, paths + bias
    residual_b: np.ndarray  # gauss, paths only
    dBz_dy: float  # gauss/mm
    power: float  # mW
    grad: np.ndarray  # gauss/mm, full tensor of the path field

    @property
    def residual_mg(self) -> float:
        return float(np.linalg.norm(self.residual_b) * 1e3)


def _collect_segments(paths: Iterable[CurrentPath], filaments: int = 1):
    """Stack all segments as (A, B, I) arrays in SI units (m, m, A)."""
    a_list, b_list, i_list = [], [], []
    for path in paths:
        v = path.vertices
        a, b = v[:-1], v[1:]
        cur = np.full(len(a), path.current)
        if filaments > 1:
            d = b - a
            perp = np.cross(np.array([0.0, 0.0, 1.0]), d)
            norm = np.linalg.norm(perp, axis=1)
            vertical = norm < 1e-12 * np.linalg.norm(d, axis=1)
            perp[vertical] = [1.0, 0.0, 0.0]
            norm[vertical] = 1.0
            perp /= norm[:, None]
            offsets = ((np.arange(filaments) + 0.5) / filaments - 0.5) * path.trace_width
            for off in offsets:
                a_list.append(a + off * perp)
                b_list.append(b + off * perp)
                i_list.append(cur / filaments)
        else:
            a_list.append(a)
            b_list.append(b)
            i_list.append(cur)
    if not a_list:
        z = np.zeros((0, 3))
        return z, z, np.zeros(0)
    return (np.concatenate(a_list) * UM, np.concatenate(b_list) * UM,
            np.concatenate(i_list) * MA)


def _check_clearance(A, B, p, eps_m):
    """Raise SingularityError if p is within eps of any segment."""
    if len(A) == 0:
        return
    d = B - A
    t = np.einsum("ij,ij->i", p - A, d) / np.einsum("ij,ij->i", d, d)
    t = np.clip(t, 0.0, 1.0)
    closest = A + t[:, None] * d
    dist = np.linalg.norm(p - closest, axis=1)
    k = int(np.argmin(dist))
    if dist[k] <= eps_m:
        raise SingularityError(k, A[k] / UM, B[k] / UM, p / UM, dist[k] / UM)


def _field_and_gradient(A, B, I, p, want_grad=True):
    """Sum of segment fields (T) and gradients (T/m) at a single point p (m)."""
    r1 = p - A
    r2 = p - B
    R1 = np.linalg.norm(r1, axis=1)
    R2 = np.linalg.norm(r2, axis=1)
    dot = np.einsum("ij,ij->i", r1, r2)
    cross = np.cross(r1, r2)
    P = R1 * R2
    Q = P + dot
    N = R1 + R2
    D = P * Q
    g = N / D
    coef = _KM * I
    field = (coef * g) @ cross if len(A) else np.zeros(3)
    if not want_grad:
        return field, None

    u1 = r1 / R1[:, None]
    u2 = r2 / R2[:, None]
    dN = u1 + u2
    dP = R2[:, None] * u1 + R1[:, None] * u2
    dQ = dP + r1 + r2
    dD = dP * Q[:, None] + P[:, None] * dQ
    dg = dN / D[:, None] - (N / D**2)[:, None] * dD  # (m, 3): dg/dp_j

    # d(r1 x r2)/dp_j = e_j x (r2 - r1) = e_j x (A - B)
    w = A - B
    dcross = np.zeros((len(A), 3, 3))
    dcross[:, 0, 1] = w[:, 2]
    dcross[:, 0, 2] = -w[:, 1]
    dcross[:, 1, 0] = -w[:, 2]
    dcross[:, 1, 2] = w[:, 0]
    dcross[:, 2, 0] = w[:, 1]
    dcross[:, 2, 1] = -w[:, 0]
    grad = np.einsum("m,mij->ij", coef * g, dcross) + np.einsum(
        "m,mi,mj->ij", coef, cross, dg)
    return field, grad


def segment_field(a, b, current: float, p, eps: float = SINGULARITY_EPS_UM) -> np.ndarray:
    """Field in gauss of one straight filament from ``a`` to ``b`` (um) carrying
    ``current`` mA, evaluated at ``p`` (um)."""
    a, b, p = _as_point(a), _as_point(b), _as_point(p)
    if np.array_equal(a, b):
        raise GeometryError("segment endpoints coincide")
    A, B = a[None] * UM, b[None] * UM
    P = p * UM
    _check_clearance(A, B, P, eps * UM)
    f, _ = _field_and_gradient(A, B, np.array([current * MA]), P, want_grad=False)
    return f * TESLA_TO_GAUSS


def field_at(paths: Sequence[CurrentPath], p, eps: float = SINGULARITY_EPS_UM,
             filaments: int = 1) -> np.ndarray:
    """Total field of ``paths`` at ``p``, in gauss."""
    P = _as_point(p) * UM
    A, B, I = _collect_segments(paths, filaments)
    _check_clearance(A, B, P, eps * UM)
    f, _ = _field_and_gradient(A, B, I, P, want_grad=False)
    return f * TESLA_TO_GAUSS


def gradient_at(paths: Sequence[CurrentPath], p, eps: float = SINGULARITY_EPS_UM,
                filaments: int = 1) -> np.ndarray:
    """Gradient tensor ``grad[i, j] = dB_i/dx_j`` in gauss/mm.

    ``grad[2, 1]`` is the addressing gradient dBz/dy.
    """
    return sample(paths, p, eps, filaments).grad


def sample(paths: Sequence[CurrentPath], p, eps: float = SINGULARITY_EPS_UM,
           filaments: int = 1) -> FieldSample:
    P = _as_point(p) * UM
    A, B, I = _collect_segments(paths, filaments)
    _check_clearance(A, B, P, eps * UM)
    if len(A) == 0:
        return FieldSample(np.zeros(3), np.zeros((3, 3)))
    f, g = _field_and_gradient(A, B, I, P)
    return FieldSample(f * TESLA_TO_GAUSS, g * TPM_TO_GPMM)


def power_dissipated(current: float, resistance: float) -> float:
    """I^2 R for ``current`` in mA and ``resistance`` in ohm; returns mW."""
    if resistance < 0:
        raise ValueError(f"resistance must be non-negative, got {resistance}")
    # (mA)^2 * ohm = uW; one division keeps round inputs exact
    return current * current * resistance / 1000.0


def circuit_current(paths: Sequence[CurrentPath]) -> float:
    """The series (feed) current of a network: the largest |current| on any path."""
    return max((abs(p.current) for p in paths), default=0.0)


def site_report(paths: Sequence[CurrentPath], trap_center=TRAP_CENTER_UM,
                bias=(0.0, 0.0, 4.0), resistance: float = 0.2,
                axial: str = "component", filaments: int = 1) -> SiteReport:
    """Field, addressing gradient, residual and dissipated power at the trap site.

    ``axial="component"`` reports dBz/dy of the path field (the uniform bias adds
    no gradient). ``axial="magnitude"`` reports d|B_total|/dy instead.
    """
    s = sample(paths, trap_center, filaments=filaments)
    bias = _as_point(bias)
    b_total = s.b + bias
    if axial == "component":
        gy = float(s.grad[2, 1])
    elif axial == "magnitude":
        mag = np.linalg.norm(b_total)
        gy = float(b_total @ s.grad[:, 1] / mag) if mag > 0 else 0.0
    else:
        raise ValueError(f"unknown axial mode {axial!r}")
    power = power_dissipated(circuit_current(paths), resistance)
    return SiteReport(b_total=b_total, residual_b=s.b, dBz_dy=gy, power=power, grad=s.grad)


# -- geometry file -----------------------------------------------------------

def parse_geometry(text: str, source: str = "<string>",
                   max_current: float = MAX_CURRENT_MA) -> list[CurrentPath]:
    """Parse the line-oriented geometry format::

        # comment
        path <name> current=<mA> width=<um>
          pt <x> <y> <z>
          ...
        end
    """
    paths: list[CurrentPath] = []
    current_block = None

    def fail(lineno, msg):
        raise GeometryError(f"{source}:{lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kw = tok[0]
        if kw == "path":
            if current_block is not None:
                fail(lineno, f"path {current_block['name']!r} not closed with 'end'")
            if len(tok) < 2:
                fail(lineno, "path needs a name")
            block = {"name": tok[1], "current": None, "width": 10.0, "pts": [],
                     "line": lineno}
            for kv in tok[2:]:
                if "=" not in kv:
                    fail(lineno, f"expected key=value, got {kv!r}")
                k, v = kv.split("=", 1)
                try:
                    val = float(v)
                except ValueError:
                    fail(lineno, f"bad number {v!r} for {k}")
                if k == "current":
                    block["current"] = val
                elif k == "width":
                    block["width"] = val
                else:
                    fail(lineno, f"unknown attribute {k!r}")
            if block["current"] is None:
                fail(lineno, "path needs current=<mA>")
            current_block = block
        elif kw == "pt":
            if current_block is None:
                fail(lineno, "'pt' outside a path block")
            if len(tok) != 4:
                fail(lineno, "'pt' needs exactly three coordinates")
            try:
                xyz = [float(t) for t in tok[1:]]
            except ValueError:
                fail(lineno, f"bad coordinate in {line!r}")
            if not all(np.isfinite(xyz)):
                fail(lineno, "non-finite coordinate")
            pts = current_block["pts"]
            if pts and pts[-1][0] == xyz:
                fail(lineno, f"zero-length segment in path {current_block['name']!r}")
            pts.append((xyz, lineno))
        elif kw == "end":
            if current_block is None:
                fail(lineno, "'end' without 'path'")
            b = current_block
            if len(b["pts"]) < 2:
                fail(lineno, f"path {b['name']!r} has fewer than 2 points")
            try:
                paths.append(CurrentPath(b["name"], [p for p, _ in b["pts"]], b["current"],
                                         b["width"], max_current))
            except GeometryError as exc:
                fail(b["line"], str(exc))
            current_block = None
        else:
            fail(lineno, f"unknown keyword {kw!r}")
    if current_block is not None:
        fail(current_block["line"], f"path {current_block['name']!r} not closed with 'end'")
    return paths


def load_geometry(path, max_current: float = MAX_CURRENT_MA) -> list[CurrentPath]:
    path = Path(path)
    return parse_geometry(path.read_text(), str(path), max_current)


def format_geometry(paths: Sequence[CurrentPath], header: str | None = None) -> str:
    out = []
    if header:
        out.extend(f"# {h}" for h in header.splitlines())
    for p in paths:
        out.append(f"path {p.name} current={p.current:.10g} width={p.trace_width:.10g}")
        out.extend(f"  pt {x:.10g} {y:.10g} {z:.10g}" for x, y, z in p.vertices)
        out.append("end")
    return "\n".join(out) + "\n"
