"""Equilibrium positions of a linear ion chain in a harmonic axial well."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import AMU, E_CHARGE, EPS0, MASS_CA40, MASS_SR88


class ConvergenceError(RuntimeError):
    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


@dataclass(frozen=True)
class Species:
    mass: float  # amu
    charge: int = 1
    name: str = ""

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.charge < 1:
            raise ValueError("charge must be >= 1")


SPECIES = {
    "Sr88": Species(MASS_SR88, 1, "Sr88"),
    "Ca40": Species(MASS_CA40, 1, "Ca40"),
}


def get_species(spec: str | float | Species) -> Species:
    """Look up a species by name (``Sr88``, ``Ca40``) or build one from a mass in amu."""
    if isinstance(spec, Species):
        return spec
    if isinstance(spec, str) and spec in SPECIES:
        return SPECIES[spec]
    try:
        mass = float(spec)
    except (TypeError, ValueError):
        raise ValueError(f"unknown species {spec!r}; use one of {sorted(SPECIES)} or a mass in amu")
    return Species(mass, 1, f"m{mass:g}")


@dataclass(frozen=True)
class ChainSolution:
    positions: np.ndarray  # um, ascending
    secular_freq: float  # kHz
    species: Species
    residual_force: float  # scaled units

    @property
    def n(self) -> int:
        return len(self.positions)


def length_scale(species: Species, secular_freq: float) -> float:
    """Coulomb length scale (q^2 / (4 pi eps0 m w^2))^(1/3) in um; frequency in kHz."""
    if not secular_freq > 0:
        raise ValueError(f"secular frequency must be positive, got {secular_freq}")
    q = species.charge * E_CHARGE
    m = species.mass * AMU
    w = 2 * np.pi * secular_freq * 1e3
    return float(np.cbrt(q * q / (4 * np.pi * EPS0 * m * w * w)) * 1e6)


def energy(u: np.ndarray) -> float:
    """Dimensionless potential energy: sum u^2/2 + sum_{i<j} 1/|u_i - u_j|."""
    d = np.abs(u[:, None] - u[None, :])
    iu = np.triu_indices(len(u), 1)
    return float(0.5 * np.sum(u * u) + np.sum(1.0 / d[iu]))


def forces(u: np.ndarray) -> np.ndarray:
    """Negative gradient of :func:`energy`."""
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return -u + np.sum(np.sign(diff) / diff**2, axis=1)


def _hessian(u: np.ndarray) -> np.ndarray:
    diff = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(diff, np.inf)
    c = 2.0 / diff**3
    h = -c
    np.fill_diagonal(h, 1.0 + c.sum(axis=1))
    return h


def _newton(u, max_iter, tol):
    e = energy(u)
    for _ in range(max_iter):
        f = forces(u)
        if np.max(np.abs(f)) <= tol:
            return u, True
        step = np.linalg.solve(_hessian(u), f)
        t = 1.0
        while t > 1e-8:
            trial = u + t * step
            if np.all(np.diff(trial) > 0):
                e_trial = energy(trial)
                if e_trial <= e + 1e-15 * abs(e):
                    break
            t *= 0.5
        else:
            return u, False
        u, e = trial, e_trial
    return u, np.max(np.abs(forces(u))) <= tol


def _coordinate_descent(u, max_sweeps, tol):
    u = u.copy()
    for _ in range(max_sweeps):
        for i in range(len(u)):
            for _ in range(20):
                d = u[i] - np.delete(u, i)
                f = -u[i] + np.sum(np.sign(d) / d**2)
                k = 1.0 + np.sum(2.0 / np.abs(d) ** 3)
                u[i] += f / k
        if np.max(np.abs(forces(u))) <= tol:
            return u, True
    return u, False


def equilibrium_positions(species: Species, secular_freq: float, n: int,
                          tol: float = 1e-10, max_iter: int = 200) -> ChainSolution:
    """Minimize the chain energy with damped Newton; coordinate descent as fallback."""
    if not 1 <= n <= 50:
        raise ValueError(f"n must be in [1, 50], got {n}")
    ell = length_scale(species, secular_freq)
    if n == 1:
        return ChainSolution(np.zeros(1), secular_freq, species, 0.0)
    half = n**0.9 / 2
    u0 = np.linspace(-half, half, n)
    u, ok = _newton(u0, max_iter, tol)
    if not ok:
        u, ok = _coordinate_descent(u, 10 * max_iter, tol)
    resid = float(np.max(np.abs(forces(u))))
    if not ok:
        raise ConvergenceError(f"chain of {n} ions did not converge (max force {resid:.3g})",
                               best=u * ell, residual=resid)
    return ChainSolution(u * ell, secular_freq, species, resid)


def spacings(solution: ChainSolution) -> np.ndarray:
    if solution.n < 2:
        raise ValueError("spacings need at least two ions")
    return np.diff(solution.positions)


def secular_from_sidebands(carrier: float, sideband: float) -> float:
    """Secular frequency as the carrier-to-first-sideband distance (same units in/out)."""
    if sideband == carrier:
        raise ValueError("sideband coincides with carrier")
    return abs(sideband - carrier)
