"""Damped Gauss-Newton (Levenberg-Marquardt) with a numerical Jacobian."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class FitError(RuntimeError):
    """The optimizer ran out of iterations; ``best`` holds the best point found."""

    def __init__(self, message, best=None, cost=None):
        super().__init__(message)
        self.best = best
        self.cost = cost


@dataclass
class FitResult:
    params: Any
    values: np.ndarray
    names: list[str]
    covariance: np.ndarray
    chi2_per_dof: float
    derived: dict = field(default_factory=dict)
    n_iter: int = 0
    degenerate: bool = False

    @property
    def uncertainties(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def value(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.uncertainties[self.names.index(name)])


def numerical_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                       rel_step: float = 1e-6, abs_floor: float = 1e-9) -> np.ndarray:
    """Central-difference Jacobian, one column per parameter."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(len(x)):
        h = max(rel_step * abs(x[k]), abs_floor)
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        cols.append((fn(xp) - fn(xm)) / (2 * h))
    return np.column_stack(cols)


@dataclass
class LMOutcome:
    x: np.ndarray
    jac: np.ndarray
    cost: float
    n_iter: int


def levenberg_marquardt(residuals: Callable[[np.ndarray], np.ndarray], x0,
                        max_iter: int = 500, lam0: float = 1e-3, lam_up: float = 10.0,
                        lam_down: float = 3.0, ftol: float = 1e-12,
                        rel_step: float = 1e-6, abs_floor: float = 1e-9) -> LMOutcome:
    """Minimize ``sum(residuals(x)**2)``.

    Damping is multiplied by ``lam_up`` on a rejected step and divided by
    ``lam_down`` on an accepted one. Stops when an accepted step changes the
    cost by less than ``ftol`` relative, or when the damping saturates at a
    stationary point.
    """
    x = np.array(x0, dtype=float)
    r = residuals(x)
    cost = float(r @ r)
    lam = lam0
    for it in range(1, max_iter + 1):
        J = numerical_jacobian(residuals, x, rel_step, abs_floor)
        g = J.T @ r
        A = J.T @ J
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= lam_up
                continue
            xt = x + step
            rt = residuals(xt)
            ct = float(rt @ rt)
            if np.isfinite(ct) and ct <= cost:
                accepted = True
                break
            lam *= lam_up
        if not accepted:
            return LMOutcome(x, J, cost, it)
        change = cost - ct
        x, r = xt, rt
        lam = max(lam / lam_down, 1e-12)
        if change <= ftol * max(cost, 1e-300) or ct < 1e-30:
            cost = ct
            return LMOutcome(x, numerical_jacobian(residuals, x, rel_step, abs_floor), ct, it)
        cost = ct
    raise FitError(f"no convergence in {max_iter} iterations", best=x, cost=cost)


def covariance_from_jacobian(J: np.ndarray, scale: float = 1.0, rcond: float = 1e-12):
    """(J^T J)^-1 * scale, and a flag for rank deficiency."""
    A = J.T @ J
    s = np.linalg.svd(A, compute_uv=False)
    degenerate = bool(s.size and s[-1] <= rcond * s[0])
    cov = np.linalg.pinv(A, rcond=rcond, hermitian=True) * scale
    cov = 0.5 * (cov + cov.T)
    return cov, degenerate
