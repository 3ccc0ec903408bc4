"""
Per-ion qubit frequencies in a field gradient, and off-resonant crosstalk.

Rabi frequencies are in cycles (kHz): a resonant pi pulse lasts 1/(2 rabi).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import MU_B_OVER_H_MHZ_PER_G
from .ionchain import ChainSolution
from .magnetostatics import SiteReport


@dataclass(frozen=True)
class QubitConstants:
    delta_g: float = 2.0
    mu_b_over_h: float = MU_B_OVER_H_MHZ_PER_G  # MHz/G
    transition: str = "S1/2(-1/2)->D5/2(-5/2)"

    def __post_init__(self):
        if not self.delta_g > 0:
            raise ValueError("delta_g must be positive")

    @classmethod
    def from_lande(cls, g_lower: float, m_lower: float, g_upper: float, m_upper: float,
                   transition: str = "") -> "QubitConstants":
        """Differential g-factor |g_u m_u - g_l m_l| of a Zeeman pair."""
        return cls(abs(g_upper * m_upper - g_lower * m_lower), MU_B_OVER_H_MHZ_PER_G,
                   transition or f"m={m_lower:g}->m={m_upper:g}")

    @property
    def khz_per_gauss(self) -> float:
        return self.delta_g * self.mu_b_over_h * 1e3


SR88_QUBIT = QubitConstants()


def zeeman_shift(bz, constants: QubitConstants = SR88_QUBIT):
    """Linear Zeeman shift in kHz of the qubit line for a field ``bz`` in gauss."""
    return constants.khz_per_gauss * np.asarray(bz, dtype=float) * 1.0


def splitting(spacing: float, gradient: float, constants: QubitConstants = SR88_QUBIT) -> float:
    """Frequency separation (kHz) of two ions ``spacing`` um apart in ``gradient`` G/mm."""
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    return constants.khz_per_gauss * spacing * 1e-3 * gradient


def required_gradient(spacing: float, rabi_freq: float, margin: float = 1.0,
                      constants: QubitConstants = SR88_QUBIT) -> float:
    """Gradient (G/mm) whose splitting equals ``margin`` times the Rabi frequency."""
    if not spacing > 0 or not rabi_freq > 0:
        raise ValueError("spacing and rabi_freq must be positive")
    if margin < 1:
        raise ValueError("margin must be >= 1")
    return margin * rabi_freq / (constants.khz_per_gauss * spacing * 1e-3)


def excitation_probability(rabi, detuning, duration):
    """Generalized Rabi formula.

    Parameters
    ----------
    rabi : float or array
        Resonant Rabi frequency in kHz (cycles).
    detuning : float or array
        Laser detuning from the ion's line in kHz.
    duration : float or array
        Pulse length in microseconds.
    """
    rabi = np.asarray(rabi, dtype=float)
    detuning = np.asarray(detuning, dtype=float)
    w2 = rabi**2 + detuning**2
    w = np.sqrt(w2)
    env = np.divide(rabi**2, w2, out=np.ones_like(w2), where=w2 > 0)
    p = env * np.sin(np.pi * w * np.asarray(duration, dtype=float) * 1e-3) ** 2
    return p if p.ndim else float(p)


class Crosstalk(NamedTuple):
    instantaneous: float
    envelope: float
    time_averaged: float


def crosstalk_at_pi(rabi: float, splitting_khz: float) -> Crosstalk:
    """Excitation of a neighbour detuned by ``splitting_khz`` during a pi pulse on the target."""
    if not rabi > 0 or not splitting_khz > 0:
        raise ValueError("rabi and splitting must be positive")
    t_pi = 1e3 / (2 * rabi)  # us
    inst = excitation_probability(rabi, splitting_khz, t_pi)
    env = rabi**2 / (rabi**2 + splitting_khz**2)
    return Crosstalk(float(inst), float(env), float(env / 2))


@dataclass(frozen=True)
class AddressMap:
    ion_index: np.ndarray
    positions: np.ndarray  # um
    offsets: np.ndarray  # kHz, relative to the zero-gradient line
    rabi_freq: float  # kHz
    center_shift: float  # kHz

    def neighbour_crosstalk(self) -> np.ndarray:
        """Worst instantaneous crosstalk onto a nearest neighbour when each ion is addressed."""
        out = np.zeros(len(self.offsets))
        for i in range(len(self.offsets)):
            vals = []
            for j in (i - 1, i + 1):
                if 0 <= j < len(self.offsets):
                    delta = abs(self.offsets[j] - self.offsets[i])
                    t_pi = 1e3 / (2 * self.rabi_freq)
                    vals.append(excitation_probability(self.rabi_freq, delta, t_pi))
            out[i] = max(vals) if vals else 0.0
        return out


def build_address_map(chain: ChainSolution, site: SiteReport, rabi: float,
                      constants: QubitConstants = SR88_QUBIT) -> AddressMap:
    """Qubit frequency offset of each ion from its axial position and the site gradient."""
    if chain.n < 1:
        raise ValueError("empty chain")
    center_shift = float(zeeman_shift(site.residual_b[2], constants))
    pos = np.asarray(chain.positions, dtype=float)
    offsets = constants.khz_per_gauss * pos * 1e-3 * site.dBz_dy + center_shift
    return AddressMap(np.arange(len(pos)), pos, offsets, rabi, center_shift)
