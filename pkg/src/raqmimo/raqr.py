"""Rydberg-receiver specific knobs: the LO phase factor and the Rabi helper."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

from scipy.constants import hbar

from .errors import InvalidParameterError


@dataclass(frozen=True)
class PhaseConfig:
    theta_l: float
    varphi: float


def phase_shift(pc: PhaseConfig) -> complex:
    """Phase factor (e^{-j(theta_l - varphi)} + e^{-j(theta_l + varphi)}) / 2."""
    return 0.5 * (cmath.exp(-1j * (pc.theta_l - pc.varphi)) + cmath.exp(-1j * (pc.theta_l + pc.varphi)))


def optimal_phi(candidates: Sequence[PhaseConfig]) -> PhaseConfig:
    """Grid search for the largest ``|Phi|``; the earliest candidate wins ties."""
    if not candidates:
        raise InvalidParameterError("candidate list is empty")
    best, best_mag = candidates[0], abs(phase_shift(candidates[0]))
    for pc in candidates[1:]:
        mag = abs(phase_shift(pc))
        # exact-tie semantics; e^{-j theta} cos(phi) is evaluated identically for equal phi
        if mag > best_mag:
            best, best_mag = pc, mag
    return best


def rabi_frequency(dipole_moment: float, field_amplitude: float, hbar_value: float = hbar) -> tuple[float, float]:
    """Return ``(Omega, f)`` with ``Omega = nu E / hbar`` in rad/s and ``f = Omega / 2pi`` in Hz.

    A zero field is accepted and gives zero splitting.
    """
    if not dipole_moment > 0:
        raise InvalidParameterError("dipole moment must be > 0")
    if field_amplitude < 0 or math.isnan(field_amplitude):
        raise InvalidParameterError("field amplitude must be >= 0")
    omega = dipole_moment * field_amplitude / hbar_value
    return omega, omega / (2 * math.pi)
