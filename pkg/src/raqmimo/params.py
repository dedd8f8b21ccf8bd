"""
Scenario parameters and the two front-end parameterizations.

Everything is stored in linear units. dB only appears in the helpers at the
bottom of this module and in the config reader.

A Rician factor of ``math.inf`` is a first-class value meaning "pure LoS":
``alpha`` is exactly zero and every downstream formula is specialized for it
instead of being evaluated at a large float.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InvalidParameterError

BOLTZMANN = 1.380649e-23  # J/K
SPEED_OF_LIGHT = 299_792_458.0  # m/s


def db_to_linear(x_db):
    out = 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(x_dbm):
    return db_to_linear(x_dbm) * 1e-3


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidParameterError(msg)


@dataclass(frozen=True)
class FrontEnd:
    """Equivalent-baseband receiver: gain ``rho``, phase factor ``phi``, noise ``sigma2``."""

    rho: float
    phi: complex
    sigma2: float
    name: str = "raqr"

    def __post_init__(self):
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "phi", complex(self.phi))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        _require(math.isfinite(self.rho) and self.rho > 0, f"rho must be finite and > 0, got {self.rho}")
        _require(math.isfinite(self.sigma2) and self.sigma2 > 0, f"sigma2 must be finite and > 0, got {self.sigma2}")
        # small slack for e^{-j theta} cos(varphi) round-off
        _require(abs(self.phi) <= 1.0 + 1e-12, f"|phi| must be <= 1, got {abs(self.phi)}")

    @property
    def phi_power(self) -> float:
        """|Phi|^2."""
        return abs(self.phi) ** 2

    def normalized_noise(self) -> float:
        """sigma^2 / (rho |Phi|^2); infinite when the phase factor vanishes."""
        g = self.rho * self.phi_power
        return math.inf if g == 0.0 else self.sigma2 / g

    def snr_gain(self) -> float:
        """rho |Phi|^2 / sigma^2, the reciprocal of :meth:`normalized_noise`."""
        return self.rho * self.phi_power / self.sigma2

    @classmethod
    def from_rf(cls, spec: "RfFrontEndSpec") -> "FrontEnd":
        return rf_front_end(spec)


@dataclass(frozen=True)
class RfFrontEndSpec:
    """Conventional antenna + LNA chain. Gains and noise factor are linear."""

    wavelength: float
    antenna_efficiency: float
    antenna_gain: float
    lna_gain: float
    temperature: float = 290.0
    bandwidth: float = 1.0
    noise_factor: float = 1.0

    def __post_init__(self):
        _require(self.wavelength > 0, "wavelength must be > 0")
        _require(0 < self.antenna_efficiency <= 1, "antenna efficiency must lie in (0, 1]")
        _require(self.antenna_gain > 0 and self.lna_gain > 0, "gains must be > 0")
        _require(self.temperature > 0 and self.bandwidth > 0, "temperature and bandwidth must be > 0")
        _require(self.noise_factor >= 1, f"noise factor must be >= 1, got {self.noise_factor}")

    @property
    def isotropic_aperture(self) -> float:
        return self.wavelength**2 / (4.0 * math.pi)

    def rho(self) -> float:
        return self.isotropic_aperture * self.antenna_efficiency * self.antenna_gain * self.lna_gain

    def sigma2_db(self) -> float:
        """Noise power in dBW: 10lg(k_B T0) + 10lg(B) + 10lg(F) + G_LNA[dB]."""
        return (
            10 * math.log10(BOLTZMANN * self.temperature)
            + 10 * math.log10(self.bandwidth)
            + 10 * math.log10(self.noise_factor)
            + 10 * math.log10(self.lna_gain)
        )


def rf_front_end(spec: RfFrontEndSpec) -> FrontEnd:
    """Conventional receiver as a :class:`FrontEnd` with ``phi = 1``."""
    return FrontEnd(rho=spec.rho(), phi=1.0, sigma2=10.0 ** (spec.sigma2_db() / 10.0), name="rf")


@dataclass(frozen=True)
class UserLink:
    """One single-antenna user.

    Parameters
    ----------
    beta : float
        Large-scale fading (linear).
    rician : float
        Rician factor delta (linear). ``math.inf`` for a deterministic LoS channel.
    elevation, azimuth : float
        Angles in radians; they enter only through ``sin(elevation) * cos(azimuth)``.
    pilot_power, data_power : float
        Transmit powers in watts.
    """

    beta: float
    rician: float = 0.0
    elevation: float = 0.0
    azimuth: float = 0.0
    pilot_power: float = 1.0
    data_power: float = 1.0

    def __post_init__(self):
        _require(math.isfinite(self.beta) and self.beta > 0, f"beta must be finite and > 0, got {self.beta}")
        _require(not math.isnan(self.rician) and self.rician >= 0, f"rician factor must be >= 0, got {self.rician}")
        _require(math.isfinite(self.elevation) and math.isfinite(self.azimuth), "angles must be finite")
        for p in (self.pilot_power, self.data_power):
            _require(math.isfinite(p) and p >= 0, f"powers must be finite and >= 0, got {p}")

    @property
    def is_los(self) -> bool:
        return math.isinf(self.rician)

    def alpha(self) -> float:
        return alpha(self)

    def los_power(self) -> float:
        """delta * alpha, the power of the deterministic part (beta at the LoS flag)."""
        if self.is_los:
            return self.beta
        return self.rician * self.beta / (self.rician + 1.0)

    def los_weight(self) -> float:
        """delta / (delta + 1), exactly 1 at the LoS flag."""
        return 1.0 if self.is_los else self.rician / (self.rician + 1.0)

    def nlos_weight(self) -> float:
        """1 / (delta + 1), exactly 0 at the LoS flag."""
        return 0.0 if self.is_los else 1.0 / (self.rician + 1.0)

    def spatial_frequency(self) -> float:
        return math.sin(self.elevation) * math.cos(self.azimuth)

    def mu(self, fe: FrontEnd, tau: int) -> float:
        return mu(self, fe, tau)


def alpha(user: UserLink) -> float:
    """Scattered-path variance beta / (delta + 1); zero for a pure-LoS user."""
    _require(math.isfinite(user.beta), "beta must be finite")
    if user.is_los:
        return 0.0
    return user.beta / (user.rician + 1.0)


def mu(user: UserLink, fe: FrontEnd, tau: int) -> float:
    """Channel-estimation gain coefficient, equal to 1 - NMSE."""
    _require(tau >= 1, "pilot length must be >= 1")
    s = fe.rho * tau * user.pilot_power * alpha(user) * fe.phi_power
    if s == 0.0:
        return 0.0
    return s / (s + fe.sigma2)


@dataclass(frozen=True)
class SystemConfig:
    num_sensors: int
    users: tuple
    pilot_length: int
    coherence: int
    front_end: FrontEnd
    element_spacing: float = 0.5
    lo_arrival: float = 0.0
    rf_baseline: Optional[FrontEnd] = None

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        _require(int(self.num_sensors) == self.num_sensors and self.num_sensors >= 1, "num_sensors must be a positive integer")
        _require(len(self.users) >= 1, "at least one user is required")
        _require(all(isinstance(u, UserLink) for u in self.users), "users must be UserLink instances")
        _require(self.pilot_length >= len(self.users), f"pilot length {self.pilot_length} < K={len(self.users)}: pilots cannot be orthogonal")
        _require(self.coherence > self.pilot_length, "coherence interval must exceed the pilot length")
        _require(self.element_spacing > 0, "element spacing must be > 0")
        _require(math.isfinite(self.lo_arrival), "LO arrival angle must be finite")

    @property
    def M(self) -> int:
        return int(self.num_sensors)

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def tau(self) -> int:
        return self.pilot_length

    @property
    def prefactor(self) -> float:
        """(T - tau) / T."""
        return (self.coherence - self.pilot_length) / self.coherence

    def betas(self) -> np.ndarray:
        return np.array([u.beta for u in self.users])

    def ricians(self) -> np.ndarray:
        return np.array([u.rician for u in self.users])

    def alphas(self) -> np.ndarray:
        return np.array([alpha(u) for u in self.users])

    def mus(self, fe: Optional[FrontEnd] = None) -> np.ndarray:
        fe = self.front_end if fe is None else fe
        return np.array([mu(u, fe, self.pilot_length) for u in self.users])

    def pilot_powers(self) -> np.ndarray:
        return np.array([u.pilot_power for u in self.users])

    def data_powers(self) -> np.ndarray:
        return np.array([u.data_power for u in self.users])

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    def map_users(self, **changes) -> "SystemConfig":
        """Copy with the same field overrides applied to every user."""
        return replace(self, users=tuple(replace(u, **changes) for u in self.users))
