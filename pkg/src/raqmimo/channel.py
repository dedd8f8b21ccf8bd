"""
LoS array response, LO phase matrix, path loss and Rician channel draws.

Random draws follow a fixed consumption order so that a stream built from the
same Philox key reproduces the same channel bit for bit:

1. real parts of the scattered component, row-major M x K
2. imaginary parts, same layout

Each entry is ``(x + 1j*y) / sqrt(2)`` with ``x, y`` standard normal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidParameterError
from .params import SystemConfig, UserLink


@dataclass(frozen=True)
class ChannelRealization:
    """One block-fading draw.

    ``H`` holds the full channel (columns ``h_k``), ``los`` the deterministic
    part ``sqrt(delta_k alpha_k) * hbar_k`` and ``D`` the diagonal LO phase
    matrix, stored as its diagonal vector ``d``.
    """

    H: np.ndarray
    los: np.ndarray
    d: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.d)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples; real block drawn before imaginary."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * (1.0 / math.sqrt(2.0))


def los_steering(theta_e: float, phi_az: float, M: int, spacing: float = 0.5) -> np.ndarray:
    """ULA response ``exp(-j 2 pi m (d/lambda) sin(theta_e) cos(phi_az))``, m = 0..M-1."""
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    u = math.sin(theta_e) * math.cos(phi_az)
    return _ula(u, M, spacing)


def _ula(u: float, M: int, spacing: float) -> np.ndarray:
    m = np.arange(M)
    return np.exp(-2j * np.pi * spacing * u * m)


def lo_phase_matrix(vartheta: float, M: int, spacing: float = 0.5) -> np.ndarray:
    """Diagonal matrix of LO phases across the sensors."""
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    return np.diag(_ula(math.sin(vartheta), M, spacing))


def pathloss_db(distance_km, carrier_ghz):
    """Free-space loss 92.45 + 20lg(d[km]) + 20lg(f[GHz]) in dB."""
    d = np.asarray(distance_km, dtype=float)
    f = np.asarray(carrier_ghz, dtype=float)
    if np.any(d <= 0) or np.any(f <= 0):
        raise InvalidParameterError("distance and carrier frequency must be > 0")
    out = 92.45 + 20.0 * np.log10(d) + 20.0 * np.log10(f)
    return float(out) if out.ndim == 0 else out


def steering_matrix(cfg: SystemConfig) -> np.ndarray:
    """Unit-modulus LoS responses ``hbar_k`` stacked as an M x K matrix."""
    return _steering_cached(cfg.num_sensors, cfg.element_spacing, tuple(u.spatial_frequency() for u in cfg.users)).copy()


@lru_cache(maxsize=64)
def _steering_cached(M: int, spacing: float, freqs: tuple) -> np.ndarray:
    return np.stack([_ula(u, M, spacing) for u in freqs], axis=1)


def los_matrix(cfg: SystemConfig) -> np.ndarray:
    """Columns ``sqrt(delta_k alpha_k) * hbar_k`` (``sqrt(beta_k) * hbar_k`` at the LoS flag)."""
    amp = np.sqrt([u.los_power() for u in cfg.users])
    return steering_matrix(cfg) * amp


def lo_phases(cfg: SystemConfig) -> np.ndarray:
    """Diagonal of the LO phase matrix for ``cfg``."""
    return _ula(math.sin(cfg.lo_arrival), cfg.num_sensors, cfg.element_spacing)


_GRAM_DIRECT_MAX = 4096


def steering_gram(cfg: SystemConfig) -> np.ndarray:
    """K x K matrix with entries ``hbar_k^H hbar_k'``.

    Large arrays use the geometric-series sum so no M x K matrix is formed.
    """
    if cfg.num_sensors <= _GRAM_DIRECT_MAX:
        A = steering_matrix(cfg)
        G = A.conj().T @ A
    else:
        u = np.array([usr.spatial_frequency() for usr in cfg.users])
        G = dirichlet_gram(u, cfg.num_sensors, cfg.element_spacing)
    np.fill_diagonal(G, cfg.num_sensors)
    return G


def dirichlet_gram(u: np.ndarray, M: int, spacing: float) -> np.ndarray:
    """``sum_m exp(j x m)`` with ``x = 2 pi spacing (u_k - u_k')``, in closed form."""
    x = 2 * np.pi * spacing * (u[:, None] - u[None, :])
    # m is an integer, so x only matters modulo 2 pi; reducing keeps sin(x/2) accurate near aliasing
    x = x - 2 * np.pi * np.round(x / (2 * np.pi))
    half = np.sin(x / 2)
    safe = np.where(half == 0, 1.0, half)
    mag = np.where(half == 0, float(M), np.sin(M * x / 2) / safe)
    return np.exp(0.5j * x * (M - 1)) * mag


def draw_channel(cfg: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw ``h_k = sqrt(delta alpha) hbar_k + sqrt(alpha) htilde_k`` for every user.

    Pure-LoS users still consume their share of the stream (the scattered term
    is multiplied by an exact zero), which keeps draws aligned when a single
    user's Rician factor is switched to the LoS flag.
    """
    los = los_matrix(cfg)
    nlos_amp = np.sqrt([u.alpha() for u in cfg.users])
    H = los + complex_normal(rng, (cfg.M, cfg.K)) * nlos_amp
    return ChannelRealization(H=H, los=los, d=lo_phases(cfg))


def user_geometry(radius_m: float, bearing: float, altitude_km: float) -> tuple[float, float, float]:
    """Slant range and array angles for a user at ``radius_m`` from the sub-satellite point.

    Returns ``(distance_km, elevation, azimuth)``. The elevation is measured
    from the array plane, so a user at the sub-satellite point sits at pi/2
    and the spatial frequency reduces to roughly ``cos(azimuth)``.
    """
    r_km = radius_m * 1e-3
    dist = math.hypot(altitude_km, r_km)
    return dist, math.atan2(altitude_km, r_km), bearing


def place_users(
    count: int,
    radius_m: float,
    altitude_km: float,
    rng: np.random.Generator,
) -> list[tuple[float, float, float]]:
    """Uniform placement in a disk; returns ``user_geometry`` tuples."""
    # sqrt of a uniform gives uniform area density
    r = radius_m * np.sqrt(rng.uniform(size=count))
    b = rng.uniform(0.0, 2 * np.pi, size=count)
    return [user_geometry(float(ri), float(bi), altitude_km) for ri, bi in zip(r, b)]


def user_from_geometry(
    distance_km: float,
    elevation: float,
    azimuth: float,
    carrier_ghz: float,
    rician: float,
    pilot_power: float,
    data_power: float,
    antenna_gain_db: float = 0.0,
) -> UserLink:
    beta = 10.0 ** ((antenna_gain_db - pathloss_db(distance_km, carrier_ghz)) / 10.0)
    return UserLink(
        beta=beta,
        rician=rician,
        elevation=elevation,
        azimuth=azimuth,
        pilot_power=pilot_power,
        data_power=data_power,
    )
