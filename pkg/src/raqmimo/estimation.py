"""
Pilot phase: orthogonal-pilot observation, de-spreading, MMSE estimation and
the closed-form MSE / NMSE.

The scalar-gain MMSE form used here is exact because ``D`` is unitary diagonal
and the scattered covariance is a scaled identity, so the observation
covariance of ``y_k`` is ``(rho tau p alpha |Phi|^2 + sigma^2) I``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelRealization, complex_normal, draw_channel, lo_phases, los_matrix, los_steering
from .errors import InvalidParameterError, UndefinedNormalizationError
from .montecarlo import TrialPlan, run_trials
from .params import SystemConfig, UserLink, alpha


@dataclass(frozen=True)
class PilotBlock:
    Y: np.ndarray  # M x tau
    Q: np.ndarray  # tau x K, orthonormal columns
    P: np.ndarray  # K x K diagonal, sqrt(tau p^p_k)


@dataclass(frozen=True)
class EstimateSet:
    """Estimated channels plus closed-form per-user MSE (trace) and NMSE.

    NMSE is ``nan`` for pure-LoS users, where the normalization is undefined.
    """

    H_hat: np.ndarray
    mse: np.ndarray
    nmse: np.ndarray


def pilot_matrix(tau: int, K: int) -> np.ndarray:
    """First K columns of the unitary tau-point DFT matrix."""
    if K > tau:
        raise InvalidParameterError(f"need tau >= K for orthogonal pilots (tau={tau}, K={K})")
    return _dft_columns(tau, K).copy()


@lru_cache(maxsize=32)
def _dft_columns(tau: int, K: int) -> np.ndarray:
    t = np.arange(tau)[:, None]
    k = np.arange(K)[None, :]
    return np.exp(-2j * np.pi * t * k / tau) / math.sqrt(tau)


def observe_pilots(ch: ChannelRealization, cfg: SystemConfig, rng: np.random.Generator) -> PilotBlock:
    """``Y = sqrt(rho) Phi D H P Q^H + W`` with ``W`` entries CN(0, sigma^2)."""
    fe = cfg.front_end
    Q = pilot_matrix(cfg.tau, cfg.K)
    p = np.sqrt(cfg.tau * cfg.pilot_powers())
    W = complex_normal(rng, (cfg.M, cfg.tau)) * math.sqrt(fe.sigma2)
    # D H P as column/row scalings
    signal = math.sqrt(fe.rho) * fe.phi * (ch.d[:, None] * ch.H * p) @ Q.conj().T
    return PilotBlock(Y=signal + W, Q=Q, P=np.diag(p))


def despread(pb: PilotBlock, k: int) -> np.ndarray:
    """Correlate the pilot observation with user k's sequence: ``Y q_k``."""
    if not 0 <= k < pb.Q.shape[1]:
        raise InvalidParameterError(f"user index {k} out of range")
    return pb.Y @ pb.Q[:, k]


def _estimator_gain(user: UserLink, cfg: SystemConfig) -> complex:
    fe = cfg.front_end
    a = alpha(user)
    e = math.sqrt(fe.rho * cfg.tau * user.pilot_power)
    return e * a * fe.phi.conjugate() / (e * e * a * fe.phi_power + fe.sigma2)


def mmse_estimate(y_k: np.ndarray, user: UserLink, cfg: SystemConfig) -> np.ndarray:
    """MMSE estimate of ``h_k`` from its de-spread pilot observation."""
    hbar = los_steering(user.elevation, user.azimuth, cfg.M, cfg.element_spacing)
    prior = math.sqrt(user.los_power()) * hbar
    if user.is_los:
        return prior
    fe = cfg.front_end
    d = lo_phases(cfg)
    expected = math.sqrt(fe.rho * cfg.tau * user.pilot_power) * fe.phi * d * prior
    return prior + _estimator_gain(user, cfg) * d.conj() * (y_k - expected)


def estimate_matrix(pb: PilotBlock, cfg: SystemConfig) -> np.ndarray:
    """Estimate every user at once; same arithmetic as :func:`mmse_estimate`."""
    fe = cfg.front_end
    prior = los_matrix(cfg)
    d = lo_phases(cfg)[:, None]
    e = np.sqrt(fe.rho * cfg.tau * cfg.pilot_powers())
    g = np.array([_estimator_gain(u, cfg) for u in cfg.users])
    return prior + g * d.conj() * (pb.Y @ pb.Q - e * fe.phi * d * prior)


def mmse_estimates(pb: PilotBlock, cfg: SystemConfig) -> EstimateSet:
    return EstimateSet(
        H_hat=estimate_matrix(pb, cfg),
        mse=np.array([mse_closed_form(u, cfg) for u in cfg.users]),
        nmse=np.array([math.nan if u.is_los else nmse_closed_form(u, cfg) for u in cfg.users]),
    )


def _residual(user: UserLink, cfg: SystemConfig) -> float:
    # sigma^2 / (s + sigma^2) directly, 1 - mu loses digits at high pilot SNR
    fe = cfg.front_end
    s = fe.rho * cfg.tau * user.pilot_power * alpha(user) * fe.phi_power
    return fe.sigma2 / (s + fe.sigma2)


def mse_closed_form(user: UserLink, cfg: SystemConfig) -> float:
    """Trace of the error covariance: ``M alpha sigma^2 / (rho tau p alpha |Phi|^2 + sigma^2)``."""
    return cfg.M * alpha(user) * _residual(user, cfg)


def nmse_closed_form(user: UserLink, cfg: SystemConfig) -> float:
    if user.is_los:
        raise UndefinedNormalizationError("NMSE is undefined for a pure-LoS user (zero scattered variance)")
    return _residual(user, cfg)


@dataclass(frozen=True)
class EmpiricalMse:
    """Monte Carlo ``E{||h_k - hhat_k||^2}`` per user with standard errors."""

    mse: np.ndarray
    mse_stderr: np.ndarray
    trials: int


def simulate_batch(cfg: SystemConfig, rngs, *, estimate: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Channels and MMSE estimates for a batch of trials, one generator per trial.

    Each generator is consumed exactly as :func:`draw_channel` followed by
    :func:`observe_pilots` would consume it, so trial ``i`` is identical to the
    unbatched pipeline. Returns ``(H, H_hat, d)`` with shapes ``(n, M, K)`` and
    ``(M,)``; ``H_hat`` is ``H`` when ``estimate`` is false (perfect CSI).
    """
    M, K, tau = cfg.M, cfg.K, cfg.tau
    fe = cfg.front_end
    los = los_matrix(cfg)
    amp = np.sqrt(cfg.alphas())
    d = lo_phases(cfg)
    n = len(rngs)
    Z = np.empty((n, M, K), dtype=complex)
    W = np.empty((n, M, tau), dtype=complex) if estimate else None
    for i, rng in enumerate(rngs):
        Z[i] = complex_normal(rng, (M, K))
        if estimate:
            W[i] = complex_normal(rng, (M, tau))
    H = los + Z * amp
    if not estimate:
        return H, H, d
    Q = pilot_matrix(tau, K)
    e = np.sqrt(cfg.tau * cfg.pilot_powers())
    # Y Q = sqrt(rho) Phi D H P + W Q since Q^H Q = I
    YQ = math.sqrt(fe.rho) * fe.phi * d[None, :, None] * H * e + math.sqrt(fe.sigma2) * (W @ Q)
    g = np.array([_estimator_gain(u, cfg) for u in cfg.users])
    e_rho = np.sqrt(fe.rho) * e
    H_hat = los + g * d.conj()[None, :, None] * (YQ - e_rho * fe.phi * d[:, None] * los)
    return H, H_hat, d


def _error_evaluator(cfg: SystemConfig, rngs) -> np.ndarray:
    H, H_hat, _ = simulate_batch(cfg, rngs)
    return np.sum(np.abs(H - H_hat) ** 2, axis=1)


def empirical_mse(cfg: SystemConfig, trials: int = 10_000, seed: int = 0, *, workers: int = 1) -> EmpiricalMse:
    plan = TrialPlan(master_seed=seed, trials=trials, chunking=1000)
    stats = run_trials(cfg, plan, _error_evaluator, batched=True, workers=workers)
    return EmpiricalMse(stats.mean.copy(), stats.stderr, stats.count)
