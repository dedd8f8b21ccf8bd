"""
Linear detection and the Monte Carlo use-and-forget rate.

The empirical pipeline estimates every term of the decomposition from channel
draws (signal mean, leakage variance, interference and noise powers) and never
touches the closed forms in :mod:`raqmimo.bounds`; it is the oracle those forms
are checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegeneratePhaseError, InsufficientAntennasError, InvalidParameterError, SingularEstimateError
from .estimation import simulate_batch
from .montecarlo import RunningStats, TrialPlan, run_trials
from .params import SystemConfig

COND_LIMIT = 1e12
KINDS = ("mrc", "zf")


@dataclass(frozen=True)
class Combiner:
    C: np.ndarray
    kind: str


@dataclass(frozen=True)
class SinrTerms:
    """Expected powers of the decomposition for one user.

    ``ui_power`` has one entry per user; the entry at the user's own index is 0.
    """

    ds: complex
    ls_power: float
    ui_power: np.ndarray
    n_power: float

    @property
    def sinr(self) -> float:
        den = self.ls_power + float(np.sum(self.ui_power)) + self.n_power
        return abs(self.ds) ** 2 / den


@dataclass(frozen=True)
class RateEstimate:
    kind: str
    trials: int
    prefactor: float
    sinr: np.ndarray
    sinr_stderr: np.ndarray
    rate: np.ndarray
    rate_stderr: np.ndarray
    terms: tuple


def _diag(D) -> np.ndarray:
    D = np.asarray(D)
    return np.diag(D) if D.ndim == 2 else D


def mrc_combiner(H_hat: np.ndarray, D, phi: complex) -> Combiner:
    """``c_k = Phi D hhat_k``."""
    return Combiner(C=phi * _diag(D)[:, None] * H_hat, kind="mrc")


def zf_combiner(H_hat: np.ndarray, D, phi: complex) -> Combiner:
    """``C = A (A^H A)^{-1}`` with ``A = Phi D Hhat``, so ``C^H A = I``."""
    if phi == 0:
        raise DegeneratePhaseError("phase factor is zero; ZF is undefined")
    M, K = H_hat.shape
    if M <= K:
        raise InsufficientAntennasError(f"ZF needs M > K (M={M}, K={K})")
    A = phi * _diag(D)[:, None] * H_hat
    gram = A.conj().T @ A
    if not np.all(np.isfinite(gram)) or np.linalg.cond(gram) > COND_LIMIT:
        raise SingularEstimateError("estimated channel matrix is rank deficient")
    return Combiner(C=np.linalg.solve(gram, A.conj().T).conj().T, kind="zf")


def _batched_gains(kind: str, H: np.ndarray, H_hat: np.ndarray, d: np.ndarray, cfg: SystemConfig):
    """Per-trial gains ``G[k, k'] = sqrt(rho p_k') Phi c_k^H D h_k'`` and ``||c_k||^2``."""
    fe = cfg.front_end
    A = fe.phi * d[None, :, None] * H_hat
    if kind == "mrc":
        C = A
    elif kind == "zf":
        if fe.phi == 0:
            raise DegeneratePhaseError("phase factor is zero; ZF is undefined")
        if cfg.M <= cfg.K:
            raise InsufficientAntennasError(f"ZF needs M > K (M={cfg.M}, K={cfg.K})")
        gram = np.conj(np.swapaxes(A, 1, 2)) @ A
        cond = np.linalg.cond(gram)
        if not np.all(np.isfinite(cond)) or np.any(cond > COND_LIMIT):
            raise SingularEstimateError("estimated channel matrix is rank deficient")
        C = A @ np.linalg.inv(gram)
    else:
        raise InvalidParameterError(f"unknown detector {kind!r}")
    CH = np.conj(np.swapaxes(C, 1, 2))
    G = math.sqrt(fe.rho) * fe.phi * (CH @ (d[None, :, None] * H)) * np.sqrt(cfg.data_powers())[None, None, :]
    cnorm2 = np.sum(np.abs(C) ** 2, axis=1)
    return G, cnorm2


def _features(G: np.ndarray, cnorm2: np.ndarray, sigma2: float) -> np.ndarray:
    # layout per trial: Re g_kk (K), Im g_kk (K), |G|^2 row-major (K^2), noise (K)
    n, K, _ = G.shape
    g = np.diagonal(G, axis1=1, axis2=2)
    return np.concatenate([g.real, g.imag, (np.abs(G) ** 2).reshape(n, K * K), sigma2 * cnorm2], axis=1)


def trial_evaluator(kinds: Iterable[str], *, perfect_csi: bool = False):
    """Batched evaluator returning one feature block per detector, concatenated."""
    kinds = tuple(kinds)

    def evaluate(cfg: SystemConfig, rngs) -> np.ndarray:
        H, H_hat, d = simulate_batch(cfg, rngs, estimate=not perfect_csi)
        blocks = [_features(*_batched_gains(kind, H, H_hat, d, cfg), cfg.front_end.sigma2) for kind in kinds]
        return np.concatenate(blocks, axis=1)

    return evaluate


def _summarize(kind: str, stats: RunningStats, offset: int, cfg: SystemConfig) -> RateEstimate:
    K = cfg.K
    width = K * K + 3 * K
    mean = stats.mean[offset : offset + width]
    cov = stats.mean_covariance()[offset : offset + width, offset : offset + width]
    re, im = mean[:K], mean[K : 2 * K]
    pw = mean[2 * K : 2 * K + K * K].reshape(K, K)
    noise = mean[2 * K + K * K :]
    sinr, sinr_se, terms = np.zeros(K), np.zeros(K), []
    for k in range(K):
        S = re[k] ** 2 + im[k] ** 2
        total = pw[k].sum() + noise[k]
        den = total - S
        ui = pw[k].copy()
        ui[k] = 0.0
        terms.append(SinrTerms(ds=complex(re[k], im[k]), ls_power=float(pw[k, k] - S), ui_power=ui, n_power=float(noise[k])))
        sinr[k] = S / den
        # delta method through (Re DS, Im DS, row k of |G|^2, noise_k)
        grad = np.zeros(width)
        grad[k] = 2 * re[k] * total / den**2
        grad[K + k] = 2 * im[k] * total / den**2
        grad[2 * K + k * K : 2 * K + (k + 1) * K] = -S / den**2
        grad[2 * K + K * K + k] = -S / den**2
        sinr_se[k] = math.sqrt(max(grad @ cov @ grad, 0.0))
    pre = cfg.prefactor
    rate = pre * np.log2(1 + sinr)
    rate_se = pre * sinr_se / (math.log(2) * (1 + sinr))
    return RateEstimate(kind, stats.count, pre, sinr, sinr_se, rate, rate_se, tuple(terms))


def empirical_rates(
    cfg: SystemConfig,
    kinds: Iterable[str] = KINDS,
    trials: int = 10_000,
    seed: int = 0,
    *,
    perfect_csi: bool = False,
    workers: int = 1,
    chunking: int = 500,
) -> dict[str, RateEstimate]:
    """Monte Carlo rates for several detectors from one shared set of draws."""
    kinds = tuple(kinds)
    for kind in kinds:
        if kind not in KINDS:
            raise InvalidParameterError(f"unknown detector {kind!r}")
    plan = TrialPlan(master_seed=seed, trials=trials, chunking=chunking)
    stats = run_trials(cfg, plan, trial_evaluator(kinds, perfect_csi=perfect_csi), batched=True, workers=workers)
    width = cfg.K * cfg.K + 3 * cfg.K
    return {kind: _summarize(kind, stats, i * width, cfg) for i, kind in enumerate(kinds)}


def empirical_rate(cfg: SystemConfig, kind: str, trials: int = 10_000, seed: int = 0, **kw) -> RateEstimate:
    return empirical_rates(cfg, (kind,), trials, seed, **kw)[kind]
