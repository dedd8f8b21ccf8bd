"""
Closed-form achievable-rate lower bounds and everything derived from them.

The MRC bound is evaluated with numerator and denominator divided by
``delta_k + 1``. The value is unchanged, but every
coefficient stays finite at ``delta_k = inf``, where ``delta/(delta+1) = 1``
and ``1/(delta+1) = 0`` are substituted exactly.

A front end only ever enters through its normalized noise
``sigma^2 / (rho |Phi|^2)``; see :attr:`BoundInputs.noise`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import steering_gram
from .errors import (
    ConfigurationError,
    DegenerateGeometryError,
    InsufficientAntennasError,
    InvalidParameterError,
    InvalidSpecializationError,
    NotDerivedError,
)
from .params import FrontEnd, SystemConfig

COND_LIMIT = 1e12


@dataclass(frozen=True)
class BoundInputs:
    """Per-user large-scale quantities for one front end, precomputed once."""

    cfg: SystemConfig
    fe: FrontEnd
    perfect_csi: bool
    p_d: np.ndarray
    p_p: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    residual: np.ndarray  # 1 - mu, computed without cancellation
    los_power: np.ndarray  # delta * alpha (beta at the LoS flag)
    w: np.ndarray  # delta / (delta + 1)
    s: np.ndarray  # 1 / (delta + 1)
    los_gram: np.ndarray  # hbar_k^H hbar_k'
    noise: float  # sigma^2 / (rho |Phi|^2)

    @classmethod
    def from_config(cls, cfg: SystemConfig, front_end: Optional[FrontEnd] = None, perfect_csi: bool = False) -> "BoundInputs":
        fe = cfg.front_end if front_end is None else front_end
        users = cfg.users
        noise = fe.normalized_noise()
        alpha = np.array([u.alpha() for u in users])
        p_p = cfg.pilot_powers()
        if perfect_csi:
            residual = np.zeros(cfg.K)
        elif math.isinf(noise):
            residual = np.ones(cfg.K)
        else:
            residual = noise / (cfg.tau * p_p * alpha + noise)
        return cls(
            cfg=cfg,
            fe=fe,
            perfect_csi=perfect_csi,
            p_d=cfg.data_powers(),
            p_p=p_p,
            beta=cfg.betas(),
            delta=cfg.ricians(),
            alpha=alpha,
            mu=1.0 - residual if perfect_csi else cfg.mus(fe),
            residual=residual,
            los_power=np.array([u.los_power() for u in users]),
            w=np.array([u.los_weight() for u in users]),
            s=np.array([u.nlos_weight() for u in users]),
            los_gram=steering_gram(cfg),
            noise=noise,
        )

    @property
    def M(self) -> int:
        return self.cfg.M

    @property
    def K(self) -> int:
        return self.cfg.K

    @property
    def tau(self) -> int:
        return self.cfg.tau

    @property
    def prefactor(self) -> float:
        return self.cfg.prefactor

    @property
    def rf(self) -> Optional[FrontEnd]:
        return self.cfg.rf_baseline

    @property
    def psi(self) -> np.ndarray:
        return np.diag(self.mu * self.alpha)

    def los_weighted_gram(self) -> np.ndarray:
        """``Hbar^H Hbar`` with ``Hbar = [sqrt(delta_k alpha_k) hbar_k]``."""
        a = np.sqrt(self.los_power)
        return a[:, None] * self.los_gram * a[None, :]

    def with_front_end(self, fe: FrontEnd) -> "BoundInputs":
        return BoundInputs.from_config(self.cfg, fe, self.perfect_csi)

    def rf_inputs(self) -> "BoundInputs":
        if self.rf is None:
            raise ConfigurationError("no RF baseline front end configured")
        return self.with_front_end(self.rf)

    def all_rayleigh(self) -> bool:
        return bool(np.all(self.delta == 0))

    def all_los(self) -> bool:
        return bool(np.all(np.isinf(self.delta)))


@dataclass(frozen=True)
class RateBound:
    kind: str
    sinr: np.ndarray
    prefactor: float
    rate: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rate", self.prefactor * np.log2(1.0 + self.sinr))


# ----------------------------------------------------------------------------
# Rate bounds
# ----------------------------------------------------------------------------

def _mrc_parts(bi: BoundInputs, k: int) -> tuple[float, float]:
    """Numerator and denominator of the MRC SINR, both divided by (delta_k + 1)."""
    lead = bi.mu[k] * bi.s[k] + bi.w[k]  # (mu_k + delta_k) / (delta_k + 1)
    num = bi.M * bi.p_d[k] * bi.beta[k] * lead**2
    others = np.arange(bi.K) != k
    cross = np.abs(bi.los_gram[k, others]) ** 2 / bi.M
    den = (
        np.sum(bi.p_d * (bi.w[k] * bi.alpha + bi.mu[k] * bi.s[k] * bi.beta))
        + bi.w[k] * np.sum(bi.p_d[others] * cross * bi.los_power[others])
    )
    if lead > 0:
        den += bi.noise * lead
    return num, den


def sinr_mrc(bi: BoundInputs, k: int) -> float:
    """MRC bound SINR for user k (also covers the LoS flag per user)."""
    if math.isinf(bi.noise):
        return 0.0
    num, den = _mrc_parts(bi, k)
    if num == 0.0:
        return 0.0
    return float(num / den)


def _zf_matrix(bi: BoundInputs) -> np.ndarray:
    """``Psi + Hbar^H Hbar / M``."""
    return bi.psi + bi.los_weighted_gram() / bi.M


def _hermitian_inverse(X: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(X)) or np.linalg.cond(X) > COND_LIMIT:
        raise DegenerateGeometryError("K x K matrix in the ZF bound is singular (collinear LoS users?)")
    Xi = np.linalg.solve(X, np.eye(X.shape[0]))
    return 0.5 * (Xi + Xi.conj().T)


def _zf_inverse_diag(bi: BoundInputs) -> np.ndarray:
    return np.real(np.diag(_hermitian_inverse(_zf_matrix(bi))))


def _zf_residual(bi: BoundInputs) -> float:
    """``sum_k' p_k' (alpha_k' - mu_k' alpha_k') + sigma^2 / (|Phi|^2 rho)``."""
    return float(np.sum(bi.p_d * bi.alpha * bi.residual) + bi.noise)


def sinr_zf(bi: BoundInputs, k: int) -> float:
    if bi.M <= bi.K:
        raise InsufficientAntennasError(f"ZF needs M > K (M={bi.M}, K={bi.K})")
    if math.isinf(bi.noise):
        return 0.0
    return float((bi.M - bi.K) * bi.p_d[k] / (_zf_residual(bi) * _zf_inverse_diag(bi)[k]))


_SINR = {"mrc": sinr_mrc, "zf": sinr_zf}


def sinr(bi: BoundInputs, kind: str, k: int) -> float:
    try:
        return _SINR[kind](bi, k)
    except KeyError:
        raise InvalidParameterError(f"unknown detector {kind!r}") from None


def sinrs(bi: BoundInputs, kind: str) -> np.ndarray:
    if kind == "zf":
        # one inversion for all users
        if bi.M <= bi.K:
            raise InsufficientAntennasError(f"ZF needs M > K (M={bi.M}, K={bi.K})")
        if math.isinf(bi.noise):
            return np.zeros(bi.K)
        return (bi.M - bi.K) * bi.p_d / (_zf_residual(bi) * _zf_inverse_diag(bi))
    return np.array([sinr(bi, kind, k) for k in range(bi.K)])


def rate_bound(bi: BoundInputs, kind: str) -> RateBound:
    return RateBound(kind, sinrs(bi, kind), bi.prefactor)


def rf_bound(bi: BoundInputs, kind: str, k: int) -> float:
    """Same bound evaluated with the conventional front end (Phi = 1)."""
    return sinr(bi.rf_inputs(), kind, k)


# ----------------------------------------------------------------------------
# Channel-specific forms
# ----------------------------------------------------------------------------

def _require_rayleigh(bi: BoundInputs) -> None:
    if not bi.all_rayleigh():
        raise InvalidSpecializationError("Rayleigh form needs delta_k = 0 for every user")


def _require_los(bi: BoundInputs) -> None:
    if not bi.all_los():
        raise InvalidSpecializationError("LoS form needs delta_k = inf for every user")


def delta_ri(bi: BoundInputs) -> float:
    """Residual ZF interference from estimation error, Rayleigh fading."""
    _require_rayleigh(bi)
    # p beta / (tau p^p beta + n) written as p beta (1 - mu) / n
    return float(np.sum(bi.p_d * bi.beta * bi.residual) / bi.noise)


def sinr_mrc_rayleigh(bi: BoundInputs, k: int) -> float:
    _require_rayleigh(bi)
    baseline = bi.M * bi.p_d[k] * bi.beta[k] / (np.sum(bi.p_d * bi.beta) + bi.noise)
    return float(baseline * bi.mu[k])


def sinr_zf_rayleigh(bi: BoundInputs, k: int) -> float:
    _require_rayleigh(bi)
    if bi.M <= bi.K:
        raise InsufficientAntennasError(f"ZF needs M > K (M={bi.M}, K={bi.K})")
    baseline = (bi.M - bi.K) * bi.p_d[k] * bi.beta[k] / bi.noise
    return float(baseline * bi.mu[k] / (1.0 + delta_ri(bi)))


def sinr_mrc_los(bi: BoundInputs, k: int) -> float:
    _require_los(bi)
    others = np.arange(bi.K) != k
    interf = np.sum(bi.p_d[others] * np.abs(bi.los_gram[k, others]) ** 2 / bi.M * bi.beta[others])
    return float(bi.M * bi.p_d[k] * bi.beta[k] / (interf + bi.noise))


def sinr_zf_los(bi: BoundInputs, k: int) -> float:
    _require_los(bi)
    if bi.M <= bi.K:
        raise InsufficientAntennasError(f"ZF needs M > K (M={bi.M}, K={bi.K})")
    b = np.sqrt(bi.beta)
    inv = _hermitian_inverse(b[:, None] * bi.los_gram * b[None, :] / bi.M)
    return float((bi.M - bi.K) * bi.p_d[k] / (bi.noise * inv[k, k].real))


def as_los(bi: BoundInputs) -> BoundInputs:
    """Same users with every Rician factor set to the LoS flag."""
    cfg = bi.cfg.map_users(rician=math.inf)
    return BoundInputs.from_config(cfg, bi.fe, bi.perfect_csi)


# ----------------------------------------------------------------------------
# RAQR versus RF
# ----------------------------------------------------------------------------

def noise_ratio(bi: BoundInputs) -> float:
    """``(rho |Phi|^2 / sigma^2) / (rho_RF / sigma_RF^2)``."""
    return bi.rf_inputs().noise / bi.noise


@dataclass(frozen=True)
class GainFactors:
    kind: str
    sinr_rf: float
    factors: tuple  # ((name, value), ...)

    def product(self) -> float:
        out = self.sinr_rf
        for _, v in self.factors:
            out *= v
        return out

    def as_dict(self) -> dict:
        return dict(self.factors)


def gain_decomposition(bi: BoundInputs, kind: str, k: int) -> GainFactors:
    """RAQR SINR written as the RF SINR times multiplicative correction factors.

    MRC: squared estimation-gain ratio and the ratio of the two denominators.
    ZF: ratio of residual-interference-plus-noise terms and ratio of the
    inverse-matrix diagonal elements.
    """
    rf = bi.rf_inputs()
    if kind == "mrc":
        lead = bi.mu[k] * bi.s[k] + bi.w[k]
        lead_rf = rf.mu[k] * rf.s[k] + rf.w[k]
        _, den = _mrc_parts(bi, k)
        _, den_rf = _mrc_parts(rf, k)
        factors = (("estimation", (lead / lead_rf) ** 2), ("denominator", den_rf / den))
    elif kind == "zf":
        factors = (
            ("residual", _zf_residual(rf) / _zf_residual(bi)),
            ("inverse", _zf_inverse_diag(rf)[k] / _zf_inverse_diag(bi)[k]),
        )
    else:
        raise InvalidParameterError(f"unknown detector {kind!r}")
    return GainFactors(kind, sinr(rf, kind, k), factors)


def rayleigh_gain_factors(bi: BoundInputs, kind: str, k: int) -> GainFactors:
    """Rayleigh-fading version of :func:`gain_decomposition` in explicit form."""
    _require_rayleigh(bi)
    rf = bi.rf_inputs()
    n, n_rf = bi.noise, rf.noise
    pilot = bi.tau * bi.p_p[k] * bi.beta[k]
    est = ("estimation", (pilot + n_rf) / (pilot + n))
    if kind == "mrc":
        load = float(np.sum(bi.p_d * bi.beta))
        factors = (("denominator", (load + n_rf) / (load + n)), est)
    elif kind == "zf":
        factors = (("residual", (delta_ri(rf) + 1) / (delta_ri(bi) + 1)), ("noise", n_rf / n), est)
    else:
        raise InvalidParameterError(f"unknown detector {kind!r}")
    return GainFactors(kind, sinr(rf, kind, k), factors)


def rate_delta(bi: BoundInputs, kind: str, k: int) -> float:
    """Exact bound difference ``R_RAQ - R_RF`` for user k."""
    rf = bi.rf_inputs()
    return bi.prefactor * (math.log2(1 + sinr(bi, kind, k)) - math.log2(1 + sinr(rf, kind, k)))


def rate_delta_asymptotic(bi: BoundInputs, kind: str, regime: str, channel: str, k: int) -> float:
    """Closed-form approximation of ``R_RAQ - R_RF`` in a limiting regime.

    ``channel`` is ``"rayleigh"``, ``"los"`` or ``"satellite"``; ``regime`` is
    ``"high"`` or ``"low"`` (SINR). Rayleigh low-SINR uses the squared
    normalized-noise ratio; the satellite regime only exists at low SINR.
    """
    if kind not in _SINR:
        raise InvalidParameterError(f"unknown detector {kind!r}")
    if regime not in ("high", "low"):
        raise InvalidParameterError(f"regime must be 'high' or 'low', got {regime!r}")
    r = noise_ratio(bi)
    pre = bi.prefactor
    if channel == "rayleigh":
        _require_rayleigh(bi)
        if regime == "high":
            return 0.0 if kind == "mrc" else pre * math.log2(r)
        return pre * math.log2(1 + rf_bound(bi, kind, k) * r**2)
    if channel == "los":
        _require_los(bi)
        if regime == "high":
            return 0.0 if kind == "mrc" else pre * math.log2(r)
        return pre * math.log2(1 + rf_bound(bi, kind, k) * r)
    if channel == "satellite":
        if regime == "high":
            raise NotDerivedError("no high-SINR closed form for the satellite regime")
        return pre * math.log2(1 + rf_bound(as_los(bi), kind, k) * r)
    raise NotDerivedError(f"no asymptotic form for channel {channel!r}")


# ----------------------------------------------------------------------------
# Power scaling
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingLimit:
    case: str  # "vanishing", "non-vanishing" or "diverging"
    sinr: Optional[float] = None
    rate: Optional[float] = None


def _classify(exponent: float) -> str:
    if abs(exponent) < 1e-12:
        return "non-vanishing"
    return "diverging" if exponent > 0 else "vanishing"


def power_scaling_limit(bi: BoundInputs, k: int, E: float, eps_d: float, eps_p: float) -> ScalingLimit:
    """Large-M behaviour of user k's SINR when ``p^d = E/M^eps_d`` and ``tau p^p = E/M^eps_p``.

    Every user follows the same scaling. The case is read off the exponent of
    M in the SINR; for the non-vanishing case the limiting SINR is returned
    together with the rate (prefactor included). With ``eps_d, eps_p > 0``
    the limits reduce to ``(E beta / n)^2`` without LoS and
    ``E delta alpha / n`` with LoS, ``n`` being the normalized noise.
    """
    if not E > 0:
        raise InvalidParameterError("E must be > 0")
    n = bi.noise
    beta, alpha, los = bi.beta[k], bi.alpha[k], bi.los_power[k]
    if bi.delta[k] == 0:
        exponent = 1 - eps_d - max(eps_p, 0.0) - max(-eps_d, 0.0)
        case = _classify(exponent)
        if case != "non-vanishing":
            return ScalingLimit(case)
        if eps_d > 0:
            mu_inf = {1: 0.0, 0: beta * E / (beta * E + n), -1: 1.0}[int(np.sign(eps_p))]
            lim = (E * beta / n) ** 2 if eps_p > 0 else E * beta * mu_inf / n
        elif eps_d == 0:
            lim = (E * beta) ** 2 / (n * (n + E * float(np.sum(bi.beta))))
        else:
            lim = E * beta**2 / (n * float(np.sum(bi.beta)))
    else:
        exponent = 1 - eps_d - max(-eps_d, 0.0)
        case = _classify(exponent)
        if case != "non-vanishing":
            return ScalingLimit(case)
        if eps_p > 0:
            mu_inf = 0.0
        elif eps_p == 0:
            mu_inf = E * alpha / (E * alpha + n)
        else:
            mu_inf = 1.0
        lim = E * (los + mu_inf * alpha) / n
    return ScalingLimit(case, lim, bi.prefactor * math.log2(1 + lim))


def scaled_config(cfg: SystemConfig, M: int, E: float, eps_d: float, eps_p: float) -> SystemConfig:
    """``cfg`` at array size M with the power-scaling law applied to all users."""
    return cfg.replace(num_sensors=M).map_users(
        data_power=E / M**eps_d,
        pilot_power=E / M**eps_p / cfg.tau,
    )


# ----------------------------------------------------------------------------
# Central-Wishart approximation
# ----------------------------------------------------------------------------

def wishart_inverse_mean(bi: BoundInputs) -> np.ndarray:
    """Approximate ``E{(Hhat^H Hhat)^{-1}}`` as ``(Psi + Hbar^H Hbar / M)^{-1} / (M - K)``."""
    if bi.M <= bi.K:
        raise InsufficientAntennasError(f"need M > K (M={bi.M}, K={bi.K})")
    return _hermitian_inverse(_zf_matrix(bi)) / (bi.M - bi.K)
