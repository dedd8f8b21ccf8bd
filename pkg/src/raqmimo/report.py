"""Side-by-side view of a closed-form bound and its Monte Carlo counterpart."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .bounds import BoundInputs, RateBound, rate_bound
from .detection import RateEstimate, empirical_rates
from .params import SystemConfig


@dataclass(frozen=True)
class RateReport:
    kind: str
    bound: RateBound
    empirical: RateEstimate

    def confidence_interval(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        z = norm.ppf(0.5 + level / 2)
        half = z * self.empirical.rate_stderr
        return self.empirical.rate - half, self.empirical.rate + half

    def gap(self) -> np.ndarray:
        """Relative gap ``(empirical - bound) / empirical`` per user."""
        return (self.empirical.rate - self.bound.rate) / self.empirical.rate

    def margin_in_stderr(self) -> np.ndarray:
        """``(empirical - bound) / stderr``; ``inf`` where the estimate has no spread."""
        diff = self.empirical.rate - self.bound.rate
        se = self.empirical.rate_stderr
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff >= -1e-9 * np.abs(self.bound.rate), np.inf, -np.inf))

    def bound_holds(self, nsigma: float = 3.0) -> np.ndarray:
        return self.margin_in_stderr() >= -nsigma


def rate_reports(
    cfg: SystemConfig,
    kinds=("mrc", "zf"),
    trials: int = 10_000,
    seed: int = 0,
    *,
    perfect_csi: bool = False,
    workers: int = 1,
) -> dict[str, RateReport]:
    bi = BoundInputs.from_config(cfg, perfect_csi=perfect_csi)
    emp = empirical_rates(cfg, kinds, trials, seed, perfect_csi=perfect_csi, workers=workers)
    return {kind: RateReport(kind, rate_bound(bi, kind), emp[kind]) for kind in kinds}
