"""
Operational reading of the SINR gain: transmit power, range and array size.

The closed-form factors come straight from the normalized-noise ratio. The
``equate_*`` solvers recover the same factors numerically by root-finding on
the closed-form bounds, which is how the factors are checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy.optimize import brentq

from .bounds import BoundInputs, noise_ratio, sinr
from .errors import InvalidParameterError
from .params import linear_to_db

REGIMES = ("general", "low_power_rayleigh")


@dataclass(frozen=True)
class BudgetReport:
    power_reduction_factor: float
    range_extension_factor: float
    antenna_reduction_factor: float
    regime: str

    @property
    def power_reduction_db(self) -> float:
        return linear_to_db(self.power_reduction_factor)

    @property
    def range_extension_db(self) -> float:
        # path-loss equivalent, 20 lg of the distance factor
        return 2 * linear_to_db(self.range_extension_factor)

    @property
    def antenna_reduction_db(self) -> float:
        return linear_to_db(self.antenna_reduction_factor)


def power_reduction(bi: BoundInputs) -> float:
    """Factor by which user powers can shrink while keeping the RF rate."""
    return noise_ratio(bi)


def range_extension(bi: BoundInputs) -> float:
    """Distance factor under the free-space square law."""
    return math.sqrt(power_reduction(bi))


def antenna_reduction(bi: BoundInputs, regime: str = "general") -> float:
    r = noise_ratio(bi)
    if regime == "general":
        return r
    if regime == "low_power_rayleigh":
        return r * r
    raise InvalidParameterError(f"regime must be one of {REGIMES}, got {regime!r}")


def budget_report(bi: BoundInputs, regime: str = "general") -> BudgetReport:
    return BudgetReport(
        power_reduction_factor=power_reduction(bi),
        range_extension_factor=range_extension(bi),
        antenna_reduction_factor=antenna_reduction(bi, regime),
        regime=regime,
    )


# ----------------------------------------------------------------------------
# Equate-bounds solvers
# ----------------------------------------------------------------------------

def _solve_increasing(f, lo: float, hi: float, *, xtol: float = 1e-12) -> float:
    """Root of an increasing function, widening the bracket geometrically if needed."""
    for _ in range(200):
        if f(lo) <= 0:
            break
        lo -= max(1.0, abs(lo))
    for _ in range(200):
        if f(hi) >= 0:
            break
        hi += max(1.0, abs(hi))
    return brentq(f, lo, hi, xtol=xtol, rtol=1e-14, maxiter=500)


def _scaled_powers(bi: BoundInputs, factor: float) -> BoundInputs:
    cfg = bi.cfg
    users = tuple(replace(u, pilot_power=u.pilot_power * factor, data_power=u.data_power * factor) for u in cfg.users)
    return BoundInputs.from_config(cfg.replace(users=users), bi.fe, bi.perfect_csi)


def equate_power(bi: BoundInputs, kind: str, k: int) -> float:
    """Solve for the common power scale c at which the RAQR bound matches the RF bound.

    Returns ``1/c``, the achieved power-reduction factor for user k.
    """
    target = math.log(sinr(bi.rf_inputs(), kind, k))

    def gap(log10_c: float) -> float:
        return math.log(sinr(_scaled_powers(bi, 10.0**log10_c), kind, k)) - target

    return 10.0 ** -_solve_increasing(gap, -3.0, 3.0)


def sinr_at_antennas(bi: BoundInputs, kind: str, k: int, M: float) -> float:
    """Bound at a real-valued array size, linear between neighbouring integers.

    Linear interpolation is exact under Rayleigh fading, where both bounds are
    affine in M. ZF is taken as zero at ``M <= K``.
    """
    lo = max(1, math.floor(M))
    hi = max(1, math.ceil(M))

    def at(m: int) -> float:
        if kind == "zf" and m <= bi.K:
            return 0.0
        inputs = BoundInputs.from_config(bi.cfg.replace(num_sensors=m), bi.fe, bi.perfect_csi)
        return sinr(inputs, kind, k)

    if lo == hi:
        return at(lo)
    t = M - lo
    return (1 - t) * at(lo) + t * at(hi)


def equate_antennas(bi: BoundInputs, kind: str, k: int) -> float:
    """Solve for the RAQR array size matching the RF bound at ``bi.M`` antennas.

    Returns ``M_RF / M_RAQ``.
    """
    target = sinr(bi.rf_inputs(), kind, k)
    floor_m = bi.K if kind == "zf" else 1

    def gap(M: float) -> float:
        return sinr_at_antennas(bi, kind, k, M) - target

    if gap(floor_m) >= 0:
        raise InvalidParameterError("RF bound is already met at the smallest admissible array; enlarge M")
    M_raq = _solve_increasing(gap, float(floor_m), float(bi.M), xtol=1e-9)
    return bi.M / M_raq
