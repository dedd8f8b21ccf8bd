"""
Command-line front end.

Every command writes rows with the fixed header ``axis,value,user,quantity,
front_end,detector,mean,stderr``. Closed-form rows leave ``stderr`` empty. The
CSV is assembled in memory and written atomically, so a failing run leaves no
output file behind. Exit status: 0 on success, 1 when a built-in check fails,
2 on bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from . import bounds as B
from .channel import pathloss_db
from .config import Scenario, load_scenario
from .detection import empirical_rates
from .errors import ConfigurationError, NotDerivedError, RaqMimoError
from .estimation import empirical_mse, mse_closed_form, nmse_closed_form
from .linkbudget import antenna_reduction, budget_report, equate_antennas, equate_power
from .params import FrontEnd, SystemConfig, dbm_to_watts
from .raqr import PhaseConfig, phase_shift

HEADER = ("axis", "value", "user", "quantity", "front_end", "detector", "mean", "stderr")
AXES = ("pilot_power", "data_power", "M", "distance", "rician", "phase_varphi")
DETECTORS = {"mrc": ("mrc",), "zf": ("zf",), "both": ("mrc", "zf")}


class CheckFailed(Exception):
    """A command's built-in assertion did not hold."""


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


@dataclass
class Rows:
    rows: list

    def add(self, axis, value, user, quantity, front_end, detector, mean, stderr=None) -> None:
        self.rows.append((axis, "" if value is None else _fmt(value), "" if user is None else str(user), quantity, front_end, detector, _fmt(mean), _fmt(stderr)))

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(self.rows)
        return buf.getvalue()


def write_atomic(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".raqmimo-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ----------------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------------

def parse_grid(text: str) -> list[float]:
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"grid must be comma-separated numbers, got {text!r}") from None
    if not grid:
        raise ConfigurationError("grid is empty")
    if any(math.isnan(v) for v in grid):
        raise ConfigurationError("grid contains nan")
    diffs = np.diff(grid)
    if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ConfigurationError("grid must be strictly monotone")
    return grid


def apply_axis(sc: Scenario, axis: str, value: float, db: bool = False) -> SystemConfig:
    """Scenario config with one swept quantity overridden for every user."""
    cfg = sc.cfg
    if axis in ("pilot_power", "data_power"):
        return cfg.map_users(**{axis: dbm_to_watts(value) if db else value})
    if axis == "M":
        if value != int(value) or value < 1:
            raise ConfigurationError(f"M grid values must be positive integers, got {value}")
        return cfg.replace(num_sensors=int(value))
    if axis == "rician":
        return cfg.map_users(rician=value)
    if axis == "distance":
        if sc.carrier_ghz is None:
            raise ConfigurationError("distance sweeps need carrier_ghz in [system]")
        beta = 10.0 ** ((sc.user_gain_db - pathloss_db(value, sc.carrier_ghz)) / 10.0)
        return cfg.map_users(beta=beta)
    if axis == "phase_varphi":
        theta = sc.phase.theta_l if sc.phase is not None else 0.0
        fe = cfg.front_end
        return cfg.replace(front_end=FrontEnd(fe.rho, phase_shift(PhaseConfig(theta, value)), fe.sigma2, fe.name))
    raise ConfigurationError(f"unknown axis {axis!r}; choose from {', '.join(AXES)}")


def sweep_points(sc: Scenario, args) -> Iterable[tuple[str, Optional[float], SystemConfig]]:
    if args.axis is None:
        if args.grid is not None:
            raise ConfigurationError("--grid needs --axis")
        yield "none", None, sc.cfg
        return
    if args.grid is None:
        raise ConfigurationError("--axis needs --grid")
    for v in parse_grid(args.grid):
        yield args.axis, v, apply_axis(sc, args.axis, v, args.db)


def _front_ends(cfg: SystemConfig, with_rf: bool) -> list[tuple[str, SystemConfig]]:
    out = [("raqr", cfg)]
    if with_rf:
        if cfg.rf_baseline is None:
            raise ConfigurationError("this command needs an [rf_baseline] section")
        out.append(("rf", cfg.replace(front_end=cfg.rf_baseline)))
    return out


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------

def cmd_estimate(sc: Scenario, args, rows: Rows) -> None:
    for axis, value, cfg in sweep_points(sc, args):
        for fe_name, c in _front_ends(cfg, cfg.rf_baseline is not None):
            emp = empirical_mse(c, args.trials, args.seed, workers=args.workers) if args.trials > 0 else None
            for k, u in enumerate(c.users):
                rows.add(axis, value, k, "mse", fe_name, "", mse_closed_form(u, c))
                if not u.is_los:
                    rows.add(axis, value, k, "nmse", fe_name, "", nmse_closed_form(u, c))
                if emp is not None:
                    rows.add(axis, value, k, "empirical_mse", fe_name, "", emp.mse[k], emp.mse_stderr[k])
                    if not u.is_los:
                        scale = c.M * u.alpha()
                        rows.add(axis, value, k, "empirical_nmse", fe_name, "", emp.mse[k] / scale, emp.mse_stderr[k] / scale)


def cmd_rate(sc: Scenario, args, rows: Rows) -> None:
    kinds = DETECTORS[args.detector]
    breaches = []
    for axis, value, cfg in sweep_points(sc, args):
        for fe_name, c in _front_ends(cfg, args.rf):
            bi = B.BoundInputs.from_config(c, perfect_csi=args.perfect_csi)
            emp = empirical_rates(c, kinds, args.trials, args.seed, perfect_csi=args.perfect_csi, workers=args.workers) if args.trials > 0 else {}
            for kind in kinds:
                rb = B.rate_bound(bi, kind)
                for k in range(c.K):
                    rows.add(axis, value, k, "rate_bound", fe_name, kind, rb.rate[k])
                    if kind not in emp:
                        continue
                    e = emp[kind]
                    rows.add(axis, value, k, "empirical_rate", fe_name, kind, e.rate[k], e.rate_stderr[k])
                    slack = max(3 * e.rate_stderr[k], 1e-9 * abs(rb.rate[k]))
                    if e.rate[k] < rb.rate[k] - slack:
                        breaches.append(f"axis={axis} value={_fmt(value)} user={k} front_end={fe_name} detector={kind}: empirical {e.rate[k]:.6g} < bound {rb.rate[k]:.6g} - 3*stderr")
    if breaches:
        raise CheckFailed("bound exceeded the empirical rate:\n  " + "\n  ".join(breaches))


def cmd_scaling(sc: Scenario, args, rows: Rows) -> None:
    kinds = DETECTORS[args.detector]
    grid = parse_grid(args.grid) if args.grid else [1e2, 1e3, 1e4, 1e5]
    if any(m != int(m) or m < 1 for m in grid):
        raise ConfigurationError("scaling grid holds array sizes and must be positive integers")
    last = {}
    limits = None
    for m in grid:
        cfg = B.scaled_config(sc.cfg, int(m), args.E, args.eps_d, args.eps_p)
        bi = B.BoundInputs.from_config(cfg)
        if limits is None:
            limits = [B.power_scaling_limit(bi, k, args.E, args.eps_d, args.eps_p) for k in range(cfg.K)]
        emp = empirical_rates(cfg, kinds, args.trials, args.seed, workers=args.workers) if args.trials > 0 else {}
        for kind in kinds:
            rb = B.rate_bound(bi, kind)
            for k in range(cfg.K):
                rows.add("M", m, k, "rate_bound", "raqr", kind, rb.rate[k])
                lim = limits[k]
                lim_rate = {"vanishing": 0.0, "diverging": math.inf}.get(lim.case, lim.rate)
                rows.add("M", m, k, "rate_limit", "raqr", kind, lim_rate)
                if kind in emp:
                    rows.add("M", m, k, "empirical_rate", "raqr", kind, emp[kind].rate[k], emp[kind].rate_stderr[k])
                last[kind, k] = rb.rate[k]
    bad = []
    for (kind, k), r in last.items():
        lim = limits[k]
        if lim.case == "non-vanishing" and abs(r - lim.rate) > 0.05 * lim.rate:
            bad.append(f"user={k} detector={kind}: rate {r:.6g} at M={int(grid[-1])} vs limit {lim.rate:.6g}")
    if bad:
        raise CheckFailed("final-M rate is not within 5% of the scaling limit:\n  " + "\n  ".join(bad))


def _channel_class(bi: B.BoundInputs) -> str:
    if bi.all_rayleigh():
        return "rayleigh"
    if bi.all_los():
        return "los"
    return "satellite"


def cmd_compare(sc: Scenario, args, rows: Rows) -> None:
    kinds = DETECTORS[args.detector]
    if sc.cfg.rf_baseline is None:
        raise ConfigurationError("compare needs an [rf_baseline] section")
    for axis, value, cfg in sweep_points(sc, args):
        bi = B.BoundInputs.from_config(cfg)
        rf = bi.rf_inputs()
        channel = _channel_class(bi)
        for kind in kinds:
            s_raq, s_rf = B.sinrs(bi, kind), B.sinrs(rf, kind)
            for k in range(cfg.K):
                rows.add(axis, value, k, "sinr_bound", "raqr", kind, s_raq[k])
                rows.add(axis, value, k, "sinr_bound", "rf", kind, s_rf[k])
                rows.add(axis, value, k, "rate_bound", "raqr", kind, bi.prefactor * math.log2(1 + s_raq[k]))
                rows.add(axis, value, k, "rate_bound", "rf", kind, bi.prefactor * math.log2(1 + s_rf[k]))
                for name, f in B.gain_decomposition(bi, kind, k).factors:
                    rows.add(axis, value, k, f"gain_{name}", "raqr/rf", kind, f)
                rows.add(axis, value, k, "rate_delta", "raqr-rf", kind, B.rate_delta(bi, kind, k))
                for regime in ("high", "low"):
                    try:
                        d = B.rate_delta_asymptotic(bi, kind, regime, channel, k)
                    except NotDerivedError:
                        continue
                    rows.add(axis, value, k, f"rate_delta_{regime}_{channel}", "raqr-rf", kind, d)


def cmd_budget(sc: Scenario, args, rows: Rows) -> None:
    kinds = DETECTORS[args.detector]
    if sc.cfg.rf_baseline is None:
        raise ConfigurationError("budget needs an [rf_baseline] section")
    for axis, value, cfg in sweep_points(sc, args):
        bi = B.BoundInputs.from_config(cfg)
        rep = budget_report(bi)
        rows.add(axis, value, None, "power_reduction", "raqr/rf", "", rep.power_reduction_factor)
        rows.add(axis, value, None, "power_reduction_db", "raqr/rf", "", rep.power_reduction_db)
        rows.add(axis, value, None, "range_extension", "raqr/rf", "", rep.range_extension_factor)
        rows.add(axis, value, None, "range_extension_db", "raqr/rf", "", rep.range_extension_db)
        regimes = ["general"] + (["low_power_rayleigh"] if bi.all_rayleigh() else [])
        for regime in regimes:
            f = antenna_reduction(bi, regime)
            rows.add(axis, value, None, f"antenna_reduction_{regime}", "raqr/rf", "", f)
            rows.add(axis, value, None, f"antenna_reduction_{regime}_db", "raqr/rf", "", 10 * math.log10(f))
            rows.add(axis, value, None, f"antennas_required_{regime}", "raqr", "", max(1, math.ceil(cfg.M / f)))
        if args.verify:
            for kind in kinds:
                for k in range(cfg.K):
                    rows.add(axis, value, k, "equate_power_reduction", "raqr/rf", kind, equate_power(bi, kind, k))
                    try:
                        rows.add(axis, value, k, "equate_antenna_reduction", "raqr/rf", kind, equate_antennas(bi, kind, k))
                    except RaqMimoError:
                        continue


COMMANDS: dict[str, Callable] = {
    "estimate": cmd_estimate,
    "rate": cmd_rate,
    "scaling": cmd_scaling,
    "compare": cmd_compare,
    "budget": cmd_budget,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="scenario file, or the name of a bundled scenario (rayleigh, satellite_550km)")
    common.add_argument("--seed", type=int, default=0, help="master seed for Monte Carlo trials")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (0 skips the empirical columns)")
    common.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    common.add_argument("--workers", type=int, default=1, help="worker threads; results do not depend on this")
    common.add_argument("--detector", choices=sorted(DETECTORS), default="both")

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--axis", choices=AXES, default=None)
    sweep.add_argument("--grid", default=None, help="comma-separated, strictly monotone values")
    sweep.add_argument("--db", action="store_true", help="power grids are in dBm")

    parser = argparse.ArgumentParser(prog="raqmimo", description="Rydberg-receiver multi-user uplink: bounds, Monte Carlo rates and link budget.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("estimate", parents=[common, sweep], help="closed-form (and optionally empirical) MSE/NMSE")
    p = sub.add_parser("rate", parents=[common, sweep], help="rate bounds with Monte Carlo rates and a validity check")
    p.add_argument("--perfect-csi", action="store_true", help="use the true channel at the receiver")
    p.add_argument("--rf", action="store_true", help="also evaluate the RF baseline front end")
    p = sub.add_parser("scaling", parents=[common], help="power-scaling law versus M")
    p.add_argument("--E", type=float, required=True)
    p.add_argument("--eps-d", type=float, required=True)
    p.add_argument("--eps-p", type=float, required=True)
    p.add_argument("--grid", default=None, help="array sizes, default 100,1000,10000,100000")
    sub.add_parser("compare", parents=[common, sweep], help="RAQR versus RF bounds, gain factors and rate deltas")
    p = sub.add_parser("budget", parents=[common, sweep], help="power, range and antenna reduction factors")
    p.add_argument("--verify", action="store_true", help="also solve the equate-bounds problems")
    return parser


_DEFAULT_TRIALS = {"rate": 10_000}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.trials is None:
        args.trials = _DEFAULT_TRIALS.get(args.command, 0)
    try:
        if args.trials < 0:
            raise ConfigurationError("--trials must be >= 0")
        if args.workers < 1:
            raise ConfigurationError("--workers must be >= 1")
        if args.command in ("rate",) and args.trials == 0:
            print("note: --trials 0 skips the empirical check", file=sys.stderr)
        sc = load_scenario(args.config)
        rows = Rows([])
        COMMANDS[args.command](sc, args, rows)
        write_atomic(rows.render(), args.out)
    except CheckFailed as exc:
        print(f"raqmimo {args.command}: check failed: {exc}", file=sys.stderr)
        return 1
    except (RaqMimoError, OSError) as exc:
        print(f"raqmimo {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
