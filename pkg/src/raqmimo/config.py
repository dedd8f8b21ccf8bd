"""
Scenario files.

A scenario is an INI document read with :mod:`configparser`. Keys ending in
``_db`` / ``_dbi`` are power ratios in dB, ``_dbm`` are powers in dBm and
``_deg`` are angles in degrees; everything is converted to linear units and
radians at parse time. See the README for the full field list.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .channel import place_users, user_from_geometry
from .errors import ConfigurationError, RaqMimoError
from .params import FrontEnd, RfFrontEndSpec, SystemConfig, UserLink, db_to_linear, dbm_to_watts, rf_front_end
from .raqr import PhaseConfig, phase_shift

BUNDLED = ("rayleigh.cfg", "satellite_550km.cfg")


@dataclass(frozen=True)
class Scenario:
    """A parsed scenario: the system config plus what sweeps need to rebuild it."""

    cfg: SystemConfig
    phase: Optional[PhaseConfig] = None
    carrier_ghz: Optional[float] = None
    user_gain_db: float = 0.0
    geometry: tuple = field(default=())  # (distance_km, elevation, azimuth) per user, when known
    source: str = ""


class _Section:
    """Typed, unit-aware view of one INI section."""

    def __init__(self, name: str, items: dict):
        self.name = name
        self.items = dict(items)
        self.used: set[str] = set()

    def _raw(self, key: str) -> Optional[str]:
        if key in self.items:
            self.used.add(key)
            return self.items[key]
        return None

    def _float(self, key: str, text: str) -> float:
        try:
            return float(text)
        except ValueError:
            raise ConfigurationError(f"[{self.name}] {key}: not a number: {text!r}") from None

    def has(self, base: str) -> bool:
        return any(k in self.items for k in (base, base + "_db", base + "_dbi", base + "_dbm", base + "_deg"))

    def number(self, base: str, default: Optional[float] = None, *, kind: str = "ratio") -> float:
        """Read ``base`` in linear units, accepting the suffix variants allowed for ``kind``.

        ``kind`` is ``ratio`` (``_db``/``_dbi``), ``power`` (``_dbm``), ``angle``
        (``_deg``) or ``plain`` (no suffix).
        """
        suffixes = {"ratio": ("_db", "_dbi"), "power": ("_dbm", "_db"), "angle": ("_deg",), "plain": ()}[kind]
        found = [(s, self._raw(base + s)) for s in ("",) + suffixes]
        found = [(s, v) for s, v in found if v is not None]
        if len(found) > 1:
            raise ConfigurationError(f"[{self.name}] {base} given more than once ({', '.join(base + s for s, _ in found)})")
        if not found:
            if default is None:
                raise ConfigurationError(f"[{self.name}] missing required key {base!r}")
            return default
        suffix, text = found[0]
        x = self._float(base + suffix, text)
        if suffix in ("_db", "_dbi"):
            return db_to_linear(x)
        if suffix == "_dbm":
            return dbm_to_watts(x)
        if suffix == "_deg":
            return math.radians(x)
        return x

    def integer(self, key: str, default: Optional[int] = None) -> int:
        text = self._raw(key)
        if text is None:
            if default is None:
                raise ConfigurationError(f"[{self.name}] missing required key {key!r}")
            return default
        try:
            return int(text)
        except ValueError:
            raise ConfigurationError(f"[{self.name}] {key}: not an integer: {text!r}") from None

    def complex_value(self, key: str) -> Optional[complex]:
        text = self._raw(key)
        if text is None:
            return None
        try:
            return complex(text.replace(" ", ""))
        except ValueError:
            raise ConfigurationError(f"[{self.name}] {key}: not a complex number: {text!r}") from None

    def text(self, key: str, default: str) -> str:
        value = self._raw(key)
        return default if value is None else value

    def check_unused(self) -> None:
        extra = sorted(set(self.items) - self.used)
        if extra:
            raise ConfigurationError(f"[{self.name}] unknown keys: {', '.join(extra)}")


def _front_end(sec: _Section, default_name: str) -> tuple[FrontEnd, Optional[PhaseConfig]]:
    name = sec.text("name", default_name)
    if sec.has("wavelength") or sec.has("antenna_efficiency"):
        spec = RfFrontEndSpec(
            wavelength=sec.number("wavelength", kind="plain"),
            antenna_efficiency=sec.number("antenna_efficiency", 1.0),
            antenna_gain=sec.number("antenna_gain", 1.0),
            lna_gain=sec.number("lna_gain", 1.0),
            temperature=sec.number("temperature", 290.0, kind="plain"),
            bandwidth=sec.number("bandwidth", 1.0, kind="plain"),
            noise_factor=sec.number("noise_factor", 1.0),
        )
        sec.check_unused()
        return replace(rf_front_end(spec), name=name), None
    phase = None
    phi = sec.complex_value("phi")
    if sec.has("theta_l") or sec.has("varphi"):
        if phi is not None:
            raise ConfigurationError(f"[{sec.name}] give either phi or theta_l/varphi, not both")
        phase = PhaseConfig(sec.number("theta_l", 0.0, kind="angle"), sec.number("varphi", 0.0, kind="angle"))
        phi = phase_shift(phase)
    fe = FrontEnd(
        rho=sec.number("rho"),
        phi=1.0 + 0j if phi is None else phi,
        sigma2=sec.number("sigma2", kind="power"),
        name=name,
    )
    sec.check_unused()
    return fe, phase


def _user_defaults(sec: Optional[_Section]) -> dict:
    if sec is None:
        return {}
    out = {}
    for base, kind in (("rician", "plain"), ("pilot_power", "power"), ("data_power", "power"), ("antenna_gain", "ratio")):
        if sec.has(base):
            out[base] = sec.number(base, kind=kind)
    sec.check_unused()
    return out


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    sections = {name: _Section(name, parser[name]) for name in parser.sections()}
    known = {"system", "front_end", "rf_baseline", "users", "placement"}
    for name in sections:
        if name not in known and not name.startswith("user."):
            raise ConfigurationError(f"{source}: unknown section [{name}]")
    if "system" not in sections or "front_end" not in sections:
        raise ConfigurationError(f"{source}: [system] and [front_end] sections are required")

    try:
        sys_sec = sections["system"]
        fe, phase = _front_end(sections["front_end"], "raqr")
        rf = _front_end(sections["rf_baseline"], "rf")[0] if "rf_baseline" in sections else None
        defaults = _user_defaults(sections.get("users"))
        carrier = sys_sec.number("carrier_ghz", math.nan, kind="plain")
        carrier = None if math.isnan(carrier) else carrier
        users, geometry, gain_db = _users(sections, defaults, carrier)
        cfg = SystemConfig(
            num_sensors=sys_sec.integer("num_sensors"),
            users=tuple(users),
            pilot_length=sys_sec.integer("pilot_length", len(users)),
            coherence=sys_sec.integer("coherence"),
            front_end=fe,
            element_spacing=sys_sec.number("element_spacing", 0.5, kind="plain"),
            lo_arrival=sys_sec.number("lo_arrival", 0.0, kind="angle"),
            rf_baseline=rf,
        )
        sys_sec.check_unused()
    except ConfigurationError:
        raise
    except RaqMimoError as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    return Scenario(cfg, phase, carrier, gain_db, tuple(geometry), source)


def _users(sections: dict, defaults: dict, carrier: Optional[float]):
    explicit = sorted((n for n in sections if n.startswith("user.")), key=lambda n: (len(n), n))
    placement = sections.get("placement")
    if explicit and placement is not None:
        raise ConfigurationError("use either [user.N] sections or [placement], not both")
    if not explicit and placement is None:
        raise ConfigurationError("no users: add [user.N] sections or a [placement] section")
    gain = defaults.get("antenna_gain", 1.0)
    common = dict(
        rician=defaults.get("rician", 0.0),
        pilot_power=defaults.get("pilot_power", 1.0),
        data_power=defaults.get("data_power", 1.0),
    )
    users, geometry = [], []
    if placement is not None:
        if carrier is None:
            raise ConfigurationError("[placement] needs carrier_ghz in [system]")
        count = placement.integer("count")
        radius = placement.number("radius_m", kind="plain")
        altitude = placement.number("altitude_km", kind="plain")
        rng = np.random.default_rng(placement.integer("seed", 0))
        placement.check_unused()
        for dist, el, az in place_users(count, radius, altitude, rng):
            geometry.append((dist, el, az))
            users.append(user_from_geometry(dist, el, az, carrier, antenna_gain_db=10 * math.log10(gain), **common))
        return users, geometry, 10 * math.log10(gain)
    for name in explicit:
        sec = sections[name]
        fields = dict(common)
        for base, kind in (("rician", "plain"), ("pilot_power", "power"), ("data_power", "power")):
            if sec.has(base):
                fields[base] = sec.number(base, kind=kind)
        elevation = sec.number("elevation", 0.0, kind="angle")
        azimuth = sec.number("azimuth", 0.0, kind="angle")
        if sec.has("distance_km"):
            if carrier is None:
                raise ConfigurationError(f"[{name}] distance_km needs carrier_ghz in [system]")
            if sec.has("beta"):
                raise ConfigurationError(f"[{name}] give either beta or distance_km, not both")
            dist = sec.number("distance_km", kind="plain")
            geometry.append((dist, elevation, azimuth))
            users.append(user_from_geometry(dist, elevation, azimuth, carrier, antenna_gain_db=10 * math.log10(gain), **fields))
        else:
            users.append(UserLink(beta=sec.number("beta") * gain, elevation=elevation, azimuth=azimuth, **fields))
        sec.check_unused()
    if geometry and len(geometry) != len(users):
        raise ConfigurationError("distance_km must be given for every user or for none")
    return users, geometry, 10 * math.log10(gain)


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario file; bare names of bundled scenarios are also accepted."""
    p = Path(path)
    if p.is_file():
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read {p}: {exc}") from None
        return parse_scenario(text, str(p))
    name = p.name if p.suffix else p.name + ".cfg"
    if str(p) in (p.name, p.stem) and name in BUNDLED:
        return parse_scenario(bundled_text(name), name)
    raise ConfigurationError(f"config file not found: {path}")


def bundled_text(name: str) -> str:
    return resources.files("raqmimo").joinpath("configs").joinpath(name).read_text()
