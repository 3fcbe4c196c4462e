"""Configuration types, physical-invariant validation and config-file I/O.

All quantities are SI base units internally (metres, henries, farads, ohms,
volts, seconds).  Config files may attach engineering suffixes (n, u/µ, m,
k, M) to numbers; they are resolved at load time so the 1e-12..1e3 scale
spread never leaks into the physics code.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = [
    "CableParams",
    "MotorHfParams",
    "BranchParams",
    "PwmParams",
    "MracParams",
    "SimParams",
    "Config",
    "ConfigError",
    "Trace",
    "TRACE_COLUMNS",
    "parse_quantity",
    "validate",
    "default_config",
    "load_config",
    "write_config",
]

# Engineering suffixes accepted in config files.  Plain scientific notation
# covers anything not listed (e.g. pico).
SI_SUFFIXES = {
    "n": -9,
    "u": -6,
    "µ": -6,
    "m": -3,
    "k": 3,
    "M": 6,
}

_QUANTITY_RE = re.compile(
    r"^\s*([+-]?(?:\d+\.?\d*|\.\d+))(?:[eE]([+-]?\d+))?\s*([nuµmkM]?)\s*$"
)


class ConfigError(ValueError):
    """Raised with the complete list of violated invariants."""

    def __init__(self, violations: Iterable[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def parse_quantity(text: str) -> float:
    """Parse a decimal number with an optional engineering suffix.

    Accepts e.g. ``250n``, ``0.35u``, ``2k``, ``5M``, ``1e-9``, ``-3.2``.
    The suffix folds into the exponent before conversion, so ``250n``
    equals the literal ``250e-9`` to the last bit.
    """
    m = _QUANTITY_RE.match(text)
    if not m:
        raise ValueError(f"not a valid quantity: {text!r}")
    mantissa, exponent, suffix = m.groups()
    exp = int(exponent or 0) + (SI_SUFFIXES[suffix] if suffix else 0)
    return float(f"{mantissa}e{exp}")


@dataclass(frozen=True)
class CableParams:
    """Distributed-parameter description of the feeder cable."""

    length_m: float = 70.0
    l_per_m: float = 250e-9
    c_per_m: float = 100e-12
    r_per_m: float = 0.02

    @property
    def z0(self) -> float:
        """Surge impedance sqrt(L'/C')."""
        return math.sqrt(self.l_per_m / self.c_per_m)

    @property
    def tau(self) -> float:
        """One-way propagation delay length*sqrt(L'C')."""
        return self.length_m * math.sqrt(self.l_per_m * self.c_per_m)


@dataclass(frozen=True)
class MotorHfParams:
    """Lumped high-frequency terminal model of one stator phase winding.

    The winding is ``n_coils`` identical series coils; everything past the
    entrance coil is damped by a lumped resistance ``r_term`` bridging the
    inter-coil node, which is what lets a fast front concentrate on the
    first coil instead of dividing inductively.
    """

    n_coils: int = 4
    l_coil: float = 1e-3
    r_term: float = 2000.0


@dataclass(frozen=True)
class BranchParams:
    """Switched RC branch installed at the first coil."""

    r_b: float = 25.0
    c_b: float = 0.1e-9
    d_min: float = 0.05
    d_max: float = 1.0
    activation_ratio: float = 2.0


@dataclass(frozen=True)
class PwmParams:
    """Two-level inverter line voltage with trapezoidal edges."""

    v_dc: float = 500.0
    f_sw: float = 20e3
    duty_cmd: float = 0.5
    t_rise: float = 100e-9
    t_fall: float = 100e-9


@dataclass(frozen=True)
class MracParams:
    """Reference-model and adaptation-law settings.

    gamma is the adaptation gain of the normalized gradient law, epsilon its
    current regularizer.  d_init seeds the branch duty ratio at run start.
    """

    kind: str = "underdamped"
    alpha: float = 1.5e7
    omega: float = 2.0 * math.pi * 714.2857e3
    gamma: float = 1.2
    epsilon: float = 1e-4
    freeze_when_inactive: bool = True
    d_init: float = 0.32


@dataclass(frozen=True)
class SimParams:
    """Fixed-step integration controls."""

    dt: float = 5e-9
    t_end: float = 0.51e-3
    record_stride: int = 10


@dataclass(frozen=True)
class Config:
    """Full parameter bundle.

    ``validate`` returns a copy with the derived quantities populated and
    dt adjusted so the cable delay is an exact integer number of steps.
    """

    cable: CableParams = CableParams()
    motor: MotorHfParams = MotorHfParams()
    branch: BranchParams = BranchParams()
    pwm: PwmParams = PwmParams()
    mrac: MracParams = MracParams()
    sim: SimParams = SimParams()
    # Derived by validate(); None until then.
    z0: float | None = None
    tau: float | None = None
    f_ring: float | None = None
    n_delay: int | None = None

    @property
    def validated(self) -> bool:
        return self.n_delay is not None


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate(config: Config) -> Config:
    """Check every physical invariant and populate derived quantities.

    Raises ConfigError naming all violated invariants at once.  Idempotent:
    validating an already validated config returns an equal config.
    """
    errs: list[str] = []
    c, m, b, p, a, s = (config.cable, config.motor, config.branch,
                        config.pwm, config.mrac, config.sim)

    for name, value, cond, bound in [
        ("cable.length_m", c.length_m, c.length_m > 0, "> 0"),
        ("cable.l_per_m", c.l_per_m, c.l_per_m > 0, "> 0"),
        ("cable.c_per_m", c.c_per_m, c.c_per_m > 0, "> 0"),
        ("cable.r_per_m", c.r_per_m, c.r_per_m >= 0, ">= 0"),
        ("motor.l_coil", m.l_coil, m.l_coil > 0, "> 0"),
        ("motor.r_term", m.r_term, m.r_term > 0, "> 0"),
        ("branch.r_b", b.r_b, b.r_b > 0, "> 0"),
        ("branch.c_b", b.c_b, b.c_b >= 0, ">= 0"),
        ("branch.d_min", b.d_min, b.d_min > 0, "> 0"),
        ("branch.activation_ratio", b.activation_ratio,
         b.activation_ratio > 1, "> 1"),
        ("pwm.v_dc", p.v_dc, p.v_dc > 0, "> 0"),
        ("pwm.f_sw", p.f_sw, p.f_sw > 0, "> 0"),
        ("pwm.t_rise", p.t_rise, p.t_rise > 0, "> 0"),
        ("pwm.t_fall", p.t_fall, p.t_fall > 0, "> 0"),
        ("mrac.alpha", a.alpha, a.alpha > 0, "> 0"),
        ("mrac.gamma", a.gamma, a.gamma >= 0, ">= 0"),
        ("mrac.epsilon", a.epsilon, a.epsilon > 0, "> 0"),
        ("sim.dt", s.dt, s.dt > 0, "> 0"),
        ("sim.t_end", s.t_end, s.t_end > 0, "> 0"),
    ]:
        if not _finite(value):
            errs.append(f"{name} must be finite, got {value!r}")
        elif not cond:
            errs.append(f"{name} must be {bound}, got {value!r}")

    if not isinstance(m.n_coils, int) or m.n_coils < 2:
        errs.append(f"motor.n_coils must be an integer >= 2, got {m.n_coils!r}")
    if _finite(b.d_min) and _finite(b.d_max) and not (b.d_min < b.d_max <= 1.0):
        errs.append(
            f"branch duty bounds must satisfy 0 < d_min < d_max <= 1, "
            f"got d_min={b.d_min!r}, d_max={b.d_max!r}")
    if _finite(p.duty_cmd) and not (0.0 <= p.duty_cmd <= 1.0):
        errs.append(f"pwm.duty_cmd must be in [0, 1], got {p.duty_cmd!r}")
    if _finite(p.t_rise) and _finite(p.f_sw) and p.f_sw > 0 \
            and p.t_rise >= 0.5 / p.f_sw:
        errs.append(f"pwm.t_rise must be < 1/(2*f_sw), got {p.t_rise!r}")
    if _finite(p.t_fall) and _finite(p.f_sw) and p.f_sw > 0 \
            and p.t_fall >= 0.5 / p.f_sw:
        errs.append(f"pwm.t_fall must be < 1/(2*f_sw), got {p.t_fall!r}")
    if a.kind not in ("underdamped", "critically_damped"):
        errs.append(
            f"mrac.kind must be 'underdamped' or 'critically_damped', "
            f"got {a.kind!r}")
    if a.kind == "underdamped" and not (_finite(a.omega) and a.omega > 0):
        errs.append(f"mrac.omega must be > 0 for an underdamped model, "
                    f"got {a.omega!r}")
    if not isinstance(s.record_stride, int) or s.record_stride < 1:
        errs.append(f"sim.record_stride must be an integer >= 1, "
                    f"got {s.record_stride!r}")

    if errs:
        raise ConfigError(errs)

    z0 = c.z0
    tau = c.tau
    if not (math.isfinite(z0) and z0 > 0):
        raise ConfigError([f"derived surge impedance must be finite and > 0, "
                           f"got {z0!r}"])
    if not (math.isfinite(tau) and tau > 0):
        raise ConfigError([f"derived cable delay must be > 0, got {tau!r}"])

    if s.dt > p.t_rise / 20.0 * (1 + 1e-12):
        errs.append(f"sim.dt must be <= t_rise/20 = {p.t_rise / 20.0:g}, "
                    f"got {s.dt!r}")
    if s.t_end < 4.0 * tau:
        errs.append(f"sim.t_end must be >= 4*tau = {4 * tau:g}, "
                    f"got {s.t_end!r}")
    if not (b.d_min <= a.d_init <= b.d_max):
        errs.append(f"mrac.d_init must lie in [d_min, d_max], got {a.d_init!r}")

    from .motor import unmatched_terminal_impedance  # deferred: no import cycle

    f_ring = 1.0 / (4.0 * tau)
    z_term = unmatched_terminal_impedance(m, f_ring)
    if abs(z_term) <= z0:
        errs.append(
            f"motor terminal impedance at the ringing frequency must exceed "
            f"Z0={z0:g} ohm (high-impedance termination), got {abs(z_term):g}")

    if errs:
        raise ConfigError(errs)

    # Snap dt so tau is an exact integer multiple: step count rounds up,
    # dt only ever shrinks, preserving the t_rise/20 accuracy bound.
    n_delay = math.ceil(tau / s.dt - 1e-9)
    dt = tau / n_delay

    return dataclasses.replace(
        config,
        sim=dataclasses.replace(s, dt=dt),
        z0=z0, tau=tau, f_ring=f_ring, n_delay=n_delay,
    )


def default_config() -> Config:
    """The stock 70 m / 50 ohm scenario, validated."""
    return validate(Config())


# ---------------------------------------------------------------------------
# Trace

TRACE_COLUMNS = ("t_s", "v_inv_V", "v_mot_V", "v_coil_V", "i_hf_A",
                 "i_branch_A", "duty", "zeq_ohm", "lyap_J")


@dataclass(frozen=True)
class Trace:
    """Columnar time series of all run observables (float64 throughout)."""

    t_s: np.ndarray
    v_inv_V: np.ndarray
    v_mot_V: np.ndarray
    v_coil_V: np.ndarray
    i_hf_A: np.ndarray
    i_branch_A: np.ndarray
    duty: np.ndarray
    zeq_ohm: np.ndarray
    lyap_J: np.ndarray

    def __post_init__(self):
        n = len(self.t_s)
        for name in TRACE_COLUMNS:
            col = getattr(self, name)
            if len(col) != n:
                raise ValueError(f"trace column {name} has length {len(col)}, "
                                 f"expected {n}")

    def __len__(self) -> int:
        return len(self.t_s)

    def column(self, name: str) -> np.ndarray:
        if name not in TRACE_COLUMNS:
            raise KeyError(name)
        return getattr(self, name)


# ---------------------------------------------------------------------------
# Config file I/O
#
# Grammar (documented in README.md):
#   file     = section*
#   section  = '[' name ']' NEWLINE entry*
#   entry    = key '=' quantity | word
#   quantity = decimal [suffix] with suffix in {n,u,µ,m,k,M}
# Sections/keys mirror the dataclasses above.

_SECTION_TYPES = {
    "cable": CableParams,
    "motor": MotorHfParams,
    "branch": BranchParams,
    "pwm": PwmParams,
    "mrac": MracParams,
    "sim": SimParams,
}

_INT_KEYS = {"n_coils", "record_stride"}
_BOOL_KEYS = {"freeze_when_inactive"}
_STR_KEYS = {"kind"}

_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


def _coerce(section: str, key: str, raw: str, errs: list[str]):
    raw = raw.strip()
    if key in _STR_KEYS:
        return raw
    if key in _BOOL_KEYS:
        if raw.lower() in _BOOL_WORDS:
            return _BOOL_WORDS[raw.lower()]
        errs.append(f"[{section}] {key}: expected a boolean, got {raw!r}")
        return None
    try:
        value = parse_quantity(raw)
    except ValueError:
        errs.append(f"[{section}] {key}: expected a number, got {raw!r}")
        return None
    if key in _INT_KEYS:
        if value != int(value):
            errs.append(f"[{section}] {key}: expected an integer, got {raw!r}")
            return None
        return int(value)
    return value


def load_config(path: str | Path) -> Config:
    """Load and validate a config file; unknown sections or keys are errors.

    A [derived] section (as written by ``write_config``) is accepted and
    ignored; derived quantities are always recomputed.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError([f"config parse error: {exc}"]) from exc

    errs: list[str] = []
    groups: dict[str, dict] = {}
    for section in parser.sections():
        if section == "derived":
            continue
        cls = _SECTION_TYPES.get(section)
        if cls is None:
            errs.append(f"unknown section [{section}]")
            continue
        known = {f.name for f in dataclasses.fields(cls)}
        fields = {}
        for key, raw in parser.items(section):
            if key not in known:
                errs.append(f"unknown key {key!r} in section [{section}]")
                continue
            value = _coerce(section, key, raw, errs)
            if value is not None:
                fields[key] = value
        groups[section] = fields

    if errs:
        raise ConfigError(errs)

    config = Config(**{name: cls(**groups.get(name, {}))
                       for name, cls in _SECTION_TYPES.items()})
    return validate(config)


def write_config(config: Config, path: str | Path) -> None:
    """Echo a resolved config, including derived quantities, to ``path``."""
    parser = configparser.ConfigParser()
    for section, cls in _SECTION_TYPES.items():
        group = getattr(config, section)
        parser[section] = {
            f.name: (str(v) if isinstance(v, (str, bool)) else repr(v))
            for f in dataclasses.fields(cls)
            for v in [getattr(group, f.name)]
        }
    if config.validated:
        parser["derived"] = {
            "z0_ohm": repr(config.z0),
            "tau_s": repr(config.tau),
            "f_ring_hz": repr(config.f_ring),
            "n_delay": repr(config.n_delay),
        }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        parser.write(fh)
