"""Inverter line-voltage synthesis: trapezoidal PWM pulses and edge events.

The drive is modeled per edge: a fixed-duty two-level pattern with linear
rise/fall ramps.  The fundamental modulation pattern is irrelevant to the
reflected-wave transient, which is excited afresh by every edge, so a fixed
duty square pattern stands in for full sinusoidal PWM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import PwmParams

__all__ = ["EdgeEvent", "pwm_voltage", "detect_edges", "sample_pwm",
           "DEFAULT_SOURCE_RESISTANCE"]

# Thevenin output resistance of the drive.  Real drives present a very low
# impedance at the ringing frequency (reflection coefficient close to -1),
# which is what lets the terminal voltage reach twice the bus voltage.
DEFAULT_SOURCE_RESISTANCE = 0.1


@dataclass(frozen=True)
class EdgeEvent:
    """One rising or falling inverter edge."""

    t_start: float
    polarity: str  # "rising" | "falling"
    slope: float   # signed, V/s


def _pulse_times(pwm: PwmParams) -> tuple[float, float]:
    period = 1.0 / pwm.f_sw
    return period, pwm.duty_cmd * period


def pwm_voltage(t: float, pwm: PwmParams) -> float:
    """Inverter line voltage at time ``t``.

    Each switching period starts with a rising ramp of length t_rise at the
    period boundary; the falling ramp starts at duty_cmd * period.  Values
    are always inside [0, v_dc].  duty_cmd == 0 gives a flat 0, duty_cmd == 1
    a single rising ramp at t = 0 followed by a permanent plateau.
    """
    if t < 0.0 or pwm.duty_cmd == 0.0:
        return 0.0
    if pwm.duty_cmd == 1.0:
        return pwm.v_dc * min(t / pwm.t_rise, 1.0)
    period, t_on = _pulse_times(pwm)
    u = t - period * math.floor(t / period)
    if u < pwm.t_rise:
        level = u / pwm.t_rise
    elif u < t_on:
        level = 1.0
    elif u < t_on + pwm.t_fall:
        level = 1.0 - (u - t_on) / pwm.t_fall
    else:
        level = 0.0
    # A pulse shorter than the rise time never reaches the full plateau.
    if t_on < pwm.t_rise:
        level = min(level, t_on / pwm.t_rise)
    return pwm.v_dc * level


def sample_pwm(pwm: PwmParams, t: np.ndarray) -> np.ndarray:
    """Vectorized ``pwm_voltage`` over a time grid (used by the engine)."""
    t = np.asarray(t, dtype=float)
    if pwm.duty_cmd == 0.0:
        return np.zeros_like(t)
    if pwm.duty_cmd == 1.0:
        return pwm.v_dc * np.clip(t / pwm.t_rise, 0.0, 1.0) * (t >= 0.0)
    period, t_on = _pulse_times(pwm)
    u = t - period * np.floor(t / period)
    level = np.where(
        u < pwm.t_rise, u / pwm.t_rise,
        np.where(u < t_on, 1.0,
                 np.where(u < t_on + pwm.t_fall,
                          1.0 - (u - t_on) / pwm.t_fall, 0.0)))
    if t_on < pwm.t_rise:
        level = np.minimum(level, t_on / pwm.t_rise)
    return pwm.v_dc * np.where(t < 0.0, 0.0, level)


def detect_edges(pwm: PwmParams, t_end: float) -> list[EdgeEvent]:
    """All edge events with t_start < t_end, in time order.

    Rising slopes are +v_dc/t_rise, falling slopes -v_dc/t_fall.  Events
    beyond t_end are truncated away.
    """
    if t_end <= 0.0 or pwm.duty_cmd == 0.0:
        return []
    rise_slope = pwm.v_dc / pwm.t_rise
    fall_slope = -pwm.v_dc / pwm.t_fall
    if pwm.duty_cmd == 1.0:
        return [EdgeEvent(0.0, "rising", rise_slope)]
    period, t_on = _pulse_times(pwm)
    events: list[EdgeEvent] = []
    k = 0
    while True:
        t_r = k * period
        if t_r >= t_end:
            break
        events.append(EdgeEvent(t_r, "rising", rise_slope))
        t_f = t_r + t_on
        if t_f < t_end:
            events.append(EdgeEvent(t_f, "falling", fall_slope))
        k += 1
    return events
