"""Motor-side terminal network: first coil, switched RC branch, gating.

Electrical model (line-to-line high-frequency equivalent of one phase):

    terminal T --- L_coil --- node X --- (n_coils-1)*L_coil --- return
        |      |
      branch  r_term
        |      |
      return  return

The winding is n_coils identical series coils; its high-frequency loss is
lumped as r_term bridging the terminal node, which puts the unmatched
reflection coefficient at the ringing frequency near +0.95 for the stock
parameters.  The first coil's far side sits close to high-frequency ground
through the low surge impedance of the rest of the winding, so the
switched branch that terminates the incoming wave runs from the terminal
rail to the return: with the branch conducting, the line sees the branch
impedance in parallel with the (high) winding impedance, and duty control
of the branch steers the reflection coefficient.

The GaN switch is represented by its duty-averaged impedance: a resistor
r_b/d in parallel with the branch capacitor c_b, connected only while the
gate is active.  Averaging is valid because the branch switches much
faster than the drive's voltage edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import SimulationError
from .params import BranchParams, MotorHfParams, PwmParams

__all__ = [
    "BranchState",
    "CoilState",
    "z_eq",
    "unmatched_terminal_impedance",
    "matched_duty",
    "MotorNetwork",
    "terminal_solve",
    "gate_branch",
    "Gate",
    "ARM_SAFETY",
    "RELEASE_RATIO",
]

# Arm below the overvoltage threshold (0.9 * activation_ratio * v_dc) so the
# branch is already conducting when a spike would otherwise peak.
ARM_SAFETY = 0.9
# The branch lets go once ringing has decayed below this multiple of v_dc
# for a full hold-off window.
RELEASE_RATIO = 1.1


@dataclass
class BranchState:
    """Electrical and gating state of the switched RC branch."""

    d: float
    v_cb: float = 0.0
    active: bool = False
    i_branch: float = 0.0


@dataclass
class CoilState:
    """First-coil observables plus the internal node quantities.

    i_hf is the raw first-coil current (the controller high-pass filters it
    separately); v_coil the voltage across the first coil.
    """

    i_hf: float = 0.0
    v_coil: float = 0.0
    v_mot: float = 0.0
    v_x: float = 0.0
    i_rest: float = 0.0


def z_eq(d: float, f: float, branch: BranchParams) -> complex:
    """Duty-averaged branch impedance at frequency ``f``.

    The series-switched resistor averages to r_b/d; the branch capacitor
    sits in parallel, so

        Z_eq(d, f) = (r_b/d) / (1 + j*2*pi*f*c_b*r_b/d)

    with magnitude (r_b/d)/sqrt(1 + (2*pi*f*c_b*r_b/d)^2) -- continuous and
    strictly monotone decreasing in both d and f.
    """
    if not (branch.d_min <= d <= branch.d_max):
        raise ValueError(f"duty {d!r} outside [{branch.d_min}, {branch.d_max}]")
    if f < 0:
        raise ValueError("frequency must be >= 0")
    r = branch.r_b / d
    return r / (1.0 + 1j * 2.0 * math.pi * f * branch.c_b * r)


def unmatched_terminal_impedance(motor: MotorHfParams, f: float) -> complex:
    """Input impedance of the winding alone (branch open) at frequency f:
    r_term in parallel with the full series coil chain."""
    if f == 0.0:
        return 0.0 + 0.0j
    w = 2.0 * math.pi * f
    z_chain = 1j * w * motor.n_coils * motor.l_coil
    return (motor.r_term * z_chain) / (motor.r_term + z_chain)


def matched_duty(branch: BranchParams, z0: float, f_ring: float) -> float:
    """Duty ratio at which |Z_eq(d, f_ring)| equals the cable impedance.

    Solving |Z_eq| = z0 for r_b/d gives d = (r_b/z0)*sqrt(1 - (w*c_b*z0)^2);
    the result is clamped into [d_min, d_max].
    """
    wcz = 2.0 * math.pi * f_ring * branch.c_b * z0
    if wcz >= 1.0:
        raise ValueError("branch capacitor too large to reach z0 at f_ring")
    d = (branch.r_b / z0) * math.sqrt(1.0 - wcz * wcz)
    return min(max(d, branch.d_min), branch.d_max)


class MotorNetwork:
    """One-step trapezoidal solver for the terminal network.

    Consumes the line's Norton pair each step and returns the terminal
    operating point; KCL at the terminal node holds to machine precision
    by construction of the 2x2 nodal solve.

    ``c_dc`` optionally inserts a critically damped DC block (series R-C)
    at the neutral end of the winding chain.  The unipolar test pattern
    would otherwise integrate an unbounded fundamental current through the
    winding (the torque-producing balance that normally prevents this is
    out of scope); the block resonates far below the switching frequency,
    is damped so its own startup transient dies within a cycle, and is
    transparent at ringing frequencies.
    """

    def __init__(self, motor: MotorHfParams, branch: BranchParams, dt: float,
                 c_dc: float | None = None, r_dc: float = 0.0):
        self.motor = motor
        self.branch = branch
        self.dt = dt
        self.c_dc = c_dc
        self.r_dc = r_dc
        self._g_l1 = dt / (2.0 * motor.l_coil)
        self._g_rt = 1.0 / motor.r_term
        self._g_cb = 2.0 * branch.c_b / dt
        # Winding chain past the first coil: (n-1)*L_coil, in series with
        # the DC block when present (combined trapezoidal companion).
        l_rest = (motor.n_coils - 1) * motor.l_coil
        a = dt / (2.0 * l_rest)
        if c_dc is None:
            self._den = 1.0
            self._g_lr = a
        else:
            b = dt / (2.0 * c_dc)
            self._den = 1.0 + a * r_dc + a * b
            self._g_lr = a / self._den
        self._a_rest = a
        # network state
        self.i_l1 = 0.0
        self.i_lr = 0.0
        self.i_cb = 0.0
        self.i_rb = 0.0
        self.i_in = 0.0
        self.v_t = 0.0
        self.v_x = 0.0
        self.v_cb = 0.0
        self.v_cdc = 0.0
        self.active = False
        self.kcl_residual = 0.0

    def step(self, i_norton: float, r_norton: float, d: float,
             active: bool) -> tuple[float, float]:
        """Advance one dt; returns (v_mot, current into the motor)."""
        g_l1, g_lr, g_rt, g_cb = self._g_l1, self._g_lr, self._g_rt, self._g_cb
        e_th = i_norton * r_norton
        g_line = 1.0 / r_norton

        h_l1 = self.i_l1 + g_l1 * (self.v_t - self.v_x)
        if self.c_dc is None:
            h_lr = self.i_lr + g_lr * self.v_x
        else:
            a = self._a_rest
            h_lr = (self.i_lr * (2.0 - self._den) + a * self.v_x
                    - 2.0 * a * self.v_cdc) / self._den

        if active and not self.active:
            # The capacitor enters at the terminal potential: the gate
            # closes through r_b fast compared to dt, so no inrush step.
            self.v_cb = self.v_t
            self.i_cb = 0.0
        if active:
            g_b = d / self.branch.r_b + g_cb
            h_cb = -(g_cb * self.v_cb + self.i_cb)
        else:
            g_b = 0.0
            h_cb = 0.0

        a11 = g_line + g_l1 + g_rt + g_b
        a12 = -g_l1
        a22 = g_l1 + g_lr
        r1 = g_line * e_th - h_l1 - h_cb
        r2 = h_l1 - h_lr
        det = a11 * a22 - a12 * a12
        v_t = (r1 * a22 - a12 * r2) / det
        v_x = (a11 * r2 - a12 * r1) / det

        self.i_l1 = g_l1 * (v_t - v_x) + h_l1
        i_lr_new = g_lr * v_x + h_lr
        if self.c_dc is not None:
            self.v_cdc += (self.dt / (2.0 * self.c_dc)) * (self.i_lr
                                                           + i_lr_new)
        self.i_lr = i_lr_new
        if active:
            self.i_rb = (d / self.branch.r_b) * v_t
            self.i_cb = g_cb * v_t + h_cb
            self.v_cb = v_t
        else:
            self.i_rb = 0.0
            self.i_cb = 0.0
        self.v_t = v_t
        self.v_x = v_x
        self.active = active

        i_in = g_line * (e_th - v_t)
        self.i_in = i_in
        self.kcl_residual = i_in - self.i_l1 - self.i_rb - self.i_cb \
            - g_rt * v_t
        return v_t, i_in

    @property
    def i_branch(self) -> float:
        return self.i_rb + self.i_cb

    @property
    def v_coil(self) -> float:
        return self.v_t - self.v_x


def terminal_solve(
    norton: tuple[float, float],
    coil: CoilState,
    branch_state: BranchState,
    motor: MotorHfParams,
    branch: BranchParams,
    dt: float,
) -> tuple[float, float, CoilState, BranchState]:
    """Single-step functional form of the terminal network update.

    Reconstructs the trapezoidal histories from the passed states, solves
    one step, and returns (v_mot, i_into_motor, coil', branch').
    """
    net = MotorNetwork(motor, branch, dt)
    net.i_l1 = coil.i_hf
    net.i_lr = coil.i_rest
    net.v_t = coil.v_mot
    net.v_x = coil.v_x
    net.active = branch_state.active
    net.v_cb = branch_state.v_cb
    if branch_state.active:
        net.i_rb = (branch_state.d / branch.r_b) * coil.v_mot
        net.i_cb = branch_state.i_branch - net.i_rb

    v_mot, i_in = net.step(norton[0], norton[1], branch_state.d,
                           branch_state.active)
    if not (math.isfinite(v_mot) and math.isfinite(i_in)):
        raise SimulationError("terminal network produced non-finite values",
                              state={"v_mot": v_mot, "i_in": i_in})
    coil_new = CoilState(i_hf=net.i_l1, v_coil=net.v_coil, v_mot=net.v_t,
                         v_x=net.v_x, i_rest=net.i_lr)
    branch_new = replace(branch_state, v_cb=net.v_cb, i_branch=net.i_branch)
    return v_mot, i_in, coil_new, branch_new


def gate_branch(v_mot: float, pwm: PwmParams, branch: BranchParams,
                t: float = 0.0,
                edge_windows: tuple[tuple[float, float], ...] = ()) -> bool:
    """Arming decision: overvoltage threshold or an edge in flight.

    True when |v_mot| exceeds activation_ratio * v_dc * ARM_SAFETY, or when
    ``t`` lies inside one of the precomputed arrival windows of an inverter
    edge at the motor terminal.  Release behavior (hold-off after ringing
    decays) lives in :class:`Gate`.
    """
    if abs(v_mot) > branch.activation_ratio * pwm.v_dc * ARM_SAFETY:
        return True
    for start, end in edge_windows:
        if start <= t <= end:
            return True
    return False


class Gate:
    """Stateful gate around the :func:`gate_branch` arming conditions.

    The branch must never step its conduction current against the charged
    line (a hard connect or disconnect launches a traveling wave of
    I*Z0/2 volts), so both ends of every engagement are raised-cosine
    ramps, whose spectral content near the ringing band is far below a
    linear ramp's corner discontinuities:

      off -> prearm:   ahead of a scheduled edge arrival the duty ramps
                       from d_min up to the adapted value, reaching it as
                       the wavefront lands;
      armed:           full adapted duty; adaptation may run;
      armed -> releasing: once ringing has stayed below RELEASE_RATIO*v_dc
                       for a hold-off window, the duty ramps down to d_min
                       and the switch opens.

    A spike above the arming threshold jumps straight to armed from any
    phase (suppression outranks smoothness).
    """

    OFF, PREARM, ARMED, RELEASING = "off", "prearm", "armed", "releasing"

    def __init__(self, pwm: PwmParams, branch: BranchParams,
                 edge_windows: list[tuple[float, float]], hold_off: float,
                 release_time: float = 8e-6, prearm_time: float = 5.5e-6):
        self.pwm = pwm
        self.branch = branch
        self.windows = edge_windows
        self.hold_off = hold_off
        self.release_time = release_time
        self.prearm_time = prearm_time
        self.phase = Gate.OFF
        self._last_keepalive = -math.inf
        self._ramp_t0 = 0.0
        self._ramp_t1 = 0.0
        self._ramp_d0 = branch.d_min
        self._d_applied = branch.d_min
        self._wi = 0  # monotone window pointer

    @property
    def active(self) -> bool:
        """True while adaptation may run (branch armed at full duty)."""
        return self.phase == Gate.ARMED

    @property
    def conducting(self) -> bool:
        return self.phase != Gate.OFF

    def update(self, t: float, v_mot: float,
               d_adapted: float) -> tuple[bool, float]:
        """Advance the gate; returns (conducting, applied duty)."""
        while self._wi < len(self.windows) and t > self.windows[self._wi][1]:
            self._wi += 1
        next_w = self.windows[self._wi] if self._wi < len(self.windows) \
            else None
        in_flight = next_w is not None and next_w[0] <= t
        in_pre = (next_w is not None and not in_flight
                  and t >= next_w[0] - self.prearm_time)
        hot = abs(v_mot) > (self.branch.activation_ratio * self.pwm.v_dc
                            * ARM_SAFETY)
        loud = abs(v_mot) >= RELEASE_RATIO * self.pwm.v_dc
        if in_flight or hot or loud:
            self._last_keepalive = t

        phase = self.phase
        if in_flight or hot:
            phase = Gate.ARMED
        elif in_pre and phase in (Gate.OFF, Gate.RELEASING):
            self._ramp_d0 = self._d_applied if phase == Gate.RELEASING \
                else 0.0
            self._ramp_t0 = t
            self._ramp_t1 = next_w[0]
            phase = Gate.PREARM
        elif phase == Gate.ARMED \
                and t - self._last_keepalive >= self.hold_off:
            self._ramp_d0 = d_adapted
            self._ramp_t0 = t
            self._ramp_t1 = t + self.release_time
            phase = Gate.RELEASING

        # Ramps run between zero conduction and the adapted duty, so the
        # switch opens and closes at exactly zero branch current.
        if phase == Gate.ARMED:
            d_applied = d_adapted
        elif phase == Gate.PREARM:
            span = max(self._ramp_t1 - self._ramp_t0, 1e-30)
            frac = min((t - self._ramp_t0) / span, 1.0)
            s = 0.5 * (1.0 - math.cos(math.pi * frac))
            d_applied = self._ramp_d0 + (d_adapted - self._ramp_d0) * s
        elif phase == Gate.RELEASING:
            frac = (t - self._ramp_t0) / (self._ramp_t1 - self._ramp_t0)
            if frac >= 1.0:
                phase = Gate.OFF
                d_applied = 0.0
            else:
                s = 0.5 * (1.0 - math.cos(math.pi * frac))
                d_applied = self._ramp_d0 * (1.0 - s)
        else:
            d_applied = 0.0

        self.phase = phase
        self._d_applied = d_applied
        return phase != Gate.OFF, d_applied
