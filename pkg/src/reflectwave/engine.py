"""Fixed-step orchestration of source, line, terminal network and controller.

Step order (one dt): sample the source, advance the line with the terminal
network as its receiving-end solver, update the gate from the new terminal
voltage, step the reference model, adapt the duty ratio while the branch
is conducting, record on the stride.  The gate and duty used by the
terminal solve are the previous step's decisions; edge-arrival windows are
known ahead of time, so activation still lands with the wavefront.

The grid is rigid on purpose: the Bergeron history buffers need the cable
delay to be an exact integer number of steps, which beats any adaptive
stepper for this class of circuit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SimulationError
from .line import BergeronLine, LadderLine
from .motor import Gate, MotorNetwork, matched_duty
from .mrac import MracState, RefModel, _discretize, make_critically_damped, \
    make_underdamped
from .params import Config, Trace, TRACE_COLUMNS
from .source import DEFAULT_SOURCE_RESISTANCE, detect_edges, sample_pwm

__all__ = ["SimRun", "new_run", "step", "run_to_end", "MODES",
           "HOLD_OFF_RING_PERIODS"]

MODES = ("adaptive", "static-matched", "off")

# The gate releases after ringing has stayed quiet for this many ringing
# periods (one period = 4*tau).
HOLD_OFF_RING_PERIODS = 1.5


def _reference_model(config: Config) -> RefModel:
    m = config.mrac
    if m.kind == "critically_damped":
        return make_critically_damped(m.alpha, config.motor)
    return make_underdamped(m.alpha, m.omega, config.motor)


@dataclass
class SimRun:
    """A simulation in progress; advanced in place by :func:`step`."""

    config: Config
    mode: str
    line: BergeronLine | LadderLine
    net: MotorNetwork
    gate: Gate
    model: RefModel
    mrac: MracState
    v_src: np.ndarray        # source samples on the step grid
    u_ref: np.ndarray        # delayed, normalized reference input
    n_steps: int
    blanks: list | None = None  # error-blanking windows per edge arrival
    step_index: int = 0
    _i_hf: float = 0.0       # high-pass-filtered phase current
    _e_hp: float = 0.0       # high-pass-filtered output error
    _e_raw: float = 0.0      # previous raw error (filter memory)
    _d_applied: float = 0.0  # duty currently driving the branch
    _bi: int = 0             # monotone blank-window pointer

    # recording buffers
    rec: dict | None = None

    @property
    def t(self) -> float:
        return self.step_index * self.config.sim.dt


def new_run(config: Config, mode: str = "off",
            line_model: str = "bergeron", n_seg: int = 200,
            r_src: float = DEFAULT_SOURCE_RESISTANCE) -> SimRun:
    """Build a fresh run over the validated config."""
    if not config.validated:
        raise ValueError("config must be validated first")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")

    sim, pwm = config.sim, config.pwm
    dt = sim.dt
    n_steps = round(sim.t_end / dt)
    t_grid = np.arange(n_steps + 1) * dt
    v_src = sample_pwm(pwm, t_grid)

    model = _reference_model(config)
    # The reference trajectory is pinned to the wave arrival at the motor:
    # delay the source by the cable delay, minus the model's own group
    # delay so the model output lines up with the arriving edge.
    shift = config.n_delay - round(model.dc_group_delay / dt)
    shift = max(shift, 0)
    u_ref = np.concatenate([np.zeros(shift),
                            v_src[:len(v_src) - shift]]) / pwm.v_dc

    if line_model == "bergeron":
        line = BergeronLine(config.cable, dt, config.n_delay, r_src)
    elif line_model == "ladder":
        line = LadderLine(config.cable, dt, r_src, n_seg=n_seg)
    else:
        raise ValueError(f"unknown line model {line_model!r}")

    edges = detect_edges(pwm, sim.t_end)
    windows = []
    for ev in edges:
        dur = pwm.t_rise if ev.polarity == "rising" else pwm.t_fall
        windows.append((ev.t_start + config.tau, ev.t_start + config.tau + dur))
    hold_off = HOLD_OFF_RING_PERIODS * 4.0 * config.tau
    gate = Gate(pwm, config.branch, windows, hold_off)
    # The reference cannot represent the commanded slew itself, so the
    # error is blanked while each edge transits the terminal; the window
    # opens when the lead-compensated reference starts to move and closes
    # after the model's settling allowance.
    lead = model.dc_group_delay
    blank_extra = 3.0 * lead
    blanks = [(w0 - lead, w1 + blank_extra) for w0, w1 in windows]

    d_init = (matched_duty(config.branch, config.z0, config.f_ring)
              if mode == "static-matched" else config.mrac.d_init)
    state = MracState(d=d_init, gamma=config.mrac.gamma)

    # DC block at the winding's neutral end: resonant well under f_sw and
    # critically damped so its startup transient dies within one cycle.
    l_total = config.motor.n_coils * config.motor.l_coil
    w_block = 2.0 * math.pi * pwm.f_sw / 3.0
    c_dc = 1.0 / (l_total * w_block * w_block)
    r_dc = 2.0 * math.sqrt(l_total / c_dc)
    net = MotorNetwork(config.motor, config.branch, dt, c_dc=c_dc, r_dc=r_dc)

    n_rec = n_steps // sim.record_stride + 1
    rec = {name: np.zeros(n_rec) for name in TRACE_COLUMNS}
    run = SimRun(config=config, mode=mode, line=line, net=net, gate=gate,
                 model=model, mrac=state, v_src=v_src, u_ref=u_ref,
                 n_steps=n_steps, blanks=blanks, rec=rec)
    run._d_applied = d_init
    _record(run, 0)
    return run


def _zeq_mag(d: float, f: float, r_b: float, c_b: float) -> float:
    r = r_b / d
    x = 2.0 * math.pi * f * c_b * r
    return r / math.sqrt(1.0 + x * x)


def _record(run: SimRun, n: int) -> None:
    k = n // run.config.sim.record_stride
    rec = run.rec
    st = run.mrac
    rec["t_s"][k] = n * run.config.sim.dt
    rec["v_inv_V"][k] = run.line.state.v_node[0] \
        if isinstance(run.line, LadderLine) else run.line.state.v_send
    rec["v_mot_V"][k] = run.net.v_t
    rec["v_coil_V"][k] = run.net.v_coil
    rec["i_hf_A"][k] = run._i_hf
    rec["i_branch_A"][k] = run.net.i_branch
    rec["duty"][k] = st.d
    rec["zeq_ohm"][k] = _zeq_mag(st.d, run.config.f_ring,
                                 run.config.branch.r_b, run.config.branch.c_b)
    rec["lyap_J"][k] = st.big_e


def step(run: SimRun) -> SimRun:
    """Advance the run by exactly one dt."""
    _advance(run, 1)
    return run


def _advance(run: SimRun, count: int) -> None:
    cfg = run.config
    sim, pwm, branch, mr = cfg.sim, cfg.pwm, cfg.branch, cfg.mrac
    dt = sim.dt
    stride = sim.record_stride
    v_src = run.v_src
    u_ref = run.u_ref
    line = run.line
    net = run.net
    gate = run.gate
    state = run.mrac
    adaptive = run.mode == "adaptive"
    forced_active = run.mode == "static-matched"
    freeze = mr.freeze_when_inactive
    f_ring = cfg.f_ring
    v_dc = pwm.v_dc
    gamma = state.gamma
    epsilon = mr.epsilon
    r_b, c_b = branch.r_b, branch.c_b
    d_min, d_max = branch.d_min, branch.d_max

    # reference-model propagator, unrolled to scalars for the hot loop
    prop, force = _discretize(run.model, dt)
    p00, p01 = prop[0]
    p10, p11 = prop[1]
    f0, f1 = force

    # single-pole high-pass at 10*f_sw isolates the ringing components of
    # the phase current and the tracking error from the fundamental
    wc_dt = 2.0 * math.pi * 10.0 * pwm.f_sw * dt
    c1 = (2.0 - wc_dt) / (2.0 + wc_dt)
    c2 = 2.0 / (2.0 + wc_dt)

    i_hf = run._i_hf
    e_hp = run._e_hp
    e_raw_prev = run._e_raw
    i_prev = net.i_in
    blanks = run.blanks
    bi = run._bi
    n_blank = len(blanks)
    t0 = run.step_index * dt
    prev_blank = bi < n_blank and blanks[bi][0] <= t0 <= blanks[bi][1]
    xm0, xm1 = float(state.x_m[0]), float(state.x_m[1])
    d = state.d
    if forced_active:
        conducting, d_apply = True, d
    elif adaptive:
        conducting, d_apply = gate.conducting, run._d_applied
    else:
        conducting, d_apply = False, d
    adapting = adaptive and gate.active
    e = state.e
    v_coil = net.v_coil

    begin, finish = line.begin_step, line.finish_step
    net_step = net.step
    gate_update = gate.update
    isfinite = math.isfinite

    n = run.step_index
    last = n + count
    if count <= 0:
        return
    if last > run.n_steps:
        raise SimulationError("run already complete", step=n)

    while n < last:
        n += 1
        t = n * dt

        # (1)-(2) source sample and line + terminal advance
        i_nort, r_nort = begin(v_src[n])
        v_mot, _i_in = net_step(i_nort, r_nort, d_apply, conducting)
        finish(v_mot, _i_in)
        if not isfinite(v_mot):
            raise SimulationError(
                "terminal voltage diverged", step=n,
                state={"v_mot": v_mot, "duty": d_apply,
                       "conducting": conducting})

        # (3) gating for the next step
        if adaptive:
            conducting, d_apply = gate_update(t, v_mot, d)
            adapting = gate.phase == "armed"

        # (4) reference model driven by the delayed, normalized source
        vu = v_dc * 0.5 * (u_ref[n - 1] + u_ref[n])
        xm0, xm1 = (p00 * xm0 + p01 * xm1 + f0 * vu,
                    p10 * xm0 + p11 * xm1 + f1 * vu)

        # (5) error bookkeeping every step; duty update only while adapting.
        # Both controller signals are the high-frequency components of
        # their raw quantities (single pole at 10*f_sw): the branch acts on
        # the ringing, not on the fundamental, and the edge-powered
        # controller cannot see DC anyway.  The error is blanked while a
        # commanded edge transits the terminal, and both filters re-acquire
        # at blank exit so the transit itself never leaks into the
        # measurement window.
        i_hf = c1 * i_hf + c2 * (_i_in - i_prev)
        i_prev = _i_in
        v_coil = v_mot - net.v_x
        e_raw = v_coil - xm0
        e_hp = c1 * e_hp + c2 * (e_raw - e_raw_prev)
        e_raw_prev = e_raw
        while bi < n_blank and t > blanks[bi][1]:
            bi += 1
        in_blank = bi < n_blank and blanks[bi][0] <= t
        if prev_blank and not in_blank:
            e_hp = 0.0
            i_hf = 0.0
        prev_blank = in_blank
        e = 0.0 if in_blank else e_hp
        zr = r_b / d
        zx = 2.0 * math.pi * f_ring * c_b * zr
        zmag = zr / math.sqrt(1.0 + zx * zx)
        big_e = 0.5 * (e * e + zmag * i_hf * i_hf)
        state.big_e = big_e
        if (adapting or (adaptive and not freeze)) and gamma != 0.0 \
                and e != 0.0:
            dd = (gamma * e * i_hf * (r_b / (d * d))
                  / (epsilon + i_hf * i_hf)) * dt
            d += dd
            if d < d_min:
                d = d_min
                state.clamp_count += 1
            elif d > d_max:
                d = d_max
                state.clamp_count += 1
            if adapting:
                d_apply = d

        # (6) record on the stride
        if n % stride == 0:
            state.d = d
            state.e = e
            state.x_m[0] = xm0
            state.x_m[1] = xm1
            run._i_hf = i_hf
            run._d_applied = d_apply
            _record(run, n)

    state.d = d
    state.e = e
    state.x_m[0] = xm0
    state.x_m[1] = xm1
    state.eps = np.array([v_coil - xm0, i_hf - xm1])
    run._i_hf = i_hf
    run._e_hp = e_hp
    run._e_raw = e_raw_prev
    run._bi = bi
    run._d_applied = d_apply
    run.step_index = n


def run_to_end(config: Config, mode: str = "off",
               line_model: str = "bergeron", n_seg: int = 200,
               r_src: float = DEFAULT_SOURCE_RESISTANCE) -> Trace:
    """Run the full horizon and return the completed trace."""
    run = new_run(config, mode=mode, line_model=line_model, n_seg=n_seg,
                  r_src=r_src)
    _advance(run, run.n_steps)
    return Trace(**{name: run.rec[name] for name in TRACE_COLUMNS})


def reference_trajectory(config: Config) -> np.ndarray:
    """Reference-model output at the recorded sample times.

    Replays exactly the discretization and input alignment the engine
    uses, so ``v_coil_V - reference_trajectory(config)`` recovers the
    controller's output error from a persisted trace.
    """
    if not config.validated:
        raise ValueError("config must be validated first")
    sim, pwm = config.sim, config.pwm
    dt = sim.dt
    n_steps = round(sim.t_end / dt)
    v_src = sample_pwm(pwm, np.arange(n_steps + 1) * dt)
    model = _reference_model(config)
    shift = max(config.n_delay - round(model.dc_group_delay / dt), 0)
    u_ref = np.concatenate([np.zeros(shift),
                            v_src[:len(v_src) - shift]]) / pwm.v_dc
    prop, force = _discretize(model, dt)
    p00, p01 = prop[0]
    p10, p11 = prop[1]
    f0, f1 = force
    v_dc = pwm.v_dc
    out = np.zeros(n_steps // sim.record_stride + 1)
    xm0 = xm1 = 0.0
    for n in range(1, n_steps + 1):
        vu = v_dc * 0.5 * (u_ref[n - 1] + u_ref[n])
        xm0, xm1 = (p00 * xm0 + p01 * xm1 + f0 * vu,
                    p10 * xm0 + p11 * xm1 + f1 * vu)
        if n % sim.record_stride == 0:
            out[n // sim.record_stride] = xm0
    return out
