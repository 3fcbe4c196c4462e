"""Acceptance gate: every release criterion at its pinned tolerance.

Each test prints one PASS line when its criterion holds; run with
``pytest -v tests/test_acceptance.py`` (add -s to see the lines on
success).  Heavy simulations are shared through session fixtures.
"""

import dataclasses
import time

import numpy as np
import pytest

from reflectwave import run_to_end, validate
from reflectwave.analysis import (burst_averages, compute_metrics,
                                  optimize_refmodel, ringing_frequency,
                                  sweep)
from reflectwave.mrac import make_underdamped, ref_step
from reflectwave.params import CableParams, SimParams, TRACE_COLUMNS

VDC = 500.0


def _ok(name):
    print(f"ACCEPTANCE {name}: PASS")


# 1 -- overvoltage anchor ----------------------------------------------------

def test_overvoltage_anchor(default_cfg):
    # 70 m, L' = 250 nH/m, C' = 100 pF/m, t_rise = 100 ns, Gamma_m >= 0.95
    assert default_cfg.cable.length_m == 70.0
    assert default_cfg.cable.l_per_m == 250e-9
    assert default_cfg.cable.c_per_m == 100e-12
    assert default_cfg.pwm.t_rise == 100e-9
    from reflectwave.line import reflection_coefficient
    from reflectwave.motor import unmatched_terminal_impedance
    gamma_m = abs(reflection_coefficient(
        unmatched_terminal_impedance(default_cfg.motor, default_cfg.f_ring),
        default_cfg.z0))
    assert gamma_m >= 0.95

    t0 = time.perf_counter()
    trace = run_to_end(default_cfg, mode="off")
    runtime = time.perf_counter() - t0
    ratio = compute_metrics(trace, default_cfg).peak_ratio
    assert 1.8 <= ratio <= 2.0, ratio
    assert runtime < 5.0, runtime
    _ok(f"overvoltage anchor (peak_ratio={ratio:.3f}, {runtime:.2f}s)")


# 2 -- ringing-frequency anchor ----------------------------------------------

def test_ringing_frequency_anchor(default_cfg, off_trace):
    f = ringing_frequency(off_trace, VDC)
    assert f == pytest.approx(714e3, rel=0.05)

    short = validate(dataclasses.replace(
        default_cfg, cable=CableParams(r_per_m=0.0),
        sim=SimParams(dt=5e-9, t_end=60e-6, record_stride=2)))
    rows = sweep(short, [("cable.length_m", [20.0, 50.0, 70.0, 100.0])],
                 mode="off")
    speed = 1.0 / np.sqrt(250e-9 * 100e-12)
    for row in rows:
        assert row["error"] is None
        expected = speed / (4.0 * row["cable.length_m"])
        assert row["ring_freq_hz"] == pytest.approx(expected, rel=0.05), row
    _ok(f"ringing-frequency anchor ({f:.0f} Hz; sweep of 4 lengths "
        f"tracks 1/(4*tau))")


# 3 -- matched-limit anchor --------------------------------------------------

def test_matched_limit_anchor(default_cfg, matched_trace):
    ratio = compute_metrics(matched_trace, default_cfg).peak_ratio
    assert ratio <= 1.1, ratio
    _ok(f"matched-limit anchor (peak_ratio={ratio:.3f})")


# 4 -- oracle equivalence ----------------------------------------------------

def test_oracle_equivalence(lossless_cfg):
    tb = run_to_end(lossless_cfg, mode="off")
    tl = run_to_end(lossless_cfg, mode="off", line_model="ladder", n_seg=200)
    div = float(np.abs(tb.v_mot_V - tl.v_mot_V).max())
    assert div <= 0.05 * VDC, div
    _ok(f"oracle equivalence (max divergence {div / VDC * 100:.2f}% of Vdc "
        f"over [0, 10 tau])")


# 5 -- algebraic identity ----------------------------------------------------

def test_error_dynamics_identity_randomized():
    from reflectwave.mrac import error_dynamics_identity
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(1000):
        a, a_m = rng.normal(size=(2, 2, 2)) * 1e6
        b, b_m, c, c_m, x, x_m = rng.normal(size=(6, 2)) * 100.0
        v_dc = rng.uniform(0.0, 1000.0)
        lhs, rhs = error_dynamics_identity(a, b, c, a_m, b_m, c_m,
                                           x, x_m, v_dc)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0))
    assert worst <= 1e-9, worst
    _ok(f"error-dynamics identity (worst rel dev {worst:.2e} over 1000)")


# 6 -- adaptation property suite ---------------------------------------------

def test_adaptation_properties(default_cfg, adaptive_trace, off_trace):
    bursts = burst_averages(adaptive_trace, default_cfg)
    assert len(bursts) == 10

    # (a) energy function non-negative at every sample
    assert np.all(adaptive_trace.lyap_J >= 0.0)

    # (b) burst-averaged E strictly decreases from burst 3 onward
    mean_e = [b["mean_lyap"] for b in bursts]
    for k in range(2, len(mean_e) - 1):
        assert mean_e[k + 1] < mean_e[k], (k, mean_e)

    # (c) final-burst peak |e| at most 25% of the first burst's
    ratio_e = bursts[-1]["peak_err"] / bursts[0]["peak_err"]
    assert ratio_e <= 0.25, ratio_e

    # (d) adapted duty within +-20% of d* = r_b / z0
    d_star = default_cfg.branch.r_b / default_cfg.z0
    d_final = bursts[-1]["duty_end"]
    assert 0.8 * d_star <= d_final <= 1.2 * d_star, d_final

    # (e) adaptive peak ratio below 1.2 and strictly below off mode
    ada = compute_metrics(adaptive_trace, default_cfg).peak_ratio
    off = compute_metrics(off_trace, default_cfg).peak_ratio
    assert ada <= 1.2 and ada < off, (ada, off)

    _ok(f"adaptation suite (E>=0; burst E decrease from 3; "
        f"|e| ratio {ratio_e:.2f}; D={d_final:.3f}; peaks {ada:.2f}<{off:.2f})")


# 7 -- numerical hygiene -----------------------------------------------------

def test_numerical_hygiene(default_cfg):
    # halving dt moves peak_ratio by under 1%
    base = validate(dataclasses.replace(
        default_cfg, sim=SimParams(dt=5e-9, t_end=100e-6, record_stride=10)))
    half = validate(dataclasses.replace(
        default_cfg, sim=SimParams(dt=2.5e-9, t_end=100e-6,
                                   record_stride=20)))
    p1 = compute_metrics(run_to_end(base, mode="off"), base).peak_ratio
    p2 = compute_metrics(run_to_end(half, mode="off"), half).peak_ratio
    assert abs(p2 - p1) / p1 < 0.01, (p1, p2)

    # identical configs give bit-identical traces
    a = run_to_end(base, mode="adaptive")
    b = run_to_end(base, mode="adaptive")
    assert all(np.array_equal(a.column(c), b.column(c))
               for c in TRACE_COLUMNS)

    # reference-model step response vs the closed-form second-order
    # solution: overshoot within 2% of exp(-alpha*pi/omega)
    import math
    alpha, omega = 2e5, 1e6
    model = make_underdamped(alpha, omega, default_cfg.motor)
    dt, x, peak = 5e-8, np.zeros(2), 0.0
    for _ in range(int(40.0 / alpha / dt)):
        x, y = ref_step(model, x, VDC, 1.0, dt)
        peak = max(peak, y)
    y_ss = model.dc_gain * VDC
    overshoot = (peak - y_ss) / y_ss
    expected = math.exp(-alpha * math.pi / omega)
    assert overshoot == pytest.approx(expected, rel=0.02)
    _ok(f"numerical hygiene (dt-halving {abs(p2 - p1) / p1 * 100:.3f}%; "
        f"bit-identical; overshoot {overshoot:.4f} vs {expected:.4f})")


# 8 -- optimizer -------------------------------------------------------------

def test_optimizer_criterion(default_cfg):
    cfg = validate(dataclasses.replace(
        default_cfg,
        sim=dataclasses.replace(default_cfg.sim, t_end=160e-6)))
    incumbent = compute_metrics(run_to_end(cfg, mode="adaptive"), cfg)
    space = {k: (getattr(cfg.mrac, k) / 2, getattr(cfg.mrac, k) * 2)
             for k in ("alpha", "omega", "gamma")}

    res = optimize_refmodel(cfg, space, budget=10, seed=7)
    assert res.feasible
    assert res.metrics.branch_loss_w <= incumbent.branch_loss_w * (1 + 1e-12)
    assert res.metrics.peak_ratio <= 1.25
    assert res.evaluations <= 10

    rerun = optimize_refmodel(cfg, space, budget=10, seed=7)
    assert rerun.log == res.log and rerun.params == res.params
    _ok(f"optimizer (loss {res.metrics.branch_loss_w:.0f} W <= incumbent "
        f"{incumbent.branch_loss_w:.0f} W; peak {res.metrics.peak_ratio:.2f}; "
        f"deterministic)")
