import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reflectwave.errors import SimulationError
from reflectwave.motor import z_eq
from reflectwave.mrac import (MracState, adapt_duty, error_dynamics_identity,
                              lyapunov, make_critically_damped,
                              make_underdamped, max_real_eigenvalue, ref_step)
from reflectwave.params import BranchParams, MotorHfParams

MOTOR = MotorHfParams()
BRANCH = BranchParams()


# -- model construction ------------------------------------------------------

def test_underdamped_eigenvalues():
    m = make_underdamped(1e6, 2 * math.pi * 714e3, MOTOR)
    (a11, a12), (a21, a22) = m.a_m
    assert a11 + a22 == pytest.approx(-2e6)                    # trace
    assert a11 * a22 - a12 * a21 == pytest.approx(
        1e6 ** 2 + (2 * math.pi * 714e3) ** 2)                 # determinant
    # eigenvalues -1e6 +- j*4.487e6 via the characteristic polynomial
    disc = (a11 + a22) ** 2 - 4 * (a11 * a22 - a12 * a21)
    assert disc < 0
    assert max_real_eigenvalue(m) == pytest.approx(-1e6)
    assert abs(a12) == pytest.approx(4.487e6, rel=1e-3)
    assert m.kind == "underdamped"


def test_underdamped_rejects_bad_args():
    with pytest.raises(ValueError):
        make_underdamped(0.0, 1e6, MOTOR)
    with pytest.raises(ValueError):
        make_underdamped(1e6, 0.0, MOTOR)   # omega -> 0 is not underdamped


def test_critically_damped_shape():
    m = make_critically_damped(1e6, MOTOR)
    assert m.a_m == ((-1e6, 0.0), (0.0, -1e6))
    assert m.kind == "critically_damped"
    assert max_real_eigenvalue(m) == -1e6
    with pytest.raises(ValueError):
        make_critically_damped(-1.0, MOTOR)


def test_dc_gain_is_first_coil_share():
    for m in (make_underdamped(2e6, 1e6, MOTOR),
              make_critically_damped(3e6, MOTOR)):
        assert m.dc_gain == pytest.approx(1.0 / MOTOR.n_coils, rel=1e-12)


@given(alpha=st.floats(min_value=1e3, max_value=1e8),
       omega=st.floats(min_value=1e3, max_value=1e8))
@settings(max_examples=60, deadline=None)
def test_constructed_models_always_stable(alpha, omega):
    assert max_real_eigenvalue(make_underdamped(alpha, omega, MOTOR)) < 0
    assert max_real_eigenvalue(make_critically_damped(alpha, MOTOR)) < 0


# -- reference stepping ------------------------------------------------------

def test_ref_step_zero_input_stays_zero():
    m = make_critically_damped(1e6, MOTOR)
    x = np.zeros(2)
    for _ in range(100):
        x, y = ref_step(m, x, 500.0, 0.0, 1e-8)
    assert np.all(x == 0.0) and y == 0.0


def test_critically_damped_converges_to_dc():
    m = make_critically_damped(1e6, MOTOR)
    dt = 2e-8
    x = np.zeros(2)
    steps = round(5.0 / 1e6 / dt)     # five time constants
    for _ in range(steps):
        x, y = ref_step(m, x, 500.0, 1.0, dt)
    target = m.dc_gain * 500.0
    assert y == pytest.approx(target, rel=0.01)
    # explicit steady state -A^-1 b V_dc
    a = np.asarray(m.a_m)
    x_ss = -np.linalg.solve(a, np.asarray(m.b_m) * 500.0)
    assert x == pytest.approx(x_ss, rel=0.01)


def test_critically_damped_no_overshoot():
    m = make_critically_damped(2e6, MOTOR)
    dt = 1e-8
    x = np.zeros(2)
    ys = []
    for _ in range(3000):
        x, y = ref_step(m, x, 500.0, 1.0, dt)
        ys.append(y)
    assert max(ys) <= m.dc_gain * 500.0 * (1 + 1e-9)


def test_underdamped_overshoot_closed_form():
    alpha, omega = 2e5, 1e6
    m = make_underdamped(alpha, omega, MOTOR)
    dt = 5e-8                       # dt*|lambda| ~ 0.05
    x = np.zeros(2)
    ys = []
    for _ in range(int(40.0 / alpha / dt)):
        x, y = ref_step(m, x, 500.0, 1.0, dt)
        ys.append(y)
    y_ss = m.dc_gain * 500.0
    overshoot = (max(ys) - y_ss) / y_ss
    assert overshoot == pytest.approx(math.exp(-alpha * math.pi / omega),
                                      rel=0.02)


def test_ref_step_rejects_coarse_dt():
    m = make_underdamped(1e7, 1e7, MOTOR)
    with pytest.raises(ValueError):
        ref_step(m, np.zeros(2), 500.0, 1.0, 1e-7)


# -- error-dynamics identity -------------------------------------------------

def test_identity_zero_inputs():
    z2 = np.zeros((2, 2))
    z1 = np.zeros(2)
    lhs, rhs = error_dynamics_identity(z2, z1, z1, z2, z1, z1, z1, z1, 0.0)
    assert lhs == 0.0 and rhs == 0.0


def test_identity_perfect_match():
    m = make_underdamped(1e6, 2e6, MOTOR)
    a = np.asarray(m.a_m)
    b = np.asarray(m.b_m)
    c = np.asarray(m.c_m)
    x = np.array([1.5, -0.4])
    lhs, rhs = error_dynamics_identity(a, b, c, a, b, c, x, x, 500.0)
    assert lhs == pytest.approx(0.0, abs=1e-12)
    assert rhs == pytest.approx(0.0, abs=1e-9)


def test_identity_randomized_1000():
    rng = np.random.default_rng(20240817)
    worst = 0.0
    for _ in range(1000):
        a, a_m = rng.normal(size=(2, 2, 2)) * 1e6
        b, b_m, c, c_m, x, x_m = rng.normal(size=(6, 2)) * 10.0
        v_dc = rng.uniform(0.0, 1000.0)
        lhs, rhs = error_dynamics_identity(a, b, c, a_m, b_m, c_m,
                                           x, x_m, v_dc)
        scale = max(abs(lhs), abs(rhs), 1.0)
        worst = max(worst, abs(lhs - rhs) / scale)
    assert worst <= 1e-9


def test_identity_shape_mismatch():
    with pytest.raises(ValueError):
        error_dynamics_identity(np.zeros((3, 3)), np.zeros(2), np.zeros(2),
                                np.zeros((2, 2)), np.zeros(2), np.zeros(2),
                                np.zeros(2), np.zeros(2), 0.0)


# -- Lyapunov function -------------------------------------------------------

def test_lyapunov_values():
    assert lyapunov(0.0, 123.0, 0.0) == 0.0
    assert lyapunov(1.0, 2.0, 1.0) == 1.5
    with pytest.raises(ValueError):
        lyapunov(1.0, -0.1, 1.0)


@given(e=st.floats(min_value=-1e3, max_value=1e3),
       z=st.floats(min_value=0.0, max_value=1e4),
       i=st.floats(min_value=-1e2, max_value=1e2))
@settings(max_examples=100, deadline=None)
def test_lyapunov_nonnegative_and_even(e, z, i):
    v = lyapunov(e, z, i)
    assert v >= 0.0
    assert v == lyapunov(-e, z, i) == lyapunov(e, z, -i)


# -- duty adaptation ---------------------------------------------------------

def _state(d=0.5, gamma=1.0):
    return MracState(d=d, gamma=gamma)


def test_adapt_no_error_no_update():
    st_ = _state()
    out = adapt_duty(st_, v_coil=0.0, i_hf=3.0, branch=BRANCH,
                     f_ring=714e3, dt=5e-9)
    assert out.d == 0.5 and out.e == 0.0


def test_adapt_direction_positive():
    st_ = _state()
    out = adapt_duty(st_, v_coil=10.0, i_hf=0.5, branch=BRANCH,
                     f_ring=714e3, dt=5e-9)
    assert out.d > 0.5   # e > 0, i_hf > 0 pushes duty up, Z_eq down


@given(e=st.floats(min_value=-50.0, max_value=50.0),
       i=st.floats(min_value=-5.0, max_value=5.0))
@settings(max_examples=100, deadline=None)
def test_adapt_sign_matches_product(e, i):
    st_ = _state()
    out = adapt_duty(st_, v_coil=e, i_hf=i, branch=BRANCH,
                     f_ring=714e3, dt=1e-9)
    if e * i > 0:
        assert out.d >= 0.5
    elif e * i < 0:
        assert out.d <= 0.5
    else:
        assert out.d == 0.5


def test_adapt_clamps_and_counts():
    st_ = _state(d=0.06, gamma=1e9)
    out = adapt_duty(st_, v_coil=-100.0, i_hf=1.0, branch=BRANCH,
                     f_ring=714e3, dt=5e-9)
    assert out.d == BRANCH.d_min
    assert out.clamp_count == 1


def test_adapt_nonfinite_aborts():
    with pytest.raises(SimulationError):
        adapt_duty(_state(), v_coil=math.nan, i_hf=0.0, branch=BRANCH,
                   f_ring=714e3, dt=5e-9)


def test_lyapunov_recorded_in_state():
    st_ = _state()
    out = adapt_duty(st_, v_coil=2.0, i_hf=0.1, branch=BRANCH,
                     f_ring=714e3, dt=5e-9)
    zmag = abs(z_eq(0.5, 714e3, BRANCH))
    assert out.big_e == pytest.approx(0.5 * (4.0 + zmag * 0.01))
