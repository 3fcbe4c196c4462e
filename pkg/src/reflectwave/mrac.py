"""Model-reference adaptive control of the branch duty ratio.

A second-order reference model prescribes the desired first-coil voltage
transient; the adaptation law drives the duty ratio so the measured coil
voltage tracks it.  The model output matrix is [1, 0] (first state = model
coil voltage, second state = model high-frequency current), and the input
vector is scaled so the DC gain from the bus voltage to the model output
equals the winding's quasi-static first-coil share 1/n_coils.

The duty update is a normalized MIT-rule gradient: at low frequency the
coil voltage seen through the branch is (r_b/d)*i_hf, so its sensitivity
to d is -i_hf*r_b/d^2 and stepping d along e*i_hf*r_b/d^2 descends e^2.
Dividing by (epsilon + i_hf^2) removes the current-scale sensitivity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SimulationError
from .motor import z_eq
from .params import BranchParams, MotorHfParams

__all__ = [
    "RefModel",
    "MracState",
    "make_underdamped",
    "make_critically_damped",
    "ref_step",
    "max_real_eigenvalue",
    "error_dynamics_identity",
    "lyapunov",
    "adapt_duty",
]

Matrix2 = tuple[tuple[float, float], tuple[float, float]]
Vector2 = tuple[float, float]


@dataclass(frozen=True)
class RefModel:
    """State-space triple (A_M, b_M, C_M) plus its damping class."""

    a_m: Matrix2
    b_m: Vector2
    c_m: Vector2
    kind: str  # "underdamped" | "critically_damped"

    @property
    def dc_gain(self) -> float:
        """Steady output per unit of constant input, -C A^-1 b."""
        (a11, a12), (a21, a22) = self.a_m
        det = a11 * a22 - a12 * a21
        inv_b = ((a22 * self.b_m[0] - a12 * self.b_m[1]) / det,
                 (-a21 * self.b_m[0] + a11 * self.b_m[1]) / det)
        return -(self.c_m[0] * inv_b[0] + self.c_m[1] * inv_b[1])

    @property
    def dc_group_delay(self) -> float:
        """Low-frequency transport lag of the model output.

        Feeding the model an input advanced by this amount aligns its
        output with an ideal (lag-free) response, so the tracking error
        isolates ringing rather than the model's own propagation delay.
        """
        (a11, a12), (a21, a22) = self.a_m
        if self.kind == "critically_damped":
            return -1.0 / a11
        alpha, omega = -a11, a12
        return 2.0 * alpha / (alpha * alpha + omega * omega)


def max_real_eigenvalue(model: RefModel) -> float:
    """Largest real part among the eigenvalues of A_M."""
    (a11, a12), (a21, a22) = model.a_m
    tr = a11 + a22
    det = a11 * a22 - a12 * a21
    disc = tr * tr - 4.0 * det
    if disc < 0.0:
        return tr / 2.0
    return (tr + math.sqrt(disc)) / 2.0


def make_underdamped(alpha: float, omega: float,
                     motor: MotorHfParams) -> RefModel:
    """Reference model with poles -alpha +/- j*omega.

    A_M = [[-alpha, omega], [-omega, -alpha]]; the input enters the current
    state so the output transfer function has no zero and its step overshoot
    is exactly exp(-alpha*pi/omega).
    """
    if alpha <= 0.0 or omega <= 0.0:
        raise ValueError("alpha and omega must be positive")
    share = 1.0 / motor.n_coils
    b2 = share * (alpha * alpha + omega * omega) / omega
    model = RefModel(a_m=((-alpha, omega), (-omega, -alpha)),
                     b_m=(0.0, b2), c_m=(1.0, 0.0), kind="underdamped")
    assert max_real_eigenvalue(model) < 0.0
    return model


def make_critically_damped(alpha: float, motor: MotorHfParams) -> RefModel:
    """Reference model with A_M = diag(-alpha, -alpha); no overshoot."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    share = 1.0 / motor.n_coils
    model = RefModel(a_m=((-alpha, 0.0), (0.0, -alpha)),
                     b_m=(share * alpha, 0.0), c_m=(1.0, 0.0),
                     kind="critically_damped")
    assert max_real_eigenvalue(model) < 0.0
    return model


# Cached trapezoidal propagators keyed by (model, dt).
_STEPPERS: dict[tuple[RefModel, float], tuple[np.ndarray, np.ndarray]] = {}


def _discretize(model: RefModel, dt: float) -> tuple[np.ndarray, np.ndarray]:
    key = (model, dt)
    cached = _STEPPERS.get(key)
    if cached is None:
        a = np.asarray(model.a_m)
        lam = float(np.abs(np.linalg.eigvals(a)).max())
        if dt * lam >= 0.1:
            raise ValueError(
                f"dt*|eigenvalue| = {dt * lam:.3g} too large for an accurate "
                f"reference-model step (need < 0.1)")
        left = np.eye(2) - 0.5 * dt * a
        prop = np.linalg.solve(left, np.eye(2) + 0.5 * dt * a)
        force = np.linalg.solve(left, dt * np.asarray(model.b_m))
        cached = (prop, force)
        _STEPPERS[key] = cached
    return cached


def ref_step(model: RefModel, x_m: np.ndarray, v_dc: float, u: float,
             dt: float) -> tuple[np.ndarray, float]:
    """One trapezoidal step of dx/dt = A_M x + b_M * v_dc * u.

    ``u`` is the input level averaged over the step (0..1).  Returns the
    new state and the model output C_M x.  Aborts if the state escapes
    1e3 * v_dc, which a stable model never does.
    """
    prop, force = _discretize(model, dt)
    x_new = prop @ x_m + force * (v_dc * u)
    if v_dc > 0.0 and float(np.abs(x_new).max()) > 1e3 * v_dc:
        raise SimulationError("reference model state diverged",
                              state={"x_m": x_new.tolist()})
    v_coil_m = model.c_m[0] * x_new[0] + model.c_m[1] * x_new[1]
    return x_new, float(v_coil_m)


def error_dynamics_identity(a, b, c, a_m, b_m, c_m, x, x_m,
                            v_dc: float) -> tuple[float, float]:
    """Both forms of the output-error derivative, for equality testing.

    lhs is the direct form C(AX + b*v_dc) - C_M(A_M X_M + b_M*v_dc); rhs the
    restructured form C_M A_M (X - X_M) + (CA - C_M A_M)X + (Cb - C_M b_M)v_dc
    obtained by adding and subtracting C_M A_M X, with the leading term read
    on the state-error vector.  The two are algebraically identical.
    """
    a, a_m = np.asarray(a, float), np.asarray(a_m, float)
    b, b_m = np.asarray(b, float).ravel(), np.asarray(b_m, float).ravel()
    c, c_m = np.asarray(c, float).ravel(), np.asarray(c_m, float).ravel()
    x, x_m = np.asarray(x, float).ravel(), np.asarray(x_m, float).ravel()
    n = len(x)
    if a.shape != (n, n) or a_m.shape != (n, n) or len(b) != n \
            or len(b_m) != n or len(c) != n or len(c_m) != n or len(x_m) != n:
        raise ValueError("inconsistent operand shapes")
    lhs = c @ (a @ x + b * v_dc) - c_m @ (a_m @ x_m + b_m * v_dc)
    rhs = (c_m @ a_m @ (x - x_m)
           + (c @ a - c_m @ a_m) @ x
           + (c @ b - c_m @ b_m) * v_dc)
    return float(lhs), float(rhs)


def lyapunov(e: float, z_eq_mag: float, i_hf: float) -> float:
    """Energy function 0.5*(e^2 + |Z_eq|*i_hf^2); non-negative by form."""
    if z_eq_mag < 0.0:
        raise ValueError("z_eq_mag must be >= 0")
    return 0.5 * (e * e + z_eq_mag * i_hf * i_hf)


@dataclass
class MracState:
    """Controller state carried across steps."""

    x_m: np.ndarray = field(default_factory=lambda: np.zeros(2))
    e: float = 0.0
    eps: np.ndarray = field(default_factory=lambda: np.zeros(2))
    d: float = 0.35
    big_e: float = 0.0
    gamma: float = 0.05
    clamp_count: int = 0


def adapt_duty(state: MracState, v_coil: float, i_hf: float,
               branch: BranchParams, f_ring: float, dt: float,
               epsilon: float = 1e-4) -> MracState:
    """One step of the normalized gradient law on the duty ratio.

    The model output is the first reference state (output matrix [1, 0]).
    The duty moves along gamma * e * i_hf * (r_b/d^2) / (epsilon + i_hf^2)
    and is clamped into [d_min, d_max]; clamp events are counted, never
    fatal, so adaptation transients cannot abort a run.
    """
    v_coil_m = float(state.x_m[0])
    e = v_coil - v_coil_m
    if not math.isfinite(e):
        raise SimulationError("output error is not finite",
                              state={"v_coil": v_coil, "v_coil_m": v_coil_m})
    d = state.d
    zmag = abs(z_eq(d, f_ring, branch))
    state.e = e
    state.eps = np.array([v_coil - state.x_m[0], i_hf - state.x_m[1]])
    state.big_e = lyapunov(e, zmag, i_hf)

    dd = (state.gamma * e * i_hf * (branch.r_b / (d * d))
          / (epsilon + i_hf * i_hf)) * dt
    d_new = d + dd
    if d_new < branch.d_min:
        d_new = branch.d_min
        state.clamp_count += 1
    elif d_new > branch.d_max:
        d_new = branch.d_max
        state.clamp_count += 1
    state.d = d_new
    return state
