"""Cable models: exact traveling-wave (Bergeron) line and an LC-ladder twin.

The Bergeron model replaces the cable with a Norton equivalent at each end:
the surge impedance Z0 in parallel with a history current delayed by the
propagation time tau.  Along each characteristic the combination
v + Z0*i (forward) / v - Z0*i (backward) is invariant, so the delay is
exact on the step grid with no numerical dispersion.

The ladder model chops the cable into n_seg series R-L / shunt C cells and
integrates them with the implicit trapezoidal rule.  It converges to the
same answer from entirely different numerics, which makes it the
cross-check for the Bergeron implementation.

Series loss R' is handled the standard lumped way: half the total cable
resistance at each end of the ideal line (Bergeron), or distributed per
segment (ladder).

Both models present the same per-step terminal interface: a Norton pair
(i_norton, r_norton) that any terminal network solver can consume by
returning its (v, i) operating point, where v = r_norton*(i_norton - i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .errors import SimulationError
from .params import CableParams

__all__ = [
    "surge_impedance",
    "reflection_coefficient",
    "LineState",
    "BergeronLine",
    "bergeron_step",
    "LadderState",
    "LadderLine",
    "ladder_step",
]

TerminalSolver = Callable[[float, float], tuple[float, float]]


def surge_impedance(cable: CableParams) -> float:
    """Z0 = sqrt(L'/C')."""
    return math.sqrt(cable.l_per_m / cable.c_per_m)


def reflection_coefficient(z_term: complex, z0: float) -> complex:
    """Voltage reflection coefficient (z_term - z0)/(z_term + z0).

    ``z_term`` may be complex (a termination evaluated at one frequency).
    The nonphysical pole z_term == -z0 is rejected.
    """
    if z0 <= 0:
        raise ValueError("z0 must be positive")
    den = z_term + z0
    if abs(den) == 0.0:
        raise ValueError("z_term = -z0 is nonphysical")
    gamma = (z_term - z0) / den
    return gamma.real if isinstance(z_term, (int, float)) else gamma


@dataclass
class LineState:
    """Bergeron history buffers and terminal node quantities.

    hist_send[k] holds v/Z0 + i recorded at the sending end, hist_recv[k]
    v/Z0 - i at the receiving end; each entry is consumed by the opposite
    end exactly n_delay steps later.
    """

    hist_send: list[float]
    hist_recv: list[float]
    v_send: float = 0.0
    v_recv: float = 0.0
    i_send: float = 0.0
    i_recv: float = 0.0
    step: int = 0


class BergeronLine:
    """Method-of-characteristics stepper for one line plus its source end.

    The sending end is solved internally against a Thevenin source
    (v_src, r_src); the receiving end is exposed per step as a Norton pair
    for an arbitrary terminal network.
    """

    def __init__(self, cable: CableParams, dt: float, n_delay: int,
                 r_src: float):
        if n_delay < 1:
            raise ValueError("n_delay must be >= 1")
        if abs(n_delay * dt - cable.tau) > 1e-9 * cable.tau:
            raise ValueError("tau must be an exact integer multiple of dt")
        self.cable = cable
        self.dt = dt
        self.n_delay = n_delay
        self.r_src = r_src
        self.z0 = surge_impedance(cable)
        self.r_half = 0.5 * cable.r_per_m * cable.length_m
        self.state = LineState(hist_send=[0.0] * n_delay,
                               hist_recv=[0.0] * n_delay)
        self._slot = 0
        self._v_send_int = 0.0

    # -- one step, split so the terminal solve can happen in between --

    def begin_step(self, v_src: float) -> tuple[float, float]:
        """Advance the sending end; return the receiving-end Norton pair."""
        st = self.state
        z0 = self.z0
        self._slot = (st.step + 1) % self.n_delay
        a = st.hist_send[self._slot]   # v/Z0 + i at send end, tau ago
        b = st.hist_recv[self._slot]   # v/Z0 - i at recv end, tau ago

        # Source loop: v_src - r_src*i = v_send, internal line terminal
        # v_send - r_half*i = Z0*b + Z0*i.
        i_send = (v_src - z0 * b) / (self.r_src + self.r_half + z0)
        st.i_send = i_send
        st.v_send = v_src - self.r_src * i_send
        self._v_send_int = st.v_send - self.r_half * i_send

        r_norton = z0 + self.r_half
        i_norton = z0 * a / r_norton
        return i_norton, r_norton

    def finish_step(self, v_recv: float, i_recv: float) -> float:
        """Commit the receiving-end solution; returns v_send for tracing."""
        st = self.state
        z0 = self.z0
        v_recv_int = v_recv + self.r_half * i_recv
        st.v_recv = v_recv
        st.i_recv = i_recv
        st.hist_send[self._slot] = self._v_send_int / z0 + st.i_send
        st.hist_recv[self._slot] = v_recv_int / z0 - i_recv
        st.step += 1
        return st.v_send


def bergeron_step(line: BergeronLine, v_src_thevenin: tuple[float, float],
                  term_network: TerminalSolver) -> LineState:
    """Advance the line one step against a terminal solver callback.

    ``v_src_thevenin`` is (open-circuit volts, source ohms); the source
    resistance must match the one the line was built with.  The callback
    receives the receiving-end Norton pair and must return finite (v, i).
    """
    v_src, r_src = v_src_thevenin
    if r_src != line.r_src:
        raise ValueError("source resistance differs from line construction")
    i_norton, r_norton = line.begin_step(v_src)
    v, i = term_network(i_norton, r_norton)
    if not (math.isfinite(v) and math.isfinite(i)):
        raise SimulationError("terminal solver returned non-finite values",
                              step=line.state.step)
    line.finish_step(v, i)
    return line.state


# ---------------------------------------------------------------------------
# LC-ladder twin


@dataclass
class LadderState:
    """Per-segment inductor currents and node capacitor voltages."""

    n_seg: int
    i_ind: np.ndarray = field(default_factory=lambda: np.zeros(0))
    v_node: np.ndarray = field(default_factory=lambda: np.zeros(0))
    i_cap: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step: int = 0


class LadderLine:
    """Trapezoidal stepper for the discretized cable.

    Nodes 0..n carry shunt capacitors (half cells at both ends so the total
    capacitance is exact); series branches carry R_seg + L_seg.  Node 0 is
    driven through the source resistance, node n is exposed through the
    same Norton interface as the Bergeron model.
    """

    def __init__(self, cable: CableParams, dt: float, r_src: float,
                 n_seg: int = 200):
        if n_seg < 10:
            raise ValueError("n_seg must be >= 10")
        self.cable = cable
        self.dt = dt
        self.r_src = r_src
        self.n_seg = n = n_seg

        l_seg = cable.l_per_m * cable.length_m / n
        c_seg = cable.c_per_m * cable.length_m / n
        r_seg = cable.r_per_m * cable.length_m / n
        self.l_seg, self.c_seg, self.r_seg = l_seg, c_seg, r_seg

        a = dt * r_seg / (2.0 * l_seg)
        self._beta = (1.0 - a) / (1.0 + a)
        self._g = (dt / (2.0 * l_seg)) / (1.0 + a)
        self._gc = 2.0 * c_seg / dt          # interior nodes
        self._gc_end = c_seg / dt            # half cells at both ends

        g, gc, gce = self._g, self._gc, self._gc_end
        diag = np.empty(n + 1)
        diag[0] = g + gce + 1.0 / r_src
        diag[1:n] = 2.0 * g + gc
        diag[n] = g + gce
        off = np.full(n, -g)
        self._ab = np.zeros((3, n + 1))
        self._ab[0, 1:] = off
        self._ab[1, :] = diag
        self._ab[2, :-1] = off

        e_n = np.zeros(n + 1)
        e_n[n] = 1.0
        self._u = solve_banded((1, 1), self._ab, e_n)
        self._r_th = float(self._u[n])

        self.state = LadderState(n_seg=n, i_ind=np.zeros(n),
                                 v_node=np.zeros(n + 1),
                                 i_cap=np.zeros(n + 1))
        self._y0: np.ndarray | None = None
        self._h_ind: np.ndarray | None = None
        self._hist_cap: np.ndarray | None = None

    def begin_step(self, v_src: float) -> tuple[float, float]:
        st = self.state
        v, i_ind, i_cap = st.v_node, st.i_ind, st.i_cap
        h = self._beta * i_ind + self._g * (v[:-1] - v[1:])
        gc_vec = np.full(self.n_seg + 1, self._gc)
        gc_vec[0] = gc_vec[-1] = self._gc_end
        hist_cap = gc_vec * v + i_cap

        rhs = np.empty(self.n_seg + 1)
        rhs[0] = v_src / self.r_src - h[0] + hist_cap[0]
        rhs[1:-1] = h[:-1] - h[1:] + hist_cap[1:-1]
        rhs[-1] = h[-1] + hist_cap[-1]

        self._h_ind = h
        self._hist_cap = hist_cap
        self._y0 = solve_banded((1, 1), self._ab, rhs)
        e_th = float(self._y0[-1])
        return e_th / self._r_th, self._r_th

    def finish_step(self, v_recv: float, i_recv: float) -> float:
        st = self.state
        v_new = self._y0 - i_recv * self._u
        gc_vec = np.full(self.n_seg + 1, self._gc)
        gc_vec[0] = gc_vec[-1] = self._gc_end
        st.i_ind = self._h_ind + self._g * (v_new[:-1] - v_new[1:])
        st.i_cap = gc_vec * v_new - self._hist_cap
        st.v_node = v_new
        st.step += 1
        return float(v_new[0])

    def energy(self) -> float:
        """Total stored energy, 0.5*L*i^2 + 0.5*C*v^2 over all elements."""
        st = self.state
        e_l = 0.5 * self.l_seg * float(np.dot(st.i_ind, st.i_ind))
        c_vec = np.full(self.n_seg + 1, self.c_seg)
        c_vec[0] = c_vec[-1] = 0.5 * self.c_seg
        e_c = 0.5 * float(np.dot(c_vec * st.v_node, st.v_node))
        return e_l + e_c


def ladder_step(line: LadderLine, v_src_thevenin: tuple[float, float],
                term_network: TerminalSolver) -> LadderState:
    """Advance the ladder one step against a terminal solver callback."""
    v_src, r_src = v_src_thevenin
    if r_src != line.r_src:
        raise ValueError("source resistance differs from line construction")
    i_norton, r_norton = line.begin_step(v_src)
    v, i = term_network(i_norton, r_norton)
    if not (math.isfinite(v) and math.isfinite(i)):
        raise SimulationError("terminal solver returned non-finite values",
                              step=line.state.step)
    line.finish_step(v, i)
    return line.state
