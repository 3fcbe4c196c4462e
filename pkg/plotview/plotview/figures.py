"""Figure renderers: terminal voltages, spike zoom, adaptation diagnostics.

All figures have fixed geometry (size, dpi) and data-driven axes limits,
so re-rendering the same input reproduces the same dimensions and ranges.
Outputs are written atomically (temp file in the target directory, then
rename); a failed render never leaves a partial image behind.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .trace import PlotError, TraceData, load_trace  # noqa: E402

__all__ = ["FigureSpec", "PlotError", "fig_terminals", "fig_zoom",
           "fig_adaptation", "render"]

PANELS = ("terminals", "zoom", "adaptation")

FIG_SIZE = (9.0, 6.0)
DPI = 120


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input trace(s), output image, panel kind."""

    trace: str
    out: str
    panel: str = "terminals"
    reference: str | None = None     # optional overlay for adaptation
    v_dc: float | None = None        # override the plateau estimate
    duty_band: tuple = (0.05, 1.0)

    def __post_init__(self):
        if self.panel not in PANELS:
            raise PlotError(f"panel must be one of {PANELS}, "
                            f"got {self.panel!r}")


def _atomic_save(fig, out: str | Path) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out.parent, suffix=out.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fig.savefig(fh, format=out.suffix.lstrip(".") or "png", dpi=DPI)
        os.replace(tmp, out)
    except Exception:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)
    return out


def _time_ms(t: np.ndarray) -> tuple[np.ndarray, str]:
    span = t[-1] - t[0] if len(t) > 1 else 1.0
    if span < 1e-4:
        return t * 1e6, "time [µs]"
    return t * 1e3, "time [ms]"


def _guides(ax, v_dc: float):
    ax.axhline(v_dc, color="0.4", lw=0.8, ls="--", label="V_dc")
    ax.axhline(2 * v_dc, color="crimson", lw=0.8, ls="--", label="2·V_dc")


def fig_terminals(spec: FigureSpec) -> Path:
    """Two stacked panels: inverter and motor terminal voltage vs time."""
    tr = load_trace(spec.trace)
    v_dc = spec.v_dc or tr.estimated_v_dc()
    tx, xlabel = _time_ms(tr["t_s"])

    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=FIG_SIZE)
    ax1.plot(tx, tr["v_inv_V"], lw=0.7, color="tab:blue")
    ax1.set_ylabel("inverter terminal [V]")
    _guides(ax1, v_dc)
    ax2.plot(tx, tr["v_mot_V"], lw=0.7, color="tab:orange")
    ax2.set_ylabel("motor terminal [V]")
    _guides(ax2, v_dc)
    top = max(2.2 * v_dc, float(tr["v_mot_V"].max()) * 1.05)
    bottom = min(-0.3 * v_dc, float(tr["v_mot_V"].min()) * 1.05)
    for ax in (ax1, ax2):
        ax.set_ylim(bottom, top)
        ax.legend(loc="upper right", fontsize=8)
    ax2.set_xlabel(xlabel)
    ax1.set_title("line-to-line voltage at both cable ends")
    fig.tight_layout()
    return _atomic_save(fig, spec.out)


def _ring_period(tr: TraceData, v_dc: float) -> float:
    """Median interval between qualifying motor-voltage peaks."""
    v = tr["v_mot_V"]
    t = tr["t_s"]
    idx = np.where((v[1:-1] > 1.2 * v_dc)
                   & (v[1:-1] >= v[:-2]) & (v[1:-1] > v[2:]))[0] + 1
    if len(idx) < 3:
        raise PlotError(f"{tr.path}: no ringing to zoom into "
                        f"(< 3 peaks above 1.2*v_dc)")
    gaps = np.diff(t[idx])
    med = float(np.median(gaps))
    return float(np.median(gaps[gaps <= 5 * med]))


def fig_zoom(spec: FigureSpec) -> Path:
    """Close-up of the worst motor-terminal spike, ten ring periods wide."""
    tr = load_trace(spec.trace)
    v_dc = spec.v_dc or tr.estimated_v_dc()
    period = _ring_period(tr, v_dc)
    t = tr["t_s"]
    center = t[int(np.abs(tr["v_mot_V"]).argmax())]
    half = 5.0 * period
    m = (t >= center - half) & (t <= center + half)

    tx, xlabel = _time_ms(t[m])
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.plot(tx, tr["v_mot_V"][m], lw=1.0, color="tab:orange")
    _guides(ax, v_dc)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("motor terminal [V]")
    ax.set_title(f"voltage spike close-up (period ≈ {period * 1e6:.2f} µs)")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _atomic_save(fig, spec.out)


def fig_adaptation(spec: FigureSpec) -> Path:
    """Duty ratio, controller energy, and coil voltage (with optional
    reference-trace overlay), stacked."""
    tr = load_trace(spec.trace)
    tx, xlabel = _time_ms(tr["t_s"])

    fig, (ax1, ax2, ax3) = plt.subplots(3, 1, sharex=True,
                                        figsize=(FIG_SIZE[0], 7.5))
    lo, hi = spec.duty_band
    ax1.plot(tx, tr["duty"], lw=1.0, color="tab:green")
    ax1.axhspan(lo, hi, color="0.92")
    ax1.axhline(lo, color="0.5", lw=0.8, ls=":")
    ax1.axhline(hi, color="0.5", lw=0.8, ls=":")
    ax1.set_ylabel("duty ratio")
    ax1.set_ylim(0.0, 1.05)

    ax2.plot(tx, tr["lyap_J"], lw=0.7, color="tab:purple")
    ax2.set_ylabel("energy function")
    ax2.set_ylim(bottom=0.0)

    ax3.plot(tx, tr["v_coil_V"], lw=0.7, color="tab:orange",
             label="first coil")
    if spec.reference:
        ref = load_trace(spec.reference)
        rx, _ = _time_ms(ref["t_s"])
        ax3.plot(rx, ref["v_coil_V"], lw=0.7, color="0.3", ls="--",
                 label="reference")
        ax3.legend(loc="upper right", fontsize=8)
    ax3.set_ylabel("coil voltage [V]")
    ax3.set_xlabel(xlabel)
    ax1.set_title("duty adaptation diagnostics")
    fig.tight_layout()
    return _atomic_save(fig, spec.out)


_RENDERERS = {"terminals": fig_terminals, "zoom": fig_zoom,
              "adaptation": fig_adaptation}


def render(spec: FigureSpec) -> Path:
    return _RENDERERS[spec.panel](spec)
