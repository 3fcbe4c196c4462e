"""Post-run metrics and the reference-model parameter optimizer."""

from __future__ import annotations

import dataclasses
import math
import random
from dataclasses import dataclass

import numpy as np

from .engine import run_to_end
from .params import Config, Trace, validate
from .source import detect_edges

__all__ = [
    "Metrics",
    "compute_metrics",
    "peak_ratio",
    "ringing_frequency",
    "branch_loss",
    "settle_time",
    "clamp_count",
    "error_magnitude",
    "cycle_windows",
    "burst_averages",
    "OptimizeResult",
    "optimize_refmodel",
    "sweep",
]


@dataclass(frozen=True)
class Metrics:
    """Headline numbers of one run."""

    peak_ratio: float
    ring_freq_hz: float | None
    branch_loss_w: float
    settle_time_s: float | None
    clamp_count: int

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def peak_ratio(trace: Trace, v_dc: float) -> float:
    """max |v_mot| / v_dc over the whole trace."""
    if len(trace) == 0:
        return 0.0
    return float(np.abs(trace.v_mot_V).max()) / v_dc


def ringing_frequency(trace: Trace, v_dc: float) -> float | None:
    """Dominant ringing frequency, or None when no ringing qualifies.

    Local maxima of v_mot above 1.2*v_dc are collected; the median
    reciprocal of the peak-to-peak intervals inside the first burst (the
    run of peaks before the first large gap) is the frequency.  Needs at
    least three qualifying peaks, otherwise ringing is reported absent.
    Peak intervals beat spectral estimation here: no windowing choices,
    and it reads the period the same way a scope cursor would.
    """
    v = trace.v_mot_V
    t = trace.t_s
    thresh = 1.2 * v_dc
    idx = np.where((v[1:-1] > thresh)
                   & (v[1:-1] >= v[:-2])
                   & (v[1:-1] > v[2:]))[0] + 1
    if len(idx) < 3:
        return None
    times = t[idx]
    gaps = np.diff(times)
    med = float(np.median(gaps))
    if med <= 0.0:
        return None
    # keep only the first burst: stop at the first inter-burst jump
    cut = np.where(gaps > 5.0 * med)[0]
    first = gaps[:cut[0]] if len(cut) else gaps
    if len(first) < 2:
        first = gaps
    return float(np.median(1.0 / first))


def branch_loss(trace: Trace) -> float:
    """Mean branch power over the run (the branch bridges the terminal,
    so its voltage is the recorded v_mot)."""
    if len(trace) < 2:
        return 0.0
    p = trace.v_mot_V * trace.i_branch_A
    span = trace.t_s[-1] - trace.t_s[0]
    return float(np.trapezoid(p, trace.t_s) / span)


def error_magnitude(trace: Trace) -> np.ndarray:
    """|e| at every sample, recovered exactly from the trace columns.

    The recorded energy is E = 0.5*(e^2 + zeq*i_hf^2), with zeq and i_hf
    recorded alongside, so e^2 = 2*E - zeq*i_hf^2 to rounding.
    """
    e2 = 2.0 * trace.lyap_J - trace.zeq_ohm * trace.i_hf_A ** 2
    return np.sqrt(np.maximum(e2, 0.0))


def settle_time(trace: Trace) -> float | None:
    """First time after which |e| stays below 10% of its global peak."""
    e = error_magnitude(trace)
    peak = e.max() if len(e) else 0.0
    if peak == 0.0:
        return 0.0
    level = 0.1 * peak
    above = np.where(e >= level)[0]
    if len(above) == 0:
        return float(trace.t_s[0])
    last = above[-1]
    if last + 1 >= len(e):
        return None
    return float(trace.t_s[last + 1])


def clamp_count(trace: Trace, config: Config) -> int:
    """Recorded samples with the adapted duty pinned at either bound."""
    d = trace.duty
    b = config.branch
    return int(np.count_nonzero((d == b.d_min) | (d == b.d_max)))


def compute_metrics(trace: Trace, config: Config) -> Metrics:
    """All metrics of a trace; pure function of the trace and its config."""
    return Metrics(
        peak_ratio=peak_ratio(trace, config.pwm.v_dc),
        ring_freq_hz=ringing_frequency(trace, config.pwm.v_dc),
        branch_loss_w=branch_loss(trace),
        settle_time_s=settle_time(trace),
        clamp_count=clamp_count(trace, config),
    )


# ---------------------------------------------------------------------------
# Burst bookkeeping (one burst = one full switching cycle, measured from
# each rising-edge arrival at the motor; rising and falling transients of
# a cycle land in the same window, which keeps the statistic insensitive
# to their structural asymmetry).


def cycle_windows(config: Config) -> list[tuple[float, float]]:
    """Complete per-cycle analysis windows [rise_k + tau, rise_k+1 + tau)."""
    period = 1.0 / config.pwm.f_sw
    rises = [e.t_start for e in detect_edges(config.pwm, config.sim.t_end)
             if e.polarity == "rising"]
    out = []
    for t0 in rises:
        w = (t0 + config.tau, t0 + config.tau + period)
        if w[1] <= config.sim.t_end + 1e-12:
            out.append(w)
    return out


def burst_averages(trace: Trace, config: Config) -> list[dict]:
    """Per-burst mean energy, peak error and final duty."""
    e = error_magnitude(trace)
    out = []
    for w0, w1 in cycle_windows(config):
        m = (trace.t_s >= w0) & (trace.t_s < w1)
        if not m.any():
            continue
        out.append({
            "t_start": w0,
            "mean_lyap": float(trace.lyap_J[m].mean()),
            "peak_err": float(e[m].max()),
            "duty_end": float(trace.duty[m][-1]),
        })
    return out


# ---------------------------------------------------------------------------
# Reference-model parameter optimization


@dataclass
class OptimizeResult:
    """Outcome of a pattern search over (alpha, omega, gamma)."""

    params: dict
    metrics: Metrics
    feasible: bool
    evaluations: int
    log: list


_AXES = ("alpha", "omega", "gamma")


def _apply_point(config: Config, point: dict) -> Config:
    mrac = dataclasses.replace(config.mrac, **point)
    return validate(dataclasses.replace(config, mrac=mrac))


def _better(a: tuple[bool, float, float], b: tuple[bool, float, float]) -> bool:
    """Feasibility first, then loss; infeasible points rank by peak."""
    if a[0] != b[0]:
        return a[0]
    if a[0]:
        return a[1] < b[1]
    return a[2] < b[2]


def optimize_refmodel(config: Config, search_space: dict,
                      budget: int = 40, seed: int = 0,
                      peak_limit: float = 1.25,
                      mode: str = "adaptive") -> OptimizeResult:
    """Derivative-free search minimizing branch loss under a peak cap.

    ``search_space`` maps each of alpha/omega/gamma to (low, high); the
    compass search walks in log10 coordinates with seeded random restarts
    until the evaluation budget is spent.  The config's own point is
    evaluated first whenever it lies inside the space, so the result is
    never worse than the incumbent.  If nothing satisfies
    peak_ratio <= peak_limit, the best infeasible candidate is returned
    with ``feasible`` False.
    """
    for axis in _AXES:
        if axis not in search_space:
            raise ValueError(f"search space must bound {axis!r}")
        lo, hi = search_space[axis]
        if not (0 < lo < hi):
            raise ValueError(f"bad range for {axis!r}: {search_space[axis]}")

    lo = {a: math.log10(search_space[a][0]) for a in _AXES}
    hi = {a: math.log10(search_space[a][1]) for a in _AXES}
    rng = random.Random(seed)
    log: list[dict] = []
    cache: dict[tuple, tuple] = {}
    metrics_cache: dict[tuple, Metrics | None] = {}

    def evaluate(x: dict) -> tuple[bool, float, float]:
        key = tuple(round(x[a], 12) for a in _AXES)
        if key in cache:
            return cache[key]
        if len(log) >= budget:
            raise _BudgetExhausted
        point = {a: 10.0 ** x[a] for a in _AXES}
        try:
            cfg = _apply_point(config, point)
            metrics = compute_metrics(run_to_end(cfg, mode=mode), cfg)
            score = (metrics.peak_ratio <= peak_limit,
                     metrics.branch_loss_w, metrics.peak_ratio)
            entry = {"point": point, "loss": metrics.branch_loss_w,
                     "peak_ratio": metrics.peak_ratio,
                     "feasible": score[0], "error": None}
        except ValueError as exc:
            metrics = None
            score = (False, math.inf, math.inf)
            entry = {"point": point, "loss": None, "peak_ratio": None,
                     "feasible": False, "error": str(exc)}
        log.append(entry)
        cache[key] = score
        metrics_cache[key] = metrics
        return score

    def clip(x: dict) -> dict:
        return {a: min(max(x[a], lo[a]), hi[a]) for a in _AXES}

    def compass(x0: dict):
        x = clip(x0)
        fx = evaluate(x)
        step = 0.25
        while step >= 0.02:
            moved = False
            for axis in _AXES:
                for sign in (1.0, -1.0):
                    y = dict(x)
                    y[axis] = min(max(y[axis] + sign * step, lo[axis]),
                                  hi[axis])
                    if y == x:
                        continue
                    fy = evaluate(y)
                    if _better(fy, fx):
                        x, fx = y, fy
                        moved = True
            if not moved:
                step *= 0.5
        return x, fx

    start_points = []
    own = {a: getattr(config.mrac, a) for a in _AXES}
    if all(search_space[a][0] <= own[a] <= search_space[a][1] for a in _AXES):
        start_points.append({a: math.log10(own[a]) for a in _AXES})
    start_points.append({a: 0.5 * (lo[a] + hi[a]) for a in _AXES})

    best_x = None
    best_f = (False, math.inf, math.inf)
    try:
        i = 0
        while len(log) < budget:
            if i < len(start_points):
                x0 = start_points[i]
            else:
                x0 = {a: rng.uniform(lo[a], hi[a]) for a in _AXES}
            i += 1
            x, fx = compass(x0)
            if best_x is None or _better(fx, best_f):
                best_x, best_f = x, fx
    except _BudgetExhausted:
        pass

    if best_x is None:
        # budget spent inside the very first descent; best logged point
        best = max(log, key=lambda r: (r["feasible"],
                                       -(r["loss"] if r["loss"] is not None
                                         else math.inf)))
        point = best["point"]
        best_f = (best["feasible"], best["loss"] or math.inf,
                  best["peak_ratio"] or math.inf)
        key = tuple(round(math.log10(point[a]), 12) for a in _AXES)
    else:
        point = {a: 10.0 ** best_x[a] for a in _AXES}
        key = tuple(round(best_x[a], 12) for a in _AXES)
    metrics = metrics_cache.get(key)
    if metrics is None:
        cfg = _apply_point(config, point)
        metrics = compute_metrics(run_to_end(cfg, mode=mode), cfg)
    return OptimizeResult(params=point, metrics=metrics,
                          feasible=best_f[0], evaluations=len(log), log=log)


class _BudgetExhausted(Exception):
    pass


# ---------------------------------------------------------------------------
# Parameter sweeps


def _override(config: Config, key: str, value) -> Config:
    section, _, field = key.partition(".")
    group = getattr(config, section, None)
    if group is None or not field:
        raise ValueError(f"unknown sweep key {key!r} (use section.field)")
    if not any(f.name == field for f in dataclasses.fields(group)):
        raise ValueError(f"unknown sweep key {key!r}")
    if field in ("n_coils", "record_stride"):
        value = int(value)
    return dataclasses.replace(config, **{section:
                               dataclasses.replace(group, **{field: value})})


def _sweep_point(args) -> dict:
    config, keys, combo, mode = args
    row = dict(zip(keys, combo))
    try:
        cfg = config
        for key, value in zip(keys, combo):
            cfg = _override(cfg, key, value)
        cfg = validate(cfg)
        metrics = compute_metrics(run_to_end(cfg, mode=mode), cfg)
        row.update(metrics.as_dict())
        row["error"] = None
    except Exception as exc:  # recorded per-row, sweep continues
        row.update({f: None for f in
                    ("peak_ratio", "ring_freq_hz", "branch_loss_w",
                     "settle_time_s", "clamp_count")})
        row["error"] = str(exc)
    return row


def sweep(config: Config, axes: list[tuple[str, list[float]]],
          mode: str = "off") -> list[dict]:
    """Cartesian-product sweep; one metrics row per point, in grid order.

    Runs dispatch to a process pool when REFLECTWAVE_THREADS asks for more
    than one worker; row order is the grid order either way.
    """
    import itertools
    import os

    if not axes or any(len(values) == 0 for _, values in axes):
        raise ValueError("sweep axes must be nonempty")
    keys = [k for k, _ in axes]
    jobs = [(config, keys, combo, mode)
            for combo in itertools.product(*(v for _, v in axes))]
    workers = int(os.environ.get("REFLECTWAVE_THREADS", "1"))
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(job) for job in jobs]
