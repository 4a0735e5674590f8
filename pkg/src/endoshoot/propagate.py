"""Coupled state/costate propagation with mid-trajectory chart hand-offs.

Fixed-step explicit Runge-Kutta (classical RK4, or midpoint RK2 for the
comparison harness) on the 12-dimensional extremal system, with the control
re-extracted at every stage.  When the active chart's singular angle crosses
the switch trigger at a step boundary, the state is re-expressed in the other
chart and the costate is carried over by the covector pullback, so the
physical trajectory and the Hamiltonian are continuous across the hand-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .charts import ChartId, ChartState, Costate, pullback_costate, transition
from .dynamics import LocalControl
from .errors import (
    ChartSingularity,
    DegenerateCostate,
    GuidanceError,
    UnsupportedNonregularArc,
)
from .vehicle import VehicleModel

DEFAULT_STEPS = 320
DEFAULT_SWITCH_DEG = 60.0

_ERRORS = {
    K.ERR_SINGULAR: (ChartSingularity, "propagation hit a chart singularity"),
    K.ERR_UNSUPPORTED_NONREG: (UnsupportedNonregularArc,
                               "propagation crossed an unsupported nonregular arc"),
    K.ERR_DEGENERATE: (DegenerateCostate, "propagation hit a degenerate nonregular costate"),
    K.ERR_UNBOUNDED: (DegenerateCostate, "unconstrained control maximization unbounded (p_v <= 0)"),
    K.ERR_NONFINITE: (GuidanceError, "propagation diverged (nonfinite or unphysical state)"),
}


@dataclass
class ExtremalTrajectory:
    """Sampled extremal: times, chart tags, states, costates, controls, H."""

    lam1: float
    constrained: bool
    t: np.ndarray                      # (n,)
    chart: np.ndarray                  # (n,) int: ChartId values
    x: np.ndarray                      # (n, 6)
    p: np.ndarray                      # (n, 6)
    u: np.ndarray                      # (n, 3)
    H: np.ndarray                      # (n,)
    switches: list = field(default_factory=list)   # (t, from ChartId, to ChartId)
    nonregular_count: int = 0

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> ChartState:
        return ChartState.from_values(ChartId(int(self.chart[i])), self.x[i])

    def costate(self, i: int) -> Costate:
        return Costate(ChartId(int(self.chart[i])), self.p[i])

    def control(self, i: int) -> LocalControl:
        return LocalControl(ChartId(int(self.chart[i])), *map(float, self.u[i]))

    def final_state(self) -> ChartState:
        return self.state(len(self.t) - 1)

    def final_costate(self) -> Costate:
        return self.costate(len(self.t) - 1)

    def c1(self) -> np.ndarray:
        return -self.u[:, 0]

    def c2(self, alpha_max: float) -> np.ndarray:
        s2 = math.sin(alpha_max) ** 2
        return (self.u[:, 1] ** 2 + self.u[:, 2] ** 2) / s2 - 1.0


def _sample(chart: int, lam1: float, constrained: int, t: float, y: np.ndarray,
            par: np.ndarray):
    u = np.empty(3)
    h, st = K.sample_fill(chart, lam1, constrained, t, y, par, u)
    if st < 0:
        exc, msg = _ERRORS[st]
        raise exc(f"{msg} (t={t:.4f})")
    return u, h, st == K.NONREG


def _propagate(model: VehicleModel, x0: ChartState, p0: Costate, t0: float, tf: float,
               lam, steps: int, order: int, switch_deg: float, eps_reg: float,
               constrained: bool) -> ExtremalTrajectory:
    if p0.chart is not x0.chart:
        raise ValueError("costate chart does not match state chart")
    lam1 = float(lam[0]) if np.ndim(lam) else float(lam)
    par = model.pack(eps_reg=eps_reg)
    cflag = 1 if constrained else 0
    switch_rad = math.radians(switch_deg)

    ts_parts, ch_parts, y_parts, u_parts, h_parts = [], [], [], [], []
    switches = []
    stats = np.zeros(2, dtype=np.int64)

    chart = x0.chart.value
    y = np.concatenate([x0.values(), p0.p]).astype(float)
    u, hval, nonreg = _sample(chart, lam1, cflag, t0, y, par)
    ts_parts.append([t0]); ch_parts.append([chart])
    y_parts.append([y.copy()]); u_parts.append([u]); h_parts.append([hval])
    if nonreg:
        stats[0] += 1

    if tf == t0:
        return _assemble(lam1, constrained, ts_parts, ch_parts, y_parts, u_parts,
                         h_parts, switches, int(stats[0]))
    if tf < t0:
        raise ValueError("final time must not precede the initial time")
    if steps < 16:
        raise ValueError("at least 16 integration steps are required")

    h = (tf - t0) / steps
    done = 0
    while True:
        # hand off to the other chart whenever the current angle is past the
        # trigger; geometrically the other chart is then well inside its domain
        if abs(y[4]) > switch_rad:
            state = ChartState.from_values(ChartId(chart), y[:6])
            new_state = transition(state)
            if abs(new_state.a1) > switch_rad:
                raise ChartSingularity("both charts unusable at the switch point")
            new_p = pullback_costate(state, Costate(ChartId(chart), y[6:]))
            t_now = t0 + done * h
            switches.append((t_now, ChartId(chart), new_state.chart))
            chart = new_state.chart.value
            y = np.concatenate([new_state.values(), new_p.p])
            u, hval, nonreg = _sample(chart, lam1, cflag, t_now, y, par)
            ts_parts.append([t_now]); ch_parts.append([chart])
            y_parts.append([y.copy()]); u_parts.append([u]); h_parts.append([hval])
            if nonreg:
                stats[0] += 1
        if done >= steps:
            break
        remaining = steps - done
        seg_t = np.empty(remaining + 1)
        seg_y = np.empty((remaining + 1, 12))
        seg_u = np.empty((remaining + 1, 3))
        seg_h = np.empty(remaining + 1)
        seg_f = np.zeros(remaining + 1, dtype=np.int8)
        n_done, status = K.integrate_segment(
            order, chart, lam1, cflag, t0 + done * h, h, remaining, y, par,
            switch_rad, seg_t, seg_y, seg_u, seg_h, seg_f, stats,
        )
        if n_done > 0:
            ts_parts.append(seg_t[1:n_done + 1])
            ch_parts.append(np.full(n_done, chart))
            y_parts.append(seg_y[1:n_done + 1])
            u_parts.append(seg_u[1:n_done + 1])
            h_parts.append(seg_h[1:n_done + 1])
        done += n_done
        if status == K.OK:
            break
        if status == K.SWITCH:
            continue
        exc, msg = _ERRORS[status]
        raise exc(f"{msg} (t={t0 + done * h:.4f})")

    return _assemble(lam1, constrained, ts_parts, ch_parts, y_parts, u_parts,
                     h_parts, switches, int(stats[0]))


def _assemble(lam1, constrained, ts, ch, ys, us, hs, switches, nonreg) -> ExtremalTrajectory:
    y = np.vstack([np.atleast_2d(a) for a in ys])
    return ExtremalTrajectory(
        lam1=lam1,
        constrained=constrained,
        t=np.concatenate([np.atleast_1d(a) for a in ts]).astype(float),
        chart=np.concatenate([np.atleast_1d(a) for a in ch]).astype(int),
        x=y[:, :6],
        p=y[:, 6:],
        u=np.vstack([np.atleast_2d(a) for a in us]),
        H=np.concatenate([np.atleast_1d(a) for a in hs]).astype(float),
        switches=switches,
        nonregular_count=nonreg,
    )


def propagate(model: VehicleModel, x0: ChartState, p0: Costate, t0: float, tf: float,
              lam, steps: int = DEFAULT_STEPS, *, switch_deg: float = DEFAULT_SWITCH_DEG,
              eps_reg: float = 1e-8, constrained: bool = True) -> ExtremalTrajectory:
    """Classical RK4 propagation of the extremal system."""
    return _propagate(model, x0, p0, t0, tf, lam, steps, 4, switch_deg, eps_reg, constrained)


def propagate_rk2(model: VehicleModel, x0: ChartState, p0: Costate, t0: float, tf: float,
                  lam, steps: int = DEFAULT_STEPS, *, switch_deg: float = DEFAULT_SWITCH_DEG,
                  eps_reg: float = 1e-8, constrained: bool = True) -> ExtremalTrajectory:
    """Midpoint RK2 propagation; used by the fixed-time comparison harness."""
    return _propagate(model, x0, p0, t0, tf, lam, steps, 2, switch_deg, eps_reg, constrained)
