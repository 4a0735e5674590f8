"""Hamiltonian machinery: adjoint equations, optimal control extraction and
terminal residuals for the shooting method.

The extremal control maximizes C u1 - D (u2^2 + u3^2) + lam u2 + rho u3 over
the admissible cap of the unit sphere.  When (lam, rho) is nonzero the KKT
closed forms apply (regular regime); when both vanish the maximizer is
resolved by the higher-order analysis (nonregular regime), which here only
supports the pure-axial branch.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from . import vehicle as veh
from .charts import ChartId, ChartState, Costate
from .dynamics import LocalControl
from .errors import (
    ChartSingularity,
    DegenerateCostate,
    NonregularRegime,
    UnsupportedNonregularArc,
)
from .vehicle import VehicleModel

logger = logging.getLogger(__name__)

# residual scaling: positions in meters, transversality by the initial speed
POS_SCALE = 1e-4
EPS_REG_DEFAULT = 1e-8
PV_MIN = 1e-9

# the interception cost weighs flight time against the squared arrival speed
# expressed in km/s; with the costate normalized so that p_v(T) = 2 v(T) in
# SI units, the free-time condition becomes H(T) = C1 * VREF2
VREF2 = 1.0e6


@dataclass(frozen=True)
class ControlCoeffs:
    """Coefficients of the control-dependent part of the Hamiltonian."""

    C: float    # p_v * lam1 * f_T/m
    D: float    # p_v * eta * c_m * v^2
    lam: float  # p_a1 * omega
    rho: float  # +/- p_a2 * omega / cos(a1), sign per chart

    @property
    def angular_norm(self) -> float:
        return math.hypot(self.lam, self.rho)


@dataclass(frozen=True)
class TerminalSpec:
    """Interception target and cost data.

    Positions are encoded the same way missions state them: (r - rT, L*rT,
    l*rT) in meters.  m0_* is the easy seed target the continuation starts
    from; the effective target at homotopy parameter lam2 is the componentwise
    convex combination of the two.  C1 (1/s) weighs the flight time against
    the squared arrival speed in km/s; C1 = 0 maximizes arrival speed alone.
    """

    target_pos: tuple[float, float, float]
    target_angles: tuple[float, float]
    C1: float
    time_mode: str = "free"            # "free" or "fixed"
    T: float | None = None             # required in fixed mode
    m0_pos: tuple[float, float, float] | None = None
    m0_angles: tuple[float, float] | None = None
    v0_ref: float = 500.0

    def __post_init__(self):
        if self.C1 < 0.0:
            raise ValueError("cost weight C1 must be nonnegative")
        if self.time_mode not in ("free", "fixed"):
            raise ValueError(f"unknown time mode {self.time_mode!r}")
        if self.time_mode == "fixed" and self.T is None:
            raise ValueError("fixed time mode requires T")

    def blended(self, lam2: float) -> tuple[np.ndarray, np.ndarray]:
        """Target position/angles at continuation parameter lam2."""
        pos1 = np.asarray(self.target_pos, dtype=float)
        ang1 = np.asarray(self.target_angles, dtype=float)
        pos0 = pos1 if self.m0_pos is None else np.asarray(self.m0_pos, dtype=float)
        ang0 = ang1 if self.m0_angles is None else np.asarray(self.m0_angles, dtype=float)
        return (1.0 - lam2) * pos0 + lam2 * pos1, (1.0 - lam2) * ang0 + lam2 * ang1


def control_coefficients(model: VehicleModel, t: float, x: ChartState, p: Costate,
                         lam1: float = 1.0) -> ControlCoeffs:
    if p.chart is not x.chart:
        raise ValueError("costate chart does not match state chart")
    C, D, lam, rho, st = K.control_coeffs(x.chart.value, lam1, t, x.values(), p.p, model.pack())
    if st != K.OK:
        raise ChartSingularity("control coefficients undefined this close to the chart singularity")
    return ControlCoeffs(C, D, lam, rho)


def hamiltonian(model: VehicleModel, t: float, x: ChartState, p: Costate,
                u: LocalControl, lam1: float = 1.0) -> float:
    """p . rhs_lambda(t, x, u, lam1)."""
    if p.chart is not x.chart or u.chart is not x.chart:
        raise ValueError("state, costate and control must share a chart")
    h = K.hamiltonian(x.chart.value, lam1, t, x.values(), p.p, u.as_array(), model.pack())
    if math.isnan(h):
        raise ChartSingularity("Hamiltonian undefined this close to the chart singularity")
    return float(h)


def adjoint_rhs(model: VehicleModel, t: float, x: ChartState, p: Costate,
                u: LocalControl, lam1: float = 1.0) -> np.ndarray:
    """-dH/dx for the lam1-blended dynamics."""
    if p.chart is not x.chart or u.chart is not x.chart:
        raise ValueError("state, costate and control must share a chart")
    out = np.empty(6)
    st = K.adj_rhs(x.chart.value, lam1, t, x.values(), p.p, u.as_array(), model.pack(), out)
    if st != K.OK:
        raise ChartSingularity("adjoint evaluated too close to the chart singularity")
    return out


def regular_control_from_coeffs(coeffs: ControlCoeffs, chart: ChartId,
                                alpha_max: float) -> LocalControl:
    """Closed-form regular maximizer for explicit coefficients."""
    if coeffs.angular_norm == 0.0:
        raise NonregularRegime("angular coefficients vanish; not a regular point")
    u = np.empty(3)
    K.regular_rule(coeffs.C, coeffs.D, coeffs.lam, coeffs.rho,
                   math.sin(alpha_max), math.cos(alpha_max), u)
    return LocalControl(chart, float(u[0]), float(u[1]), float(u[2]))


def regular_control(model: VehicleModel, t: float, x: ChartState, p: Costate,
                    lam1: float = 1.0, eps_reg: float = EPS_REG_DEFAULT) -> LocalControl:
    """Regular-branch control; signals NonregularRegime below the threshold."""
    coeffs = control_coefficients(model, t, x, p, lam1)
    if coeffs.angular_norm <= eps_reg * (1.0 + float(np.linalg.norm(p.p))):
        raise NonregularRegime(
            f"|(lam, rho)| = {coeffs.angular_norm:.3e} below the regular threshold"
        )
    return regular_control_from_coeffs(coeffs, x.chart, model.alpha_max)


def nonregular_control(model: VehicleModel, t: float, x: ChartState, p: Costate,
                       lam1: float = 1.0) -> LocalControl:
    """Resolve the degenerate maximization when the angular costate vanishes.

    Supports the pure-axial branches; the saturated branch (negative thrust
    coefficient) would need iterated bracket conditions and is reported as
    unsupported with diagnostics.
    """
    if abs(p.p[3]) < PV_MIN:
        raise DegenerateCostate(
            f"nonregular arc with |p_v| = {abs(p.p[3]):.3e}: the extremal degenerates"
        )
    bound = veh.assumption3_bound(model, t, x)
    if x.v <= bound:
        logger.warning(
            "nonregular arc at t=%.3f: speed %.1f m/s at or below the validity bound %.1f m/s",
            t, x.v, bound,
        )
    coeffs = control_coefficients(model, t, x, p, lam1)
    u = np.empty(3)
    st = K.nonregular_rule(x.chart.value, coeffs.C, coeffs.D, x.values(), model.pack(), u)
    if st == K.ERR_UNSUPPORTED_NONREG:
        raise UnsupportedNonregularArc(
            f"nonregular arc with C={coeffs.C:.3e}, D={coeffs.D:.3e} at t={t:.3f}: "
            "the saturated branch is detected but not integrated"
        )
    return LocalControl(x.chart, float(u[0]), float(u[1]), float(u[2]))


def extract_control(model: VehicleModel, t: float, x: ChartState, p: Costate,
                    lam1: float = 1.0, constrained: bool = True,
                    eps_reg: float = EPS_REG_DEFAULT) -> LocalControl:
    """Dispatch between the regular and nonregular branches.

    With constrained=False the cone is absent (order-zero regime) and the
    interior maximizer lam, rho / (2 D) is returned.
    """
    if p.chart is not x.chart:
        raise ValueError("costate chart does not match state chart")
    u = np.empty(3)
    st = K.select_control(x.chart.value, lam1, 1 if constrained else 0,
                          t, x.values(), p.p, model.pack(eps_reg=eps_reg), u)
    if st == K.ERR_SINGULAR:
        raise ChartSingularity("control undefined this close to the chart singularity")
    if st == K.ERR_DEGENERATE:
        raise DegenerateCostate("nonregular regime with vanishing speed costate")
    if st == K.ERR_UNSUPPORTED_NONREG:
        # re-run the rich path for a proper diagnostic
        return nonregular_control(model, t, x, p, lam1)
    if st == K.ERR_UNBOUNDED:
        raise DegenerateCostate("unconstrained maximization is unbounded: p_v <= 0")
    if st == K.NONREG:
        return nonregular_control(model, t, x, p, lam1)
    if constrained:
        coeffs = control_coefficients(model, t, x, p, lam1)
        scale = eps_reg * (1.0 + float(np.linalg.norm(p.p)))
        if scale < coeffs.angular_norm <= 10.0 * scale:
            logger.warning(
                "control extraction near the regular/nonregular boundary at t=%.3f "
                "(|(lam, rho)| = %.3e)", t, coeffs.angular_norm,
            )
    return LocalControl(x.chart, float(u[0]), float(u[1]), float(u[2]))


def terminal_residuals(model: VehicleModel, x_T: ChartState, p_T: Costate, T: float,
                       lam2: float, spec: TerminalSpec, *, lam1: float = 1.0,
                       h_ref: float | None = None,
                       constrained: bool = True) -> np.ndarray:
    """Scaled target and transversality residuals at the final time.

    Components: three position errors (meters, scaled by 1e-4), two angle
    errors (radians), the transversality defect p_v - 2 v scaled by the
    initial speed, and in free-time mode the Hamiltonian condition
    H(T) - lam1*C1 scaled by 1/C1 (or by the reference Hamiltonian magnitude
    when C1 = 0).
    """
    if x_T.chart is not ChartId.A:
        raise ValueError("terminal residuals are defined in chart A; transition first")
    if p_T.chart is not ChartId.A:
        raise ValueError("terminal costate must be in chart A")
    tgt_pos, tgt_ang = spec.blended(lam2)
    rT = model.rT
    res = [
        ((x_T.r - rT) - tgt_pos[0]) * POS_SCALE,
        (x_T.L * rT - tgt_pos[1]) * POS_SCALE,
        (x_T.l * rT - tgt_pos[2]) * POS_SCALE,
        x_T.a1 - tgt_ang[0],
        x_T.a2 - tgt_ang[1],
        (p_T.p[3] - 2.0 * x_T.v) / (2.0 * spec.v0_ref),
    ]
    if spec.time_mode == "free":
        u = extract_control(model, T, x_T, p_T, lam1=lam1, constrained=constrained)
        h = hamiltonian(model, T, x_T, p_T, u, lam1=lam1)
        # scale by whichever of the time weight and the reference Hamiltonian
        # magnitude dominates, so this row stays comparable to the others
        c1_eff = spec.C1 * VREF2
        h_scale = 1.0 / max(c1_eff, 1.0 + (abs(h_ref) if h_ref is not None else 0.0))
        res.append((h - lam1 * c1_eff) * h_scale)
    return np.array(res)


def fixed_time_spec(spec: TerminalSpec, T: float) -> TerminalSpec:
    """Copy of spec pinned to final time T."""
    return replace(spec, time_mode="fixed", T=T)
