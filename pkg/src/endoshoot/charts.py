"""Two local charts of the position-velocity manifold and the costate pullback.

Chart A parametrizes the velocity direction by (path angle, azimuth) over the
North-East-Down frame and is singular for vertical velocity; chart B uses a
complementary pair of angles and is singular for horizontal east/west
velocity.  Their overlap covers every direction needed in practice, and a
covector can be carried from one chart to the other with the transpose
inverse Jacobian of the transition map, which preserves the canonical
pairing with any tangent vector.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ChartSingularity

# A chart is considered unusable once its singular angle passes 70 deg; the
# propagation layer switches earlier (60 deg) so hand-offs happen well inside
# the overlap.
USABLE_LIMIT_RAD = 7.0 * math.pi / 18.0
SWITCH_TRIGGER_RAD = math.pi / 3.0

_SINGULAR_COS = 1e-9  # velocity this close to a singular direction is unresolvable


class ChartId(enum.Enum):
    A = 0
    B = 1

    @property
    def other(self) -> "ChartId":
        return ChartId.B if self is ChartId.A else ChartId.A


@dataclass(frozen=True)
class ChartState:
    """Six local coordinates (r, L, l, v, a1, a2) in one chart.

    a1/a2 are the path angle/azimuth in chart A, and the complementary angle
    pair in chart B.  a2 is kept continuity-unwrapped, never reduced mod 2*pi.
    """

    chart: ChartId
    r: float
    L: float
    l: float
    v: float
    a1: float
    a2: float

    def __post_init__(self):
        if self.r <= 0.0:
            raise ValueError("geocentric distance r must be positive")
        if self.v <= 0.0:
            raise ValueError("speed v must be positive")

    def values(self) -> np.ndarray:
        return np.array([self.r, self.L, self.l, self.v, self.a1, self.a2])

    @classmethod
    def from_values(cls, chart: ChartId, x) -> "ChartState":
        r, L, l, v, a1, a2 = (float(c) for c in x)
        return cls(chart, r, L, l, v, a1, a2)

    def in_domain(self, margin: float = 0.0) -> bool:
        return abs(self.a1) < math.pi / 2 - margin


@dataclass(frozen=True)
class CartesianState:
    position: np.ndarray  # (3,) meters, from Earth's center
    velocity: np.ndarray  # (3,) m/s

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        if np.linalg.norm(self.position) <= 0.0 or np.linalg.norm(self.velocity) <= 0.0:
            raise ValueError("position and velocity must be nonzero")


@dataclass(frozen=True)
class Costate:
    """Adjoint covector paired with the chart its components refer to."""

    chart: ChartId
    p: np.ndarray  # (6,) conjugate to (r, L, l, v, a1, a2)

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if self.p.shape != (6,):
            raise ValueError("costate must have six components")
        if not np.all(np.isfinite(self.p)):
            raise ValueError("costate components must be finite")


def ned_rotation(L: float, l: float) -> np.ndarray:
    """Rotation from the inertial frame to North-East-Down, rows (e_L, e_l, e_r)."""
    sL, cL = math.sin(L), math.cos(L)
    sl, cl = math.sin(l), math.cos(l)
    return np.array([
        [-sL * cl, -sL * sl, cL],
        [-sl, cl, 0.0],
        [-cL * cl, -cL * sl, -sL],
    ])


def chart_rotation(chart: ChartId, a1: float, a2: float) -> np.ndarray:
    """Rotation from NED to the chart's velocity frame, rows (i, j, k)."""
    s1, c1 = math.sin(a1), math.cos(a1)
    s2, c2 = math.sin(a2), math.cos(a2)
    if chart is ChartId.A:
        return np.array([
            [c1 * c2, c1 * s2, -s1],
            [-s1 * c2, -s1 * s2, -c1],
            [-s2, c2, 0.0],
        ])
    return np.array([
        [c1 * s2, s1, c1 * c2],
        [-s1 * s2, c1, -s1 * c2],
        [-c2, 0.0, s2],
    ])


def velocity_frame(x: ChartState) -> np.ndarray:
    """Rotation from the inertial frame to the velocity frame of x's chart."""
    return chart_rotation(x.chart, x.a1, x.a2) @ ned_rotation(x.L, x.l)


def unwrap_near(angle: float, ref: float) -> float:
    """Shift angle by a multiple of 2*pi to land nearest ref."""
    return angle + 2.0 * math.pi * round((ref - angle) / (2.0 * math.pi))


def to_cartesian(x: ChartState) -> CartesianState:
    """Lift local coordinates to inertial position/velocity."""
    if abs(x.a1) >= math.pi / 2:
        raise ChartSingularity(
            f"chart {x.chart.name} state outside domain: |a1|={abs(x.a1):.6f} >= pi/2"
        )
    cL, sL = math.cos(x.L), math.sin(x.L)
    pos = x.r * np.array([cL * math.cos(x.l), cL * math.sin(x.l), sL])
    vel = velocity_frame(x).T @ np.array([x.v, 0.0, 0.0])
    return CartesianState(pos, vel)


def from_cartesian(chart: ChartId, s: CartesianState, a2_ref: float = 0.0) -> ChartState:
    """Resolve a Cartesian state in the requested chart.

    The a2 branch is chosen nearest a2_ref, keeping trajectories unwrapped.
    """
    pos, vel = s.position, s.velocity
    r = float(np.linalg.norm(pos))
    v = float(np.linalg.norm(vel))
    L = math.asin(min(1.0, max(-1.0, pos[2] / r)))
    l = math.atan2(pos[1], pos[0])
    v_ned = ned_rotation(L, l) @ vel  # (v_N, v_E, v_D)
    if chart is ChartId.A:
        # v_ned = v (cos a1 cos a2, cos a1 sin a2, -sin a1)
        c1 = math.hypot(v_ned[0], v_ned[1]) / v
        if c1 < _SINGULAR_COS:
            raise ChartSingularity("velocity is vertical: chart A cannot resolve it")
        a1 = math.asin(min(1.0, max(-1.0, -v_ned[2] / v)))
        a2 = math.atan2(v_ned[1], v_ned[0])
    else:
        # v_ned = v (cos a1 sin a2, sin a1, cos a1 cos a2)
        c1 = math.hypot(v_ned[0], v_ned[2]) / v
        if c1 < _SINGULAR_COS:
            raise ChartSingularity("velocity is horizontal east/west: chart B cannot resolve it")
        a1 = math.asin(min(1.0, max(-1.0, v_ned[1] / v)))
        a2 = math.atan2(v_ned[0], v_ned[2])
    return ChartState(chart, r, L, l, v, a1, unwrap_near(a2, a2_ref))


def _check_overlap(x: ChartState, sin_new: float) -> None:
    lim = USABLE_LIMIT_RAD
    if abs(x.a1) > lim:
        raise ChartSingularity(
            f"chart {x.chart.name} angle {x.a1:.4f} beyond usable limit {lim:.4f}"
        )
    if abs(sin_new) > math.sin(lim):
        raise ChartSingularity(
            f"state outside chart overlap: induced angle would exceed {lim:.4f}"
        )


def transition(x: ChartState, a2_ref: float | None = None) -> ChartState:
    """Re-express x in the other chart; (r, L, l, v) are untouched.

    The two angle pairs satisfy sin(theta) = cos(gamma) sin(chi),
    cos(theta) sin(phi) = cos(gamma) cos(chi), cos(theta) cos(phi) = -sin(gamma).
    """
    s1, c1 = math.sin(x.a1), math.cos(x.a1)
    s2, c2 = math.sin(x.a2), math.cos(x.a2)
    if x.chart is ChartId.A:
        sin_new = c1 * s2
        _check_overlap(x, sin_new)
        a1 = math.asin(min(1.0, max(-1.0, sin_new)))
        a2 = math.atan2(c1 * c2, -s1)
    else:
        sin_new = -c1 * c2
        _check_overlap(x, sin_new)
        a1 = math.asin(min(1.0, max(-1.0, sin_new)))
        a2 = math.atan2(s1, c1 * s2)
    if a2_ref is not None:
        a2 = unwrap_near(a2, a2_ref)
    return replace(x, chart=x.chart.other, a1=a1, a2=a2)


def _angle_block(x: ChartState) -> np.ndarray:
    """2x2 Jacobian of the new angle pair w.r.t. the old one."""
    s1, c1 = math.sin(x.a1), math.cos(x.a1)
    s2, c2 = math.sin(x.a2), math.cos(x.a2)
    if x.chart is ChartId.A:
        sin_new = c1 * s2
        cn2 = 1.0 - sin_new * sin_new  # cos^2(theta)
        cn = math.sqrt(cn2)
        return np.array([
            [-s1 * s2 / cn, c1 * c2 / cn],
            [c2 / cn2, s1 * c1 * s2 / cn2],
        ])
    sin_new = -c1 * c2
    cn2 = 1.0 - sin_new * sin_new  # cos^2(gamma)
    cn = math.sqrt(cn2)
    return np.array([
        [s1 * c2 / cn, c1 * s2 / cn],
        [s2 / cn2, -s1 * c1 * c2 / cn2],
    ])


def transition_jacobian(x: ChartState) -> np.ndarray:
    """6x6 derivative of the transition map at x (identity on r, L, l, v)."""
    s1, c1 = math.sin(x.a1), math.cos(x.a1)
    s2, c2 = math.sin(x.a2), math.cos(x.a2)
    sin_new = c1 * s2 if x.chart is ChartId.A else -c1 * c2
    _check_overlap(x, sin_new)
    J = np.eye(6)
    J[4:6, 4:6] = _angle_block(x)
    return J


def pullback_costate(x: ChartState, p: Costate) -> Costate:
    """Carry the costate across the chart change at x.

    The result pairs with tangent vectors expressed in the new chart exactly
    as p did in the old one: p_new = J^{-T} p with J the transition Jacobian.
    """
    if p.chart is not x.chart:
        raise ValueError(f"costate chart {p.chart.name} does not match state chart {x.chart.name}")
    s1, c1 = math.sin(x.a1), math.cos(x.a1)
    s2, c2 = math.sin(x.a2), math.cos(x.a2)
    sin_new = c1 * s2 if x.chart is ChartId.A else -c1 * c2
    _check_overlap(x, sin_new)
    J2 = _angle_block(x)
    det = J2[0, 0] * J2[1, 1] - J2[0, 1] * J2[1, 0]
    inv_t = np.array([[J2[1, 1], -J2[1, 0]], [-J2[0, 1], J2[0, 0]]]) / det
    q = p.p.copy()
    q[4:6] = inv_t @ p.p[4:6]
    return Costate(x.chart.other, q)
