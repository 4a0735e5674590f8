"""Physical model: gravity, exponential atmosphere, burn schedule, aero coefficients.

All coefficients are normalized by the instantaneous mass, i.e. d and c_m are
rho*S*C/(2 m(t)) evaluated with the exponential atmosphere, so they grow as
propellant burns off.  Units are SI throughout (meters, seconds, radians).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# WGS-84 style constants; the mission tolerances absorb small differences.
MU_EARTH = 3.986004418e14  # m^3/s^2
R_EARTH = 6378137.0        # m

# Guard altitude below which the atmosphere is frozen (Newton trial steps
# can momentarily dip below ground).
H_FLOOR = -1000.0


@dataclass(frozen=True)
class VehicleModel:
    """Solid-fuel interceptor constants.

    cm0, d0   normalized lift/drag coefficients at t=0, h=0 [1/m]
    eta       drag-due-to-lift efficiency factor [-]
    hr        atmosphere reference altitude [m]
    alpha_max maximal angle of attack [rad]
    q0        mass-flow ratio q/m(0) during burn [1/s]
    fT0       thrust acceleration f_T/m(0) during burn [m/s^2]
    t_burn    burn duration [s]
    """

    cm0: float = 7.5e-4
    d0: float = 5e-5
    eta: float = 0.442
    hr: float = 7500.0
    alpha_max: float = math.pi / 6
    q0: float = 0.025
    fT0: float = 37.5
    t_burn: float = 20.0
    mu: float = MU_EARTH
    rT: float = R_EARTH

    def __post_init__(self):
        for name in ("cm0", "d0", "eta", "hr", "alpha_max", "q0", "fT0", "t_burn", "mu", "rT"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"vehicle parameter {name} must be positive")
        if self.alpha_max > math.pi / 6 + 1e-12:
            raise ValueError("alpha_max must not exceed pi/6")
        if self.q0 * self.t_burn >= 1.0:
            raise ValueError("burn schedule consumes the whole vehicle mass")

    def pack(self, eps_reg: float = 1e-8, pv_min: float = 1e-9) -> np.ndarray:
        """Parameter vector consumed by the compiled kernels."""
        return np.array(
            [
                self.cm0, self.d0, self.eta, self.hr, self.alpha_max,
                self.q0, self.fT0, self.t_burn, self.mu, self.rT,
                math.sin(self.alpha_max), math.cos(self.alpha_max),
                eps_reg, pv_min,
            ],
            dtype=np.float64,
        )


def mass_ratio(model: VehicleModel, t: float) -> float:
    """m(t)/m(0): linear burn until t_burn, frozen afterwards."""
    tb = min(max(t, 0.0), model.t_burn)
    return 1.0 - model.q0 * tb


def thrust_accel(model: VehicleModel, t: float) -> float:
    """Thrust acceleration f_T(t)/m(t); zero after burnout."""
    if 0.0 <= t <= model.t_burn:
        return model.fT0 / mass_ratio(model, t)
    return 0.0


def aero_coeffs(model: VehicleModel, t: float, h: float) -> tuple[float, float]:
    """(d, c_m) at time t and altitude h, both proportional to rho(h)/m(t)."""
    scale = math.exp(-max(h, H_FLOOR) / model.hr) / mass_ratio(model, t)
    return model.d0 * scale, model.cm0 * scale


def gravity(model: VehicleModel, r: float) -> float:
    """Gravitational acceleration mu/r^2 at geocentric distance r."""
    if r <= 0.0:
        raise ValueError("geocentric distance must be positive")
    return model.mu / (r * r)


def omega(model: VehicleModel, t: float, x) -> float:
    """Turn-rate coefficient f_T/(m v) + v c_m; positive whenever v > 0."""
    h = x.r - model.rT
    _, cm = aero_coeffs(model, t, h)
    return thrust_accel(model, t) / x.v + x.v * cm


def assumption3_bound(model: VehicleModel, t: float, x) -> float:
    """Minimum speed for nonregular-arc validity.

    Returns sqrt( (3/2) g hr ( sqrt(1 + (4/9) (f_T/(m d)) / (g hr)) - 1 ) );
    collapses to zero after burnout.
    """
    g = gravity(model, x.r)
    d, _ = aero_coeffs(model, t, x.r - model.rT)
    ghr = g * model.hr
    ratio = thrust_accel(model, t) / d
    inner = math.sqrt(1.0 + (4.0 / 9.0) * ratio / ghr) - 1.0
    return math.sqrt(1.5 * ghr * inner)
