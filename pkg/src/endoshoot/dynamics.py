"""Right-hand sides of the guidance dynamics in both charts.

rhs_full is the complete model, rhs_zero the drag-only system used to seed
the continuation (no thrust, no gravity, no frame-rotation terms), and
rhs_lambda the affine blend between them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .charts import ChartId, ChartState, velocity_frame
from .errors import ChartSingularity
from .vehicle import VehicleModel


@dataclass(frozen=True)
class LocalControl:
    """Unit body-axis direction expressed in a chart's velocity frame."""

    chart: ChartId
    u1: float
    u2: float
    u3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u1, self.u2, self.u3])

    def validate(self, alpha_max_sin2: float, tol: float = 1e-9) -> None:
        """Check the unit-norm, forward and cone constraints."""
        n2 = self.u1 * self.u1 + self.u2 * self.u2 + self.u3 * self.u3
        if abs(n2 - 1.0) > tol:
            raise ValueError(f"control is not unit norm: |u|^2 = {n2}")
        if self.u1 < -tol:
            raise ValueError(f"control points backwards: u1 = {self.u1}")
        if self.u2 * self.u2 + self.u3 * self.u3 > alpha_max_sin2 + tol:
            raise ValueError("control violates the angle-of-attack cone")


def _eval_rhs(model: VehicleModel, t: float, x: ChartState, u: LocalControl,
              lam1: float) -> np.ndarray:
    if u.chart is not x.chart:
        raise ValueError(f"control chart {u.chart.name} does not match state chart {x.chart.name}")
    out = np.empty(6)
    st = K.dyn_rhs(x.chart.value, lam1, t, x.values(), u.as_array(), model.pack(), out)
    if st == K.ERR_SINGULAR:
        raise ChartSingularity(f"dynamics evaluated too close to the chart {x.chart.name} singularity")
    return out


def rhs_full(model: VehicleModel, t: float, x: ChartState, u: LocalControl) -> np.ndarray:
    """Complete dynamics d(r, L, l, v, a1, a2)/dt."""
    return _eval_rhs(model, t, x, u, 1.0)


def rhs_zero(model: VehicleModel, t: float, x: ChartState, u: LocalControl) -> np.ndarray:
    """Drag-only dynamics; defined on chart A, where the seed problem lives."""
    if x.chart is not ChartId.A:
        raise ValueError("the order-zero dynamics is restricted to chart A")
    return _eval_rhs(model, t, x, u, 0.0)


def rhs_lambda(model: VehicleModel, t: float, x: ChartState, u: LocalControl,
               lam1: float) -> np.ndarray:
    """Affine blend: lam1 = 0 is rhs_zero, lam1 = 1 is rhs_full."""
    if not 0.0 <= lam1 <= 1.0:
        raise ValueError("lam1 must lie in [0, 1]")
    return _eval_rhs(model, t, x, u, lam1)


def convert_control(x: ChartState, u: LocalControl, target: ChartState) -> LocalControl:
    """Express the same physical body axis in another chart's velocity frame.

    x and target must describe the same physical state (e.g. via transition).
    """
    if u.chart is not x.chart:
        raise ValueError("control chart does not match source state chart")
    vec = velocity_frame(target) @ (velocity_frame(x).T @ u.as_array())
    return LocalControl(target.chart, float(vec[0]), float(vec[1]), float(vec[2]))
