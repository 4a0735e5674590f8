"""Optimal endo-atmospheric interception trajectories by indirect shooting.

The solver works in two local charts of the position-velocity manifold,
carries the costate across chart changes by covector pullback, and reaches
hard missions through a two-parameter continuation started from a drag-only
seed problem.
"""

from .charts import (
    CartesianState,
    ChartId,
    ChartState,
    Costate,
    from_cartesian,
    pullback_costate,
    to_cartesian,
    transition,
    transition_jacobian,
)
from .dynamics import LocalControl, convert_control, rhs_full, rhs_lambda, rhs_zero
from .errors import (
    ChartSingularity,
    ContinuationStalled,
    DegenerateCostate,
    GuidanceError,
    NoConvergence,
    NonregularRegime,
    ParseError,
    SingularJacobian,
    UnsupportedNonregularArc,
)
from .pmp import (
    ControlCoeffs,
    TerminalSpec,
    adjoint_rhs,
    extract_control,
    hamiltonian,
    nonregular_control,
    regular_control,
    terminal_residuals,
)
from .propagate import ExtremalTrajectory, propagate, propagate_rk2
from .vehicle import VehicleModel

__version__ = "0.1.0"
