"""Single shooting: unknown initial costate (and free final time) to terminal
residuals, solved by a Powell-style dogleg trust region.

The root finder is MINPACK's hybrd (scipy.optimize.root, method="hybr"):
forward-difference Jacobian with relative step 1e-7, Broyden rank-1 updates
between full refreshes, dogleg steps.  Unknowns are pre-scaled so columns of
the Jacobian are comparable; success means the scaled residual is below the
mission tolerance in the max norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import root as scipy_root

from .charts import ChartId, ChartState, Costate, pullback_costate, transition
from .errors import GuidanceError, NoConvergence, SingularJacobian
from .pmp import TerminalSpec, terminal_residuals
from .propagate import ExtremalTrajectory, propagate, propagate_rk2
from .vehicle import VehicleModel

# natural magnitudes of (p_r, p_L, p_l, p_v, p_a1, p_a2) and T, used to
# normalize the unknown vector before handing it to the root finder
UNKNOWN_SCALES = np.array([1e2, 1e8, 1e8, 1e3, 1e5, 1e5])
TIME_SCALE = 10.0

FAILURE_RESIDUAL = 1e6


@dataclass
class Mission:
    """Everything a shooting solve needs besides the unknowns."""

    model: VehicleModel
    x0: ChartState
    terminal: TerminalSpec
    steps: int = 320
    tol: float = 1e-8
    switch_deg: float = 60.0
    eps_reg: float = 1e-8
    method: str = "rk4"   # or "rk2" for the comparison harness
    seed: int = 0

    def __post_init__(self):
        if self.x0.chart is not ChartId.A:
            raise ValueError("missions start in chart A")
        if self.method not in ("rk4", "rk2"):
            raise ValueError(f"unknown integration method {self.method!r}")

    def propagator(self):
        return propagate if self.method == "rk4" else propagate_rk2


@dataclass
class ShootingUnknowns:
    """Initial chart-A costate, plus the final time in free-time mode."""

    p0: np.ndarray
    T: float | None = None

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float)
        if self.p0.shape != (6,):
            raise ValueError("p0 must have six components")

    @property
    def dim(self) -> int:
        return 6 if self.T is None else 7

    def as_vector(self) -> np.ndarray:
        z = self.p0 / UNKNOWN_SCALES
        if self.T is None:
            return z
        return np.concatenate([z, [self.T / TIME_SCALE]])

    @classmethod
    def from_vector(cls, z, free_time: bool) -> "ShootingUnknowns":
        z = np.asarray(z, dtype=float)
        return cls(z[:6] * UNKNOWN_SCALES, float(z[6]) * TIME_SCALE if free_time else None)


@dataclass
class SolveResult:
    unknowns: ShootingUnknowns
    residual_norm: float
    iterations: int
    cond_estimate: float
    success: bool = True


@dataclass
class ShotOutcome:
    residuals: np.ndarray
    trajectory: ExtremalTrajectory | None
    failed: bool
    error: Exception | None = None


def _sentinel(n: int, scale: float) -> np.ndarray:
    return np.full(n, FAILURE_RESIDUAL * (1.0 + scale))


def shoot_detailed(u: ShootingUnknowns, lam, mission: Mission, *,
                   constrained: bool = True) -> ShotOutcome:
    """Propagate from the mission start and evaluate terminal residuals.

    Propagation failures and nonpositive trial times become a large finite
    residual with the failure flag set, never a NaN, so the root finder can
    back the trust region off.
    """
    lam1, lam2 = float(lam[0]), float(lam[1])
    free = u.T is not None
    n = 7 if free else 6
    T = u.T if free else mission.terminal.T
    if T is None:
        raise ValueError("fixed-time shooting needs terminal.T")
    z_scale = float(np.linalg.norm(np.nan_to_num(u.p0 / UNKNOWN_SCALES, nan=0.0, posinf=0.0, neginf=0.0)))
    if not (math.isfinite(T) and T > 0.0 and np.all(np.isfinite(u.p0))):
        return ShotOutcome(_sentinel(n, z_scale), None, True)
    try:
        traj = mission.propagator()(
            mission.model, mission.x0, Costate(ChartId.A, u.p0), 0.0, float(T), (lam1, lam2),
            mission.steps, switch_deg=mission.switch_deg, eps_reg=mission.eps_reg,
            constrained=constrained,
        )
        x_T = traj.final_state()
        p_T = traj.final_costate()
        if x_T.chart is not ChartId.A:
            # targets live in chart A: hand the terminal point back
            _, tgt_ang = mission.terminal.blended(lam2)
            p_T = pullback_costate(x_T, p_T)
            x_T = transition(x_T, a2_ref=float(tgt_ang[1]))
        res = terminal_residuals(
            mission.model, x_T, p_T, float(T), lam2, mission.terminal,
            lam1=lam1, h_ref=abs(float(traj.H[0])), constrained=constrained,
        )
        if not free and len(res) == 7:
            res = res[:6]
        if not np.all(np.isfinite(res)):
            return ShotOutcome(_sentinel(n, z_scale), traj, True)
        return ShotOutcome(res, traj, False)
    except GuidanceError as exc:
        return ShotOutcome(_sentinel(n, z_scale), None, True, exc)


def shoot(u: ShootingUnknowns, lam, mission: Mission, *, constrained: bool = True) -> np.ndarray:
    return shoot_detailed(u, lam, mission, constrained=constrained).residuals


def _cond_from_packed_r(r_packed: np.ndarray, n: int) -> float:
    """Condition estimate from the packed upper-triangular QR factor."""
    diag = np.empty(n)
    idx = 0
    for i in range(n):
        diag[i] = r_packed[idx]
        idx += n - i
    diag = np.abs(diag)
    if diag.min() == 0.0:
        return math.inf
    return float(diag.max() / diag.min())


def solve(guess: ShootingUnknowns, lam, mission: Mission, *,
          constrained: bool = True, max_iter: int = 100) -> SolveResult:
    """Drive the scaled residuals below mission.tol in the max norm.

    A guess that already satisfies the tolerance returns in zero iterations.
    Raises NoConvergence with the best iterate, or SingularJacobian when the
    final Jacobian estimate is numerically rank deficient.
    """
    if not np.all(np.isfinite(guess.as_vector())):
        raise ValueError("shooting guess must be finite")
    free = guess.T is not None
    z0 = guess.as_vector()
    n = len(z0)

    def fun(z):
        return shoot(ShootingUnknowns.from_vector(z, free), lam, mission,
                     constrained=constrained)

    r0 = fun(z0)
    if np.max(np.abs(r0)) < mission.tol:
        return SolveResult(guess, float(np.max(np.abs(r0))), 0, 1.0)

    # relaunch over a ladder of initial trust radii, always from the best
    # iterate: continuation steps need small first moves (an oversized radius
    # strands the dogleg in the failure region), cold starts may need large ones
    z_best = z0
    norm_best = float(np.max(np.abs(r0)))
    nfev = 0
    cond = math.nan
    for factor in (1.0, 0.1, 100.0):
        # eps is MINPACK's epsfcn: forward-difference steps of sqrt(eps) ~ 1e-7
        sol = scipy_root(fun, z_best, method="hybr",
                         options=dict(eps=1e-14, xtol=1e-13, factor=factor,
                                      maxfev=max_iter * (n + 1)))
        nfev += int(sol.nfev)
        norm = float(np.max(np.abs(sol.fun)))
        cond = _cond_from_packed_r(np.asarray(sol.r), n) if hasattr(sol, "r") else math.nan
        if norm < norm_best:
            z_best, norm_best = sol.x, norm
        if norm_best < mission.tol:
            break
    norm = norm_best
    unknowns = ShootingUnknowns.from_vector(z_best, free)
    if norm < mission.tol:
        return SolveResult(unknowns, norm, nfev, cond)
    if math.isinf(cond) or cond > 1e15:
        raise SingularJacobian(
            f"shooting Jacobian numerically singular (cond ~ {cond:.2e}, residual {norm:.2e})"
        )
    raise NoConvergence(
        f"shooting stalled at scaled residual {norm:.3e} after {nfev} evaluations",
        best=unknowns, residual_norm=norm, iterations=nfev,
    )
