"""Two-phase bisection continuation from the drag-only seed problem.

Phase 1 carries the dynamics/cost parameter from 0 to 1 against the seed
target; phase 2 carries the target parameter from the seed target to the
mission target.  Each phase starts with a full step of 1 and halves it on
every failed shooting solve, so a mission that solves directly costs exactly
one solve per phase.  Fixed-final-time missions run phase 1 with free time
and morph the final time toward the required value during phase 2.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContinuationStalled, NoConvergence, SingularJacobian
from .pmp import fixed_time_spec
from .shooting import Mission, ShootingUnknowns, SolveResult, solve
from .vehicle import aero_coeffs

logger = logging.getLogger(__name__)

K_MAX = 50
DELTA_MIN = 2.0 ** -20
N_RESTARTS = 32


@dataclass
class HomotopyStep:
    lambda1: float
    lambda2: float
    iterations: int
    success: bool
    wall_ms: float


@dataclass
class HomotopyState:
    lam: tuple[float, float]
    unknowns: ShootingUnknowns
    history: list[HomotopyStep] = field(default_factory=list)

    @property
    def phase1_iterations(self) -> int:
        return sum(1 for h in self.history if h.lambda2 == 0.0 and h.lambda1 > 0.0)

    @property
    def phase2_iterations(self) -> int:
        return sum(1 for h in self.history if h.lambda2 > 0.0)


def order_zero_guess(mission: Mission) -> ShootingUnknowns:
    """Heuristic seed for the drag-only problem.

    Aims the initial turn so that a circular-arc path reaches the seed target
    with the required arrival angles, estimates the arrival speed from a
    straight-line drag integral, and sets the speed costate from the
    transversality condition p_v(T) = 2 v(T).
    """
    model = mission.model
    x0 = mission.x0
    tgt_pos, tgt_ang = mission.terminal.blended(0.0)
    d_up = tgt_pos[0] - (x0.r - model.rT)
    d_n = tgt_pos[1] - x0.L * model.rT
    d_e = tgt_pos[2] - x0.l * model.rT
    rng = math.sqrt(d_up * d_up + d_n * d_n + d_e * d_e)
    gam_los = math.asin(max(-1.0, min(1.0, d_up / rng)))
    chi_los = math.atan2(d_e, d_n)
    # drag-only speed decay along the path, mid-burn mass and mid altitude
    h_mid = 0.5 * ((x0.r - model.rT) + tgt_pos[0])
    d_eff = model.d0 * math.exp(-h_mid / model.hr) / 0.75
    v_T = x0.v * math.exp(-d_eff * rng)
    T0 = rng / (0.5 * (x0.v + v_T))
    p_v0 = 2.0 * v_T
    # a circular arc arriving with the target angle leaves at 2*los - target
    dg = (2.0 * gam_los - tgt_ang[0]) - x0.a1
    dc = (2.0 * chi_los - tgt_ang[1]) - x0.a2
    cm_mid = aero_coeffs(model, model.t_burn / 2.0, h_mid)[1]
    k = 2.0 * p_v0 * model.eta / (cm_mid * T0)
    p0 = np.array([0.0, 0.0, 0.0, p_v0, k * dg, k * dc])
    return ShootingUnknowns(p0, T0)


def _drift_profile(mission: Mission, span: float, n: int = 400):
    """Uncontrolled (pure axial) drag-only flight from the mission start.

    In the seed dynamics this is a straight path with decaying speed, which
    is an extremal for its own endpoint up to small atmosphere gradients.
    Returns (times, states) sampled along [0, span].
    """
    from . import _kernels as K

    par = mission.model.pack()
    u = np.array([1.0, 0.0, 0.0])
    x = mission.x0.values()
    h = span / n
    out = np.empty(6)
    ts = [0.0]
    xs = [x.copy()]
    k2 = np.empty(6)
    for i in range(n):
        t = i * h
        K.dyn_rhs(0, 0.0, t, x, u, par, out)
        mid = x + 0.5 * h * out
        K.dyn_rhs(0, 0.0, t + 0.5 * h, mid, u, par, k2)
        x = x + h * k2
        ts.append((i + 1) * h)
        xs.append(x.copy())
    return np.array(ts), np.array(xs)


def _drift_seed(mission: Mission) -> tuple[ShootingUnknowns, Mission]:
    """An easy order-zero mission (drift endpoint as target) and its solution guess."""
    model = mission.model
    x0 = mission.x0
    tgt_pos, _ = mission.terminal.blended(0.0)
    d_up = tgt_pos[0] - (x0.r - model.rT)
    d_n = tgt_pos[1] - x0.L * model.rT
    d_e = tgt_pos[2] - x0.l * model.rT
    rng = math.sqrt(d_up * d_up + d_n * d_n + d_e * d_e)
    # fly uncontrolled until the covered path length matches the range
    ts, xs = _drift_profile(mission, 3.0 * rng / x0.v)
    path = np.concatenate([[0.0], np.cumsum(0.5 * (xs[1:, 3] + xs[:-1, 3]) * np.diff(ts))])
    idx = int(np.searchsorted(path, rng))
    idx = min(idx, len(ts) - 1)
    T_e = float(ts[idx])
    xe = xs[idx]
    v_e = float(xe[3])
    # transversality p_v = 2 v plus H(T) = 0 resolved through the L-costate
    d_at, _ = aero_coeffs(model, T_e, float(xe[0]) - model.rT)
    den = (xe[3] / xe[0]) * math.cos(xe[4]) * math.cos(xe[5])
    p_L = 2.0 * d_at * v_e ** 3 / den if abs(den) > 1e-12 else 0.0
    p0 = np.array([0.0, p_L, 0.0, 2.0 * v_e, 0.0, 0.0])
    easy_terminal = replace(
        mission.terminal,
        time_mode="free", T=None,
        target_pos=((float(xe[0]) - model.rT), float(xe[1]) * model.rT, float(xe[2]) * model.rT),
        target_angles=(float(xe[4]), float(xe[5])),
        m0_pos=None, m0_angles=None,
    )
    return ShootingUnknowns(p0, T_e), replace(mission, terminal=easy_terminal)


def _target_walk(mission: Mission, easy_mission: Mission, start: ShootingUnknowns,
                 k_max: int = K_MAX, delta_min: float = DELTA_MIN) -> ShootingUnknowns:
    """Bisection continuation of the seed target from the drift endpoint to M0."""
    tgt_pos, tgt_ang = mission.terminal.blended(0.0)
    walk_terminal = replace(
        easy_mission.terminal,
        m0_pos=easy_mission.terminal.target_pos,
        m0_angles=easy_mission.terminal.target_angles,
        target_pos=tuple(map(float, tgt_pos)),
        target_angles=tuple(map(float, tgt_ang)),
    )
    walk_mission = replace(mission, terminal=walk_terminal)
    s = 0.0
    delta = 1.0
    k = 0
    unknowns = start
    while s < 1.0:
        if k >= k_max or delta < delta_min:
            raise NoConvergence(
                f"order-zero target walk stalled at s={s:.4f}", best=unknowns)
        trial = min(s + delta, 1.0)
        try:
            result = solve(unknowns, (0.0, trial), walk_mission, constrained=False)
            s = trial
            unknowns = result.unknowns
        except (NoConvergence, SingularJacobian):
            delta *= 0.5
        k += 1
    return unknowns


def solve_order_zero(mission: Mission) -> ShootingUnknowns:
    """Converge the drag-only seed problem (unconstrained controls, free time).

    The heuristic guess is tried first; if it stalls, an uncontrolled drift
    trajectory (an extremal for its own endpoint) seeds a short continuation
    of the target toward the seed target, followed by seeded random restarts
    as a last resort.  Failure is fatal for the run.
    """
    free_mission = mission if mission.terminal.time_mode == "free" else replace(
        mission, terminal=replace(mission.terminal, time_mode="free", T=None))
    base = order_zero_guess(free_mission)
    try:
        return solve(base, (0.0, 0.0), free_mission, constrained=False).unknowns
    except (NoConvergence, SingularJacobian):
        logger.debug("order-zero heuristic guess stalled; drift bootstrap")
    try:
        start, easy_mission = _drift_seed(free_mission)
        eased = solve(start, (0.0, 0.0), easy_mission, constrained=False).unknowns
        return _target_walk(free_mission, easy_mission, eased)
    except (NoConvergence, SingularJacobian) as exc:
        last: Exception = exc
        logger.debug("order-zero drift bootstrap stalled (%s); random restarts", exc)
    rng = np.random.default_rng(mission.seed)
    scale = np.abs(base.p0) + np.array([10.0, 1e6, 1e6, 0.1 * base.p0[3], 0.0, 0.0])
    scale[4] = max(abs(base.p0[4]), 1e3)
    scale[5] = max(abs(base.p0[5]), 1e3)
    for _ in range(N_RESTARTS):
        p0 = base.p0 + rng.normal(0.0, 1.0, 6) * scale
        T = base.T * rng.uniform(0.5, 1.3)
        try:
            return solve(ShootingUnknowns(p0, T), (0.0, 0.0), free_mission,
                         constrained=False).unknowns
        except (NoConvergence, SingularJacobian) as exc:
            last = exc
    raise NoConvergence(
        f"order-zero problem failed to converge after all starts: {last}",
        best=getattr(last, "best", None),
    )


def _attempt(mission: Mission, lam, unknowns: ShootingUnknowns,
             history: list[HomotopyStep]) -> SolveResult | None:
    t0 = time.perf_counter()
    its = 0
    try:
        result = solve(unknowns, lam, mission)
        its = result.iterations
        ok = True
    except (NoConvergence, SingularJacobian) as exc:
        logger.debug("continuation step at lambda=%s failed: %s", lam, exc)
        result = None
        its = getattr(exc, "iterations", 0) or 0
        ok = False
    wall = (time.perf_counter() - t0) * 1e3
    history.append(HomotopyStep(float(lam[0]), float(lam[1]), its, ok, wall))
    return result


def continue_from(mission: Mission, seed: ShootingUnknowns, *,
                  k_max: int = K_MAX, delta_min: float = DELTA_MIN) -> HomotopyState:
    """Bisection continuation from the seed solution at lambda = (0, 0).

    Per phase: try the full remaining step (clamped to 1), halve on failure,
    keep the step on success.  Raises ContinuationStalled past k_max attempts
    or once the step underflows delta_min.
    """
    state = HomotopyState((0.0, 0.0), seed)
    fixed = mission.terminal.time_mode == "fixed"
    # both continuation phases run with free final time; a fixed-time mission
    # gets a third walk afterwards that carries the free optimum of T to the
    # required value (blending time and target together tends to fold)
    free_mission = mission if not fixed else replace(
        mission, terminal=replace(mission.terminal, time_mode="free", T=None))

    lam = [0.0, 0.0]
    unknowns = seed
    for phase in (1, 2):
        delta = 1.0
        k = 0
        fails = 0
        while lam[phase - 1] < 1.0:
            if k >= k_max or delta < delta_min:
                raise ContinuationStalled(
                    f"phase {phase} stalled at lambda={tuple(lam)} (k={k}, delta={delta:.2e})",
                    history=state.history, state=state,
                )
            trial = list(lam)
            # the solution path can hit a corner (e.g. the optimal time pinned
            # at burnout) where no nearby step succeeds; periodically retry the
            # full remaining step to leap such intervals
            if fails > 0 and fails % 6 == 0:
                trial[phase - 1] = 1.0
            else:
                trial[phase - 1] = min(lam[phase - 1] + delta, 1.0)
            result = _attempt(free_mission, tuple(trial), unknowns, state.history)
            k += 1
            if result is not None:
                lam = trial
                unknowns = result.unknowns
                state.lam = (lam[0], lam[1])
                state.unknowns = unknowns
                # acceleration: re-grow the step after a success so a single
                # hard spot does not pin the rest of the phase to a tiny step
                delta = min(2.0 * delta, 1.0)
                fails = 0
            else:
                fails += 1
                if not (fails > 1 and (fails - 1) % 6 == 0):
                    delta *= 0.5
    if fixed:
        unknowns = _time_walk(mission, unknowns, state, k_max, delta_min)
    state.lam = (1.0, 1.0)
    state.unknowns = unknowns
    return state


def _time_walk(mission: Mission, free_sol: ShootingUnknowns, state: HomotopyState,
               k_max: int, delta_min: float) -> ShootingUnknowns:
    """Carry the free-time solution at the mission target to the required T."""
    T_star = free_sol.T
    T_req = mission.terminal.T
    unknowns = ShootingUnknowns(free_sol.p0.copy(), None)
    mu = 0.0
    delta = 1.0
    k = 0
    fails = 0
    while mu < 1.0:
        if k >= k_max or delta < delta_min:
            raise ContinuationStalled(
                f"time walk stalled at mu={mu:.4f} (T={T_star + mu * (T_req - T_star):.3f})",
                history=state.history, state=state,
            )
        trial = 1.0 if (fails > 0 and fails % 6 == 0) else min(mu + delta, 1.0)
        T_blend = (1.0 - trial) * T_star + trial * T_req
        step_mission = replace(mission, terminal=fixed_time_spec(mission.terminal, T_blend))
        result = _attempt(step_mission, (1.0, 1.0), unknowns, state.history)
        k += 1
        if result is not None:
            mu = trial
            unknowns = result.unknowns
            state.unknowns = unknowns
            delta = min(2.0 * delta, 1.0)
            fails = 0
        else:
            fails += 1
            if not (fails > 1 and (fails - 1) % 6 == 0):
                delta *= 0.5
    return unknowns


def run(mission: Mission) -> HomotopyState:
    """Order-zero seed plus full continuation to lambda = (1, 1)."""
    seed = solve_order_zero(mission)
    return continue_from(mission, seed)
