"""Compiled hot path shared by the dynamics, adjoint, control and propagation layers.

Everything here works on raw float64 arrays: 6-component chart coordinates
(r, L, l, v, a1, a2), 6-component costates, 3-component local controls and a
packed vehicle-parameter vector (see VehicleModel.pack).  The public modules
wrap these kernels with typed objects and exceptions; error conditions are
returned as status codes because compiled code cannot raise rich exceptions.
"""

import math

import numpy as np
from numba import njit

# slots of the packed parameter vector
CM0, D0, ETA, HR, ALPHA, Q0, FT0, TBURN, MU, RT, SINA, COSA, EPSREG, PVMIN = range(14)

CHART_A = 0
CHART_B = 1

# status codes
OK = 0
SWITCH = 1          # propagation stopped at a step boundary to change chart
NONREG = 2          # control came from the nonregular branch (still usable)
ERR_SINGULAR = -1
ERR_UNSUPPORTED_NONREG = -2
ERR_DEGENERATE = -3
ERR_UNBOUNDED = -4
ERR_NONFINITE = -5

_COS_GUARD = 1e-6   # cos(a1) below this: the chart equations are unusable
_H_FLOOR = -1000.0  # atmosphere frozen below this altitude (trial-step guard)


@njit(cache=True)
def mass_ratio(t, par):
    tb = t
    if tb < 0.0:
        tb = 0.0
    if tb > par[TBURN]:
        tb = par[TBURN]
    return 1.0 - par[Q0] * tb


@njit(cache=True)
def thrust_accel(t, par):
    if 0.0 <= t <= par[TBURN]:
        return par[FT0] / mass_ratio(t, par)
    return 0.0


@njit(cache=True)
def aero(t, h, par):
    if h < _H_FLOOR:
        h = _H_FLOOR
    s = math.exp(-h / par[HR]) / mass_ratio(t, par)
    return par[D0] * s, par[CM0] * s


@njit(cache=True)
def gravity(r, par):
    return par[MU] / (r * r)


@njit(cache=True)
def dyn_rhs(chart, lam1, t, x, u, par, out):
    """Chart dynamics blended toward the drag-only system by lam1.

    lam1 = 1 is the full model; lam1 = 0 removes thrust, gravity and the
    frame-rotation (curvature) terms from the velocity block.  The position
    block is kinematic and does not blend.
    """
    r, L, v, a1, a2 = x[0], x[1], x[3], x[4], x[5]
    c1 = math.cos(a1)
    cL = math.cos(L)
    if c1 < _COS_GUARD or abs(cL) < _COS_GUARD:
        return ERR_SINGULAR
    s1 = math.sin(a1)
    s2, c2 = math.sin(a2), math.cos(a2)
    tL = math.tan(L)
    d, cm = aero(t, r - par[RT], par)
    fTm = lam1 * thrust_accel(t, par)
    g = gravity(r, par)
    kvr = v / r
    sig = u[1] * u[1] + u[2] * u[2]
    dfac = d + par[ETA] * cm * sig
    om = fTm / v + v * cm
    if chart == CHART_A:
        out[0] = v * s1
        out[1] = kvr * c1 * c2
        out[2] = kvr * c1 * s2 / cL
        out[3] = fTm * u[0] - dfac * v * v - lam1 * g * s1
        out[4] = om * u[1] + lam1 * (kvr - g / v) * c1
        out[5] = om / c1 * u[2] + lam1 * kvr * c1 * s2 * tL
    else:
        A = c2 + s2 * tL
        t1 = s1 / c1
        B = s2 + t1 * t1 * (s2 - tL * c2)
        out[0] = -v * c1 * c2
        out[1] = kvr * c1 * s2
        out[2] = kvr * s1 / cL
        out[3] = fTm * u[0] - dfac * v * v + lam1 * g * c1 * c2
        out[4] = om * u[1] + lam1 * (kvr * s1 * A - (g / v) * s1 * c2)
        out[5] = -om / c1 * u[2] + lam1 * (kvr * c1 * B - (g / v) * s2 / c1)
    return OK


@njit(cache=True)
def adj_rhs(chart, lam1, t, x, p, u, par, out):
    """Adjoint right-hand side -dH/dx for the lam1-blended dynamics."""
    r, L, v, a1, a2 = x[0], x[1], x[3], x[4], x[5]
    c1 = math.cos(a1)
    cL = math.cos(L)
    if c1 < _COS_GUARD or abs(cL) < _COS_GUARD:
        return ERR_SINGULAR
    s1 = math.sin(a1)
    s2, c2 = math.sin(a2), math.cos(a2)
    tL = math.tan(L)
    d, cm = aero(t, r - par[RT], par)
    fTm = lam1 * thrust_accel(t, par)
    g = gravity(r, par)
    gp = -2.0 * g / r           # d(gravity)/dr
    kvr = v / r
    sig = u[1] * u[1] + u[2] * u[2]
    dfac = d + par[ETA] * cm * sig
    om = fTm / v + v * cm
    omv = cm - fTm / (v * v)    # d(omega)/dv
    hr = par[HR]
    pr, pL, pl, pv, p4, p5 = p[0], p[1], p[2], p[3], p[4], p[5]
    if chart == CHART_A:
        out[0] = (pL * (v / (r * r)) * c1 * c2
                  + pl * (v / (r * r)) * c1 * s2 / cL
                  + pv * (-(v * v / hr) * dfac + lam1 * gp * s1)
                  + p4 * ((v * cm / hr) * u[1] + lam1 * (v / (r * r) + gp / v) * c1)
                  + p5 * ((v * cm / (hr * c1)) * u[2] + lam1 * (v / (r * r)) * c1 * s2 * tL))
        out[1] = (-pl * kvr * c1 * s2 * tL / cL
                  - lam1 * p5 * kvr * c1 * s2 / (cL * cL))
        out[2] = 0.0
        out[3] = (-pr * s1 - pL * c1 * c2 / r - pl * c1 * s2 / (r * cL)
                  + 2.0 * pv * v * dfac
                  - p4 * (omv * u[1] + lam1 * (1.0 / r + g / (v * v)) * c1)
                  - p5 * (omv * u[2] / c1 + lam1 * c1 * s2 * tL / r))
        out[4] = (-pr * v * c1 + pL * kvr * s1 * c2 + pl * kvr * s1 * s2 / cL
                  + lam1 * pv * g * c1
                  + lam1 * p4 * (kvr - g / v) * s1
                  + p5 * (-om * (s1 / (c1 * c1)) * u[2] + lam1 * kvr * s1 * s2 * tL))
        out[5] = (pL * kvr * c1 * s2 - pl * kvr * c1 * c2 / cL
                  - lam1 * p5 * kvr * c1 * c2 * tL)
    else:
        A = c2 + s2 * tL
        t1 = s1 / c1
        beta = s2 - tL * c2
        B = s2 + t1 * t1 * beta
        out[0] = (pL * (v / (r * r)) * c1 * s2
                  + pl * (v / (r * r)) * s1 / cL
                  - pv * ((v * v / hr) * dfac + lam1 * gp * c1 * c2)
                  + p4 * ((v * cm / hr) * u[1] + lam1 * ((v / (r * r)) * s1 * A + (gp / v) * s1 * c2))
                  + p5 * (-(v * cm / (hr * c1)) * u[2] + lam1 * ((v / (r * r)) * c1 * B + (gp / v) * s2 / c1)))
        out[1] = (-pl * kvr * s1 * tL / cL
                  - lam1 * p4 * kvr * s1 * s2 / (cL * cL)
                  + lam1 * p5 * kvr * c1 * t1 * t1 * c2 / (cL * cL))
        out[2] = 0.0
        out[3] = (pr * c1 * c2 - pL * c1 * s2 / r - pl * s1 / (r * cL)
                  + 2.0 * pv * v * dfac
                  - p4 * (omv * u[1] + lam1 * (s1 * A / r + (g / (v * v)) * s1 * c2))
                  - p5 * (-omv * u[2] / c1 + lam1 * (c1 * B / r + (g / (v * v)) * s2 / c1)))
        dcB = -s1 * s2 + beta * s1 * (2.0 - s1 * s1) / (c1 * c1)  # d(cos(a1) B)/da1
        out[4] = -(pr * v * s1 * c2 - pL * kvr * s1 * s2 + pl * kvr * c1 / cL
                   - lam1 * pv * g * s1 * c2
                   + lam1 * p4 * (kvr * c1 * A - (g / v) * c1 * c2)
                   + p5 * (-om * u[2] * s1 / (c1 * c1)
                           + lam1 * (kvr * dcB - (g / v) * s2 * s1 / (c1 * c1))))
        dBdphi = c2 + t1 * t1 * (c2 + tL * s2)
        out[5] = -(pr * v * c1 * s2 + pL * kvr * c1 * c2
                   - lam1 * pv * g * c1 * s2
                   + lam1 * p4 * (kvr * s1 * (c2 * tL - s2) + (g / v) * s1 * s2)
                   + lam1 * p5 * (kvr * c1 * dBdphi - (g / v) * c2 / c1))
    return OK


@njit(cache=True)
def control_coeffs(chart, lam1, t, x, p, par):
    """(C, D, lam, rho, status): coefficients of the control-dependent
    Hamiltonian C u1 - D (u2^2 + u3^2) + lam u2 + rho u3."""
    r, v, a1 = x[0], x[3], x[4]
    c1 = math.cos(a1)
    if c1 < _COS_GUARD:
        return 0.0, 0.0, 0.0, 0.0, ERR_SINGULAR
    d, cm = aero(t, r - par[RT], par)
    fTm = lam1 * thrust_accel(t, par)
    om = fTm / v + v * cm
    C = p[3] * fTm
    D = p[3] * par[ETA] * cm * v * v
    lam = p[4] * om
    if chart == CHART_A:
        rho = p[5] * om / c1
    else:
        rho = -p[5] * om / c1
    return C, D, lam, rho, OK


@njit(cache=True)
def regular_rule(C, D, lam, rho, sina, cosa, u):
    """KKT maximizer of C u1 - D sig + lam u2 + rho u3 on the admissible cap.

    Inside the cone the contact point is (lam, rho)/(C + 2D); otherwise the
    control saturates the cone aligned with (lam, rho).
    """
    n = math.sqrt(lam * lam + rho * rho)
    s = C + 2.0 * D
    if s > 0.0 and n <= s * sina:
        u[1] = lam / s
        u[2] = rho / s
        u[0] = math.sqrt(max(0.0, 1.0 - (n / s) * (n / s)))
    else:
        u[1] = sina * lam / n
        u[2] = sina * rho / n
        u[0] = cosa


@njit(cache=True)
def nonregular_rule(chart, C, D, x, par, u):
    """Resolve the degenerate maximization when the angular costate vanishes."""
    u[0] = 1.0
    u[1] = 0.0
    u[2] = 0.0
    if chart == CHART_B and abs(math.sin(x[4])) < 1e-6 and abs(math.sin(x[5])) < 1e-6:
        # velocity parallel to the position vector: the angle rates must stay
        # zero, which forces the pure axial control regardless of C and D
        return NONREG
    tol_c = 1e-14 * (1.0 + abs(D))
    if C > tol_c:
        return NONREG
    if abs(C) <= tol_c and D > 0.0:
        return NONREG
    return ERR_UNSUPPORTED_NONREG


@njit(cache=True)
def select_control(chart, lam1, constrained, t, x, p, par, u):
    """Hamiltonian-maximizing control at (t, x, p).

    constrained = 0 is the order-zero regime: interior maximum over the free
    plane (requires D > 0).  Returns OK, NONREG or a negative error code.
    """
    C, D, lam, rho, st = control_coeffs(chart, lam1, t, x, p, par)
    if st != OK:
        return st
    if constrained == 0:
        if D <= 0.0:
            if lam == 0.0 and rho == 0.0:
                u[0] = 1.0
                u[1] = 0.0
                u[2] = 0.0
                return OK
            return ERR_UNBOUNDED
        u[1] = lam / (2.0 * D)
        u[2] = rho / (2.0 * D)
        u[0] = math.sqrt(max(0.0, 1.0 - u[1] * u[1] - u[2] * u[2]))
        return OK
    pn = 0.0
    for i in range(6):
        pn += p[i] * p[i]
    pn = math.sqrt(pn)
    n = math.sqrt(lam * lam + rho * rho)
    if n > par[EPSREG] * (1.0 + pn):
        regular_rule(C, D, lam, rho, par[SINA], par[COSA], u)
        return OK
    if abs(p[3]) < par[PVMIN]:
        return ERR_DEGENERATE
    return nonregular_rule(chart, C, D, x, par, u)


@njit(cache=True)
def hamiltonian(chart, lam1, t, x, p, u, par):
    f = np.empty(6)
    st = dyn_rhs(chart, lam1, t, x, u, par, f)
    if st != OK:
        return math.nan
    h = 0.0
    for i in range(6):
        h += p[i] * f[i]
    return h


@njit(cache=True)
def coupled_rhs(chart, lam1, constrained, t, y, par, dy, u):
    """State+costate derivative with the control re-extracted in place."""
    x = y[:6]
    p = y[6:]
    st = select_control(chart, lam1, constrained, t, x, p, par, u)
    if st < 0:
        return st
    st2 = dyn_rhs(chart, lam1, t, x, u, par, dy[:6])
    if st2 < 0:
        return st2
    st3 = adj_rhs(chart, lam1, t, x, p, u, par, dy[6:])
    if st3 < 0:
        return st3
    return st  # OK or NONREG


@njit(cache=True)
def sample_fill(chart, lam1, constrained, t, y, par, u_out):
    """Control and Hamiltonian at a sample point; returns (H, status)."""
    st = select_control(chart, lam1, constrained, t, y[:6], y[6:], par, u_out)
    if st < 0:
        return math.nan, st
    h = hamiltonian(chart, lam1, t, y[:6], y[6:], u_out, par)
    return h, st


@njit(cache=True)
def _plausible(y):
    for i in range(12):
        if not math.isfinite(y[i]):
            return False
    return y[0] > 1e3 and y[3] > 1e-6


@njit(cache=True)
def _rk_step(order, chart, lam1, constrained, t, h, y, par, k1, k2, k3, k4, yt, u, stats):
    """One explicit RK step (order 4 classical or 2 midpoint) in place."""
    st = coupled_rhs(chart, lam1, constrained, t, y, par, k1, u)
    if st < 0:
        return st
    if st == NONREG:
        stats[0] += 1
    if order == 4:
        for j in range(12):
            yt[j] = y[j] + 0.5 * h * k1[j]
        st = coupled_rhs(chart, lam1, constrained, t + 0.5 * h, yt, par, k2, u)
        if st < 0:
            return st
        if st == NONREG:
            stats[0] += 1
        for j in range(12):
            yt[j] = y[j] + 0.5 * h * k2[j]
        st = coupled_rhs(chart, lam1, constrained, t + 0.5 * h, yt, par, k3, u)
        if st < 0:
            return st
        if st == NONREG:
            stats[0] += 1
        for j in range(12):
            yt[j] = y[j] + h * k3[j]
        st = coupled_rhs(chart, lam1, constrained, t + h, yt, par, k4, u)
        if st < 0:
            return st
        if st == NONREG:
            stats[0] += 1
        for j in range(12):
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    else:
        for j in range(12):
            yt[j] = y[j] + 0.5 * h * k1[j]
        st = coupled_rhs(chart, lam1, constrained, t + 0.5 * h, yt, par, k2, u)
        if st < 0:
            return st
        if st == NONREG:
            stats[0] += 1
        for j in range(12):
            y[j] += h * k2[j]
    return OK


@njit(cache=True)
def integrate_segment(order, chart, lam1, constrained, t0, h, nsteps, y, par,
                      switch_rad, ts, ys, us, hs, nonreg_flags, stats):
    """Fixed-step RK integration of the coupled 12-dim system.

    Samples 1..n_done are written (the caller owns sample 0).  A step that
    straddles the burnout time is split there, so the thrust/mass-flow jump
    never sits inside a stage and the map stays smooth in the final time.
    Stops early at a step boundary when |a1| crosses switch_rad, returning
    (n_done, SWITCH); on failure returns (n_done, negative status) with
    samples valid up to n_done.  stats[0] accumulates nonregular activations.
    """
    k1 = np.empty(12)
    k2 = np.empty(12)
    k3 = np.empty(12)
    k4 = np.empty(12)
    yt = np.empty(12)
    u = np.empty(3)
    tb = par[TBURN]
    for i in range(nsteps):
        t = t0 + i * h
        t_end = t0 + (i + 1) * h
        if t < tb and tb < t_end:
            # exact breakpoint: burn side up to tb, coast side from just past it
            st = _rk_step(order, chart, lam1, constrained, t, tb - t, y, par,
                          k1, k2, k3, k4, yt, u, stats)
            if st < 0:
                return i, st
            tb_eps = tb + 1e-9
            st = _rk_step(order, chart, lam1, constrained, tb_eps, t_end - tb_eps, y, par,
                          k1, k2, k3, k4, yt, u, stats)
        else:
            st = _rk_step(order, chart, lam1, constrained, t, h, y, par,
                          k1, k2, k3, k4, yt, u, stats)
        if st < 0:
            return i, st
        if not _plausible(y):
            return i, ERR_NONFINITE
        hval, st = sample_fill(chart, lam1, constrained, t_end, y, par, u)
        if st < 0:
            return i, st
        if st == NONREG:
            stats[0] += 1
            nonreg_flags[i + 1] = 1
        ts[i + 1] = t_end
        for j in range(12):
            ys[i + 1, j] = y[j]
        us[i + 1, 0] = u[0]
        us[i + 1, 1] = u[1]
        us[i + 1, 2] = u[2]
        hs[i + 1] = hval
        if abs(y[4]) > switch_rad:
            return i + 1, SWITCH
    return nsteps, OK
