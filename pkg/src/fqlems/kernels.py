"""Scalar simulation kernels shared by the public API and the training loop.

Everything here is plain positional-argument numeric code so the same source
runs compiled (numba) or interpreted (fallback, FQL_EMS_NUMBA=0).  No
fastmath: reassociation would break the bitwise determinism contract between
the two paths.

Physical conventions: SI units throughout (W, A, V, s, m/s), hydrogen in g/s,
SOC as a fraction in [0,1].  Battery current positive = discharging.
"""
import math
from collections import namedtuple

import numpy as np

from .accel import njit
from .rng import uniform

# Flattened model record passed into the episode kernel.  Built once per run
# by powertrain.pack_model(); numba handles the heterogeneous namedtuple.
ModelPack = namedtuple("ModelPack", [
    # fuel cell polarization, area-specific units (A/cm^2, ohm*cm^2)
    "e_sum",        # E0 + nernst_offset, V
    "act_c",        # R*T/(alpha*F), V
    "conc_c",       # R*T/(n*F), V
    "i0",           # exchange current density
    "i_loss",       # crossover loss current density
    "i_lim",        # limiting current density
    "r_ohm",        # area-specific ohmic resistance
    "n_cell",       # cells in series (float)
    "a_fc",         # active area, cm^2
    "i_peak",       # current density at the stack power maximum
    "p_peak",       # stack power maximum, W
    "h2_per_amp",   # g/s per ampere of stack current (mode folded in)
    "eta_dc",       # FC-side DC/DC efficiency
    "aux_w",        # auxiliary draw while the FC runs, W
    "cmd_max",      # FC command clamp, W
    # battery
    "q_bat",        # capacity, A*s
    "eta_bdc",      # battery-side DC/DC efficiency
    "soc_grid",     # lookup breakpoints, ascending SOC fractions
    "voc_tab",      # open-circuit voltage at soc_grid, V
    "rbat_tab",     # internal resistance at soc_grid, ohm
    # environment
    "dt",           # step period, s
    "soc_ref",      # SOC target fraction
    "k_bat",        # SOC deviation penalty weight
    "k_start",      # FC start penalty weight
    "start_thr",    # command level that counts as "on", W
    "soc_lo",       # lower SOC termination bound
    "soc_hi",       # upper SOC termination bound
    "per_event",    # True: start penalty on the step it occurs; False: lumped at terminal
])


# ---------------------------------------------------------------- powertrain

@njit(cache=True)
def k_traction_power(v, dv_dt, theta, cd, area, rho, f_roll, mass, grav, eta_m):
    # road-load force plus inertia; regen recovers only the efficient fraction
    weight = mass * grav
    force = (0.5 * cd * area * rho * v * v
             + weight * f_roll * math.cos(theta)
             + weight * math.sin(theta)
             + mass * dv_dt)
    p_mech = force * v
    if p_mech >= 0.0:
        return p_mech / eta_m
    return p_mech * eta_m


@njit(cache=True)
def k_cell_voltage(i, e_sum, act_c, conc_c, i0, i_loss, i_lim, r_ohm):
    return (e_sum
            - act_c * math.log((i + i_loss) / i0)
            - conc_c * math.log(i_lim / (i_lim - i))
            - i * r_ohm)


@njit(cache=True)
def k_stack_power(i, e_sum, act_c, conc_c, i0, i_loss, i_lim, r_ohm,
                  n_cell, a_fc):
    if i <= 0.0:
        return 0.0
    v = k_cell_voltage(i, e_sum, act_c, conc_c, i0, i_loss, i_lim, r_ohm)
    return n_cell * v * a_fc * i


@njit(cache=True)
def k_peak_scan(e_sum, act_c, conc_c, i0, i_loss, i_lim, r_ohm,
                n_cell, a_fc, n_grid):
    """Locate the interior maximum of the stack power curve.

    Grid scan over (0, i_lim) followed by golden-section refinement.
    Returns (i_peak, p_peak).
    """
    best_i = 0.0
    best_p = 0.0
    for k in range(1, n_grid + 1):
        i = i_lim * k / (n_grid + 1.0)
        p = k_stack_power(i, e_sum, act_c, conc_c, i0, i_loss, i_lim, r_ohm,
                          n_cell, a_fc)
        if p > best_p:
            best_p = p
            best_i = i
    step = i_lim / (n_grid + 1.0)
    lo = best_i - step
    hi = best_i + step
    if lo < 0.0:
        lo = 0.0
    if hi >= i_lim:
        hi = i_lim * (1.0 - 1e-12)
    invphi = 0.6180339887498949
    a = hi - invphi * (hi - lo)
    b = lo + invphi * (hi - lo)
    pa = k_stack_power(a, e_sum, act_c, conc_c, i0, i_loss, i_lim, r_ohm,
                       n_cell, a_fc)
    pb = k_stack_power(b, e_sum, act_c, conc_c, i0, i_loss, i_lim, r_ohm,
                       n_cell, a_fc)
    for _ in range(200):
        if hi - lo < 1e-14:
            break
        if pa < pb:
            lo = a
            a = b
            pa = pb
            b = lo + invphi * (hi - lo)
            pb = k_stack_power(b, e_sum, act_c, conc_c, i0, i_loss, i_lim,
                               r_ohm, n_cell, a_fc)
        else:
            hi = b
            b = a
            pb = pa
            a = hi - invphi * (hi - lo)
            pa = k_stack_power(a, e_sum, act_c, conc_c, i0, i_loss, i_lim,
                               r_ohm, n_cell, a_fc)
    i_peak = 0.5 * (lo + hi)
    p_peak = k_stack_power(i_peak, e_sum, act_c, conc_c, i0, i_loss, i_lim,
                           r_ohm, n_cell, a_fc)
    return i_peak, p_peak


@njit(cache=True)
def k_power_to_current(p_target, e_sum, act_c, conc_c, i0, i_loss, i_lim,
                       r_ohm, n_cell, a_fc, i_peak):
    """Invert the ascending branch of the stack power curve by bisection.

    Caller guarantees 0 <= p_target <= p_peak.  Converges to |P - target|
    below 0.1 W.
    """
    if p_target <= 0.0:
        return 0.0
    lo = 0.0
    hi = i_peak
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        p = k_stack_power(mid, e_sum, act_c, conc_c, i0, i_loss, i_lim,
                          r_ohm, n_cell, a_fc)
        err = p - p_target
        if -0.1 < err < 0.1:
            return mid
        if err < 0.0:
            lo = mid
        else:
            hi = mid
    return mid


@njit(cache=True)
def k_battery_current(p_bat, voc, rbat):
    # low-current root of I*(Voc - I*R) = P; caller keeps the discriminant real
    disc = voc * voc - 4.0 * rbat * p_bat
    return (voc - math.sqrt(disc)) / (2.0 * rbat)


@njit(cache=True)
def k_step_physics(p_veh, cmd, soc, fc_on_prev, mp):
    """One step of the plant: power split command through both sources.

    Returns (soc_new, p_bat_cmd, p_bat_term, i_bat, mdot, reward,
             start_event, bat_sat, fc_sat, boundary).
    The reward samples the post-step SOC and includes the per-step start
    penalty when configured; the terminal lump is the caller's business.
    """
    # (a) bus power balance, exact in commands
    p_bat_cmd = p_veh - cmd

    # (b) battery-side power through its converter, then current and SOC
    if p_bat_cmd > 0.0:
        p_bat_term = p_bat_cmd / mp.eta_bdc
    elif p_bat_cmd < 0.0:
        p_bat_term = p_bat_cmd * mp.eta_bdc
    else:
        p_bat_term = 0.0
    voc = np.interp(soc, mp.soc_grid, mp.voc_tab)
    rbat = np.interp(soc, mp.soc_grid, mp.rbat_tab)
    p_feas = voc * voc / (4.0 * rbat)
    bat_sat = 0
    if p_bat_term > 0.99 * p_feas:
        p_bat_term = 0.99 * p_feas
        bat_sat = 1
    i_bat = k_battery_current(p_bat_term, voc, rbat)
    soc_new = soc - i_bat * mp.dt / mp.q_bat
    boundary = 0
    if soc_new <= mp.soc_lo:
        soc_new = mp.soc_lo
        boundary = 1
    elif soc_new >= mp.soc_hi:
        soc_new = mp.soc_hi
        boundary = 1

    # (c) hydrogen: gross stack electrical power inverted to current
    fc_sat = 0
    mdot = 0.0
    if cmd > 0.0:
        gross = cmd / mp.eta_dc + mp.aux_w
        if gross > mp.p_peak:
            gross = mp.p_peak
            fc_sat = 1
        i_fc = k_power_to_current(gross, mp.e_sum, mp.act_c, mp.conc_c,
                                  mp.i0, mp.i_loss, mp.i_lim, mp.r_ohm,
                                  mp.n_cell, mp.a_fc, mp.i_peak)
        mdot = mp.h2_per_amp * mp.a_fc * i_fc

    # (d) start event on the thresholded command's rising edge
    fc_on = cmd >= mp.start_thr
    start_event = 1 if (fc_on and not fc_on_prev) else 0

    # (e) instantaneous reward; SOC deviation measured after the step so the
    # action that caused it is the one charged
    dev = soc_new - mp.soc_ref
    reward = -mdot - mp.k_bat * dev * dev
    if mp.per_event and start_event == 1:
        reward -= mp.k_start

    return (soc_new, p_bat_cmd, p_bat_term, i_bat, mdot, reward,
            start_event, bat_sat, fc_sat, boundary)


# ----------------------------------------------------------------------- fis

@njit(cache=True)
def k_locate(x, typ):
    """Index and blend weight of x inside a typical-value ladder.

    Returns (j, w): membership 1-w on set j and w on set j+1; shoulders
    saturate to (edge, 0.0).
    """
    n = len(typ)
    if x <= typ[0]:
        return 0, 0.0
    if x >= typ[n - 1]:
        return n - 1, 0.0
    j = 0
    while j < n - 2 and x >= typ[j + 1]:
        j += 1
    return j, (x - typ[j]) / (typ[j + 1] - typ[j])


@njit(cache=True)
def k_fuzzify(p_veh, soc, p_typ, s_typ, phi):
    """Product-AND firing strengths over the rule grid, row-major in p_veh."""
    n_s = len(s_typ)
    for i in range(len(phi)):
        phi[i] = 0.0
    jp, wp = k_locate(p_veh, p_typ)
    js, ws = k_locate(soc, s_typ)
    phi[jp * n_s + js] = (1.0 - wp) * (1.0 - ws)
    if ws > 0.0:
        phi[jp * n_s + js + 1] = (1.0 - wp) * ws
    if wp > 0.0:
        phi[(jp + 1) * n_s + js] = wp * (1.0 - ws)
        if ws > 0.0:
            phi[(jp + 1) * n_s + js + 1] = wp * ws


# ----------------------------------------------------------------------- fql

@njit(cache=True)
def k_greedy_actions(q, a_out):
    m, n = q.shape
    for i in range(m):
        best = 0
        bv = q[i, 0]
        for j in range(1, n):
            if q[i, j] > bv:
                bv = q[i, j]
                best = j
        a_out[i] = best


@njit(cache=True)
def k_select_actions(q, eps, invert, rng_state, a_out):
    """Per-rule epsilon-greedy.

    Draw accounting contract: exactly one uniform per rule for the
    explore/exploit decision, plus one more per exploring rule, in rule
    order.  `invert` flips the comparison to the literal published form
    (explore when the draw exceeds eps).
    """
    m, n = q.shape
    for i in range(m):
        u = uniform(rng_state)
        explore = (u < eps) != invert
        if explore:
            j = int(uniform(rng_state) * n)
            if j >= n:
                j = n - 1
            a_out[i] = j
        else:
            best = 0
            bv = q[i, 0]
            for j in range(1, n):
                if q[i, j] > bv:
                    bv = q[i, j]
                    best = j
            a_out[i] = best


@njit(cache=True)
def k_compose(a_idx, phi, u_levels, cmd_max):
    num = 0.0
    den = 0.0
    for i in range(len(phi)):
        num += u_levels[a_idx[i]] * phi[i]
        den += phi[i]
    out = num / den
    if out < 0.0:
        out = 0.0
    elif out > cmd_max:
        out = cmd_max
    return out


@njit(cache=True)
def k_q_of_selection(phi, a_idx, q):
    num = 0.0
    den = 0.0
    for i in range(len(phi)):
        num += q[i, a_idx[i]] * phi[i]
        den += phi[i]
    return num / den


@njit(cache=True)
def k_state_value(phi, q):
    n = q.shape[1]
    num = 0.0
    den = 0.0
    for i in range(len(phi)):
        bv = q[i, 0]
        for j in range(1, n):
            if q[i, j] > bv:
                bv = q[i, j]
        num += bv * phi[i]
        den += phi[i]
    return num / den


@njit(cache=True)
def k_td_update(q, phi, a_idx, r, phi_next, terminal, alpha, gamma):
    """TD(0) toward r + gamma*V(next); only fired rules move."""
    if terminal:
        target = r
    else:
        target = r + gamma * k_state_value(phi_next, q)
    delta = target - k_q_of_selection(phi, a_idx, q)
    den = 0.0
    for i in range(len(phi)):
        den += phi[i]
    for i in range(len(phi)):
        if phi[i] > 0.0:
            q[i, a_idx[i]] += alpha * delta * phi[i] / den
    return delta


# ------------------------------------------------------------------- episode

@njit(cache=True)
def k_run_episode(q, rng_state, eps, alpha, gamma, do_update, greedy, invert,
                  p_series, v_series, n_steps, soc0,
                  p_typ, s_typ, u_levels, mp,
                  log_pfc, log_pbat, log_ibat, log_soc, log_mdot,
                  log_reward, log_start):
    """One full episode over a derived cycle.

    Selection, composition, plant step and TD update in strict order.  Log
    arrays (length >= n_steps) receive per-step records; aggregates come back
    as a tuple (steps, j_sum, h2_g, n_start, soc_final, boundary_exit,
    bat_sat, fc_sat, dist_m).
    """
    m = len(p_typ) * len(s_typ)
    phi = np.zeros(m)
    phi_next = np.zeros(m)
    a_idx = np.zeros(m, dtype=np.int64)

    soc = soc0
    fc_on = False
    n_start = 0
    h2_g = 0.0
    j_sum = 0.0
    dist_m = 0.0
    bat_sat_n = 0
    fc_sat_n = 0
    boundary_exit = 0
    steps = 0

    k_fuzzify(p_series[0], soc, p_typ, s_typ, phi)
    for k in range(n_steps):
        if greedy:
            k_greedy_actions(q, a_idx)
        else:
            k_select_actions(q, eps, invert, rng_state, a_idx)
        cmd = k_compose(a_idx, phi, u_levels, mp.cmd_max)

        (soc_new, p_bat_cmd, _p_bat_term, i_bat, mdot, reward,
         start_event, bat_sat, fc_sat, boundary) = k_step_physics(
            p_series[k], cmd, soc, fc_on, mp)

        n_start += start_event
        bat_sat_n += bat_sat
        fc_sat_n += fc_sat
        terminal = boundary == 1 or k == n_steps - 1
        if terminal and not mp.per_event:
            reward -= mp.k_start * n_start

        log_pfc[k] = cmd
        log_pbat[k] = p_bat_cmd
        log_ibat[k] = i_bat
        log_soc[k] = soc_new
        log_mdot[k] = mdot
        log_reward[k] = reward
        log_start[k] = start_event

        h2_g += mdot * mp.dt
        j_sum += reward * mp.dt
        dist_m += v_series[k] * mp.dt
        steps = k + 1

        k_fuzzify(p_series[k + 1], soc_new, p_typ, s_typ, phi_next)
        if do_update:
            k_td_update(q, phi, a_idx, reward, phi_next, terminal,
                        alpha, gamma)

        soc = soc_new
        fc_on = cmd >= mp.start_thr
        if boundary == 1:
            boundary_exit = 1
            break
        tmp = phi
        phi = phi_next
        phi_next = tmp

    return (steps, j_sum, h2_g, n_start, soc, boundary_exit,
            bat_sat_n, fc_sat_n, dist_m)
