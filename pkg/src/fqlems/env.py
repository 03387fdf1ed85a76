"""Markov-decision-process environment over one drive cycle.

A cycle of K samples gives K-1 decision steps; step k serves demand
P_veh[k] and observes (P_veh[k+1], SOC') next.  Physics per step lives in
kernels.k_step_physics so the interactive environment and the compiled
training loop cannot drift apart.
"""
import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .cycle import DriveCycle
from .powertrain import PowertrainModel

HYDROGEN_MODES = ("stack", "paper_literal")
PENALTY_MODES = ("per_event", "terminal_lump")


@dataclass(frozen=True)
class EnvConfig:
    soc_ref: float = 0.5
    soc_penalty_weight: float = 200.0
    start_penalty_weight: float = 0.2
    start_threshold_w: float = 500.0
    soc_bounds: tuple = (0.0, 1.0)
    initial_soc: float = 0.5
    hydrogen_mode: str = "stack"
    penalty_mode: str = "per_event"

    def __post_init__(self):
        lo, hi = self.soc_bounds
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError("soc_bounds must be ordered within [0, 1]")
        if not lo <= self.initial_soc <= hi:
            raise ValueError(
                f"initial_soc {self.initial_soc} outside bounds {self.soc_bounds}")
        if self.soc_penalty_weight < 0 or self.start_penalty_weight < 0:
            raise ValueError("penalty weights must be non-negative")
        if self.hydrogen_mode not in HYDROGEN_MODES:
            raise ValueError(f"hydrogen_mode must be one of {HYDROGEN_MODES}")
        if self.penalty_mode not in PENALTY_MODES:
            raise ValueError(f"penalty_mode must be one of {PENALTY_MODES}")


def pack_model(model: PowertrainModel, cfg: EnvConfig,
               dt: float) -> kernels.ModelPack:
    """Flatten model + environment parameters for the step kernels."""
    fc = model.fc
    bat = model.battery
    h2_per_amp = fc.m_h2 / (fc.n_electrons * fc.faraday)
    if cfg.hydrogen_mode == "stack":
        h2_per_amp *= fc.n_cell
    return kernels.ModelPack(
        e_sum=fc.e0 + fc.nernst_offset,
        act_c=fc.act_coeff,
        conc_c=fc.conc_coeff,
        i0=fc.i0,
        i_loss=fc.i_loss,
        i_lim=fc.i_lim,
        r_ohm=fc.r_ohm,
        n_cell=float(fc.n_cell),
        a_fc=fc.a_fc,
        i_peak=float(model.i_peak),
        p_peak=float(model.p_peak),
        h2_per_amp=h2_per_amp,
        eta_dc=fc.dcdc_eff,
        aux_w=fc.aux_current * fc.bus_voltage_nominal,
        cmd_max=fc.p_fc_max,
        q_bat=bat.capacity_as,
        eta_bdc=bat.dcdc_eff,
        soc_grid=np.asarray(bat.soc_grid, dtype=float),
        voc_tab=np.asarray(bat.voc_v, dtype=float),
        rbat_tab=np.asarray(bat.rbat_ohm, dtype=float),
        dt=float(dt),
        soc_ref=cfg.soc_ref,
        k_bat=cfg.soc_penalty_weight,
        k_start=cfg.start_penalty_weight,
        start_thr=cfg.start_threshold_w,
        soc_lo=cfg.soc_bounds[0],
        soc_hi=cfg.soc_bounds[1],
        per_event=cfg.penalty_mode == "per_event",
    )


@dataclass
class EnvState:
    k: int = 0
    soc: float = 0.5
    fc_on: bool = False
    n_start: int = 0
    h2_g: float = 0.0
    j_sum: float = 0.0
    bat_sat: int = 0
    fc_sat: int = 0
    terminal: bool = False


@dataclass(frozen=True)
class StepResult:
    obs: tuple
    reward: float
    terminal: bool
    i_bat_a: float
    mdot_gps: float
    p_bat_w: float
    start_event: bool
    bat_saturated: bool
    fc_saturated: bool
    boundary_exit: bool


class Env:
    """Stepwise interface: reset to the cycle start, step with FC commands."""

    def __init__(self, cyc: DriveCycle, cfg: EnvConfig,
                 model: PowertrainModel):
        if cyc.p_veh_w is None:
            raise ValueError("cycle needs derive_power first")
        self.cycle = cyc
        self.cfg = cfg
        self.model = model
        self.pack = pack_model(model, cfg, cyc.dt)
        self.n_steps = len(cyc) - 1

    def reset(self) -> tuple:
        st = EnvState(k=0, soc=self.cfg.initial_soc)
        obs = (float(self.cycle.p_veh_w[0]), st.soc)
        return st, obs

    def step(self, st: EnvState, p_fc_cmd: float) -> tuple:
        if st.terminal:
            raise RuntimeError("episode already terminal; reset first")
        cmd = min(max(float(p_fc_cmd), 0.0), self.model.fc.p_fc_max)
        mp = self.pack
        (soc_new, p_bat_cmd, _p_term, i_bat, mdot, reward, start_event,
         bat_sat, fc_sat, boundary) = kernels.k_step_physics(
            float(self.cycle.p_veh_w[st.k]), cmd, st.soc, st.fc_on, mp)

        n_start = st.n_start + start_event
        terminal = boundary == 1 or st.k == self.n_steps - 1
        if terminal and not mp.per_event:
            reward -= mp.k_start * n_start

        new = EnvState(
            k=st.k + 1,
            soc=soc_new,
            fc_on=cmd >= mp.start_thr,
            n_start=n_start,
            h2_g=st.h2_g + mdot * mp.dt,
            j_sum=st.j_sum + reward * mp.dt,
            bat_sat=st.bat_sat + bat_sat,
            fc_sat=st.fc_sat + fc_sat,
            terminal=terminal,
        )
        obs = (float(self.cycle.p_veh_w[new.k]), soc_new)
        result = StepResult(
            obs=obs, reward=reward, terminal=terminal, i_bat_a=i_bat,
            mdot_gps=mdot, p_bat_w=p_bat_cmd,
            start_event=bool(start_event), bat_saturated=bool(bat_sat),
            fc_saturated=bool(fc_sat), boundary_exit=bool(boundary))
        return new, result


def episode_return(rewards, dt: float = 1.0) -> float:
    """J over one episode; logged rewards already carry the start penalties."""
    return float(np.sum(np.asarray(rewards, dtype=float))) * dt


TRAJECTORY_HEADER = ("k,t_s,v_mps,p_veh_w,p_fc_w,p_bat_w,i_bat_a,soc,"
                     "mdot_gps,reward,start_event")


def write_trajectory(path, cyc: DriveCycle, steps: int, log: dict):
    """Per-step CSV from episode log arrays (keys pfc, pbat, ibat, soc,
    mdot, reward, start)."""
    with open(path, "w", newline="") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        w = csv.writer(fh)
        for k in range(steps):
            w.writerow([
                k, k * cyc.dt, f"{cyc.v_mps[k]:.4f}",
                f"{cyc.p_veh_w[k]:.3f}", f"{log['pfc'][k]:.3f}",
                f"{log['pbat'][k]:.3f}", f"{log['ibat'][k]:.4f}",
                f"{log['soc'][k]:.6f}", f"{log['mdot'][k]:.6e}",
                f"{log['reward'][k]:.6e}", int(log['start'][k]),
            ])
