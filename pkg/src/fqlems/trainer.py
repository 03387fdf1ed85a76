"""Training loop, epsilon schedule, greedy evaluation, metrics export."""
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .cycle import DriveCycle, derive_power, resolve_cycle
from .env import EnvConfig, pack_model
from .fql import Agent, AgentConfig, new_agent
from .powertrain import PowertrainModel
from .rng import SplitMix64


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 1000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.001
    seed: int = 433
    cycle: str = "udds"
    literal_epsilon: bool = False
    agent: AgentConfig = AgentConfig()
    env: EnvConfig = EnvConfig()

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")


@dataclass(frozen=True)
class EpisodeMetrics:
    episode: int
    epsilon: float
    avg_reward: float
    h2_g_per_100km: float
    final_soc: float
    n_start: int
    steps: int
    boundary_exit: bool


@dataclass(frozen=True)
class EvalReport:
    cycle: str
    initial_soc: float
    repetitions: tuple
    # per-step arrays of the first repetition, for trajectory export
    first_log: dict = field(repr=False, default=None)
    first_steps: int = 0


def epsilon_schedule(episode: int, cfg: TrainConfig) -> float:
    """Exponential decay from epsilon_start to epsilon_end over the run."""
    if not 0 <= episode < cfg.episodes:
        raise ValueError(f"episode {episode} outside [0, {cfg.episodes})")
    if cfg.episodes == 1 or cfg.epsilon_start == cfg.epsilon_end:
        return cfg.epsilon_start
    d = (cfg.epsilon_end / cfg.epsilon_start) ** (1.0 / (cfg.episodes - 1))
    return cfg.epsilon_start * d ** episode


def _episode_logs(n_steps: int) -> dict:
    return {name: np.zeros(n_steps) for name in
            ("pfc", "pbat", "ibat", "soc", "mdot", "reward", "start")}


def _metrics_from_run(episode, eps, steps, j_sum, h2_g, n_start, soc_final,
                      boundary_exit, dist_m) -> EpisodeMetrics:
    avg_reward = j_sum / steps if steps else 0.0
    h2_rate = 1e5 * h2_g / dist_m if dist_m > 0 else float("nan")
    return EpisodeMetrics(
        episode=episode, epsilon=eps, avg_reward=avg_reward,
        h2_g_per_100km=h2_rate, final_soc=soc_final, n_start=int(n_start),
        steps=int(steps), boundary_exit=bool(boundary_exit))


def _prepared_cycle(cfg: TrainConfig, model: PowertrainModel,
                    cyc: DriveCycle = None) -> DriveCycle:
    if cyc is None:
        cyc = resolve_cycle(cfg.cycle)
    if cyc.p_veh_w is None:
        cyc = derive_power(cyc, model.vehicle)
    return cyc


def train(cfg: TrainConfig, model: PowertrainModel = None,
          cyc: DriveCycle = None, progress=None) -> tuple:
    """Run the full schedule; returns (Agent, list of EpisodeMetrics).

    One seeded stream covers q-array initialization and every selection
    draw, so (seed, config, cycle) pin the result bitwise.
    """
    if model is None:
        model = PowertrainModel.build()
    cyc = _prepared_cycle(cfg, model, cyc)
    rng = SplitMix64(cfg.seed)
    agent_cfg = replace(cfg.agent, rng_seed=cfg.seed)
    agent = new_agent(agent_cfg, rng=rng)
    mp = pack_model(model, cfg.env, cyc.dt)
    n_steps = len(cyc) - 1
    logs = _episode_logs(n_steps)
    p_typ = agent.grid.pveh.typicals
    s_typ = agent.grid.soc.typicals
    levels = agent.actions.levels_w

    metrics = []
    for e in range(cfg.episodes):
        eps = epsilon_schedule(e, cfg)
        (steps, j_sum, h2_g, n_start, soc_final, boundary_exit,
         _bat_sat, _fc_sat, dist_m) = kernels.k_run_episode(
            agent.q, rng.state, eps, agent_cfg.alpha, agent_cfg.gamma,
            True, False, cfg.literal_epsilon,
            cyc.p_veh_w, cyc.v_mps, n_steps, cfg.env.initial_soc,
            p_typ, s_typ, levels, mp,
            logs["pfc"], logs["pbat"], logs["ibat"], logs["soc"],
            logs["mdot"], logs["reward"], logs["start"])
        m = _metrics_from_run(e, eps, steps, j_sum, h2_g, n_start,
                              soc_final, boundary_exit, dist_m)
        metrics.append(m)
        if progress is not None:
            progress(m)
    return agent, metrics


def evaluate(agent: Agent, cyc: DriveCycle = None, initial_soc: float = 0.5,
             repetitions: int = 10, model: PowertrainModel = None,
             env_cfg: EnvConfig = None, cycle_name: str = "udds"
             ) -> EvalReport:
    """Greedy policy over consecutive cycle repetitions with SOC carried over.

    No exploration and no rng draws; a boundary exit marks that repetition
    failed and the chain continues from the clamped SOC.
    """
    if model is None:
        model = PowertrainModel.build()
    if env_cfg is None:
        env_cfg = EnvConfig()
    # validates the requested start against the configured bounds
    env_cfg = replace(env_cfg, initial_soc=initial_soc)
    if cyc is None:
        cyc = resolve_cycle(cycle_name)
    if cyc.p_veh_w is None:
        cyc = derive_power(cyc, model.vehicle)
    mp = pack_model(model, env_cfg, cyc.dt)
    n_steps = len(cyc) - 1
    rng_state = SplitMix64(0).state     # untouched by greedy runs
    p_typ = agent.grid.pveh.typicals
    s_typ = agent.grid.soc.typicals
    levels = agent.actions.levels_w

    reps = []
    first_log, first_steps = None, 0
    soc = initial_soc
    for r in range(1, repetitions + 1):
        logs = _episode_logs(n_steps)
        (steps, j_sum, h2_g, n_start, soc_final, boundary_exit,
         _bat_sat, _fc_sat, dist_m) = kernels.k_run_episode(
            agent.q, rng_state, 0.0, agent.config.alpha, agent.config.gamma,
            False, True, False,
            cyc.p_veh_w, cyc.v_mps, n_steps, soc,
            p_typ, s_typ, levels, mp,
            logs["pfc"], logs["pbat"], logs["ibat"], logs["soc"],
            logs["mdot"], logs["reward"], logs["start"])
        reps.append(_metrics_from_run(r, 0.0, steps, j_sum, h2_g, n_start,
                                      soc_final, boundary_exit, dist_m))
        if r == 1:
            first_log, first_steps = logs, int(steps)
        soc = soc_final
    return EvalReport(cycle=cyc.name, initial_soc=initial_soc,
                      repetitions=tuple(reps), first_log=first_log,
                      first_steps=first_steps)


# ----------------------------------------------------------------- export

CURVE_HEADER = "episode,epsilon,avg_reward,h2_g_per_100km,final_soc,n_start,steps"


def write_training_curve(path, metrics):
    with open(path, "w", newline="") as fh:
        fh.write(CURVE_HEADER + "\n")
        for m in metrics:
            fh.write(f"{m.episode},{m.epsilon:.9g},{m.avg_reward:.9g},"
                     f"{m.h2_g_per_100km:.9g},{m.final_soc:.9g},"
                     f"{m.n_start},{m.steps}\n")


def eval_report_dict(report: EvalReport) -> dict:
    # a repetition that exits with ~zero distance has no meaningful per-100km
    # rate; null keeps the JSON strict rather than leaking NaN
    def _finite(x):
        return x if math.isfinite(x) else None

    return {
        "cycle": report.cycle,
        "initial_soc": report.initial_soc,
        "repetitions": [
            {"repetition": m.episode, "avg_reward": m.avg_reward,
             "h2_g_per_100km": _finite(m.h2_g_per_100km),
             "final_soc": m.final_soc,
             "n_start": m.n_start, "steps": m.steps,
             "completed": not m.boundary_exit}
            for m in report.repetitions
        ],
    }


def save_eval_report(path, report: EvalReport):
    with open(path, "w") as fh:
        json.dump(eval_report_dict(report), fh, indent=2, allow_nan=False)
        fh.write("\n")
