"""Fuzzy Q-learning agent: per-rule selection, composition, TD(0) update."""
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .fis import (ActionSet, DegenerateFiringError, RuleGrid,
                  default_action_set, default_rule_grid, partition_from_json,
                  partition_to_json)
from .rng import SplitMix64


class AgentShapeError(ValueError):
    """Loaded q-array does not match the configured rule grid."""


@dataclass(frozen=True)
class AgentConfig:
    alpha: float = 0.005            # learning rate
    gamma: float = 0.999            # discount
    rng_seed: int = 1
    # fresh q entries drawn uniform [q_init_low, q_init_high]; pessimistic
    # defaults sit below the converged state values, which keeps stale
    # entries from popping up as spurious argmaxes late in training
    q_init_low: float = -100.1
    q_init_high: float = -100.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if self.q_init_low > self.q_init_high:
            raise ValueError("q_init_low must not exceed q_init_high")


@dataclass
class Agent:
    """q-array plus everything needed to interpret it."""
    q: np.ndarray
    grid: RuleGrid
    actions: ActionSet
    config: AgentConfig


def new_agent(config: AgentConfig = None, grid: RuleGrid = None,
              actions: ActionSet = None, rng: SplitMix64 = None) -> Agent:
    """Fresh agent with the q-array drawn from the seeded generator.

    Row-major draw order; entries land in [q_init_low, q_init_high].
    Passing `rng` lets a caller keep initialization and later selection on
    one stream.
    """
    config = config if config is not None else AgentConfig()
    grid = grid if grid is not None else default_rule_grid()
    actions = actions if actions is not None else default_action_set()
    if rng is None:
        rng = SplitMix64(config.rng_seed)
    m, n = grid.m, len(actions)
    span = config.q_init_high - config.q_init_low
    q = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            q[i, j] = config.q_init_high - span * rng.uniform()
    return Agent(q, grid, actions, config)


def _check_phi(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.sum() <= 0.0:
        raise DegenerateFiringError("all firing strengths are zero")
    return phi


def greedy_actions(phi, q: np.ndarray) -> np.ndarray:
    """Per-rule argmax of q; ties go to the lowest action index."""
    a = np.zeros(q.shape[0], dtype=np.int64)
    kernels.k_greedy_actions(q, a)
    return a


def select_actions(phi, q: np.ndarray, eps: float, rng: SplitMix64,
                   literal: bool = False) -> np.ndarray:
    """Epsilon-greedy per rule.

    Each rule consumes one uniform draw for the explore decision and a second
    when exploring, in rule order, so the stream position is reproducible.
    `literal` flips to the published comparison (explore on draw > eps).
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must be in [0, 1]")
    a = np.zeros(q.shape[0], dtype=np.int64)
    kernels.k_select_actions(q, eps, literal, rng.state, a)
    return a


def compose_action(a, phi, actions: ActionSet,
                   cmd_max: float = 100e3) -> float:
    """Crisp command: firing-weighted mean of the chosen levels, clamped."""
    phi = _check_phi(phi)
    a = np.asarray(a, dtype=np.int64)
    return kernels.k_compose(a, phi, actions.levels_w, cmd_max)


def q_of_selection(phi, a, q: np.ndarray) -> float:
    phi = _check_phi(phi)
    a = np.asarray(a, dtype=np.int64)
    return kernels.k_q_of_selection(phi, a, q)


def state_value(phi_next, q: np.ndarray) -> float:
    """Firing-weighted mean of per-rule maxima."""
    phi_next = _check_phi(phi_next)
    return kernels.k_state_value(phi_next, q)


def td_update(q: np.ndarray, phi, a, r: float, phi_next, terminal: bool,
              cfg: AgentConfig) -> np.ndarray:
    """In-place TD(0) step toward r + gamma * V(phi_next); returns q."""
    phi = _check_phi(phi)
    phi_next = np.asarray(phi_next, dtype=float)
    a = np.asarray(a, dtype=np.int64)
    kernels.k_td_update(q, phi, a, float(r), phi_next, terminal,
                        cfg.alpha, cfg.gamma)
    return q


# ------------------------------------------------------------- persistence

def save_agent(path, agent: Agent):
    """Write the agent as JSON; float repr round-trips bit-exactly."""
    m, n = agent.q.shape
    doc = {
        "m": m,
        "n": n,
        "alpha": agent.config.alpha,
        "gamma": agent.config.gamma,
        "seed": agent.config.rng_seed,
        "q": [[float(x) for x in row] for row in agent.q],
        "partitions": {
            "p_veh": partition_to_json(agent.grid.pveh),
            "soc": partition_to_json(agent.grid.soc),
        },
        "action_set": [float(x) for x in agent.actions.levels_w],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_agent(path, grid: RuleGrid = None) -> Agent:
    """Rebuild an agent from JSON; `grid` (when given) must match its shape."""
    with open(path) as fh:
        doc = json.load(fh)
    q = np.array(doc["q"], dtype=float)
    if q.shape != (doc["m"], doc["n"]):
        raise AgentShapeError(
            f"q-array {q.shape} disagrees with header ({doc['m']}, {doc['n']})")
    file_grid = RuleGrid(partition_from_json(doc["partitions"]["p_veh"]),
                         partition_from_json(doc["partitions"]["soc"]))
    if grid is not None and (grid.m != doc["m"]):
        raise AgentShapeError(
            f"file has {doc['m']} rules, configured grid has {grid.m}")
    actions = ActionSet(np.array(doc["action_set"], dtype=float))
    if len(actions) != doc["n"]:
        raise AgentShapeError(
            f"file has {doc['n']} actions, action_set lists {len(actions)}")
    cfg = AgentConfig(alpha=doc["alpha"], gamma=doc["gamma"],
                      rng_seed=doc["seed"])
    return Agent(q, file_grid, actions, cfg)
