"""Fuzzy state interface: triangular partitions, rule grid, defuzzifier.

Memberships are neighbor-anchored triangles with saturating shoulders, so
each dimension is a partition of unity and the product grid sums to one.
"""
import json
from dataclasses import dataclass

import numpy as np

from . import kernels


class DegenerateFiringError(ValueError):
    """No rule fired; the weighted average is undefined."""


@dataclass(frozen=True)
class FuzzySet:
    label: str
    typical: float


@dataclass(frozen=True)
class FuzzyPartition:
    dimension: str
    sets: tuple

    def __post_init__(self):
        if len(self.sets) < 2:
            raise ValueError("partition needs at least two sets")
        labels = [s.label for s in self.sets]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in {self.dimension}")
        typ = np.array([s.typical for s in self.sets], dtype=float)
        if np.any(np.diff(typ) <= 0):
            raise ValueError(
                f"typical values must be strictly increasing in {self.dimension}")
        typ.setflags(write=False)
        object.__setattr__(self, "_typicals", typ)

    @property
    def typicals(self) -> np.ndarray:
        return self._typicals

    @property
    def labels(self) -> list:
        return [s.label for s in self.sets]

    def __len__(self):
        return len(self.sets)

    def clamp(self, x: float) -> float:
        t = self._typicals
        return min(max(x, t[0]), t[-1])


def membership(x: float, set_index: int, p: FuzzyPartition) -> float:
    """Degree of x in one set: triangular, shoulders saturating outward."""
    if not 0 <= set_index < len(p):
        raise IndexError(f"set index {set_index} outside partition")
    j, w = kernels.k_locate(float(x), p.typicals)
    if set_index == j:
        return 1.0 - w
    if set_index == j + 1:
        return w
    return 0.0


def partition(dimension: str, labels, typicals) -> FuzzyPartition:
    if len(labels) != len(typicals):
        raise ValueError("labels and typicals must pair up")
    return FuzzyPartition(dimension, tuple(
        FuzzySet(l, float(t)) for l, t in zip(labels, typicals)))


# power demand in W, seven sets spanning regeneration to full traction
def default_power_partition() -> FuzzyPartition:
    return partition(
        "p_veh_w",
        ["NH", "NM", "NL", "ZE", "PL", "PM", "PH"],
        [-50e3, -20e3, -10e3, 0.0, 10e3, 20e3, 50e3])


def default_soc_partition() -> FuzzyPartition:
    return partition(
        "soc",
        ["VL", "L", "M", "H", "VH"],
        [0.2, 0.4, 0.5, 0.6, 0.8])


@dataclass(frozen=True)
class ActionSet:
    """Crisp fuel-cell command levels shared by every rule."""
    levels_w: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels_w, dtype=float)
        if len(lv) < 2 or np.any(np.diff(lv) <= 0):
            raise ValueError("action levels must be strictly increasing")
        lv.setflags(write=False)
        object.__setattr__(self, "levels_w", lv)

    def __len__(self):
        return len(self.levels_w)


def default_action_set() -> ActionSet:
    return ActionSet(np.array(
        [0.0, 1e3, 2e3, 5e3, 10e3, 20e3, 50e3, 100e3]))


@dataclass(frozen=True)
class RuleGrid:
    """Product rule base over (power demand, SOC), row-major in power."""
    pveh: FuzzyPartition
    soc: FuzzyPartition

    @property
    def m(self) -> int:
        return len(self.pveh) * len(self.soc)

    def rule_index(self, i_pveh: int, i_soc: int) -> int:
        return i_pveh * len(self.soc) + i_soc

    def rule_coords(self, rule: int) -> tuple:
        return divmod(rule, len(self.soc))


def default_rule_grid() -> RuleGrid:
    return RuleGrid(default_power_partition(), default_soc_partition())


def fuzzify(s: tuple, g: RuleGrid) -> np.ndarray:
    """Firing strengths for state s = (P_veh, SOC); at most four nonzero."""
    p_veh, soc = s
    phi = np.zeros(g.m)
    kernels.k_fuzzify(float(p_veh), float(soc),
                      g.pveh.typicals, g.soc.typicals, phi)
    return phi


def defuzzify(values, phi) -> float:
    """Firing-strength weighted average of per-rule values."""
    phi = np.asarray(phi, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != phi.shape:
        raise ValueError("values and phi must have equal length")
    den = float(phi.sum())
    if den <= 0.0:
        raise DegenerateFiringError("all firing strengths are zero")
    return float(values @ phi) / den


# ----------------------------------------------------------- serialization

def partition_to_json(p: FuzzyPartition) -> dict:
    return {"dimension": p.dimension,
            "labels": p.labels,
            "typicals": [s.typical for s in p.sets]}


def partition_from_json(d: dict) -> FuzzyPartition:
    return partition(d["dimension"], d["labels"], d["typicals"])


def save_partitions(path, grid: RuleGrid):
    doc = {"p_veh": partition_to_json(grid.pveh),
           "soc": partition_to_json(grid.soc)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_partitions(path) -> RuleGrid:
    with open(path) as fh:
        doc = json.load(fh)
    return RuleGrid(partition_from_json(doc["p_veh"]),
                    partition_from_json(doc["soc"]))
