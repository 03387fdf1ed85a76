"""Drive-cycle ingestion and demanded-power precomputation.

Cycles are uniform 1 Hz velocity traces; power demand is derived once with
backward-difference acceleration and clamped to the state-space box.
"""
import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import kernels
from .powertrain import VehicleParams

# bundled fixtures and the units their files are written in
BUNDLED = {"udds": ("udds.csv", "mps"), "nedc": ("nedc.csv", "kmh")}

KMH_TO_MPS = 1.0 / 3.6


class CycleFormatError(ValueError):
    """Cycle CSV unreadable: parse, sampling, or sign trouble."""


@dataclass(frozen=True)
class DriveCycle:
    name: str
    dt: float
    v_mps: np.ndarray
    accel: np.ndarray = None
    p_veh_w: np.ndarray = None
    clip_count: int = 0

    def __post_init__(self):
        for arr in (self.v_mps, self.accel, self.p_veh_w):
            if arr is not None:
                arr.setflags(write=False)

    def __len__(self):
        return len(self.v_mps)

    @property
    def duration_s(self) -> float:
        return (len(self.v_mps) - 1) * self.dt

    @property
    def distance_km(self) -> float:
        # left-sample sum over the steps actually simulated
        return float(self.v_mps[:-1].sum()) * self.dt / 1000.0


def load_cycle(path, units: str = "mps", name: str = None) -> DriveCycle:
    """Velocity trace from CSV with header t_s,v; uniform sampling required."""
    if units not in ("mps", "kmh"):
        raise ValueError(f"units must be mps or kmh, got {units!r}")
    times, speeds = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t_s", "v"]:
            raise CycleFormatError(f"{path}: expected header t_s,v")
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                t, v = float(row[0]), float(row[1])
            except (ValueError, IndexError) as exc:
                raise CycleFormatError(
                    f"{path}:{lineno}: unparseable row {row!r}") from exc
            times.append(t)
            speeds.append(v)
    if len(times) < 2:
        raise CycleFormatError(f"{path}: need at least two samples")
    t = np.array(times)
    v = np.array(speeds)
    if np.any(v < 0):
        raise CycleFormatError(f"{path}: negative velocity sample")
    steps = np.diff(t)
    dt = steps[0]
    if dt <= 0 or np.any(np.abs(steps - dt) > 1e-6):
        raise CycleFormatError(f"{path}: sampling not uniform")
    if units == "kmh":
        v = v * KMH_TO_MPS
    if name is None:
        name = str(path)
    return DriveCycle(name=name, dt=float(dt), v_mps=v)


def resolve_cycle(name_or_path, units: str = None) -> DriveCycle:
    """Bundled cycle by short name, or any CSV by path.

    Bundled names carry their own unit convention; explicit `units` applies
    to paths (default mps).
    """
    key = str(name_or_path).lower()
    if key in BUNDLED:
        fname, file_units = BUNDLED[key]
        ref = resources.files("fqlems").joinpath("data").joinpath(fname)
        with resources.as_file(ref) as p:
            return load_cycle(p, units=file_units, name=key)
    return load_cycle(name_or_path, units=units or "mps")


def derive_power(c: DriveCycle, p: VehicleParams,
                 p_min: float = -50e3, p_max: float = 50e3) -> DriveCycle:
    """Attach acceleration and clamped power-demand series to a cycle."""
    v = c.v_mps
    a = np.zeros_like(v)
    a[1:] = np.diff(v) / c.dt
    power = np.empty_like(v)
    for k in range(len(v)):
        power[k] = kernels.k_traction_power(
            v[k], a[k], p.slope, p.drag_coeff, p.frontal_area, p.air_density,
            p.rolling_coeff, p.mass, p.gravity, p.driveline_eff)
    clip = int(np.sum((power < p_min) | (power > p_max)))
    power = np.clip(power, p_min, p_max)
    return DriveCycle(name=c.name, dt=c.dt, v_mps=v, accel=a,
                      p_veh_w=power, clip_count=clip)


def save_cycle(path, c: DriveCycle):
    """Write the velocity trace back out (m/s); reload reproduces it exactly."""
    with open(path, "w", newline="") as fh:
        fh.write("t_s,v\n")
        for k, v in enumerate(c.v_mps):
            fh.write(f"{float(k * c.dt)!r},{float(v)!r}\n")


def cycle_summary(c: DriveCycle) -> dict:
    if c.p_veh_w is None:
        raise ValueError("derive power before summarizing")
    return {
        "name": c.name,
        "duration_s": c.duration_s,
        "distance_km": c.distance_km,
        "p_min_w": float(c.p_veh_w.min()),
        "p_max_w": float(c.p_veh_w.max()),
    }
