"""Flat key=value run configuration shared by every CLI command."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .env import EnvConfig
from .fql import AgentConfig
from .powertrain import (
    BatteryParams,
    FuelCellParams,
    PowertrainModel,
    VehicleParams,
    load_battery_csv,
)
from .trainer import TrainConfig

SEED_ENV_VAR = "FQL_EMS_SEED"


class ConfigError(ValueError):
    """Unknown key, malformed line, or a value the target field rejects."""


def _f(s):
    return float(s)


def _i(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"expected integer, got {s!r}")
    return int(v)


def _b(s):
    t = s.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected boolean, got {s!r}")


def _s(s):
    return s.strip()


def _fl(s):
    vals = tuple(float(tok) for tok in s.split(","))
    if not vals:
        raise ValueError("empty list")
    return vals


# key -> (section, field, parser).  Section "battery_table" keys replace the
# interpolation tables wholesale; everything else maps onto one dataclass field.
KEY_REGISTRY = {
    "vehicle.mass": ("vehicle", "mass", _f),
    "vehicle.frontal_area": ("vehicle", "frontal_area", _f),
    "vehicle.air_density": ("vehicle", "air_density", _f),
    "vehicle.drag_coeff": ("vehicle", "drag_coeff", _f),
    "vehicle.rolling_coeff": ("vehicle", "rolling_coeff", _f),
    "vehicle.driveline_eff": ("vehicle", "driveline_eff", _f),
    "vehicle.gravity": ("vehicle", "gravity", _f),
    "vehicle.slope": ("vehicle", "slope", _f),
    "fc.n_cell": ("fc", "n_cell", _i),
    "fc.a_fc": ("fc", "a_fc", _f),
    "fc.e0": ("fc", "e0", _f),
    "fc.temperature": ("fc", "temperature", _f),
    "fc.transfer_coeff": ("fc", "transfer_coeff", _f),
    "fc.i_loss": ("fc", "i_loss", _f),
    "fc.i0": ("fc", "i0", _f),
    "fc.i_lim": ("fc", "i_lim", _f),
    "fc.r_ohm": ("fc", "r_ohm", _f),
    "fc.nernst_offset": ("fc", "nernst_offset", _f),
    "fc.dcdc_eff": ("fc", "dcdc_eff", _f),
    "fc.aux_current": ("fc", "aux_current", _f),
    "fc.bus_voltage_nominal": ("fc", "bus_voltage_nominal", _f),
    "fc.p_fc_max": ("fc", "p_fc_max", _f),
    "battery.capacity_as": ("battery", "capacity_as", _f),
    "battery.dcdc_eff": ("battery", "dcdc_eff", _f),
    "battery.nominal_voltage": ("battery", "nominal_voltage", _f),
    "battery.soc_grid": ("battery_table", "soc_grid", _fl),
    "battery.voc_v": ("battery_table", "voc_v", _fl),
    "battery.rbat_ohm": ("battery_table", "rbat_ohm", _fl),
    "battery.table_csv": ("battery_table", "table_csv", _s),
    "env.soc_ref": ("env", "soc_ref", _f),
    "env.soc_penalty_weight": ("env", "soc_penalty_weight", _f),
    "env.start_penalty_weight": ("env", "start_penalty_weight", _f),
    "env.start_threshold_w": ("env", "start_threshold_w", _f),
    "env.soc_min": ("env_bounds", "soc_min", _f),
    "env.soc_max": ("env_bounds", "soc_max", _f),
    "env.initial_soc": ("env", "initial_soc", _f),
    "env.hydrogen_mode": ("env", "hydrogen_mode", _s),
    "env.penalty_mode": ("env", "penalty_mode", _s),
    "agent.alpha": ("agent", "alpha", _f),
    "agent.gamma": ("agent", "gamma", _f),
    "agent.q_init_low": ("agent", "q_init_low", _f),
    "agent.q_init_high": ("agent", "q_init_high", _f),
    "train.episodes": ("train", "episodes", _i),
    "train.epsilon_start": ("train", "epsilon_start", _f),
    "train.epsilon_end": ("train", "epsilon_end", _f),
    "train.seed": ("train", "seed", _i),
    "train.cycle": ("train", "cycle", _s),
    "train.cycle_units": ("train", "cycle_units", _s),
    "train.literal_epsilon": ("train", "literal_epsilon", _b),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one command invocation."""

    vehicle: VehicleParams
    fc: FuelCellParams
    battery: BatteryParams
    train: TrainConfig
    cycle_units: str = "mps"

    @property
    def env(self) -> EnvConfig:
        return self.train.env

    @property
    def agent(self) -> AgentConfig:
        return self.train.agent

    def build_model(self, calibrate=True) -> PowertrainModel:
        return PowertrainModel.build(
            vehicle=self.vehicle,
            fc=self.fc,
            battery=self.battery,
            calibrate=calibrate,
        )


def parse_config_text(text, source="<config>"):
    """Parse flat key = value lines into {key: raw_string}.

    '#' starts a comment; blank lines are skipped; keys must be registered.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = body.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in KEY_REGISTRY:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def _typed(raw):
    """Convert raw strings through each key's parser, grouped by section."""
    out: dict = {}
    for key, value in raw.items():
        section, field, cast = KEY_REGISTRY[key]
        try:
            out.setdefault(section, {})[field] = cast(value)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: {exc}") from exc
    return out


def build_run_config(file_path=None, overrides=None) -> RunConfig:
    """Defaults <- config file <- overrides, then materialize dataclasses.

    `overrides` uses the same registered key names (CLI flags map onto them).
    The FQL_EMS_SEED environment variable supplies train.seed when neither
    the file nor the overrides set it.
    """
    raw = {}
    if file_path is not None:
        raw.update(load_config_file(file_path))
    if overrides:
        for key, value in overrides.items():
            if key not in KEY_REGISTRY:
                raise ConfigError(f"unknown override key {key!r}")
            raw[key] = str(value)
    if "train.seed" not in raw and SEED_ENV_VAR in os.environ:
        raw["train.seed"] = os.environ[SEED_ENV_VAR]

    sect = _typed(raw)
    try:
        vehicle = VehicleParams(**sect.get("vehicle", {}))
        fc = FuelCellParams(**sect.get("fc", {}))
        battery = _build_battery(sect.get("battery", {}), sect.get("battery_table", {}))
        env = _build_env(sect.get("env", {}), sect.get("env_bounds", {}))
        agent = AgentConfig(**sect.get("agent", {}))
        train_kwargs = sect.get("train", {})
        cycle_units = train_kwargs.pop("cycle_units", "mps")
        if cycle_units not in ("mps", "kmh"):
            raise ConfigError(f"train.cycle_units must be mps or kmh, got {cycle_units!r}")
        train = TrainConfig(agent=agent, env=env, **train_kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(vehicle=vehicle, fc=fc, battery=battery, train=train, cycle_units=cycle_units)


def _build_battery(scalars, table):
    table = dict(table)
    csv_path = table.pop("table_csv", None)
    if csv_path is not None and table:
        raise ConfigError("battery.table_csv excludes inline battery.soc_grid/voc_v/rbat_ohm")
    if csv_path is not None:
        base = load_battery_csv(csv_path)
        return replace(base, **scalars) if scalars else base
    return BatteryParams(**scalars, **table)


def _build_env(fields, bounds):
    if bounds:
        lo = bounds.get("soc_min", EnvConfig.soc_bounds[0])
        hi = bounds.get("soc_max", EnvConfig.soc_bounds[1])
        fields = dict(fields, soc_bounds=(lo, hi))
    return EnvConfig(**fields)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, np.ndarray)):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolved_text(rc: RunConfig) -> str:
    """Render every registered key at its final value.

    Battery tables are written inline, so the snapshot reproduces the run
    even if an original table_csv file later changes.
    """
    v, fc, bat = rc.vehicle, rc.fc, rc.battery
    env, agent, train = rc.env, rc.agent, rc.train
    lines = ["# resolved run configuration"]
    for key, (section, field, _) in KEY_REGISTRY.items():
        if section == "vehicle":
            value = getattr(v, field)
        elif section == "fc":
            value = getattr(fc, field)
        elif section == "battery":
            value = getattr(bat, field)
        elif section == "battery_table":
            if field == "table_csv":
                continue
            value = getattr(bat, field)
        elif section == "env":
            value = getattr(env, field)
        elif section == "env_bounds":
            value = env.soc_bounds[0] if field == "soc_min" else env.soc_bounds[1]
        elif section == "agent":
            value = getattr(agent, field)
        else:
            value = rc.cycle_units if field == "cycle_units" else getattr(train, field)
        lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def write_resolved(rc: RunConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(resolved_text(rc))
