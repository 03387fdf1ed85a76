"""Physical models: vehicle road load, fuel cell stack, battery, converters.

Pure functions over frozen parameter records.  Scalar math is delegated to
kernels.py so the interactive API and the compiled training loop share one
formula source.
"""
import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels


class CalibrationError(RuntimeError):
    """Anchored polarization fit missed its tolerance; carries the residuals."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or []


class InfeasiblePowerError(ValueError):
    """Demanded battery power exceeds the equivalent-circuit maximum."""


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 2500.0            # kg
    frontal_area: float = 1.8       # m^2
    air_density: float = 1.25       # kg/m^3
    drag_coeff: float = 0.3
    rolling_coeff: float = 0.01
    driveline_eff: float = 0.9      # applied divisively in traction, multiplicatively in regen
    gravity: float = 9.8            # m/s^2
    slope: float = 0.0              # rad

    def __post_init__(self):
        for name in ("mass", "frontal_area", "air_density", "drag_coeff",
                     "rolling_coeff", "gravity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.driveline_eff <= 1.0:
            raise ValueError("driveline_eff must be in (0, 1]")


@dataclass(frozen=True)
class FuelCellParams:
    n_cell: int = 370
    a_fc: float = 324.0             # active area, cm^2
    e0: float = 1.23                # reversible cell voltage, V
    gas_const: float = 8.3145       # J/(mol K)
    temperature: float = 333.15     # K
    n_electrons: float = 2.0
    faraday: float = 96485.0        # C/mol
    transfer_coeff: float = 1.0
    i_loss: float = 0.002           # crossover current density, A/cm^2
    i0: float = 3e-6                # exchange current density, A/cm^2
    i_lim: float = 1.6              # limiting current density, A/cm^2
    r_ohm: float = 0.1              # area resistance, ohm cm^2 (placeholder until calibrated)
    nernst_offset: float = 0.0      # lumped Nernst/entropy correction, V (calibrated)
    m_h2: float = 2.016             # g/mol
    hhv_volt_equiv: float = 1.48    # V
    dcdc_eff: float = 0.95
    aux_current: float = 2.0        # A, drawn whenever the stack runs
    bus_voltage_nominal: float = 244.8  # V
    p_fc_max: float = 100e3         # command ceiling, W
    calibration_residuals: tuple = None

    def __post_init__(self):
        if not 0.0 < self.i0 < self.i_lim:
            raise ValueError("need 0 < i0 < i_lim")
        if self.i_loss < 0:
            raise ValueError("i_loss must be non-negative")
        if not 0.0 < self.dcdc_eff <= 1.0:
            raise ValueError("dcdc_eff must be in (0, 1]")
        if self.n_cell <= 0 or self.a_fc <= 0 or self.p_fc_max <= 0:
            raise ValueError("n_cell, a_fc, p_fc_max must be positive")

    @property
    def act_coeff(self) -> float:
        """Activation slope R*T/(alpha*F), V."""
        return self.gas_const * self.temperature / (
            self.transfer_coeff * self.faraday)

    @property
    def conc_coeff(self) -> float:
        """Concentration slope R*T/(n*F), V."""
        return self.gas_const * self.temperature / (
            self.n_electrons * self.faraday)

    def curve_args(self) -> tuple:
        """Positional bundle for the polarization kernels."""
        return (self.e0 + self.nernst_offset, self.act_coeff, self.conc_coeff,
                self.i0, self.i_loss, self.i_lim, self.r_ohm)


def _default_soc_grid():
    return np.array([0.0, 0.2, 0.8, 1.0])


def _default_voc():
    # placeholder linear rise 230 V at SOC 0.2 to 260 V at 0.8, flat outside
    return np.array([230.0, 230.0, 260.0, 260.0])


def _default_rbat():
    return np.array([0.15, 0.15, 0.15, 0.15])


@dataclass(frozen=True)
class BatteryParams:
    capacity_as: float = 23760.0    # A*s (6.6 Ah)
    soc_grid: np.ndarray = field(default_factory=_default_soc_grid)
    voc_v: np.ndarray = field(default_factory=_default_voc)
    rbat_ohm: np.ndarray = field(default_factory=_default_rbat)
    dcdc_eff: float = 0.95
    nominal_voltage: float = 244.8

    def __post_init__(self):
        grid = np.asarray(self.soc_grid, dtype=float)
        voc = np.asarray(self.voc_v, dtype=float)
        rbat = np.asarray(self.rbat_ohm, dtype=float)
        if not (len(grid) == len(voc) == len(rbat)) or len(grid) < 2:
            raise ValueError("battery tables need matching length >= 2")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("soc_grid must be strictly ascending")
        if grid[0] > 0.0 or grid[-1] < 1.0:
            raise ValueError("soc_grid must cover [0, 1]")
        if np.any(np.diff(voc) < 0):
            raise ValueError("voc table must be non-decreasing in SOC")
        if np.any(rbat <= 0):
            raise ValueError("resistances must be positive")
        if self.capacity_as <= 0:
            raise ValueError("capacity must be positive")
        for arr, name in ((grid, "soc_grid"), (voc, "voc_v"),
                          (rbat, "rbat_ohm")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def voc_at(self, soc: float) -> float:
        return float(np.interp(soc, self.soc_grid, self.voc_v))

    def rbat_at(self, soc: float) -> float:
        return float(np.interp(soc, self.soc_grid, self.rbat_ohm))


def load_battery_csv(path) -> BatteryParams:
    """Battery tables from CSV with header soc,voc_v,rbat_ohm (SOC ascending,
    fractions).  Other parameters keep their defaults."""
    soc, voc, rbat = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["soc", "voc_v", "rbat_ohm"]:
            raise ValueError(f"{path}: expected header soc,voc_v,rbat_ohm")
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            try:
                s, v, r = (float(row[0]), float(row[1]), float(row[2]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: bad row {row!r}") from exc
            soc.append(s)
            voc.append(v)
            rbat.append(r)
    if len(soc) < 2:
        raise ValueError(f"{path}: need at least two table rows")
    return BatteryParams(soc_grid=np.array(soc), voc_v=np.array(voc),
                         rbat_ohm=np.array(rbat))


# ------------------------------------------------------------------ vehicle

def traction_power(v: float, dv_dt: float, theta: float,
                   p: VehicleParams) -> float:
    """Demanded bus power for speed v and acceleration dv_dt, W.

    Road load + grade + inertia; traction pays the driveline efficiency
    divisively, regeneration recovers only the efficient fraction.
    """
    if v < 0:
        raise ValueError("velocity must be non-negative")
    return kernels.k_traction_power(
        v, dv_dt, theta, p.drag_coeff, p.frontal_area, p.air_density,
        p.rolling_coeff, p.mass, p.gravity, p.driveline_eff)


# ---------------------------------------------------------------- fuel cell

def cell_voltage(i_fc: float, p: FuelCellParams) -> float:
    """Single-cell voltage at current density i_fc (A/cm^2)."""
    if not 0.0 <= i_fc < p.i_lim:
        raise ValueError(
            f"current density {i_fc} outside [0, i_lim={p.i_lim})")
    return kernels.k_cell_voltage(i_fc, *p.curve_args())


def stack_output(i_fc: float, p: FuelCellParams) -> tuple:
    """(V_fc, I_fc, P_fc) of the series stack at current density i_fc."""
    v_fc = p.n_cell * cell_voltage(i_fc, p)
    i_stack = p.a_fc * i_fc
    return v_fc, i_stack, v_fc * i_stack


def stack_peak(p: FuelCellParams) -> tuple:
    """(i_peak, p_peak): location and value of the stack power maximum."""
    return kernels.k_peak_scan(*p.curve_args(), float(p.n_cell), p.a_fc, 1000)


def fc_power_to_current(p_fc: float, p: FuelCellParams,
                        i_peak: float = None) -> float:
    """Current density on the ascending branch delivering stack power p_fc.

    Bisection to within 0.1 W.  Raises for targets beyond the curve maximum.
    """
    if p_fc < 0:
        raise ValueError("stack power must be non-negative")
    if i_peak is None:
        i_peak, p_peak = stack_peak(p)
    else:
        p_peak = kernels.k_stack_power(i_peak, *p.curve_args(),
                                       float(p.n_cell), p.a_fc)
    if p_fc > p_peak:
        raise ValueError(
            f"stack power {p_fc:.1f} W exceeds curve maximum {p_peak:.1f} W")
    return kernels.k_power_to_current(p_fc, *p.curve_args(),
                                      float(p.n_cell), p.a_fc, i_peak)


def hydrogen_rate(i_stack: float, p: FuelCellParams,
                  mode: str = "stack") -> float:
    """Hydrogen consumption in g/s at stack current i_stack (A).

    stack mode multiplies by n_cell (every series cell consumes); the
    paper_literal mode keeps the single-cell form.
    """
    if i_stack < 0:
        raise ValueError("stack current must be non-negative")
    if mode == "stack":
        factor = float(p.n_cell)
    elif mode == "paper_literal":
        factor = 1.0
    else:
        raise ValueError(f"unknown hydrogen mode {mode!r}")
    return factor * p.m_h2 * i_stack / (p.n_electrons * p.faraday)


def fc_gross_power(p_fc_cmd: float, p: FuelCellParams) -> float:
    """Gross stack electrical power for a net bus command, W.

    Zero command means the system is off and draws nothing; otherwise the
    DC/DC loss and the constant auxiliary load are added.
    """
    if not 0.0 <= p_fc_cmd <= p.p_fc_max:
        raise ValueError(
            f"command {p_fc_cmd} outside [0, {p.p_fc_max}]")
    if p_fc_cmd == 0.0:
        return 0.0
    return p_fc_cmd / p.dcdc_eff + p.aux_current * p.bus_voltage_nominal


def hhv_efficiency(i_fc: float, p: FuelCellParams) -> float:
    """Stack electrical efficiency on the higher-heating-value basis."""
    return cell_voltage(i_fc, p) / p.hhv_volt_equiv


# ------------------------------------------------------------------ battery

def battery_current(p_bat: float, soc: float, p: BatteryParams) -> float:
    """Terminal current for battery-side power p_bat; positive discharges."""
    if not 0.0 <= soc <= 1.0:
        raise ValueError("SOC must lie in [0, 1]")
    voc = p.voc_at(soc)
    rbat = p.rbat_at(soc)
    limit = voc * voc / (4.0 * rbat)
    if p_bat > limit:
        raise InfeasiblePowerError(
            f"battery power {p_bat:.1f} W above feasible {limit:.1f} W")
    return kernels.k_battery_current(p_bat, voc, rbat)


def battery_step(soc: float, i_bat: float, dt: float,
                 p: BatteryParams) -> tuple:
    """Coulomb-count SOC update; returns (soc', hit_boundary)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    soc_new = soc - i_bat * dt / p.capacity_as
    if soc_new <= 0.0:
        return 0.0, True
    if soc_new >= 1.0:
        return 1.0, True
    return soc_new, False


def battery_bus_power(p_bat_cmd: float, p: BatteryParams) -> float:
    """Battery-terminal power for a bus-side command through the converter."""
    if p_bat_cmd > 0.0:
        return p_bat_cmd / p.dcdc_eff
    if p_bat_cmd < 0.0:
        return p_bat_cmd * p.dcdc_eff
    return 0.0


def power_balance(p_veh: float, p_fc_cmd: float) -> float:
    """Bus-side battery command closing the demand, exactly."""
    return p_veh - p_fc_cmd


# -------------------------------------------------------------- calibration

@dataclass(frozen=True)
class PolarizationAnchors:
    """Measured extrema the stack model is fitted to."""
    p_max_w: float = 104e3          # stack power maximum
    i_at_p_max_a: float = 437.0     # stack current at the maximum
    eta_at_p_max: float = 0.4319    # HHV efficiency at the maximum
    eta_max: float = 0.5449         # best HHV efficiency
    i_at_eta_max_a: float = 63.2    # stack current at best efficiency


def _fit_given_ilim(i1, v1, i2, v2, act_c, conc_c, i0, i_loss, i_lim):
    """Closed-form (e_sum, r_ohm) matching V(i1)=v1, V(i2)=v2 at fixed i_lim."""
    a1 = act_c * math.log((i1 + i_loss) / i0) + conc_c * math.log(
        i_lim / (i_lim - i1))
    a2 = act_c * math.log((i2 + i_loss) / i0) + conc_c * math.log(
        i_lim / (i_lim - i2))
    r_ohm = ((v2 + a2) - (v1 + a1)) / (i1 - i2)
    e_sum = v2 + a2 + r_ohm * i2
    return e_sum, r_ohm


def calibrate_polarization(p: FuelCellParams,
                           anchors: PolarizationAnchors = None
                           ) -> FuelCellParams:
    """Fit (r_ohm, nernst_offset, i_lim) so the stack curve hits the anchors.

    The two anchor voltages pin (e_sum, r_ohm) linearly for any candidate
    i_lim; a grid over i_lim with local ternary refinement then places the
    power maximum at the right current.  Residuals are stored on the returned
    record; above 5 percent the fit is rejected.
    """
    if anchors is None:
        anchors = PolarizationAnchors()
    i1 = anchors.i_at_p_max_a / p.a_fc
    i2 = anchors.i_at_eta_max_a / p.a_fc
    if abs(i1 - i2) < 1e-12:
        raise CalibrationError("anchor currents coincide")
    # voltage targets: power anchor and efficiency anchor at i1 averaged,
    # efficiency anchor alone at i2
    v1 = 0.5 * (anchors.p_max_w / (p.n_cell * anchors.i_at_p_max_a)
                + anchors.eta_at_p_max * p.hhv_volt_equiv)
    v2 = anchors.eta_max * p.hhv_volt_equiv
    act_c, conc_c = p.act_coeff, p.conc_coeff
    i_hi = max(i1, i2)

    def objective(i_lim):
        e_sum, r_ohm = _fit_given_ilim(i1, v1, i2, v2, act_c, conc_c,
                                       p.i0, p.i_loss, i_lim)
        if r_ohm <= 0.0:
            return None, None, None, math.inf
        i_pk, p_pk = kernels.k_peak_scan(e_sum, act_c, conc_c, p.i0,
                                         p.i_loss, i_lim, r_ohm,
                                         float(p.n_cell), p.a_fc, 1000)
        res_p = p_pk / anchors.p_max_w - 1.0
        res_i = i_pk * p.a_fc / anchors.i_at_p_max_a - 1.0
        return e_sum, r_ohm, (i_pk, p_pk), res_p * res_p + res_i * res_i

    lo, hi = i_hi * 1.002, i_hi * 3.0 + 1.0
    grid = np.linspace(lo, hi, 240)
    best_l, best_obj = None, math.inf
    for cand in grid:
        _, _, _, obj = objective(cand)
        if obj < best_obj:
            best_obj, best_l = obj, cand
    if best_l is None:
        raise CalibrationError("no feasible limiting current found")
    span = (hi - lo) / 239.0
    a, b = max(lo, best_l - span), min(hi, best_l + span)
    for _ in range(80):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if objective(m1)[3] <= objective(m2)[3]:
            b = m2
        else:
            a = m1
    i_lim = 0.5 * (a + b)
    e_sum, r_ohm, peak, _ = objective(i_lim)
    if e_sum is None:
        raise CalibrationError("refinement left no feasible fit")
    i_pk, p_pk = peak

    fitted = replace(p, r_ohm=r_ohm, nernst_offset=e_sum - p.e0, i_lim=i_lim,
                     calibration_residuals=None)
    eta1 = hhv_efficiency(i1, fitted)
    eta2 = hhv_efficiency(i2, fitted)
    residuals = (
        ("p_max_w", anchors.p_max_w, p_pk, p_pk / anchors.p_max_w - 1.0),
        ("i_at_p_max_a", anchors.i_at_p_max_a, i_pk * p.a_fc,
         i_pk * p.a_fc / anchors.i_at_p_max_a - 1.0),
        ("eta_max", anchors.eta_max, eta2, eta2 / anchors.eta_max - 1.0),
        ("eta_at_p_max", anchors.eta_at_p_max, eta1,
         eta1 / anchors.eta_at_p_max - 1.0),
    )
    worst = max(abs(r[3]) for r in residuals)
    if worst > 0.05:
        lines = ", ".join(f"{n}: {e:+.2%}" for n, _, _, e in residuals)
        raise CalibrationError(
            f"calibration residual {worst:.2%} above 5% ({lines})", residuals)
    return replace(fitted, calibration_residuals=residuals)


def calibration_report(p: FuelCellParams) -> dict:
    """JSON-ready record of a calibrated parameter set."""
    return {
        "r_ohm": p.r_ohm,
        "nernst_offset": p.nernst_offset,
        "n_cell": p.n_cell,
        "i_lim": p.i_lim,
        "residuals": [
            {"name": n, "target": t, "achieved": a, "rel_err": e}
            for n, t, a, e in (p.calibration_residuals or ())
        ],
    }


# -------------------------------------------------------------------- model

@dataclass(frozen=True)
class PowertrainModel:
    """All physical parameters of one vehicle, with the stack peak cached."""
    vehicle: VehicleParams
    fc: FuelCellParams
    battery: BatteryParams
    i_peak: float
    p_peak: float

    @classmethod
    def build(cls, vehicle: VehicleParams = None, fc: FuelCellParams = None,
              battery: BatteryParams = None, calibrate: bool = True,
              anchors: PolarizationAnchors = None) -> "PowertrainModel":
        vehicle = vehicle if vehicle is not None else VehicleParams()
        fc = fc if fc is not None else FuelCellParams()
        battery = battery if battery is not None else BatteryParams()
        if calibrate:
            fc = calibrate_polarization(fc, anchors)
        i_peak, p_peak = stack_peak(fc)
        return cls(vehicle, fc, battery, i_peak, p_peak)
