"""Value types shared by every module.

All fields are SI.  The five latent states, three inputs and five outputs
follow a fixed ordering throughout the package:

    state  = [d_a_median, V_l, dr_tube, dr_nozzle, phi_A]
    input  = [I_A, Q_c, Q_s]
    output = [L_w, L_o, P_c, P_s, Q_m]

The dataclasses are frozen: they are safe to copy and share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

STATE_NAMES = ("d_a_median", "V_l", "dr_tube", "dr_nozzle", "phi_A")
INPUT_NAMES = ("I_A", "Q_c", "Q_s")
OUTPUT_NAMES = ("L_w", "L_o", "P_c", "P_s", "Q_m")

#: Display units per field, used at external interfaces only.
STATE_UNITS = ("um", "mL", "um", "um", "")
INPUT_UNITS = ("mA", "sccm", "sccm")
OUTPUT_UNITS = ("um", "um", "Pa", "Pa", "sccm")

N_STATES = 5
N_OUTPUTS = 5


@dataclass(frozen=True)
class StateVector:
    """Latent machine state (SI)."""

    d_a_median: float  # median aerosol droplet diameter [m]
    V_l: float         # ink solution volume in the vial [m^3]
    dr_tube: float     # radial ink deposition in the carrier tube [m]
    dr_nozzle: float   # radial ink deposition in the nozzle [m]
    phi_A: float       # aerosol volume fraction in the carrier stream [-]

    def as_array(self) -> np.ndarray:
        return np.array([self.d_a_median, self.V_l, self.dr_tube,
                         self.dr_nozzle, self.phi_A], dtype=float)

    @classmethod
    def from_array(cls, x) -> "StateVector":
        return cls(*(float(v) for v in np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class InputVector:
    """Controllable machine inputs (SI)."""

    I_A: float  # ultrasonic atomizer current [A]
    Q_c: float  # carrier gas flow rate [m^3/s]
    Q_s: float  # sheath gas flow rate [m^3/s]

    def as_array(self) -> np.ndarray:
        return np.array([self.I_A, self.Q_c, self.Q_s], dtype=float)

    @classmethod
    def from_array(cls, u) -> "InputVector":
        return cls(*(float(v) for v in np.asarray(u, dtype=float)))


@dataclass(frozen=True)
class OutputVector:
    """Sensor-derived outputs (SI).  Fields may be NaN for missing samples."""

    L_w: float  # linewidth [m]
    L_o: float  # overspray extent [m]
    P_c: float  # carrier gas pressure [Pa]
    P_s: float  # sheath gas pressure [Pa]
    Q_m: float  # deposited material volume flow [m^3/s]

    def as_array(self) -> np.ndarray:
        return np.array([self.L_w, self.L_o, self.P_c, self.P_s, self.Q_m],
                        dtype=float)

    @classmethod
    def from_array(cls, y) -> "OutputVector":
        return cls(*(float(v) for v in np.asarray(y, dtype=float)))

    def observed_mask(self) -> np.ndarray:
        return ~np.isnan(self.as_array())


@dataclass(frozen=True)
class ThetaParams:
    """Per-state linear drift coefficients learned by EM [1/s]."""

    theta_da: float = 0.0
    theta_Vl: float = 0.0
    theta_drT: float = 0.0
    theta_drN: float = 0.0
    theta_phiA: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_da, self.theta_Vl, self.theta_drT,
                         self.theta_drN, self.theta_phiA], dtype=float)

    @classmethod
    def from_array(cls, th) -> "ThetaParams":
        return cls(*(float(v) for v in np.asarray(th, dtype=float)))

    @classmethod
    def zero(cls) -> "ThetaParams":
        return cls()


@dataclass(frozen=True)
class GaussianBelief:
    """Mean/covariance pair produced by filtering, smoothing or forecasting."""

    mean: StateVector
    covariance: np.ndarray  # 5x5, symmetric PSD

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (N_STATES, N_STATES):
            raise ValueError(f"covariance must be 5x5, got {cov.shape}")
        object.__setattr__(self, "covariance", cov)

    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


@dataclass(frozen=True)
class TimeSeriesRecord:
    """One timestamped (input, output) sample; outputs may be partial."""

    t: float
    u: InputVector
    y: OutputVector

    @classmethod
    def make(cls, t, u, y) -> "TimeSeriesRecord":
        if not isinstance(u, InputVector):
            u = InputVector.from_array(u)
        if not isinstance(y, OutputVector):
            y = OutputVector.from_array(y)
        return cls(float(t), u, y)


def records_to_arrays(records):
    """Split records into (t[n], U[n,3], Y[n,5]) arrays; missing outputs NaN."""
    ts = np.array([r.t for r in records], dtype=float)
    us = np.array([r.u.as_array() for r in records], dtype=float)
    ys = np.array([r.y.as_array() for r in records], dtype=float)
    return ts, us, ys


def check_uniform_dt(ts, rel_tol=1e-6):
    """Validate strictly-increasing, uniformly spaced timestamps; return dt."""
    ts = np.asarray(ts, dtype=float)
    if ts.ndim != 1 or ts.size < 2:
        raise ValueError("need at least two records")
    dts = np.diff(ts)
    if np.any(dts <= 0):
        raise ValueError("record times must be strictly increasing")
    dt = float(dts[0])
    if np.any(np.abs(dts - dt) > rel_tol * max(abs(dt), 1e-30)):
        raise ValueError("records must be uniformly sampled")
    return dt


def is_finite_state(x: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(x)))


def output_is_physical(y: OutputVector) -> bool:
    """L_o >= L_w >= 0 and non-negative pressures, ignoring missing fields."""
    ok = True
    if not (math.isnan(y.L_w) or math.isnan(y.L_o)):
        ok &= y.L_o >= y.L_w >= 0.0
    elif not math.isnan(y.L_w):
        ok &= y.L_w >= 0.0
    for p in (y.P_c, y.P_s):
        if not math.isnan(p):
            ok &= p >= 0.0
    return bool(ok)


def _field_names(dc) -> tuple:
    return tuple(f.name for f in fields(dc))
