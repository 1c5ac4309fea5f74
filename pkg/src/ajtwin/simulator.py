"""Seeded virtual printer.

Integrates the stochastic state model with counter-based noise streams (so
toggling a fault never perturbs unrelated draws), synthesizes noisy sensor
rows, ships the experiment schedules as scenario files, injects faults, and
renders synthetic height/grayscale cross-sections for the measurement
pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError
from .params import ModelParameters, with_overrides
from .physics import (QuadratureRule, generation_extrapolating, output_g,
                      physical_bounds, transition_f)
from .profiles import CrossSection
from .types import (STATE_NAMES, InputVector, StateVector, ThetaParams,
                    TimeSeriesRecord)
from .units import to_si

FAULT_KINDS = ("mfc-pressure-drift", "nozzle-clog-acceleration",
               "atomizer-dropout")

_STREAM_PROCESS = 1
_STREAM_MEASUREMENT = 2


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    onset: float       # [s]
    magnitude: float   # Pa/s | m/s | suppressed current fraction

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise RejectedInputError(f"unknown fault kind {self.kind!r}")


@dataclass(frozen=True)
class Scenario:
    duration: float
    dt: float
    seed: int
    init: StateVector
    theta_true: ThetaParams = field(default_factory=ThetaParams.zero)
    schedule: tuple = ()          # ((t, InputVector), ...) step changes
    faults: tuple = ()
    noise_overrides: dict = field(default_factory=dict)  # params-key overrides
    label: str = ""

    def __post_init__(self):
        if self.dt <= 0:
            raise RejectedInputError("dt must be positive")
        if not self.schedule:
            raise RejectedInputError("schedule needs at least the t = 0 entry")
        times = [t for t, _ in self.schedule]
        if times[0] != 0.0:
            raise RejectedInputError("first schedule entry must be at t = 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise RejectedInputError("schedule times must increase")
        if any(t < 0 or t > self.duration for t in times):
            raise RejectedInputError("schedule times must lie in [0, duration]")
        for f in self.faults:
            if not 0 <= f.onset <= self.duration:
                raise RejectedInputError("fault onset outside scenario duration")

    def input_at(self, t: float) -> InputVector:
        u = self.schedule[0][1]
        for tk, uk in self.schedule:
            if tk <= t:
                u = uk
            else:
                break
        return u

    def apply_overrides(self, params: ModelParameters) -> ModelParameters:
        if not self.noise_overrides:
            return params
        return with_overrides(params, self.noise_overrides)


@dataclass
class SimulationTrace:
    """Immutable-by-convention output of one simulation run."""

    t: np.ndarray
    us: np.ndarray          # commanded inputs (K, 3) SI
    xs: np.ndarray          # true states (K, 5) SI
    ys_clean: np.ndarray    # g(x, u) (K, 5)
    ys_noisy: np.ndarray    # clean + sensor noise + sensor faults
    fault_active: np.ndarray  # (K, n_faults) bool
    events: list            # (t, kind, detail)
    scenario: Scenario
    terminated: bool = False

    def records(self):
        return [TimeSeriesRecord.make(self.t[k], self.us[k], self.ys_noisy[k])
                for k in range(len(self.t))]

    def truth(self, k: int) -> StateVector:
        return StateVector.from_array(self.xs[k])


def _noise_draw(seed: int, stream: int, step: int, n: int) -> np.ndarray:
    """Counter-based normal draw: independent of call order and other streams."""
    bits = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64),
                            counter=np.array([0, 0, 0, step], dtype=np.uint64))
    return np.random.Generator(bits).standard_normal(n)


class TruthStepper:
    """Stepwise ground-truth integrator shared by simulate() and the live
    service: Euler-Maruyama state updates, counter-based noise, faults.

    At tick k the caller supplies the commanded inputs; the stepper returns
    that tick's (t, x, y_clean, y_noisy, fault flags) and then advances the
    hidden state to k+1.
    """

    def __init__(self, scenario: Scenario, params: ModelParameters = None,
                 quad: QuadratureRule = None):
        params = params or ModelParameters()
        self.params = scenario.apply_overrides(params)
        self.quad = quad or QuadratureRule(self.params.quadrature)
        self.scenario = scenario
        self.dt = scenario.dt
        self.sigma_xi = np.asarray(self.params.noise.sigma_xi, dtype=float)
        self.sigma_w = np.asarray(self.params.noise.sigma_w, dtype=float)
        self.bounds = physical_bounds(self.params.geometry)
        self.x = scenario.init.as_array()
        self.k = 0
        self.terminated = False
        self.events = []
        self._seen_onset = [False] * len(scenario.faults)
        self._extrapolating = False

    @property
    def t(self) -> float:
        return self.k * self.dt

    def state(self) -> StateVector:
        return StateVector.from_array(self.x)

    def step(self, u=None):
        """Emit tick k and advance the truth; u defaults to the schedule."""
        if self.terminated:
            raise RejectedInputError("stepper already terminated")
        sc = self.scenario
        tk = self.t
        u = (sc.input_at(tk).as_array() if u is None
             else (u.as_array() if hasattr(u, "as_array")
                   else np.asarray(u, dtype=float)))
        x = self.x.copy()

        active = [f.onset <= tk for f in sc.faults]
        for j, (f, a) in enumerate(zip(sc.faults, active)):
            if a and not self._seen_onset[j]:
                self._seen_onset[j] = True
                self.events.append((tk, "fault-onset", f.kind))

        u_eff = u.copy()
        for f, a in zip(sc.faults, active):
            if a and f.kind == "atomizer-dropout":
                u_eff[0] *= max(0.0, 1.0 - f.magnitude)

        y_clean = output_g(x, u, self.params)
        w = _noise_draw(sc.seed, _STREAM_MEASUREMENT, self.k, 5) * self.sigma_w
        y_noisy = y_clean + w
        for f, a in zip(sc.faults, active):
            if a and f.kind == "mfc-pressure-drift":
                y_noisy[2] += f.magnitude * (tk - f.onset)

        if generation_extrapolating(u_eff[1], x[1], u_eff[0], self.params) \
                and not self._extrapolating:
            self._extrapolating = True
            self.events.append((tk, "h-extrapolation",
                                "generation fit evaluated outside its design box"))

        drift = transition_f(x, u_eff, sc.theta_true, self.params, self.quad)
        for f, a in zip(sc.faults, active):
            if a and f.kind == "nozzle-clog-acceleration":
                drift[3] += f.magnitude
        xi = _noise_draw(sc.seed, _STREAM_PROCESS, self.k, 5) * self.sigma_xi
        lo, hi = self.bounds
        raw = x + self.dt * drift + math.sqrt(self.dt) * xi
        self.x = np.clip(raw, lo, hi)
        clamped = np.flatnonzero(self.x != raw)
        if clamped.size:
            self.events.append((tk, "clamp",
                                ",".join(STATE_NAMES[i] for i in clamped)))
        if self.x[3] >= hi[3]:
            self.events.append((tk, "terminal-clog",
                                "nozzle deposition reached r_N0"))
            self.terminated = True
        self.k += 1
        return {"t": tk, "u": u, "x": x, "y_clean": y_clean,
                "y_noisy": y_noisy, "fault_active": active}


def simulate(scenario: Scenario, params: ModelParameters = None,
             quad: QuadratureRule = None) -> SimulationTrace:
    """Run the ground-truth model: Euler-Maruyama states, noisy outputs.

    x_{k+1} = clamp(x_k + dt f(x_k, u_k) + sqrt(dt) xi_k),  y_k = g(x_k, u_k) + w_k.
    """
    stepper = TruthStepper(scenario, params, quad)
    K = int(math.floor(scenario.duration / scenario.dt + 1e-9))
    t = scenario.dt * np.arange(K)
    us = np.empty((K, 3))
    xs = np.empty((K, 5))
    ys_clean = np.empty((K, 5))
    ys_noisy = np.empty((K, 5))
    fault_active = np.zeros((K, len(scenario.faults)), dtype=bool)
    k_end = K
    for k in range(K):
        out = stepper.step()
        us[k], xs[k] = out["u"], out["x"]
        ys_clean[k], ys_noisy[k] = out["y_clean"], out["y_noisy"]
        fault_active[k] = out["fault_active"]
        if stepper.terminated:
            k_end = k + 1
            break
    sl = slice(0, k_end)
    return SimulationTrace(t=t[sl], us=us[sl], xs=xs[sl],
                           ys_clean=ys_clean[sl], ys_noisy=ys_noisy[sl],
                           fault_active=fault_active[sl],
                           events=stepper.events, scenario=scenario,
                           terminated=stepper.terminated)


# ---------------------------------------------------------------------------
# Latent-state probing
# ---------------------------------------------------------------------------

def probe_latent(trace: SimulationTrace, t: float, disturbance=None):
    """True state at the nearest step, the simulated invasive measurement.

    With ``disturbance=(dL_w, dL_o)`` (SI), returns a new trace whose noisy
    linewidth/overspray rows shift by that step from the probe time on,
    mimicking the output shifts invasive measurements introduce.  Returns
    (state, trace).
    """
    if not (trace.t[0] <= t <= trace.t[-1]):
        raise RejectedInputError("probe time outside trace")
    k = int(np.argmin(np.abs(trace.t - t)))
    state = trace.truth(k)
    if disturbance is None:
        return state, trace
    d_lw, d_lo = disturbance
    ys = trace.ys_noisy.copy()
    ys[k:, 0] += d_lw
    ys[k:, 1] += d_lo
    events = trace.events + [(trace.t[k], "probe-disturbance",
                              f"dL_w={d_lw!r},dL_o={d_lo!r}")]
    new_trace = SimulationTrace(t=trace.t, us=trace.us, xs=trace.xs,
                                ys_clean=trace.ys_clean, ys_noisy=ys,
                                fault_active=trace.fault_active, events=events,
                                scenario=trace.scenario,
                                terminated=trace.terminated)
    return state, new_trace


# ---------------------------------------------------------------------------
# Synthetic cross-sections
# ---------------------------------------------------------------------------

def synth_profile(y_clean, pitch: float, platen_speed: float = 2e-3,
                  background: float = 200.0) -> CrossSection:
    """Deterministic two-lobe height template matching (L_w, L_o, Q_m).

    Closed-form landmarks: a central plateau whose 80%-height width is
    L_w/2.1, steep flanks, a shoulder ledge centered at +-L_w/2 whose slope
    sags in the middle (so the rendered brightness peaks exactly there), and
    a linear overspray ramp ending at +-L_o/2.  The template holds for
    1.25 <= L_o/L_w <= ~2.3; the profile integral equals Q_m / platen_speed.
    """
    y = y_clean.as_array() if hasattr(y_clean, "as_array") else np.asarray(y_clean)
    L_w, L_o, Q_m = float(y[0]), float(y[1]), float(y[4])
    if not (L_o >= L_w > 0.0):
        raise RejectedInputError("need L_o >= L_w > 0")
    if Q_m <= 0.0 or platen_speed <= 0.0:
        raise RejectedInputError("need positive material flow and platen speed")
    if L_o < 1.25 * L_w:
        raise RejectedInputError("template needs L_o >= 1.25 L_w")

    b_half = L_w / (2.0 * 2.1)
    r1 = 0.75 * b_half
    m1 = 0.2 / (b_half - r1)            # slope per unit h0
    ell = 0.2 * L_w
    r2 = 0.5 * L_w - 0.5 * ell
    r3 = 0.5 * L_w + 0.5 * ell
    r_end = 0.5 * L_o
    if r2 <= b_half:
        raise RejectedInputError("template needs a shoulder beyond the flank")
    h_sh = 1.0 - m1 * (r2 - r1)         # shoulder height for h0 = 1
    if h_sh <= 0.02:
        raise RejectedInputError("flank consumes the whole profile height")
    L_ramp = r_end - r3
    if L_ramp <= 0:
        raise RejectedInputError("template needs L_o/2 beyond the shoulder ledge")

    sol = None
    for beta_min in (0.08, 0.1, 0.12, 0.15):
        m_min = beta_min * m1
        rho_floor = beta_min + 0.025
        rho_hi = (h_sh - m_min * ell) / (m1 * L_ramp)
        rho_lo = (h_sh - (0.95 * m1 + m_min) * ell / 2.0) / (m1 * L_ramp)
        lo_b = max(rho_lo, rho_floor)
        hi_b = min(rho_hi, 0.9)
        if lo_b < hi_b:
            rho = 0.5 * (lo_b + hi_b)
            sol = (m_min, rho * m1)
            break
    if sol is None:
        raise RejectedInputError("no feasible shoulder/ramp slopes for these "
                                 "metrics (L_o/L_w outside template range)")
    m_min, m3 = sol
    h3 = m3 * L_ramp
    m_edge = 2.0 * (h_sh - h3) / ell - m_min

    n_half = int(math.ceil((r_end + max(0.25 * L_o, 20 * pitch)) / pitch))
    r = pitch * np.arange(-n_half, n_half + 1)
    a = np.abs(r)
    h = np.zeros_like(r)
    h[a <= r1] = 1.0
    flank = (a > r1) & (a <= r2)
    h[flank] = 1.0 - m1 * (a[flank] - r1)
    ledge = (a > r2) & (a <= r3)
    xl = a[ledge] - r2
    sag = (xl - (ell / (2.0 * math.pi)) * np.sin(2.0 * math.pi * xl / ell)) / 2.0
    h[ledge] = h_sh - (m_edge * xl + (m_min - m_edge) * sag)
    ramp = (a > r3) & (a <= r_end)
    h[ramp] = h3 - m3 * (a[ramp] - r3)
    h = np.clip(h, 0.0, None)

    area_unit = np.trapezoid(h, r)
    h *= (Q_m / platen_speed) / area_unit
    return CrossSection(positions=r, values=h, kind="height")


def render_grayscale(cs: CrossSection, background: float = 200.0,
                     strength: float = 0.8) -> CrossSection:
    """Brightness inversely tied to the height-gradient magnitude."""
    if cs.kind != "height":
        raise RejectedInputError("grayscale rendering needs a height profile")
    # uniform pitch is a CrossSection invariant; the scalar-spacing form keeps
    # an exactly constant profile at exactly zero gradient
    grad = np.abs(np.gradient(cs.values, cs.pitch))
    peak = grad.max()
    if peak == 0.0:
        vals = np.full_like(cs.values, float(background))
    else:
        vals = background * (1.0 - strength * grad / peak)
    return CrossSection(positions=cs.positions,
                        values=np.clip(vals, 0.0, 255.0), kind="grayscale")


# ---------------------------------------------------------------------------
# Scenario files (same flat key = value family as the parameter bundle)
# ---------------------------------------------------------------------------

_STRING_KEYS = ("label",)


def dump_scenario(sc: Scenario) -> str:
    from .units import from_si
    lines = ["# ajtwin scenario (key = value [unit]; untagged = SI)"]
    if sc.label:
        lines.append(f"label = {sc.label}")
    lines.append(f"duration = {float(sc.duration)!r}")
    lines.append(f"dt = {float(sc.dt)!r}")
    lines.append(f"seed = {int(sc.seed)}")
    x = sc.init
    lines.append(f"init.d_a_median = {from_si(x.d_a_median, 'um')!r} um")
    lines.append(f"init.V_l = {from_si(x.V_l, 'mL')!r} mL")
    lines.append(f"init.dr_tube = {from_si(x.dr_tube, 'um')!r} um")
    lines.append(f"init.dr_nozzle = {from_si(x.dr_nozzle, 'um')!r} um")
    lines.append(f"init.phi_A = {x.phi_A!r}")
    th = sc.theta_true
    for name in ("theta_da", "theta_Vl", "theta_drT", "theta_drN", "theta_phiA"):
        lines.append(f"theta.{name} = {getattr(th, name)!r}")
    for i, (tk, u) in enumerate(sc.schedule):
        lines.append(f"input{i}.t = {float(tk)!r}")
        lines.append(f"input{i}.I_A = {from_si(u.I_A, 'mA')!r} mA")
        lines.append(f"input{i}.Q_c = {from_si(u.Q_c, 'sccm')!r} sccm")
        lines.append(f"input{i}.Q_s = {from_si(u.Q_s, 'sccm')!r} sccm")
    for i, f in enumerate(sc.faults):
        lines.append(f"fault{i}.kind = {f.kind}")
        lines.append(f"fault{i}.onset = {float(f.onset)!r}")
        lines.append(f"fault{i}.magnitude = {float(f.magnitude)!r}")
    for key, val in sc.noise_overrides.items():
        lines.append(f"override.{key} = {val!r}")
    return "\n".join(lines) + "\n"


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_scenario(sc))


def parse_scenario(text: str) -> Scenario:
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RejectedInputError(f"line {lineno}: expected 'key = value'")
        key, rhs = (s.strip() for s in line.split("=", 1))
        entries[key] = rhs

    def num(key, default=None, unit=None):
        if key not in entries:
            if default is None:
                raise RejectedInputError(f"scenario missing {key!r}")
            return default
        parts = entries.pop(key).split()
        value = float(parts[0])
        if len(parts) == 2:
            return to_si(value, parts[1])
        if unit:
            return to_si(value, unit)
        return value

    label = entries.pop("label", "")
    duration = num("duration")
    dt = num("dt", 1.0)
    seed = int(num("seed", 0.0))
    init = StateVector(
        d_a_median=num("init.d_a_median", unit=None),
        V_l=num("init.V_l"),
        dr_tube=num("init.dr_tube", 0.0),
        dr_nozzle=num("init.dr_nozzle", 0.0),
        phi_A=num("init.phi_A"),
    )
    theta = ThetaParams(
        theta_da=num("theta.theta_da", 0.0),
        theta_Vl=num("theta.theta_Vl", 0.0),
        theta_drT=num("theta.theta_drT", 0.0),
        theta_drN=num("theta.theta_drN", 0.0),
        theta_phiA=num("theta.theta_phiA", 0.0),
    )
    schedule = []
    i = 0
    while f"input{i}.t" in entries:
        schedule.append((num(f"input{i}.t"),
                         InputVector(I_A=num(f"input{i}.I_A"),
                                     Q_c=num(f"input{i}.Q_c"),
                                     Q_s=num(f"input{i}.Q_s"))))
        i += 1
    faults = []
    i = 0
    while f"fault{i}.kind" in entries:
        faults.append(FaultSpec(kind=entries.pop(f"fault{i}.kind"),
                                onset=num(f"fault{i}.onset"),
                                magnitude=num(f"fault{i}.magnitude")))
        i += 1
    # Override values stay in the parameter schema's display units; the unit
    # tag, when present, is only checked against that schema.
    from .params import _BY_KEY as _PARAM_KEYS
    overrides = {}
    for key in list(entries):
        if key.startswith("override."):
            parts = entries.pop(key).split()
            pkey = key[len("override."):]
            if pkey not in _PARAM_KEYS:
                raise RejectedInputError(f"unknown override key {pkey!r}")
            if len(parts) == 2 and parts[1] != (_PARAM_KEYS[pkey][1] or parts[1]):
                raise RejectedInputError(
                    f"override {pkey!r} must use unit {_PARAM_KEYS[pkey][1]}")
            overrides[pkey] = float(parts[0])
    if entries:
        raise RejectedInputError(f"unknown scenario keys: {sorted(entries)}")
    return Scenario(duration=duration, dt=dt, seed=seed, init=init,
                    theta_true=theta, schedule=tuple(schedule),
                    faults=tuple(faults), noise_overrides=overrides,
                    label=label)


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def shipped_scenario(name: str) -> Scenario:
    """Load one of the scenario files distributed with the package."""
    import importlib.resources
    res = importlib.resources.files("ajtwin").joinpath(f"data/scenarios/{name}.cfg")
    return parse_scenario(res.read_text(encoding="utf-8"))
