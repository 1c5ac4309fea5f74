"""Session host: one tick loop binding the virtual printer to the
estimation stack, with serialized command handling and telemetry fan-out.

Commands and ticks run on the same session thread, so every frame reflects
exactly one (u, y, belief) triple and calibration swaps theta only at tick
boundaries.  Telemetry consumers get bounded queues that drop oldest-first;
the persisted frame log never drops.
"""

from __future__ import annotations

import io
import queue
import threading
import time
from dataclasses import dataclass

import numpy as np

from .. import tables
from ..errors import NotReadyError, RequestError, TwinError
from ..estimation import (OnlineFilter, em_calibrate, forecast,
                          initial_fit, nis_threshold)
from ..params import ModelParameters
from ..physics import QuadratureRule
from ..simulator import Scenario, TruthStepper
from ..types import InputVector, ThetaParams, TimeSeriesRecord
from ..units import to_si
from . import protocol

#: Consecutive anomalous frames before an alert event is raised.
ALERT_DEBOUNCE = 10

#: Telemetry queue depth per subscriber; oldest frames drop first.
SUBSCRIBER_QUEUE = 512

_INPUT_INDEX = {"I_A": 0, "Q_c": 1, "Q_s": 2}


@dataclass
class _Subscriber:
    q: queue.Queue
    closed: bool = False


class Session:
    """One live-sim or replay twin session."""

    def __init__(self, sid: str, params: ModelParameters,
                 scenario: Scenario = None, replay_records=None,
                 em_window: int = None, init_window: int = 10):
        if (scenario is None) == (replay_records is None):
            raise RequestError("need exactly one of scenario or replay records")
        self.sid = sid
        self.mode = "live-sim" if scenario is not None else "replay"
        self.scenario = scenario
        self.base_params = params
        self.params = scenario.apply_overrides(params) if scenario else params
        self.quad = QuadratureRule(self.params.quadrature)
        self.em_window = em_window
        self.init_window = init_window
        self.dt = scenario.dt if scenario else None

        if scenario is not None:
            self.stepper = TruthStepper(scenario, params, self.quad)
            self.max_ticks = int(scenario.duration / scenario.dt + 1e-9)
            self.setpoints = scenario.input_at(0.0).as_array()
        else:
            self.stepper = None
            self.replay_records = list(replay_records)
            if self.replay_records:
                ts = [r.t for r in self.replay_records]
                self.dt = ts[1] - ts[0] if len(ts) > 1 else 1.0
            self.max_ticks = len(self.replay_records)
            self.setpoints = None
        self.overridden = set()          # channels the operator owns
        self.pending_inputs = {}         # channel -> SI value, applied next tick

        self.theta = ThetaParams.zero()
        self.filter: OnlineFilter | None = None
        self.records: list[TimeSeriesRecord] = []
        self.frames: list[dict] = []     # persisted log (wire form)
        self.events: list[tuple] = []
        self.tick_index = 0
        self.paused = True
        self.rate = 1.0                  # ticks per wall second when running
        self.finished = False
        self._consecutive_flags = 0
        self._alert_active = False

        self._commands: queue.Queue = queue.Queue()
        self._subscribers: list[_Subscriber] = []
        self._stopped = threading.Event()
        self._thread = threading.Thread(target=self._loop, daemon=True,
                                        name=f"session-{sid}")
        self._thread.start()

    # -- public API (thread-safe: enqueue + wait) ---------------------------

    def request(self, cmd: dict, timeout: float = 60.0) -> dict:
        if self._stopped.is_set():
            raise RequestError("session closed")
        done = threading.Event()
        box = {}

        def reply(result):
            box["result"] = result
            done.set()

        self._commands.put((cmd, reply))
        if not done.wait(timeout):
            raise RequestError("session command timed out")
        result = box["result"]
        if isinstance(result, Exception):
            raise result
        return result

    def subscribe(self) -> queue.Queue:
        sub = _Subscriber(q=queue.Queue(maxsize=SUBSCRIBER_QUEUE))
        self._subscribers.append(sub)
        return sub.q

    def close(self):
        self._stopped.set()
        self._commands.put((None, None))
        self._thread.join(timeout=5.0)

    # -- session thread ------------------------------------------------------

    def _loop(self):
        next_deadline = None
        while not self._stopped.is_set():
            now = time.monotonic()
            if not self.paused and not self.finished:
                if next_deadline is None:
                    next_deadline = now
                if now >= next_deadline:
                    self._tick()
                    next_deadline += 1.0 / self.rate
                    continue
                timeout = max(0.0, next_deadline - now)
            else:
                next_deadline = None
                timeout = None
            try:
                cmd, reply = self._commands.get(timeout=timeout)
            except queue.Empty:
                continue
            if cmd is None:
                break
            try:
                reply(self._handle(cmd))
            except TwinError as exc:
                reply(exc)
            except Exception as exc:  # defensive: never kill the loop
                reply(RequestError(f"internal error: {exc!r}"))

    # -- tick ---------------------------------------------------------------

    def _tick(self):
        if self.finished or self.tick_index >= self.max_ticks:
            self.finished = True
            self.paused = True
            return
        k = self.tick_index
        if self.mode == "live-sim":
            t = self.stepper.t
            sched = self.scenario.input_at(t).as_array()
            for i, name in enumerate(("I_A", "Q_c", "Q_s")):
                if name not in self.overridden:
                    self.setpoints[i] = sched[i]
            for name, value in self.pending_inputs.items():
                self.setpoints[_INPUT_INDEX[name]] = value
                self.overridden.add(name)
            self.pending_inputs.clear()
            n_events = len(self.stepper.events)
            out = self.stepper.step(self.setpoints.copy())
            self.events.extend(self.stepper.events[n_events:])
            t, u, y = out["t"], out["u"], out["y_noisy"]
            if self.stepper.terminated:
                self.finished = True
                self.paused = True
        else:
            rec = self.replay_records[k]
            t, u, y = rec.t, rec.u.as_array(), rec.y.as_array()

        record = TimeSeriesRecord.make(t, u, y)
        self.records.append(record)

        nis, anomaly = 0.0, False
        if self.filter is None and len(self.records) >= self.init_window:
            x0, P0 = initial_fit(self.records[:self.init_window],
                                 self.params)
            self.filter = OnlineFilter(x0, P0, theta=self.theta,
                                       params=self.params, quad=self.quad)
            for r in self.records:
                step = self.filter.advance(r.t, r.u.as_array(), r.y.as_array())
            nis = step["nis"]
            m = int(step["mask"].sum())
            anomaly = m > 0 and nis > nis_threshold(m)
        elif self.filter is not None:
            step = self.filter.advance(t, u, y)
            nis = step["nis"]
            m = int(step["mask"].sum())
            anomaly = m > 0 and nis > nis_threshold(m)

        if anomaly:
            self._consecutive_flags += 1
        else:
            self._consecutive_flags = 0
            self._alert_active = False
        alert = self._consecutive_flags >= ALERT_DEBOUNCE
        if alert and not self._alert_active:
            self._alert_active = True
            self.events.append((t, "alert",
                                f"{ALERT_DEBOUNCE} consecutive anomalous frames"))

        frame = {"type": "frame", "v": protocol.PROTOCOL_VERSION,
                 "session": self.sid, "seq": k, "t": float(t),
                 "u": protocol.input_dict(u),
                 "y": protocol.output_dict(y),
                 "x_hat": None, "p_diag": None,
                 "nis": float(nis), "anomaly": bool(anomaly),
                 "alert": bool(alert),
                 "theta": protocol.theta_dict(self.theta)}
        if self.filter is not None:
            frame["x_hat"] = protocol.state_dict(self.filter.state_si)
            frame["p_diag"] = protocol.variance_dict(
                np.diag(self.filter.covariance_si))
        self.frames.append(frame)
        self._fan_out(frame)
        self.tick_index += 1
        if self.tick_index >= self.max_ticks:
            self.finished = True
            self.paused = True
            self.events.append((t, "end", "scenario duration reached"))

    def _fan_out(self, frame: dict):
        for sub in self._subscribers:
            if sub.closed:
                continue
            while True:
                try:
                    sub.q.put_nowait(frame)
                    break
                except queue.Full:
                    try:
                        sub.q.get_nowait()  # drop oldest for this consumer
                    except queue.Empty:
                        pass

    # -- command handling (session thread) -----------------------------------

    def _handle(self, cmd: dict) -> dict:
        op = cmd.get("op")
        handler = getattr(self, f"_op_{op}", None)
        if handler is None:
            raise RequestError(f"unknown session op {op!r}")
        return handler(cmd)

    def _op_status(self, cmd):
        return {"session": self.sid, "mode": self.mode,
                "paused": bool(self.paused), "finished": bool(self.finished),
                "t": float(self.records[-1].t) if self.records else 0.0,
                "next_tick": self.tick_index,
                "frames": len(self.frames),
                "has_belief": self.filter is not None,
                "theta": protocol.theta_dict(self.theta),
                "alert_active": bool(self._alert_active)}

    def _op_step(self, cmd):
        n = int(cmd.get("n", 1))
        if n < 1:
            raise RequestError("n must be >= 1")
        for _ in range(n):
            if self.finished:
                break
            self._tick()
        return self._op_status(cmd)

    def _op_run(self, cmd):
        rate = float(cmd.get("rate", 1.0))
        if not (0 < rate <= 1000):
            raise RequestError("rate must be in (0, 1000] ticks/s")
        self.rate = rate
        self.paused = False
        return {"running": True, "rate": rate}

    def _op_pause(self, cmd):
        self.paused = True
        return self._op_status(cmd)

    def _op_set_input(self, cmd):
        if self.mode != "live-sim":
            raise RequestError("set_input needs a live-sim session")
        which = cmd.get("which")
        if which not in protocol.INPUT_BOUNDS:
            raise RequestError(f"which must be one of {sorted(protocol.INPUT_BOUNDS)}")
        value = float(cmd.get("value"))
        lo, hi = protocol.INPUT_BOUNDS[which]
        if not (lo <= value <= hi):
            raise RequestError(
                f"{which}={value} outside operational bounds [{lo}, {hi}] "
                f"{protocol.INPUT_UNIT[which]}")
        si = to_si(value, protocol.INPUT_UNIT[which])
        self.pending_inputs[which] = si
        return {"which": which, "value": value,
                "unit": protocol.INPUT_UNIT[which],
                "effective_from_seq": self.tick_index}

    def _current_inputs(self):
        if self.records:
            return self.records[-1].u.as_array()
        if self.mode == "live-sim":
            return self.scenario.input_at(0.0).as_array()
        raise NotReadyError("no records yet")

    def _op_what_if(self, cmd):
        if self.filter is None:
            raise NotReadyError("no belief yet: initialization window not filled")
        horizon = int(cmd.get("horizon", 1))
        if horizon < 1:
            raise RequestError("horizon must be >= 1")
        schedule = cmd.get("schedule") or []
        base = self._current_inputs()
        u_seq = np.repeat(base[None, :], horizon, axis=0)
        for entry in schedule:
            k0 = int(entry.get("from_step", 0))
            if k0 < 0 or k0 >= horizon:
                raise RequestError("schedule from_step outside horizon")
            u = u_seq[k0].copy()
            for name in ("I_A", "Q_c", "Q_s"):
                key = f"{name}_{protocol.INPUT_UNIT[name]}"
                if key in entry:
                    u[_INPUT_INDEX[name]] = to_si(float(entry[key]),
                                                  protocol.INPUT_UNIT[name])
            u_seq[k0:] = u
        fc = forecast(self.filter.belief(), u_seq, theta=self.theta,
                      params=self.params, dt=self.dt or 1.0,
                      t0=float(self.records[-1].t))
        steps = []
        for k in range(horizon):
            sig = np.sqrt(np.clip(np.diag(fc.output_covs[k]), 0.0, None))
            steps.append({
                "t": float(fc.t[k]),
                "mean": protocol.output_dict(fc.output_means[k]),
                "lo": protocol.output_dict(fc.output_means[k] - 2 * sig),
                "hi": protocol.output_dict(fc.output_means[k] + 2 * sig),
            })
        return {"horizon": horizon, "steps": steps}

    def _op_calibrate(self, cmd):
        window = cmd.get("window", self.em_window)
        if window is not None:
            window = int(window)
            if len(self.records) < window:
                raise RequestError(
                    f"need {window} buffered frames, have {len(self.records)}")
        if len(self.records) < max(self.init_window, 3):
            raise NotReadyError("not enough frames buffered for calibration")
        report = em_calibrate(self.records, theta0=self.theta, window=window,
                              params=self.params, quad=self.quad)
        self.theta = report.theta
        if self.filter is not None:
            self.filter.set_theta(self.theta)
        self.events.append((self.records[-1].t, "theta-swap",
                            "EM calibration applied"))
        return {"theta": protocol.theta_dict(self.theta),
                "objectives": [[float(a), float(b)] for a, b in report.objectives],
                "converged": bool(report.converged),
                "iterations": report.n_iterations,
                "applied_at_seq": self.tick_index}

    def _op_probe(self, cmd):
        if self.mode != "live-sim":
            raise RequestError("probe needs a live-sim session")
        return {"x_true": protocol.state_dict(self.stepper.x)}

    def _op_frames(self, cmd):
        lo = int(cmd.get("from_seq", 0))
        hi = cmd.get("to_seq")
        hi = len(self.frames) if hi is None else int(hi)
        return {"frames": self.frames[lo:hi]}

    def _op_export(self, cmd):
        lo_t = cmd.get("from_t")
        hi_t = cmd.get("to_t")
        recs = [r for r in self.records
                if (lo_t is None or r.t >= lo_t) and (hi_t is None or r.t <= hi_t)]
        buf = io.StringIO()
        buf.write(",".join(tables.RECORD_COLUMNS) + "\n")
        for row in tables.records_to_rows(recs):
            buf.write(",".join(tables._fmt(v) for v in row) + "\n")
        events = [[float(t), kind, detail] for t, kind, detail in self.events
                  if (lo_t is None or t >= lo_t) and (hi_t is None or t <= hi_t)]
        return {"table": buf.getvalue(), "events": events}
