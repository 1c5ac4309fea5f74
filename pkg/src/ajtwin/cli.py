"""Batch command-line entry points.

Exit codes: 0 success, 2 input validation failure, 3 empty/degenerate
result, 4 numerical failure.  Every command is deterministic given its
files and flags; the only environment dependence is AJTWIN_PARAMS, which
overrides the parameter-bundle path when --params is absent.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import tables
from .errors import RejectedInputError, TwinError
from .estimation import ekf_run, em_calibrate, forecast, initial_fit, \
    rts_smooth
from .params import load_parameters
from .profiles import (cfd_profile_metrics, extract_grayscale_metrics,
                       moving_average, read_cross_section)
from .simulator import load_scenario, simulate
from .types import STATE_NAMES, ThetaParams
from .units import from_si

PARAMS_ENV = "AJTWIN_PARAMS"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DEGENERATE = 3
EXIT_NUMERICAL = 4

_STATE_COL_UNITS = ("um", "mL", "um", "um", None)


def _load_params(args):
    path = getattr(args, "params", None) or os.environ.get(PARAMS_ENV)
    return load_parameters(path)


def _parse_theta(spec: str) -> ThetaParams:
    parts = [float(p) for p in spec.split(",")]
    if len(parts) != 5:
        raise RejectedInputError("--theta needs 5 comma-separated values [1/s]")
    return ThetaParams.from_array(parts)


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        import dataclasses
        scenario = dataclasses.replace(scenario, seed=args.seed)
    params = _load_params(args)
    trace = simulate(scenario, params)
    out = Path(args.out)
    tables.write_records(trace.records(), out)
    truth_path = out.with_name(out.stem + "_truth" + out.suffix)
    tables.write_truth(trace, truth_path)
    if len(trace.t) == 0:
        return EXIT_DEGENERATE
    return EXIT_OK


def _state_columns(suffix):
    cols = []
    for name, unit in zip(STATE_NAMES, _STATE_COL_UNITS):
        tag = f"[{unit}]" if unit else ""
        cols += [f"{name}_{s}{tag}" for s in suffix]
    return cols


def cmd_estimate(args) -> int:
    records = tables.read_records(args.table)
    if len(records) < 2:
        return EXIT_DEGENERATE
    params = _load_params(args)
    theta = _parse_theta(args.theta) if args.theta else ThetaParams.zero()
    n_init = min(args.window, len(records))
    x0, P0 = initial_fit(records[:n_init], params)
    fr = ekf_run(records, x0, P0, theta=theta, params=params)
    if args.smooth:
        sm = rts_smooth(fr)
        means, covs = sm.states_si, sm.covariances_si
    else:
        means, covs = fr.states_si, fr.covariances_si
    sig = np.sqrt(np.clip(np.einsum("kii->ki", covs), 0.0, None))
    rows = []
    base = tables.records_to_rows(records)
    for k, row in enumerate(base):
        extra = []
        for i, unit in enumerate(_STATE_COL_UNITS):
            m, lo, hi = means[k, i], means[k, i] - 2 * sig[k, i], \
                means[k, i] + 2 * sig[k, i]
            if unit:
                m, lo, hi = (from_si(v, unit) for v in (m, lo, hi))
            extra += [m, lo, hi]
        rows.append(row + extra)
    cols = list(tables.RECORD_COLUMNS) + _state_columns(("hat", "lo", "hi"))
    tables.write_table(args.out, cols, rows)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    records = tables.read_records(args.table)
    params = _load_params(args)
    report = em_calibrate(records, window=args.window, params=params)
    text = report.to_text()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_forecast(args) -> int:
    records = tables.read_records(args.table)
    if len(records) < 2:
        return EXIT_DEGENERATE
    params = _load_params(args)
    theta = _parse_theta(args.theta) if args.theta else ThetaParams.zero()
    n_init = min(args.window, len(records))
    x0, P0 = initial_fit(records[:n_init], params)
    fr = ekf_run(records, x0, P0, theta=theta, params=params)
    t_last = float(fr.t[-1])
    dt = fr.dt
    schedule = tables.read_input_schedule(args.schedule)
    u_seq = []
    u = schedule[0][1]
    for k in range(args.horizon):
        tk = t_last + dt * (k + 1)
        for ts, us_ in schedule:
            if ts <= tk:
                u = us_
        u_seq.append(u.as_array())
    fc = forecast(fr.belief(len(fr.t) - 1), np.asarray(u_seq), theta=theta,
                  params=params, dt=dt, t0=t_last)
    sig = np.sqrt(np.clip(np.einsum("kii->ki", fc.output_covs), 0.0, None))
    cols = ["t"]
    units = ("um", "um", "Pa", "Pa", "sccm")
    from .types import OUTPUT_NAMES
    for name, unit in zip(OUTPUT_NAMES, units):
        cols += [f"{name}_{s}[{unit}]" for s in ("mean", "lo", "hi")]
    rows = []
    for k in range(args.horizon):
        row = [fc.t[k]]
        for i, unit in enumerate(units):
            m = fc.output_means[k, i]
            for v in (m, m - 2 * sig[k, i], m + 2 * sig[k, i]):
                row.append(from_si(v, unit))
        rows.append(row)
    tables.write_table(args.out, cols, rows)
    return EXIT_OK


def cmd_analyze_profile(args) -> int:
    cs = read_cross_section(args.profile)
    kind = args.kind or cs.kind
    if kind != cs.kind:
        raise RejectedInputError(
            f"--kind {kind} does not match file header kind {cs.kind}")
    if kind == "grayscale":
        metrics = extract_grayscale_metrics(cs, background=args.background)
    else:
        metrics = cfd_profile_metrics(cs)
    if not metrics.found:
        sys.stdout.write("no-line-found\n")
        return EXIT_DEGENERATE
    sys.stdout.write(
        f"L_w[um]={float(from_si(metrics.L_w, 'um'))!r} "
        f"L_o[um]={float(from_si(metrics.L_o, 'um'))!r} "
        f"center[um]={float(from_si(metrics.center, 'um'))!r} "
        f"flags={','.join(sorted(metrics.flags))}\n")
    if args.out:
        smoothed = moving_average(cs.values, 3)
        rows = [[from_si(r, "um"),
                 from_si(v, "um") if kind == "height" else v,
                 from_si(s, "um") if kind == "height" else s]
                for r, v, s in zip(cs.positions, cs.values, smoothed)]
        tables.write_table(args.out, ("r[um]", "value", "smoothed"), rows)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service.server import serve_forever
    params = _load_params(args)
    serve_forever(args.host, args.port, params)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ajtwin",
                                description="aerosol-jet printer digital twin")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="run a scenario on the virtual printer")
    ps.add_argument("scenario")
    ps.add_argument("--out", required=True)
    ps.add_argument("--params")
    ps.add_argument("--seed", type=int)
    ps.set_defaults(func=cmd_simulate)

    pe = sub.add_parser("estimate", help="filter a recorded table")
    pe.add_argument("table")
    pe.add_argument("--out", required=True)
    pe.add_argument("--params")
    pe.add_argument("--smooth", action="store_true")
    pe.add_argument("--theta")
    pe.add_argument("--window", type=int, default=10,
                    help="records used by the initial-state fit")
    pe.set_defaults(func=cmd_estimate)

    pc = sub.add_parser("calibrate", help="EM drift calibration on a table")
    pc.add_argument("table")
    pc.add_argument("--params")
    pc.add_argument("--window", type=int)
    pc.add_argument("--out")
    pc.set_defaults(func=cmd_calibrate)

    pf = sub.add_parser("forecast", help="open-loop forecast from a table")
    pf.add_argument("table")
    pf.add_argument("schedule")
    pf.add_argument("--horizon", type=int, required=True)
    pf.add_argument("--out", required=True)
    pf.add_argument("--params")
    pf.add_argument("--theta")
    pf.add_argument("--window", type=int, default=10)
    pf.set_defaults(func=cmd_forecast)

    pa = sub.add_parser("analyze-profile", help="extract line metrics")
    pa.add_argument("profile")
    pa.add_argument("--kind", choices=("grayscale", "height"))
    pa.add_argument("--background", type=float)
    pa.add_argument("--out")
    pa.set_defaults(func=cmd_analyze_profile)

    pv = sub.add_parser("serve", help="run the live twin service")
    pv.add_argument("--host", default="127.0.0.1")
    pv.add_argument("--port", type=int, default=7431)
    pv.add_argument("--params")
    pv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RejectedInputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except TwinError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
