"""Wire protocol helpers: length-delimited UTF-8 JSON messages.

Each message on the socket is ``<decimal byte length>\\n<payload>`` where the
payload is a single JSON object serialized with sorted keys (so identical
messages are identical bytes).  Field names, units and types are enumerated
in docs/protocol.md; every message carries the schema version.
"""

from __future__ import annotations

import json

from ..errors import RequestError
from ..types import INPUT_NAMES, OUTPUT_NAMES, STATE_NAMES
from ..units import from_si

PROTOCOL_VERSION = 1

#: Display-unit field names used on the wire.
INPUT_FIELDS = ("I_A_mA", "Q_c_sccm", "Q_s_sccm")
OUTPUT_FIELDS = ("L_w_um", "L_o_um", "P_c_Pa", "P_s_Pa", "Q_m_sccm")
STATE_FIELDS = ("d_a_um", "V_l_mL", "dr_T_um", "dr_N_um", "phi_A")
THETA_FIELDS = ("theta_da", "theta_Vl", "theta_drT", "theta_drN", "theta_phiA")

_INPUT_UNITS = ("mA", "sccm", "sccm")
_OUTPUT_UNITS = ("um", "um", "Pa", "Pa", "sccm")
_STATE_UNITS = ("um", "mL", "um", "um", None)

#: Operational bounds for set_input, in display units.
INPUT_BOUNDS = {"I_A": (250.0, 500.0), "Q_c": (10.0, 40.0),
                "Q_s": (30.0, 80.0)}
INPUT_UNIT = {"I_A": "mA", "Q_c": "sccm", "Q_s": "sccm"}


def encode_message(obj: dict) -> bytes:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"),
                         allow_nan=True).encode("utf-8")
    return str(len(payload)).encode("ascii") + b"\n" + payload


def decode_message(payload: bytes) -> dict:
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RequestError(f"malformed message: {exc}") from exc
    if not isinstance(obj, dict):
        raise RequestError("message must be a JSON object")
    return obj


def read_message(sock_file):
    """Read one framed message from a binary file-like; None at EOF."""
    header = sock_file.readline()
    if not header:
        return None
    try:
        length = int(header.strip())
    except ValueError as exc:
        raise RequestError(f"bad frame header {header!r}") from exc
    if length < 0 or length > 64 * 1024 * 1024:
        raise RequestError("frame length out of range")
    payload = sock_file.read(length)
    if payload is None or len(payload) != length:
        return None
    return decode_message(payload)


def _named(fields, units, values):
    out = {}
    for name, unit, v in zip(fields, units, values):
        out[name] = float(v) if unit is None else from_si(float(v), unit)
    return out


def input_dict(u_si) -> dict:
    return _named(INPUT_FIELDS, _INPUT_UNITS, u_si)


def output_dict(y_si) -> dict:
    return _named(OUTPUT_FIELDS, _OUTPUT_UNITS, y_si)


def state_dict(x_si) -> dict:
    return _named(STATE_FIELDS, _STATE_UNITS, x_si)


def variance_dict(p_diag_si) -> dict:
    """Per-state variances converted to display units squared."""
    out = {}
    for name, unit, v in zip(STATE_FIELDS, _STATE_UNITS, p_diag_si):
        scale = 1.0 if unit is None else from_si(1.0, unit)
        out[name] = float(v) * scale * scale
    return out


def theta_dict(theta) -> dict:
    arr = theta.as_array()
    return {name: float(v) for name, v in zip(THETA_FIELDS, arr)}


# Round-trip helpers (display dict -> SI array) used by replay/clients.

def si_input_from_dict(d: dict):
    from ..units import to_si
    return [to_si(float(d["I_A_mA"]), "mA"), to_si(float(d["Q_c_sccm"]), "sccm"),
            to_si(float(d["Q_s_sccm"]), "sccm")]
