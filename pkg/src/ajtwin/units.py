"""Display-unit <-> SI conversions.

Everything inside the package is SI (m, m^3, m^3/s, A, Pa, s).  Operator-facing
surfaces (config files, tables, telemetry) use the display units the machine's
panels use: um, mL, sccm, mA, Pa.  Conversion happens only at those boundaries.
"""

from __future__ import annotations

from .errors import RejectedInputError

# 1 standard cm^3/min expressed in m^3/s.  Kept as the exact quotient so that
# 60 sccm is exactly 1e-6 m^3/s.
SCCM = 1e-6 / 60.0

#: Multiplicative factor taking one display unit to SI.
_TO_SI = {
    "um": 1e-6,
    "mL": 1e-6,
    "sccm": SCCM,
    "mA": 1e-3,
    "Pa": 1.0,
    "m": 1.0,
    "m3": 1.0,
    "m3/s": 1.0,
    "A": 1.0,
}

# Unicode spellings accepted on input (config files are human-edited).
_ALIASES = {
    "µm": "um",  # micro sign
    "μm": "um",  # greek mu
    "ml": "mL",
    "m³": "m3",
    "m³/s": "m3/s",
}


def canonical_unit(unit: str) -> str:
    u = _ALIASES.get(unit, unit)
    if u not in _TO_SI:
        raise RejectedInputError(f"unknown unit tag {unit!r}")
    return u


def to_si(value: float, unit: str) -> float:
    """Convert a display-unit scalar to SI."""
    return value * _TO_SI[canonical_unit(unit)]


def from_si(value: float, unit: str) -> float:
    """Convert an SI scalar to the given display unit."""
    return value / _TO_SI[canonical_unit(unit)]
