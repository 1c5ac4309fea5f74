"""1-D cross-section analysis: grayscale landmark extraction, height-profile
metrics, material-flow integration, and the averaging filter.

A cross-section is a uniformly pitched sequence of (position, value) samples,
either a grayscale scan (0-255) or a height profile (m).  Extraction returns
a LineMetrics carrying confidence flags instead of raising when the line is
absent or a landmark cannot be found.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError
from .units import from_si, to_si

#: Local-extremum prominence floor in grayscale levels.
PROMINENCE = 2.0

#: Overspray threshold: value returned to within 95% of the background.
BACKGROUND_FRACTION = 0.95

#: Height-profile linewidth rules: width at 80% of the peak, scaled by the
#: profile-to-print calibration ratio; overspray at 1% of the edge height.
PEAK_FRACTION = 0.8
WIDTH_RATIO = 2.1
WIDTH_RATIO_SIGMA = 0.32
OVERSPRAY_FRACTION = 0.01


@dataclass(frozen=True)
class CrossSection:
    """Uniformly sampled cross-section perpendicular to the print path."""

    positions: np.ndarray  # [m], strictly increasing, uniform pitch
    values: np.ndarray     # grayscale level or height [m]
    kind: str              # "grayscale" | "height"

    def __post_init__(self):
        r = np.asarray(self.positions, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.size < 4 or v.shape != r.shape:
            raise RejectedInputError("cross-section needs matching 1-D arrays")
        d = np.diff(r)
        if np.any(d <= 0):
            raise RejectedInputError("positions must be strictly increasing")
        pitch = d[0]
        if np.any(np.abs(d - pitch) > 1e-9 * pitch):
            raise RejectedInputError("positions must be uniformly pitched")
        if self.kind not in ("grayscale", "height"):
            raise RejectedInputError(f"unknown cross-section kind {self.kind!r}")
        object.__setattr__(self, "positions", r)
        object.__setattr__(self, "values", v)

    @property
    def pitch(self) -> float:
        return float(self.positions[1] - self.positions[0])


@dataclass(frozen=True)
class LineMetrics:
    """Extracted line geometry with landmark confidence flags."""

    L_w: float = float("nan")
    L_o: float = float("nan")
    center: float = float("nan")
    found: bool = False
    flags: frozenset = field(default_factory=frozenset)
    lw_rel_sigma: float = 0.0  # relative spread of the width calibration

    @classmethod
    def no_line(cls) -> "LineMetrics":
        return cls()


def moving_average(series, length: int):
    """Centered moving mean; edge windows truncate to the available samples."""
    if length < 1:
        raise RejectedInputError("length must be >= 1")
    v = np.asarray(series, dtype=float)
    if length == 1:
        return v.copy()
    n = v.size
    left = (length - 1) // 2
    right = length // 2
    csum = np.concatenate(([0.0], np.cumsum(v)))
    idx = np.arange(n)
    lo = np.maximum(idx - left, 0)
    hi = np.minimum(idx + right, n - 1)
    return (csum[hi + 1] - csum[lo]) / (hi - lo + 1)


# ---------------------------------------------------------------------------
# Grayscale landmark extraction
# ---------------------------------------------------------------------------

def _running_extremum_outward(v, start, stop, step, mode, prominence):
    """First local extremum from start toward stop (exclusive), detected once
    the profile moves away from it by `prominence`.  Returns index or None."""
    best = v[start]
    best_i = start
    i = start
    while i != stop:
        i += step
        val = v[i]
        if mode == "min":
            if val < best:
                best, best_i = val, i
            elif val - best >= prominence:
                return best_i
        else:
            if val > best:
                best, best_i = val, i
            elif best - val >= prominence:
                return best_i
    return None


def _plateau_center(v, region):
    """Index of the middle of the maximal run inside region (slice)."""
    seg = v[region]
    m = seg.max()
    idx = np.flatnonzero(seg >= m - 1e-12)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    run = max(runs, key=len)
    return region.start + int(run[(len(run) - 1) // 2])


def _extract_single(r, v, background, std_profile=None):
    n = v.size
    vs = moving_average(v, 3)
    third = slice(n // 3, n - n // 3)
    if vs[third].max() - vs.min() < PROMINENCE:
        return LineMetrics.no_line()
    center_i = _plateau_center(vs, third)
    flags = {"center"}
    threshold = BACKGROUND_FRACTION * background

    lw_pos = {}
    ov_pos = {}
    for side, step, stop in (("left", -1, 0), ("right", +1, n - 1)):
        min_i = _running_extremum_outward(vs, center_i, stop, step, "min",
                                          PROMINENCE)
        if min_i is None:
            continue
        flags.add(f"min_{side}")
        sh_i = _running_extremum_outward(vs, min_i, stop, step, "max",
                                         PROMINENCE)
        if sh_i is not None:
            flags.add(f"shoulder_{side}")
        elif std_profile is not None:
            # batch fallback: take the first variance peak beyond the minimum
            ss = moving_average(std_profile, 3)
            sh_i = _running_extremum_outward(ss, min_i, stop, step, "max",
                                             1e-12)
            if sh_i is not None:
                flags.add(f"shoulder_{side}_std")
        if sh_i is None:
            continue
        lw_pos[side] = r[sh_i]
        # overspray: first sample at/beyond the shoulder back within 95% of
        # the background; bounded at the cross-section edge
        i = sh_i
        found = None
        while True:
            if v[i] >= threshold:
                found = i
                break
            if i == stop:
                break
            i += step
        if found is not None:
            ov_pos[side] = r[found]
            flags.add(f"overspray_{side}")

    if "left" not in lw_pos or "right" not in lw_pos:
        return LineMetrics(center=r[center_i], found=False,
                           flags=frozenset(flags))
    L_w = lw_pos["right"] - lw_pos["left"]
    L_o = (ov_pos["right"] - ov_pos["left"]
           if "left" in ov_pos and "right" in ov_pos else float("nan"))
    return LineMetrics(L_w=L_w, L_o=L_o,
                       center=0.5 * (lw_pos["left"] + lw_pos["right"]),
                       found=True, flags=frozenset(flags))


def estimate_background(values) -> float:
    """Background level from the outer 10% of samples on each side."""
    v = np.asarray(values, dtype=float)
    k = max(2, v.size // 10)
    return float(np.median(np.concatenate([v[:k], v[-k:]])))


def extract_grayscale_metrics(cs: CrossSection, background: float = None,
                              batch: int = 50, stack=None):
    """Locate the line landmarks in a grayscale cross-section.

    With ``stack`` (a (n_positions, n_columns) array of grayscale columns),
    columns are grouped into batches of ``batch``, each batch reduced to its
    mean and standard-deviation profiles, and one LineMetrics returned per
    batch (the variance profile serves as the shoulder fallback).  For a
    single cross-section the batch size is effectively 1.
    """
    if cs.kind != "grayscale":
        raise RejectedInputError("grayscale extraction needs a grayscale section")
    if stack is not None:
        stack = np.asarray(stack, dtype=float)
        if stack.ndim != 2 or stack.shape[0] != cs.positions.size:
            raise RejectedInputError("stack must be (n_positions, n_columns)")
        if batch < 1:
            raise RejectedInputError("batch must be >= 1")
        out = []
        for j in range(0, stack.shape[1], batch):
            cols = stack[:, j:j + batch]
            mean = cols.mean(axis=1)
            std = cols.std(axis=1)
            bg = background if background is not None else estimate_background(mean)
            out.append(_extract_single(cs.positions, mean, bg, std))
        return out
    bg = background if background is not None else estimate_background(cs.values)
    return _extract_single(cs.positions, cs.values, bg)


# ---------------------------------------------------------------------------
# Height-profile metrics
# ---------------------------------------------------------------------------

def _interp_at(r, v, pos):
    return float(np.interp(pos, r, v))


def cfd_profile_metrics(cs: CrossSection) -> LineMetrics:
    """Line metrics from a height profile using the 80%-width rule.

    The body width b is the widest contiguous run above 80% of the peak,
    scaled by the 2.1 calibration ratio; overspray endpoints sit where the
    profile falls to 1% of the height at each linewidth edge.
    """
    if cs.kind != "height":
        raise RejectedInputError("height metrics need a height section")
    r, h = cs.positions, cs.values
    h_max = h.max()
    if not h_max > 0:
        return LineMetrics.no_line()
    above = h > PEAK_FRACTION * h_max
    idx = np.flatnonzero(above)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    run = max(runs, key=lambda a: r[a[-1]] - r[a[0]])
    b = r[run[-1]] - r[run[0]]
    center = 0.5 * (r[run[0]] + r[run[-1]])
    L_w = WIDTH_RATIO * b
    flags = {"center", "shoulder_left", "shoulder_right"}

    ov = {}
    for side, edge_pos, step, stop in (("left", center - 0.5 * L_w, -1, 0),
                                       ("right", center + 0.5 * L_w, +1,
                                        h.size - 1)):
        h_edge = _interp_at(r, h, edge_pos)
        threshold = OVERSPRAY_FRACTION * h_edge
        i = int(np.searchsorted(r, edge_pos))
        i = min(max(i, 0), h.size - 1)
        found = None
        while True:
            if h[i] <= threshold:
                found = i
                break
            if i == stop:
                break
            i += step
        if found is not None:
            ov[side] = r[found]
            flags.add(f"overspray_{side}")
    L_o = (ov["right"] - ov["left"] if len(ov) == 2 else float("nan"))
    if len(ov) == 2:
        L_o = max(L_o, L_w)
    return LineMetrics(L_w=L_w, L_o=L_o, center=center, found=True,
                       flags=frozenset(flags),
                       lw_rel_sigma=WIDTH_RATIO_SIGMA / WIDTH_RATIO)


def material_flow(cs: CrossSection, platen_speed: float) -> float:
    """Deposited volume flow Q_m = v * integral h dr by the trapezoid rule."""
    if cs.kind != "height":
        raise RejectedInputError("material flow needs a height section")
    return float(platen_speed * np.trapezoid(cs.values, cs.positions))


# ---------------------------------------------------------------------------
# Cross-section file format
# ---------------------------------------------------------------------------

def write_cross_section(cs: CrossSection, path) -> None:
    """Two-column text: header names kind and pitch, rows are position,value.

    Heights are stored in um; grayscale values are raw levels.
    """
    lines = [f"kind={cs.kind},pitch[um]={float(from_si(cs.pitch, 'um'))!r}"]
    for r, v in zip(cs.positions, cs.values):
        val = float(from_si(float(v), "um")) if cs.kind == "height" else float(v)
        lines.append(f"{float(from_si(float(r), 'um'))!r},{val!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_cross_section(path) -> CrossSection:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise RejectedInputError("empty cross-section file")
    header = dict(part.split("=", 1) for part in lines[0].split(","))
    if "kind" not in header or "pitch[um]" not in header:
        raise RejectedInputError("header must name kind and pitch")
    kind = header["kind"]
    rows = [ln.split(",") for ln in lines[1:]]
    if any(len(row) != 2 for row in rows):
        raise RejectedInputError("expected two columns (position, value)")
    r = np.array([to_si(float(a), "um") for a, _ in rows])
    vals = np.array([float(b) for _, b in rows])
    if kind == "height":
        vals = vals * 1e-6
    return CrossSection(positions=r, values=vals, kind=kind)
