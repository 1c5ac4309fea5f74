"""Deterministic physics kernels of the twin.

Droplet-size distribution, tube/nozzle deposition survival probabilities,
net aerosol generation, the state drift field f, the output map g, the
fluidic-resistance pressure network, and finite-difference Jacobians.

All functions are pure and accept either the frozen value types or plain
arrays; array inputs broadcast over leading batch axes, which is what keeps
the filter's Jacobian evaluations cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (BlockedTubeError, CloggedNozzleError,
                     DegenerateHeadspaceError, NumericalDifferentiationError,
                     RejectedInputError, UndefinedTransportError)
from .params import GeometryConstants, ModelParameters, QuadratureSpec
from .types import InputVector, StateVector
from .units import SCCM

# Log-space spread of the droplet-diameter distribution.  The standard
# deviation of d_a is pinned to 1/4 of the median, which for a log-normal
# gives exp(s^2)*(exp(s^2)-1) = 1/16.
LOG_SIGMA_DA = math.sqrt(math.log((1.0 + math.sqrt(1.25)) / 2.0))

_DEFAULT_PARAMS = ModelParameters()


def _arr(x, n):
    a = x.as_array() if hasattr(x, "as_array") else np.asarray(x, dtype=float)
    if a.shape[-1] != n:
        raise RejectedInputError(f"expected trailing dimension {n}, got {a.shape}")
    return a


# ---------------------------------------------------------------------------
# Droplet-size distribution and quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DropletDistribution:
    """Log-normal droplet-diameter distribution pinned by its median.

    Normalization over the sizer range [0.1, 20] um holds to better than
    1e-6 for medians roughly in [0.35, 6] um; outside, probability mass
    leaves the integration window.
    """

    median: float  # [m]
    mu: float      # mean of ln(d_a)
    sigma: float   # std of ln(d_a)

    @classmethod
    def from_median(cls, median: float) -> "DropletDistribution":
        if not median > 0:
            raise RejectedInputError("median diameter must be positive")
        return cls(median=float(median), mu=math.log(median), sigma=LOG_SIGMA_DA)

    def mode(self) -> float:
        return math.exp(self.mu - self.sigma ** 2)


def lognormal_pdf(d_a, dist: DropletDistribution):
    """Probability density of the droplet diameter [1/m]."""
    d = np.asarray(d_a, dtype=float)
    if np.any(d <= 0):
        raise RejectedInputError("droplet diameter must be positive")
    z = (np.log(d) - dist.mu) / dist.sigma
    return np.exp(-0.5 * z * z) / (d * dist.sigma * math.sqrt(2.0 * math.pi))


def _lognormal_pdf_batch(d, median):
    """pdf broadcast over batch medians; d (n,), median (...,1)."""
    z = (np.log(d) - np.log(median)) / LOG_SIGMA_DA
    return np.exp(-0.5 * z * z) / (d * LOG_SIGMA_DA * math.sqrt(2.0 * math.pi))


class QuadratureRule:
    """Gauss-Legendre rule on ln(d_a) used for every diameter integral."""

    def __init__(self, spec: QuadratureSpec = None, n_nodes: int = None):
        spec = spec or QuadratureSpec()
        n = int(n_nodes or spec.n_nodes)
        s, w = np.polynomial.legendre.leggauss(n)
        lo, hi = math.log(spec.d_lo), math.log(spec.d_hi)
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        self.log_nodes = mid + half * s
        self.d_nodes = np.exp(self.log_nodes)       # diameters [m]
        self.log_weights = half * w                  # weights on ln d
        # For integrals in d: dd = d * d(ln d)
        self.d_weights = self.log_weights * self.d_nodes
        # diffusion-capture node values are state independent, so they are
        # memoized per (flow, length, gas constants)
        self._diffusion_cache = {}

    def integrate(self, values) -> np.ndarray:
        """Integrate values(d) * dd where values has trailing node axis."""
        return np.asarray(values) @ self.d_weights

    def expect(self, values, median):
        """Integrate values(d) against the droplet pdf for given median(s)."""
        med = np.asarray(median, dtype=float)[..., None]
        p = _lognormal_pdf_batch(self.d_nodes, med)
        return (np.asarray(values) * p) @ self.d_weights


_DEFAULT_QUAD = QuadratureRule()


# ---------------------------------------------------------------------------
# Survival probabilities
# ---------------------------------------------------------------------------

def settling_velocity(d_a, geom: GeometryConstants):
    """Terminal settling velocity of a droplet in the carrier gas [m/s]."""
    d = np.asarray(d_a, dtype=float)
    return geom.rho_p * d * d * geom.g * geom.C_c / (18.0 * geom.eta_g)


def survival_gravitational(d_a, Q_c, dr_T, geom: GeometryConstants = None):
    """Probability a droplet traverses the tube without settling out.

    P = (2/pi) * (a*b + asin(b) - 2 a^3 b) with a^3 = 3 L mu_TS / (8 mu_a r)
    and b = sqrt(1 - a^2); a >= 1 means every droplet settles.
    """
    geom = geom or _DEFAULT_PARAMS.geometry
    if np.any(np.asarray(Q_c) <= 0):
        raise UndefinedTransportError("gravitational survival needs Q_c > 0")
    if np.any(np.asarray(dr_T) >= geom.r_T0):
        raise BlockedTubeError("tube deposition has reached the tube radius")
    d = np.asarray(d_a, dtype=float)
    r = geom.r_T0 - np.asarray(dr_T, dtype=float)
    mu_ts = settling_velocity(d, geom)
    mu_a = np.asarray(Q_c, dtype=float) / (math.pi * r * r)
    a3 = 3.0 * geom.L_T * mu_ts / (8.0 * mu_a * r)
    a = np.clip(np.cbrt(a3), 0.0, 1.0)
    b = np.sqrt(np.clip(1.0 - a * a, 0.0, 1.0))
    return (2.0 / math.pi) * (a * b + np.arcsin(b) - 2.0 * a ** 3 * b)


def stokes_einstein_D(d_a, geom: GeometryConstants = None):
    """Brownian diffusivity of a droplet [m^2/s]."""
    geom = geom or _DEFAULT_PARAMS.geometry
    d = np.asarray(d_a, dtype=float)
    if np.any(d <= 0):
        raise RejectedInputError("droplet diameter must be positive")
    return geom.k_B * geom.T_amb * geom.C_c / (2.0 * math.pi * geom.eta_g * d)


def critical_radius(rhs):
    """Solve (1-x)^3 (1+x) = rhs for x in [0, 1] by bisection.

    The quartic is strictly decreasing on [0, 1], so the root is unique.
    Bisection runs to machine precision; rhs >= 1 maps to x = 0 and
    rhs <= 0 to x = 1.
    """
    c = np.asarray(rhs, dtype=float)
    lo = np.zeros_like(c)
    hi = np.ones_like(c)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        q = (1.0 - mid) ** 3 * (1.0 + mid)
        too_high = q > c  # q decreasing: root lies above mid
        lo = np.where(too_high, mid, lo)
        hi = np.where(too_high, hi, mid)
    x = 0.5 * (lo + hi)
    x = np.where(c >= 1.0, 0.0, x)
    x = np.where(c <= 0.0, 1.0, x)
    return x


def survival_diffusion(d_a, Q_total, L, geom: GeometryConstants = None):
    """Probability a droplet traverses a duct of length L without diffusing
    to the wall: P = x_c^2 (2 - x_c^2)."""
    geom = geom or _DEFAULT_PARAMS.geometry
    if np.any(np.asarray(Q_total) <= 0):
        raise UndefinedTransportError("diffusion survival needs Q > 0")
    rhs = math.pi * np.asarray(L, dtype=float) * stokes_einstein_D(d_a, geom) \
        / np.asarray(Q_total, dtype=float)
    x = critical_radius(rhs)
    return x * x * (2.0 - x * x)


# ---------------------------------------------------------------------------
# Deposition rates (physics terms only; drift/noise added by callers)
# ---------------------------------------------------------------------------

def tube_deposition_rate(x, u, params: ModelParameters = None,
                         quad: QuadratureRule = None):
    """Radial tube deposition rate [m/s] from gravitational capture."""
    params = params or _DEFAULT_PARAMS
    quad = quad or _DEFAULT_QUAD
    geom = params.geometry
    X, U = _arr(x, 5), _arr(u, 3)
    da, drT, phiA = X[..., 0], X[..., 2], X[..., 4]
    Qc = U[..., 1]
    if np.any(drT >= geom.r_T0):
        raise BlockedTubeError("tube deposition has reached the tube radius")
    Qd = phiA * Qc
    if np.all(Qd == 0.0):
        return np.zeros(np.broadcast(da, Qc).shape)
    surv = survival_gravitational(quad.d_nodes, Qc[..., None],
                                  drT[..., None], geom)
    captured = quad.expect(1.0 - surv, da)
    pref = Qd / (2.0 * math.pi * (geom.r_T0 - drT) * geom.L_T)
    return pref * captured


def _diffusion_capture_nodes(quad: QuadratureRule, qtot: float,
                             geom: GeometryConstants) -> np.ndarray:
    """(1 - P_diff) at the quadrature nodes, memoized per flow/geometry."""
    key = (qtot, geom.L_N, geom.k_B, geom.T_amb, geom.C_c, geom.eta_g)
    hit = quad._diffusion_cache.get(key)
    if hit is None:
        hit = 1.0 - survival_diffusion(quad.d_nodes, qtot, geom.L_N, geom)
        quad._diffusion_cache[key] = hit
    return hit


def nozzle_deposition_rate(x, u, params: ModelParameters = None,
                           quad: QuadratureRule = None):
    """Radial nozzle deposition rate [m/s] from diffusive capture."""
    params = params or _DEFAULT_PARAMS
    quad = quad or _DEFAULT_QUAD
    geom = params.geometry
    X, U = _arr(x, 5), _arr(u, 3)
    da, drN, phiA = X[..., 0], X[..., 3], X[..., 4]
    Qc, Qs = U[..., 1], U[..., 2]
    if np.any(drN >= geom.r_N0):
        raise CloggedNozzleError("nozzle deposition has reached the nozzle radius")
    Qtot = np.asarray(Qc + Qs, dtype=float)
    if np.any(Qtot <= 0):
        raise UndefinedTransportError("nozzle transport needs Q_c + Q_s > 0")
    Qd = phiA * Qc
    if np.all(Qd == 0.0):
        return np.zeros(np.broadcast(da, Qtot).shape)
    if Qtot.ndim == 0:
        capture = _diffusion_capture_nodes(quad, float(Qtot), geom)
    else:
        uniq, inverse = np.unique(Qtot, return_inverse=True)
        stack = np.stack([_diffusion_capture_nodes(quad, float(q), geom)
                          for q in uniq])
        capture = stack[inverse.reshape(Qtot.shape)]
    captured = quad.expect(capture, da)
    pref = Qd / (2.0 * math.pi * (geom.r_N0 - drN) * geom.L_N)
    return pref * captured


# ---------------------------------------------------------------------------
# Aerosol generation
# ---------------------------------------------------------------------------

def net_generation_H(Q_c, V_l, I_A, params: ModelParameters = None):
    """Net droplet-generation rate [m^3/s].

    The quadratic fit is evaluated in its own units (sccm, mL, mA ->
    um^3/s) and converted afterwards; re-deriving the coefficients in SI
    would silently change the fit.
    """
    params = params or _DEFAULT_PARAMS
    gen = params.generation
    qc = np.asarray(Q_c, dtype=float) / SCCM
    vl = np.asarray(V_l, dtype=float) / 1e-6
    ia = np.asarray(I_A, dtype=float) / 1e-3
    if np.any(~np.isfinite(qc)) or np.any(~np.isfinite(vl)) or np.any(~np.isfinite(ia)):
        raise RejectedInputError("non-finite generation inputs")
    h_um3 = (gen.c_qq * qc * qc + gen.c_vq * vl * qc + gen.c_qi * qc * ia
             + gen.c_iv * ia * vl + gen.c_v * vl + gen.c_q * qc
             + gen.c_i * ia + gen.c_0)
    return h_um3 * 1e-18


def generation_extrapolating(Q_c, V_l, I_A, params: ModelParameters = None):
    """True where inputs fall outside the generation fit's design box."""
    params = params or _DEFAULT_PARAMS
    gen = params.generation
    qc = np.asarray(Q_c, dtype=float) / SCCM
    vl = np.asarray(V_l, dtype=float) / 1e-6
    ia = np.asarray(I_A, dtype=float) / 1e-3
    out = (qc < gen.box_qc[0]) | (qc > gen.box_qc[1])
    out |= (vl < gen.box_vl[0]) | (vl > gen.box_vl[1])
    out |= (ia < gen.box_ia[0]) | (ia > gen.box_ia[1])
    return out


# ---------------------------------------------------------------------------
# State drift field and Euler stepping
# ---------------------------------------------------------------------------

def transition_f(x, u, theta=None, params: ModelParameters = None,
                 quad: QuadratureRule = None):
    """Continuous-time drift field f(x, u; theta) without noise [SI/s].

    The mass-balance inside the phi_A equation uses the physical vial rate
    -phi_A*Q_c (not the theta-augmented one), which keeps each drift
    coefficient confined to its own state equation.
    """
    params = params or _DEFAULT_PARAMS
    quad = quad or _DEFAULT_QUAD
    geom = params.geometry
    X, U = _arr(x, 5), _arr(u, 3)
    th = (theta if theta is not None else params.theta)
    th = th.as_array() if hasattr(th, "as_array") else np.asarray(th, dtype=float)

    da, Vl, drT, drN, phiA = (X[..., i] for i in range(5))
    Ia, Qc, Qs = (U[..., i] for i in range(3))
    if np.any(Vl >= geom.V_v):
        raise DegenerateHeadspaceError("vial liquid volume reached vial volume")

    d_da = th[0] * da
    dVl_phys = -phiA * Qc
    d_Vl = dVl_phys + th[1] * Vl
    d_drT = th[2] * drT + tube_deposition_rate(X, U, params, quad)
    d_drN = th[3] * drN + nozzle_deposition_rate(X, U, params, quad)
    H = net_generation_H(Qc, Vl, Ia, params)
    d_phiA = (H - phiA * Qc + phiA * dVl_phys) / (geom.V_v - Vl) + th[4] * phiA

    return np.stack([np.broadcast_to(d_da, d_drT.shape),
                     np.broadcast_to(d_Vl, d_drT.shape),
                     d_drT, d_drN,
                     np.broadcast_to(d_phiA, d_drT.shape)], axis=-1)


def physical_bounds(geom: GeometryConstants):
    """Invariant box the simulated truth is clamped to."""
    lo = np.array([1e-8, 0.0, 0.0, 0.0, 0.0])
    hi = np.array([np.inf, geom.V_v * (1.0 - 1e-3),
                   geom.r_T0 * (1.0 - 1e-9), geom.r_N0 * (1.0 - 1e-9), np.inf])
    return lo, hi


def filter_bounds(geom: GeometryConstants):
    """Estimation-only box: tube deposition may run slightly negative so the
    filter can absorb carrier-pressure drift as an apparent tube expansion."""
    lo, hi = physical_bounds(geom)
    lo = lo.copy()
    lo[2] = -0.2 * geom.r_T0
    return lo, hi


def step_euler(x, u, theta=None, dt: float = 1.0,
               params: ModelParameters = None, quad: QuadratureRule = None,
               bounds=None):
    """One explicit Euler step clamped to the invariant box.

    Returns (next_state, clamped) where clamped is a boolean mask over
    state components that hit a bound.
    """
    if dt < 0:
        raise RejectedInputError("dt must be non-negative")
    params = params or _DEFAULT_PARAMS
    X, U = _arr(x, 5), _arr(u, 3)
    if dt == 0.0:
        return X.copy(), np.zeros(X.shape, dtype=bool)
    lo, hi = bounds if bounds is not None else physical_bounds(params.geometry)
    raw = X + dt * transition_f(X, U, theta, params, quad)
    nxt = np.clip(raw, lo, hi)
    return nxt, nxt != raw


# ---------------------------------------------------------------------------
# Fluidic resistance network and pressures
# ---------------------------------------------------------------------------

def resistance_tube(dr_T, geom: GeometryConstants = None):
    """Carrier-tube fluidic resistance [Pa s/m^3]; quartic in the open radius."""
    geom = geom or _DEFAULT_PARAMS.geometry
    dr = np.asarray(dr_T, dtype=float)
    if np.any(dr >= geom.r_T0):
        raise BlockedTubeError("tube deposition has reached the tube radius")
    return 8.0 * geom.eta_ink * geom.L_T / (math.pi * (geom.r_T0 - dr) ** 4)


def resistance_nozzle_tip(dr_N, geom: GeometryConstants = None):
    """Nozzle-tip resistance [Pa s/m^3]: 7th-order polynomial in the
    deposition expressed in um (the fit's own basis, valid to 20 um)."""
    geom = geom or _DEFAULT_PARAMS.geometry
    z = np.asarray(dr_N, dtype=float) / 1e-6
    acc = np.zeros_like(z)
    for a in reversed(geom.tip_poly):
        acc = acc * z + a
    return acc


def nozzle_tip_extrapolating(dr_N):
    """True where the deposition leaves the tip polynomial's fitted range."""
    z = np.asarray(dr_N, dtype=float) / 1e-6
    return (z < 0.0) | (z > 20.0)


def pressures(x, u, geom: GeometryConstants = None):
    """MFC line pressures (P_c, P_s) [Pa] from the resistance network."""
    geom = geom or _DEFAULT_PARAMS.geometry
    X, U = _arr(x, 5), _arr(u, 3)
    drT, drN = X[..., 2], X[..., 3]
    Qc, Qs = U[..., 1], U[..., 2]
    r_nozzle = geom.R_1N + geom.R_2N + resistance_nozzle_tip(drN, geom)
    r_c = resistance_tube(drT, geom) + geom.R_1 + geom.R_2 + geom.R_3 + r_nozzle
    r_sh = (geom.R_1sh + geom.R_2sh + geom.R_3sh) / 2.0 + r_nozzle
    P_c = Qc * r_c + Qs * r_nozzle
    P_s = Qs * r_sh + Qc * r_nozzle
    return P_c, P_s


# ---------------------------------------------------------------------------
# Output map
# ---------------------------------------------------------------------------

def _line_metric(coeffs, da, phiA, drN, Qc, Qs):
    return (coeffs.alpha_da * da + coeffs.alpha_phiA * phiA
            + coeffs.alpha_drN1 * drN + coeffs.alpha_drN2 * drN ** 2
            + coeffs.alpha_drN3 * drN ** 3
            + coeffs.beta_c * Qc + coeffs.beta_s * Qs + coeffs.gamma)


def output_g(x, u, params: ModelParameters = None):
    """Deterministic mean output y = g(x, u) (SI, no noise)."""
    params = params or _DEFAULT_PARAMS
    X, U = _arr(x, 5), _arr(u, 3)
    da, drN, phiA = X[..., 0], X[..., 3], X[..., 4]
    Qc, Qs = U[..., 1], U[..., 2]
    L_w = _line_metric(params.output.lw, da, phiA, drN, Qc, Qs)
    L_o = _line_metric(params.output.ov, da, phiA, drN, Qc, Qs)
    P_c, P_s = pressures(X, U, params.geometry)
    Q_m = params.output.phi_m * phiA * Qc
    shape = np.broadcast(L_w, P_c).shape
    return np.stack([np.broadcast_to(v, shape)
                     for v in (L_w, L_o, P_c, P_s, Q_m)], axis=-1)


# ---------------------------------------------------------------------------
# Finite-difference Jacobians
# ---------------------------------------------------------------------------

def _fd_steps(x):
    return np.maximum(1e-7 * np.abs(x), 1e-12)


def _central_jacobian(func, x, rel=1.0):
    """5x5 central-difference Jacobian of func: R^5 -> R^5 at x.

    One batched call evaluates all perturbed states; rel scales the default
    per-component step (the independent oracle uses rel = 0.1).
    """
    x = np.asarray(x, dtype=float)
    h = _fd_steps(x) * rel
    pts = np.repeat(x[None, :], 10, axis=0)
    for i in range(5):
        pts[2 * i, i] += h[i]
        pts[2 * i + 1, i] -= h[i]
    vals = func(pts)
    jac = np.empty((5, 5))
    for i in range(5):
        jac[:, i] = (vals[2 * i] - vals[2 * i + 1]) / (2.0 * h[i])
    if not np.all(np.isfinite(jac)):
        raise NumericalDifferentiationError("non-finite Jacobian entries")
    return jac


def jacobian_F(x, u, theta=None, params: ModelParameters = None,
               quad: QuadratureRule = None, step_scale: float = 1.0):
    """d f / d x of the continuous drift field (central differences)."""
    X, U = _arr(x, 5), _arr(u, 3)
    return _central_jacobian(
        lambda pts: transition_f(pts, U, theta, params, quad), X, step_scale)


def transition_with_jacobian(x, u, theta=None, params: ModelParameters = None,
                             quad: QuadratureRule = None):
    """(f(x, u), d f/d x) from a single 11-row batched evaluation."""
    X, U = _arr(x, 5), _arr(u, 3)
    h = _fd_steps(X)
    pts = np.repeat(X[None, :], 11, axis=0)
    for i in range(5):
        pts[2 * i, i] += h[i]
        pts[2 * i + 1, i] -= h[i]
    vals = transition_f(pts, U, theta, params, quad)
    jac = np.empty((5, 5))
    for i in range(5):
        jac[:, i] = (vals[2 * i] - vals[2 * i + 1]) / (2.0 * h[i])
    if not np.all(np.isfinite(jac)):
        raise NumericalDifferentiationError("non-finite Jacobian entries")
    return vals[10], jac


def jacobian_H(x, u, params: ModelParameters = None, step_scale: float = 1.0):
    """d g / d x of the output map (central differences)."""
    X, U = _arr(x, 5), _arr(u, 3)
    return _central_jacobian(lambda pts: output_g(pts, U, params), X, step_scale)


# Convenience wrappers returning value types -------------------------------

def output_vector(x: StateVector, u: InputVector,
                  params: ModelParameters = None):
    from .types import OutputVector
    return OutputVector.from_array(output_g(x, u, params))
