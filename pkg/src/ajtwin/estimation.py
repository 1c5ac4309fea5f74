"""Inference stack of the twin: constrained initial-state fit, extended
Kalman filtering, RTS smoothing, EM drift calibration, open-loop
forecasting, and innovation-based anomaly scoring.

Internally the filter works in conditioned coordinates: states are divided
by nominal magnitudes and outputs are whitened by their noise standard
deviations.  That keeps every covariance O(1) despite state scales spanning
thirteen orders of magnitude.  All public results are exposed in SI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .errors import (CalibrationError, ConditioningError, InitializationError,
                     RejectedInputError)
from .params import ModelParameters
from .physics import (QuadratureRule, filter_bounds, jacobian_H, output_g,
                      step_euler, transition_f, transition_with_jacobian)
from .types import (InputVector, StateVector, ThetaParams, check_uniform_dt,
                    records_to_arrays)

#: Default vial fill when the level is not otherwise known.  The vial level
#: does not enter the output map, so it cannot be identified from a static
#: window; it is carried as configuration.
V_L_NOMINAL = 1e-6

#: Prior covariance factor: P0 = (10 sigma_xi)^2 per state.
P0_STD_FACTOR = 10.0

_CHI2_95 = {m: float(chi2.ppf(0.95, m)) for m in range(1, 6)}


def _state_arr(x):
    return x.as_array() if hasattr(x, "as_array") else np.asarray(x, dtype=float)


def _sym(P):
    return 0.5 * (P + P.T)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class FilterResult:
    """Per-step beliefs and innovations of one EKF pass.

    Arrays with suffix ``_n`` live in normalized state coordinates; the
    ``*_si`` properties convert back.  Innovations and their covariances are
    whitened per-output (unit noise variance), which leaves NIS unchanged.
    """

    t: np.ndarray
    us: np.ndarray                 # SI inputs (n, 3)
    ys: np.ndarray                 # SI outputs with NaN for missing (n, 5)
    xs_pred_n: np.ndarray          # predicted means (n, 5)
    Ps_pred_n: np.ndarray          # predicted covariances (n, 5, 5)
    xs_filt_n: np.ndarray
    Ps_filt_n: np.ndarray
    Fs_disc_n: np.ndarray          # discrete transition Jacobians at filtered states
    innovations: list              # whitened innovation per step (m_k,)
    S_matrices: list               # whitened innovation covariance per step
    obs_masks: np.ndarray          # (n, 5) bool
    nis: np.ndarray                # (n,)
    scales: np.ndarray
    dt: float
    theta: ThetaParams

    def _to_si_states(self, xs):
        return xs * self.scales

    def _to_si_covs(self, Ps):
        D = self.scales
        return Ps * D[None, :, None] * D[None, None, :]

    @property
    def states_si(self):
        return self._to_si_states(self.xs_filt_n)

    @property
    def covariances_si(self):
        return self._to_si_covs(self.Ps_filt_n)

    @property
    def predicted_states_si(self):
        return self._to_si_states(self.xs_pred_n)

    @property
    def predicted_covariances_si(self):
        return self._to_si_covs(self.Ps_pred_n)

    def belief(self, k: int):
        from .types import GaussianBelief
        return GaussianBelief(StateVector.from_array(self.states_si[k]),
                              self.covariances_si[k])


@dataclass
class SmootherResult:
    """Backward-pass beliefs; same coordinate conventions as FilterResult."""

    t: np.ndarray
    xs_smooth_n: np.ndarray
    Ps_smooth_n: np.ndarray
    gains_n: np.ndarray
    scales: np.ndarray

    @property
    def states_si(self):
        return self.xs_smooth_n * self.scales

    @property
    def covariances_si(self):
        D = self.scales
        return self.Ps_smooth_n * D[None, :, None] * D[None, None, :]


@dataclass
class CalibrationReport:
    """EM trajectory: drift estimates and M-step objective per iteration."""

    thetas: list = field(default_factory=list)       # ThetaParams per iterate
    objectives: list = field(default_factory=list)   # (pre, post) per iteration
    converged: bool = False
    n_iterations: int = 0

    @property
    def theta(self) -> ThetaParams:
        return self.thetas[-1]

    def to_text(self) -> str:
        lines = ["em calibration report",
                 f"iterations = {self.n_iterations}",
                 f"converged = {self.converged}"]
        for i, (pre, post) in enumerate(self.objectives):
            lines.append(f"iter {i}: objective {pre!r} -> {post!r}")
        th = self.theta.as_array()
        names = ("theta_da", "theta_Vl", "theta_drT", "theta_drN", "theta_phiA")
        for n, v in zip(names, th):
            lines.append(f"{n} = {v!r} 1/s")
        return "\n".join(lines) + "\n"


@dataclass
class ForecastResult:
    """Open-loop prediction: per-step state and output beliefs (SI)."""

    t: np.ndarray
    state_means: np.ndarray    # (K, 5)
    state_covs: np.ndarray     # (K, 5, 5)
    output_means: np.ndarray   # (K, 5)
    output_covs: np.ndarray    # (K, 5, 5)
    clamped: np.ndarray        # (K, 5) bool


# ---------------------------------------------------------------------------
# Initial-state fit
# ---------------------------------------------------------------------------

def _window_objective(z, us, ys, masks, params, sigma_w, v_l):
    """Whitened residual vector over the window for free coords z = (da_n, phiA_n)."""
    scales = params.scales()
    x = np.array([z[0] * scales[0], v_l, 0.0, 0.0, z[1] * scales[4]])
    preds = output_g(x, us, params)
    res = (ys - preds) / sigma_w
    return res[masks]


def initial_fit(records, params: ModelParameters = None,
                v_l_nominal: float = V_L_NOMINAL,
                max_iterations: int = 200):
    """Fit a static state to the first window of records.

    Minimizes the noise-weighted output mismatch subject to zero tube and
    nozzle deposition.  The vial level never enters the output map, so it is
    fixed at ``v_l_nominal``; droplet size and aerosol fraction are found by
    damped Gauss-Newton from 8 starts spanning their valid ranges.

    Returns (state, P0): the fitted state and a prior covariance for the
    filter built from the fit's own Gauss-Newton uncertainty (std doubled to
    cover the static-window assumption) plus fixed priors for the
    unidentified components.
    """
    params = params or ModelParameters()
    if len(records) < 2:
        raise RejectedInputError("initial-state fit needs at least 2 records")
    _, us, ys = records_to_arrays(records)
    masks = ~np.isnan(ys)
    if not masks.any():
        raise RejectedInputError("initial-state fit needs observed outputs")
    sigma_w = np.asarray(params.noise.sigma_w, dtype=float)
    scales = params.scales()

    # free-coordinate box (normalized): d_a in [0.2, 20] um, phi_A in [0, 1e-4]
    lo = np.array([0.2e-6 / scales[0], 0.0])
    hi = np.array([20e-6 / scales[0], 1e-4 / scales[4]])
    da_starts = np.array([1e-6, 2.5e-6, 4e-6, 5.5e-6]) / scales[0]
    phi_starts = np.array([1e-7, 1e-6]) / scales[4]
    starts = [np.array([d, p]) for d in da_starts for p in phi_starts]

    def objective(z):
        r = _window_objective(z, us, ys, masks, params, sigma_w, v_l_nominal)
        return float(r @ r), r

    def jacobian(z):
        J = np.empty((n_res, 2))
        for i in range(2):
            h = max(1e-6 * abs(z[i]), 1e-9)
            zp, zm = z.copy(), z.copy()
            zp[i] += h
            zm[i] -= h
            J[:, i] = (_window_objective(zp, us, ys, masks, params, sigma_w,
                                         v_l_nominal)
                       - _window_objective(zm, us, ys, masks, params,
                                           sigma_w, v_l_nominal)) / (2 * h)
        return J

    n_res = int(masks.sum())
    best = None
    for z0 in starts:
        z = z0.copy()
        obj, r = objective(z)
        lam = 1e-3
        converged = False
        for _ in range(max_iterations):
            J = jacobian(z)
            g = J.T @ r
            A = J.T @ J
            stepped = False
            for _ in range(25):
                try:
                    delta = -np.linalg.solve(A + lam * np.eye(2), g)
                except np.linalg.LinAlgError:
                    lam *= 10.0
                    continue
                z_new = np.clip(z + delta, lo, hi)
                obj_new, r_new = objective(z_new)
                if obj_new <= obj:
                    step_norm = float(np.linalg.norm(z_new - z))
                    improvement = obj - obj_new
                    z, obj, r = z_new, obj_new, r_new
                    lam = max(lam / 3.0, 1e-12)
                    stepped = True
                    if step_norm < 1e-10 * max(1.0, float(np.linalg.norm(z))) \
                            or improvement < 1e-14 * max(obj, 1e-30):
                        converged = True
                    break
                lam *= 10.0
            if converged or not stepped:
                converged = converged or not stepped
                break
        cand = (obj, z.copy(), converged)
        if best is None or cand[0] < best[0]:
            best = cand

    obj, z, converged = best
    x = StateVector(z[0] * scales[0], v_l_nominal, 0.0, 0.0, z[1] * scales[4])
    if not converged:
        raise InitializationError("initial-state fit did not converge",
                                  best_state=x, best_objective=obj)

    # prior covariance from the fit curvature (whitened residuals -> the GN
    # normal matrix is the information matrix of the free coordinates)
    J = jacobian(z)
    A = J.T @ J
    try:
        cov_z = np.linalg.inv(A + 1e-12 * np.eye(2))
    except np.linalg.LinAlgError:
        cov_z = np.diag([1.0, 1.0])
    P0 = np.zeros((5, 5))
    P0[0, 0] = 4.0 * cov_z[0, 0] * scales[0] ** 2
    P0[4, 4] = 4.0 * cov_z[1, 1] * scales[4] ** 2
    P0[0, 4] = P0[4, 0] = 4.0 * cov_z[0, 1] * scales[0] * scales[4]
    P0[1, 1] = (0.05e-6) ** 2      # vial level known to ~0.05 mL
    P0[2, 2] = (0.5e-6) ** 2       # tube deposition assumed clean +- 0.5 um
    P0[3, 3] = (1.0e-6) ** 2       # nozzle deposition assumed clean +- 1 um
    return x, P0


def estimate_initial_state(records, params: ModelParameters = None,
                           v_l_nominal: float = V_L_NOMINAL,
                           max_iterations: int = 200) -> StateVector:
    """Constrained initial-state fit (state only; see initial_fit)."""
    return initial_fit(records, params, v_l_nominal, max_iterations)[0]


# ---------------------------------------------------------------------------
# EKF
# ---------------------------------------------------------------------------

def default_prior_covariance(params: ModelParameters) -> np.ndarray:
    """Default P0 in SI: (10 sigma_xi)^2 on the diagonal."""
    s = np.asarray(params.noise.sigma_xi, dtype=float)
    return np.diag((P0_STD_FACTOR * s) ** 2)


class OnlineFilter:
    """Incremental EKF: one predict/update per arriving record.

    The batch runner, the live twin service and table replay all advance
    this same object, which is what makes export -> replay reproduce belief
    trajectories bitwise.
    """

    def __init__(self, x0, P0=None, theta: ThetaParams = None,
                 params: ModelParameters = None, quad: QuadratureRule = None):
        self.params = params or ModelParameters()
        self.quad = quad or QuadratureRule(self.params.quadrature)
        self.theta = theta or self.params.theta
        self.D = self.params.scales()
        self.sigma_w = np.asarray(self.params.noise.sigma_w, dtype=float)
        self.bounds = filter_bounds(self.params.geometry)
        self.x_n = _state_arr(x0) / self.D
        if P0 is None:
            P0 = default_prior_covariance(self.params)
        self.P_n = np.asarray(P0, dtype=float) / np.outer(self.D, self.D)
        self.last_t = None
        self.last_u = None
        self.step_index = -1

    def set_theta(self, theta: ThetaParams):
        self.theta = theta

    @property
    def state_si(self):
        return self.x_n * self.D

    @property
    def covariance_si(self):
        return self.P_n * np.outer(self.D, self.D)

    def belief(self):
        from .types import GaussianBelief
        return GaussianBelief(StateVector.from_array(self.state_si),
                              self.covariance_si)

    def advance(self, t, u_si, y_si):
        """Predict to time t (using the previous input) and fold in y.

        Returns a dict with the step's predicted/filtered beliefs, the
        whitened innovation and covariance, NIS and the discrete transition
        Jacobian used by the prediction (None on the first step).
        """
        t = float(t)
        u_si = np.asarray(u_si, dtype=float)
        y_si = np.asarray(y_si, dtype=float)
        D, eye = self.D, np.eye(5)
        Phi = None
        if self.last_t is not None:
            dt = t - self.last_t
            if dt <= 0:
                raise RejectedInputError("records must advance in time")
            lo, hi = self.bounds
            x_si = self.x_n * D
            f0, F_cont = transition_with_jacobian(x_si, self.last_u,
                                                  self.theta, self.params,
                                                  self.quad)
            Phi = eye + dt * (F_cont * np.outer(1.0 / D, D))
            self.x_n = np.clip(x_si + dt * f0, lo, hi) / D
            Sigma_xi_n = self.params.noise.Sigma_xi() / np.outer(D, D) * dt
            self.P_n = _sym(Phi @ self.P_n @ Phi.T + Sigma_xi_n)
        x_pred, P_pred = self.x_n.copy(), self.P_n.copy()

        mask = ~np.isnan(y_si)
        m = int(mask.sum())
        nu = np.empty(0)
        S = np.empty((0, 0))
        nis = 0.0
        if m > 0:
            H_si = jacobian_H(self.x_n * D, u_si, self.params)
            H = (H_si * D[None, :] / self.sigma_w[:, None])[mask]
            y_pred = output_g(self.x_n * D, u_si, self.params)
            nu = ((y_si - y_pred) / self.sigma_w)[mask]
            S = _sym(H @ self.P_n @ H.T + np.eye(m))
            try:
                S_chol = np.linalg.cholesky(S)
            except np.linalg.LinAlgError as exc:
                raise ConditioningError("singular innovation covariance",
                                        step=self.step_index + 1) from exc
            Sinv_nu = np.linalg.solve(S_chol.T, np.linalg.solve(S_chol, nu))
            K = np.linalg.solve(S_chol.T, np.linalg.solve(S_chol, H @ self.P_n)).T
            self.x_n = self.x_n + K @ nu
            IKH = eye - K @ H
            self.P_n = _sym(IKH @ self.P_n @ IKH.T + K @ K.T)
            nis = float(nu @ Sinv_nu)

        self.last_t, self.last_u = t, u_si
        self.step_index += 1
        return {"t": t, "x_pred_n": x_pred, "P_pred_n": P_pred,
                "x_filt_n": self.x_n.copy(), "P_filt_n": self.P_n.copy(),
                "Phi": Phi, "innovation": nu, "S": S, "nis": nis,
                "mask": mask}


def ekf_run(records, x0, P0=None, theta: ThetaParams = None,
            params: ModelParameters = None,
            quad: QuadratureRule = None) -> FilterResult:
    """Run the extended Kalman filter over uniformly sampled records.

    The belief (x0, P0) is the prior at the first record's time; each step
    folds in that record's observed outputs (missing components are dropped
    by row deletion), then predicts forward with a Joseph-form covariance
    update and explicit symmetrization.
    """
    params = params or ModelParameters()
    quad = quad or QuadratureRule(params.quadrature)
    theta = theta or params.theta
    t, us, ys = records_to_arrays(records)
    dt = check_uniform_dt(t)
    n = len(records)

    flt = OnlineFilter(x0, P0, theta, params, quad)
    xs_pred = np.empty((n, 5))
    Ps_pred = np.empty((n, 5, 5))
    xs_filt = np.empty((n, 5))
    Ps_filt = np.empty((n, 5, 5))
    Fs = np.empty((n, 5, 5))
    Fs[-1] = np.eye(5)  # pad; the smoother only needs gains up to n-2
    innovations, S_mats = [], []
    nis = np.zeros(n)
    for k in range(n):
        step = flt.advance(t[k], us[k], ys[k])
        xs_pred[k] = step["x_pred_n"]
        Ps_pred[k] = step["P_pred_n"]
        xs_filt[k] = step["x_filt_n"]
        Ps_filt[k] = step["P_filt_n"]
        if step["Phi"] is not None:
            Fs[k - 1] = step["Phi"]
        innovations.append(step["innovation"])
        S_mats.append(step["S"])
        nis[k] = step["nis"]

    return FilterResult(t=t, us=us, ys=ys, xs_pred_n=xs_pred, Ps_pred_n=Ps_pred,
                        xs_filt_n=xs_filt, Ps_filt_n=Ps_filt, Fs_disc_n=Fs,
                        innovations=innovations, S_matrices=S_mats,
                        obs_masks=~np.isnan(ys), nis=nis, scales=flt.D, dt=dt,
                        theta=theta)


# ---------------------------------------------------------------------------
# RTS smoother
# ---------------------------------------------------------------------------

def rts_smooth(fr: FilterResult) -> SmootherResult:
    """Fixed-interval RTS pass over a completed FilterResult."""
    n = len(fr.t)
    xs = fr.xs_filt_n.copy()
    Ps = fr.Ps_filt_n.copy()
    gains = np.zeros((n, 5, 5))
    for k in range(n - 2, -1, -1):
        P_pred = fr.Ps_pred_n[k + 1]
        try:
            J = np.linalg.solve(P_pred.T, (fr.Ps_filt_n[k] @ fr.Fs_disc_n[k].T).T).T
        except np.linalg.LinAlgError as exc:
            raise ConditioningError("singular predicted covariance",
                                    step=k + 1) from exc
        xs[k] = fr.xs_filt_n[k] + J @ (xs[k + 1] - fr.xs_pred_n[k + 1])
        Ps[k] = _sym(fr.Ps_filt_n[k] + J @ (Ps[k + 1] - P_pred) @ J.T)
        gains[k] = J
    return SmootherResult(t=fr.t, xs_smooth_n=xs, Ps_smooth_n=Ps,
                          gains_n=gains, scales=fr.scales)


# ---------------------------------------------------------------------------
# EM drift calibration
# ---------------------------------------------------------------------------

def _em_statistics(sm: SmootherResult, us, dt, params, quad):
    """Sufficient statistics of the one-step drift regression on the
    smoothed mean trajectory (normalized coordinates).

    Per state i:
      S_xx = sum x_j,i^2
      S_rx = sum r_j,i x_j,i   with r = x_{j+1} - x_j - dt phys(x_j)
      S_rr = sum r_j,i^2
    Because each drift coefficient multiplies only its own state, the
    Sigma_xi-weighted M-step splits into five scalar regressions minimized
    exactly by theta_i = S_rx,i / (dt S_xx,i).
    """
    xs = sm.xs_smooth_n
    D = sm.scales
    phys = transition_f(xs[:-1] * D, us[:-1], ThetaParams.zero(), params,
                        quad) / D
    r_hat = xs[1:] - xs[:-1] - dt * phys
    S_xx = np.sum(xs[:-1] ** 2, axis=0)
    S_rx = np.sum(r_hat * xs[:-1], axis=0)
    S_rr = np.sum(r_hat ** 2, axis=0)
    return S_xx, S_rx, S_rr


def _mstep_objective(stats, theta_arr, dt, w):
    """Sigma_xi-weighted one-step objective at theta."""
    S_xx, S_rx, S_rr = stats
    vals = S_rr - 2.0 * dt * theta_arr * S_rx + dt * dt * theta_arr ** 2 * S_xx
    return float(np.sum(w * vals))


def em_calibrate(records, theta0: ThetaParams = None, window: int = None,
                 params: ModelParameters = None, x0=None, P0=None,
                 quad: QuadratureRule = None, max_iterations: int = 50,
                 tol: float = 1e-8) -> CalibrationReport:
    """EM over the drift coefficients theta.

    E-step: EKF + RTS under the current theta.  M-step: because each theta
    multiplies only its own state, the weighted least-squares problem splits
    into five scalar regressions with a closed-form solution.  The reported
    objective pair per iteration is (value at the incoming theta, value at
    the minimizer) under that iteration's smoothed states.
    """
    params = params or ModelParameters()
    quad = quad or QuadratureRule(params.quadrature)
    theta = theta0 or ThetaParams.zero()
    if window is not None:
        records = records[-int(window):]
    if len(records) < 3:
        raise RejectedInputError("EM needs at least 3 records")
    if x0 is None:
        n_init = min(10, len(records))
        x0, P0_fit = initial_fit(records[:n_init], params)
        if P0 is None:
            P0 = P0_fit
    t, us, _ = records_to_arrays(records)
    dt = check_uniform_dt(t)
    sigma_xi = np.asarray(params.noise.sigma_xi, dtype=float)
    # objective weights in normalized coordinates
    w = (params.scales() / sigma_xi) ** 2

    report = CalibrationReport(thetas=[theta])
    for it in range(max_iterations):
        try:
            fr = ekf_run(records, x0, P0, theta, params, quad)
            sm = rts_smooth(fr)
        except (ConditioningError, FloatingPointError) as exc:
            raise CalibrationError(f"E-step failed: {exc}", iteration=it) from exc
        if not np.all(np.isfinite(sm.xs_smooth_n)):
            raise CalibrationError("divergent filter inside E-step", iteration=it)

        th_arr = theta.as_array()
        stats = _em_statistics(sm, us, dt, params, quad)
        S_xx, S_rx, _ = stats
        pre = _mstep_objective(stats, th_arr, dt, w)
        th_new = np.where(S_xx > 0.0, S_rx / (dt * np.where(S_xx > 0, S_xx, 1.0)),
                          0.0)
        post = _mstep_objective(stats, th_new, dt, w)

        report.objectives.append((pre, post))
        report.thetas.append(ThetaParams.from_array(th_new))
        report.n_iterations = it + 1
        delta = float(np.linalg.norm(th_new - th_arr))
        theta = report.thetas[-1]
        if delta < tol:
            report.converged = True
            break
    return report


# ---------------------------------------------------------------------------
# Forecasting
# ---------------------------------------------------------------------------

def forecast(belief, input_sequence, theta: ThetaParams = None,
             params: ModelParameters = None, quad: QuadratureRule = None,
             dt: float = 1.0, t0: float = 0.0) -> ForecastResult:
    """Open-loop propagation of a belief through an input sequence.

    No measurement updates: the mean runs through the Euler map, covariance
    through the linearized dynamics plus process noise, outputs through g
    with measurement noise added.  Step k of the result is the belief after
    k+1 ticks.
    """
    params = params or ModelParameters()
    quad = quad or QuadratureRule(params.quadrature)
    theta = theta or params.theta
    U = np.asarray([u.as_array() if hasattr(u, "as_array") else u
                    for u in input_sequence], dtype=float)
    K = len(U)
    if K < 1:
        raise RejectedInputError("forecast horizon must be >= 1")
    D = params.scales()
    Sigma_xi_n = params.noise.Sigma_xi() / np.outer(D, D) * dt
    Sigma_w = params.noise.Sigma_w()
    bounds = filter_bounds(params.geometry)
    eye = np.eye(5)

    x_si = _state_arr(belief.mean)
    P_n = np.asarray(belief.covariance, dtype=float) / np.outer(D, D)

    t = t0 + dt * np.arange(1, K + 1)
    xs = np.empty((K, 5))
    Pxs = np.empty((K, 5, 5))
    ys = np.empty((K, 5))
    Pys = np.empty((K, 5, 5))
    clamped = np.zeros((K, 5), dtype=bool)
    lo, hi = bounds
    for k in range(K):
        f0, F_cont = transition_with_jacobian(x_si, U[k], theta, params, quad)
        Phi = eye + dt * (F_cont * np.outer(1.0 / D, D))
        raw = x_si + dt * f0
        x_si = np.clip(raw, lo, hi)
        clamped[k] = x_si != raw
        P_n = _sym(Phi @ P_n @ Phi.T + Sigma_xi_n)
        H_si = jacobian_H(x_si, U[k], params)
        P_si = P_n * np.outer(D, D)
        xs[k] = x_si
        Pxs[k] = P_si
        ys[k] = output_g(x_si, U[k], params)
        Pys[k] = _sym(H_si @ P_si @ H_si.T + Sigma_w)
    return ForecastResult(t=t, state_means=xs, state_covs=Pxs,
                          output_means=ys, output_covs=Pys, clamped=clamped)


# ---------------------------------------------------------------------------
# Anomaly scoring
# ---------------------------------------------------------------------------

def anomaly_score(innovation, S):
    """Normalized innovation squared and its 95% chi-square exceedance flag."""
    nu = np.asarray(innovation, dtype=float)
    S = np.asarray(S, dtype=float)
    m = nu.size
    if m == 0:
        return 0.0, False
    try:
        nis = float(nu @ np.linalg.solve(S, nu))
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("singular innovation covariance") from exc
    return nis, nis > _CHI2_95[m]


def nis_threshold(m: int) -> float:
    return _CHI2_95[m]
