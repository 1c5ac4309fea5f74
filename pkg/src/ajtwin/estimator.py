"""scikit-learn style front end for the estimation stack.

``TwinStateEstimator.fit`` consumes a sequence of TimeSeriesRecords (or a
(t, U, Y) array triple), runs the initial-state fit, the EKF, optionally the
RTS smoother and EM drift calibration, and exposes the trajectories as
fitted attributes.  ``predict`` produces open-loop output forecasts, which
lets the twin drop into pipelines and grid searches like any estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .errors import RejectedInputError
from .estimation import (ekf_run, em_calibrate, estimate_initial_state,
                         forecast, rts_smooth)
from .params import ModelParameters, load_parameters
from .types import (GaussianBelief, StateVector, ThetaParams, TimeSeriesRecord,
                    records_to_arrays)


def as_records(X):
    """Accept a record list or a (t, U, Y) triple of arrays."""
    if isinstance(X, (list, tuple)) and len(X) == 3 and not isinstance(X[0], TimeSeriesRecord):
        t, U, Y = (np.asarray(a, dtype=float) for a in X)
        if U.shape != (t.size, 3) or Y.shape != (t.size, 5):
            raise RejectedInputError("expected arrays t (n,), U (n,3), Y (n,5)")
        return [TimeSeriesRecord.make(t[i], U[i], Y[i]) for i in range(t.size)]
    recs = list(X)
    if not all(isinstance(r, TimeSeriesRecord) for r in recs):
        raise RejectedInputError("expected TimeSeriesRecords or (t, U, Y) arrays")
    return recs


class TwinStateEstimator(BaseEstimator):
    """Latent-state tracker with the ecosystem's fit/predict surface.

    Parameters
    ----------
    params : ModelParameters or None
        Model bundle; None loads the shipped defaults.
    smooth : bool
        Run the RTS pass after filtering.
    calibrate : bool
        Run EM over the drift coefficients before the final filter pass.
    em_window : int or None
        Trailing window length for EM; None uses the full record.
    init_window : int
        Records used by the constrained initial-state fit.
    theta : ThetaParams or None
        Starting drift coefficients (None = zero).
    """

    def __init__(self, params=None, smooth=True, calibrate=False,
                 em_window=None, init_window=10, theta=None):
        self.params = params
        self.smooth = smooth
        self.calibrate = calibrate
        self.em_window = em_window
        self.init_window = init_window
        self.theta = theta

    def _bundle(self) -> ModelParameters:
        if self.params is None:
            return load_parameters()
        return self.params

    def fit(self, X, y=None):
        records = as_records(X)
        params = self._bundle()
        theta = self.theta or ThetaParams.zero()
        n_init = min(self.init_window, len(records))
        self.x0_ = estimate_initial_state(records[:n_init], params)

        if self.calibrate:
            self.calibration_report_ = em_calibrate(
                records, theta0=theta, window=self.em_window, params=params,
                x0=self.x0_)
            theta = self.calibration_report_.theta
        self.theta_ = theta

        self.filter_result_ = ekf_run(records, self.x0_, theta=theta,
                                      params=params)
        self.states_ = self.filter_result_.states_si
        self.covariances_ = self.filter_result_.covariances_si
        if self.smooth:
            self.smoother_result_ = rts_smooth(self.filter_result_)
            self.smoothed_states_ = self.smoother_result_.states_si
            self.smoothed_covariances_ = self.smoother_result_.covariances_si
        self.nis_ = self.filter_result_.nis
        return self

    def current_belief(self) -> GaussianBelief:
        self._check_fitted()
        return self.filter_result_.belief(len(self.filter_result_.t) - 1)

    def predict(self, U, dt=1.0):
        """Open-loop output forecast from the last filtered belief.

        U is a (K, 3) SI input sequence; returns the (K, 5) output means.
        The full forecast (covariances, clamp flags) is kept on
        ``forecast_result_``.
        """
        self._check_fitted()
        params = self._bundle()
        self.forecast_result_ = forecast(self.current_belief(), np.asarray(U),
                                         theta=self.theta_, params=params,
                                         dt=dt,
                                         t0=float(self.filter_result_.t[-1]))
        return self.forecast_result_.output_means

    def score(self, X, y=None):
        """Mean negative NIS of a filter pass over X (higher is better)."""
        records = as_records(X)
        params = self._bundle()
        fr = ekf_run(records, self.x0_, theta=self.theta_, params=params)
        return -float(np.mean(fr.nis))

    def _check_fitted(self):
        if not hasattr(self, "filter_result_"):
            raise RejectedInputError("estimator is not fitted")
