"""Digital twin of an aerosol-jet printer."""

from .estimation import (CalibrationReport, FilterResult, ForecastResult,
                         SmootherResult, anomaly_score, ekf_run, em_calibrate,
                         estimate_initial_state, forecast, rts_smooth)
from .estimator import TwinStateEstimator
from .params import (GeometryConstants, ModelParameters, NoiseSpec,
                     OutputCoefficients, load_parameters, save_parameters,
                     validate_parameters, with_overrides)
from .physics import (DropletDistribution, QuadratureRule, jacobian_F,
                      jacobian_H, lognormal_pdf, net_generation_H,
                      nozzle_deposition_rate, output_g, pressures,
                      resistance_nozzle_tip, resistance_tube, step_euler,
                      stokes_einstein_D, survival_diffusion,
                      survival_gravitational, transition_f,
                      tube_deposition_rate)
from .profiles import (CrossSection, LineMetrics, cfd_profile_metrics,
                       extract_grayscale_metrics, material_flow,
                       moving_average, read_cross_section,
                       write_cross_section)
from .simulator import (FaultSpec, Scenario, SimulationTrace, load_scenario,
                        probe_latent, render_grayscale, save_scenario,
                        shipped_scenario, simulate, synth_profile)
from .types import (GaussianBelief, InputVector, OutputVector, StateVector,
                    ThetaParams, TimeSeriesRecord)
from .units import from_si, to_si

__version__ = "0.1.0"
