"""Saturated absorption imaging: closed-form model, column transport solver,
per-pixel calibration and synthetic data."""
from .calibration import (CalibrationMap, LinearFit, PixelCalibration, TransmissionSeries,
                          calibrate_pixel, calibrate_stack, compute_transmission,
                          linear_fit_alpha_b)
from .errors import ConvergenceError, DomainError, SatAbsError, ValidationError
from .kernels import Tolerance, bracket_root, lambert_w0
from .model import (ProbeGeometry, RatePair, SaturationState, alpha_diffusive_asymptote,
                    alpha_from_transmission, alpha_highsat_asymptote, od_from_transmission,
                    scattering_rates, transmission_from_od)
from .transport import (DensityProfile, TransportParams, TransportSolution, build_grid,
                        model_alpha, solve_transport, sweep_alpha_vs_b, total_transmission)

__version__ = "0.1.0"
