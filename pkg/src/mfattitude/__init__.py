"""Bayesian attitude estimation on SO(3) with matrix Fisher distributions."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (CollinearReferences, ConfigError, DegenerateMode, EfficiencyGuard,
                     EstimationError, IncompatibleNoiseModel, NoConvergence, NonAttainableMoment,
                     NonSkewInput, OverflowGuard, SingularInnovation, ZeroMean)
from .matrix_fisher import MatrixFisher, first_moment, fit_from_moment, log_c, mode
from .measurements import (Gaussian, GyroSample, IsotropicGaussian, VectorMeasurement,
                           VonMisesFisher)
from .estimator import EstimatorState, UtConfig, correct_full, propagate, step, wahba_svd
