"""Online mirror descent with Bregman regularizers for relatively smooth costs."""

from .costs import (CostSequence, SmoothnessCertificate, certify_relative_smoothness,
                    doptimal_sequence, poisson_sequence, synthetic_sequence)
from .errors import (CertificationError, ConfigError, ConvergenceWarning, DomainError,
                     InputError, NumericalError, OmdLabError, SolverError)
from .geometry import NormKind, PositiveBox, TruncatedSimplex, contains, diameter, norm
from .kernels import BACKEND
from .omd import (OmdConfig, Trajectory, comparator_sequence, mirror_step, offline_minimizer,
                  run_omd)
from .regret import (RegretReport, dynamic_regret, evaluate_run, functional_variation,
                     gradient_variation, path_length, static_regret, theorem1_bound,
                     theorem2_bound)
from .regularizers import BregmanConstants, RegKind, Regularizer, bregman, bregman_constants, make

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BregmanConstants", "CertificationError", "ConfigError", "ConvergenceWarning",
    "CostSequence", "DomainError", "InputError", "NormKind", "NumericalError", "OmdConfig",
    "OmdLabError", "PositiveBox", "RegKind", "RegretReport", "Regularizer",
    "SmoothnessCertificate", "SolverError", "Trajectory", "TruncatedSimplex", "bregman",
    "bregman_constants", "certify_relative_smoothness", "comparator_sequence", "contains",
    "diameter", "doptimal_sequence", "dynamic_regret", "evaluate_run", "functional_variation",
    "gradient_variation", "make", "mirror_step", "norm", "offline_minimizer", "path_length",
    "poisson_sequence", "run_omd", "static_regret", "synthetic_sequence", "theorem1_bound",
    "theorem2_bound",
]
