"""Linear net-moment estimators for planar magnetisations from vertical field data on a line."""

from .bep import (BepSolution, BepSpec, lambda_sweep, saturation_check, solve_fixed_lambda,
                  solve_for_M, solve_shifted, spectral_decay)
from .errors import (AssemblyError, BracketError, ContractError, DomainError, NetMomentError,
                     SingularityError, SolverError)
from .experiments import (BUILTINS, MomentReport, NoiseSpec, builtin_magnetization, estimate_moment,
                          estimators, noisy_estimate_bound, relative_error, true_moment)
from .kernels import Geometry, Interval
from .operators import (FieldSamples, Magnetization, a2_identity_check, adjoint_eval, adjoint_residual,
                        forward_coeffs, forward_field)
from .spectral import FourierVector, GramMatrix, gram_assemble, rhs_vector

__version__ = "0.1.0"
