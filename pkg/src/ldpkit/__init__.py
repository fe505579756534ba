"""Numerical toolkit for rate functions of kernel-weighted sums and paths.

The pieces fit together in layers: a catalog of log moment generating
functions, convex conjugation on top of them, the kernel-weighted rate
transform, bounded-variation path costs with graph metrics, and a tilted
Monte Carlo estimator with exact oracles for cross-checks.
"""

from .cgf import (CgfModel, DomainInterval, FullSpace, MODEL_FACTORIES,
                  centered_exponential, centered_poisson, gaussian,
                  parse_model, rademacher, synthetic_boundary)
from .conjugate import ConjugateResult, ConvexOracle, grad_inverse, legendre
from .errors import (AmbiguityError, DomainError, GradientRangeError,
                     LdpkitError, NonConvergenceError, NoSamplerError)
from .kernel_rate import (KernelRateProblem, KernelRateResult, d_f, e_f,
                          e_f_grad, ef_prime_range, i_f_conjugate,
                          i_f_explicit, m_plus_minus, minimizer,
                          variational_rate, x_grid)
from .kernels import (Kernel, affine, constant, identity, parse_kernel)
from .metrics import (GraphChain, completed_graph, rho_2, rho_2_prime,
                      rho_star)
from .montecarlo import (McEstimate, empirical_rate_curve, estimate_tail,
                         exact_tail_oracle, sample_traj, sample_weighted_sum)
from .paths import (CadlagPath, SphericalMeasure, directional, i_d,
                    lebesgue_split, pair, random_path, sup_functional, var)

__version__ = "0.1.0"

__all__ = [
    "AmbiguityError", "CadlagPath", "CgfModel", "ConjugateResult",
    "ConvexOracle", "DomainError", "DomainInterval", "FullSpace",
    "GradientRangeError", "GraphChain", "Kernel", "KernelRateProblem",
    "KernelRateResult", "LdpkitError", "McEstimate", "MODEL_FACTORIES",
    "NoSamplerError", "NonConvergenceError", "SphericalMeasure", "affine",
    "centered_exponential", "centered_poisson", "completed_graph",
    "constant", "d_f", "directional", "e_f", "e_f_grad", "ef_prime_range",
    "empirical_rate_curve", "estimate_tail", "exact_tail_oracle",
    "gaussian", "grad_inverse", "i_d", "i_f_conjugate", "i_f_explicit",
    "identity", "legendre", "lebesgue_split", "m_plus_minus", "minimizer",
    "pair", "parse_kernel", "parse_model", "rademacher", "random_path",
    "rho_2", "rho_2_prime", "rho_star", "sample_traj",
    "sample_weighted_sum", "sup_functional", "synthetic_boundary", "var",
    "variational_rate", "x_grid",
]
