"""General mixed affine surface areas of smooth convex bodies.

Support-function representations of C2+ bodies, the four families of mixed
functionals, executable checks of their identities and inequalities, and
planar illumination surface bodies.
"""

from .bodies import (Ball, Fourier2D, LinearImageOfBall, LinearMap, PerturbedBall3D,
                     linear_image, polar, random_body, volume)
from .errors import (ConvergenceError, MixedAffineError, NonFiniteError, ValidationError)
from .functionals import (FunctionalSpec, diagonal_asa, general_mixed_asa, ith_mixed_asa,
                          lp_asa, mixed)
from .harness import InequalityReport, run_property_suite
from .illumination import IlluminationProblem, geometric_limit_estimate
from .quadrature import build_rule, integrate
from .scalar import named_nonhomogeneous, power_conc, power_conv

__version__ = "0.1.0"

__all__ = [
    "Ball", "Fourier2D", "LinearImageOfBall", "LinearMap", "PerturbedBall3D", "linear_image",
    "polar", "random_body", "volume", "ConvergenceError", "MixedAffineError", "NonFiniteError",
    "ValidationError", "FunctionalSpec", "diagonal_asa", "general_mixed_asa", "ith_mixed_asa",
    "lp_asa", "mixed", "InequalityReport", "run_property_suite", "IlluminationProblem",
    "geometric_limit_estimate", "build_rule", "integrate", "named_nonhomogeneous",
    "power_conc", "power_conv",
]
