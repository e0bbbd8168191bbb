"""Separable p-harmonic exponents and eigenfunctions on spherical domains."""

from .cone import (ConeDomain, ConeField, ConeGrid, TauFamily,
                   contraction_check, decay_fit, deformation_family,
                   diagnostic_pair, nondegeneracy_check, sandwich_check,
                   separable_lift, solve_truncated, tau_lipschitz_check,
                   write_cone_report)
from .errors import (BracketFailure, ComplementPolar, ConeSolveError,
                     ConfigError, ContractionFailure, DegenerateWeight,
                     EigenIterError, EmptyDomain, FitError, IntegratorError,
                     MeshError, MonotonicityViolation, NegativeGap,
                     NondegeneracyFailure, OutsideDomain, PicardError,
                     PositivityError, RangeError, SpheigError)
from .exponent import (BracketResult, exponent_bracket, solve_domain,
                       write_bracket_report)
from .fem_sphere import (ArcMesh, SurfaceMesh, assemble_linearized,
                         assemble_weighted, cap_mesh, evaluate_residual,
                         load_mesh, polygon_mesh, save_mesh, solve_nonlinear)
from .fields import Branch, ColatGrid, DiscreteField, Eigenpair
from .geometry import (DomainFamily, DomainKind, Direction, PParams,
                       SphericalDomain, boundary_distance, expand,
                       parse_domain_file, shrink, write_domain_file)
from .ode_axisym import ShootResult, first_zero_at, shoot, solve_beta
from .verify import (SubSuperPair, build_sub_super, convexity_bound_check,
                     ellipticity_check, energy_identity_check,
                     homogeneity_check, power_subsolution_check, run_suite,
                     subsolution_sign_check, sup_ratio,
                     vector_inequality_check)

__version__ = "0.1.0"

__all__ = [
    "ArcMesh", "BracketFailure", "BracketResult", "Branch", "ColatGrid",
    "ComplementPolar", "ConeDomain", "ConeField", "ConeGrid",
    "ConeSolveError", "ConfigError", "ContractionFailure",
    "DegenerateWeight", "Direction", "DiscreteField", "DomainFamily",
    "DomainKind", "EigenIterError", "Eigenpair", "EmptyDomain", "FitError",
    "IntegratorError", "MeshError", "MonotonicityViolation", "NegativeGap",
    "NondegeneracyFailure", "OutsideDomain", "PParams", "PicardError",
    "PositivityError", "RangeError", "ShootResult", "SphericalDomain",
    "SpheigError", "SubSuperPair", "SurfaceMesh", "TauFamily",
    "assemble_linearized",
    "assemble_weighted", "boundary_distance", "build_sub_super", "cap_mesh",
    "contraction_check", "convexity_bound_check", "decay_fit",
    "deformation_family", "diagnostic_pair", "ellipticity_check",
    "energy_identity_check", "evaluate_residual", "expand",
    "exponent_bracket", "first_zero_at", "homogeneity_check", "load_mesh",
    "nondegeneracy_check", "parse_domain_file", "polygon_mesh",
    "power_subsolution_check", "run_suite", "sandwich_check", "save_mesh",
    "separable_lift", "shoot", "shrink", "solve_beta", "solve_domain",
    "solve_nonlinear", "solve_truncated", "subsolution_sign_check",
    "sup_ratio",
    "tau_lipschitz_check", "vector_inequality_check", "write_bracket_report",
    "write_cone_report", "write_domain_file", "__version__",
]
